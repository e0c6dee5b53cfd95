//! JSON formats for specs, nodes and scenarios, and the trajectory CSV.
//!
//! Complex numbers are `[re, im]` and matrices are lists of rows. A block may
//! also be given as a flat row-major list of `p * p` entries.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{ConvergenceRow, NodeSequence};
use crate::density::{Density, DensitySpec};
use crate::hankel::{moments_from_density, HankelSpec};
use crate::matcore::{CMatrix, C64};
use crate::quad::Rule;
use crate::snode::SNode;
use crate::toeplitz::ToeplitzSpec;
use crate::{Error, Result};

/// Largest accepted input, in bytes.
pub const MAX_INPUT_BYTES: usize = 4 << 20;
/// Largest accepted block size `p`.
pub const MAX_P: usize = 16;
/// Largest accepted block order `n` and scenario `max_order`.
pub const MAX_ORDER: usize = 64;
/// Largest accepted node dimension.
pub const MAX_NODE_DIM: usize = 512;

type Entry = [f64; 2];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Block {
    Rows(Vec<Vec<Entry>>),
    Flat(Vec<Entry>),
}

impl Block {
    fn of(m: &CMatrix) -> Self {
        Block::Rows(
            (0..m.rows())
                .map(|i| {
                    (0..m.cols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect(),
        )
    }

    fn square(self, p: usize, what: &str) -> Result<CMatrix> {
        let m = self.matrix(what)?;
        if m.shape() != (p, p) {
            // A flat list of p * p entries is the row-major form.
            if m.rows() == 1 && m.cols() == p * p {
                return CMatrix::from_row_major(p, p, m.as_slice().to_vec()).map_err(Error::from);
            }
            return Err(parse_err(format!(
                "{what} must be {p}x{p}, got {:?}",
                m.shape()
            )));
        }
        Ok(m)
    }

    fn matrix(self, what: &str) -> Result<CMatrix> {
        let rows = match self {
            Block::Rows(rows) => rows,
            Block::Flat(flat) => vec![flat],
        };
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(parse_err(format!("{what} is empty")));
        }
        if rows.len() > MAX_NODE_DIM || cols > MAX_NODE_DIM * MAX_NODE_DIM {
            return Err(parse_err(format!("{what} exceeds the size cap")));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(parse_err(format!("{what} has ragged rows")));
        }
        Ok(CMatrix::from_fn(rows.len(), cols, |i, j| {
            C64::new(rows[i][j][0], rows[i][j][1])
        }))
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    if text.len() > MAX_INPUT_BYTES {
        return Err(parse_err(format!("input exceeds {MAX_INPUT_BYTES} bytes")));
    }
    serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data always serializes")
}

fn check_p(p: usize) -> Result<()> {
    if p == 0 || p > MAX_P {
        return Err(parse_err(format!("p must be in 1..={MAX_P}, got {p}")));
    }
    Ok(())
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(parse_err(format!(
            "order must be in 1..={MAX_ORDER}, got {n}"
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToeplitzJson {
    p: usize,
    n: usize,
    s: Vec<Block>,
    nu: Block,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HankelJson {
    p: usize,
    n: usize,
    #[serde(rename = "H")]
    h: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SNodeJson {
    p: usize,
    #[serde(rename = "A")]
    a: Block,
    #[serde(rename = "S")]
    s: Block,
    #[serde(rename = "Phi1")]
    phi1: Block,
    #[serde(rename = "Phi2")]
    phi2: Block,
}

fn toeplitz_from(raw: ToeplitzJson) -> Result<ToeplitzSpec> {
    check_p(raw.p)?;
    check_order(raw.n)?;
    if raw.s.len() != raw.n {
        return Err(parse_err(format!(
            "expected {} Toeplitz blocks, got {}",
            raw.n,
            raw.s.len()
        )));
    }
    let s = raw
        .s
        .into_iter()
        .enumerate()
        .map(|(k, b)| b.square(raw.p, &format!("s[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    ToeplitzSpec::new(raw.p, s, raw.nu.square(raw.p, "nu")?)
}

fn hankel_from(raw: HankelJson) -> Result<HankelSpec> {
    check_p(raw.p)?;
    check_order(raw.n)?;
    if raw.h.len() != 2 * raw.n - 1 {
        return Err(parse_err(format!(
            "expected {} Hankel moments, got {}",
            2 * raw.n - 1,
            raw.h.len()
        )));
    }
    let h = raw
        .h
        .into_iter()
        .enumerate()
        .map(|(k, b)| b.square(raw.p, &format!("H[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    HankelSpec::new(raw.p, h)
}

pub fn parse_toeplitz_spec(text: &str) -> Result<ToeplitzSpec> {
    toeplitz_from(from_json(text)?)
}

pub fn toeplitz_spec_json(spec: &ToeplitzSpec) -> String {
    to_json(&ToeplitzJson {
        p: spec.p(),
        n: spec.n(),
        s: spec.blocks().iter().map(Block::of).collect(),
        nu: Block::of(spec.nu()),
    })
}

pub fn parse_hankel_spec(text: &str) -> Result<HankelSpec> {
    hankel_from(from_json(text)?)
}

pub fn hankel_spec_json(spec: &HankelSpec) -> String {
    to_json(&HankelJson {
        p: spec.p(),
        n: spec.n(),
        h: spec.moments().iter().map(Block::of).collect(),
    })
}

pub fn parse_snode(text: &str) -> Result<SNode> {
    let raw: SNodeJson = from_json(text)?;
    check_p(raw.p)?;
    let a = raw.a.matrix("A")?;
    if a.rows() > MAX_NODE_DIM {
        return Err(parse_err(format!("node dimension exceeds {MAX_NODE_DIM}")));
    }
    SNode::new(
        raw.p,
        a,
        raw.s.matrix("S")?,
        raw.phi1.matrix("Phi1")?,
        raw.phi2.matrix("Phi2")?,
    )
}

pub fn snode_json(node: &SNode) -> String {
    to_json(&SNodeJson {
        p: node.p(),
        a: Block::of(node.a()),
        s: Block::of(node.s()),
        phi1: Block::of(node.phi1()),
        phi2: Block::of(node.phi2()),
    })
}

pub fn parse_density_spec(text: &str) -> Result<DensitySpec> {
    let spec: DensitySpec = from_json(text)?;
    spec.build()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Toeplitz,
    Hankel,
}

/// Input of an asymptotics run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub family: Family,
    pub density: Option<DensitySpec>,
    pub lambda: C64,
    pub max_order: usize,
    spec: InlineSpec,
}

#[derive(Debug, Clone)]
enum InlineSpec {
    Toeplitz(ToeplitzSpec),
    Hankel(HankelSpec),
    FromDensity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    family: Family,
    #[serde(default)]
    density: Option<DensitySpec>,
    lambda: Entry,
    max_order: usize,
    #[serde(default)]
    spec: Option<serde_json::Value>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: ScenarioJson = from_json(text)?;
    check_order(raw.max_order)?;
    let lambda = C64::new(raw.lambda[0], raw.lambda[1]);
    if !(lambda.im > 0.0 && lambda.is_finite()) {
        return Err(Error::NotInUpperHalfPlane(lambda));
    }
    if let Some(d) = &raw.density {
        d.build()?;
    }
    let decode = |v: serde_json::Value| -> Result<_> {
        Ok(match raw.family {
            Family::Toeplitz => InlineSpec::Toeplitz(toeplitz_from(
                serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))?,
            )?),
            Family::Hankel => InlineSpec::Hankel(hankel_from(
                serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))?,
            )?),
        })
    };
    let spec = match (raw.spec, raw.family, &raw.density) {
        (Some(v), _, _) => decode(v)?,
        (None, Family::Hankel, Some(_)) => InlineSpec::FromDensity,
        (None, Family::Toeplitz, _) => {
            return Err(parse_err("a toeplitz scenario needs an inline spec"));
        }
        (None, Family::Hankel, None) => {
            return Err(parse_err("a hankel scenario needs a spec or a density"));
        }
    };
    let order = match &spec {
        InlineSpec::Toeplitz(s) => s.n(),
        InlineSpec::Hankel(s) => s.n(),
        InlineSpec::FromDensity => raw.max_order,
    };
    if order < raw.max_order {
        return Err(parse_err(format!(
            "spec has order {order}, below max_order {}",
            raw.max_order
        )));
    }
    Ok(Scenario {
        family: raw.family,
        density: raw.density,
        lambda,
        max_order: raw.max_order,
        spec,
    })
}

impl Scenario {
    /// Nested nodes of orders `1..=max_order`. Hankel moments come from the
    /// density in closed form where known, otherwise by quadrature.
    pub fn sequence(&self) -> Result<NodeSequence> {
        match &self.spec {
            InlineSpec::Toeplitz(s) => NodeSequence::toeplitz(&s.truncated(self.max_order)?),
            InlineSpec::Hankel(s) => NodeSequence::hankel(&s.truncated(self.max_order)?),
            InlineSpec::FromDensity => {
                let spec = self.density.as_ref().expect("checked at parse time");
                let density = spec.build()?;
                let h = (0..2 * self.max_order - 1)
                    .map(|k| match spec.closed_form_moment(k) {
                        Some(v) => Ok(CMatrix::scalar(C64::new(v, 0.0))),
                        None => moments_from_density(&density, k, Rule::default()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                NodeSequence::hankel(&HankelSpec::new(1, h)?)
            }
        }
    }

    pub fn reference_density(&self) -> Result<Option<Density>> {
        self.density.as_ref().map(DensitySpec::build).transpose()
    }
}

fn sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Header of the trajectory CSV for block size `p`.
pub fn trajectory_header(p: usize) -> String {
    let mut cols = vec!["k".to_string()];
    for i in 0..p {
        for j in 0..p {
            cols.push(format!("rho_inv_{i}{j}_re"));
            cols.push(format!("rho_inv_{i}{j}_im"));
        }
    }
    cols.extend(["det_rho_inv", "target", "gap", "cond"].map(String::from));
    cols.join(",")
}

/// Trajectory CSV with 17 significant digits; absent target and gap are
/// empty fields.
pub fn trajectory_csv(p: usize, rows: &[ConvergenceRow]) -> String {
    let mut out = trajectory_header(p);
    out.push('\n');
    for row in rows {
        let mut cols = vec![row.k.to_string()];
        for i in 0..p {
            for j in 0..p {
                cols.push(sig17(row.rho_inv[(i, j)].re));
                cols.push(sig17(row.rho_inv[(i, j)].im));
            }
        }
        cols.push(sig17(row.det_rho_inv));
        cols.push(row.target.map(sig17).unwrap_or_default());
        cols.push(row.gap.map(sig17).unwrap_or_default());
        cols.push(sig17(row.cond));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toeplitz_round_trip_and_flat_blocks() {
        let text = r#"{"p":1,"n":2,"s":[[[[2,0]]],[[0.5,0.25]]],"nu":[[[0,0]]]}"#;
        let spec = parse_toeplitz_spec(text).unwrap();
        assert_eq!(spec.block(1)[(0, 0)], C64::new(0.5, 0.25));
        let again = parse_toeplitz_spec(&toeplitz_spec_json(&spec)).unwrap();
        assert_eq!(again.blocks(), spec.blocks());
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            r#"{"p":1,"n":2,"s":[[[[2,0]]]],"nu":[[[0,0]]]}"#,
            r#"{"p":0,"n":1,"s":[],"nu":[]}"#,
            r#"{"p":1,"n":1,"H":[[[1,0]]],"x":1}"#,
            r#"{"p":2,"n":1,"H":[[[1,0],[0,0]]]}"#,
            "[",
        ] {
            assert!(
                parse_toeplitz_spec(bad).is_err() && parse_hankel_spec(bad).is_err(),
                "{bad}"
            );
        }
        let p2 = r#"{"p":2,"n":1,"H":[[[1,0],[0,0],[0,0],[1,0]]]}"#;
        assert_eq!(
            parse_hankel_spec(p2).unwrap().moments()[0],
            CMatrix::identity(2)
        );
    }

    #[test]
    fn scenario_from_density_uses_closed_moments() {
        let text =
            r#"{"family":"hankel","density":{"kind":"exp_sqrt"},"lambda":[0,1],"max_order":3}"#;
        let sc = parse_scenario(text).unwrap();
        let seq = sc.sequence().unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.nodes()[2].s()[(2, 2)].re, 362880.0);
        let below =
            r#"{"family":"hankel","lambda":[0,-1],"max_order":3,"density":{"kind":"exp_sqrt"}}"#;
        assert!(matches!(
            parse_scenario(below),
            Err(Error::NotInUpperHalfPlane(_))
        ));
    }

    #[test]
    fn csv_is_header_only_when_empty() {
        assert_eq!(
            trajectory_csv(1, &[]),
            "k,rho_inv_00_re,rho_inv_00_im,det_rho_inv,target,gap,cond\n"
        );
        assert_eq!(sig17(0.1), "1.0000000000000001e-1");
    }
}
