//! Block Hankel S-nodes for the truncated Hamburger moment problem.

use std::f64::consts::PI;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::matcore::{
    assert_hermitian, big_j, cholesky_pd, default_herm_tol, lstsq, min_eigenvalue, CMatrix,
    LinalgError, C64, I,
};
use crate::quad::{integrate_theta, Rule};
use crate::snode::{Frame, ParamPair, SNode, WeylFn};

#[derive(Debug, Clone, PartialEq)]
pub struct HankelSpec {
    p: usize,
    h: Vec<CMatrix>,
}

impl HankelSpec {
    /// Moments `H_0, ..., H_{2n-2}`; the count must be odd.
    pub fn new(p: usize, h: Vec<CMatrix>) -> Result<Self> {
        if p == 0 || h.is_empty() || h.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "Hankel spec needs p >= 1 and an odd number of moments, got {}",
                h.len()
            )));
        }
        if h.iter().any(|b| b.shape() != (p, p)) {
            return Err(
                LinalgError::DimensionMismatch(format!("moment blocks must be {p}x{p}")).into(),
            );
        }
        if h.iter().any(|b| !b.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        for b in &h {
            assert_hermitian(b, default_herm_tol(b))?;
        }
        Ok(Self { p, h })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Block order `n`.
    pub fn n(&self) -> usize {
        self.h.len().div_ceil(2)
    }

    pub fn moments(&self) -> &[CMatrix] {
        &self.h
    }

    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.n(),
            });
        }
        Self::new(self.p, self.h[..2 * k - 1].to_vec())
    }

    /// `H(k) = {H_{i+j}}` for `k <= n`.
    pub fn assemble(&self, k: usize) -> CMatrix {
        assert!(k <= self.n(), "order {k} exceeds spec order {}", self.n());
        let p = self.p;
        let mut m = CMatrix::zeros(k * p, k * p);
        for i in 0..k {
            for j in 0..k {
                m.set_block(i * p, j * p, &self.h[i + j]);
            }
        }
        m
    }

    fn node_parts(&self, k: usize) -> (CMatrix, CMatrix, CMatrix) {
        let p = self.p;
        let a = CMatrix::from_fn(k * p, k * p, |r, c| {
            if r >= p && c == r - p {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let mut phi1 = CMatrix::zeros(k * p, p);
        for i in 1..k {
            phi1.set_block(i * p, 0, &(&self.h[i - 1] * (-I)));
        }
        let mut phi2 = CMatrix::zeros(k * p, p);
        phi2.set_block(0, 0, &CMatrix::identity(p));
        (a, phi1, phi2)
    }
}

/// Node `{A, H(n), [Phi1 Phi2]}` with `A` the block down-shift,
/// `Phi2 = [I; 0; ...]` and `Phi1 = -i (0, H_0, ..., H_{n-2})`.
pub fn build_hankel_node(spec: &HankelSpec) -> Result<SNode> {
    let (a, phi1, phi2) = spec.node_parts(spec.n());
    SNode::new(spec.p, a, spec.assemble(spec.n()), phi1, phi2)
}

/// `omega_k` (`p x 2p`) and `t_{k+1}` for `k = 0, ..., n-1`.
#[derive(Debug, Clone)]
pub struct OmegaChain {
    p: usize,
    pub omega: Vec<CMatrix>,
    /// `t[k] = t_{k+1}`.
    pub t: Vec<CMatrix>,
}

/// Worst residuals of the chain algebra.
#[derive(Debug, Clone, Copy)]
pub struct OmegaReport {
    /// `max_k |omega_k J omega_k*|`.
    pub isotropy: f64,
    /// `max_k |i omega_k J omega_{k-1}* - t_{k+1}|`.
    pub coupling: f64,
    /// `|omega_0 - [0 t_1]|`.
    pub initial: f64,
    /// Smallest eigenvalue over all `t_k`.
    pub min_t_eigenvalue: f64,
}

impl OmegaChain {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn report(&self) -> Result<OmegaReport> {
        let p = self.p;
        let j = big_j(p);
        let mut isotropy: f64 = 0.0;
        let mut coupling: f64 = 0.0;
        let mut min_t = f64::INFINITY;
        for (k, w) in self.omega.iter().enumerate() {
            isotropy = isotropy.max((&(w * &j) * &w.adjoint()).max_abs());
            if k > 0 {
                let lhs = (&(w * &j) * &self.omega[k - 1].adjoint()) * I;
                coupling = coupling.max((&lhs - &self.t[k]).max_abs());
            }
            min_t = min_t.min(min_eigenvalue(&self.t[k])?);
        }
        let start = CMatrix::hstack(&[&CMatrix::zeros(p, p), &self.t[0]]);
        Ok(OmegaReport {
            isotropy,
            coupling,
            initial: (&self.omega[0] - &start).max_abs(),
            min_t_eigenvalue: min_t,
        })
    }

    /// Factors `w_{k+1}(lambda) = I + (i/lambda) J omega_k* t_{k+1}^{-1} omega_k`,
    /// ordered `w_1, ..., w_n`.
    pub fn factors(&self, lambda: C64) -> Result<Vec<CMatrix>> {
        if lambda.norm() <= 1e-300 {
            return Err(Error::PoleAtLambda(lambda));
        }
        let j = big_j(self.p);
        let id = CMatrix::identity(2 * self.p);
        self.omega
            .iter()
            .zip(&self.t)
            .map(|(w, t)| {
                let q = &w.adjoint() * &t.solve(w)?;
                Ok(&id + &((&j * &q) * (I / lambda)))
            })
            .collect()
    }
}

/// `omega_k` is the last block row of `H(k+1)^{-1}` applied to `Pi(k+1)`;
/// `t_r` is the last diagonal block of `H(r)^{-1}`.
pub fn hankel_chain(spec: &HankelSpec) -> Result<OmegaChain> {
    let p = spec.p;
    let n = spec.n();
    let mut omega = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    for r in 1..=n {
        let chol = match cholesky_pd(&spec.assemble(r)) {
            Ok(f) => f,
            Err(LinalgError::NotPositiveDefinite { .. }) => {
                return Err(Error::NotPositiveDefiniteAt { order: r })
            }
            Err(e) => return Err(e.into()),
        };
        let mut unit = CMatrix::zeros(r * p, p);
        unit.set_block((r - 1) * p, 0, &CMatrix::identity(p));
        let row = chol.solve(&unit)?.adjoint();
        let (_, phi1, phi2) = spec.node_parts(r);
        let pi = CMatrix::hstack(&[&phi1, &phi2]);
        t.push(row.block(0, (r - 1) * p, p, p).hermitian_part());
        omega.push(&row * &pi);
    }
    Ok(OmegaChain { p, omega, t })
}

/// `H_k = int t^k P(t) dt` with the `tan` substitution; the rule's own
/// refinement check must agree within `1e-8` relative.
pub fn moments_from_density(density: &Density, k: usize, rule: Rule) -> Result<CMatrix> {
    let (lo, hi) = density.support();
    let q = integrate_theta(lo, hi, density.breakpoints(), rule, 1e-8, |t: f64| {
        density.eval(t).scale_re(t.powi(k as i32) * (1.0 + t * t))
    })?;
    Ok(q.value.hermitian_part())
}

/// Moments extracted from a Weyl function by two routes plus the top-moment
/// inequality.
#[derive(Debug, Clone)]
pub struct MomentRecovery {
    /// Laurent route, `H_0 .. H_{2n-3}`.
    pub laurent: Vec<CMatrix>,
    /// Quadrature of `t^k mu'`, `k = 0 .. 2n-3`.
    pub quadrature: Vec<CMatrix>,
    /// `int t^{2n-2} d mu`.
    pub top_moment: CMatrix,
    /// `H_{2n-2}`, read from the node.
    pub top_bound: CMatrix,
    /// Largest eigenvalue of `top_moment - top_bound`; nonpositive when the
    /// inequality holds.
    pub excess: f64,
    /// Relative drift of the Laurent fits between radii `R` and `2R`.
    pub laurent_drift: f64,
    pub radius: f64,
}

/// Number of basis terms added beyond `z^{-(2n-2)}` in the Laurent fit.
const LAURENT_EXTRA_TERMS: usize = 8;

/// Least-squares fit of `-phi(z) ~ sum_k c_k z^{-(k+1)}` on the arc
/// `|z| = radius`, `arg z in [pi/16, 15pi/16]`.
fn laurent_fit(weyl: &WeylFn, radius: f64, terms: usize) -> Result<Vec<CMatrix>> {
    let p = weyl.p();
    let samples = (4 * terms).max(64);
    let mut basis = CMatrix::zeros(samples, terms);
    let mut values = CMatrix::zeros(samples, p * p);
    for s in 0..samples {
        let arg = PI / 16.0 + (14.0 * PI / 16.0) * s as f64 / (samples - 1) as f64;
        let u = C64::from_polar(1.0, -arg);
        let z = C64::from_polar(radius, arg);
        // Scaled basis (R/z)^{k+1} keeps the columns of unit size.
        for k in 0..terms {
            basis[(s, k)] = u.powi(k as i32 + 1);
        }
        let v = weyl.eval(z)?;
        for a in 0..p {
            for b in 0..p {
                values[(s, a * p + b)] = -v[(a, b)];
            }
        }
    }
    let coef = lstsq(&basis, &values)?;
    Ok((0..terms)
        .map(|k| {
            let scale = radius.powi(k as i32 + 1);
            CMatrix::from_fn(p, p, |a, b| coef[(k, a * p + b)] * scale)
        })
        .collect())
}

/// Recovers `H_0 .. H_{2n-3}` from the Weyl function of a Hankel node and a
/// pair, by a Laurent fit at infinity and by quadrature of the spectral
/// density, and reports `int t^{2n-2} d mu` against `H_{2n-2}`.
pub fn recover_moments(node: &SNode, pair: &ParamPair, rule: Rule) -> Result<MomentRecovery> {
    let p = node.p();
    if !node.dim().is_multiple_of(p) {
        return Err(Error::InvalidInput(
            "node dimension is not a multiple of p".into(),
        ));
    }
    pair.validate()?;
    let n = node.dim() / p;
    let recovered = (2 * n).saturating_sub(2);
    let s = node.s();
    let h0 = s.block(0, 0, p, p).max_abs().max(1e-300);
    let growth = (1..2 * n - 1)
        .map(|k| {
            let (i, j) = (k.min(n - 1), k - k.min(n - 1));
            (s.block(i * p, j * p, p, p).max_abs() / h0).powf(1.0 / k as f64)
        })
        .fold(0.0, f64::max);
    let radius = 50.0 * (1.0 + growth);
    let weyl = WeylFn::new(Frame::of_node(node), pair.clone());

    let (laurent, laurent_drift) = if recovered == 0 {
        (Vec::new(), 0.0)
    } else {
        let terms = recovered + LAURENT_EXTRA_TERMS;
        let near = laurent_fit(&weyl, radius, terms)?;
        let far = laurent_fit(&weyl, 2.0 * radius, terms)?;
        let mut drift: f64 = 0.0;
        for k in 0..recovered {
            let d = (&near[k] - &far[k]).max_abs() / far[k].max_abs().max(h0);
            drift = drift.max(d);
        }
        if !(drift <= 1e-5) {
            return Err(Error::ExtractionNotConverged { drift });
        }
        (far[..recovered].to_vec(), drift)
    };

    let density = weyl.spectral_density();
    let orders = recovered + 1;
    let q = integrate_theta(
        f64::NEG_INFINITY,
        f64::INFINITY,
        &[],
        rule,
        1e-8,
        |t: f64| {
            let mu = density.eval(t).scale_re(1.0 + t * t);
            let parts: Vec<CMatrix> = (0..orders).map(|k| mu.scale_re(t.powi(k as i32))).collect();
            CMatrix::hstack(&parts.iter().collect::<Vec<_>>())
        },
    )?;
    let quadrature: Vec<CMatrix> = (0..orders)
        .map(|k| q.value.block(0, k * p, p, p).hermitian_part())
        .collect();
    let top_bound = s.block((n - 1) * p, (n - 1) * p, p, p);
    let top_moment = quadrature[recovered].clone();
    let excess = -min_eigenvalue(&(&top_bound - &top_moment).hermitian_part())?;
    Ok(MomentRecovery {
        laurent,
        quadrature: quadrature[..recovered].to_vec(),
        top_moment,
        top_bound,
        excess,
        laurent_drift,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensitySpec;
    use crate::matcore::c;
    use crate::snode::verify_identity;

    fn scalar_spec(h: &[f64]) -> HankelSpec {
        HankelSpec::new(1, h.iter().map(|&x| CMatrix::scalar(c(x, 0.0))).collect()).unwrap()
    }

    #[test]
    fn order_one_by_hand() {
        let spec = scalar_spec(&[1.0]);
        let node = build_hankel_node(&spec).unwrap();
        assert_eq!(node.a()[(0, 0)], c(0.0, 0.0));
        assert_eq!(node.phi1()[(0, 0)], c(0.0, 0.0));
        assert_eq!(node.phi2()[(0, 0)], c(1.0, 0.0));
        assert_eq!(verify_identity(&node), 0.0);
        let chain = hankel_chain(&spec).unwrap();
        assert!((&chain.omega[0] - &CMatrix::from_real_rows(&[&[0.0, 1.0]])).max_abs() < 1e-15);
        let lambda = c(0.4, -1.3);
        let w = chain.factors(lambda).unwrap();
        let want = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), I / lambda],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ])
        .unwrap();
        assert!((&w[0] - &want).max_abs() < 1e-15);
        assert!((&node.transfer(lambda).unwrap() - &want).max_abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_moment_rejected() {
        let h1 = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e = HankelSpec::new(2, vec![CMatrix::identity(2), h1, CMatrix::identity(2)]);
        assert!(matches!(
            e,
            Err(Error::Linalg(LinalgError::NotHermitian { .. }))
        ));
    }

    #[test]
    fn uniform_and_exp_sqrt_moments() {
        let d = Density::uniform(-1.0, 1.0).unwrap();
        let m: Vec<f64> = (0..4)
            .map(|k| moments_from_density(&d, k, Rule::default()).unwrap()[(0, 0)].re)
            .collect();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!(m[1].abs() < 1e-12 && m[3].abs() < 1e-12);
        assert!((m[2] - 1.0 / 3.0).abs() < 1e-12);
        let e = Density::exp_sqrt();
        for k in 0..5 {
            let v = moments_from_density(&e, k, Rule::default()).unwrap()[(0, 0)].re;
            let want = DensitySpec::ExpSqrt.closed_form_moment(k).unwrap();
            assert!(
                (v - want).abs() <= 1e-8 * want.max(1.0),
                "k = {k}: {v} vs {want}"
            );
        }
    }

    #[test]
    fn order_one_recovery() {
        let node = build_hankel_node(&scalar_spec(&[1.0])).unwrap();
        let rec = recover_moments(&node, &ParamPair::identity(1), Rule::default()).unwrap();
        assert!(rec.laurent.is_empty() && rec.quadrature.is_empty());
        assert!((rec.top_moment[(0, 0)].re - 1.0).abs() < 1e-8);
        assert!(rec.excess <= 1e-6);
    }

    #[test]
    fn order_two_recovery() {
        let node = build_hankel_node(&scalar_spec(&[1.0, 0.0, 2.0])).unwrap();
        let rec = recover_moments(&node, &ParamPair::identity(1), Rule::default()).unwrap();
        for (k, want) in [1.0, 0.0].iter().enumerate() {
            assert!(
                (rec.laurent[k][(0, 0)].re - want).abs() < 1e-5,
                "laurent {k}"
            );
            assert!(
                (rec.quadrature[k][(0, 0)].re - want).abs() < 1e-5,
                "quad {k}"
            );
        }
        assert!(rec.excess <= 1e-6, "{}", rec.excess);
    }
}
