//! Nested node families, monotonicity of `rho_k`, entropy integrals, outer
//! moduli, the entropy inequality, and the finite-order convergence harness.

use std::cell::Cell;
use std::f64::consts::PI;

use serde::Serialize;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::hankel::{build_hankel_node, HankelSpec};
use crate::matcore::{
    big_j, cholesky_pd, eigvalsh, lstsq, min_eigenvalue, CMatrix, LinalgError, C64, I,
};
use crate::quad::{gl_integrate, integrate_theta, Rule};
use crate::snode::{extremal_pair, lft_denominator, Frame, Orientation, ParamPair, SNode, WeylFn};
use crate::toeplitz::{build_toeplitz_node, ToeplitzSpec};

/// Nodes `S_1, S_2, ...` whose state spaces are nested as leading coordinate
/// ranges: `P_k` keeps the first `dim(S_k)` coordinates.
#[derive(Debug, Clone)]
pub struct NodeSequence {
    nodes: Vec<SNode>,
}

impl NodeSequence {
    pub fn new(nodes: Vec<SNode>) -> Result<Self> {
        let first = nodes
            .first()
            .ok_or_else(|| Error::InvalidInput("empty node sequence".into()))?;
        let p = first.p();
        for w in nodes.windows(2) {
            if w[1].p() != p || w[1].dim() < w[0].dim() {
                return Err(Error::InvalidInput(
                    "sequence needs a common p and nondecreasing dimensions".into(),
                ));
            }
        }
        Ok(Self { nodes })
    }

    /// Leading nodes of orders `1..=n` of a Toeplitz spec.
    pub fn toeplitz(spec: &ToeplitzSpec) -> Result<Self> {
        let nodes = (1..=spec.n())
            .map(|k| build_toeplitz_node(&spec.truncated(k)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes)
    }

    /// Leading nodes of orders `1..=n` of a Hankel spec.
    pub fn hankel(spec: &HankelSpec) -> Result<Self> {
        let nodes = (1..=spec.n())
            .map(|k| build_hankel_node(&spec.truncated(k)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[SNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn p(&self) -> usize {
        self.nodes[0].p()
    }

    fn get(&self, k: usize) -> Result<&SNode> {
        self.nodes.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.len(),
        })
    }
}

/// Max over `r > k` of the compression residuals `A_k - P_k A_r P_k*`,
/// `S_k - P_k S_r P_k*`, `Pi_k - P_k Pi_r` and `|P_k A_r (P_k^perp)*|`.
pub fn nested_embed_check(seq: &NodeSequence) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, big) in seq.nodes.iter().enumerate() {
        let mr = big.dim();
        for small in &seq.nodes[..r] {
            let m = small.dim();
            let p = small.p();
            let res = [
                (small.a() - &big.a().block(0, 0, m, m)).max_abs(),
                (small.s() - &big.s().block(0, 0, m, m)).max_abs(),
                (&small.pi() - &big.pi().block(0, 0, m, 2 * p)).max_abs(),
                if mr > m {
                    big.a().block(0, m, m, mr - m).max_abs()
                } else {
                    0.0
                },
            ];
            worst = res.iter().fold(worst, |a, &b| a.max(b));
        }
    }
    worst
}

/// `rho_k(z, zbar)` and `rho_k(zbar, z)` along a sequence.
#[derive(Debug, Clone)]
pub struct RhoTrajectory {
    pub upper: Vec<CMatrix>,
    pub lower: Vec<CMatrix>,
    /// `min_k min eig(rho_{k+1}(z, zbar) - rho_k(z, zbar))`; `+inf` for one node.
    pub min_upper_increment: f64,
    /// `min_k min eig(rho_k(zbar, z) - rho_{k+1}(zbar, z))`.
    pub min_lower_increment: f64,
}

impl RhoTrajectory {
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.min_upper_increment >= -tol && self.min_lower_increment >= -tol
    }
}

pub fn rho_trajectory(seq: &NodeSequence, z: C64) -> Result<RhoTrajectory> {
    let mut upper = Vec::with_capacity(seq.len());
    let mut lower = Vec::with_capacity(seq.len());
    for node in &seq.nodes {
        upper.push(node.rho(z, Orientation::Upper)?);
        lower.push(node.rho(z, Orientation::Lower)?);
    }
    let mut up = f64::INFINITY;
    let mut lo = f64::INFINITY;
    for k in 1..upper.len() {
        up = up.min(min_eigenvalue(
            &(&upper[k] - &upper[k - 1]).hermitian_part(),
        )?);
        lo = lo.min(min_eigenvalue(
            &(&lower[k - 1] - &lower[k]).hermitian_part(),
        )?);
    }
    Ok(RhoTrajectory {
        upper,
        lower,
        min_upper_increment: up,
        min_lower_increment: lo,
    })
}

/// Frame of the quotient node between `S_k` and `S_r`.
#[derive(Debug, Clone)]
pub struct QuotientFrame {
    pub value: CMatrix,
    /// `|A(S_r, z) - A(S_k, z) A~(z)|`.
    pub product_residual: f64,
    /// `min eig(A~ J A~* - J)`.
    pub j_expansion: f64,
}

/// Quotient node `{A22, T22^{-1}, T22^{-1} P^perp Gamma}` with
/// `T22 = P^perp S_r^{-1} (P^perp)*` and `Gamma = S_r^{-1} Pi_r`; its frame is
/// `I - i z Pi~* (I - z A22*)^{-1} P^perp Gamma J`.
pub fn frame_quotient(seq: &NodeSequence, k: usize, r: usize, z: C64) -> Result<QuotientFrame> {
    if r < k {
        return Err(Error::InvalidInput(format!(
            "quotient needs r >= k, got k = {k}, r = {r}"
        )));
    }
    let small = seq.get(k)?;
    let big = seq.get(r)?;
    let p = big.p();
    let j = big_j(p);
    let (m, mr) = (small.dim(), big.dim());
    let value = if mr == m {
        CMatrix::identity(2 * p)
    } else {
        let c = mr - m;
        let gamma = big.s_factor().solve(&big.pi())?;
        let s_inv = big.s_factor().inverse();
        let t22 = s_inv.block(m, m, c, c);
        let g2 = gamma.block(m, 0, c, 2 * p);
        let pi_q = t22.solve(&g2)?;
        let a22 = big.a().block(m, m, c, c);
        let lhs = &CMatrix::identity(c) - &(a22.adjoint() * z);
        let y = lhs.solve(&(&g2 * &j)).map_err(|e| match e {
            LinalgError::Singular => Error::SingularResolvent(z),
            other => other.into(),
        })?;
        &CMatrix::identity(2 * p) - &((&pi_q.adjoint() * &y) * (I * z))
    };
    let product = &small.frame(z)? * &value;
    let product_residual = (&big.frame(z)? - &product).max_abs();
    let expansion = (&(&(&value * &j) * &value.adjoint()) - &j).hermitian_part();
    Ok(QuotientFrame {
        value,
        product_residual,
        j_expansion: min_eigenvalue(&expansion)?,
    })
}

/// Value of an entropy-type integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Entropy {
    Finite(f64),
    NegInfinity,
}

impl Entropy {
    pub fn finite(self) -> Option<f64> {
        match self {
            Entropy::Finite(v) => Some(v),
            Entropy::NegInfinity => None,
        }
    }
}

/// Default rule for logarithmic integrands: tanh-sinh, reaching the points at
/// infinity when the density has an analytic log-determinant and stopping at
/// `|t| ~ 1e12` otherwise (so that determinant underflow in the far tail is
/// not mistaken for vanishing).
pub fn log_rule(density: &Density) -> Rule {
    Rule::TanhSinh {
        min_end_distance: if density.has_analytic_log() {
            0.0
        } else {
            1e-12
        },
    }
}

/// `int_a^b f(t) ln det P(t) dt / (1 + t^2)`. Returns `NegInfinity` if the
/// support of `P` misses a piece of `[a, b]` or if `det P` vanishes at a
/// quadrature node.
pub fn entropy_integral(
    density: &Density,
    weight: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rule: Rule,
) -> Result<Entropy> {
    log_integral(density, weight, a, b, rule, density.breakpoints())
}

const LOG_TAIL_CUTOFF: f64 = 1e12;

fn log_integral(
    density: &Density,
    weight: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rule: Rule,
    breaks: &[f64],
) -> Result<Entropy> {
    let (lo, hi) = density.support();
    if lo > a || hi < b {
        return Ok(Entropy::NegInfinity);
    }
    let vanished = Cell::new(false);
    let q = integrate_theta(a, b, breaks, rule, 1e-7, |t: f64| {
        let w = weight(t);
        if w == 0.0 || t.is_infinite() {
            return 0.0;
        }
        let ld = density.log_det(t);
        // Frames grow polynomially, so evaluations can break down far out
        // where a logarithmic integrand contributes below 1e-10.
        if ld.is_nan() && t.abs() > LOG_TAIL_CUTOFF {
            return 0.0;
        }
        if ld == f64::NEG_INFINITY {
            vanished.set(true);
            return 0.0;
        }
        w * ld
    });
    if vanished.get() {
        return Ok(Entropy::NegInfinity);
    }
    let q = q?;
    if q.value.is_nan() {
        return Err(Error::QuadratureNotConverged {
            difference: f64::NAN,
            tolerance: 1e-7,
        });
    }
    Ok(Entropy::Finite(q.value))
}

/// `Im(lambda) (1 + t^2) / |t - lambda|^2`, finite as `|t| -> inf`.
fn poisson_weight(lambda: C64, t: f64) -> f64 {
    if t.abs() > 1.0 {
        let u = 1.0 / t;
        lambda.im * (1.0 + u * u) / (1.0 - lambda * u).norm_sqr()
    } else {
        lambda.im * (1.0 + t * t) / (t - lambda).norm_sqr()
    }
}

/// `int Im(lambda) / |t - lambda|^2 dt`, which must equal `pi`.
pub fn poisson_mass(lambda: C64) -> Result<f64> {
    Ok(integrate_theta(
        f64::NEG_INFINITY,
        f64::INFINITY,
        &[lambda.re],
        Rule::default(),
        1e-12,
        |t: f64| poisson_weight(lambda, t),
    )?
    .value)
}

/// `|det G_mu(lambda)| = exp[(1/2pi) int Im(lambda) ln det P(t) / |t - lambda|^2 dt]`.
pub fn outer_modulus(density: &Density, lambda: C64) -> Result<f64> {
    if !(lambda.im > 0.0) {
        return Err(Error::NotInUpperHalfPlane(lambda));
    }
    let rule = log_rule(density);
    let szego = entropy_integral(density, &|_| 1.0, f64::NEG_INFINITY, f64::INFINITY, rule)?;
    if szego == Entropy::NegInfinity {
        return Err(Error::SzegoViolated);
    }
    let mass = poisson_mass(lambda)?;
    if (mass - PI).abs() > 1e-9 {
        return Err(Error::NotConverged(format!(
            "Poisson kernel mass {mass} differs from pi"
        )));
    }
    let kernel = move |t: f64| poisson_weight(lambda, t);
    let mut breaks = density.breakpoints().to_vec();
    breaks.push(lambda.re);
    match log_integral(
        density,
        &kernel,
        f64::NEG_INFINITY,
        f64::INFINITY,
        rule,
        &breaks,
    )? {
        Entropy::Finite(v) => Ok((v / (2.0 * PI)).exp()),
        Entropy::NegInfinity => Err(Error::SzegoViolated),
    }
}

/// `G_mu(z) = (2pi)^{-1/2} rho(lambda, lambda-bar)^{1/2} F(z)^{-1}` for the
/// extremal pair at `lambda`.
pub fn gmu_extremal(node: &SNode, lambda: C64, z: C64) -> Result<CMatrix> {
    let pair = extremal_pair(node, lambda)?;
    let rho = node.rho(lambda, Orientation::Upper)?;
    let f = lft_denominator(&Frame::of_node(node), &pair, z)?;
    let f_inv = f.inverse().map_err(|_| Error::SingularF(z))?;
    Ok((&cholesky_pd(&rho)?.sqrtm() * &f_inv) * (1.0 / (2.0 * PI).sqrt()))
}

/// `lhs = 2 pi G_mu(lambda)* G_mu(lambda)` against `rhs = rho(lambda, lambda-bar)^{-1}`.
#[derive(Debug, Clone)]
pub struct EntropyBound {
    pub lhs: CMatrix,
    pub rhs: CMatrix,
    /// `min eig(rhs - lhs)`.
    pub slack: f64,
}

fn bound(lhs: CMatrix, rho: &CMatrix) -> Result<EntropyBound> {
    let rhs = rho.inverse()?.hermitian_part();
    let slack = min_eigenvalue(&(&rhs - &lhs).hermitian_part())?;
    Ok(EntropyBound { lhs, rhs, slack })
}

/// Closed-form route through [`gmu_extremal`]; equality is expected.
pub fn entropy_bound_extremal(node: &SNode, lambda: C64) -> Result<EntropyBound> {
    let g = gmu_extremal(node, lambda, lambda)?;
    let lhs = (&g.adjoint() * &g).scale_re(2.0 * PI).hermitian_part();
    bound(lhs, &node.rho(lambda, Orientation::Upper)?)
}

/// `2 pi |G_mu(lambda)|^2` from the outer modulus of the pair's spectral
/// density (`p = 1`), or the closed form when the pair is a right multiple of
/// the extremal pair at `lambda`.
pub fn entropy_bound_check(node: &SNode, pair: &ParamPair, lambda: C64) -> Result<EntropyBound> {
    check_lower_resolvent(node.a())?;
    let rho = node.rho(lambda, Orientation::Upper)?;
    if node.p() == 1 {
        let weyl = WeylFn::new(Frame::of_node(node), pair.clone());
        let g = outer_modulus(&weyl.spectral_density(), lambda)?;
        return bound(CMatrix::scalar(C64::new(2.0 * PI * g * g, 0.0)), &rho);
    }
    if let ParamPair::Constant { r, q } = pair {
        let ext = extremal_pair(node, lambda)?;
        let (r0, q0) = ext.eval(lambda);
        let basis = CMatrix::vstack(&[&r0, &q0]);
        let target = CMatrix::vstack(&[r, q]);
        let x = lstsq(&basis, &target)?;
        if (&(&basis * &x) - &target).max_abs() <= 1e-10 * (1.0 + target.max_abs()) {
            return entropy_bound_extremal(node, lambda);
        }
    }
    Err(Error::Unsupported(
        "matrix outer factor is only available for the extremal pair".into(),
    ))
}

/// Requires `I - zA` invertible on the closed lower half-plane, i.e. no
/// nonzero eigenvalue of `A` with `Im >= 0`. Only triangular `A` is
/// inspected, since its spectrum is the diagonal.
fn check_lower_resolvent(a: &CMatrix) -> Result<()> {
    let n = a.rows();
    let lower = (0..n).all(|i| (i + 1..n).all(|j| a[(i, j)] == C64::new(0.0, 0.0)));
    let upper = (0..n).all(|i| (0..i).all(|j| a[(i, j)] == C64::new(0.0, 0.0)));
    if !lower && !upper {
        return Err(Error::Unsupported(
            "spectrum of a non-triangular A is not inspected".into(),
        ));
    }
    match (0..n)
        .map(|i| a[(i, i)])
        .find(|d| d.norm() > 0.0 && d.im >= 0.0)
    {
        Some(d) => Err(Error::Unsupported(format!(
            "I - zA is singular at z = {} in the closed lower half-plane",
            1.0 / d
        ))),
        None => Ok(()),
    }
}

/// One order of the convergence harness.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub k: usize,
    pub rho_inv: CMatrix,
    pub det_rho_inv: f64,
    pub target: Option<f64>,
    pub gap: Option<f64>,
    /// Spectral condition number of `S_k`.
    pub cond: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub lambda: C64,
    pub rows: Vec<ConvergenceRow>,
    /// `rho_k(lambda, lambda-bar)` nondecreasing within `1e-9`.
    pub monotone: bool,
    /// `rho_k^{-1}` strictly decreasing in the scalar sense of `det`.
    pub strictly_decreasing: bool,
    /// Szego integral of the reference density, if one was given.
    pub szego: Option<Entropy>,
    /// Every gap smaller than the previous one; `None` without a target.
    pub gaps_shrinking: Option<bool>,
}

fn condition_number(m: &CMatrix) -> Result<f64> {
    let ev = eigvalsh(m)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Trajectory of `rho_k(lambda, lambda-bar)^{-1}` and, for a scalar reference
/// density with a finite Szego integral, the gap to `2 pi |G_mu(lambda)|^2`.
pub fn convergence_run(
    seq: &NodeSequence,
    lambda: C64,
    reference: Option<&Density>,
) -> Result<ConvergenceReport> {
    let traj = rho_trajectory(seq, lambda)?;
    let monotone = traj.min_upper_increment >= -1e-9;
    let (szego, target) = match reference {
        Some(d) => {
            let s = entropy_integral(d, &|_| 1.0, f64::NEG_INFINITY, f64::INFINITY, log_rule(d))?;
            let t = match (s, seq.p()) {
                (Entropy::Finite(_), 1) => {
                    let g = outer_modulus(d, lambda)?;
                    Some(2.0 * PI * g * g)
                }
                _ => None,
            };
            (Some(s), t)
        }
        None => (None, None),
    };
    let mut rows = Vec::with_capacity(seq.len());
    for (k, (node, rho)) in seq.nodes.iter().zip(&traj.upper).enumerate() {
        let rho_inv = rho.inverse()?.hermitian_part();
        let det_rho_inv = rho_inv.det()?.re;
        let gap = target.map(|t| det_rho_inv - t);
        rows.push(ConvergenceRow {
            k: k + 1,
            rho_inv,
            det_rho_inv,
            target,
            gap,
            cond: condition_number(node.s())?,
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].det_rho_inv < w[0].det_rho_inv);
    let gaps_shrinking = target.map(|_| {
        rows.windows(2)
            .all(|w| w[1].gap.unwrap_or(f64::NAN) < w[0].gap.unwrap_or(f64::NAN))
    });
    Ok(ConvergenceReport {
        lambda,
        rows,
        monotone,
        strictly_decreasing,
        szego,
        gaps_shrinking,
    })
}

/// Outcome of comparing `det(A + B)` with `det A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetComparison {
    /// `B = 0` and the determinants agree.
    Equal,
    /// `det(A + B) > det A (1 + 1e-12)`.
    Strict,
    Violated,
}

/// `det(A + B) > det A` for `A > 0`, `B >= 0`, `B != 0`.
pub fn det_strict_lemma(a: &CMatrix, b: &CMatrix) -> Result<DetComparison> {
    let fa = cholesky_pd(a)?;
    if b.max_abs() == 0.0 {
        return Ok(DetComparison::Equal);
    }
    let sum = cholesky_pd(&(a + b).hermitian_part())?;
    Ok(if sum.log_det() > fa.log_det() + 1e-12 {
        DetComparison::Strict
    } else {
        DetComparison::Violated
    })
}

/// `det(B1 + B2)^{1/p} - det(B1)^{1/p} - det(B2)^{1/p}`, nonnegative for PSD
/// `B1`, `B2`.
pub fn minkowski_slack(b1: &CMatrix, b2: &CMatrix) -> Result<f64> {
    let p = b1.rows() as f64;
    let root = |m: &CMatrix| -> Result<f64> {
        let ev = eigvalsh(&m.hermitian_part())?;
        if ev.iter().any(|&x| x <= 0.0) {
            return Ok(0.0);
        }
        Ok((ev.iter().map(|x| x.ln()).sum::<f64>() / p).exp())
    };
    Ok(root(&(b1 + b2))? - root(b1)? - root(b2)?)
}

/// Sup of `|(I - zA)^{-1}|` over rings `|z| = r`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub radii: Vec<f64>,
    /// Running sup over rings up to each radius (a lower bound of the true sup).
    pub sup_norm: Vec<f64>,
    /// `ln(M(r)) / r^kappa`.
    pub ratio: Vec<f64>,
    pub kappa: f64,
    /// Ratios over the last half of the grid are nonincreasing.
    pub bounded_on_grid: bool,
}

/// Number of sampled angles per ring.
pub const RING_ANGLES: usize = 64;

pub fn resolvent_growth(a: &CMatrix, radii: &[f64]) -> Result<GrowthReport> {
    let kappa = 0.5;
    let m = a.rows();
    let id = CMatrix::identity(m);
    let mut sup: f64 = 0.0;
    let mut sup_norm = Vec::with_capacity(radii.len());
    let mut ratio = Vec::with_capacity(radii.len());
    for &r in radii {
        for q in 0..RING_ANGLES {
            let z = C64::from_polar(r, 2.0 * PI * q as f64 / RING_ANGLES as f64);
            let inv = (&id - &(a * z))
                .inverse()
                .map_err(|_| Error::SingularOnGrid(z))?;
            let nrm = inv.norm2();
            if !nrm.is_finite() || nrm > 1e14 {
                return Err(Error::SingularOnGrid(z));
            }
            sup = sup.max(nrm);
        }
        sup_norm.push(sup);
        ratio.push(sup.ln() / r.powf(kappa));
    }
    let half = ratio.len() / 2;
    let bounded_on_grid = ratio[half..].windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(GrowthReport {
        radii: radii.to_vec(),
        sup_norm,
        ratio,
        kappa,
        bounded_on_grid,
    })
}

/// Result of the passage-to-the-limit demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct LimitDemo {
    /// `(k, int_a^b f ln det P_k dt/(1+t^2))`.
    pub lhs: Vec<(usize, f64)>,
    /// Max of the left-hand sides over the second half of the `k` list.
    pub limsup: f64,
    /// Same integral for the weak-limit density identified on the grid.
    pub rhs: f64,
    pub gap: f64,
    pub holds: bool,
}

/// Cells used to identify the weak-limit density.
const LIMIT_CELLS: usize = 400;

/// `lhs_k = int_a^b f ln det P_k dt / (1 + t^2)` for each `k`; the weak limit is
/// identified as the cell-averaged density of the last `P_k` and integrated
/// the same way. Checks `limsup lhs_k <= rhs + 1e-3`.
pub fn limit_inequality_demo(
    family: &dyn Fn(usize, f64) -> CMatrix,
    ks: &[usize],
    weight: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
) -> Result<LimitDemo> {
    if ks.is_empty() || !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(
            "limit demo needs k values and a finite interval".into(),
        ));
    }
    let log_det = |m: &CMatrix| -> f64 {
        match cholesky_pd(&m.hermitian_part()) {
            Ok(h) => h.log_det(),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut lhs = Vec::with_capacity(ks.len());
    for &k in ks {
        let panels = ((k as f64 * (b - a) / PI).ceil() as usize).max(64);
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let lo = a + h * i as f64;
            acc += gl_integrate(lo, lo + h, 16, |t| {
                let ld = log_det(&family(k, t));
                if ld == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    weight(t) * ld / (1.0 + t * t)
                }
            });
        }
        lhs.push((k, acc));
    }
    let k_last = *ks.last().expect("nonempty");
    let h = (b - a) / LIMIT_CELLS as f64;
    let sub = ((k_last as f64 * h / PI).ceil() as usize).max(1);
    let mut rhs = 0.0;
    for i in 0..LIMIT_CELLS {
        let lo = a + h * i as f64;
        let mut mass = CMatrix::zeros(1, 1);
        for s in 0..sub {
            let l = lo + h * s as f64 / sub as f64;
            let part = gl_integrate(l, l + h / sub as f64, 16, |t| family(k_last, t));
            mass = if s == 0 { part } else { &mass + &part };
        }
        let density = mass.scale_re(1.0 / h);
        let ld = log_det(&density);
        let w = gl_integrate(lo, lo + h, 8, |t| weight(t) / (1.0 + t * t));
        rhs += if ld == f64::NEG_INFINITY && w > 0.0 {
            f64::NEG_INFINITY
        } else {
            w * ld
        };
    }
    let tail = &lhs[lhs.len() / 2..];
    let limsup = tail
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = rhs - limsup;
    let holds = limsup == f64::NEG_INFINITY || limsup <= rhs + 1e-3;
    Ok(LimitDemo {
        lhs,
        limsup,
        rhs,
        gap,
        holds,
    })
}
