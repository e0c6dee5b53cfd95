//! Quadrature over the real line through `t = tan(theta)`.
//!
//! Two rules are available. Gauss-Legendre is used for smooth integrands
//! (moment integrals, Stieltjes matrices). Tanh-sinh is used for integrands
//! with logarithmic or algebraic endpoint singularities in `theta`, which is
//! what `ln det P(tan theta)` looks like for densities decaying like a power.
//! Both check themselves by comparing against a refined rule.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::matcore::{CMatrix, C64};

/// Values that can be accumulated by a quadrature rule.
pub trait Integrand: Sized {
    fn scaled(&self, w: f64) -> Self;
    fn add_scaled(&mut self, w: f64, x: &Self);
    fn distance(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_scaled(&mut self, w: f64, x: &Self) {
        *self += w * x;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for C64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn add_scaled(&mut self, w: f64, x: &Self) {
        *self += x * w;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Integrand for CMatrix {
    fn scaled(&self, w: f64) -> Self {
        self.scale_re(w)
    }
    fn add_scaled(&mut self, w: f64, x: &Self) {
        *self += &x.scale_re(w);
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).max_abs()
    }
    fn magnitude(&self) -> f64 {
        self.max_abs()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }
}

/// Cached Gauss-Legendre rule with `n` nodes.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
        .clone()
}

/// Gauss-Legendre on `[a, b]` with `n` nodes. `f` receives the node.
pub fn gl_integrate<T: Integrand>(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> T) -> T {
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc: Option<T> = None;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(mid + half * x);
        match acc.as_mut() {
            None => acc = Some(v.scaled(w * half)),
            Some(s) => s.add_scaled(w * half, &v),
        }
    }
    acc.expect("rule has at least one node")
}

/// Choice of rule for [`integrate_theta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Gauss-Legendre with the given node count per panel; checked against
    /// twice as many nodes.
    GaussLegendre(usize),
    /// Tanh-sinh; refined level by level until two levels agree. The value is
    /// the smallest admissible distance (in theta) to a panel end at
    /// `theta = +-pi/2`, which bounds `|t|`.
    TanhSinh { min_end_distance: f64 },
}

impl Default for Rule {
    fn default() -> Self {
        Rule::GaussLegendre(2048)
    }
}

#[derive(Debug, Clone)]
pub struct Quadrature<T> {
    pub value: T,
    pub difference: f64,
}

/// Panel edges in theta for the real-line breakpoints `t_breaks` (which may
/// include infinities).
fn theta_edges(t_lo: f64, t_hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut e = vec![t_lo.atan()];
    let mut pts: Vec<f64> = interior
        .iter()
        .copied()
        .filter(|&t| t > t_lo && t < t_hi)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    e.extend(pts.iter().map(|t| t.atan()));
    e.push(t_hi.atan());
    e
}

/// `tan` that stays accurate next to `theta = +-pi/2`, given the distances
/// of the node to the two panel ends.
fn tan_near(theta: f64, lo: f64, hi: f64, d_lo: f64, d_hi: f64) -> f64 {
    if hi == FRAC_PI_2 && d_hi < 0.25 {
        1.0 / d_hi.tan()
    } else if lo == -FRAC_PI_2 && d_lo < 0.25 {
        -1.0 / d_lo.tan()
    } else {
        theta.tan()
    }
}

fn gl_panels<T: Integrand>(edges: &[f64], n: usize, f: &impl Fn(f64) -> T) -> T {
    let mut acc: Option<T> = None;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let v = gl_integrate(lo, hi, n, |th| f(th.tan()));
        match acc.as_mut() {
            None => acc = Some(v),
            Some(s) => s.add_scaled(1.0, &v),
        }
    }
    acc.expect("at least one non-empty panel")
}

fn tanh_sinh_panels<T: Integrand>(
    edges: &[f64],
    level: u32,
    min_end_distance: f64,
    f: &impl Fn(f64) -> T,
) -> T {
    let h = 0.5f64.powi(level as i32);
    let mut acc: Option<T> = None;
    let mut push = |w: f64, v: T| match acc.as_mut() {
        None => acc = Some(v.scaled(w)),
        Some(s) => s.add_scaled(w, &v),
    };
    for e in edges.windows(2) {
        let (lo, hi) = (e[0], e[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let w0 = half * h * FRAC_PI_2;
        push(w0, f(tan_near(mid, lo, hi, half, half)));
        let mut k = 1usize;
        loop {
            let u = k as f64 * h;
            let s = FRAC_PI_2 * u.sinh();
            let cs = s.cosh();
            let w = half * h * FRAC_PI_2 * u.cosh() / (cs * cs);
            // Distance to the nearer end: half * (1 - tanh s).
            let d = half * 2.0 / ((2.0 * s).exp() + 1.0);
            let near_infinite_end = (hi == FRAC_PI_2) || (lo == -FRAC_PI_2);
            let floor = if near_infinite_end {
                min_end_distance
            } else {
                1e-300
            };
            if d < floor.max(1e-300) || w < 1e-300 || !w.is_finite() {
                break;
            }
            let far = 2.0 * half - d;
            push(w, f(tan_near(hi - d, lo, hi, far, d)));
            push(w, f(tan_near(lo + d, lo, hi, d, far)));
            k += 1;
        }
    }
    acc.expect("at least one non-empty panel")
}

/// `int f(tan theta) d theta` over the theta-image of `[t_lo, t_hi]`, split at
/// `breaks`. Integrals over `t` are obtained by letting `f` include the
/// Jacobian `1 + t^2`. Accepts when the refined rule agrees within
/// `tol * max(1, |value|)`.
pub fn integrate_theta<T: Integrand>(
    t_lo: f64,
    t_hi: f64,
    breaks: &[f64],
    rule: Rule,
    tol: f64,
    f: impl Fn(f64) -> T,
) -> Result<Quadrature<T>> {
    if t_lo.is_nan() || t_hi.is_nan() || t_hi <= t_lo {
        return Err(Error::InvalidInput(format!(
            "integration interval [{t_lo}, {t_hi}] is empty"
        )));
    }
    let edges = theta_edges(t_lo, t_hi, breaks);
    match rule {
        Rule::GaussLegendre(n) => {
            let coarse = gl_panels(&edges, n.max(2), &f);
            let fine = gl_panels(&edges, 2 * n.max(2), &f);
            let difference = coarse.distance(&fine);
            if difference <= tol * fine.magnitude().max(1.0) {
                Ok(Quadrature {
                    value: fine,
                    difference,
                })
            } else {
                Err(Error::QuadratureNotConverged {
                    difference,
                    tolerance: tol,
                })
            }
        }
        Rule::TanhSinh { min_end_distance } => {
            adaptive_tanh_sinh(&edges, tol, min_end_distance, &f)
        }
    }
}

/// Panels whose two tanh-sinh levels disagree are bisected, up to
/// `MAX_PANELS` panels in total.
const MAX_PANELS: usize = 4096;

fn adaptive_tanh_sinh<T: Integrand>(
    edges: &[f64],
    tol: f64,
    min_end_distance: f64,
    f: &impl Fn(f64) -> T,
) -> Result<Quadrature<T>> {
    let pair = |lo: f64, hi: f64| {
        let e = [lo, hi];
        let coarse = tanh_sinh_panels(&e, 5, min_end_distance, f);
        let fine = tanh_sinh_panels(&e, 6, min_end_distance, f);
        let diff = coarse.distance(&fine);
        (fine, diff)
    };
    let whole = tanh_sinh_panels(edges, 6, min_end_distance, f);
    let budget = tol * whole.magnitude().max(1.0);
    let span = edges[edges.len() - 1] - edges[0];
    let mut stack: Vec<(f64, f64)> = edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    let mut panels = stack.len();
    let mut acc: Option<T> = None;
    let mut difference = 0.0;
    while let Some((lo, hi)) = stack.pop() {
        let (v, diff) = pair(lo, hi);
        let share = budget * (hi - lo) / span;
        if diff <= share || panels >= MAX_PANELS {
            difference += diff;
            match acc.as_mut() {
                None => acc = Some(v),
                Some(s) => s.add_scaled(1.0, &v),
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
            panels += 1;
        }
    }
    let value = acc.expect("at least one non-empty panel");
    if difference <= budget && difference.is_finite() {
        Ok(Quadrature { value, difference })
    } else {
        Err(Error::QuadratureNotConverged {
            difference,
            tolerance: tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let v = gl_integrate(-1.0, 1.0, 5, |x| x.powi(8));
        assert!((v - 2.0 / 9.0).abs() < 1e-15);
        let rule = gauss_legendre(2048);
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cauchy_mass_on_the_line() {
        let q = integrate_theta(
            f64::NEG_INFINITY,
            f64::INFINITY,
            &[],
            Rule::default(),
            1e-10,
            |t| (1.0 / (PI * (1.0 + t * t))) * (1.0 + t * t),
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_handles_log_endpoints() {
        // int ln(1/(1+t^2)) dt/(1+t^2) = -2 pi ln 2.
        let q = integrate_theta(
            f64::NEG_INFINITY,
            f64::INFINITY,
            &[],
            Rule::TanhSinh {
                min_end_distance: 0.0,
            },
            1e-11,
            |t: f64| {
                let a = t.abs();
                if a > 1.0 {
                    -(2.0 * a.ln() + (1.0 / (a * a)).ln_1p())
                } else {
                    -(t * t).ln_1p()
                }
            },
        )
        .unwrap();
        assert!(
            (q.value + 2.0 * PI * 2f64.ln()).abs() < 1e-11,
            "{}",
            q.value
        );
    }
}
