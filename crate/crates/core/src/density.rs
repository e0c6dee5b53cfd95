//! Matrix-valued densities on the real line.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{CMatrix, C64};

type ValueFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;
type LogDetFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A `p x p` positive semidefinite density `t -> P(t)` with support and
/// smoothness metadata used by the quadrature routines.
#[derive(Clone)]
pub struct Density {
    p: usize,
    support: (f64, f64),
    breakpoints: Vec<f64>,
    value: ValueFn,
    log_det: Option<LogDetFn>,
    label: String,
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("label", &self.label)
            .field("p", &self.p)
            .field("support", &self.support)
            .finish()
    }
}

fn scalar(x: f64) -> CMatrix {
    CMatrix::scalar(C64::new(x, 0.0))
}

/// `ln(1 + t^2)` without overflow for huge `|t|`.
pub(crate) fn ln_one_plus_sq(t: f64) -> f64 {
    let a = t.abs();
    if a > 1.0 {
        2.0 * a.ln() + (1.0 / (a * a)).ln_1p()
    } else {
        (a * a).ln_1p()
    }
}

impl Density {
    /// A density from an arbitrary closure on the whole line.
    pub fn from_fn(
        p: usize,
        label: impl Into<String>,
        f: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            p,
            support: (f64::NEG_INFINITY, f64::INFINITY),
            breakpoints: Vec::new(),
            value: Arc::new(f),
            log_det: None,
            label: label.into(),
        }
    }

    pub fn with_log_det(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.log_det = Some(Arc::new(f));
        self
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (lo, hi);
        self
    }

    pub fn with_breakpoints(mut self, b: Vec<f64>) -> Self {
        self.breakpoints = b;
        self
    }

    /// Constant density `P(t) = m` on the whole line.
    pub fn constant(m: CMatrix) -> Self {
        let ld = m.det().map(|d| d.re.ln()).unwrap_or(f64::NEG_INFINITY);
        let p = m.rows();
        Self::from_fn(p, "constant", move |_| m.clone()).with_log_det(move |_| ld)
    }

    /// `1/(b-a)` on `[a, b]`, zero elsewhere.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!(
                "uniform density needs a < b, got [{a}, {b}]"
            )));
        }
        let h = 1.0 / (b - a);
        Ok(Self::from_fn(1, "uniform", move |t| {
            scalar(if t >= a && t <= b { h } else { 0.0 })
        })
        .with_log_det(move |t| {
            if t >= a && t <= b {
                h.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .with_support(a, b))
    }

    /// `s / (pi (t^2 + s^2))`.
    pub fn cauchy(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cauchy scale must be positive, got {scale}"
            )));
        }
        let s = scale;
        Ok(
            Self::from_fn(1, "cauchy", move |t| scalar(s / (PI * (t * t + s * s))))
                .with_log_det(move |t| -(PI * s).ln() - ln_one_plus_sq(t / s)),
        )
    }

    /// `exp(-sqrt|t|) / 4`, unit mass.
    pub fn exp_sqrt() -> Self {
        Self::from_fn(1, "exp_sqrt", |t| scalar(0.25 * (-t.abs().sqrt()).exp()))
            .with_log_det(|t| 0.25f64.ln() - t.abs().sqrt())
            .with_breakpoints(vec![0.0])
    }

    /// Piecewise-linear scalar density through `(grid[i], values[i])`, zero
    /// outside the grid.
    pub fn table(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidInput(
                "table density needs >= 2 matching grid/value entries".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "table grid must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(
                "table values must be finite and nonnegative".into(),
            ));
        }
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        let g = grid.clone();
        let interp = move |t: f64| -> f64 {
            if t < lo || t > hi {
                return 0.0;
            }
            let i = g.partition_point(|&x| x <= t).clamp(1, g.len() - 1);
            let (x0, x1) = (g[i - 1], g[i]);
            let w = (t - x0) / (x1 - x0);
            values[i - 1] * (1.0 - w) + values[i] * w
        };
        Ok(Self::from_fn(1, "table", move |t| scalar(interp(t)))
            .with_support(lo, hi)
            .with_breakpoints(grid))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn has_analytic_log(&self) -> bool {
        self.log_det.is_some()
    }

    pub fn eval(&self, t: f64) -> CMatrix {
        (self.value)(t)
    }

    /// `ln det P(t)`, `-inf` where the determinant vanishes (or is below
    /// `1e-300` when no analytic logarithm is available).
    pub fn log_det(&self, t: f64) -> f64 {
        if let Some(f) = &self.log_det {
            return f(t);
        }
        let d = self.eval(t).det().map(|d| d.re).unwrap_or(0.0);
        if d.is_nan() || d <= 1e-300 {
            f64::NEG_INFINITY
        } else {
            d.ln()
        }
    }
}

/// Serializable description of a named density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {
        a: f64,
        b: f64,
    },
    Cauchy {
        #[serde(default = "one")]
        scale: f64,
    },
    ExpSqrt,
    Table {
        t: Vec<f64>,
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl DensitySpec {
    pub fn build(&self) -> Result<Density> {
        match self {
            DensitySpec::Uniform { a, b } => Density::uniform(*a, *b),
            DensitySpec::Cauchy { scale } => Density::cauchy(*scale),
            DensitySpec::ExpSqrt => Ok(Density::exp_sqrt()),
            DensitySpec::Table { t, values } => Density::table(t.clone(), values.clone()),
        }
    }

    /// Closed-form moment `int t^k P(t) dt` where one is known.
    pub fn closed_form_moment(&self, k: usize) -> Option<f64> {
        match self {
            DensitySpec::Uniform { a, b } => {
                let e = k as i32 + 1;
                Some((b.powi(e) - a.powi(e)) / ((k as f64 + 1.0) * (b - a)))
            }
            DensitySpec::ExpSqrt => {
                if k % 2 == 1 {
                    Some(0.0)
                } else {
                    // int_0^inf t^k e^{-sqrt t} dt = 2 (2k+1)!, halved by the 1/4 weight on both sides.
                    Some((1..=2 * k + 1).map(|i| i as f64).product())
                }
            }
            DensitySpec::Cauchy { .. } => (k == 0).then_some(1.0),
            DensitySpec::Table { .. } => None,
        }
    }
}
