//! Generic finite symmetric S-nodes `{A, S, Pi = [Phi1 Phi2]}` with
//! `A S - S A* = i Pi J Pi*`, their frames, the `rho(z, zbar)` characteristic,
//! parameter pairs and the linear-fractional Weyl functions they generate,
//! and the matrix-ball description of all Weyl values at a point.

use std::fmt;
use std::sync::Arc;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::matcore::{
    big_j, cholesky_pd, hermitian_fn, min_eigenvalue, CMatrix, HermPd, LinalgError, C64, I,
};
use crate::quad::{integrate_theta, Rule};

/// A finite S-node. `S` is stored with its Cholesky factor; the operator
/// identity itself is not enforced on construction (see [`verify_identity`]).
#[derive(Debug, Clone)]
pub struct SNode {
    p: usize,
    a: CMatrix,
    s: HermPd,
    phi1: CMatrix,
    phi2: CMatrix,
}

impl SNode {
    /// Validates shapes, `S > 0`, and `Ker Phi2 = 0`.
    pub fn new(p: usize, a: CMatrix, s: CMatrix, phi1: CMatrix, phi2: CMatrix) -> Result<Self> {
        let m = a.rows();
        if p == 0 || m == 0 {
            return Err(Error::InvalidInput("empty node".into()));
        }
        let shapes_ok = a.shape() == (m, m)
            && s.shape() == (m, m)
            && phi1.shape() == (m, p)
            && phi2.shape() == (m, p);
        if !shapes_ok {
            return Err(LinalgError::DimensionMismatch(format!(
                "node with A {:?}, S {:?}, Phi1 {:?}, Phi2 {:?}, p = {p}",
                a.shape(),
                s.shape(),
                phi1.shape(),
                phi2.shape()
            ))
            .into());
        }
        if !(a.is_finite() && phi1.is_finite() && phi2.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        let s = cholesky_pd(&s)?;
        let gram = (&phi2.adjoint() * &phi2).hermitian_part();
        if cholesky_pd(&gram).is_err() || min_eigenvalue(&gram)? <= 1e-12 * (1.0 + gram.max_abs()) {
            return Err(Error::InvalidInput(
                "Phi2 must have full column rank".into(),
            ));
        }
        Ok(Self {
            p,
            a,
            s,
            phi1,
            phi2,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Dimension `m` of the state space.
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn s(&self) -> &CMatrix {
        self.s.matrix()
    }

    pub fn s_factor(&self) -> &HermPd {
        &self.s
    }

    pub fn phi1(&self) -> &CMatrix {
        &self.phi1
    }

    pub fn phi2(&self) -> &CMatrix {
        &self.phi2
    }

    pub fn pi(&self) -> CMatrix {
        CMatrix::hstack(&[&self.phi1, &self.phi2])
    }

    /// `A S - S A* - i Pi J Pi*`.
    pub fn identity_defect(&self) -> CMatrix {
        let s = self.s();
        let pi = self.pi();
        let rhs = (&(&pi * &big_j(self.p)) * &pi.adjoint()) * I;
        &(&(&self.a * s) - &(s * &self.a.adjoint())) - &rhs
    }

    /// Leading compression onto the first `m` coordinates.
    pub fn leading(&self, m: usize) -> Result<SNode> {
        if m == 0 || m > self.dim() {
            return Err(Error::IndexOutOfRange {
                index: m,
                len: self.dim(),
            });
        }
        SNode::new(
            self.p,
            self.a.block(0, 0, m, m),
            self.s().block(0, 0, m, m),
            self.phi1.block(0, 0, m, self.p),
            self.phi2.block(0, 0, m, self.p),
        )
    }

    fn resolvent_apply(&self, lhs: CMatrix, rhs: &CMatrix, z: C64) -> Result<CMatrix> {
        lhs.solve(rhs).map_err(|e| match e {
            LinalgError::Singular => Error::SingularResolvent(z),
            other => other.into(),
        })
    }

    /// `(I - z A*)^{-1}`-type solve with the given operator.
    fn i_minus(&self, z: C64, adjoint: bool) -> CMatrix {
        let a = if adjoint {
            self.a.adjoint()
        } else {
            self.a.clone()
        };
        &CMatrix::identity(self.dim()) - &(a * z)
    }

    /// Transfer matrix function `w_A(lambda) = I - i J Pi* S^{-1} (A - lambda)^{-1} Pi`.
    pub fn transfer(&self, lambda: C64) -> Result<CMatrix> {
        let m = self.dim();
        let pi = self.pi();
        let shifted = &self.a - &(CMatrix::identity(m) * lambda);
        let x = self.resolvent_apply(shifted, &pi, lambda)?;
        let y = self.s.solve(&x)?;
        let corr = (&(&big_j(self.p) * &pi.adjoint()) * &y) * I;
        Ok(&CMatrix::identity(2 * self.p) - &corr)
    }

    /// Frame in the form `I - i z Pi* (I - z A*)^{-1} S^{-1} Pi J`, defined at `z = 0`.
    pub fn frame(&self, z: C64) -> Result<CMatrix> {
        let pi = self.pi();
        let x = self.s.solve(&(&pi * &big_j(self.p)))?;
        let y = self.resolvent_apply(self.i_minus(z, true), &x, z)?;
        let corr = (&pi.adjoint() * &y) * (I * z);
        Ok(&CMatrix::identity(2 * self.p) - &corr)
    }

    /// Frame as `w_A(1/conj z)*`; requires `z != 0`.
    pub fn frame_via_transfer(&self, z: C64) -> Result<CMatrix> {
        if z.norm() == 0.0 {
            return Err(Error::PoleAtLambda(C64::new(f64::INFINITY, 0.0)));
        }
        Ok(self.transfer(1.0 / z.conj())?.adjoint())
    }

    /// `Phi2* (I - z A*)^{-1} S^{-1} (I - w A)^{-1} Phi2`.
    fn bilinear(&self, z: C64, w: C64) -> Result<CMatrix> {
        let x = self.resolvent_apply(self.i_minus(w, false), &self.phi2, w)?;
        let y = self.s.solve(&x)?;
        let u = self.resolvent_apply(self.i_minus(z, true), &y, z)?;
        Ok(&self.phi2.adjoint() * &u)
    }

    /// `rho(z, zbar)` (positive) or `rho(zbar, z)` (negative) for `z` in the
    /// upper half-plane.
    pub fn rho(&self, z: C64, orientation: Orientation) -> Result<CMatrix> {
        if !(z.im > 0.0) {
            return Err(Error::NotInUpperHalfPlane(z));
        }
        let (first, second) = match orientation {
            Orientation::Upper => (z, z.conj()),
            Orientation::Lower => (z.conj(), z),
        };
        Ok((self.bilinear(first, second)? * (I * (second - first))).hermitian_part())
    }

    /// Residual of `A(z) J A(conj lambda)* = J - i(z - lambda) Pi* (I - zA*)^{-1} S^{-1} (I - lambda A)^{-1} Pi`.
    pub fn j_identity_residual(&self, z: C64, lambda: C64) -> Result<f64> {
        let j = big_j(self.p);
        let lhs = &(&self.frame(z)? * &j) * &self.frame(lambda.conj())?.adjoint();
        let pi = self.pi();
        let x = self.resolvent_apply(self.i_minus(lambda, false), &pi, lambda)?;
        let y = self.s.solve(&x)?;
        let u = self.resolvent_apply(self.i_minus(z, true), &y, z)?;
        let rhs = &j - &((&pi.adjoint() * &u) * (I * (z - lambda)));
        Ok((&lhs - &rhs).max_abs())
    }
}

/// Which of the two characteristics `rho(z, zbar)` / `rho(zbar, z)` to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `rho(z, zbar)`, positive definite in the upper half-plane.
    Upper,
    /// `rho(zbar, z)`, negative definite in the upper half-plane.
    Lower,
}

/// `||A S - S A* - i Pi J Pi*|| / (1 + ||S||)` in the spectral norm.
pub fn verify_identity(node: &SNode) -> f64 {
    node.identity_defect().norm2() / (1.0 + node.s().norm2())
}

/// The four `p x p` blocks of a `2p x 2p` matrix.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub b11: CMatrix,
    pub b12: CMatrix,
    pub b21: CMatrix,
    pub b22: CMatrix,
}

impl Blocks {
    pub fn of(m: &CMatrix, p: usize) -> Self {
        Self {
            b11: m.pblock(p, 0, 0),
            b12: m.pblock(p, 0, 1),
            b21: m.pblock(p, 1, 0),
            b22: m.pblock(p, 1, 1),
        }
    }
}

type FrameEval = dyn Fn(C64) -> Result<CMatrix> + Send + Sync;

/// A `2p x 2p` matrix function used as the coefficient matrix of a
/// linear-fractional transformation.
#[derive(Clone)]
pub struct Frame {
    p: usize,
    eval: Arc<FrameEval>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Frame(p = {})", self.p)
    }
}

impl Frame {
    pub fn new(p: usize, eval: impl Fn(C64) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        Self {
            p,
            eval: Arc::new(eval),
        }
    }

    /// The node frame `A(S, z)`.
    pub fn of_node(node: &SNode) -> Self {
        let node = node.clone();
        Self::new(node.p(), move |z| node.frame(z))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        (self.eval)(z)
    }

    pub fn blocks(&self, z: C64) -> Result<Blocks> {
        Ok(Blocks::of(&self.eval(z)?, self.p))
    }
}

type PairEval = dyn Fn(C64) -> (CMatrix, CMatrix) + Send + Sync;

/// Parameter pair `{R(z), Q(z)}`: nonsingular (`R*R + Q*Q > 0`) with
/// property-J (`R*Q + Q*R >= 0`) in the upper half-plane.
#[derive(Clone)]
pub enum ParamPair {
    Constant { r: CMatrix, q: CMatrix },
    Function { p: usize, eval: Arc<PairEval> },
}

impl fmt::Debug for ParamPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPair::Constant { r, q } => f
                .debug_struct("ParamPair::Constant")
                .field("r", r)
                .field("q", q)
                .finish(),
            ParamPair::Function { p, .. } => write!(f, "ParamPair::Function(p = {p})"),
        }
    }
}

/// Slack allowed on the property-J inequality.
pub const PAIR_TOL: f64 = 1e-9;

fn pair_forms(r: &CMatrix, q: &CMatrix) -> (CMatrix, CMatrix) {
    let gram = (&(&r.adjoint() * r) + &(&q.adjoint() * q)).hermitian_part();
    let jform = (&(&r.adjoint() * q) + &(&q.adjoint() * r)).hermitian_part();
    (gram, jform)
}

impl ParamPair {
    pub fn constant(r: CMatrix, q: CMatrix) -> Result<Self> {
        if r.shape() != q.shape() || !r.is_square() || r.rows() == 0 {
            return Err(Error::InvalidPair(format!(
                "R {:?} and Q {:?} must be square of equal size",
                r.shape(),
                q.shape()
            )));
        }
        Ok(ParamPair::Constant { r, q })
    }

    /// `{I_p, I_p}`.
    pub fn identity(p: usize) -> Self {
        ParamPair::Constant {
            r: CMatrix::identity(p),
            q: CMatrix::identity(p),
        }
    }

    pub fn from_fn(
        p: usize,
        f: impl Fn(C64) -> (CMatrix, CMatrix) + Send + Sync + 'static,
    ) -> Self {
        ParamPair::Function {
            p,
            eval: Arc::new(f),
        }
    }

    pub fn p(&self) -> usize {
        match self {
            ParamPair::Constant { r, .. } => r.rows(),
            ParamPair::Function { p, .. } => *p,
        }
    }

    pub fn eval(&self, z: C64) -> (CMatrix, CMatrix) {
        match self {
            ParamPair::Constant { r, q } => (r.clone(), q.clone()),
            ParamPair::Function { eval, .. } => eval(z),
        }
    }

    /// Checks nonsingularity and property-J at a single point.
    pub fn check_at(&self, z: C64) -> Result<()> {
        let (r, q) = self.eval(z);
        check_pair_values(&r, &q, self.p())
    }

    /// Checks the pair on 32 points spread over the lines `Im z = 0.5` and
    /// `Im z = 2`.
    pub fn validate(&self) -> Result<()> {
        for z in pair_validation_grid() {
            self.check_at(z)?;
        }
        Ok(())
    }

    /// True for a constant pair with `R*Q + Q*R > 0`, whose Weyl function is
    /// continuous up to the real axis.
    pub fn is_strictly_positive_constant(&self) -> bool {
        match self {
            ParamPair::Constant { r, q } => {
                let (_, jform) = pair_forms(r, q);
                min_eigenvalue(&jform).map(|e| e > 1e-12).unwrap_or(false)
            }
            ParamPair::Function { .. } => false,
        }
    }
}

fn check_pair_values(r: &CMatrix, q: &CMatrix, p: usize) -> Result<()> {
    if r.shape() != (p, p) || q.shape() != (p, p) {
        return Err(Error::InvalidPair("pair has wrong block size".into()));
    }
    if !(r.is_finite() && q.is_finite()) {
        return Err(Error::InvalidPair("pair has non-finite entries".into()));
    }
    let (gram, jform) = pair_forms(r, q);
    let scale = 1.0 + gram.max_abs();
    if min_eigenvalue(&gram)? <= 1e-12 * scale {
        return Err(Error::InvalidPair("R*R + Q*Q is singular".into()));
    }
    let m = min_eigenvalue(&jform)?;
    if m < -PAIR_TOL * scale {
        return Err(Error::InvalidPair(format!(
            "property-J violated: min eig(R*Q + Q*R) = {m:.3e}"
        )));
    }
    Ok(())
}

/// The 32 validation points used by [`ParamPair::validate`].
pub fn pair_validation_grid() -> Vec<C64> {
    let mut pts = Vec::with_capacity(32);
    for &y in &[0.5, 2.0] {
        for k in 0..16 {
            pts.push(C64::new(-4.0 + 8.0 * k as f64 / 15.0, y));
        }
    }
    pts
}

/// `i (A11 R + A12 Q)(A21 R + A22 Q)^{-1}` for a frame value and pair values.
pub fn lft_value(frame_value: &CMatrix, r: &CMatrix, q: &CMatrix, z: C64) -> Result<CMatrix> {
    let p = r.rows();
    let b = Blocks::of(frame_value, p);
    let num = &(&b.b11 * r) + &(&b.b12 * q);
    let den = &(&b.b21 * r) + &(&b.b22 * q);
    let den_t = den.adjoint();
    let x = den_t.solve(&num.adjoint()).map_err(|e| match e {
        LinalgError::Singular => Error::SingularDenominator(z),
        other => other.into(),
    })?;
    let phi = x.adjoint() * I;
    if !phi.is_finite() {
        return Err(Error::SingularDenominator(z));
    }
    Ok(phi)
}

/// Weyl function value `phi(z)` generated by a frame and a pair.
pub fn lft(frame: &Frame, pair: &ParamPair, z: C64) -> Result<CMatrix> {
    if pair.p() != frame.p() {
        return Err(Error::InvalidPair(format!(
            "pair block size {} differs from frame block size {}",
            pair.p(),
            frame.p()
        )));
    }
    let (r, q) = pair.eval(z);
    check_pair_values(&r, &q, frame.p())?;
    lft_value(&frame.eval(z)?, &r, &q, z)
}

/// A Weyl function `phi = LFT(frame, pair)`.
#[derive(Clone, Debug)]
pub struct WeylFn {
    pub frame: Frame,
    pub pair: ParamPair,
}

impl WeylFn {
    pub fn new(frame: Frame, pair: ParamPair) -> Self {
        Self { frame, pair }
    }

    pub fn p(&self) -> usize {
        self.frame.p()
    }

    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        lft(&self.frame, &self.pair, z)
    }

    /// Density of the absolutely continuous part of the spectral measure.
    /// Constant strictly positive pairs use [`boundary_density`] (with an
    /// exact log-determinant); otherwise the epsilon ladder of
    /// [`stieltjes_density`]. Points where evaluation fails come back as NaN,
    /// which the quadrature routines reject.
    pub fn spectral_density(&self) -> Density {
        let p = self.p();
        let nan = move || CMatrix::from_fn(p, p, |_, _| C64::new(f64::NAN, 0.0));
        if let (true, ParamPair::Constant { r, q }) =
            (self.pair.is_strictly_positive_constant(), &self.pair)
        {
            let (frame, r, q) = (self.frame.clone(), r.clone(), q.clone());
            let (f2, r2, q2) = (frame.clone(), r.clone(), q.clone());
            let (_, jform) = pair_forms(&r, &q);
            let jlog = cholesky_pd(&jform).map(|h| h.log_det()).unwrap_or(f64::NAN);
            return Density::from_fn(p, "weyl", move |t| {
                boundary_density(&frame, &r, &q, t).unwrap_or_else(|_| nan())
            })
            .with_log_det(move |t| {
                let d = match lft_denominator_value(&f2, &r2, &q2, C64::new(t, 0.0)) {
                    Ok(d) => d,
                    Err(_) => return f64::NAN,
                };
                match d.det() {
                    Ok(det) if det.norm() > 0.0 => {
                        jlog - 2.0 * det.norm().ln() - p as f64 * (2.0 * std::f64::consts::PI).ln()
                    }
                    _ => f64::NAN,
                }
            });
        }
        let phi = self.clone();
        Density::from_fn(p, "weyl", move |t| {
            let f = |z: C64| phi.eval(z);
            stieltjes_density(&f, t, &EPS_LADDER).unwrap_or_else(|_| nan())
        })
    }
}

fn lft_denominator_value(frame: &Frame, r: &CMatrix, q: &CMatrix, z: C64) -> Result<CMatrix> {
    let b = frame.blocks(z)?;
    Ok(&(&b.b21 * r) + &(&b.b22 * q))
}

/// `mu'(t) = (1/2pi) D(t)^{-*} (R*Q + Q*R) D(t)^{-1}` with `D = A21 R + A22 Q`,
/// valid for frames that are J-unitary on the real axis (node frames and the
/// Toeplitz chain frames). Avoids the cancellation in `phi - phi*` for large `|t|`.
pub fn boundary_density(frame: &Frame, r: &CMatrix, q: &CMatrix, t: f64) -> Result<CMatrix> {
    let z = C64::new(t, 0.0);
    let d = lft_denominator_value(frame, r, q, z)?;
    let (_, jform) = pair_forms(r, q);
    let x = d
        .adjoint()
        .solve(&jform)
        .map_err(|_| Error::SingularDenominator(z))?;
    let y = d
        .adjoint()
        .solve(&x.adjoint())
        .map_err(|_| Error::SingularDenominator(z))?;
    Ok(y.adjoint().hermitian_part() * (0.5 / std::f64::consts::PI))
}

/// `(phi - phi*) / (2 pi i)` evaluated on the real axis.
pub fn stieltjes_on_axis(phi: &dyn Fn(C64) -> Result<CMatrix>, t: f64) -> Result<CMatrix> {
    Ok(imag_part_over_pi(&phi(C64::new(t, 0.0))?))
}

fn imag_part_over_pi(v: &CMatrix) -> CMatrix {
    v.imaginary_part() * (1.0 / std::f64::consts::PI)
}

/// Default epsilon ladder for Stieltjes inversion.
pub const EPS_LADDER: [f64; 3] = [1e-4, 1e-5, 1e-6];

/// Stieltjes inversion `mu'(t) ~ (phi(t + i eps) - phi(t + i eps)*) / (2 pi i)`.
/// For each `eps` in the ladder, the values at `eps` and `eps / 2` are
/// combined by Richardson extrapolation; the result is accepted once two
/// consecutive rungs agree within `1e-6` relative.
pub fn stieltjes_density(
    phi: &dyn Fn(C64) -> Result<CMatrix>,
    t: f64,
    ladder: &[f64],
) -> Result<CMatrix> {
    let mut prev: Option<CMatrix> = None;
    let mut last_drift = f64::INFINITY;
    for &eps in ladder {
        let a = imag_part_over_pi(&phi(C64::new(t, eps))?);
        let b = imag_part_over_pi(&phi(C64::new(t, eps / 2.0))?);
        let rich = &(&b * 2.0) - &a;
        if let Some(prev) = prev {
            let drift = (&rich - &prev).max_abs();
            last_drift = drift;
            if drift <= 1e-6 * rich.max_abs().max(1e-6) {
                return Ok(rich.hermitian_part());
            }
        }
        prev = Some(rich);
    }
    Err(Error::NotConverged(format!(
        "Stieltjes inversion at t = {t}: Richardson drift {last_drift:.3e}"
    )))
}

/// Herglotz data: `gamma = lim phi(i eta)/(i eta)` and `theta = Re phi(i)`.
#[derive(Debug, Clone)]
pub struct HerglotzData {
    pub gamma: CMatrix,
    pub theta: CMatrix,
}

/// Estimates `gamma` from `Im phi(i eta) / eta` with two-level Richardson
/// extrapolation (removing the `1/eta` and `1/eta^2` terms) on
/// `eta in [1.25e3, 1e4]`, and returns `theta = Re phi(i)`. The kernel
/// `1/(t - i) - t/(1 + t^2) = i/(1 + t^2)` is purely imaginary, so the real
/// part at `z = i` is exactly `theta`.
pub fn herglotz_params(phi: &dyn Fn(C64) -> Result<CMatrix>) -> Result<HerglotzData> {
    let g = |eta: f64| -> Result<CMatrix> {
        Ok(phi(C64::new(0.0, eta))?.imaginary_part() * (1.0 / eta))
    };
    let rich = |eta: f64| -> Result<CMatrix> {
        let (a, b, c) = (g(eta)?, g(2.0 * eta)?, g(4.0 * eta)?);
        let first = &(&b * 2.0) - &a;
        let second = &(&c * 2.0) - &b;
        Ok(&(&second * (4.0 / 3.0)) - &(&first * (1.0 / 3.0)))
    };
    let coarse = rich(1.25e3)?;
    let fine = rich(2.5e3)?;
    let drift = (&fine - &coarse).max_abs();
    if !(drift <= 1e-6 * (1.0 + fine.max_abs())) {
        return Err(Error::NotConverged(format!(
            "linear-term estimate drifts by {drift:.3e} between eta = 1.25e3 and 2.5e3"
        )));
    }
    let estimate = fine.hermitian_part();
    let tol = 1e-6 * (1.0 + estimate.max_abs());
    if min_eigenvalue(&estimate)? < -tol {
        return Err(Error::NotConverged(
            "linear-term estimate is not PSD".into(),
        ));
    }
    let gamma = hermitian_fn(&estimate, |x| if x.abs() <= tol { 0.0 } else { x.max(0.0) })?;
    let theta = phi(I)?.hermitian_part();
    Ok(HerglotzData { gamma, theta })
}

/// Residuals `(||S - S~||, ||Phi1 - Phi1~||)` of the interpolation problem for
/// the data `{gamma, theta, mu'}`.
pub fn interp_residual(
    node: &SNode,
    data: &HerglotzData,
    density: &Density,
    rule: Rule,
) -> Result<(f64, f64)> {
    let a = node.a();
    let m = node.dim();
    let a_lu = a.lu().map_err(|_| {
        Error::Unsupported("zero is an eigenvalue of A; interpolation residual undefined".into())
    })?;
    let phi2 = node.phi2();
    let gamma_half = hermitian_fn(&data.gamma, |x| x.max(0.0).sqrt())?;
    let f = a_lu.solve(&(phi2 * &gamma_half))?;
    let (lo, hi) = density.support();
    let id = CMatrix::identity(m);
    let integrand = |t: f64| -> CMatrix {
        let mu = density.eval(t);
        let lhs = &id - &a.scale_re(t);
        let rt = match lhs.lu() {
            Ok(lu) => lu,
            Err(_) => return CMatrix::from_fn(m, m + node.p(), |_, _| C64::new(f64::NAN, 0.0)),
        };
        let x = rt.solve(phi2).expect("square system");
        let jac = 1.0 + t * t;
        let s_part = &(&x * &mu) * &x.adjoint();
        let kernel = &(a * &x) + &(phi2 * (t / jac));
        let p1_part = &kernel * &mu;
        CMatrix::hstack(&[&s_part, &p1_part]).scale_re(jac)
    };
    let q = integrate_theta(lo, hi, density.breakpoints(), rule, 1e-6, integrand)?;
    let s_mu = q.value.block(0, 0, m, m);
    let p1_mu = q.value.block(0, m, m, node.p()) * (-I);
    let s_tilde = &s_mu + &(&f * &f.adjoint());
    let p1_tilde = &p1_mu + &((&(phi2 * &data.theta) + &(&f * &gamma_half)) * I);
    Ok((
        (node.s() - &s_tilde).norm2(),
        (node.phi1() - &p1_tilde).norm2(),
    ))
}

/// The matrix ball of all Weyl values at a point `z` in the upper half-plane.
#[derive(Debug, Clone)]
pub struct MatrixBall {
    pub z: C64,
    pub center: CMatrix,
    pub left_radius: CMatrix,
    pub right_radius: CMatrix,
    /// `rho(z, zbar)`.
    pub rho: CMatrix,
    /// `rho(zbar, z)`.
    pub rho_bar: CMatrix,
    pub aleph: CMatrix,
    frame_inverse: CMatrix,
}

/// `aleph = (A^{-1})* J A^{-1}` with `A^{-1} = J A(zbar)* J`, and the ball
/// `center - L u R`, `L = (-rho(zbar, z))^{-1/2}`, `R = rho(z, zbar)^{-1/2}`.
pub fn matrix_ball(node: &SNode, z: C64) -> Result<MatrixBall> {
    let p = node.p();
    let j = big_j(p);
    let frame_inverse = &(&j * &node.frame(z.conj())?.adjoint()) * &j;
    let aleph = &(&frame_inverse.adjoint() * &j) * &frame_inverse;
    let rho = node.rho(z, Orientation::Upper)?;
    let rho_bar = node.rho(z, Orientation::Lower)?;
    let neg = cholesky_pd(&(-&rho_bar))?;
    let pos = cholesky_pd(&rho)?;
    let b = Blocks::of(&aleph, p);
    let center = &neg.inverse() * &(b.b12 * I);
    Ok(MatrixBall {
        z,
        center,
        left_radius: neg.inv_sqrtm(),
        right_radius: pos.inv_sqrtm(),
        rho,
        rho_bar,
        aleph,
        frame_inverse,
    })
}

impl MatrixBall {
    pub fn p(&self) -> usize {
        self.center.rows()
    }

    /// `center - L u R`.
    pub fn value(&self, u: &CMatrix) -> CMatrix {
        &self.center - &(&(&self.left_radius * u) * &self.right_radius)
    }

    /// `u = (-rho_bar)^{-1/2} (rho_bar value + i aleph12) rho^{1/2}`.
    pub fn membership(&self, value: &CMatrix) -> Result<CMatrix> {
        let p = self.p();
        let a12 = self.aleph.pblock(p, 0, 1);
        let inner = &(&self.rho_bar * value) + &(a12 * I);
        let left = cholesky_pd(&(-&self.rho_bar))?.inv_sqrtm();
        let r_half = cholesky_pd(&self.rho)?.sqrtm();
        Ok(&(&left * &inner) * &r_half)
    }

    /// `aleph22 - aleph21 aleph11^{-1} aleph12 - rho^{-1}`.
    pub fn schur_residual(&self) -> Result<f64> {
        let b = Blocks::of(&self.aleph, self.p());
        let schur = &b.b22 - &(&b.b21 * &b.b11.solve(&b.b12)?);
        Ok((&schur - &self.rho.inverse()?).max_abs())
    }

    /// Constant pair generating `value` at this point: `[R; Q] = A^{-1} [-i value; I]`.
    pub fn pair_for_value(&self, value: &CMatrix) -> Result<ParamPair> {
        let p = self.p();
        let col = CMatrix::vstack(&[&(value * (-I)), &CMatrix::identity(p)]);
        let rq = &self.frame_inverse * &col;
        ParamPair::constant(rq.block(0, 0, p, p), rq.block(p, 0, p, p))
    }
}

/// Extremal constant pair at `lambda`: `R = A22(lambda)*`, `Q = A21(lambda)*`.
pub fn extremal_pair(node: &SNode, lambda: C64) -> Result<ParamPair> {
    let b = Blocks::of(&node.frame(lambda)?, node.p());
    ParamPair::constant(b.b22.adjoint(), b.b21.adjoint())
}

/// `F(z) = A21(z) R + A22(z) Q`.
pub fn lft_denominator(frame: &Frame, pair: &ParamPair, z: C64) -> Result<CMatrix> {
    let (r, q) = pair.eval(z);
    lft_denominator_value(frame, &r, &q, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::c;

    /// Hankel node with `n = 1`, `H0 = 1`.
    fn unit_node() -> SNode {
        SNode::new(
            1,
            CMatrix::zeros(1, 1),
            CMatrix::identity(1),
            CMatrix::zeros(1, 1),
            CMatrix::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn unit_node_frame_and_rho() {
        let node = unit_node();
        assert_eq!(verify_identity(&node), 0.0);
        let z = c(0.3, 1.7);
        let f = node.frame(z).unwrap();
        let want = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![-I * z, c(1.0, 0.0)]])
            .unwrap();
        assert!((&f - &want).max_abs() < 1e-15);
        assert!((&node.frame_via_transfer(z).unwrap() - &want).max_abs() < 1e-15);
        assert!((node.rho(I, Orientation::Upper).unwrap()[(0, 0)] - 2.0).norm() < 1e-15);
        assert!((node.rho(I, Orientation::Lower).unwrap()[(0, 0)] + 2.0).norm() < 1e-15);
        assert!(matches!(
            node.rho(c(1.0, 0.0), Orientation::Upper),
            Err(Error::NotInUpperHalfPlane(_))
        ));
    }

    #[test]
    fn unit_node_weyl_function() {
        let node = unit_node();
        let frame = Frame::of_node(&node);
        let phi = lft(&frame, &ParamPair::identity(1), I).unwrap();
        assert!((phi[(0, 0)] - c(0.0, 0.5)).norm() < 1e-15);
        let z = c(-0.4, 0.9);
        let phi = lft(&frame, &ParamPair::identity(1), z).unwrap();
        assert!((phi[(0, 0)] - I / (1.0 - I * z)).norm() < 1e-14);
        let zero = ParamPair::constant(CMatrix::zeros(1, 1), CMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(lft(&frame, &zero, I), Err(Error::InvalidPair(_))));
        for tau in [10.0, 100.0, 1e4] {
            let pair =
                ParamPair::constant(CMatrix::identity(1), CMatrix::identity(1) * tau).unwrap();
            let v = lft(&frame, &pair, I).unwrap()[(0, 0)];
            assert!((v - I / (tau + 1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_node_ball() {
        let ball = matrix_ball(&unit_node(), I).unwrap();
        let want = CMatrix::from_real_rows(&[&[-2.0, 1.0], &[1.0, 0.0]]);
        assert!((&ball.aleph - &want).max_abs() < 1e-12);
        assert!((ball.center[(0, 0)] - c(0.0, 0.5)).norm() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ball.left_radius[(0, 0)].re - r).abs() < 1e-12);
        assert!((ball.right_radius[(0, 0)].re - r).abs() < 1e-12);
        assert!(ball.schur_residual().unwrap() < 1e-12);
        let u0 = ball.membership(&ball.center).unwrap();
        assert!(u0.max_abs() < 1e-14);
        assert!((&ball.value(&CMatrix::zeros(1, 1)) - &ball.center).max_abs() < 1e-15);
        // Outside the disk |w - i/2| <= 1/2.
        let far = &ball.center + &(CMatrix::identity(1) * 1.0);
        assert!(ball.membership(&far).unwrap().norm2() > 1.0);
    }

    #[test]
    fn unit_node_extremal_pair() {
        let node = unit_node();
        let pair = extremal_pair(&node, I).unwrap();
        let (r, q) = pair.eval(I);
        assert!((r[(0, 0)] - 1.0).norm() < 1e-15);
        assert!((q[(0, 0)] - 1.0).norm() < 1e-15);
        let f = lft_denominator(&Frame::of_node(&node), &pair, I).unwrap();
        assert!((f[(0, 0)] - 2.0).norm() < 1e-15);
    }

    #[test]
    fn stieltjes_examples() {
        let phi = |z: C64| -> Result<CMatrix> { Ok(CMatrix::scalar(I / (1.0 - I * z))) };
        let d = stieltjes_density(&phi, 0.0, &EPS_LADDER).unwrap();
        assert!((d[(0, 0)].re - 1.0 / std::f64::consts::PI).abs() < 1e-9);
        let real = |z: C64| -> Result<CMatrix> { Ok(CMatrix::scalar(z * z + 3.0)) };
        assert!(
            stieltjes_density(&real, 0.7, &EPS_LADDER)
                .unwrap()
                .max_abs()
                < 1e-9
        );
    }

    #[test]
    fn herglotz_examples() {
        let lin = |z: C64| -> Result<CMatrix> { Ok(CMatrix::scalar(z)) };
        let h = herglotz_params(&lin).unwrap();
        assert!((h.gamma[(0, 0)].re - 1.0).abs() < 1e-9 && h.theta.max_abs() < 1e-12);
        let theta0 = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.5, 0.5)],
            vec![c(0.5, -0.5), c(-2.0, 0.0)],
        ])
        .unwrap();
        let t0 = theta0.clone();
        let constant = move |_z: C64| -> Result<CMatrix> { Ok(t0.clone()) };
        let h = herglotz_params(&constant).unwrap();
        assert!(h.gamma.max_abs() < 1e-12 && (&h.theta - &theta0).max_abs() < 1e-12);
        let decay = |z: C64| -> Result<CMatrix> { Ok(CMatrix::scalar(-1.0 / (z + I))) };
        assert!(herglotz_params(&decay).unwrap().gamma.max_abs() < 1e-9);
    }

    #[test]
    fn interpolation_unsupported_for_singular_a() {
        let node = unit_node();
        let data = HerglotzData {
            gamma: CMatrix::zeros(1, 1),
            theta: CMatrix::zeros(1, 1),
        };
        let d = Density::cauchy(1.0).unwrap();
        assert!(matches!(
            interp_residual(&node, &data, &d, Rule::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
