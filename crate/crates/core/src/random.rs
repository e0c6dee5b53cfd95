//! Random generators for property sweeps. All take a caller-supplied RNG so
//! that runs are reproducible from a seed.

use rand::Rng;

use crate::hankel::HankelSpec;
use crate::matcore::{CMatrix, C64};
use crate::snode::ParamPair;
use crate::toeplitz::ToeplitzSpec;

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller; avoids pulling in a distributions crate for one normal draw.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Matrix with independent standard complex Gaussian entries.
pub fn complex_gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(gauss(rng), gauss(rng)) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Random Hermitian matrix.
pub fn hermitian(rng: &mut impl Rng, p: usize) -> CMatrix {
    complex_gaussian(rng, p, p).hermitian_part()
}

/// Random PSD matrix of rank at most `rank`.
pub fn psd(rng: &mut impl Rng, p: usize, rank: usize) -> CMatrix {
    let x = complex_gaussian(rng, p, rank);
    (&x * &x.adjoint()).hermitian_part()
}

/// Random positive definite matrix with minimum eigenvalue at least `floor`.
pub fn hpd(rng: &mut impl Rng, p: usize, floor: f64) -> CMatrix {
    &psd(rng, p, p) + &(CMatrix::identity(p) * floor)
}

/// Strict contraction with spectral norm drawn uniformly from `[0, max_norm]`.
pub fn contraction(rng: &mut impl Rng, p: usize, max_norm: f64) -> CMatrix {
    let x = complex_gaussian(rng, p, p);
    let nrm = x.norm2().max(1e-300);
    x * (rng.gen_range(0.0..max_norm) / nrm)
}

/// Positive definite block Toeplitz spec: `s_{-k}` are trigonometric moments
/// of a random discrete matrix measure on the circle, plus `c I` on `s_0`.
pub fn toeplitz_spec(rng: &mut impl Rng, p: usize, n: usize) -> ToeplitzSpec {
    let atoms = 2 * n + 1;
    let angles: Vec<f64> = (0..atoms)
        .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    let weights: Vec<CMatrix> = (0..atoms)
        .map(|_| psd(rng, p, p) * (1.0 / atoms as f64))
        .collect();
    let shift = rng.gen_range(0.2..1.0);
    let s = (0..n)
        .map(|k| {
            let mut acc = CMatrix::zeros(p, p);
            for (th, w) in angles.iter().zip(&weights) {
                acc += &(w * C64::from_polar(1.0, -(k as f64) * th));
            }
            if k == 0 {
                acc = &acc.hermitian_part() + &(CMatrix::identity(p) * shift);
            }
            acc
        })
        .collect();
    let nu = hermitian(rng, p);
    ToeplitzSpec::new(p, s, nu).expect("generated blocks are well formed")
}

/// Positive definite block Hankel spec from the moments of a random discrete
/// matrix measure with `3n` atoms.
pub fn hankel_spec(rng: &mut impl Rng, p: usize, n: usize) -> HankelSpec {
    let atoms = 3 * n;
    let pts: Vec<f64> = (0..atoms).map(|_| gauss(rng)).collect();
    let weights: Vec<CMatrix> = (0..atoms)
        .map(|_| hpd(rng, p, 0.05) * (1.0 / atoms as f64))
        .collect();
    let h = (0..2 * n - 1)
        .map(|k| {
            let mut acc = CMatrix::zeros(p, p);
            for (t, w) in pts.iter().zip(&weights) {
                acc += &(w * t.powi(k as i32));
            }
            acc.hermitian_part()
        })
        .collect();
    HankelSpec::new(p, h).expect("generated moments are well formed")
}

/// Constant pair `{R, M R}` where `M` has positive definite Hermitian part,
/// so `R*Q + Q*R = R*(M + M*)R > 0`.
pub fn strict_constant_pair(rng: &mut impl Rng, p: usize) -> ParamPair {
    let r = &complex_gaussian(rng, p, p) + &(CMatrix::identity(p) * 1.5);
    let skew = {
        let x = complex_gaussian(rng, p, p);
        (&x - &x.adjoint()) * 0.5
    };
    let m = &hpd(rng, p, 0.1) + &skew;
    let q = &m * &r;
    ParamPair::constant(r, q).expect("square blocks")
}

/// Sample points in the upper half-plane with `Im z` in `[0.2, 3]` and
/// `|Re z| <= 3`.
pub fn upper_points(rng: &mut impl Rng, count: usize) -> Vec<C64> {
    (0..count)
        .map(|_| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.2..3.0)))
        .collect()
}
