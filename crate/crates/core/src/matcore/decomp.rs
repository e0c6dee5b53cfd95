use super::{default_herm_tol, CMatrix, LinalgError, C64};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: CMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs();
        let tiny = f64::EPSILON * scale * (n as f64).max(1.0) * 1e-2;
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= tiny || pmax == 0.0 {
                return Err(LinalgError::Singular);
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { n, lu, perm, sign })
    }

    pub fn det(&self) -> C64 {
        let mut d = C64::new(self.sign, 0.0);
        for i in 0..self.n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        if b.rows() != self.n {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs has {} rows, system has {}",
                b.rows(),
                self.n
            )));
        }
        let n = self.n;
        let m = b.cols();
        let mut x = CMatrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for col in 0..m {
            for i in 0..n {
                let mut acc = x[(i, col)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, col)];
                for k in i + 1..n {
                    acc -= self.lu[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc / self.lu[(i, i)];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMatrix, LinalgError> {
        self.solve(&CMatrix::identity(self.n))
    }
}

/// Fails with the maximal deviation when `max|M - M*| > tol`.
pub fn assert_hermitian(m: &CMatrix, tol: f64) -> Result<(), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "Hermitian check on a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let deviation = m.hermitian_deviation();
    if deviation <= tol {
        Ok(())
    } else {
        Err(LinalgError::NotHermitian { deviation })
    }
}

/// A Hermitian positive definite matrix together with its Cholesky factor
/// `M = L L*`.
#[derive(Debug, Clone)]
pub struct HermPd {
    matrix: CMatrix,
    factor: CMatrix,
}

/// Cholesky factorization; succeeds iff `M` is Hermitian (default tolerance)
/// and every pivot is positive.
pub fn cholesky_pd(m: &CMatrix) -> Result<HermPd, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    assert_hermitian(m, default_herm_tol(m))?;
    let n = m.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.is_nan() || d <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            // Use the lower triangle, symmetrised, so tiny asymmetries do not bias the factor.
            let mut acc = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / djj;
        }
    }
    Ok(HermPd {
        matrix: m.clone(),
        factor: l,
    })
}

impl HermPd {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Lower-triangular `L` with `M = L L*`.
    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix, LinalgError> {
        let n = self.dim();
        if b.rows() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs has {} rows, system has {n}",
                b.rows()
            )));
        }
        let l = &self.factor;
        let mut x = b.clone();
        for col in 0..b.cols() {
            for i in 0..n {
                let mut acc = x[(i, col)];
                for k in 0..i {
                    acc -= l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc / l[(i, i)].re;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, col)];
                for k in i + 1..n {
                    acc -= l[(k, i)].conj() * x[(k, col)];
                }
                x[(i, col)] = acc / l[(i, i)].re;
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> CMatrix {
        let inv = self
            .solve(&CMatrix::identity(self.dim()))
            .expect("square identity rhs");
        inv.hermitian_part()
    }

    /// Product of squared pivots.
    pub fn det(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.factor[(i, i)].re.powi(2))
            .product()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.factor[(i, i)].re.ln())
            .sum()
    }

    pub fn sqrtm(&self) -> CMatrix {
        hermitian_fn(&self.matrix, |x| x.max(0.0).sqrt()).expect("Hermitian by construction")
    }

    pub fn inv_sqrtm(&self) -> CMatrix {
        hermitian_fn(&self.matrix, |x| 1.0 / x.sqrt()).expect("Hermitian by construction")
    }
}

/// Hermitian square root of a positive definite matrix.
pub fn sqrtm_hpd(m: &HermPd) -> CMatrix {
    m.sqrtm()
}

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian `M`.
fn real_embedding(m: &CMatrix) -> Vec<f64> {
    let n = m.rows();
    let big = 2 * n;
    let mut e = vec![0.0; big * big];
    for i in 0..n {
        for j in 0..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            e[i * big + j] = z.re;
            e[(i + n) * big + j + n] = z.re;
            e[i * big + j + n] = -z.im;
            e[(i + n) * big + j] = z.im;
        }
    }
    e
}

/// Cyclic Jacobi on a dense real symmetric matrix. Returns eigenvalues
/// (unsorted) and the row-major orthogonal eigenvector matrix (columns).
fn jacobi_symmetric(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if fro == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..80 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-17 * fro {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigvalsh(m: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    assert_hermitian(m, default_herm_tol(m))?;
    let n = m.rows();
    let (mut ev, _) = jacobi_symmetric(real_embedding(m), 2 * n);
    ev.sort_by(f64::total_cmp);
    // The real embedding doubles every eigenvalue.
    Ok((0..n).map(|i| 0.5 * (ev[2 * i] + ev[2 * i + 1])).collect())
}

pub fn min_eigenvalue(m: &CMatrix) -> Result<f64, LinalgError> {
    Ok(eigvalsh(m)?.first().copied().unwrap_or(f64::INFINITY))
}

/// `f(M)` for Hermitian `M`, applied through the spectral decomposition.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix, LinalgError> {
    assert_hermitian(m, default_herm_tol(m))?;
    let n = m.rows();
    let big = 2 * n;
    let (ev, v) = jacobi_symmetric(real_embedding(m), big);
    let fe: Vec<f64> = ev.iter().map(|&x| f(x)).collect();
    // f(E) = V f(D) V^T; its left column blocks are [Re f(M); Im f(M)].
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..big {
                let w = fe[k] * v[j * big + k];
                re += v[i * big + k] * w;
                im += v[(i + n) * big + k] * w;
            }
            out[(i, j)] = C64::new(re, im);
        }
    }
    Ok(out.hermitian_part())
}

/// Least-squares solution of `B X = Y` (B tall with full column rank) via
/// modified Gram-Schmidt with one reorthogonalization pass.
pub fn lstsq(b: &CMatrix, y: &CMatrix) -> Result<CMatrix, LinalgError> {
    let (m, k) = b.shape();
    if m < k || y.rows() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "least squares with B {m}x{k}, Y {}x{}",
            y.rows(),
            y.cols()
        )));
    }
    let mut q = b.clone();
    let mut r = CMatrix::zeros(k, k);
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = C64::new(0.0, 0.0);
                for row in 0..m {
                    dot += q[(row, i)].conj() * q[(row, j)];
                }
                r[(i, j)] += dot;
                for row in 0..m {
                    let qi = q[(row, i)];
                    q[(row, j)] -= dot * qi;
                }
            }
        }
        let norm = (0..m).map(|row| q[(row, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-14 * (1.0 + b.max_abs()) {
            return Err(LinalgError::Singular);
        }
        r[(j, j)] = C64::new(norm, 0.0);
        for row in 0..m {
            q[(row, j)] /= norm;
        }
    }
    let qty = &q.adjoint() * y;
    let mut x = qty;
    for col in 0..x.cols() {
        for i in (0..k).rev() {
            let mut acc = x[(i, col)];
            for l in i + 1..k {
                acc -= r[(i, l)] * x[(l, col)];
            }
            x[(i, col)] = acc / r[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::super::{c, I};
    use super::*;
    use proptest::prelude::*;

    fn hpd_from(seed: &[f64], n: usize, shift: f64) -> CMatrix {
        let x = CMatrix::from_fn(n, n, |i, j| {
            c(
                seed[(i * n + j) % seed.len()],
                seed[(i * n + j + 7) % seed.len()],
            )
        });
        &(&x * &x.adjoint()) + &(CMatrix::identity(n) * shift)
    }

    #[test]
    fn hermitian_examples() {
        assert!(assert_hermitian(&CMatrix::identity(2), 1e-12).is_ok());
        let m = CMatrix::from_rows(&[vec![c(0.0, 0.0), I], vec![-I, c(0.0, 0.0)]]).unwrap();
        assert!(assert_hermitian(&m, 1e-12).is_ok());
        let bad = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        match assert_hermitian(&bad, 1e-12) {
            Err(LinalgError::NotHermitian { deviation }) => assert_eq!(deviation, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cholesky_examples() {
        let f = cholesky_pd(&CMatrix::identity(3)).unwrap();
        assert_eq!(f.factor(), &CMatrix::identity(3));
        let f = cholesky_pd(&CMatrix::from_real_rows(&[&[4.0]])).unwrap();
        assert_eq!(f.factor()[(0, 0)], c(2.0, 0.0));
        let bad = CMatrix::diag_real(&[1.0, -1.0]);
        assert!(matches!(
            cholesky_pd(&bad),
            Err(LinalgError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn sqrtm_examples() {
        let r = sqrtm_hpd(&cholesky_pd(&CMatrix::identity(2)).unwrap());
        assert!((&r - &CMatrix::identity(2)).max_abs() < 1e-14);
        let r = sqrtm_hpd(&cholesky_pd(&CMatrix::diag_real(&[4.0, 9.0])).unwrap());
        assert!((&r - &CMatrix::diag_real(&[2.0, 3.0])).max_abs() < 1e-13);
    }

    #[test]
    fn lu_det_and_solve() {
        let a = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(2.0, 1.0)],
            vec![c(1.0, -1.0), c(3.0, 0.0)],
        ])
        .unwrap();
        let d = a.det().unwrap();
        assert!((d - (c(0.0, 0.0) - c(2.0, 1.0) * c(1.0, -1.0))).norm() < 1e-14);
        let inv = a.inverse().unwrap();
        assert!((&(&a * &inv) - &CMatrix::identity(2)).max_abs() < 1e-14);
        assert_eq!(CMatrix::zeros(2, 2).inverse(), Err(LinalgError::Singular));
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let b = CMatrix::from_fn(6, 3, |i, j| {
            c((i as f64 + 1.0).powi(j as i32), 0.1 * j as f64)
        });
        let x = CMatrix::from_fn(3, 1, |i, _| c(i as f64 - 1.0, 0.5));
        let y = &b * &x;
        let got = lstsq(&b, &y).unwrap();
        assert!((&got - &x).max_abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs(seed in prop::collection::vec(-1.0f64..1.0, 32), n in 1usize..6) {
            let m = hpd_from(&seed, n, 0.1);
            let f = cholesky_pd(&m).unwrap();
            let l = f.factor();
            let err = (&(l * &l.adjoint()) - &m).norm2();
            prop_assert!(err <= 1e-12 * m.norm2());
        }

        #[test]
        fn sqrtm_squares_back_and_is_idempotent(seed in prop::collection::vec(-1.0f64..1.0, 32), n in 1usize..6) {
            let m = hpd_from(&seed, n, 0.1);
            let r = sqrtm_hpd(&cholesky_pd(&m).unwrap());
            prop_assert!((&(&r * &r) - &m).norm2() <= 1e-11 * m.norm2());
            prop_assert!(min_eigenvalue(&r).unwrap() > 0.0);
            let rr = sqrtm_hpd(&cholesky_pd(&(&r * &r)).unwrap());
            prop_assert!((&rr - &r).max_abs() <= 1e-10);
        }

        #[test]
        fn det_matches_lu(seed in prop::collection::vec(-1.0f64..1.0, 32), n in 1usize..6) {
            let m = hpd_from(&seed, n, 0.1);
            let chol = cholesky_pd(&m).unwrap().det();
            let lu = m.det().unwrap();
            prop_assert!((chol - lu.re).abs() <= 1e-10 * chol.abs());
            prop_assert!(lu.im.abs() <= 1e-10 * chol.abs());
        }

        #[test]
        fn eigenvalues_sum_to_trace(seed in prop::collection::vec(-1.0f64..1.0, 32), n in 1usize..6) {
            let m = hpd_from(&seed, n, -0.5);
            let ev = eigvalsh(&m).unwrap();
            let tr = m.trace().re;
            prop_assert!((ev.iter().sum::<f64>() - tr).abs() <= 1e-10 * (1.0 + tr.abs()));
        }
    }
}
