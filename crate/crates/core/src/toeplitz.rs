//! Block Toeplitz S-nodes and the discrete Dirac systems they generate.
//!
//! A spec holds `s_0, s_{-1}, ..., s_{1-n}` and a Hermitian normalizer `nu`.
//! `S(n)` has `(i, j)` block `s_{j-i}` with `s_k = s_{-k}*`.

use crate::error::{Error, Result};
use crate::matcore::{
    assert_hermitian, big_j, cholesky_pd, default_herm_tol, k_matrix, min_eigenvalue, small_j,
    CMatrix, LinalgError, C64, I,
};
use crate::snode::{lft_value, Frame, ParamPair, SNode};

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSpec {
    p: usize,
    /// `s[k] = s_{-k}`.
    s: Vec<CMatrix>,
    nu: CMatrix,
}

impl ToeplitzSpec {
    pub fn new(p: usize, s: Vec<CMatrix>, nu: CMatrix) -> Result<Self> {
        if p == 0 || s.is_empty() {
            return Err(Error::InvalidInput(
                "Toeplitz spec needs p >= 1 and n >= 1".into(),
            ));
        }
        if s.iter().any(|b| b.shape() != (p, p)) || nu.shape() != (p, p) {
            return Err(
                LinalgError::DimensionMismatch(format!("Toeplitz blocks must be {p}x{p}")).into(),
            );
        }
        if s.iter().any(|b| !b.is_finite()) || !nu.is_finite() {
            return Err(LinalgError::NonFinite.into());
        }
        assert_hermitian(&s[0], default_herm_tol(&s[0]))?;
        assert_hermitian(&nu, default_herm_tol(&nu))?;
        Ok(Self { p, s, nu })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Block order `n`.
    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// `s_{-k}` for `0 <= k < n`.
    pub fn block(&self, k: usize) -> &CMatrix {
        &self.s[k]
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.s
    }

    pub fn nu(&self) -> &CMatrix {
        &self.nu
    }

    /// Spec truncated to order `k`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.n(),
            });
        }
        Self::new(self.p, self.s[..k].to_vec(), self.nu.clone())
    }

    /// `S(k)` for `k <= n`.
    pub fn assemble(&self, k: usize) -> CMatrix {
        assert!(k <= self.n(), "order {k} exceeds spec order {}", self.n());
        let p = self.p;
        let mut m = CMatrix::zeros(k * p, k * p);
        for i in 0..k {
            for j in 0..k {
                let b = if i >= j {
                    self.s[i - j].clone()
                } else {
                    self.s[j - i].adjoint()
                };
                m.set_block(i * p, j * p, &b);
            }
        }
        m
    }

    fn node_parts(&self, k: usize) -> (CMatrix, CMatrix, CMatrix) {
        let p = self.p;
        let half_i = C64::new(0.0, 0.5);
        let a = CMatrix::from_fn(k * p, k * p, |r, c| {
            let (bi, bj) = (r / p, c / p);
            if r % p != c % p || bj > bi {
                C64::new(0.0, 0.0)
            } else if bi == bj {
                half_i
            } else {
                I
            }
        });
        let phi1 = CMatrix::vstack(&vec![&CMatrix::identity(p); k]);
        let mut phi2 = CMatrix::zeros(k * p, p);
        let mut acc = &self.s[0] * 0.5;
        for i in 0..k {
            if i > 0 {
                acc += &self.s[i];
            }
            phi2.set_block(i * p, 0, &(&acc + &(&self.nu * I)));
        }
        (a, phi1, phi2)
    }
}

/// Node `{A, S(n), [Phi1 Phi2]}`: `A` has `i/2` on the block diagonal and `i`
/// strictly below, `Phi1` is a column of identities and `Phi2` holds the
/// partial sums `s_0/2 + s_{-1} + ... + s_{-k} + i nu`.
pub fn build_toeplitz_node(spec: &ToeplitzSpec) -> Result<SNode> {
    node_of_order(spec, spec.n())
}

fn node_of_order(spec: &ToeplitzSpec, k: usize) -> Result<SNode> {
    let (a, phi1, phi2) = spec.node_parts(k);
    SNode::new(spec.p, a, spec.assemble(k), phi1, phi2)
}

/// Per-step data of the factorization chain.
#[derive(Debug, Clone)]
pub struct ChainStep {
    pub t: CMatrix,
    pub x: CMatrix,
    pub y: CMatrix,
}

/// Discrete Dirac system coefficients `C_k` and Verblunsky-type coefficients
/// `rho_k`, `0 <= k < len`.
#[derive(Debug, Clone)]
pub struct DiracChain {
    p: usize,
    pub c: Vec<CMatrix>,
    pub rho: Vec<CMatrix>,
    /// `t_k, X_k, Y_k` for `k = 1..=len` when the chain came from a spec.
    pub steps: Vec<ChainStep>,
}

impl DiracChain {
    /// Chain from contractive coefficients via Halmos extensions.
    pub fn from_rhos(p: usize, rhos: Vec<CMatrix>) -> Result<Self> {
        let c = rhos.iter().map(halmos).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            c,
            rho: rhos,
            steps: Vec::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Chain with coefficients `rho_{from}, rho_{from+1}, ...`.
    pub fn tail(&self, from: usize) -> Self {
        Self {
            p: self.p,
            c: self.c[from.min(self.len())..].to_vec(),
            rho: self.rho[from.min(self.len())..].to_vec(),
            steps: Vec::new(),
        }
    }

    /// Worst violations of `C j C = j`, `C > 0`, `||rho|| < 1`: returns
    /// `(max |CjC - j|, min eig C, max ||rho||)`.
    pub fn invariant_report(&self) -> Result<(f64, f64, f64)> {
        let j = small_j(self.p);
        let mut cjc: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        let mut max_rho: f64 = 0.0;
        for (c, r) in self.c.iter().zip(&self.rho) {
            cjc = cjc.max((&(&(c * &j) * c) - &j).max_abs());
            min_eig = min_eig.min(min_eigenvalue(&c.hermitian_part())?);
            max_rho = max_rho.max(r.norm2());
        }
        Ok((cjc, min_eig, max_rho))
    }
}

/// `beta = t^{-1/2} [X Y]` and `C = 2 K* beta* beta K - j`.
fn dirac_coefficient(step: &ChainStep, p: usize) -> Result<CMatrix> {
    let t = cholesky_pd(&step.t)?;
    let beta = &t.inv_sqrtm() * &CMatrix::hstack(&[&step.x, &step.y]);
    let k = k_matrix(p);
    let c = &(&(&(&k.adjoint() * &beta.adjoint()) * &beta) * &k) * 2.0;
    Ok((&c - &small_j(p)).hermitian_part())
}

/// `rho = C11^{-1} C12`.
pub fn rho_from_c(c: &CMatrix, p: usize) -> Result<CMatrix> {
    Ok(c.pblock(p, 0, 0).solve(&c.pblock(p, 0, 1))?)
}

/// Factorization chain: for each order `k`, the last block row of
/// `S(k)^{-1}` gives `t_k` and `[X_k Y_k]`, from which `C_{k-1}` and
/// `rho_{k-1}` follow.
pub fn toeplitz_chain(spec: &ToeplitzSpec) -> Result<DiracChain> {
    let p = spec.p;
    let n = spec.n();
    let mut steps = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for k in 1..=n {
        let sk = spec.assemble(k);
        let chol = match cholesky_pd(&sk) {
            Ok(f) => f,
            Err(LinalgError::NotPositiveDefinite { .. }) => {
                return Err(Error::NotPositiveDefiniteAt { order: k })
            }
            Err(e) => return Err(e.into()),
        };
        let mut unit = CMatrix::zeros(k * p, p);
        unit.set_block((k - 1) * p, 0, &CMatrix::identity(p));
        let last_row = chol.solve(&unit)?.adjoint();
        let (_, phi1, phi2) = spec.node_parts(k);
        let step = ChainStep {
            t: last_row.block(0, (k - 1) * p, p, p).hermitian_part(),
            x: &last_row * &phi1,
            y: &last_row * &phi2,
        };
        let ck = dirac_coefficient(&step, p)?;
        rho.push(rho_from_c(&ck, p)?);
        c.push(ck);
        steps.push(step);
    }
    Ok(DiracChain { p, c, rho, steps })
}

/// Factors `w_k(lambda) = I - i (i/2 - lambda)^{-1} J [X_k Y_k]* t_k^{-1} [X_k Y_k]`,
/// ordered `w_1, ..., w_n` (the product is taken as `w_n ... w_1`).
pub fn factorize_transfer(spec: &ToeplitzSpec, lambda: C64) -> Result<Vec<CMatrix>> {
    let gap = C64::new(0.0, 0.5) - lambda;
    if gap.norm() <= 1e-14 {
        return Err(Error::PoleAtLambda(lambda));
    }
    let chain = toeplitz_chain(spec)?;
    let p = spec.p;
    let j = big_j(p);
    chain
        .steps
        .iter()
        .map(|st| {
            let xy = CMatrix::hstack(&[&st.x, &st.y]);
            let mid = st.t.solve(&xy)?;
            let q = &xy.adjoint() * &mid;
            Ok(&CMatrix::identity(2 * p) - &((&j * &q) * (I / gap)))
        })
        .collect()
}

/// `w_n ... w_1`.
pub fn ordered_product(factors: &[CMatrix]) -> CMatrix {
    let dim = factors.first().map_or(0, |f| f.rows());
    factors
        .iter()
        .fold(CMatrix::identity(dim), |acc, w| w * &acc)
}

/// Halmos extension `C = D F` with `D = diag((I - rho rho*)^{-1/2}, (I - rho* rho)^{-1/2})`
/// and `F = [[I, rho], [rho*, I]]`.
pub fn halmos(rho: &CMatrix) -> Result<CMatrix> {
    if !rho.is_square() {
        return Err(
            LinalgError::DimensionMismatch("Verblunsky coefficient must be square".into()).into(),
        );
    }
    let norm = rho.norm2();
    if !(norm < 1.0 - 1e-12) {
        return Err(Error::NotContractive { norm });
    }
    let p = rho.rows();
    let e = CMatrix::identity(p);
    let left = cholesky_pd(&(&e - &(rho * &rho.adjoint())).hermitian_part())?.inv_sqrtm();
    let right = cholesky_pd(&(&e - &(&rho.adjoint() * rho)).hermitian_part())?.inv_sqrtm();
    let z = CMatrix::zeros(p, p);
    let d = CMatrix::from_blocks_2x2(&left, &z, &z, &right);
    let f = CMatrix::from_blocks_2x2(&e, rho, &rho.adjoint(), &e);
    Ok(&d * &f)
}

/// Fundamental solution `W_k(z)`, `W_0 = I`, `W_{m+1} = (I + i z j C_m) W_m`.
pub fn dirac_fundamental(chain: &DiracChain, z: C64, k: usize) -> Result<CMatrix> {
    if k > chain.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: chain.len(),
        });
    }
    let p = chain.p;
    let j = small_j(p) * (I * z);
    let id = CMatrix::identity(2 * p);
    Ok(chain.c[..k]
        .iter()
        .fold(id.clone(), |w, c| &(&id + &(&j * c)) * &w))
}

/// Frame `A_n(z) = (1 - i z/2)^{-n} J j K W_n(-conj(z)/2)* K* j J`.
pub fn frame_toeplitz(chain: &DiracChain, n: usize, z: C64) -> Result<CMatrix> {
    let pre = 1.0 - I * z * 0.5;
    if pre.norm() <= 1e-14 {
        return Err(Error::PoleAtZ(z));
    }
    let p = chain.p;
    if n == 0 {
        return Ok(CMatrix::identity(2 * p));
    }
    let w = dirac_fundamental(chain, -z.conj() * 0.5, n)?;
    let jj = &big_j(p) * &small_j(p);
    let k = k_matrix(p);
    let core = &(&(&(&jj * &k) * &w.adjoint()) * &k.adjoint()) * &jj.adjoint();
    Ok(core * pre.powi(-(n as i32)))
}

/// The same frame computed from the `ToeplitzSpec`: `J j w_A(n, -1/conj z)* j J`.
pub fn frame_from_spec(spec: &ToeplitzSpec, z: C64) -> Result<CMatrix> {
    let p = spec.p;
    if z.norm() == 0.0 {
        return Ok(CMatrix::identity(2 * p));
    }
    let node = build_toeplitz_node(spec)?;
    let lambda = -1.0 / z.conj();
    let w = node.transfer(lambda).map_err(|e| match e {
        Error::SingularResolvent(_) => Error::PoleAtZ(z),
        other => other,
    })?;
    let jj = &big_j(p) * &small_j(p);
    Ok(&(&jj * &w.adjoint()) * &jj.adjoint())
}

/// The frame `A_n` of a chain as a [`Frame`].
pub fn chain_frame(chain: &DiracChain, n: usize) -> Frame {
    let chain = chain.clone();
    Frame::new(chain.p, move |z| frame_toeplitz(&chain, n, z))
}

/// Taylor coefficients `c_0, ..., c_{m-1}` of `g(zeta) = -i phi(2i(1 - zeta)/(1 + zeta))`
/// by the trapezoid rule on `|zeta| = r` with `nodes` points; the result is
/// accepted only if a run with twice the nodes agrees within `1e-8`.
pub fn taylor_recover(
    phi: &dyn Fn(C64) -> Result<CMatrix>,
    m: usize,
    r: f64,
    nodes: usize,
) -> Result<Vec<CMatrix>> {
    if !(r > 0.0 && r < 1.0) || nodes < m.max(1) {
        return Err(Error::InvalidInput(format!(
            "Taylor extraction needs 0 < r < 1 and at least m nodes (r = {r}, nodes = {nodes}, m = {m})"
        )));
    }
    let run = |count: usize| -> Result<Vec<CMatrix>> {
        let mut vals = Vec::with_capacity(count);
        for q in 0..count {
            let zeta = C64::from_polar(r, 2.0 * std::f64::consts::PI * q as f64 / count as f64);
            let z = (1.0 - zeta) / (1.0 + zeta) * C64::new(0.0, 2.0);
            let v = phi(z).map_err(|e| Error::EvaluationFailure(format!("at z = {z}: {e}")))?;
            if !v.is_finite() {
                return Err(Error::EvaluationFailure(format!(
                    "non-finite value at z = {z}"
                )));
            }
            vals.push(v * (-I));
        }
        Ok((0..m)
            .map(|k| {
                let mut acc = CMatrix::zeros(vals[0].rows(), vals[0].cols());
                for (q, v) in vals.iter().enumerate() {
                    let ph = C64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * (k * q) as f64 / count as f64,
                    );
                    acc += &(v * ph);
                }
                acc * (1.0 / (count as f64 * r.powi(k as i32)))
            })
            .collect())
    };
    let coarse = run(nodes)?;
    let fine = run(2 * nodes)?;
    let scale = fine.iter().map(CMatrix::max_abs).fold(1.0, f64::max);
    let drift = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).max_abs())
        .fold(0.0, f64::max);
    if drift > 1e-8 * scale {
        return Err(Error::NotConverged(format!(
            "Taylor coefficients drift by {drift:.3e} when doubling nodes"
        )));
    }
    Ok(fine)
}

/// Max over `zgrid` of `|| phi(z) - psi(z) ||`, where `phi` is the Weyl
/// function of the whole chain, `psi` is `phi~` (Weyl function of the tail
/// starting at `split`) pushed through the head frame `A_split`.
pub fn khrushchev_check(
    rhos: &[CMatrix],
    split: usize,
    pair: &ParamPair,
    zgrid: &[C64],
) -> Result<f64> {
    let p = rhos
        .first()
        .map(CMatrix::rows)
        .ok_or_else(|| Error::InvalidInput("empty coefficient list".into()))?;
    if split > rhos.len() {
        return Err(Error::IndexOutOfRange {
            index: split,
            len: rhos.len(),
        });
    }
    let chain = DiracChain::from_rhos(p, rhos.to_vec())?;
    let tail = chain.tail(split);
    let mut worst: f64 = 0.0;
    for &z in zgrid {
        let (r, q) = pair.eval(z);
        let phi = lft_value(&frame_toeplitz(&chain, chain.len(), z)?, &r, &q, z)?;
        let phi_tail = lft_value(&frame_toeplitz(&tail, tail.len(), z)?, &r, &q, z)?;
        let head = frame_toeplitz(&chain, split, z)?;
        let psi = lft_value(&head, &(phi_tail * (-I)), &CMatrix::identity(p), z)?;
        worst = worst.max((&phi - &psi).max_abs());
    }
    Ok(worst)
}

/// `[R; Q] = A^{-1} [-i phi; I]` for a frame value `A`.
pub fn pullback_pair(frame_value: &CMatrix, phi: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let p = phi.rows();
    let col = CMatrix::vstack(&[&(phi * (-I)), &CMatrix::identity(p)]);
    let rq = frame_value.solve(&col)?;
    Ok((rq.block(0, 0, p, p), rq.block(p, 0, p, p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::c;
    use crate::snode::verify_identity;

    fn scalar_spec(s: &[C64], nu: f64) -> ToeplitzSpec {
        ToeplitzSpec::new(
            1,
            s.iter().map(|&z| CMatrix::scalar(z)).collect(),
            CMatrix::scalar(c(nu, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn order_one_node_by_hand() {
        let spec = scalar_spec(&[c(2.0, 0.0)], 0.0);
        let node = build_toeplitz_node(&spec).unwrap();
        assert_eq!(node.a()[(0, 0)], c(0.0, 0.5));
        assert_eq!(node.phi1()[(0, 0)], c(1.0, 0.0));
        assert_eq!(node.phi2()[(0, 0)], c(1.0, 0.0));
        assert_eq!(verify_identity(&node), 0.0);
        let chain = toeplitz_chain(&spec).unwrap();
        let st = &chain.steps[0];
        for v in [&st.t, &st.x, &st.y] {
            assert!((v[(0, 0)] - 0.5).norm() < 1e-15);
        }
        assert!((&chain.c[0] - &CMatrix::identity(2)).max_abs() < 1e-15);
        assert!(chain.rho[0].max_abs() < 1e-15);
    }

    #[test]
    fn order_one_factor_by_hand() {
        let spec = scalar_spec(&[c(2.0, 0.0)], 0.0);
        let lambda = c(1.0, 0.0);
        let f = factorize_transfer(&spec, lambda).unwrap();
        assert_eq!(f.len(), 1);
        let col = CMatrix::from_real_rows(&[&[0.5], &[0.5]]);
        let q = (&col * &col.adjoint()) * 2.0;
        let want = &CMatrix::identity(2) - &((&big_j(1) * &q) * (I / (c(0.0, 0.5) - lambda)));
        assert!((&f[0] - &want).max_abs() < 1e-15);
        assert!(matches!(
            factorize_transfer(&spec, c(0.0, 0.5)),
            Err(Error::PoleAtLambda(_))
        ));
    }

    #[test]
    fn non_hermitian_s0_rejected() {
        let s0 = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            ToeplitzSpec::new(2, vec![s0], CMatrix::zeros(2, 2)),
            Err(Error::Linalg(LinalgError::NotHermitian { .. }))
        ));
    }

    #[test]
    fn failing_order_reported() {
        let spec = scalar_spec(&[c(1.0, 0.0), c(2.0, 0.0)], 0.0);
        assert!(matches!(
            toeplitz_chain(&spec),
            Err(Error::NotPositiveDefiniteAt { order: 2 })
        ));
    }

    #[test]
    fn halmos_by_hand() {
        assert!(
            (&halmos(&CMatrix::zeros(2, 2)).unwrap() - &CMatrix::identity(4)).max_abs() < 1e-15
        );
        let h = halmos(&CMatrix::scalar(c(0.5, 0.0))).unwrap();
        let k = 2.0 / 3f64.sqrt();
        let want = CMatrix::from_real_rows(&[&[k, 0.5 * k], &[0.5 * k, k]]);
        assert!((&h - &want).max_abs() < 1e-14);
        assert!(matches!(
            halmos(&CMatrix::scalar(c(1.0, 0.0))),
            Err(Error::NotContractive { .. })
        ));
    }

    #[test]
    fn fundamental_solution_basics() {
        let chain = DiracChain::from_rhos(1, vec![CMatrix::zeros(1, 1)]).unwrap();
        let z = c(0.3, -0.8);
        assert_eq!(
            dirac_fundamental(&chain, z, 0).unwrap(),
            CMatrix::identity(2)
        );
        let w1 = dirac_fundamental(&chain, z, 1).unwrap();
        let want = &CMatrix::identity(2) + &(small_j(1) * (I * z));
        assert!((&w1 - &want).max_abs() < 1e-15);
        assert!(matches!(
            dirac_fundamental(&chain, z, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!((&frame_toeplitz(&chain, 0, z).unwrap() - &CMatrix::identity(2)).max_abs() < 1e-15);
        assert!(matches!(
            frame_toeplitz(&chain, 1, c(0.0, -2.0)),
            Err(Error::PoleAtZ(_))
        ));
    }

    #[test]
    fn order_one_frame_by_hand() {
        let spec = scalar_spec(&[c(2.0, 0.0)], 0.0);
        let chain = toeplitz_chain(&spec).unwrap();
        let z = c(0.7, 0.4);
        let pre = 1.0 / (1.0 - I * z * 0.5);
        let off = -I * z * 0.5;
        let want =
            CMatrix::from_rows(&[vec![c(1.0, 0.0), off], vec![off, c(1.0, 0.0)]]).unwrap() * pre;
        assert!((&frame_toeplitz(&chain, 1, z).unwrap() - &want).max_abs() < 1e-15);
        assert!((&frame_from_spec(&spec, z).unwrap() - &want).max_abs() < 1e-14);
        let phi = lft_value(&want, &CMatrix::identity(1), &CMatrix::identity(1), z).unwrap();
        assert!((phi[(0, 0)] - I).norm() < 1e-14);
    }

    #[test]
    fn taylor_constant_term_order_one() {
        let spec = scalar_spec(&[c(2.0, 0.0)], 0.0);
        let chain = toeplitz_chain(&spec).unwrap();
        let frame = chain_frame(&chain, 1);
        for pair in [
            ParamPair::identity(1),
            ParamPair::constant(CMatrix::identity(1), CMatrix::scalar(c(3.0, 0.0))).unwrap(),
        ] {
            let phi = |z: C64| crate::snode::lft(&frame, &pair, z);
            let coef = taylor_recover(&phi, 3, 0.5, 256).unwrap();
            assert!((coef[0][(0, 0)] - 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn free_chain_khrushchev() {
        let rhos = vec![CMatrix::zeros(1, 1); 5];
        let grid: Vec<C64> = (0..10)
            .map(|k| c(-2.0 + 0.4 * k as f64, 0.3 + 0.2 * k as f64))
            .collect();
        for split in 0..=5 {
            let r = khrushchev_check(&rhos, split, &ParamPair::identity(1), &grid).unwrap();
            assert!(r <= 1e-10, "split {split}: {r}");
        }
    }
}
