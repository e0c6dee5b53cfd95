use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snode_core::matcore::{big_j, c, k_matrix, min_eigenvalue, small_j, CMatrix, C64, I};
use snode_core::random;
use snode_core::snode::{lft, verify_identity, Frame, ParamPair, PAIR_TOL};
use snode_core::toeplitz::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn off_pole(rng: &mut ChaCha8Rng) -> C64 {
    loop {
        let z = random::complex_gaussian(rng, 1, 1)[(0, 0)] * 2.0;
        if (z - c(0.0, 0.5)).norm() > 0.2 {
            return z;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn node_identity_holds(seed in any::<u64>(), p in 1usize..=3, n in 1usize..=8) {
        let spec = random::toeplitz_spec(&mut rng(seed), p, n);
        let node = build_toeplitz_node(&spec).unwrap();
        let defect = node.identity_defect().norm2();
        prop_assert!(defect <= 1e-12 * node.s().norm2(), "defect {defect}");
        prop_assert!(verify_identity(&node) <= 1e-12);
    }

    #[test]
    fn factor_product_matches_transfer(seed in any::<u64>(), p in 1usize..=3, n in 1usize..=6) {
        let mut r = rng(seed);
        let spec = random::toeplitz_spec(&mut r, p, n);
        let node = build_toeplitz_node(&spec).unwrap();
        for _ in 0..20 {
            let lambda = off_pole(&mut r);
            let prod = ordered_product(&factorize_transfer(&spec, lambda).unwrap());
            let direct = node.transfer(lambda).unwrap();
            let rel = (&prod - &direct).max_abs() / direct.max_abs().max(1.0);
            prop_assert!(rel <= 1e-9, "lambda {lambda}: {rel}");
        }
    }

    #[test]
    fn chain_invariants_and_halmos_round_trip(seed in any::<u64>(), p in 1usize..=3, n in 1usize..=8) {
        let spec = random::toeplitz_spec(&mut rng(seed), p, n);
        let chain = toeplitz_chain(&spec).unwrap();
        let (cjc, min_eig, max_rho) = chain.invariant_report().unwrap();
        prop_assert!(cjc <= 1e-9 && min_eig > 0.0 && max_rho < 1.0);
        for (ck, rho) in chain.c.iter().zip(&chain.rho) {
            let h = halmos(rho).unwrap();
            prop_assert!((&h - ck).max_abs() <= 1e-10 * (1.0 + ck.max_abs()));
            prop_assert!((&rho_from_c(&h, p).unwrap() - rho).max_abs() <= 1e-12 * (1.0 + h.max_abs()));
        }
    }

    #[test]
    fn fundamental_solution_matches_transfer(seed in any::<u64>(), p in 1usize..=2, n in 1usize..=6) {
        let mut r = rng(seed);
        let spec = random::toeplitz_spec(&mut r, p, n);
        let chain = toeplitz_chain(&spec).unwrap();
        let k = k_matrix(p);
        for _ in 0..5 {
            let z = random::complex_gaussian(&mut r, 1, 1)[(0, 0)];
            if z.norm() < 1e-3 || (1.0 / (2.0 * z) - c(0.0, 0.5)).norm() < 1e-3 {
                continue;
            }
            for order in 1..=n {
                let node = build_toeplitz_node(&spec.truncated(order).unwrap()).unwrap();
                let w = node.transfer(1.0 / (2.0 * z)).unwrap();
                let want = (&(&k.adjoint() * &w) * &k) * (1.0 - I * z).powi(order as i32);
                let got = dirac_fundamental(&chain, z, order).unwrap();
                prop_assert!((&got - &want).max_abs() <= 1e-9 * want.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn frame_routes_agree_and_compose(seed in any::<u64>(), p in 1usize..=2, n in 2usize..=6) {
        let mut r = rng(seed);
        let spec = random::toeplitz_spec(&mut r, p, n);
        let chain = toeplitz_chain(&spec).unwrap();
        let split = 1 + (seed as usize % (n - 1));
        let tail = chain.tail(split);
        for z in random::upper_points(&mut r, 20) {
            let full = frame_toeplitz(&chain, n, z).unwrap();
            let from_spec = frame_from_spec(&spec, z).unwrap();
            prop_assert!((&full - &from_spec).max_abs() <= 1e-9 * full.max_abs().max(1.0));
            let composed = &frame_toeplitz(&chain, split, z).unwrap() * &frame_toeplitz(&tail, n - split, z).unwrap();
            prop_assert!((&composed - &full).max_abs() <= 1e-10 * full.max_abs().max(1.0));
        }
    }

    #[test]
    fn khrushchev_identity_every_split(seed in any::<u64>(), p in 1usize..=2, len in 1usize..=8) {
        let mut r = rng(seed);
        let rhos: Vec<CMatrix> = (0..len).map(|_| random::contraction(&mut r, p, 0.9)).collect();
        let grid = random::upper_points(&mut r, 30);
        let pair = ParamPair::identity(p);
        for split in 0..=len {
            let res = khrushchev_check(&rhos, split, &pair, &grid).unwrap();
            prop_assert!(res <= 1e-8, "split {split}: {res}");
        }
    }

    #[test]
    fn weyl_functions_are_herglotz(seed in any::<u64>(), p in 1usize..=2, n in 1usize..=5) {
        let mut r = rng(seed);
        let spec = random::toeplitz_spec(&mut r, p, n);
        let frame = chain_frame(&toeplitz_chain(&spec).unwrap(), n);
        let pairs = [ParamPair::identity(p), random::strict_constant_pair(&mut r, p)];
        for pair in &pairs {
            for z in random::upper_points(&mut r, 25) {
                let phi = lft(&frame, pair, z).unwrap();
                prop_assert!(min_eigenvalue(&phi.imaginary_part()).unwrap() >= -1e-9);
            }
        }
    }

    #[test]
    fn nested_frames_pull_back_to_valid_pairs(seed in any::<u64>(), p in 1usize..=2, n in 2usize..=5) {
        let mut r = rng(seed);
        let spec = random::toeplitz_spec(&mut r, p, n);
        let chain = toeplitz_chain(&spec).unwrap();
        let pair = random::strict_constant_pair(&mut r, p);
        for z in random::upper_points(&mut r, 10) {
            let phi = lft(&chain_frame(&chain, n), &pair, z).unwrap();
            for k in 1..n {
                let (rr, qq) = pullback_pair(&frame_toeplitz(&chain, k, z).unwrap(), &phi).unwrap();
                let jform = (&(&rr.adjoint() * &qq) + &(&qq.adjoint() * &rr)).hermitian_part();
                let scale = 1.0 + (&(&rr.adjoint() * &rr) + &(&qq.adjoint() * &qq)).max_abs();
                prop_assert!(min_eigenvalue(&jform).unwrap() >= -PAIR_TOL * scale);
            }
        }
    }
}

#[test]
fn n_equals_zero_split_is_exact() {
    let mut r = rng(11);
    let rhos: Vec<CMatrix> = (0..5)
        .map(|_| random::contraction(&mut r, 2, 0.8))
        .collect();
    let grid = random::upper_points(&mut r, 30);
    assert!(khrushchev_check(&rhos, 0, &ParamPair::identity(2), &grid).unwrap() <= 1e-12);
}

#[test]
fn frame_of_empty_chain_is_identity() {
    let chain = DiracChain::from_rhos(2, vec![]).unwrap();
    let f = frame_toeplitz(&chain, 0, c(0.2, 0.9)).unwrap();
    assert_eq!(f, CMatrix::identity(4));
    // J j K K* j J = I.
    let jj = &big_j(2) * &small_j(2);
    let k = k_matrix(2);
    let m = &(&(&jj * &k) * &k.adjoint()) * &jj.adjoint();
    assert!((&m - &CMatrix::identity(4)).max_abs() < 1e-15);
}

#[test]
fn taylor_recovers_toeplitz_blocks() {
    let s = vec![
        CMatrix::scalar(c(2.0, 0.0)),
        CMatrix::scalar(c(0.5, 0.3)),
        CMatrix::scalar(c(-0.2, 0.4)),
    ];
    let nu = CMatrix::scalar(c(0.7, 0.0));
    let spec = ToeplitzSpec::new(1, s.clone(), nu.clone()).unwrap();
    let frame = chain_frame(&toeplitz_chain(&spec).unwrap(), 3);
    let pair = ParamPair::identity(1);
    let phi = |z: C64| lft(&frame, &pair, z);
    let coef = taylor_recover(&phi, 6, 0.5, 256).unwrap();
    let c0 = &(&s[0] * 0.5) + &(&nu * I);
    assert!((&coef[0] - &c0).max_abs() < 1e-6);
    assert!((&coef[1] - &s[1]).max_abs() < 1e-6);
    assert!((&coef[2] - &s[2]).max_abs() < 1e-6);
    let extended = ToeplitzSpec::new(
        1,
        coef.iter()
            .take(6)
            .enumerate()
            .map(|(k, b)| if k == 0 { s[0].clone() } else { b.clone() })
            .collect(),
        nu,
    )
    .unwrap();
    assert!(min_eigenvalue(&extended.assemble(6)).unwrap() >= -1e-7);
}

#[test]
fn taylor_reports_poles_on_the_circle() {
    let phi = |z: C64| -> snode_core::Result<CMatrix> {
        if (z - c(0.0, 2.0 / 3.0)).norm() < 0.1 {
            Err(snode_core::Error::SingularDenominator(z))
        } else {
            Ok(CMatrix::identity(1))
        }
    };
    assert!(matches!(
        taylor_recover(&phi, 2, 0.5, 64),
        Err(snode_core::Error::EvaluationFailure(_))
    ));
}

#[test]
fn generic_frame_of_toeplitz_node_has_pole_at_2i() {
    let spec =
        ToeplitzSpec::new(1, vec![CMatrix::scalar(c(2.0, 0.0))], CMatrix::zeros(1, 1)).unwrap();
    let node = build_toeplitz_node(&spec).unwrap();
    assert!(Frame::of_node(&node).eval(c(0.0, 2.0)).is_err());
    assert!(Frame::of_node(&node).eval(c(0.0, 1.0)).is_ok());
}
