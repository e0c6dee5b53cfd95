use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snode_core::asymptotics::*;
use snode_core::density::{Density, DensitySpec};
use snode_core::hankel::{build_hankel_node, moments_from_density, HankelSpec};
use snode_core::matcore::{c, CMatrix, C64, I};
use snode_core::quad::Rule;
use snode_core::random;
use snode_core::snode::{lft, matrix_ball, Frame, ParamPair, SNode};
use snode_core::toeplitz::ToeplitzSpec;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scalar_hankel(h: &[f64]) -> HankelSpec {
    HankelSpec::new(1, h.iter().map(|&x| CMatrix::scalar(c(x, 0.0))).collect()).unwrap()
}

fn uniform_family(n: usize) -> NodeSequence {
    let d = Density::uniform(-1.0, 1.0).unwrap();
    let h: Vec<CMatrix> = (0..2 * n - 1)
        .map(|k| moments_from_density(&d, k, Rule::default()).unwrap())
        .collect();
    NodeSequence::hankel(&HankelSpec::new(1, h).unwrap()).unwrap()
}

fn exp_sqrt_family(n: usize) -> NodeSequence {
    let h: Vec<f64> = (0..2 * n - 1)
        .map(|k| DensitySpec::ExpSqrt.closed_form_moment(k).unwrap())
        .collect();
    NodeSequence::hankel(&scalar_hankel(&h)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rho_is_monotone_along_random_families(seed in any::<u64>(), p in 1usize..=2, toe in any::<bool>()) {
        let mut r = rng(seed);
        let seq = if toe {
            NodeSequence::toeplitz(&random::toeplitz_spec(&mut r, p, 6)).unwrap()
        } else {
            NodeSequence::hankel(&random::hankel_spec(&mut r, p, 5)).unwrap()
        };
        prop_assert!(nested_embed_check(&seq) <= 1e-14);
        for z in random::upper_points(&mut r, 10) {
            // The generic Toeplitz frame has a pole at 2i.
            if toe && (z - c(0.0, 2.0)).norm() < 0.05 {
                continue;
            }
            let traj = rho_trajectory(&seq, z).unwrap();
            prop_assert!(traj.is_monotone(1e-9));
            for k in 0..seq.len() {
                for rr in k..seq.len() {
                    let q = frame_quotient(&seq, k, rr, z).unwrap();
                    let scale = seq.nodes()[rr].frame(z).unwrap().max_abs().max(1.0);
                    prop_assert!(q.product_residual <= 1e-9 * scale);
                    prop_assert!(q.j_expansion >= -1e-9 * scale * scale);
                }
            }
        }
    }

    #[test]
    fn later_weyl_values_lie_in_earlier_balls(seed in any::<u64>(), p in 1usize..=2) {
        let mut r = rng(seed);
        let seq = NodeSequence::hankel(&random::hankel_spec(&mut r, p, 4)).unwrap();
        let pair = random::strict_constant_pair(&mut r, p);
        for z in random::upper_points(&mut r, 5) {
            let phi = lft(&Frame::of_node(&seq.nodes()[3]), &pair, z).unwrap();
            for k in 0..3 {
                let ball = matrix_ball(&seq.nodes()[k], z).unwrap();
                prop_assert!(ball.membership(&phi).unwrap().norm2() <= 1.0 + 1e-8);
            }
        }
    }

    #[test]
    fn poisson_kernel_has_mass_pi(re in -5.0f64..5.0, im in 0.05f64..5.0) {
        prop_assert!((poisson_mass(C64::new(re, im)).unwrap() - PI).abs() <= 1e-9);
    }
}

#[test]
fn embedding_negative_control() {
    let spec = scalar_hankel(&[1.0, 0.3, 2.0, 0.1, 5.0]);
    let good = NodeSequence::hankel(&spec).unwrap();
    let big = &good.nodes()[2];
    let perm = |m: &CMatrix| {
        let mut out = m.clone();
        for col in 0..m.cols() {
            out[(0, col)] = m[(2, col)];
            out[(2, col)] = m[(0, col)];
        }
        out
    };
    let permute_both = |m: &CMatrix| perm(&perm(m).transpose()).transpose();
    let shuffled = SNode::new(
        1,
        permute_both(big.a()),
        permute_both(big.s()),
        perm(big.phi1()),
        perm(big.phi2()),
    )
    .unwrap();
    let seq = NodeSequence::new(vec![good.nodes()[0].clone(), shuffled]).unwrap();
    assert!(nested_embed_check(&seq) > 0.1);
}

#[test]
fn quotient_of_equal_orders_is_identity() {
    let seq = uniform_family(3);
    let q = frame_quotient(&seq, 1, 1, c(0.0, 2.0)).unwrap();
    assert_eq!(q.value, CMatrix::identity(2));
    let q = frame_quotient(&seq, 1, 2, c(0.0, 2.0)).unwrap();
    assert!(q.product_residual <= 1e-9);
}

#[test]
fn identity_toeplitz_family_is_monotone() {
    let s: Vec<CMatrix> = (0..5)
        .map(|k| CMatrix::scalar(c(if k == 0 { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    let seq =
        NodeSequence::toeplitz(&ToeplitzSpec::new(1, s, CMatrix::zeros(1, 1)).unwrap()).unwrap();
    let traj = rho_trajectory(&seq, I).unwrap();
    assert!(traj.is_monotone(1e-9));
    assert!(traj.upper.iter().all(|r| r[(0, 0)].re > 0.0));
}

#[test]
fn uniform_family_is_monotone_and_flagged() {
    let seq = uniform_family(6);
    assert!(rho_trajectory(&seq, I).unwrap().is_monotone(1e-9));
    let rep = convergence_run(&seq, I, Some(&Density::uniform(-1.0, 1.0).unwrap())).unwrap();
    assert_eq!(rep.szego, Some(Entropy::NegInfinity));
    assert!(rep.rows.iter().all(|r| r.target.is_none()));
    assert!(rep.monotone);
}

#[test]
fn exp_sqrt_trajectory_reference_values() {
    let rep = convergence_run(&exp_sqrt_family(4), I, Some(&Density::exp_sqrt())).unwrap();
    let frozen = [0.5, 0.495868, 0.476033, 0.475226];
    for (row, want) in rep.rows.iter().zip(frozen) {
        assert!((row.det_rho_inv - want).abs() < 1e-6, "k = {}", row.k);
    }
    let target = rep.rows[0].target.unwrap();
    assert!(
        (target - PI / 2.0 * (-(2f64.sqrt())).exp()).abs() < 1e-6,
        "{target}"
    );
    assert_eq!(rep.gaps_shrinking, Some(true));
    assert!(rep.strictly_decreasing && rep.monotone);
}

#[test]
fn trivial_sequence_has_constant_trajectory() {
    let node = build_hankel_node(&scalar_hankel(&[1.0, 0.0, 2.0])).unwrap();
    let seq = NodeSequence::new(vec![node.clone(), node.clone(), node]).unwrap();
    let rep = convergence_run(&seq, I, Some(&Density::cauchy(1.0).unwrap())).unwrap();
    let gaps: Vec<f64> = rep.rows.iter().map(|r| r.gap.unwrap()).collect();
    assert!(gaps.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15));
    assert_eq!(rep.gaps_shrinking, Some(false));
}

#[test]
fn order_one_outer_factor() {
    let node = build_hankel_node(&scalar_hankel(&[1.0])).unwrap();
    for t in [-4.0, -1.0, 0.0, 0.5, 3.0] {
        let z = C64::new(t, 0.0);
        let g = gmu_extremal(&node, I, z).unwrap()[(0, 0)];
        assert!((g - 1.0 / (PI.sqrt() * (1.0 - I * z))).norm() < 1e-14);
        assert!((g.norm_sqr() - 1.0 / (PI * (1.0 + t * t))).abs() < 1e-14);
    }
    let eq = entropy_bound_extremal(&node, I).unwrap();
    assert!((eq.lhs[(0, 0)].re - 0.5).abs() < 1e-12 && eq.slack.abs() < 1e-12);
    let quad = entropy_bound_check(&node, &ParamPair::identity(1), I).unwrap();
    assert!((quad.lhs[(0, 0)].re - 0.5).abs() < 1e-6);
    let g = outer_modulus(&Density::cauchy(1.0).unwrap(), I).unwrap();
    let closed = gmu_extremal(&node, I, I).unwrap()[(0, 0)].norm();
    assert!((g - closed).abs() < 1e-6);
}

#[test]
fn non_extremal_witness_has_strict_slack() {
    let node = build_hankel_node(&scalar_hankel(&[1.0])).unwrap();
    let pair = ParamPair::constant(CMatrix::identity(1), CMatrix::identity(1) * 4.0).unwrap();
    let b = entropy_bound_check(&node, &pair, I).unwrap();
    assert!(
        (b.lhs[(0, 0)].re - 0.32).abs() < 1e-6,
        "{}",
        b.lhs[(0, 0)].re
    );
    assert!(b.slack > 1e-3);
}

#[test]
fn random_scalar_pairs_obey_the_bound() {
    let mut r = rng(3);
    let lambda = c(0.4, 1.0);
    for n in 1..=3 {
        let node = build_hankel_node(&random::hankel_spec(&mut r, 1, n)).unwrap();
        for _ in 0..10 {
            let pair = random::strict_constant_pair(&mut r, 1);
            let b = entropy_bound_check(&node, &pair, lambda).unwrap();
            assert!(b.slack >= -1e-6, "n = {n}: {}", b.slack);
        }
    }
}

#[test]
fn toeplitz_nodes_fail_the_resolvent_hypothesis() {
    // A has eigenvalue i/2, so I - zA is singular at -2i.
    let spec = random::toeplitz_spec(&mut rng(3), 1, 2);
    let node = snode_core::toeplitz::build_toeplitz_node(&spec).unwrap();
    assert!(matches!(
        entropy_bound_check(&node, &ParamPair::identity(1), c(0.4, 1.0)),
        Err(snode_core::Error::Unsupported(_))
    ));
}

#[test]
fn matrix_extremal_equality() {
    let mut r = rng(9);
    let node = build_hankel_node(&random::hankel_spec(&mut r, 2, 3)).unwrap();
    let lambda = c(-0.3, 0.8);
    let b = entropy_bound_extremal(&node, lambda).unwrap();
    assert!(b.slack.abs() <= 1e-6 && (&b.lhs - &b.rhs).max_abs() <= 1e-6);
    let pair = random::strict_constant_pair(&mut r, 2);
    assert!(matches!(
        entropy_bound_check(&node, &pair, lambda),
        Err(snode_core::Error::Unsupported(_))
    ));
}

#[test]
fn determinant_lemmas_on_random_instances() {
    let mut r = rng(17);
    for _ in 0..1000 {
        let p = 1 + (random::complex_gaussian(&mut r, 1, 1)[(0, 0)].re.abs() * 2.0) as usize % 3;
        let a = random::hpd(&mut r, p, 0.05);
        let b = random::psd(&mut r, p, 1 + p / 2);
        assert_eq!(det_strict_lemma(&a, &b).unwrap(), DetComparison::Strict);
        let b1 = random::psd(&mut r, p, p);
        let b2 = random::psd(&mut r, p, p);
        let scale = 1.0 + b1.max_abs() + b2.max_abs();
        assert!(minkowski_slack(&b1, &b2).unwrap() >= -1e-12 * scale);
    }
}

#[test]
fn resolvent_growth_diagnostics() {
    let radii: Vec<f64> = (1..=12).map(|k| k as f64 * 2.5).collect();
    let shift = build_hankel_node(&scalar_hankel(&[1.0, 0.0, 1.0, 0.0, 3.0])).unwrap();
    let rep = resolvent_growth(shift.a(), &radii).unwrap();
    assert!(rep.bounded_on_grid);
    let toe = snode_core::toeplitz::build_toeplitz_node(
        &ToeplitzSpec::new(
            1,
            vec![CMatrix::identity(1) * 2.0, CMatrix::identity(1)],
            CMatrix::zeros(1, 1),
        )
        .unwrap(),
    )
    .unwrap();
    assert!(resolvent_growth(toe.a(), &[1.0, 3.0, 5.0]).is_ok());
    match resolvent_growth(toe.a(), &[1.0, 2.0]) {
        Err(snode_core::Error::SingularOnGrid(z)) => assert!((z - c(0.0, -2.0)).norm() < 1e-12),
        other => panic!("expected a grid singularity, got {other:?}"),
    }
}

#[test]
fn limit_demo_matches_period_average() {
    let fam = |k: usize, t: f64| CMatrix::scalar(c(1.0 + (k as f64 * t).sin() / 2.0, 0.0));
    let demo =
        limit_inequality_demo(&fam, &[250, 500, 1000, 2000, 4000], &|_| 1.0, -5.0, 5.0).unwrap();
    let mean = ((1.0 + 0.75f64.sqrt()) / 2.0).ln();
    let oracle = -mean * 2.0 * 5f64.atan();
    assert!(demo.holds && (demo.gap - oracle).abs() < 1e-3, "{demo:?}");
    let constant = |_k: usize, t: f64| CMatrix::scalar(c(1.0 / (1.0 + t * t), 0.0));
    let eq = limit_inequality_demo(&constant, &[10, 20], &|_| 1.0, -5.0, 5.0).unwrap();
    assert!(eq.holds && eq.gap.abs() < 1e-3);
    let dying = |k: usize, t: f64| {
        CMatrix::scalar(c(
            if (0.0..1.0).contains(&t) { 0.0 } else { 1.0 } + 1.0 / k as f64 * 0.0,
            0.0,
        ))
    };
    let d = limit_inequality_demo(&dying, &[10, 20], &|_| 1.0, -5.0, 5.0).unwrap();
    assert!(d.holds && d.limsup == f64::NEG_INFINITY);
}
