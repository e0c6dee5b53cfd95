use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use snode_core::asymptotics::{
    convergence_run, det_strict_lemma, entropy_bound_check, entropy_bound_extremal, frame_quotient,
    limit_inequality_demo, minkowski_slack, resolvent_growth, rho_trajectory, ConvergenceReport,
    DetComparison,
};
use snode_core::hankel::{build_hankel_node, hankel_chain, recover_moments, HankelSpec};
use snode_core::io;
use snode_core::matcore::{c, CMatrix, C64, I};
use snode_core::quad::Rule;
use snode_core::random;
use snode_core::snode::{extremal_pair, lft, matrix_ball, Frame, ParamPair, SNode};
use snode_core::toeplitz::{
    build_toeplitz_node, factorize_transfer, frame_from_spec, frame_toeplitz, khrushchev_check,
    ordered_product, toeplitz_chain, DiracChain, ToeplitzSpec,
};
use snode_core::Error;

use crate::report::{complex, matrices, matrix, Checks};

/// Shared state of one run.
pub struct Ctx {
    pub rng: ChaCha8Rng,
    pub checks: Checks,
    pub grid: usize,
    pub quad: usize,
    /// Description of the input, recorded in the report.
    pub input: String,
}

impl Ctx {
    pub fn new(seed: u64, tol_scale: f64, grid: usize, quad: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            checks: Checks::new(tol_scale),
            grid,
            quad,
            input: String::new(),
        }
    }

    fn rule(&self) -> Rule {
        Rule::GaussLegendre(self.quad)
    }
}

/// Any input a node can be built from.
pub enum NodeInput {
    Toeplitz(ToeplitzSpec),
    Hankel(HankelSpec),
    Node(SNode),
}

impl NodeInput {
    /// Picks the format by its distinguishing key: `A` (node), `H` (Hankel)
    /// or `s` (Toeplitz).
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let value: Value = serde_json::from_str(text).context("input is not JSON")?;
        Ok(if value.get("A").is_some() {
            NodeInput::Node(io::parse_snode(text)?)
        } else if value.get("H").is_some() {
            NodeInput::Hankel(io::parse_hankel_spec(text)?)
        } else if value.get("s").is_some() {
            NodeInput::Toeplitz(io::parse_toeplitz_spec(text)?)
        } else {
            bail!("input has none of the keys A, H or s");
        })
    }

    pub fn node(&self) -> anyhow::Result<SNode> {
        Ok(match self {
            NodeInput::Toeplitz(s) => build_toeplitz_node(s)?,
            NodeInput::Hankel(s) => build_hankel_node(s)?,
            NodeInput::Node(n) => n.clone(),
        })
    }
}

fn off_axis(rng: &mut ChaCha8Rng) -> C64 {
    loop {
        let z = random::complex_gaussian(rng, 1, 1)[(0, 0)] * 2.0;
        if z.im.abs() > 0.05 && (z - c(0.0, 0.5)).norm() > 0.1 {
            return z;
        }
    }
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).max_abs() / b.max_abs().max(1.0)
}

pub fn verify_toeplitz(ctx: &mut Ctx, spec: &ToeplitzSpec) -> anyhow::Result<Value> {
    let (p, n) = (spec.p(), spec.n());
    let node = build_toeplitz_node(spec)?;
    let chain = toeplitz_chain(spec)?;
    let defect = node.identity_defect().norm2() / node.s().norm2();
    ctx.checks
        .at_most("c1", "operator identity residual / |S|", defect, 1e-12);

    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..ctx.grid {
        let lambda = off_axis(&mut ctx.rng);
        match factorize_transfer(spec, lambda).and_then(|f| Ok((f, node.transfer(lambda)?))) {
            Ok((factors, direct)) => worst = worst.max(rel(&ordered_product(&factors), &direct)),
            Err(e) => failure = Some(e),
        }
    }
    match failure {
        Some(e) => ctx.checks.failed("c5", "factor product vs transfer", e),
        None => ctx
            .checks
            .at_most("c5", "relative |prod w_k - w_A|", worst, 1e-9),
    }

    let (cjc, min_eig, max_rho) = chain.invariant_report()?;
    ctx.checks.at_most("c11", "|C_k j C_k - j|", cjc, 1e-9);
    ctx.checks.above("c11", "min eig C_k", min_eig, 0.0);
    ctx.checks.below("c20", "max |rho_k|", max_rho, 1.0);

    let rebuilt = DiracChain::from_rhos(p, chain.rho.clone())?;
    let mut worst = 0.0f64;
    for z in random::upper_points(&mut ctx.rng, ctx.grid) {
        worst = worst.max(rel(
            &frame_toeplitz(&rebuilt, n, z)?,
            &frame_from_spec(spec, z)?,
        ));
    }
    ctx.checks
        .at_most("c23", "frame from {rho_k} vs spec frame", worst, 1e-9);

    let mut worst = 0.0f64;
    for split in 1..n {
        let tail = chain.tail(split);
        for z in random::upper_points(&mut ctx.rng, ctx.grid) {
            let full = frame_toeplitz(&chain, n, z)?;
            let composed =
                &frame_toeplitz(&chain, split, z)? * &frame_toeplitz(&tail, n - split, z)?;
            worst = worst.max(rel(&composed, &full));
        }
    }
    if n > 1 {
        ctx.checks
            .at_most("c30", "frame composition residual", worst, 1e-10);
    }
    Ok(json!({ "p": p, "n": n, "rho": matrices(&chain.rho) }))
}

pub fn verify_hankel(ctx: &mut Ctx, spec: &HankelSpec) -> anyhow::Result<Value> {
    let (p, n) = (spec.p(), spec.n());
    let node = build_hankel_node(spec)?;
    let defect = node.identity_defect().norm2() / node.s().norm2();
    ctx.checks
        .at_most("H2", "operator identity residual / |S|", defect, 1e-12);

    let chain = hankel_chain(spec)?;
    let mut worst = 0.0f64;
    for _ in 0..ctx.grid {
        let lambda = off_axis(&mut ctx.rng);
        let direct = node.transfer(lambda)?;
        worst = worst.max(rel(&ordered_product(&chain.factors(lambda)?), &direct));
    }
    ctx.checks
        .at_most("H13-", "relative |prod w_k - w_A|", worst, 1e-9);

    let rep = chain.report()?;
    ctx.checks
        .at_most("H17", "max |omega_k J omega_k*|", rep.isotropy, 1e-9);
    ctx.checks.at_most(
        "H17",
        "max |i omega_k J omega_(k-1)* - t_(k+1)|",
        rep.coupling,
        1e-9,
    );
    ctx.checks
        .at_most("H17", "|omega_0 - [0 t_1]|", rep.initial, 1e-9);
    ctx.checks
        .above("H17", "min eig t_k", rep.min_t_eigenvalue, 0.0);

    let pair = ParamPair::identity(p);
    let mut recovered = Value::Null;
    match recover_moments(&node, &pair, ctx.rule()) {
        Ok(rec) => {
            let h = spec.moments();
            let scale = h[0].max_abs();
            let err = |ms: &[CMatrix]| {
                ms.iter()
                    .zip(h)
                    .map(|(m, want)| (m - want).max_abs() / scale)
                    .fold(0.0, f64::max)
            };
            if !rec.laurent.is_empty() {
                ctx.checks.at_most(
                    "H11",
                    "Laurent moments vs H_k (relative)",
                    err(&rec.laurent),
                    1e-5,
                );
                ctx.checks.at_most(
                    "H11",
                    "quadrature moments vs H_k (relative)",
                    err(&rec.quadrature),
                    1e-5,
                );
            }
            ctx.checks.at_most(
                "H12",
                "max eig(int t^(2n-2) dmu - H_(2n-2))",
                rec.excess,
                1e-6,
            );
            recovered = json!({
                "laurent": matrices(&rec.laurent),
                "quadrature": matrices(&rec.quadrature),
                "top_moment": matrix(&rec.top_moment),
                "laurent_drift": rec.laurent_drift,
                "radius": rec.radius,
            });
        }
        Err(e) => ctx.checks.failed("H11", "moment recovery", e),
    }
    Ok(json!({
        "p": p,
        "n": n,
        "omega": matrices(&chain.omega),
        "t": matrices(&chain.t),
        "recovered": recovered,
    }))
}

/// Composition residual for every split of the given chains.
pub fn khrushchev(ctx: &mut Ctx, spec: Option<&ToeplitzSpec>) -> anyhow::Result<Value> {
    let chains: Vec<(usize, Vec<CMatrix>)> = match spec {
        Some(s) => vec![(s.p(), toeplitz_chain(s)?.rho)],
        None => (0..8)
            .map(|i| {
                let p = 1 + i % 2;
                let len = 1 + i;
                (
                    p,
                    (0..len)
                        .map(|_| random::contraction(&mut ctx.rng, p, 0.9))
                        .collect(),
                )
            })
            .collect(),
    };
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (p, rhos) in &chains {
        let grid = random::upper_points(&mut ctx.rng, ctx.grid);
        let pair = random::strict_constant_pair(&mut ctx.rng, *p);
        for split in 0..=rhos.len() {
            let res = khrushchev_check(rhos, split, &pair, &grid)?;
            worst = worst.max(res);
            rows.push(json!({ "p": p, "length": rhos.len(), "split": split, "residual": res }));
        }
    }
    ctx.checks.at_most(
        "c26",
        "max Weyl-function composition residual (with c30)",
        worst,
        1e-8,
    );
    Ok(json!({ "chains": chains.len(), "splits": rows }))
}

pub fn ball(ctx: &mut Ctx, node: &SNode) -> anyhow::Result<Value> {
    let p = node.p();
    let at_i = matrix_ball(node, I)?;
    let frame = Frame::of_node(node);
    let (mut schur, mut max_u, mut round_trip, mut reach) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for z in random::upper_points(&mut ctx.rng, ctx.grid) {
        let b = matrix_ball(node, z)?;
        schur = schur.max(b.schur_residual()? / (1.0 + b.aleph.max_abs()));
        let phi = lft(&frame, &random::strict_constant_pair(&mut ctx.rng, p), z)?;
        let u = b.membership(&phi)?;
        max_u = max_u.max(u.norm2());
        round_trip = round_trip.max(rel(&b.value(&u), &phi));
        let target = b.value(&random::contraction(&mut ctx.rng, p, 1.0));
        let pair = b.pair_for_value(&target)?;
        reach = reach.max(rel(&lft(&frame, &pair, z)?, &target));
    }
    ctx.checks
        .at_most("B7", "Schur complement residual", schur, 1e-9);
    ctx.checks
        .at_most("B0", "max |u| - 1 over random pairs", max_u - 1.0, 1e-8);
    ctx.checks
        .at_most("B0", "value reproduced from u", round_trip, 1e-10);
    ctx.checks
        .at_most("B10", "contraction reached by its pair", reach, 1e-9);
    Ok(json!({
        "z": complex(I),
        "center": matrix(&at_i.center),
        "left_radius": matrix(&at_i.left_radius),
        "right_radius": matrix(&at_i.right_radius),
        "rho": matrix(&at_i.rho),
        "rho_bar": matrix(&at_i.rho_bar),
    }))
}

pub fn entropy(ctx: &mut Ctx, node: &SNode) -> anyhow::Result<Value> {
    let lambda = I;
    let p = node.p();
    let closed = entropy_bound_extremal(node, lambda)?;
    ctx.checks.at_most(
        "B31",
        "extremal pair: |2pi G*G - rho^-1| (closed form)",
        (&closed.lhs - &closed.rhs).max_abs(),
        1e-6,
    );
    let mut pairs = Vec::new();
    if p == 1 {
        let extremal = extremal_pair(node, lambda)?;
        match entropy_bound_check(node, &extremal, lambda) {
            Err(Error::Unsupported(why)) => {
                bail!("node outside the entropy bound's hypotheses: {why}")
            }
            Ok(b) => ctx.checks.at_most(
                "B31",
                "extremal pair: |2pi |G|^2 - rho^-1| (Poisson quadrature)",
                (&b.lhs - &b.rhs).max_abs(),
                1e-6,
            ),
            Err(e) => ctx
                .checks
                .failed("B31", "extremal pair via Poisson quadrature", e),
        }
        let mut min_slack = f64::INFINITY;
        for _ in 0..ctx.grid {
            let pair = random::strict_constant_pair(&mut ctx.rng, 1);
            match entropy_bound_check(node, &pair, lambda) {
                Ok(b) => {
                    min_slack = min_slack.min(b.slack);
                    pairs.push(json!({ "lhs": b.lhs[(0, 0)].re, "rhs": b.rhs[(0, 0)].re, "slack": b.slack }));
                }
                Err(e) => {
                    ctx.checks.failed("B13!", "random pair bound", e);
                    break;
                }
            }
        }
        if !pairs.is_empty() {
            ctx.checks.nonnegative(
                "B13!",
                "min slack rho^-1 - 2pi|G|^2 over random pairs",
                min_slack,
                1e-6,
            );
        }
    }
    let radii: Vec<f64> = (1..=12).map(|k| 2.5 * k as f64).collect();
    let growth = resolvent_growth(node.a(), &radii)
        .map(|g| serde_json::to_value(g).expect("growth report serializes"))
        .unwrap_or_else(|e| json!({ "error": e.to_string() }));
    Ok(json!({
        "lambda": complex(lambda),
        "extremal": { "lhs": matrix(&closed.lhs), "rhs": matrix(&closed.rhs), "slack": closed.slack },
        "random_pairs": pairs,
        "resolvent_growth": growth,
    }))
}

pub fn asymptotics(
    ctx: &mut Ctx,
    scenario: &io::Scenario,
) -> anyhow::Result<(ConvergenceReport, Value)> {
    let seq = scenario.sequence()?;
    let reference = scenario.reference_density()?;
    let lambda = scenario.lambda;
    let rep = convergence_run(&seq, lambda, reference.as_ref())?;

    let traj = rho_trajectory(&seq, lambda)?;
    if seq.len() > 1 {
        ctx.checks.nonnegative(
            "As6",
            "min eig(rho_(k+1) - rho_k)",
            traj.min_upper_increment,
            1e-9,
        );
        let last = seq.len() - 1;
        let scale = seq.nodes()[last].frame(lambda)?.max_abs().max(1.0);
        let mut worst = 0.0f64;
        for k in 0..last {
            worst = worst.max(frame_quotient(&seq, k, last, lambda)?.product_residual / scale);
        }
        ctx.checks
            .at_most("As4", "frame factorization residual", worst, 1e-9);
    }
    let min_det = rep
        .rows
        .iter()
        .map(|r| r.det_rho_inv)
        .fold(f64::INFINITY, f64::min);
    ctx.checks.above("As8+", "min det rho_k^-1", min_det, 0.0);
    let min_gap = rep
        .rows
        .iter()
        .filter_map(|r| r.gap)
        .fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() {
        ctx.checks
            .nonnegative("As8", "min gap rho_k^-1 - 2pi|G|^2", min_gap, 1e-6);
    }
    let rows: Vec<Value> = rep
        .rows
        .iter()
        .map(|r| {
            json!({
                "k": r.k,
                "rho_inv": matrix(&r.rho_inv),
                "det_rho_inv": r.det_rho_inv,
                "target": r.target,
                "gap": r.gap,
                "cond": r.cond,
            })
        })
        .collect();
    let data = json!({
        "lambda": complex(lambda),
        "family": scenario.family,
        "density": scenario.density,
        "rows": rows,
        "szego": rep.szego,
        "monotone": rep.monotone,
        "strictly_decreasing": rep.strictly_decreasing,
        "gaps_shrinking": rep.gaps_shrinking,
    });
    Ok((rep, data))
}

/// Sample sizes of the randomized appendix lemmas.
const LEMMA_INSTANCES: usize = 1000;

pub fn demo_appendix_b(ctx: &mut Ctx) -> anyhow::Result<Value> {
    let (mut strict_fail, mut mink_min) = (0usize, f64::INFINITY);
    for i in 0..LEMMA_INSTANCES {
        let p = 1 + i % 3;
        let a = random::hpd(&mut ctx.rng, p, 0.05);
        let b = random::psd(&mut ctx.rng, p, 1 + i % p);
        if det_strict_lemma(&a, &b)? != DetComparison::Strict {
            strict_fail += 1;
        }
        let b1 = random::psd(&mut ctx.rng, p, p);
        let b2 = random::psd(&mut ctx.rng, p, p);
        let scale = 1.0 + b1.max_abs() + b2.max_abs();
        mink_min = mink_min.min(minkowski_slack(&b1, &b2)? / scale);
    }
    ctx.checks.at_most(
        "Ac1",
        "instances where det(A + B) > det A fails",
        strict_fail as f64,
        0.0,
    );
    ctx.checks
        .nonnegative("Ap17", "min Minkowski slack / scale", mink_min, 1e-12);

    let family = |k: usize, t: f64| CMatrix::scalar(c(1.0 + (k as f64 * t).sin() / 2.0, 0.0));
    let ks = [250, 500, 1000, 2000, 4000];
    let (a, b) = (-5.0, 5.0);
    let demo = limit_inequality_demo(&family, &ks, &|_| 1.0, a, b)?;
    // Period average of ln(1 + sin/2) is ln((1 + sqrt(3)/2) / 2).
    let oracle = -((1.0 + 0.75f64.sqrt()) / 2.0).ln() * 2.0 * b.atan();
    ctx.checks.above("Ap3", "gap rhs - limsup", demo.gap, 0.0);
    ctx.checks.at_most(
        "Ap3",
        "|gap - period-average oracle|",
        (demo.gap - oracle).abs(),
        1e-3,
    );
    Ok(json!({
        "lemma_instances": LEMMA_INSTANCES,
        "det_lemma_failures": strict_fail,
        "minkowski_min_slack": mink_min,
        "demo": {
            "family": "1 + sin(k t) / 2 on [-5, 5]",
            "lhs": demo.lhs,
            "limsup": demo.limsup,
            "rhs": demo.rhs,
            "gap": demo.gap,
            "oracle_gap": oracle,
        },
    }))
}
