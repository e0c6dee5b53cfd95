//! `snode-lab`: runs the verification suites and asymptotic experiments of
//! `snode-core` and writes JSON reports and trajectory CSV.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad
//! input. `SNODELAB_TOL` multiplies every tolerance (default 1).

mod pipelines;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use snode_core::io;
use snode_core::random;

use pipelines::{Ctx, NodeInput};
use report::Report;

#[derive(Parser)]
#[command(
    name = "snode-lab",
    version,
    about = "Structured S-node verification and asymptotics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Toeplitz identity, factorization, coefficients and frame composition.
    VerifyToeplitz,
    /// Hankel identity, factorization, omega algebra and moment recovery.
    VerifyHankel,
    /// Weyl-function composition at every split of a coefficient chain.
    Khrushchev,
    /// Matrix ball at z = i and membership of random parameter values.
    Ball,
    /// Entropy inequality and its equality case at lambda = i.
    Entropy,
    /// Nested-node trajectory of rho_k(lambda, lambda-bar)^-1.
    Asymptotics,
    /// Determinant lemmas and the limit-inequality demonstration.
    #[command(name = "demo-appendixB")]
    DemoAppendixB,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::VerifyToeplitz => "verify-toeplitz",
            Command::VerifyHankel => "verify-hankel",
            Command::Khrushchev => "khrushchev",
            Command::Ball => "ball",
            Command::Entropy => "entropy",
            Command::Asymptotics => "asymptotics",
            Command::DemoAppendixB => "demo-appendixB",
        }
    }
}

#[derive(Args)]
struct Opts {
    /// Spec or node JSON. Without it a random input is drawn from the seed.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Scenario JSON (asymptotics).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for `<command>.json` (and `trajectory.csv`); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the ChaCha8 generator behind every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Random sample points per check.
    #[arg(long, global = true, default_value_t = 20,
          value_parser = clap::value_parser!(u64).range(1..=1000))]
    grid: u64,
    /// Gauss-Legendre nodes per panel for moment quadrature.
    #[arg(long, global = true, default_value_t = 2048,
          value_parser = clap::value_parser!(u64).range(16..=65536))]
    quad: u64,
    /// Write the JSON report (default).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Write the trajectory CSV (asymptotics only).
    #[arg(long, global = true)]
    csv: bool,
}

/// Failure that maps to exit code 2.
struct BadInput(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for BadInput {
    fn from(e: E) -> Self {
        BadInput(e.into())
    }
}

fn tolerance_scale() -> anyhow::Result<f64> {
    match std::env::var("SNODELAB_TOL") {
        Err(_) => Ok(1.0),
        Ok(v) => {
            let x: f64 = v
                .trim()
                .parse()
                .with_context(|| format!("SNODELAB_TOL={v:?} is not a number"))?;
            if !(x.is_finite() && x > 0.0) {
                bail!("SNODELAB_TOL must be positive and finite, got {x}");
            }
            Ok(x)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the trajectory CSV; byte-identical for identical rows.
fn export_csv(
    p: usize,
    rows: &[snode_core::asymptotics::ConvergenceRow],
    path: &Path,
) -> anyhow::Result<()> {
    fs::write(path, io::trajectory_csv(p, rows))
        .with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: &Cli) -> Result<bool, BadInput> {
    let opts = &cli.opts;
    let scale = tolerance_scale()?;
    if opts.csv && cli.command != Command::Asymptotics {
        return Err(anyhow::anyhow!("--csv is only available for asymptotics").into());
    }
    let mut ctx = Ctx::new(opts.seed, scale, opts.grid as usize, opts.quad as usize);
    let spec_text = opts.spec.as_deref().map(read).transpose()?;
    let described = |path: &Option<PathBuf>| {
        path.as_ref().map_or_else(
            || format!("random (seed {})", opts.seed),
            |p| p.display().to_string(),
        )
    };
    ctx.input = described(&opts.spec);
    let mut trajectory = None;
    let data = match cli.command {
        Command::VerifyToeplitz => {
            let spec = match &spec_text {
                Some(t) => io::parse_toeplitz_spec(t)?,
                None => random::toeplitz_spec(&mut ctx.rng, 2, 4),
            };
            pipelines::verify_toeplitz(&mut ctx, &spec)?
        }
        Command::VerifyHankel => {
            let spec = match &spec_text {
                Some(t) => io::parse_hankel_spec(t)?,
                None => random::hankel_spec(&mut ctx.rng, 1, 3),
            };
            pipelines::verify_hankel(&mut ctx, &spec)?
        }
        Command::Khrushchev => {
            let spec = spec_text
                .as_deref()
                .map(io::parse_toeplitz_spec)
                .transpose()?;
            pipelines::khrushchev(&mut ctx, spec.as_ref())?
        }
        Command::Ball | Command::Entropy => {
            let input = match &spec_text {
                Some(t) => NodeInput::parse(t)?,
                None => NodeInput::Hankel(random::hankel_spec(&mut ctx.rng, 1, 2)),
            };
            let node = input.node()?;
            if cli.command == Command::Ball {
                pipelines::ball(&mut ctx, &node)?
            } else {
                pipelines::entropy(&mut ctx, &node)?
            }
        }
        Command::Asymptotics => {
            let path = opts
                .scenario
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("asymptotics needs --scenario"))?;
            ctx.input = described(&opts.scenario);
            let scenario = io::parse_scenario(&read(path)?)?;
            let (rep, data) = pipelines::asymptotics(&mut ctx, &scenario)?;
            let p = rep.rows.first().map_or(1, |r| r.rho_inv.rows());
            trajectory = Some((p, rep.rows));
            data
        }
        Command::DemoAppendixB => pipelines::demo_appendix_b(&mut ctx)?,
    };
    let checks = ctx.checks.into_vec();
    let pass = checks.iter().all(|c| c.pass);
    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed {}", c.describe());
    }
    let report = Report {
        command: cli.command.name(),
        seed: opts.seed,
        tolerance_scale: scale,
        input: ctx.input,
        grid: ctx.grid,
        quad: ctx.quad,
        checks,
        pass,
        data,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match (&opts.out, opts.csv) {
        (Some(dir), _) => {
            write(dir, &format!("{}.json", report.command), &json)?;
            if let (true, Some((p, rows))) = (opts.csv, &trajectory) {
                export_csv(*p, rows, &dir.join("trajectory.csv"))?;
            }
        }
        (None, true) => {
            if let Some((p, rows)) = &trajectory {
                print!("{}", io::trajectory_csv(*p, rows));
            }
        }
        (None, false) => print!("{json}"),
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(BadInput(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
