//! Command-line front end: certify, solve, compare and sweep.
//!
//! Exit codes: 0 converged (or command succeeded), 1 error, 2 iteration
//! limit reached, 3 inner solver failure, 4 wall-time limit reached.
//! The effective configuration is saved as `config.toml` in the output
//! directory.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use scenario_game::admm::{self, summarize};
use scenario_game::certificates::{certify, sample_scenarios};
use scenario_game::oracle::{extragradient_reference, solve_centralized};
use scenario_game::{AdmmOutcome, AdmmStatus, AdmmSummary, GameSpec, ScenarioSet};

use config::{Problem, RunConfig};

#[derive(Parser)]
#[command(
    name = "scenario-game",
    version,
    about = "Scenario games: certificates and consensus ADMM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the subgame solves (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the sample-complexity certificates.
    Certify,
    /// Run consensus ADMM and write the trace and summary.
    Solve,
    /// Compare ADMM with the centralized reference.
    Compare,
    /// Solve for each sample size in `sweep.sizes`.
    Sweep,
}

fn exit_code(status: &AdmmStatus) -> u8 {
    match status {
        AdmmStatus::Converged => 0,
        AdmmStatus::MaxIter => 2,
        AdmmStatus::InnerFailure { .. } => 3,
        AdmmStatus::WallTimeExceeded => 4,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn write_trace(dir: &Path, cfg: &RunConfig, outcome: &AdmmOutcome) -> Result<()> {
    let path = dir.join("trace.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    outcome
        .trace
        .write_csv(BufWriter::new(file), cfg.admm.record_timing)?;
    Ok(())
}

struct Solved {
    summary: AdmmSummary,
    outcome: AdmmOutcome,
}

fn solve_one(
    cfg: &RunConfig,
    spec: &GameSpec,
    set: &ScenarioSet,
    with_reference: bool,
    dir: &Path,
) -> Result<Solved> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let reference = if with_reference {
        Some(solve_centralized(spec, set, &cfg.admm.inner)?)
    } else {
        None
    };
    let outcome = admm::run(spec, set, &cfg.admm, None, reference.as_ref())?;
    let summary = summarize(spec, set, &cfg.admm, &outcome)?;
    write_trace(dir, cfg, &outcome)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Solved { summary, outcome })
}

fn cmd_certify(cfg: &RunConfig) -> Result<u8> {
    let (spec, _) = cfg.game()?;
    let report = certify(&cfg.certificate_query(&spec, cfg.scenarios as u64))?;
    write_json(&cfg.out.join("certificate.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_solve(cfg: &RunConfig) -> Result<u8> {
    let (spec, sampler) = cfg.game()?;
    let set = sample_scenarios(&sampler, cfg.scenarios, cfg.seed)?;
    let solved = solve_one(cfg, &spec, &set, false, &cfg.out)?;
    println!("{}", serde_json::to_string_pretty(&solved.summary)?);
    Ok(exit_code(&solved.summary.status))
}

#[derive(Serialize)]
struct Comparison {
    num_scenarios: usize,
    status: AdmmStatus,
    iterations: usize,
    deviation_inf: f64,
    admm_wall_ms: f64,
    oracle_wall_ms: f64,
    lyapunov: Option<Vec<f64>>,
    /// Distance to the sample-mean equilibrium (decoupled quadratic only).
    closed_form_deviation_inf: Option<f64>,
    /// Distance between ADMM and projected extragradient (unconstrained games only).
    extragradient_deviation_inf: Option<f64>,
}

fn cmd_compare(cfg: &RunConfig) -> Result<u8> {
    let (spec, sampler) = cfg.game()?;
    let set = sample_scenarios(&sampler, cfg.scenarios, cfg.seed)?;

    let t = Instant::now();
    let reference = solve_centralized(&spec, &set, &cfg.admm.inner)?;
    let oracle_wall_ms = t.elapsed().as_secs_f64() * 1e3;

    let outcome = admm::run(&spec, &set, &cfg.admm, None, Some(&reference))?;
    write_trace(&cfg.out, cfg, &outcome)?;
    let deviation_inf = (outcome.x.as_vector() - reference.x_star.as_vector()).amax();

    let closed_form_deviation_inf = (cfg.problem == Problem::DecoupledQuadratic).then(|| {
        let s = set.len() as f64;
        outcome
            .x
            .as_slice()
            .iter()
            .enumerate()
            .map(|(c, x)| (x - set.iter().map(|th| th[c]).sum::<f64>() / s).abs())
            .fold(0.0, f64::max)
    });
    let extragradient_deviation_inf = if spec.dims().total_constraints() == 0 {
        let eg = extragradient_reference(
            &spec,
            &set,
            cfg.compare.extragradient_step,
            cfg.compare.extragradient_iters,
            None,
        )?;
        Some((outcome.x.as_vector() - eg.as_vector()).amax())
    } else {
        None
    };

    let report = Comparison {
        num_scenarios: set.len(),
        status: outcome.status.clone(),
        iterations: outcome.iterations(),
        deviation_inf,
        admm_wall_ms: outcome.wall_ms,
        oracle_wall_ms,
        lyapunov: outcome.trace.lyapunov_series(),
        closed_form_deviation_inf,
        extragradient_deviation_inf,
    };
    write_json(&cfg.out.join("compare.json"), &report)?;
    println!(
        "S={} deviation {:.3e} admm {:.1} ms oracle {:.1} ms",
        report.num_scenarios, report.deviation_inf, report.admm_wall_ms, report.oracle_wall_ms
    );
    Ok(exit_code(&outcome.status))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<u8> {
    let (spec, sampler) = cfg.game()?;
    let path = cfg.out.join("sweep.csv");
    let mut csv = String::from("S,iterations,wall_ms_sequential,wall_ms_parallel_estimate\n");
    let mut code = 0;
    for &s in &cfg.sweep.sizes {
        let set = sample_scenarios(&sampler, s, cfg.seed)?;
        let dir = cfg.out.join(format!("S{s}"));
        let with_reference = s <= cfg.sweep.reference_max_scenarios;
        let solved = solve_one(cfg, &spec, &set, with_reference, &dir)?;
        let rows = &solved.outcome.trace.rows;
        let inner: f64 = rows.iter().map(|r| r.phase_ms_inner).sum();
        let parallel = inner / s.min(solved.outcome.workers).max(1) as f64;
        csv.push_str(&format!(
            "{s},{},{},{}\n",
            solved.summary.iterations, solved.outcome.wall_ms, parallel
        ));
        println!(
            "S={s} {:?} after {} iterations, {:.1} ms",
            solved.summary.status, solved.summary.iterations, solved.outcome.wall_ms
        );
        code = code.max(exit_code(&solved.summary.status));
    }
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    Ok(code)
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(w) = cli.workers {
        cfg.admm.workers = Some(w);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml()?)?;
    match cli.command {
        Command::Certify => cmd_certify(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Compare => cmd_compare(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
