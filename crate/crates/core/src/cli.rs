//! Command-line entry point: `run` (simulate and emit artifacts), `check`
//! (built-in invariant table), `describe` (checkpoint summary).

use crate::config::{parse_config, Mode, SimConfig};
use crate::diagnostics::{energy_budget, support_bound_check};
use crate::error::{Error, Result};
use crate::output::{
    describe_checkpoint, read_checkpoint, sha256_file, unix_now, write_checkpoint,
    write_manifest, write_timeseries, ArtifactEntry, RunManifest,
};
use crate::picard::{coupled_step, RunResult, Simulation};
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kcs", version, about = "Kinetic alignment model coupled to a viscous fluid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write the time series, final checkpoint, and manifest.
    Run {
        config: PathBuf,
        /// Directory for emitted artifacts.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Run the built-in invariant suite on a config and print a pass/fail table.
    Check { config: PathBuf },
    /// Print a summary of a checkpoint file.
    Describe { checkpoint: PathBuf },
}

/// Parse argv and dispatch; returns the process exit code. 0 success,
/// 1 runtime or check failure, 2 usage.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders its own usage/help text; --help and --version are
            // successes, everything else is a usage error
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run { config, output_dir } => cmd_run(&config, &output_dir),
        Command::Check { config } => cmd_check(&config),
        Command::Describe { checkpoint } => cmd_describe(&checkpoint),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_run(config_path: &PathBuf, output_dir: &PathBuf) -> Result<i32> {
    let config = parse_config(config_path)?;
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let started = unix_now();

    let mut sim = Simulation::new(config.clone())?;
    let result = sim.run_to_end()?;

    let series_path = output_dir.join("series.csv");
    write_timeseries(&result.records, &series_path)?;
    let ckpt_path = output_dir.join("final.ckpt");
    write_checkpoint(
        &ckpt_path,
        &config,
        &sim.state,
        sim.time,
        sim.step_index,
        sim.support_quad,
    )?;

    // manifest last, once every listed artifact exists
    let manifest = RunManifest {
        config: config.echo(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: config.rng_seed,
        started_unix: started,
        finished_unix: unix_now(),
        artifacts: vec![
            ArtifactEntry { name: "series.csv".into(), sha256: sha256_file(&series_path)? },
            ArtifactEntry { name: "final.ckpt".into(), sha256: sha256_file(&ckpt_path)? },
        ],
    };
    write_manifest(&manifest, &output_dir.join("manifest.json"))?;

    let last = result.records.last().expect("at least the initial record");
    println!(
        "done: {} steps to t = {:.6}, E = {:.6e}, wrote {}",
        sim.step_index,
        sim.time,
        last.total_energy(),
        output_dir.display()
    );
    Ok(0)
}

/// Iteration-to-iteration residual ratios for every step, skipping leading
/// ratios and anything at the convergence noise floor.
pub fn contraction_ratios(result: &RunResult) -> Vec<f64> {
    let mut ratios = Vec::new();
    for rep in &result.reports {
        let res = &rep.residuals;
        let floor = res.first().copied().unwrap_or(0.0) * 1e-13;
        for w in res.windows(2) {
            if w[0] > floor && w[0] > 0.0 {
                ratios.push(w[1] / w[0]);
            }
        }
    }
    ratios
}

/// Scan doubled timesteps until the within-step contraction first exceeds
/// 1/2 (or the iteration stops converging); None if it never fails within
/// the scanned range.
pub fn dt_star_scan(config: &SimConfig, max_doublings: u32) -> Result<Option<f64>> {
    if config.mode != Mode::FullCoupling {
        return Ok(None);
    }
    for k in 0..=max_doublings {
        let mut cfg = config.clone();
        cfg.dt = config.dt * f64::powi(2.0, k as i32);
        let sim = Simulation::new(cfg.clone())?;
        let mut state = sim.state;
        let n_probe = 5usize;
        for _ in 0..n_probe {
            match coupled_step(&state, &cfg, cfg.dt, &sim.fft) {
                Ok((next, rep)) => {
                    let floor = rep.residuals.first().copied().unwrap_or(0.0) * 1e-13;
                    for w in rep.residuals.windows(2) {
                        if w[0] > floor && w[0] > 0.0 && w[1] / w[0] > 0.5 {
                            return Ok(Some(cfg.dt));
                        }
                    }
                    state = next;
                }
                Err(Error::PicardDiverged { .. }) => return Ok(Some(cfg.dt)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(None)
}

struct CheckRow {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cmd_check(config_path: &PathBuf) -> Result<i32> {
    let config = parse_config(config_path)?;
    let mut sim = Simulation::new(config.clone())?;
    let result = sim.run_to_end()?;
    let records = &result.records;
    let mut rows = Vec::new();

    // mass: exact equality across records
    let mass0 = records[0].mass;
    let mass_ok = records.iter().all(|r| r.mass == mass0);
    rows.push(CheckRow {
        name: "mass",
        pass: mass_ok,
        detail: format!("constant at {mass0:.16e}"),
    });

    // momentum: relative drift against the initial scale
    let p0 = records[0].momentum;
    let scale = p0.norm().max(records[0].support_radius * mass0).max(1e-300);
    let drift = records
        .iter()
        .map(|r| (r.momentum - p0).norm())
        .fold(0.0f64, f64::max)
        / scale;
    rows.push(CheckRow {
        name: "momentum",
        pass: drift <= 1e-6,
        detail: format!("relative drift {drift:.3e} (limit 1e-6)"),
    });

    // energy budget
    match energy_budget(records) {
        Ok(b) => rows.push(CheckRow {
            name: "energy-budget",
            pass: b.max_normalized <= 5e-3,
            detail: format!("max normalized residual {:.3e} (limit 5e-3)", b.max_normalized),
        }),
        Err(e) => rows.push(CheckRow {
            name: "energy-budget",
            pass: false,
            detail: format!("not computable: {e}"),
        }),
    }

    // monotone energy decay
    let mono = records
        .windows(2)
        .all(|w| w[1].total_energy() <= w[0].total_energy() * (1.0 + 1e-12));
    rows.push(CheckRow {
        name: "energy-monotone",
        pass: mono,
        detail: "E(t) nonincreasing at every output".into(),
    });

    // support bound
    let sb = support_bound_check(records, config.dt);
    let min_margin = sb.margins.iter().copied().fold(f64::INFINITY, f64::min);
    rows.push(CheckRow {
        name: "support-bound",
        pass: sb.pass,
        detail: format!("minimum margin {min_margin:.3e}"),
    });

    // Picard contraction, plus the dt* threshold scan
    let ratios = contraction_ratios(&result);
    let worst = ratios.iter().copied().fold(0.0f64, f64::max);
    let contraction_ok = ratios.iter().all(|&r| r <= 0.5);
    let dt_star = dt_star_scan(&config, 8)?;
    let dt_star_text = match dt_star {
        Some(dt) => format!("contraction first fails at dt* = {dt:.6e}"),
        None => format!(
            "contraction holds up to dt = {:.6e} (scan limit)",
            config.dt * 256.0
        ),
    };
    rows.push(CheckRow {
        name: "picard-contraction",
        pass: contraction_ok,
        detail: format!("worst within-step ratio {worst:.3e} (limit 0.5); {dt_star_text}"),
    });

    let mut all_ok = true;
    println!("{:<20} {:<6} detail", "check", "state");
    for row in &rows {
        all_ok &= row.pass;
        println!(
            "{:<20} {:<6} {}",
            row.name,
            if row.pass { "pass" } else { "FAIL" },
            row.detail
        );
    }
    Ok(if all_ok { 0 } else { 1 })
}

fn cmd_describe(path: &PathBuf) -> Result<i32> {
    let ck = read_checkpoint(path)?;
    print!("{}", describe_checkpoint(&ck));
    Ok(0)
}
