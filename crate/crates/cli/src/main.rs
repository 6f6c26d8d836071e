//! `snls`: run single trajectories, ensembles and blow-up fits from TOML recipes.
//!
//! Exit status: 0 when a run completes (or an ensemble or fit succeeds), 2
//! when a single run ends in blow-up, 1 on any error or aborted run.

mod fit;
mod output;
mod recipe;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use snls::experiments::{
    expected_curves, fit_blowup_rate_remaining, run_ensemble_with, run_trajectory, Outcome,
    TrajectoryDiagnostics,
};

use fit::FitArgs;
use output::OutDir;
use recipe::{Overrides, Recipe};

#[derive(Parser)]
#[command(name = "snls", version, about = "Stochastic NLS blow-up simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output directory (default: the recipe's `output_dir`)
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Trial index selecting the noise stream
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run independent trials and aggregate them
    Ensemble {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Number of trials (default: the recipe's `trials`)
        #[arg(long, value_name = "N")]
        trials: Option<usize>,
        /// Worker threads; affects wall-clock time only
        #[arg(long, value_name = "N", env = "SNLS_WORKERS")]
        workers: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit a recorded series
    Fit(FitArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            trial,
            overrides,
        } => cmd_run(config, out, trial, &overrides),
        Command::Ensemble {
            config,
            out,
            trials,
            workers,
            overrides,
        } => cmd_ensemble(config, out, trials, workers, &overrides),
        Command::Fit(args) => fit::run(&args).map(|doc| {
            println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}

fn load(config: &PathBuf, overrides: &Overrides) -> Result<Recipe> {
    let mut recipe = Recipe::load(config)?;
    overrides.apply(&mut recipe.run)?;
    Ok(recipe)
}

fn out_dir(flag: Option<PathBuf>, recipe: &Recipe) -> Result<PathBuf> {
    flag.or_else(|| recipe.output_dir.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set output_dir in the recipe"))
}

/// Rate fit over the whole recorded series of a blow-up run.
fn rate_fit(d: &TrajectoryDiagnostics) -> serde_json::Value {
    let l = d.column(|r| r.l);
    let t_last = d.rows.last().map_or(0.0, |r| r.t);
    match fit_blowup_rate_remaining(&d.time_to_end(), &l, t_last) {
        Ok(f) => serde_json::to_value(f).unwrap_or_default(),
        Err(e) => json!({ "refused": e.to_string() }),
    }
}

fn cmd_run(config: PathBuf, out: Option<PathBuf>, trial: u64, overrides: &Overrides) -> Result<ExitCode> {
    let recipe = load(&config, overrides)?;
    let echo = recipe.echo()?;
    let mut dir = OutDir::create(&out_dir(out, &recipe)?)?;
    let d = run_trajectory::<f64>(&recipe.run, trial)?;

    dir.write_text("config.toml", &echo)?;
    dir.write_rows("diagnostics.csv", &d.rows)?;
    let fit = d.outcome.is_blowup().then(|| rate_fit(&d));
    let summary = json!({
        "trial": trial,
        "outcome": d.outcome,
        "steps": d.rows.last().map(|r| r.step),
        "refinements": d.refinements,
        "profiles": d.profiles,
        "rate_fit": fit,
    });
    dir.write_json("summary.json", &summary)?;
    let result = json!({ "trial": trial, "outcome": d.outcome, "rate_fit": fit });
    dir.finish("run", recipe.run.noise.seed, &recipe, result)?;

    println!("{}", serde_json::to_string(&d.outcome)?);
    Ok(match d.outcome {
        Outcome::Completed => ExitCode::SUCCESS,
        Outcome::BlowUp { .. } => ExitCode::from(2),
        Outcome::Aborted { reason } => {
            eprintln!("run aborted: {reason}");
            ExitCode::from(1)
        }
    })
}

fn cmd_ensemble(
    config: PathBuf,
    out: Option<PathBuf>,
    trials: Option<usize>,
    workers: Option<usize>,
    overrides: &Overrides,
) -> Result<ExitCode> {
    let mut recipe = load(&config, overrides)?;
    let n = trials
        .or(recipe.trials)
        .ok_or_else(|| anyhow!("no trial count: pass --trials or set trials in the recipe"))?;
    recipe.trials = Some(n);
    let echo = recipe.echo()?;
    let workers = workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut dir = OutDir::create(&out_dir(out, &recipe)?)?;

    let failures = Mutex::new(Vec::new());
    let trial_file = |trial: u64| format!("trials/trial_{trial:05}.csv");
    std::fs::create_dir_all(dir.path("trials"))?;
    let summary = run_ensemble_with::<f64, _>(&recipe.run, n, workers, |d| {
        let path = dir.path(&trial_file(d.trial));
        let written = std::fs::File::create(&path)
            .map_err(anyhow::Error::from)
            .and_then(|f| {
                snls::experiments::write_diagnostics_csv(&d.rows, std::io::BufWriter::new(f))
                    .map_err(anyhow::Error::from)
            });
        if let Err(e) = written {
            failures.lock().expect("poisoned").push(format!("{}: {e}", path.display()));
        }
        log::info!("trial {}: {:?}", d.trial, d.outcome);
    })?;
    let failures = failures.into_inner().expect("poisoned");
    if !failures.is_empty() {
        return Err(anyhow!("could not write trial files: {}", failures.join("; ")));
    }
    for trial in 0..n as u64 {
        if dir.path(&trial_file(trial)).exists() {
            dir.record(&trial_file(trial));
        }
    }

    let expected = expected_curves(&summary);
    dir.write_text("config.toml", &echo)?;
    dir.write_text("curves.csv", &output::curves_csv(&summary.curves))?;
    let doc = json!({
        "ensemble": summary,
        "mass_fit": expected.mass_fit,
        "energy_fit": expected.energy_fit,
    });
    dir.write_json("summary.json", &doc)?;
    let result = json!({
        "n_trials": summary.n_trials,
        "blowups": summary.blowups,
        "aborted": summary.aborted,
        "blowup_fraction": summary.blowup_fraction,
        "centers": summary.centers,
    });
    println!("{}", serde_json::to_string(&result)?);
    dir.finish("ensemble", recipe.run.noise.seed, &recipe, result)?;
    Ok(ExitCode::SUCCESS)
}
