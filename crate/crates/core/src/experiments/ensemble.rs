use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::fits::{linear_fit, LinearFit};
use super::stats::{center_statistics, SampleMoments};
use super::trajectory::{run_trajectory, Outcome, TrajectoryDiagnostics};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub outcome: Outcome,
    pub steps: u64,
    pub final_t: f64,
    pub final_points: usize,
    pub refinements: usize,
}

/// Trial means and variances on the common grid `t_k = k t_end / (P - 1)`.
/// A trial contributes to a grid time only while it is alive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurves {
    pub t: Vec<f64>,
    pub alive: Vec<usize>,
    pub mean_mass: Vec<f64>,
    pub var_mass: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub var_energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_trials: usize,
    pub seed: u64,
    pub trials: Vec<TrialSummary>,
    pub blowups: usize,
    pub aborted: usize,
    pub blowup_fraction: f64,
    /// Moments of the blow-up centers (at least two blow-ups).
    pub centers: Option<SampleMoments>,
    pub curves: MeanCurves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCurves {
    pub curves: MeanCurves,
    /// Line through the mean mass over the grid times all trials reach.
    pub mass_fit: Option<LinearFit>,
    pub energy_fit: Option<LinearFit>,
}

struct TrialResult {
    summary: TrialSummary,
    mass: Vec<Option<f64>>,
    energy: Vec<Option<f64>>,
}

pub fn run_ensemble<T: Scalar>(cfg: &RunConfig, n_trials: usize, workers: usize) -> Result<EnsembleSummary> {
    run_ensemble_with::<T, _>(cfg, n_trials, workers, |_| {})
}

/// Runs trials `0..n_trials` on `workers` threads and aggregates them in trial
/// order, so the summary does not depend on the worker count. `sink` sees the
/// full diagnostics of each trial (from worker threads) before they are
/// reduced.
pub fn run_ensemble_with<T, F>(
    cfg: &RunConfig,
    n_trials: usize,
    workers: usize,
    sink: F,
) -> Result<EnsembleSummary>
where
    T: Scalar,
    F: Fn(&TrajectoryDiagnostics) + Sync,
{
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("an ensemble needs at least one trial".into()));
    }
    let grid = time_grid(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<TrialResult> = pool.install(|| {
        (0..n_trials as u64)
            .into_par_iter()
            .map(|trial| match run_trajectory::<T>(cfg, trial) {
                Ok(diag) => {
                    sink(&diag);
                    reduce_trial(cfg, &grid, &diag)
                }
                Err(e) => TrialResult {
                    summary: TrialSummary {
                        trial,
                        outcome: Outcome::Aborted { reason: e.to_string() },
                        steps: 0,
                        final_t: 0.0,
                        final_points: 0,
                        refinements: 0,
                    },
                    mass: vec![None; grid.len()],
                    energy: vec![None; grid.len()],
                },
            })
            .collect()
    });

    let (mean_mass, var_mass, alive) = moments_on_grid(&results, |r| &r.mass);
    let (mean_energy, var_energy, _) = moments_on_grid(&results, |r| &r.energy);
    let trials: Vec<TrialSummary> = results.into_iter().map(|r| r.summary).collect();
    let centers: Vec<f64> = trials
        .iter()
        .filter_map(|t| match t.outcome {
            Outcome::BlowUp { x_c, .. } => Some(x_c),
            _ => None,
        })
        .collect();
    let aborted = trials
        .iter()
        .filter(|t| matches!(t.outcome, Outcome::Aborted { .. }))
        .count();
    Ok(EnsembleSummary {
        n_trials,
        seed: cfg.noise.seed,
        blowups: centers.len(),
        aborted,
        blowup_fraction: centers.len() as f64 / n_trials as f64,
        centers: center_statistics(&centers).ok(),
        trials,
        curves: MeanCurves {
            t: grid,
            alive,
            mean_mass,
            var_mass,
            mean_energy,
            var_energy,
        },
    })
}

fn time_grid(cfg: &RunConfig) -> Vec<f64> {
    let p = cfg.curve_points;
    (0..p)
        .map(|k| cfg.t_end * k as f64 / (p - 1) as f64)
        .collect()
}

fn reduce_trial(cfg: &RunConfig, grid: &[f64], diag: &TrajectoryDiagnostics) -> TrialResult {
    let last = diag.rows.last().expect("a trajectory records its initial row");
    let t_last = last.t + 1e-9 * cfg.dt0;
    let resample = |value: fn(&super::trajectory::DiagnosticRow) -> f64| -> Vec<Option<f64>> {
        let mut k = 0;
        grid.iter()
            .map(|&t| {
                if t > t_last {
                    return None;
                }
                while k + 1 < diag.rows.len() && diag.rows[k + 1].t < t {
                    k += 1;
                }
                let a = &diag.rows[k];
                match diag.rows.get(k + 1) {
                    Some(b) if b.t > a.t => {
                        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                        Some(value(a) * (1.0 - s) + value(b) * s)
                    }
                    _ => Some(value(a)),
                }
            })
            .collect()
    };
    TrialResult {
        summary: TrialSummary {
            trial: diag.trial,
            outcome: diag.outcome.clone(),
            steps: last.step,
            final_t: last.t,
            final_points: last.n_points,
            refinements: diag.refinements.len(),
        },
        mass: resample(|r| r.m_dis),
        energy: resample(|r| r.h_dis),
    }
}

fn moments_on_grid(
    results: &[TrialResult],
    series: impl Fn(&TrialResult) -> &Vec<Option<f64>>,
) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let p = results.first().map_or(0, |r| series(r).len());
    let mut mean = vec![f64::NAN; p];
    let mut var = vec![f64::NAN; p];
    let mut alive = vec![0; p];
    for k in 0..p {
        let vals: Vec<f64> = results.iter().filter_map(|r| series(r)[k]).collect();
        alive[k] = vals.len();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        mean[k] = m;
        var[k] = if vals.len() > 1 {
            vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
    }
    (mean, var, alive)
}

/// Mean curves plus straight-line fits over the grid times at which every
/// trial is still alive.
pub fn expected_curves(summary: &EnsembleSummary) -> ExpectedCurves {
    let c = &summary.curves;
    let idx: Vec<usize> = (0..c.t.len())
        .filter(|k| c.alive[*k] == summary.n_trials)
        .collect();
    let pick = |v: &[f64]| idx.iter().map(|k| v[*k]).collect::<Vec<f64>>();
    let t = pick(&c.t);
    ExpectedCurves {
        curves: c.clone(),
        mass_fit: linear_fit(&t, &pick(&c.mean_mass)).ok(),
        energy_fit: linear_fit(&t, &pick(&c.mean_energy)).ok(),
    }
}
