use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::mesh::{compute_refinement_flags, refine, Mesh, RefinementConfig};
use crate::noise::NoiseModel;
use crate::observables::{
    blowup_center, focusing_l, ground_state, measure, rescaled_profile_distance, FocusingMode,
};
use crate::scalar::{sup_norm, CompensatedSum, Scalar};
use crate::schemes::{adapt_dt, State};

/// One recorded line of the time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub step: u64,
    pub t: f64,
    /// Size of the step that produced this row (0 for the initial row).
    pub dt: f64,
    pub m_dis: f64,
    pub h_dis: f64,
    pub m_app: f64,
    pub sup_norm: f64,
    pub grad_norm: f64,
    pub l: f64,
    pub a: f64,
    pub tau: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupCause {
    /// `L` fell to `l_stop`.
    FocusingScale,
    /// The adaptive step fell to the floor.
    TimeStepFloor,
    /// The inner fixed-point iteration did not converge.
    NonConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowUp { t: f64, x_c: f64, cause: BlowupCause },
    Aborted { reason: String },
}

impl Outcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Outcome::BlowUp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementEvent {
    pub step: u64,
    pub t: f64,
    pub inserted: usize,
    pub n_points: usize,
    /// Trace `N + 1` of the projected noise covariance on the new mesh.
    pub trace: usize,
}

/// Rescaled profile comparison taken when `||u||_inf^{-sigma}` crosses a decade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCheckpoint {
    pub step: u64,
    pub t: f64,
    /// `1 / ||u||_inf^sigma` at the checkpoint.
    pub l_sup: f64,
    pub x_c: f64,
    /// `None` when the comparison window leaves the mesh.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDiagnostics {
    pub trial: u64,
    pub rows: Vec<DiagnosticRow>,
    pub outcome: Outcome,
    pub refinements: Vec<RefinementEvent>,
    pub profiles: Vec<ProfileCheckpoint>,
    /// Final mesh points and `|u|`, when requested.
    pub final_field: Option<(Vec<f64>, Vec<f64>)>,
    /// Elapsed time between consecutive rows, summed step by step.
    gaps: Vec<f64>,
}

impl TrajectoryDiagnostics {
    /// `t_last - t_i` for every row, accumulated backwards from the step sizes
    /// so that it stays accurate when `t_i` agrees with `t_last` to all digits.
    pub fn time_to_end(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        let mut acc = CompensatedSum::new(0.0);
        for i in (0..self.rows.len().saturating_sub(1)).rev() {
            acc.add(self.gaps[i + 1]);
            out[i] = acc.value();
        }
        out
    }

    pub fn column(&self, f: impl Fn(&DiagnosticRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

struct Recorder {
    rows: Vec<DiagnosticRow>,
    gaps: Vec<f64>,
    since_last: CompensatedSum<f64>,
}

impl Recorder {
    fn push<T: Scalar>(
        &mut self,
        state: &State<T>,
        cfg: &RunConfig,
        dt: f64,
        tau: f64,
    ) -> Result<()> {
        if self.rows.last().map(|r| r.step) == Some(state.step_index) {
            return Ok(());
        }
        let m = measure(&state.mesh, &state.u, cfg.sigma, cfg.focusing_mode)?;
        self.rows.push(DiagnosticRow {
            step: state.step_index,
            t: state.time().to_f64_lossy(),
            dt,
            m_dis: m.m_dis.to_f64_lossy(),
            h_dis: m.h_dis.to_f64_lossy(),
            m_app: m.m_app.to_f64_lossy(),
            sup_norm: m.sup_norm.to_f64_lossy(),
            grad_norm: m.grad_norm.to_f64_lossy(),
            l: m.l.to_f64_lossy(),
            a: m.a.to_f64_lossy(),
            tau,
            n_points: state.mesh.len(),
        });
        self.gaps.push(self.since_last.value());
        self.since_last = CompensatedSum::new(0.0);
        Ok(())
    }
}

/// Runs one trajectory: step, adapt the step size, refine, record, until
/// `t_end`, a blow-up criterion, or an abort.
pub fn run_trajectory<T: Scalar>(cfg: &RunConfig, trial: u64) -> Result<TrajectoryDiagnostics> {
    cfg.validate()?;
    let sigma = cfg.sigma;
    let mesh = Mesh::<T>::uniform(T::of(cfg.half_length), T::of(cfg.dx))?;
    let u0 = cfg.initial.sample(sigma, &mesh);
    let refinement = if cfg.refinement.enabled {
        Some(RefinementConfig::calibrate(
            &mesh,
            &u0,
            T::of(cfg.refinement.tol1),
            T::of(cfg.refinement.tol2),
            sigma,
        )?)
    } else {
        None
    };
    let solver = cfg.solver::<T>();
    let noise = NoiseModel::new(cfg.noise.kind, T::of(cfg.noise.eps), cfg.noise.seed, trial)?;
    let mut state = State::new(mesh, u0, T::of(cfg.dt0))?;

    let mut rec = Recorder {
        rows: Vec::new(),
        gaps: Vec::new(),
        since_last: CompensatedSum::new(0.0),
    };
    let mut refinements = Vec::new();
    let mut profiles = Vec::new();
    let mut tau = CompensatedSum::new(0.0f64);
    let mut next_decade = 0i32;
    rec.push(&state, cfg, 0.0, 0.0)?;

    let t_end = T::of(cfg.t_end);
    let slack = T::of(1e-9 * cfg.dt0);
    let mut last_dt = 0.0;
    let outcome = loop {
        let t = state.time();
        if t >= t_end - slack {
            break Outcome::Completed;
        }
        let l = focusing_l(&state.mesh, &state.u, sigma, cfg.focusing_mode)?;
        if cfg.profile_checkpoints {
            let l_sup = if cfg.focusing_mode == FocusingMode::SupNorm {
                l
            } else {
                T::one() / sup_norm(&state.u).powi(sigma as i32)
            };
            let l_sup = l_sup.to_f64_lossy();
            if l_sup <= 10f64.powi(next_decade) {
                profiles.push(checkpoint(&state, sigma, l_sup)?);
                while l_sup <= 10f64.powi(next_decade) {
                    next_decade -= 1;
                }
            }
        }
        if l <= T::of(cfg.l_stop) {
            break blowup(&state, BlowupCause::FocusingScale)?;
        }
        let mut dt = if cfg.adaptive_dt {
            let choice = adapt_dt(&state, &solver);
            if choice.at_floor {
                break blowup(&state, BlowupCause::TimeStepFloor)?;
            }
            choice.dt
        } else {
            state.dt0
        };
        dt = dt.min(t_end - t);
        match state.advance(&solver, &noise, dt) {
            Ok(_) => {}
            Err(Error::NonConvergence { .. }) => break blowup(&state, BlowupCause::NonConvergence)?,
            Err(e) => break Outcome::Aborted { reason: e.to_string() },
        }
        last_dt = dt.to_f64_lossy();
        tau.add(last_dt / l.to_f64_lossy().powi(2));
        rec.since_last.add(last_dt);
        if state.u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            break Outcome::Aborted {
                reason: "field became non-finite".into(),
            };
        }

        let mut refined = false;
        if let Some(rc) = &refinement {
            let flags = compute_refinement_flags(&state.mesh, &state.u, rc)?;
            let inserted = flags.iter().filter(|f| **f).count();
            if inserted > 0 {
                let requested = state.mesh.len() + inserted;
                if requested > cfg.point_cap {
                    let e = Error::PointCap {
                        requested,
                        cap: cfg.point_cap,
                    };
                    break Outcome::Aborted { reason: e.to_string() };
                }
                let (mesh, u) = match refine(&state.mesh, &state.u, &flags) {
                    Ok(r) => r,
                    Err(e) => break Outcome::Aborted { reason: e.to_string() },
                };
                state.remesh(mesh, u, &flags)?;
                log::debug!(
                    "trial {trial}: step {} refined {inserted} intervals, {} points, noise trace {}",
                    state.step_index,
                    requested,
                    requested
                );
                refinements.push(RefinementEvent {
                    step: state.step_index,
                    t: state.time().to_f64_lossy(),
                    inserted,
                    n_points: requested,
                    trace: requested,
                });
                refined = true;
            }
        }
        if refined || state.step_index % cfg.stride == 0 {
            rec.push(&state, cfg, last_dt, tau.value())?;
        }
    };
    rec.push(&state, cfg, last_dt, tau.value())?;

    let final_field = cfg.keep_final_field.then(|| {
        (
            state.mesh.points().iter().map(|x| x.to_f64_lossy()).collect(),
            state.u.iter().map(|z| z.norm().to_f64_lossy()).collect(),
        )
    });
    Ok(TrajectoryDiagnostics {
        trial,
        rows: rec.rows,
        outcome,
        refinements,
        profiles,
        final_field,
        gaps: rec.gaps,
    })
}

fn blowup<T: Scalar>(state: &State<T>, cause: BlowupCause) -> Result<Outcome> {
    let c = blowup_center(&state.mesh, &state.u)?;
    Ok(Outcome::BlowUp {
        t: state.time().to_f64_lossy(),
        x_c: c.x.to_f64_lossy(),
        cause,
    })
}

/// Compares with `Q` using the scale at which the rescaled peak equals `Q(0)`.
fn checkpoint<T: Scalar>(state: &State<T>, sigma: u32, l_sup: f64) -> Result<ProfileCheckpoint> {
    let c = blowup_center(&state.mesh, &state.u)?;
    let l_q = ground_state::<f64>(sigma, 0.0).powi(sigma as i32) * l_sup;
    let distance = match rescaled_profile_distance(&state.mesh, &state.u, sigma, c.x, T::of(l_q)) {
        Ok(d) => Some(d.to_f64_lossy()),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ProfileCheckpoint {
        step: state.step_index,
        t: state.time().to_f64_lossy(),
        l_sup,
        x_c: c.x.to_f64_lossy(),
        distance,
    })
}
