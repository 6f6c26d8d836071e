//! Trajectory driver, Monte Carlo ensembles, moment statistics and the
//! regression fits used to analyse blow-up.

mod config;
mod ensemble;
pub mod fits;
mod io;
mod stats;
mod trajectory;

pub use config::{InitialData, NoiseSpec, Profile, RefinementSpec, RunConfig};
pub use ensemble::{
    expected_curves, run_ensemble, run_ensemble_with, EnsembleSummary, ExpectedCurves, MeanCurves,
    TrialSummary,
};
pub use fits::{
    a_from_scale, fit_a_correction, fit_blowup_rate, fit_blowup_rate_remaining, linear_fit,
    supercritical_rate_check, supercritical_ratio, LinearFit, RateFit,
};
pub use io::{write_diagnostics_csv, CSV_HEADER};
pub use stats::{center_statistics, SampleMoments};
pub use trajectory::{
    run_trajectory, BlowupCause, DiagnosticRow, Outcome, ProfileCheckpoint, RefinementEvent,
    TrajectoryDiagnostics,
};
