use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::noise::NoiseKind;
use crate::observables::{ground_state, FocusingMode};
use crate::scalar::{Scalar, C};
use crate::schemes::{BoundaryMode, SchemeKind, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `A Q(x)`
    GroundState,
    /// `A exp(-x^2)`
    Gaussian,
    /// `A exp(-x^4)`
    SuperGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub profile: Profile,
    pub amplitude: f64,
}

impl InitialData {
    pub fn ground_state(amplitude: f64) -> Self {
        Self {
            profile: Profile::GroundState,
            amplitude,
        }
    }

    pub fn value(&self, sigma: u32, x: f64) -> f64 {
        let shape = match self.profile {
            Profile::GroundState => ground_state(sigma, x),
            Profile::Gaussian => (-x * x).exp(),
            Profile::SuperGaussian => (-x.powi(4)).exp(),
        };
        self.amplitude * shape
    }

    /// Samples the profile on `mesh`.
    pub fn sample<T: Scalar>(&self, sigma: u32, mesh: &Mesh<T>) -> Vec<C<T>> {
        mesh.points()
            .iter()
            .map(|x| C::new(T::of(self.value(sigma, x.to_f64_lossy())), T::zero()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub eps: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn deterministic() -> Self {
        Self {
            kind: NoiseKind::Deterministic,
            eps: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementSpec {
    pub enabled: bool,
    #[serde(default = "default_tol1")]
    pub tol1: f64,
    #[serde(default = "default_tol2")]
    pub tol2: f64,
}

impl RefinementSpec {
    pub fn off() -> Self {
        Self {
            enabled: false,
            tol1: default_tol1(),
            tol2: default_tol2(),
        }
    }

    pub fn on() -> Self {
        Self {
            enabled: true,
            ..Self::off()
        }
    }
}

fn default_tol1() -> f64 {
    2.0
}
fn default_tol2() -> f64 {
    0.5
}
fn default_fp_tol() -> f64 {
    1e-10
}
fn default_fp_max_iter() -> usize {
    2000
}
fn default_dt_floor() -> f64 {
    1e-30
}
fn default_l_stop() -> f64 {
    1e-12
}
fn default_point_cap() -> usize {
    2_000_000
}
fn default_stride() -> u64 {
    10
}
fn default_true() -> bool {
    true
}
fn default_bootstrap() -> SchemeKind {
    SchemeKind::Cn
}
fn default_curve_points() -> usize {
    101
}

/// Everything needed to reproduce one trajectory (given a trial index).
///
/// Physical parameters are required when deserializing; solver knobs fall
/// back to the defaults of [`RunConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: u32,
    pub initial: InitialData,
    /// Half-length `Lc` of the domain `[-Lc, Lc]`.
    pub half_length: f64,
    pub dx: f64,
    pub dt0: f64,
    pub t_end: f64,
    pub noise: NoiseSpec,
    pub scheme: SchemeKind,
    /// `dt_m = min(dt_{m-1}, dt0 / ||u||_inf^{2 sigma})`; fixed `dt0` when off.
    pub adaptive_dt: bool,
    pub refinement: RefinementSpec,
    #[serde(default = "default_l_stop")]
    pub l_stop: f64,
    #[serde(default = "default_dt_floor")]
    pub dt_floor: f64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "default_bootstrap")]
    pub le_bootstrap: SchemeKind,
    #[serde(default)]
    pub boundary: BoundaryMode,
    #[serde(default = "default_point_cap")]
    pub point_cap: usize,
    /// Diagnostics are recorded every `stride` steps, at refinements and at the end.
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Definition of `L` used for the `L` column, `tau`, and `l_stop`.
    #[serde(default)]
    pub focusing_mode: FocusingMode,
    /// Record the rescaled profile distance each time `L` crosses a decade.
    #[serde(default = "default_true")]
    pub profile_checkpoints: bool,
    /// Keep the final mesh and `|u|` in the diagnostics.
    #[serde(default)]
    pub keep_final_field: bool,
    /// Points of the common time grid for ensemble mean curves.
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

impl RunConfig {
    /// Deterministic LE run with fixed time step and no refinement.
    pub fn new(sigma: u32, initial: InitialData, half_length: f64, dx: f64, dt0: f64, t_end: f64) -> Self {
        Self {
            sigma,
            initial,
            half_length,
            dx,
            dt0,
            t_end,
            noise: NoiseSpec::deterministic(),
            scheme: SchemeKind::Le,
            adaptive_dt: false,
            refinement: RefinementSpec::off(),
            l_stop: default_l_stop(),
            dt_floor: default_dt_floor(),
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
            le_bootstrap: default_bootstrap(),
            boundary: BoundaryMode::Ghost,
            point_cap: default_point_cap(),
            stride: default_stride(),
            focusing_mode: FocusingMode::SupNorm,
            profile_checkpoints: true,
            keep_final_field: false,
            curve_points: default_curve_points(),
        }
    }

    pub fn with_noise(mut self, kind: NoiseKind, eps: f64, seed: u64) -> Self {
        self.noise = NoiseSpec { kind, eps, seed };
        self
    }

    pub fn with_scheme(mut self, scheme: SchemeKind) -> Self {
        self.scheme = scheme;
        self
    }

    /// Adaptive time step plus refinement, as used for following blow-up.
    pub fn focusing(mut self) -> Self {
        self.adaptive_dt = true;
        self.refinement = RefinementSpec::on();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("half_length", self.half_length),
            ("dx", self.dx),
            ("dt0", self.dt0),
            ("t_end", self.t_end),
            ("l_stop", self.l_stop),
            ("fp_tol", self.fp_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.sigma == 0 {
            return Err(Error::Config("sigma must be a positive integer".into()));
        }
        if !(self.noise.eps >= 0.0) || !self.noise.eps.is_finite() {
            return Err(Error::Config(format!("eps must be non-negative, got {}", self.noise.eps)));
        }
        if !self.initial.amplitude.is_finite() {
            return Err(Error::Config("amplitude must be finite".into()));
        }
        if self.refinement.enabled && !(self.refinement.tol1 > 0.0 && self.refinement.tol2 > 0.0) {
            return Err(Error::Config("refinement tolerances must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.curve_points < 2 {
            return Err(Error::Config("curve_points must be at least 2".into()));
        }
        self.solver::<f64>().validate()
    }

    pub fn solver<T: Scalar>(&self) -> SolverConfig<T> {
        SolverConfig {
            scheme: self.scheme,
            sigma: self.sigma,
            fp_tol: T::of(self.fp_tol),
            fp_max_iter: self.fp_max_iter,
            dt_floor: T::of(self.dt_floor),
            le_bootstrap: self.le_bootstrap,
            boundary: self.boundary,
        }
    }
}
