//! Space-time white noise projected onto the hat-function basis of the current
//! mesh.
//!
//! Gaussian increments come from a ChaCha8 stream whose key is
//! `(seed, trial)` and whose stream id is the time-step index, so the draws of
//! step `m` do not depend on how many numbers earlier steps consumed (which
//! changes whenever the mesh is refined) or on the order trials are run in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;
use crate::scalar::{Scalar, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[serde(alias = "det")]
    Deterministic,
    #[serde(alias = "add")]
    Additive,
    #[serde(alias = "mult")]
    Multiplicative,
}

/// Noise kind, strength and the identity of the random stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    pub kind: NoiseKind,
    pub eps: T,
    pub seed: u64,
    pub trial: u64,
}

const STREAM_TAG: &[u8; 16] = b"snls/noise/chi\0\0";

impl<T: Scalar> NoiseModel<T> {
    pub fn new(kind: NoiseKind, eps: T, seed: u64, trial: u64) -> Result<Self> {
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::Config(format!(
                "noise strength must be finite and non-negative, got {eps}"
            )));
        }
        Ok(Self {
            kind,
            eps,
            seed,
            trial,
        })
    }

    pub fn deterministic() -> Self {
        Self {
            kind: NoiseKind::Deterministic,
            eps: T::zero(),
            seed: 0,
            trial: 0,
        }
    }

    /// Effective strength: zero for deterministic runs.
    pub fn strength(&self) -> T {
        match self.kind {
            NoiseKind::Deterministic => T::zero(),
            _ => self.eps,
        }
    }

    /// False when no random numbers need to be drawn.
    pub fn is_active(&self) -> bool {
        self.strength() > T::zero()
    }

    fn rng(&self, step_index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.trial.to_le_bytes());
        key[16..].copy_from_slice(STREAM_TAG);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(step_index);
        rng
    }

    /// `n_points` i.i.d. standard normal values for time step `step_index`.
    pub fn draw_increments(&self, step_index: u64, n_points: usize) -> Vec<T> {
        let mut rng = self.rng(step_index);
        (0..n_points)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                T::of(x)
            })
            .collect()
    }
}

/// Noise amplitudes `f~_j` on the mesh and the raw increments `chi_j` they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCoeffs<T> {
    pub ftilde: Vec<T>,
    pub chi: Vec<T>,
}

/// Scales the increments by the hat-function projection:
///
/// * interior: `f~_j = (sqrt3/2) (sqrt dx_{j-1} + sqrt dx_j) / (sqrt dt (dx_{j-1} + dx_j)) chi_j`
/// * ends: `f~_0 = (sqrt3/2) chi_0 / sqrt(dt dx_0)`, `f~_N = (sqrt3/2) chi_N / sqrt(dt dx_{N-1})`
pub fn noise_coefficients<T: Scalar>(mesh: &Mesh<T>, dt: T, chi: Vec<T>) -> Result<NoiseCoeffs<T>> {
    check_len(mesh.len(), chi.len())?;
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let half_sqrt3 = T::of(3f64.sqrt() / 2.0);
    let sqrt_dt = dt.sqrt();
    let dx = mesh.spacings();
    let last = mesh.len() - 1;
    let ftilde = chi
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let scale = if j == 0 {
                T::one() / (sqrt_dt * dx[0].sqrt())
            } else if j == last {
                T::one() / (sqrt_dt * dx[last - 1].sqrt())
            } else {
                let (a, b) = (dx[j - 1], dx[j]);
                (a.sqrt() + b.sqrt()) / (sqrt_dt * (a + b))
            };
            half_sqrt3 * scale * *c
        })
        .collect();
    Ok(NoiseCoeffs { ftilde, chi })
}

/// Discrete forcing `g_j`: `eps u_mid_j f~_j` (multiplicative), `eps f~_j`
/// (additive) or zero.
pub fn forcing_term<T: Scalar>(
    kind: NoiseKind,
    eps: T,
    coeffs: &NoiseCoeffs<T>,
    u_mid: &[C<T>],
) -> Result<Vec<C<T>>> {
    let n = coeffs.ftilde.len();
    Ok(match kind {
        NoiseKind::Deterministic => vec![C::new(T::zero(), T::zero()); n],
        NoiseKind::Additive => coeffs
            .ftilde
            .iter()
            .map(|f| C::new(eps * *f, T::zero()))
            .collect(),
        NoiseKind::Multiplicative => {
            check_len(n, u_mid.len())?;
            coeffs
                .ftilde
                .iter()
                .zip(u_mid)
                .map(|(f, u)| *u * (eps * *f))
                .collect()
        }
    })
}

/// Trace `N + 1` of the projected covariance and `m_phi = 12 (N + 1) / dx^3`.
pub fn trace_and_mphi_uniform<T: Scalar>(n_intervals: usize, dx: T) -> (usize, T) {
    let trace = n_intervals + 1;
    (trace, T::of(12.0 * trace as f64) / (dx * dx * dx))
}

/// As [`trace_and_mphi_uniform`] for a mesh; a non-uniform mesh uses its
/// smallest spacing (diagnostic only).
pub fn trace_and_mphi<T: Scalar>(mesh: &Mesh<T>) -> (usize, T) {
    trace_and_mphi_uniform(mesh.n_intervals(), mesh.min_spacing())
}
