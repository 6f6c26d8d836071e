//! One time step of the mass-energy conservative (MEC), Crank–Nicolson (CN)
//! and linearized extrapolation (LE) schemes.
//!
//! Every scheme has the form
//!
//! ```text
//! i (U - u)/dt + D2 (u + U)/2 + P (u + U)/2 = g
//! ```
//!
//! with a real potential `P` (scheme dependent) and forcing `g`. Multiplicative
//! forcing `eps f~ (u + U)/2` is real-proportional to the midpoint, so it is
//! folded into the potential (`P - eps f~`) and stays implicit in `U`. Because
//! the potential is real the discrete mass is conserved by every solve, even
//! by a non-converged inner iterate.

mod tridiag;

pub use tridiag::tridiagonal_solve;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;
use crate::noise::{noise_coefficients, NoiseKind, NoiseModel};
use crate::scalar::{powu, sup_norm, CompensatedSum, Scalar, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Mec,
    Cn,
    Le,
}

/// Treatment of the two end points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Neumann ghost values folded into the stencils; conserves discrete mass.
    #[default]
    Ghost,
    /// Additionally overwrite `u_0 = u_1`, `u_N = u_{N-1}` after every step.
    Pinned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub scheme: SchemeKind,
    pub sigma: u32,
    /// Inner-iteration tolerance on `max_j |U^{k+1}_j - U^k_j|`, scaled by
    /// `max(1, ||U||_inf)`. Never tighter than 16 machine epsilons of `T`.
    pub fp_tol: T,
    pub fp_max_iter: usize,
    pub dt_floor: T,
    /// Scheme used for the first LE step, before a previous potential exists.
    pub le_bootstrap: SchemeKind,
    pub boundary: BoundaryMode,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(scheme: SchemeKind, sigma: u32) -> Self {
        Self {
            scheme,
            sigma,
            fp_tol: T::of(1e-10),
            fp_max_iter: 2000,
            dt_floor: T::of(1e-30),
            le_bootstrap: SchemeKind::Cn,
            boundary: BoundaryMode::Ghost,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma == 0 {
            return Err(Error::Config("sigma must be a positive integer".into()));
        }
        if !(self.fp_tol > T::zero()) {
            return Err(Error::Config("fp_tol must be positive".into()));
        }
        if self.fp_max_iter == 0 {
            return Err(Error::Config("fp_max_iter must be at least 1".into()));
        }
        if self.le_bootstrap == SchemeKind::Le {
            return Err(Error::Config(
                "the LE bootstrap step must use MEC or CN".into(),
            ));
        }
        if !(self.dt_floor >= T::zero()) {
            return Err(Error::Config("dt_floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Field, mesh and clock of one trajectory between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub mesh: Mesh<T>,
    pub u: Vec<C<T>>,
    clock: CompensatedSum<T>,
    /// Size of the previous step (the initial step before the first one).
    pub dt_prev: T,
    pub dt0: T,
    /// `|u^{m-1}|^{2 sigma}` on the current mesh; `None` before the first step.
    pub v_prev: Option<Vec<T>>,
    pub step_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    pub dt: T,
    pub scheme: SchemeKind,
    pub iterations: usize,
    /// Final inner-iteration change (zero for LE).
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStep<T> {
    pub dt: T,
    /// The adaptive rule asked for a step below the floor: blow-up is imminent.
    pub at_floor: bool,
}

impl<T: Scalar> State<T> {
    pub fn new(mesh: Mesh<T>, u: Vec<C<T>>, dt0: T) -> Result<Self> {
        check_len(mesh.len(), u.len())?;
        if !(dt0 > T::zero()) || !dt0.is_finite() {
            return Err(Error::Config(format!(
                "initial time step must be positive, got {dt0}"
            )));
        }
        Ok(Self {
            mesh,
            u,
            clock: CompensatedSum::new(T::zero()),
            dt_prev: dt0,
            dt0,
            v_prev: None,
            step_index: 0,
        })
    }

    pub fn time(&self) -> T {
        self.clock.value()
    }

    /// Advances the state by one step of size `dt`. On error the state is left
    /// untouched.
    pub fn advance(
        &mut self,
        cfg: &SolverConfig<T>,
        noise: &NoiseModel<T>,
        dt: T,
    ) -> Result<StepReport<T>> {
        let (u_next, report) = solve_step(self, cfg, noise, dt)?;
        let v_now = potential(&self.u, cfg.sigma);
        self.u = u_next;
        if cfg.boundary == BoundaryMode::Pinned {
            let n = self.u.len();
            self.u[0] = self.u[1];
            self.u[n - 1] = self.u[n - 2];
        }
        self.v_prev = Some(v_now);
        self.clock.add(dt);
        self.dt_prev = dt;
        self.step_index += 1;
        Ok(report)
    }

    /// Replaces mesh and field after a refinement, carrying the previous
    /// potential over with linear midpoint values.
    pub fn remesh(&mut self, mesh: Mesh<T>, u: Vec<C<T>>, flags: &[bool]) -> Result<()> {
        check_len(mesh.len(), u.len())?;
        if let Some(v) = &self.v_prev {
            self.v_prev = Some(crate::mesh::insert_midpoints_linear(v, flags)?);
        }
        self.mesh = mesh;
        self.u = u;
        Ok(())
    }
}

/// `|u_j|^{2 sigma}`.
pub fn potential<T: Scalar>(u: &[C<T>], sigma: u32) -> Vec<T> {
    u.iter().map(|z| powu(z.norm_sqr(), sigma)).collect()
}

/// `min(dt_prev, dt0 / ||u||_inf^{2 sigma})`, floored at `cfg.dt_floor`.
pub fn adapt_dt<T: Scalar>(state: &State<T>, cfg: &SolverConfig<T>) -> TimeStep<T> {
    let sup = sup_norm(&state.u);
    let dt = state.dt_prev.min(state.dt0 / powu(sup, 2 * cfg.sigma));
    if dt <= cfg.dt_floor {
        TimeStep {
            dt: cfg.dt_floor,
            at_floor: true,
        }
    } else {
        TimeStep { dt, at_floor: false }
    }
}

/// Nonlinear factor of the MEC scheme, `(a^{s+1} - b^{s+1}) / ((s+1)(a - b))`,
/// evaluated as `(1/(s+1)) sum_{k=0}^{s} a^k b^{s-k}` so it is finite at `a = b`.
pub fn mec_ratio<T: Scalar>(a: T, b: T, sigma: u32) -> T {
    let mut acc = T::zero();
    let mut ak = T::one();
    for k in 0..=sigma {
        acc += ak * powu(b, sigma - k);
        ak *= a;
    }
    acc / T::of(f64::from(sigma + 1))
}

/// Functional form of [`State::advance`].
pub fn step<T: Scalar>(
    state: &State<T>,
    cfg: &SolverConfig<T>,
    noise: &NoiseModel<T>,
    dt: T,
) -> Result<(State<T>, StepReport<T>)> {
    let mut next = state.clone();
    let report = next.advance(cfg, noise, dt)?;
    Ok((next, report))
}

fn solve_step<T: Scalar>(
    state: &State<T>,
    cfg: &SolverConfig<T>,
    noise: &NoiseModel<T>,
    dt: T,
) -> Result<(Vec<C<T>>, StepReport<T>)> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let mesh = &state.mesh;
    let u = &state.u;
    let n = u.len();
    check_len(mesh.len(), n)?;
    let sigma = cfg.sigma;
    let stencil = mesh.d2_stencil();
    let zero = C::new(T::zero(), T::zero());
    let two_i = C::new(T::zero(), T::of(2.0));
    let two_h = T::of(2.0) * dt;

    // Forcing: multiplicative enters the potential, additive the right-hand side.
    let mut mult = vec![T::zero(); n];
    let mut add = vec![T::zero(); n];
    if noise.is_active() {
        let chi = noise.draw_increments(state.step_index, n);
        let coeffs = noise_coefficients(mesh, dt, chi)?;
        let eps = noise.strength();
        match noise.kind {
            NoiseKind::Multiplicative => {
                for (m, f) in mult.iter_mut().zip(&coeffs.ftilde) {
                    *m = eps * *f;
                }
            }
            NoiseKind::Additive => {
                for (a, f) in add.iter_mut().zip(&coeffs.ftilde) {
                    *a = eps * *f;
                }
            }
            NoiseKind::Deterministic => {}
        }
    }

    // 2i u - dt D2 u + 2 dt g_add
    let base: Vec<C<T>> = (0..n)
        .map(|j| {
            let mut d2u = u[j] * stencil.center[j];
            if j > 0 {
                d2u += u[j - 1] * stencil.lower[j];
            }
            if j + 1 < n {
                d2u += u[j + 1] * stencil.upper[j];
            }
            two_i * u[j] - d2u * dt + C::new(two_h * add[j], T::zero())
        })
        .collect();
    let lower: Vec<C<T>> = (1..n).map(|j| C::new(dt * stencil.lower[j], T::zero())).collect();
    let upper: Vec<C<T>> = (0..n - 1).map(|j| C::new(dt * stencil.upper[j], T::zero())).collect();
    let mut diag = vec![zero; n];
    let mut rhs = vec![zero; n];
    let mut pot = vec![T::zero(); n];

    let mut solve = |pot: &[T]| -> Result<Vec<C<T>>> {
        for j in 0..n {
            diag[j] = two_i + C::new(dt * (stencil.center[j] + pot[j]), T::zero());
            rhs[j] = base[j] - u[j] * (dt * pot[j]);
        }
        tridiagonal_solve(&lower, &diag, &upper, &rhs)
    };

    let scheme = match (cfg.scheme, &state.v_prev) {
        (SchemeKind::Le, None) => cfg.le_bootstrap,
        (s, _) => s,
    };

    match scheme {
        SchemeKind::Le => {
            let v_prev = state.v_prev.as_ref().expect("LE past its first step");
            check_len(n, v_prev.len())?;
            let ratio = dt / state.dt_prev;
            let half = T::of(0.5);
            for j in 0..n {
                let v_now = powu(u[j].norm_sqr(), sigma);
                pot[j] = half * ((T::of(2.0) + ratio) * v_now - ratio * v_prev[j]) - mult[j];
            }
            let next = solve(&pot)?;
            if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Breakdown("non-finite values after the LE solve".into()));
            }
            Ok((
                next,
                StepReport {
                    dt,
                    scheme,
                    iterations: 1,
                    residual: T::zero(),
                },
            ))
        }
        SchemeKind::Mec | SchemeKind::Cn => {
            let b: Vec<T> = u.iter().map(|z| z.norm_sqr()).collect();
            let half = T::of(0.5);
            let mut guess = u.clone();
            let mut residual = T::infinity();
            let tol = cfg.fp_tol.max(T::of(16.0) * T::epsilon());
            for k in 1..=cfg.fp_max_iter {
                for j in 0..n {
                    let nl = match scheme {
                        SchemeKind::Mec => mec_ratio(guess[j].norm_sqr(), b[j], sigma),
                        _ => powu(((u[j] + guess[j]) * half).norm_sqr(), sigma),
                    };
                    pot[j] = nl - mult[j];
                }
                let next = solve(&pot)?;
                let mut diff = T::zero();
                let mut scale = T::one();
                for (a, g) in next.iter().zip(&guess) {
                    diff = diff.max((*a - *g).norm());
                    scale = scale.max(a.norm());
                }
                residual = diff;
                if !diff.is_finite() {
                    return Err(Error::NonConvergence {
                        iterations: k,
                        residual: f64::INFINITY,
                    });
                }
                if diff < tol * scale {
                    return Ok((
                        next,
                        StepReport {
                            dt,
                            scheme,
                            iterations: k,
                            residual,
                        },
                    ));
                }
                guess = next;
            }
            Err(Error::NonConvergence {
                iterations: cfg.fp_max_iter,
                residual: residual.to_f64_lossy(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn q(x: f64) -> f64 {
        3f64.powf(0.25) * (1.0 / (2.0 * x).cosh()).sqrt()
    }

    fn mass(mesh: &Mesh<f64>, u: &[C<f64>]) -> f64 {
        (0..u.len()).map(|j| mesh.weight(j) * u[j].norm_sqr()).sum()
    }

    fn soliton_state(lc: f64, dx: f64, dt: f64, amp: f64) -> State<f64> {
        let mesh = Mesh::uniform(lc, dx).unwrap();
        let u = mesh.points().iter().map(|x| C::new(amp * q(*x), 0.0)).collect();
        State::new(mesh, u, dt).unwrap()
    }

    #[test]
    fn mec_ratio_examples() {
        assert_relative_eq!(mec_ratio(4.0, 1.0, 2), 7.0);
        assert_relative_eq!(mec_ratio(4.0, 1.0, 2), (64.0 - 1.0) / 9.0);
        assert_relative_eq!(mec_ratio(1.7, 1.7, 3), 1.7f64.powi(3), max_relative = 1e-14);
        assert_eq!(mec_ratio(0.0, 0.0, 2), 0.0);
    }

    proptest! {
        #[test]
        fn mec_ratio_matches_quotient(a in 0.0f64..10.0, b in 0.0f64..10.0, sigma in 1u32..4) {
            prop_assume!((a - b).abs() > 1e-3);
            let quotient = (a.powi(sigma as i32 + 1) - b.powi(sigma as i32 + 1))
                / ((sigma as f64 + 1.0) * (a - b));
            let r = mec_ratio(a, b, sigma);
            prop_assert!((r - quotient).abs() <= 1e-12 * quotient.abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn adapt_dt_examples() {
        let mesh = Mesh::<f64>::uniform(1.0, 0.5).unwrap();
        let mut s = State::new(mesh, vec![C::new(2.0, 0.0); 5], 0.0125).unwrap();
        s.dt_prev = 1.0;
        let cfg = SolverConfig::new(SchemeKind::Le, 2);
        let ts = adapt_dt(&s, &cfg);
        assert_relative_eq!(ts.dt, 7.8125e-4);
        assert!(!ts.at_floor);

        s.u = vec![C::new(0.5, 0.0); 5];
        s.dt_prev = 0.01;
        assert_eq!(adapt_dt(&s, &cfg).dt, 0.01);

        s.u = vec![C::new(1e12, 0.0); 5];
        let mut floored = cfg;
        floored.dt_floor = 1e-14;
        let ts = adapt_dt(&s, &floored);
        assert!(ts.at_floor);
        assert_eq!(ts.dt, 1e-14);
    }

    #[test]
    fn zero_field_is_a_fixed_point() {
        for scheme in [SchemeKind::Mec, SchemeKind::Cn, SchemeKind::Le] {
            let mesh = Mesh::<f64>::uniform(2.0, 0.1).unwrap();
            let n = mesh.len();
            let mut s = State::new(mesh, vec![C::new(0.0, 0.0); n], 0.01).unwrap();
            let cfg = SolverConfig::new(scheme, 2);
            for _ in 0..3 {
                let r = s.advance(&cfg, &NoiseModel::deterministic(), 0.01).unwrap();
                assert_eq!(r.iterations, 1);
            }
            assert!(s.u.iter().all(|z| *z == C::new(0.0, 0.0)));
        }
    }

    #[test]
    fn le_bootstraps_with_cn() {
        let mut s = soliton_state(5.0, 0.1, 0.01, 0.9);
        let cfg = SolverConfig::new(SchemeKind::Le, 2);
        let r = s.advance(&cfg, &NoiseModel::deterministic(), 0.01).unwrap();
        assert_eq!(r.scheme, SchemeKind::Cn);
        let r = s.advance(&cfg, &NoiseModel::deterministic(), 0.01).unwrap();
        assert_eq!(r.scheme, SchemeKind::Le);
        assert_eq!(s.step_index, 2);
        assert_relative_eq!(s.time(), 0.02);
    }

    #[test]
    fn le_potential_with_equal_steps() {
        // equal steps reduce the extrapolation to (3 V^m - V^{m-1}) / 2
        let mesh = Mesh::<f64>::uniform(1.0, 0.5).unwrap();
        let mut s = State::new(mesh, vec![C::new(1.1, 0.2); 5], 0.01).unwrap();
        s.v_prev = Some(vec![0.5; 5]);
        let v_now = potential(&s.u, 2)[0];
        let cfg = SolverConfig::new(SchemeKind::Le, 2);
        let (next, _) = step(&s, &cfg, &NoiseModel::deterministic(), 0.01).unwrap();
        // constant field: D2 vanishes, so the update is a phase rotation by the potential
        let p = 0.5 * (3.0 * v_now - 0.5);
        let dt = 0.01;
        let expect = s.u[0] * (C::new(1.0, 0.5 * dt * p) / C::new(1.0, -0.5 * dt * p));
        assert!((next.u[2] - expect).norm() < 1e-14);
    }

    #[test]
    fn deterministic_mass_conserved_by_all_schemes() {
        for scheme in [SchemeKind::Mec, SchemeKind::Cn, SchemeKind::Le] {
            let mut s = soliton_state(10.0, 0.1, 0.01, 0.95);
            let m0 = mass(&s.mesh, &s.u);
            let cfg = SolverConfig::new(scheme, 2);
            for _ in 0..100 {
                s.advance(&cfg, &NoiseModel::deterministic(), 0.01).unwrap();
            }
            assert!((mass(&s.mesh, &s.u) - m0).abs() < 1e-12, "{scheme:?}");
        }
    }

    #[test]
    fn multiplicative_noise_conserves_mass() {
        let noise = NoiseModel::new(NoiseKind::Multiplicative, 0.5, 3, 0).unwrap();
        for scheme in [SchemeKind::Mec, SchemeKind::Cn, SchemeKind::Le] {
            let mut s = soliton_state(10.0, 0.1, 0.01, 0.95);
            let m0 = mass(&s.mesh, &s.u);
            let cfg = SolverConfig::new(scheme, 2);
            for _ in 0..100 {
                s.advance(&cfg, &noise, 0.01).unwrap();
            }
            assert!((mass(&s.mesh, &s.u) - m0).abs() < 1e-12, "{scheme:?}");
        }
    }

    #[test]
    fn additive_noise_injects_mass() {
        let noise = NoiseModel::new(NoiseKind::Additive, 0.05, 3, 0).unwrap();
        let mut s = soliton_state(10.0, 0.1, 0.01, 0.9);
        let m0 = mass(&s.mesh, &s.u);
        let cfg = SolverConfig::new(SchemeKind::Le, 2);
        for _ in 0..200 {
            s.advance(&cfg, &noise, 0.01).unwrap();
        }
        assert!(mass(&s.mesh, &s.u) > m0);
    }

    #[test]
    fn fixed_point_failure_is_reported() {
        let mut s = soliton_state(5.0, 0.1, 0.5, 3.0);
        let mut cfg = SolverConfig::new(SchemeKind::Cn, 2);
        cfg.fp_max_iter = 50;
        let err = s.advance(&cfg, &NoiseModel::deterministic(), 0.5).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
        assert_eq!(s.step_index, 0);
    }

    #[test]
    fn cn_and_mec_agree_to_third_order() {
        // one-step discrepancy shrinks ~8x when dt halves
        let discrepancy = |dt: f64| {
            let s = soliton_state(10.0, 0.05, dt, 1.0);
            let mut s = s;
            // give the state a phase gradient so both nonlinear terms are active
            for (z, x) in s.u.iter_mut().zip(s.mesh.points().to_vec()) {
                *z *= C::new(0.0, 0.3 * x).exp();
            }
            let mut cfg = SolverConfig::new(SchemeKind::Cn, 2);
            cfg.fp_tol = 1e-14;
            let (a, _) = step(&s, &cfg, &NoiseModel::deterministic(), dt).unwrap();
            cfg.scheme = SchemeKind::Mec;
            let (b, _) = step(&s, &cfg, &NoiseModel::deterministic(), dt).unwrap();
            a.u.iter().zip(&b.u).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()))
        };
        let ratio = discrepancy(0.02) / discrepancy(0.01);
        assert!((ratio - 8.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn pinned_boundary_copies_neighbours() {
        let mut s = soliton_state(3.0, 0.1, 0.01, 1.0);
        let mut cfg = SolverConfig::new(SchemeKind::Cn, 2);
        cfg.boundary = BoundaryMode::Pinned;
        s.advance(&cfg, &NoiseModel::deterministic(), 0.01).unwrap();
        let n = s.u.len();
        assert_eq!(s.u[0], s.u[1]);
        assert_eq!(s.u[n - 1], s.u[n - 2]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::<f64>::new(SchemeKind::Le, 2);
        assert!(cfg.validate().is_ok());
        cfg.le_bootstrap = SchemeKind::Le;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::<f64>::new(SchemeKind::Cn, 0);
        assert!(cfg.validate().is_err());
        cfg.sigma = 2;
        cfg.fp_max_iter = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_precision_step_conserves_mass() {
        let mesh = Mesh::<f32>::uniform(5.0, 0.1).unwrap();
        let u: Vec<C<f32>> = mesh
            .points()
            .iter()
            .map(|x| C::new(0.9 * q(f64::from(*x)) as f32, 0.0))
            .collect();
        let m = |s: &State<f32>| -> f32 {
            (0..s.u.len()).map(|j| s.mesh.weight(j) * s.u[j].norm_sqr()).sum()
        };
        let mut s = State::new(mesh, u, 0.01f32).unwrap();
        let m0 = m(&s);
        let mut cfg = SolverConfig::<f32>::new(SchemeKind::Le, 2);
        cfg.fp_tol = 1e-6;
        for _ in 0..50 {
            s.advance(&cfg, &NoiseModel::deterministic(), 0.01).unwrap();
        }
        assert!((m(&s) - m0).abs() < 1e-4);
    }
}
