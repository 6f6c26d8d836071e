//! Non-uniform 1D grids on `[-Lc, Lc]`, the three-point difference operators
//! with Neumann ghost closure, and midpoint refinement that preserves the
//! discrete mass.
//!
//! Ghost convention: the pseudo-points outside the grid carry the value of the
//! adjacent boundary node (`f[-1] = f[0]`, `f[N+1] = f[N]`) and the spacing of
//! the adjacent real interval (`dx[-1] = dx[0]`, `dx[N] = dx[N-1]`).

use crate::error::{check_len, Error, Result};
use crate::scalar::{Scalar, C};

/// Ordered grid points `x_0 < ... < x_N` together with their spacings and the
/// second-difference stencil (ghost values folded in).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    points: Vec<T>,
    spacings: Vec<T>,
    d2: Stencil<T>,
}

/// Three-point stencil rows: `out[j] = lower[j] f[j-1] + center[j] f[j] + upper[j] f[j+1]`.
/// `lower[0]` and `upper[N]` are zero because the ghost contribution is folded
/// into `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil<T> {
    pub lower: Vec<T>,
    pub center: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Mesh<T> {
    /// Builds a mesh from explicit points; at least two strictly increasing,
    /// finite points are required.
    pub fn from_points(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config(format!(
                "a mesh needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("mesh points must be finite".into()));
        }
        let spacings: Vec<T> = points.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(j) = spacings.iter().position(|d| *d <= T::zero()) {
            return Err(Error::Config(format!(
                "mesh points must be strictly increasing (interval {j} has non-positive length)"
            )));
        }
        let d2 = second_difference_stencil(&spacings);
        Ok(Self {
            points,
            spacings,
            d2,
        })
    }

    /// Uniform mesh with `N = round(2 Lc / dx)` intervals, `x_j = -Lc + j (2 Lc / N)`.
    pub fn uniform(half_length: T, dx: T) -> Result<Self> {
        if !(half_length > T::zero()) || !half_length.is_finite() {
            return Err(Error::Config(format!(
                "half-length must be positive, got {half_length}"
            )));
        }
        let two = T::of(2.0);
        if !(dx > T::zero()) || dx > two * half_length {
            return Err(Error::Config(format!(
                "spacing must lie in (0, 2 Lc], got {dx} with Lc = {half_length}"
            )));
        }
        let ratio = two * half_length / dx;
        let n = ratio.round();
        // 2 Lc / dx must be an integer up to rounding of the inputs.
        if (ratio - n).abs() > T::of(1e-6) * n.max(T::one()) {
            return Err(Error::Config(format!(
                "2 Lc / dx = {ratio} is not an integer number of intervals"
            )));
        }
        let n = n.to_usize().expect("interval count fits in usize");
        let width = two * half_length;
        let points = (0..=n)
            .map(|j| -half_length + width * T::of(j as f64) / T::of(n as f64))
            .collect();
        Self::from_points(points)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Real interval lengths `dx_0 .. dx_{N-1}`.
    pub fn spacings(&self) -> &[T] {
        &self.spacings
    }

    /// Number of grid points, `N + 1`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of intervals `N`.
    pub fn n_intervals(&self) -> usize {
        self.spacings.len()
    }

    /// Spacing `dx_j` for `j` in `-1..=N`, with the ghost convention at both ends.
    pub fn spacing(&self, j: isize) -> T {
        let n = self.spacings.len() as isize;
        let idx = j.clamp(0, n - 1) as usize;
        self.spacings[idx]
    }

    /// Quadrature weight `(dx_{j-1} + dx_j) / 2` of node `j`.
    pub fn weight(&self, j: usize) -> T {
        T::of(0.5) * (self.spacing(j as isize - 1) + self.spacing(j as isize))
    }

    pub fn weights(&self) -> Vec<T> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }

    pub fn min_spacing(&self) -> T {
        self.spacings.iter().fold(T::infinity(), |m, d| m.min(*d))
    }

    pub fn is_uniform(&self, rel_tol: T) -> bool {
        let d0 = self.spacings[0];
        self.spacings
            .iter()
            .all(|d| (*d - d0).abs() <= rel_tol * d0)
    }

    /// Second-difference stencil with the ghost values folded into the diagonal.
    pub fn d2_stencil(&self) -> &Stencil<T> {
        &self.d2
    }

    /// First-difference stencil with the ghost values folded into the diagonal.
    pub fn d1_stencil(&self) -> Stencil<T> {
        first_difference_stencil(&self.spacings)
    }
}

fn second_difference_stencil<T: Scalar>(dx: &[T]) -> Stencil<T> {
    let n_points = dx.len() + 1;
    let two = T::of(2.0);
    let mut lower = vec![T::zero(); n_points];
    let mut center = vec![T::zero(); n_points];
    let mut upper = vec![T::zero(); n_points];
    for j in 0..n_points {
        let hm = if j == 0 { dx[0] } else { dx[j - 1] };
        let hp = if j == n_points - 1 { dx[j - 1] } else { dx[j] };
        let l = two / (hm * (hm + hp));
        let c = -two / (hm * hp);
        let u = two / ((hm + hp) * hp);
        // f[-1] = f[0] and f[N+1] = f[N]
        match j {
            0 => {
                center[j] = c + l;
                upper[j] = u;
            }
            _ if j == n_points - 1 => {
                lower[j] = l;
                center[j] = c + u;
            }
            _ => {
                lower[j] = l;
                center[j] = c;
                upper[j] = u;
            }
        }
    }
    Stencil {
        lower,
        center,
        upper,
    }
}

fn first_difference_stencil<T: Scalar>(dx: &[T]) -> Stencil<T> {
    let n_points = dx.len() + 1;
    let mut lower = vec![T::zero(); n_points];
    let mut center = vec![T::zero(); n_points];
    let mut upper = vec![T::zero(); n_points];
    for j in 0..n_points {
        let hm = if j == 0 { dx[0] } else { dx[j - 1] };
        let hp = if j == n_points - 1 { dx[j - 1] } else { dx[j] };
        let l = -hp / (hm * (hm + hp));
        let c = (hp - hm) / (hm * hp);
        let u = hm / ((hm + hp) * hp);
        match j {
            0 => {
                center[j] = c + l;
                upper[j] = u;
            }
            _ if j == n_points - 1 => {
                lower[j] = l;
                center[j] = c + u;
            }
            _ => {
                lower[j] = l;
                center[j] = c;
                upper[j] = u;
            }
        }
    }
    Stencil {
        lower,
        center,
        upper,
    }
}

fn apply_stencil<T: Scalar>(s: &Stencil<T>, f: &[C<T>]) -> Vec<C<T>> {
    let n = f.len();
    (0..n)
        .map(|j| {
            let mut acc = f[j] * s.center[j];
            if j > 0 {
                acc += f[j - 1] * s.lower[j];
            }
            if j + 1 < n {
                acc += f[j + 1] * s.upper[j];
            }
            acc
        })
        .collect()
}

/// Second derivative on the mesh (three-point non-uniform stencil, Neumann ghosts).
pub fn d2_apply<T: Scalar>(mesh: &Mesh<T>, f: &[C<T>]) -> Result<Vec<C<T>>> {
    check_len(mesh.len(), f.len())?;
    Ok(apply_stencil(mesh.d2_stencil(), f))
}

/// First derivative on the mesh (three-point non-uniform stencil, Neumann ghosts).
pub fn d1_apply<T: Scalar>(mesh: &Mesh<T>, f: &[C<T>]) -> Result<Vec<C<T>>> {
    check_len(mesh.len(), f.len())?;
    Ok(apply_stencil(&mesh.d1_stencil(), f))
}

/// Refinement tolerances and the thresholds frozen from the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig<T> {
    pub tol1: T,
    pub tol2: T,
    pub sigma: u32,
    m_tol1: T,
    m_tol2: T,
}

impl<T: Scalar> RefinementConfig<T> {
    /// Computes `M_tol1 = Tol1 max_j gamma_j^0` and `M_tol2 = Tol2 max_j eta_j^0`
    /// from the initial mesh and field.
    pub fn calibrate(mesh: &Mesh<T>, u0: &[C<T>], tol1: T, tol2: T, sigma: u32) -> Result<Self> {
        if !(tol1 > T::zero()) || !(tol2 > T::zero()) {
            return Err(Error::Config(format!(
                "refinement tolerances must be positive, got Tol1 = {tol1}, Tol2 = {tol2}"
            )));
        }
        if sigma == 0 {
            return Err(Error::Config("sigma must be a positive integer".into()));
        }
        let (gamma, eta) = interval_indicators(mesh, u0, sigma)?;
        let max = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(*x));
        let m_tol1 = tol1 * max(&gamma);
        let m_tol2 = tol2 * max(&eta);
        if m_tol1 == T::zero() && m_tol2 == T::zero() {
            return Err(Error::Config(
                "degenerate refinement thresholds: the initial field is identically zero".into(),
            ));
        }
        Ok(Self {
            tol1,
            tol2,
            sigma,
            m_tol1,
            m_tol2,
        })
    }

    pub fn thresholds(&self) -> (T, T) {
        (self.m_tol1, self.m_tol2)
    }
}

/// Per-interval `gamma_j = dx_j^{1/sigma} |u_{j+1} - u_j|` and
/// `eta_j = dx_j^{1/sigma} |u_{j+1} + u_j|`.
pub fn interval_indicators<T: Scalar>(
    mesh: &Mesh<T>,
    u: &[C<T>],
    sigma: u32,
) -> Result<(Vec<T>, Vec<T>)> {
    check_len(mesh.len(), u.len())?;
    let inv_sigma = T::one() / T::of(sigma as f64);
    let scale: Vec<T> = mesh.spacings().iter().map(|d| d.powf(inv_sigma)).collect();
    let gamma = u
        .windows(2)
        .zip(&scale)
        .map(|(w, s)| *s * (w[1] - w[0]).norm())
        .collect();
    let eta = u
        .windows(2)
        .zip(&scale)
        .map(|(w, s)| *s * (w[1] + w[0]).norm())
        .collect();
    Ok((gamma, eta))
}

/// Flags interval `j` iff `gamma_j > M_tol1` or `eta_j > M_tol2`.
pub fn compute_refinement_flags<T: Scalar>(
    mesh: &Mesh<T>,
    u: &[C<T>],
    cfg: &RefinementConfig<T>,
) -> Result<Vec<bool>> {
    let (gamma, eta) = interval_indicators(mesh, u, cfg.sigma)?;
    Ok(gamma
        .iter()
        .zip(&eta)
        .map(|(g, e)| *g > cfg.m_tol1 || *e > cfg.m_tol2)
        .collect())
}

#[inline]
fn sgn<T: Scalar>(x: T) -> T {
    // sgn(0) := +1
    if x < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// Component-wise midpoint with `|w|^2 = wa |a|^2 + wb |b|^2`; real and
/// imaginary parts take the sign of the corresponding component of `a + b`.
pub fn weighted_midpoint<T: Scalar>(a: C<T>, b: C<T>, wa: T, wb: T) -> C<T> {
    let re = (wa * a.re * a.re + wb * b.re * b.re).sqrt() * sgn(a.re + b.re);
    let im = (wa * a.im * a.im + wb * b.im * b.im).sqrt() * sgn(a.im + b.im);
    C::new(re, im)
}

/// Mass-conservative midpoint value for an interval split into equal halves:
/// `|w|^2 = (|a|^2 + |b|^2) / 2`.
pub fn midpoint_interpolate<T: Scalar>(a: C<T>, b: C<T>) -> C<T> {
    let half = T::of(0.5);
    weighted_midpoint(a, b, half, half)
}

/// Splits every flagged interval at its midpoint.
///
/// The inserted value is chosen so the discrete mass is unchanged: with
/// sub-intervals `d1 = x_mid - x_j`, `d2 = x_{j+1} - x_mid`,
/// `|w|^2 = (l_j d2 |u_j|^2 + l_{j+1} d1 |u_{j+1}|^2) / (d1 + d2)`, where
/// `l = 2` at a boundary node (its ghost spacing shrinks too) and `1` elsewhere.
/// For an interior split into exact halves this is [`midpoint_interpolate`].
pub fn refine<T: Scalar>(
    mesh: &Mesh<T>,
    u: &[C<T>],
    flags: &[bool],
) -> Result<(Mesh<T>, Vec<C<T>>)> {
    check_len(mesh.len(), u.len())?;
    check_len(mesh.n_intervals(), flags.len())?;
    if !flags.iter().any(|f| *f) {
        return Ok((mesh.clone(), u.to_vec()));
    }
    let x = mesh.points();
    let last = mesh.len() - 1;
    let inserted = flags.iter().filter(|f| **f).count();
    let mut points = Vec::with_capacity(mesh.len() + inserted);
    let mut field = Vec::with_capacity(mesh.len() + inserted);
    let half = T::of(0.5);
    for j in 0..mesh.n_intervals() {
        points.push(x[j]);
        field.push(u[j]);
        if !flags[j] {
            continue;
        }
        let xm = half * (x[j] + x[j + 1]);
        if !(xm > x[j] && xm < x[j + 1]) {
            return Err(Error::Breakdown(format!(
                "interval [{}, {}] is too short to split in this precision",
                x[j],
                x[j + 1]
            )));
        }
        let d1 = xm - x[j];
        let d2 = x[j + 1] - xm;
        let width = d1 + d2;
        let left = if j == 0 { T::of(2.0) } else { T::one() };
        let right = if j + 1 == last { T::of(2.0) } else { T::one() };
        points.push(xm);
        field.push(weighted_midpoint(
            u[j],
            u[j + 1],
            left * d2 / width,
            right * d1 / width,
        ));
    }
    points.push(x[last]);
    field.push(u[last]);
    Ok((Mesh::from_points(points)?, field))
}

/// Inserts arithmetic midpoints into an auxiliary per-node real array, in the
/// same positions [`refine`] inserts grid points.
pub fn insert_midpoints_linear<T: Scalar>(values: &[T], flags: &[bool]) -> Result<Vec<T>> {
    check_len(values.len(), flags.len() + 1)?;
    let mut out = Vec::with_capacity(values.len() + flags.len());
    for (j, flag) in flags.iter().enumerate() {
        out.push(values[j]);
        if *flag {
            out.push(T::of(0.5) * (values[j] + values[j + 1]));
        }
    }
    out.push(values[values.len() - 1]);
    Ok(out)
}
