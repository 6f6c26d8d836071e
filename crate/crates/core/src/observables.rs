//! Discrete invariants, blow-up scales and profile diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesh::{d1_apply, d2_apply, Mesh};
use crate::scalar::{powu, sup_norm, Scalar, C};

/// `sum_j w_j |u_j|^2` with `w_j = (dx_{j-1} + dx_j)/2` and ghost spacings at the ends.
pub fn discrete_mass<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>]) -> Result<T> {
    check_len(mesh.len(), u.len())?;
    Ok((0..u.len()).fold(T::zero(), |s, j| s + mesh.weight(j) * u[j].norm_sqr()))
}

/// Kinetic `1/2 sum |u_{j+1}-u_j|^2/dx_j` and potential
/// `1/(2 sigma + 2) sum w_j |u_j|^{2 sigma + 2}` parts of the discrete energy.
pub fn energy_parts<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>], sigma: u32) -> Result<(T, T)> {
    check_len(mesh.len(), u.len())?;
    let dx = mesh.spacings();
    let mut kinetic = T::zero();
    for j in 0..dx.len() {
        kinetic += (u[j + 1] - u[j]).norm_sqr() / dx[j];
    }
    let mut pot = T::zero();
    for (j, z) in u.iter().enumerate() {
        pot += mesh.weight(j) * powu(z.norm_sqr(), sigma + 1);
    }
    Ok((
        T::of(0.5) * kinetic,
        pot / T::of(2.0 * f64::from(sigma) + 2.0),
    ))
}

/// Discrete energy: kinetic minus potential part.
pub fn discrete_energy<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>], sigma: u32) -> Result<T> {
    let (k, p) = energy_parts(mesh, u, sigma)?;
    Ok(k - p)
}

fn trapezoid<T: Scalar>(mesh: &Mesh<T>, f: impl Fn(usize) -> T) -> T {
    let dx = mesh.spacings();
    let half = T::of(0.5);
    (0..dx.len()).fold(T::zero(), |s, j| s + half * dx[j] * (f(j) + f(j + 1)))
}

/// Composite trapezoid rule for `int |u|^2 dx`.
pub fn approx_mass_trapezoid<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>]) -> Result<T> {
    check_len(mesh.len(), u.len())?;
    Ok(trapezoid(mesh, |j| u[j].norm_sqr()))
}

/// `max - min` of a series.
pub fn error_range<T: Scalar>(series: &[T]) -> Result<T> {
    let first = *series
        .first()
        .ok_or_else(|| Error::Domain("error range of an empty series".into()))?;
    let (lo, hi) = series
        .iter()
        .fold((first, first), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    Ok(hi - lo)
}

/// Ranges of the discrete mass, the trapezoid mass and the discrete energy.
pub fn error_ranges<T: Scalar>(m_dis: &[T], m_app: &[T], h_dis: &[T]) -> Result<(T, T, T)> {
    Ok((error_range(m_dis)?, error_range(m_app)?, error_range(h_dis)?))
}

/// `||u_x||_{L^2}` from the three-point first derivative and the trapezoid rule.
pub fn grad_norm<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>]) -> Result<T> {
    let du = d1_apply(mesh, u)?;
    Ok(trapezoid(mesh, |j| du[j].norm_sqr()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FocusingMode {
    /// `1 / ||u||_inf^sigma`
    #[default]
    SupNorm,
    /// `(1 / ||u_x||)^{2/alpha}`, `alpha = 1 + 2/sigma`
    Gradient,
}

fn alpha<T: Scalar>(sigma: u32) -> T {
    T::one() + T::of(2.0) / T::of(f64::from(sigma))
}

/// Focusing length scale `L`.
pub fn focusing_l<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>], sigma: u32, mode: FocusingMode) -> Result<T> {
    check_len(mesh.len(), u.len())?;
    Ok(match mode {
        FocusingMode::SupNorm => T::one() / powu(sup_norm(u), sigma),
        FocusingMode::Gradient => {
            let g = grad_norm(mesh, u)?;
            (T::one() / g).powf(T::of(2.0) / alpha::<T>(sigma))
        }
    })
}

/// Rescaled contraction rate
/// `a = -(2/alpha) (||u_x||^2)^{-(2/alpha + 1)} int |u|^{2 sigma} Im(u_xx conj u) dx`.
pub fn a_parameter<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>], sigma: u32) -> Result<T> {
    let d2u = d2_apply(mesh, u)?;
    let g2 = grad_norm(mesh, u)?.powi(2);
    let integral = trapezoid(mesh, |j| {
        powu(u[j].norm_sqr(), sigma) * (d2u[j] * u[j].conj()).im
    });
    if integral == T::zero() {
        return Ok(T::zero());
    }
    let k = T::of(2.0) / alpha::<T>(sigma);
    Ok(-k * g2.powf(-(k + T::one())) * integral)
}

/// Rescaled time `tau_m = sum_{k<m} dt_k / L_k^2`; returns `n + 1` values
/// starting at 0.
pub fn rescaled_tau<T: Scalar>(dt: &[T], l: &[T]) -> Result<Vec<T>> {
    check_len(dt.len(), l.len())?;
    let mut out = Vec::with_capacity(dt.len() + 1);
    let mut acc = crate::scalar::CompensatedSum::new(T::zero());
    out.push(T::zero());
    for (h, ll) in dt.iter().zip(l) {
        if !(*ll > T::zero()) {
            return Err(Error::Domain(format!("focusing scale must be positive, got {ll}")));
        }
        acc.add(*h / (*ll * *ll));
        out.push(acc.value());
    }
    Ok(out)
}

/// Ground state `Q(x) = (1 + sigma)^{1/(2 sigma)} sech^{1/sigma}(sigma x)`.
pub fn ground_state<T: Scalar>(sigma: u32, x: T) -> T {
    let s = T::of(f64::from(sigma));
    let amp = (T::one() + s).powf(T::one() / (T::of(2.0) * s));
    let sech = T::one() / (s * x).cosh();
    amp * sech.powf(T::one() / s)
}

/// Number of samples on the comparison window `xi in [-2, 2]`.
pub const PROFILE_SAMPLES: usize = 2001;

/// `sup_{|xi| <= 2} | L^{1/sigma} |u(x_c + L xi)| - Q(xi) |`, with `|u|`
/// interpolated linearly between mesh points.
pub fn rescaled_profile_distance<T: Scalar>(
    mesh: &Mesh<T>,
    u: &[C<T>],
    sigma: u32,
    x_c: T,
    l: T,
) -> Result<T> {
    check_len(mesh.len(), u.len())?;
    if !(l > T::zero()) {
        return Err(Error::Domain(format!("focusing scale must be positive, got {l}")));
    }
    let x = mesh.points();
    let lo = x_c - T::of(2.0) * l;
    let hi = x_c + T::of(2.0) * l;
    if lo < x[0] || hi > x[x.len() - 1] {
        return Err(Error::Domain("profile window leaves the mesh".into()));
    }
    let scale = l.powf(T::one() / T::of(f64::from(sigma)));
    let mut k = x.partition_point(|p| *p <= lo).saturating_sub(1);
    let mut worst = T::zero();
    for i in 0..PROFILE_SAMPLES {
        let xi = T::of(-2.0 + 4.0 * i as f64 / (PROFILE_SAMPLES - 1) as f64);
        let pos = x_c + l * xi;
        while k + 2 < x.len() && x[k + 1] < pos {
            k += 1;
        }
        let s = ((pos - x[k]) / (x[k + 1] - x[k])).max(T::zero()).min(T::one());
        let modulus = u[k].norm() * (T::one() - s) + u[k + 1].norm() * s;
        worst = worst.max((scale * modulus - ground_state(sigma, xi)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterEstimate<T> {
    pub x: T,
    /// No unique maximum: the field is flat around the argmax.
    pub degenerate: bool,
}

/// Peak location of `|u|^2` from the parabola through the discrete argmax and
/// its two neighbours; a boundary argmax returns the boundary point.
pub fn blowup_center<T: Scalar>(mesh: &Mesh<T>, u: &[C<T>]) -> Result<CenterEstimate<T>> {
    check_len(mesh.len(), u.len())?;
    if u.is_empty() {
        return Err(Error::Domain("empty field".into()));
    }
    let y: Vec<T> = u.iter().map(|z| z.norm_sqr()).collect();
    let k = (0..y.len()).fold(0, |best, j| if y[j] > y[best] { j } else { best });
    let x = mesh.points();
    if k == 0 || k + 1 == y.len() {
        let flat = y.len() > 1 && y.iter().all(|v| *v == y[k]);
        return Ok(CenterEstimate { x: x[k], degenerate: flat });
    }
    let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
    let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
    // divided differences of the interpolating parabola
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv < T::zero()) {
        return Ok(CenterEstimate { x: x1, degenerate: true });
    }
    let vertex = T::of(0.5) * (x0 + x1) - d01 / (T::of(2.0) * curv);
    Ok(CenterEstimate {
        x: vertex.max(x0).min(x2),
        degenerate: false,
    })
}

/// Every per-step scalar diagnostic of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements<T> {
    pub m_dis: T,
    pub h_dis: T,
    pub m_app: T,
    pub sup_norm: T,
    pub grad_norm: T,
    pub l: T,
    pub a: T,
}

pub fn measure<T: Scalar>(
    mesh: &Mesh<T>,
    u: &[C<T>],
    sigma: u32,
    mode: FocusingMode,
) -> Result<Measurements<T>> {
    let sup = sup_norm(u);
    let grad = grad_norm(mesh, u)?;
    let l = match mode {
        FocusingMode::SupNorm => T::one() / powu(sup, sigma),
        FocusingMode::Gradient => (T::one() / grad).powf(T::of(2.0) / alpha::<T>(sigma)),
    };
    Ok(Measurements {
        m_dis: discrete_mass(mesh, u)?,
        h_dis: discrete_energy(mesh, u, sigma)?,
        m_app: approx_mass_trapezoid(mesh, u)?,
        sup_norm: sup,
        grad_norm: grad,
        l,
        a: a_parameter(mesh, u, sigma)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sampled(mesh: &Mesh<f64>, f: impl Fn(f64) -> C<f64>) -> Vec<C<f64>> {
        mesh.points().iter().map(|x| f(*x)).collect()
    }

    fn q2(mesh: &Mesh<f64>) -> Vec<C<f64>> {
        sampled(mesh, |x| C::new(ground_state(2, x), 0.0))
    }

    #[test]
    fn mass_of_constant_and_zero() {
        let mesh = Mesh::uniform(20.0, 0.05).unwrap();
        let c = C::new(0.6, -0.8);
        let u = vec![c; mesh.len()];
        assert_relative_eq!(discrete_mass(&mesh, &u).unwrap(), 40.05, max_relative = 1e-12);
        assert_relative_eq!(approx_mass_trapezoid(&mesh, &u).unwrap(), 40.0, max_relative = 1e-12);
        let z = vec![C::new(0.0, 0.0); mesh.len()];
        assert_eq!(discrete_mass(&mesh, &z).unwrap(), 0.0);
        assert_eq!(approx_mass_trapezoid(&mesh, &z).unwrap(), 0.0);
        assert_eq!(discrete_energy(&mesh, &z, 2).unwrap(), 0.0);
        assert!(discrete_mass(&mesh, &z[1..]).is_err());
    }

    #[test]
    fn ground_state_mass_and_energy() {
        // int sqrt3 sech(2x) dx = sqrt3 pi / 2; H(Q) = 0 for the critical power
        let oracle = 3f64.sqrt() * std::f64::consts::PI / 2.0;
        let mesh = Mesh::uniform(20.0, 0.05).unwrap();
        let u = q2(&mesh);
        assert!((discrete_mass(&mesh, &u).unwrap() - oracle).abs() < 5e-4);
        assert!((approx_mass_trapezoid(&mesh, &u).unwrap() - oracle).abs() < 5e-4);
        assert!(discrete_energy(&mesh, &u, 2).unwrap().abs() < 5e-3);
    }

    #[test]
    fn energy_of_constant() {
        let mesh = Mesh::uniform(20.0, 0.05).unwrap();
        let u = vec![C::new(0.9, 0.0); mesh.len()];
        let expect = -(0.9f64.powi(6)) / 6.0 * 40.05;
        assert_relative_eq!(discrete_energy(&mesh, &u, 2).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn energy_parts_scale_separately() {
        let mesh = Mesh::uniform(5.0, 0.1).unwrap();
        let u = sampled(&mesh, |x| C::new((-x * x).exp(), 0.3 * x.sin()));
        let lam = 1.7f64;
        let v: Vec<_> = u.iter().map(|z| z * lam).collect();
        let (k1, p1) = energy_parts(&mesh, &u, 2).unwrap();
        let (k2, p2) = energy_parts(&mesh, &v, 2).unwrap();
        assert_relative_eq!(k2, lam.powi(2) * k1, max_relative = 1e-12);
        assert_relative_eq!(p2, lam.powi(6) * p1, max_relative = 1e-12);
        let h1 = discrete_energy(&mesh, &u, 2).unwrap();
        let h2 = discrete_energy(&mesh, &v, 2).unwrap();
        assert!((h2 - lam * lam * h1).abs() > 1e-3);
    }

    #[test]
    fn masses_agree_to_second_order() {
        let gap = |dx: f64| {
            let mesh = Mesh::uniform(3.0, dx).unwrap();
            let u = sampled(&mesh, |x| C::new((x - 0.2).cos() + 1.5, 0.0));
            (discrete_mass(&mesh, &u).unwrap() - approx_mass_trapezoid(&mesh, &u).unwrap()).abs()
        };
        // the difference is the boundary half-cells: proportional to dx
        // for a field that does not vanish, O(dx^2) relative to the mass
        // once multiplied by dx again
        assert!(gap(0.05) < 0.6 * gap(0.1));
    }

    #[test]
    fn error_range_examples() {
        assert_eq!(error_range(&[1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(error_range(&[4.0; 5]).unwrap(), 0.0);
        assert!(matches!(error_range::<f64>(&[]), Err(Error::Domain(_))));
        let (a, b, c) = error_ranges(&[1.0, 2.0], &[0.0], &[5.0, -1.0]).unwrap();
        assert_eq!((a, b, c), (1.0, 0.0, 6.0));
    }

    #[test]
    fn focusing_scale() {
        let mesh = Mesh::uniform(20.0, 0.05).unwrap();
        let u = q2(&mesh);
        assert_relative_eq!(
            focusing_l(&mesh, &u, 2, FocusingMode::SupNorm).unwrap(),
            1.0 / 3f64.sqrt(),
            max_relative = 1e-12
        );
        let ones = vec![C::new(0.0, 1.0); mesh.len()];
        assert_eq!(focusing_l(&mesh, &ones, 3, FocusingMode::SupNorm).unwrap(), 1.0);
        let g = grad_norm(&mesh, &u).unwrap();
        let lg = focusing_l(&mesh, &u, 2, FocusingMode::Gradient).unwrap();
        assert_relative_eq!(lg * g, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn grad_norm_of_ground_state() {
        // int Q'^2 for sigma = 2: Q^2 = sqrt3 sech 2x, Q' = -Q tanh 2x,
        // so int Q^2 tanh^2(2x) = sqrt3 int sech tanh^2 = sqrt3 pi/4
        let mesh = Mesh::uniform(20.0, 0.01).unwrap();
        let g = grad_norm(&mesh, &q2(&mesh)).unwrap();
        let oracle = (3f64.sqrt() * std::f64::consts::PI / 4.0).sqrt();
        assert_relative_eq!(g, oracle, max_relative = 1e-4);
    }

    #[test]
    fn a_parameter_vanishes_for_real_and_rotated_fields() {
        let mesh = Mesh::uniform(10.0, 0.05).unwrap();
        let u = q2(&mesh);
        assert_eq!(a_parameter(&mesh, &u, 2).unwrap(), 0.0);
        let rot = C::new(0.0, 1.3).exp();
        let v: Vec<_> = u.iter().map(|z| z * rot).collect();
        assert!(a_parameter(&mesh, &v, 2).unwrap().abs() < 1e-12);
    }

    fn chirped(mesh: &Mesh<f64>) -> Vec<C<f64>> {
        sampled(mesh, |x| C::new(0.0, -x * x / 4.0).exp() * ground_state(2, x))
    }

    #[test]
    fn a_parameter_grid_refinement() {
        let coarse = Mesh::uniform(12.0, 0.005).unwrap();
        let fine = Mesh::uniform(12.0, 0.0005).unwrap();
        let a = a_parameter(&coarse, &chirped(&coarse), 2).unwrap();
        let oracle = a_parameter(&fine, &chirped(&fine), 2).unwrap();
        assert!(a > 0.0, "a focusing chirp contracts");
        assert_relative_eq!(a, oracle, max_relative = 1e-4);
    }

    #[test]
    fn a_parameter_translation_invariant() {
        let mesh = Mesh::uniform(20.0, 0.02).unwrap();
        let u = chirped(&mesh);
        let shift = 25;
        let mut v = vec![C::new(0.0, 0.0); u.len()];
        v[shift..].copy_from_slice(&u[..u.len() - shift]);
        let a = a_parameter(&mesh, &u, 2).unwrap();
        let b = a_parameter(&mesh, &v, 2).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn rescaled_tau_examples() {
        let tau = rescaled_tau(&[0.1; 5], &[1.0; 5]).unwrap();
        assert_eq!(tau.len(), 6);
        assert_relative_eq!(tau[5], 0.5, max_relative = 1e-15);
        // dt_k = dt0 L_k^2 telescopes to m dt0
        let l: Vec<f64> = (0..100).map(|k| 0.97f64.powi(k)).collect();
        let dt: Vec<f64> = l.iter().map(|x| 0.01 * x * x).collect();
        let tau = rescaled_tau(&dt, &l).unwrap();
        for (m, t) in tau.iter().enumerate() {
            assert_relative_eq!(*t, m as f64 * 0.01, max_relative = 1e-13, epsilon = 1e-15);
        }
        assert!(rescaled_tau(&[0.1], &[0.0]).is_err());
    }

    #[test]
    fn rescaled_tau_matches_dense_integral() {
        // L(t) = sqrt(1 - t) on [0, 0.9]: int dt / (1 - t) = -ln(0.1)
        let n = 20000;
        let h = 0.9 / n as f64;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        let l: Vec<f64> = t.iter().map(|s| (1.0 - s).sqrt()).collect();
        let tau = rescaled_tau(&vec![h; n], &l).unwrap();
        assert_relative_eq!(*tau.last().unwrap(), -(0.1f64).ln(), max_relative = 1e-2);
        assert!(tau.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ground_state_values() {
        assert_relative_eq!(ground_state(2, 0.0), 1.31607, max_relative = 1e-5);
        assert_relative_eq!(ground_state(1, 0.0), 2f64.sqrt(), max_relative = 1e-15);
        let mut prev = ground_state(3, 0.0);
        for k in 1..200 {
            let x = 0.1 * k as f64;
            let q = ground_state(3, x);
            assert!(q <= prev && q > 0.0 || q == 0.0);
            assert_eq!(q, ground_state(3, -x));
            prev = q;
        }
        assert!(ground_state(2, 400.0) < 1e-100);
    }

    #[test]
    fn profile_distance_examples() {
        // identity up to the linear-interpolation error dx^2 max|Q''| / 8
        let mesh = Mesh::uniform(5.0, 0.002).unwrap();
        let u = q2(&mesh);
        assert!(rescaled_profile_distance(&mesh, &u, 2, 0.0, 1.0).unwrap() < 4e-6);
        let two: Vec<_> = u.iter().map(|z| z * 2.0).collect();
        assert_relative_eq!(
            rescaled_profile_distance(&mesh, &two, 2, 0.0, 1.0).unwrap(),
            ground_state(2, 0.0),
            max_relative = 1e-12
        );
        assert!(rescaled_profile_distance(&mesh, &u, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn profile_distance_of_rescaled_ground_state() {
        let (l, xc) = (0.5f64, 0.137);
        let mesh = Mesh::uniform(5.0, 0.01).unwrap();
        let u = sampled(&mesh, |x| C::new(ground_state(2, (x - xc) / l) / l.sqrt(), 0.0));
        assert!(rescaled_profile_distance(&mesh, &u, 2, xc, l).unwrap() < 1e-3);
        let unit = sampled(&mesh, |x| C::new(ground_state(2, x - xc), 0.0));
        assert!(rescaled_profile_distance(&mesh, &unit, 2, xc, 1.0).unwrap() < 1e-3);
    }

    #[test]
    fn center_examples() {
        let mesh = Mesh::uniform(0.6, 0.2).unwrap();
        let u = sampled(&mesh, |x| C::new((1.0 - (x - 0.3) * (x - 0.3)).sqrt(), 0.0));
        let c = blowup_center(&mesh, &u).unwrap();
        assert!((c.x - 0.3).abs() < 1e-12);
        assert!(!c.degenerate);

        let sym = sampled(&mesh, |x| C::new((-x * x).exp(), 0.0));
        assert!(blowup_center(&mesh, &sym).unwrap().x.abs() < 1e-15);

        let flat = vec![C::new(1.0, 0.0); mesh.len()];
        let c = blowup_center(&mesh, &flat).unwrap();
        assert_eq!(c.x, -0.6);
        assert!(c.degenerate);

        let edge = sampled(&mesh, |x| C::new(x + 1.0, 0.0));
        assert_eq!(blowup_center(&mesh, &edge).unwrap().x, mesh.points()[6]);
    }

    #[test]
    fn center_on_non_uniform_mesh() {
        let mesh = Mesh::from_points(vec![-1.0, -0.3, 0.1, 0.25, 0.9]).unwrap();
        let u = sampled(&mesh, |x| C::new((2.0 - (x - 0.17) * (x - 0.17)).sqrt(), 0.0));
        assert!((blowup_center(&mesh, &u).unwrap().x - 0.17).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn a_parameter_phase_invariant(theta in 0.0f64..6.3, c in 0.05f64..0.5) {
            let mesh = Mesh::uniform(8.0, 0.05).unwrap();
            let u = sampled(&mesh, |x| C::new(0.0, -c * x * x).exp() * ground_state(2, x));
            let rot = C::new(0.0, theta).exp();
            let v: Vec<_> = u.iter().map(|z| z * rot).collect();
            let a = a_parameter(&mesh, &u, 2).unwrap();
            let b = a_parameter(&mesh, &v, 2).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }
}
