//! Regression fits for blow-up rates and the contraction-rate correction.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    check_len(x.len(), y.len())?;
    let n = x.len();
    if n < 2 {
        return Err(Error::FitRefused(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::FitRefused("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Estimated blow-up time.
    pub t_blowup: f64,
    /// `T - t_ref`, with `t_ref` the time the remaining-time values are
    /// measured from (the last sample for [`fit_blowup_rate`]).
    pub gap: f64,
    /// Exponent `p` in `L ~ (T - t)^p`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `ln L` at the optimum.
    pub residual: f64,
}

pub const MIN_RATE_SAMPLES: usize = 20;
pub const MIN_RATE_DECADES: f64 = 3.0;

/// Fits `ln L = c + p ln(T - t)` for `L(t)` sampled at times `t`.
pub fn fit_blowup_rate(t: &[f64], l: &[f64]) -> Result<RateFit> {
    check_len(t.len(), l.len())?;
    let t_last = *t
        .last()
        .ok_or_else(|| Error::FitRefused("empty series".into()))?;
    let remaining: Vec<f64> = t.iter().map(|s| t_last - s).collect();
    fit_blowup_rate_remaining(&remaining, l, t_last)
}

/// As [`fit_blowup_rate`], with the times given as `t_last - t_i` (which a
/// driver can accumulate more accurately than the difference of absolute
/// times) for a reference time `t_ref`, which is only used to report `T`.
///
/// `T - t_last` is found by a logarithmic scan around the estimate from
/// extrapolating `L^2` linearly through the last two samples, followed by a
/// golden-section search on the least-squares residual.
pub fn fit_blowup_rate_remaining(remaining: &[f64], l: &[f64], t_ref: f64) -> Result<RateFit> {
    check_len(remaining.len(), l.len())?;
    let n = l.len();
    if n < MIN_RATE_SAMPLES {
        return Err(Error::FitRefused(format!(
            "need at least {MIN_RATE_SAMPLES} samples, got {n}"
        )));
    }
    if l.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::FitRefused("L must be positive and finite".into()));
    }
    if remaining.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::FitRefused("times must be non-decreasing".into()));
    }
    let lmax = l.iter().cloned().fold(f64::MIN, f64::max);
    let lmin = l.iter().cloned().fold(f64::MAX, f64::min);
    if (lmax / lmin).log10() < MIN_RATE_DECADES || l[n - 1] >= l[0] {
        return Err(Error::FitRefused(format!(
            "L decreases by {:.2} decades, need {MIN_RATE_DECADES}",
            (l[0] / l[n - 1]).max(1.0).log10()
        )));
    }
    let shift = remaining[n - 1];
    let s: Vec<f64> = remaining.iter().map(|v| v - shift).collect();
    let log_l: Vec<f64> = l.iter().map(|v| v.ln()).collect();

    let i = (0..n - 1)
        .rev()
        .find(|&i| s[i] > 0.0)
        .ok_or_else(|| Error::FitRefused("all samples at the same time".into()))?;
    let (l1, l2) = (l[i] * l[i], l[n - 1] * l[n - 1]);
    let guess = if l1 > l2 {
        l2 * s[i] / (l1 - l2)
    } else {
        s[i]
    };
    let objective = |log_gap: f64| -> f64 {
        let gap = log_gap.exp();
        let x: Vec<f64> = s.iter().map(|v| (v + gap).ln()).collect();
        match linear_fit(&x, &log_l) {
            Ok(f) => x
                .iter()
                .zip(&log_l)
                .map(|(a, b)| (b - f.intercept - f.slope * a).powi(2))
                .sum::<f64>(),
            Err(_) => f64::INFINITY,
        }
    };

    let lo = (guess * 1e-6).ln();
    let hi = (guess * 1e3).ln();
    let scan = 241;
    let grid: Vec<f64> = (0..scan)
        .map(|k| lo + (hi - lo) * k as f64 / (scan - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|g| objective(*g)).collect();
    let best = (0..scan)
        .min_by(|a, b| values[*a].total_cmp(&values[*b]))
        .expect("non-empty scan");
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(scan - 1)];

    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    let gap = (0.5 * (a + b)).exp();
    let x: Vec<f64> = s.iter().map(|v| (v + gap).ln()).collect();
    let fit = linear_fit(&x, &log_l)?;
    let residual = (objective(gap.ln()) / n as f64).sqrt();
    Ok(RateFit {
        t_blowup: t_ref + (gap - shift),
        gap: gap - shift,
        slope: fit.slope,
        intercept: fit.intercept,
        residual,
    })
}

/// Least squares of `a` against `1 / ln tau` over the last decade of `tau`
/// (`tau in [tau_last / 10, tau_last]`).
pub fn fit_a_correction(tau: &[f64], a: &[f64]) -> Result<LinearFit> {
    check_len(tau.len(), a.len())?;
    let tau_last = tau
        .iter()
        .cloned()
        .fold(f64::NAN, f64::max);
    if !(tau_last > 10.0) {
        return Err(Error::FitRefused(format!(
            "rescaled time must exceed 10 for a decade above tau = 1, got {tau_last}"
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = tau
        .iter()
        .zip(a)
        .filter(|(t, _)| **t >= tau_last / 10.0 && **t > 1.0)
        .map(|(t, v)| (1.0 / t.ln(), *v))
        .unzip();
    linear_fit(&x, &y)
}

/// Contraction rate implied by the `L` series: `-d ln L / d tau`, averaged
/// over the last decade of `tau`.
pub fn a_from_scale(tau: &[f64], l: &[f64]) -> Result<f64> {
    check_len(tau.len(), l.len())?;
    let n = tau.len();
    if n < 2 {
        return Err(Error::FitRefused("need at least 2 samples".into()));
    }
    let tau_last = tau[n - 1];
    let start = tau
        .iter()
        .position(|t| *t >= tau_last / 10.0)
        .unwrap_or(0)
        .min(n - 2);
    let dt = tau_last - tau[start];
    if !(dt > 0.0) {
        return Err(Error::FitRefused("rescaled time does not advance".into()));
    }
    Ok(-(l[n - 1].ln() - l[start].ln()) / dt)
}

/// `r(t) = ||u||_inf (2 a (T - t))^{1/(2 sigma)}`; tends to 1 for
/// self-similar supercritical blow-up.
pub fn supercritical_rate_check(
    t: &[f64],
    sup: &[f64],
    a_limit: f64,
    t_blowup: f64,
    sigma: u32,
) -> Result<Vec<f64>> {
    let remaining: Vec<f64> = t.iter().map(|s| t_blowup - s).collect();
    supercritical_ratio(&remaining, sup, a_limit, sigma)
}

/// As [`supercritical_rate_check`] with `T - t` supplied directly.
pub fn supercritical_ratio(until_blowup: &[f64], sup: &[f64], a_limit: f64, sigma: u32) -> Result<Vec<f64>> {
    check_len(until_blowup.len(), sup.len())?;
    if !(a_limit > 0.0) {
        return Err(Error::Domain(format!("a_limit must be positive, got {a_limit}")));
    }
    let p = 1.0 / (2.0 * f64::from(sigma));
    Ok(until_blowup
        .iter()
        .zip(sup)
        .map(|(d, s)| s * (2.0 * a_limit * d).powf(p))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power_law(t_end: f64, p: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
        // log-spaced distances to blow-up from 10 down to 1e-9
        let t: Vec<f64> = (0..120)
            .map(|k| t_end - 10f64.powf(1.0 - 10.0 * k as f64 / 119.0))
            .collect();
        let l = t.iter().map(|s| c * (t_end - s).powf(p)).collect();
        (t, l)
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 2.0);
        assert_relative_eq!(f.intercept, 1.0);
        assert_relative_eq!(f.r2, 1.0);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn square_root_law() {
        let (t, l) = power_law(1.0, 0.5, 2f64.sqrt());
        let f = fit_blowup_rate(&t, &l).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6, "{f:?}");
        assert!((f.t_blowup - 1.0).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn other_exponent() {
        let (t, l) = power_law(1.0, 0.6, 1.0);
        let f = fit_blowup_rate(&t, &l).unwrap();
        assert!((f.slope - 0.6).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn refuses_short_or_flat_series() {
        assert!(matches!(fit_blowup_rate(&[], &[]), Err(Error::FitRefused(_))));
        let t: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let flat = vec![0.3; 50];
        assert!(matches!(fit_blowup_rate(&t, &flat), Err(Error::FitRefused(_))));
        let (t, l) = power_law(1.0, 0.5, 1.0);
        assert!(matches!(fit_blowup_rate(&t[..10], &l[..10]), Err(Error::FitRefused(_))));
    }

    #[test]
    fn a_correction_synthetic() {
        let tau: Vec<f64> = (1..=2000).map(|k| k as f64).collect();
        let a: Vec<f64> = tau.iter().map(|t| 1.7 / t.ln()).collect();
        let f = fit_a_correction(&tau, &a).unwrap();
        assert_relative_eq!(f.slope, 1.7, max_relative = 1e-9);
        assert!(f.intercept.abs() < 1e-3);
        let flat = vec![0.4; tau.len()];
        let f = fit_a_correction(&tau, &flat).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_relative_eq!(f.intercept, 0.4, max_relative = 1e-12);
    }

    #[test]
    fn a_from_exponential_scale() {
        let tau: Vec<f64> = (0..500).map(|k| 0.1 * k as f64).collect();
        let l: Vec<f64> = tau.iter().map(|t| (-0.3 * t).exp()).collect();
        assert_relative_eq!(a_from_scale(&tau, &l).unwrap(), 0.3, max_relative = 1e-12);
    }

    #[test]
    fn supercritical_ratio_examples() {
        let (a, t_b, sigma) = (0.4, 2.0, 3);
        let t: Vec<f64> = (0..100).map(|k| t_b - 10f64.powf(-0.05 * k as f64)).collect();
        let sup: Vec<f64> = t
            .iter()
            .map(|s| (2.0 * a * (t_b - s)).powf(-1.0 / (2.0 * sigma as f64)))
            .collect();
        for r in supercritical_rate_check(&t, &sup, a, t_b, sigma).unwrap() {
            assert!((r - 1.0).abs() < 1e-12);
        }
        let noisy: Vec<f64> = sup
            .iter()
            .enumerate()
            .map(|(k, s)| s * (1.0 + 0.01 * ((k as f64) * 1.3).sin()))
            .collect();
        for r in supercritical_rate_check(&t, &noisy, a, t_b, sigma).unwrap() {
            assert!((0.98..=1.02).contains(&r));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn recovers_power_laws(p in 0.3f64..0.8, t_end in 0.5f64..5.0, c in 0.2f64..3.0) {
            let (t, l) = power_law(t_end, p, c);
            let f = fit_blowup_rate(&t, &l).unwrap();
            prop_assert!((f.slope - p).abs() < 1e-3);
            prop_assert!((f.t_blowup - t_end).abs() < 1e-3);
        }
    }
}
