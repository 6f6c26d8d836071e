use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased (`n - 1`) variance.
    pub variance: f64,
    /// Adjusted Fisher–Pearson skewness `G1`; needs `n >= 3` and positive variance.
    pub skewness: Option<f64>,
    /// Bias-corrected excess kurtosis `G2`; needs `n >= 4` and positive variance.
    pub excess_kurtosis: Option<f64>,
}

/// Mean, variance, skewness and excess kurtosis with the standard
/// small-sample corrections.
pub fn center_statistics(sample: &[f64]) -> Result<SampleMoments> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 values, got {n}")));
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in sample {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let skewness = (n >= 3 && m2 > 0.0).then(|| {
        let g1 = m3 / m2.powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    });
    let excess_kurtosis = (n >= 4 && m2 > 0.0).then(|| {
        let g2 = m4 / (m2 * m2) - 3.0;
        ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0))
    });
    Ok(SampleMoments {
        n,
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}
