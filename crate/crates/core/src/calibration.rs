//! Per-adapter activation-norm statistics and z-scoring.
//!
//! Shared-A libraries produce activation norms on wildly different scales
//! per adapter, which biases raw-norm routing toward whichever adapter
//! happens to run hot. Calibration estimates the mean and standard
//! deviation of each adapter's raw score over that adapter's own data, so
//! scoring can compare `(raw - mu_i) / sigma_i` across adapters instead.

use serde::{Deserialize, Serialize};

use crate::adapter::LibraryBundle;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::routing::{self, Method};

/// Lower bound applied to every sigma so constant-norm adapters cannot
/// blow up the division.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Per-adapter norm statistics `(mu_i, sigma_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl CalibrationStats {
    /// Identity stats (mu = 0, sigma = 1): z-scoring with these returns
    /// raw scores unchanged.
    pub fn identity(n: usize) -> Self {
        Self {
            mu: vec![0.0; n],
            sigma: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Estimates `(mu_i, sigma_i)` for every adapter from its own samples.
///
/// `samples[i]` holds the calibration vectors associated with adapter `i`;
/// each needs at least two so the sample standard deviation (divisor
/// count-1) is defined. Sigma is floored at [`SIGMA_FLOOR`].
pub fn calibrate(
    bundle: &LibraryBundle,
    method: Method,
    samples: &[Vec<Vector>],
) -> Result<CalibrationStats> {
    match method {
        Method::Naive | Method::Spectr | Method::Seqr => {}
        other => return Err(Error::NotCalibratable(other.as_str())),
    }
    let n = bundle.library.n_adapters();
    if samples.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: samples.len(),
        });
    }

    let mut mu = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for (i, adapter_samples) in samples.iter().enumerate() {
        if adapter_samples.len() < 2 {
            return Err(Error::TooFewSamples {
                adapter: i,
                got: adapter_samples.len(),
            });
        }
        let mut raws = Vec::with_capacity(adapter_samples.len());
        for x in adapter_samples {
            raws.push(routing::raw_score_adapter(bundle, method, i, x)?);
        }
        let (m, s) = mean_std(&raws);
        mu.push(m);
        sigma.push(s.max(SIGMA_FLOOR));
    }
    Ok(CalibrationStats { mu, sigma })
}

/// Elementwise `(raw_i - mu_i) / sigma_i`.
pub fn zscore(raw: &[f64], stats: &CalibrationStats) -> Result<Vec<f64>> {
    if raw.len() != stats.mu.len() || stats.mu.len() != stats.sigma.len() {
        return Err(Error::LengthMismatch {
            left: raw.len(),
            right: stats.mu.len(),
        });
    }
    Ok(raw
        .iter()
        .zip(stats.mu.iter().zip(&stats.sigma))
        .map(|(r, (m, s))| (r - m) / s)
        .collect())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, var.sqrt())
}
