use serde::{Deserialize, Serialize};

use crate::constants::ideal_responsivity;
use crate::detector::DetectorModel;
use crate::error::{Error, Result};

/// Ordinary least-squares line with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Indices into the caller's arrays left out of the fit.
    pub excluded_points: Vec<usize>,
    /// Whether the included points look like noise power linear in LO power.
    pub shot_noise_limited: bool,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// OLS of `y` on `x`. Standard errors come from the residual variance with
/// `n - 2` degrees of freedom (zero for two points).
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DegenerateInput("x and y differ in length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateInput("need at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateInput("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let sst: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = ssr / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        intercept_stderr,
        excluded_points: Vec::new(),
        shot_noise_limited: false,
    })
}

/// Total efficiency from a DC-voltage sweep with one arm illuminated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFit {
    pub eta_total: f64,
    pub stderr: f64,
    pub fit: LinearFit,
}

/// `eta = |dV/dP| / (R_ideal R_f)` with `R_ideal = lambda q / h c`.
///
/// `powers` are the optical powers on the illuminated photodiode.
pub fn fit_dc_efficiency(
    powers: &[f64],
    dc_volts: &[f64],
    model: &DetectorModel,
    wavelength: f64,
) -> Result<EfficiencyFit> {
    if powers.len() < 3 {
        return Err(Error::DegenerateInput(format!("need at least 3 points, got {}", powers.len())));
    }
    let min = powers.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::DegenerateInput("all powers coincide".into()));
    }
    if min > 0.0 && max < 2.0 * min {
        return Err(Error::DegenerateInput(format!("powers span {:.3}x, need at least 2x", max / min)));
    }
    let fit = ols(powers, dc_volts)?;
    let k = ideal_responsivity(wavelength) * model.feedback.gain_resistor;
    Ok(EfficiencyFit { eta_total: fit.slope.abs() / k, stderr: fit.slope_stderr / k, fit })
}

/// How [`fit_linearity`] decides a point has left the linear regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearityPolicy {
    /// Largest accepted `|y - prediction| / |prediction|`.
    pub threshold: f64,
    /// Smallest r^2 still called shot-noise limited.
    pub min_r_squared: f64,
    /// Largest accepted `|k - 1|` for the log-log power-law exponent `k`.
    pub max_exponent_error: f64,
}

impl Default for LinearityPolicy {
    fn default() -> Self {
        LinearityPolicy { threshold: 0.05, min_r_squared: 0.99, max_exponent_error: 0.25 }
    }
}

/// Linear fit of noise variance against LO power, excluding saturated points.
///
/// Fits the lower-power half, then walks up in power, accepting each point
/// whose deviation from the current fit's prediction is below the policy
/// threshold and refitting after each acceptance. The first rejected point
/// and everything above it are excluded.
pub fn fit_linearity(powers: &[f64], variances: &[f64], policy: &LinearityPolicy) -> Result<LinearFit> {
    if powers.len() != variances.len() {
        return Err(Error::DegenerateInput("powers and variances differ in length".into()));
    }
    if powers.len() < 5 {
        return Err(Error::DegenerateInput(format!("need at least 5 points, got {}", powers.len())));
    }
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by(|&a, &b| powers[a].total_cmp(&powers[b]));

    let mut included: Vec<usize> = order[..powers.len().div_ceil(2)].to_vec();
    let refit = |idx: &[usize]| {
        let x: Vec<f64> = idx.iter().map(|&i| powers[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| variances[i]).collect();
        ols(&x, &y)
    };
    let mut fit = refit(&included)?;
    let mut excluded = Vec::new();
    for (pos, &i) in order.iter().enumerate().skip(included.len()) {
        let predicted = fit.predict(powers[i]);
        let deviation = ((variances[i] - predicted) / predicted).abs();
        if deviation < policy.threshold {
            included.push(i);
            fit = refit(&included)?;
        } else {
            excluded.extend_from_slice(&order[pos..]);
            break;
        }
    }
    excluded.sort_unstable();

    let exponent = power_law_exponent(&included, powers, variances);
    fit.shot_noise_limited =
        fit.r_squared >= policy.min_r_squared && exponent.is_none_or(|k| (k - 1.0).abs() <= policy.max_exponent_error);
    fit.excluded_points = excluded;
    Ok(fit)
}

/// Log-log slope over the given points; `None` if any value is nonpositive.
fn power_law_exponent(idx: &[usize], x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        idx.iter().map(|&i| (x[i], y[i])).filter(|(a, b)| *a > 0.0 && *b > 0.0).map(|(a, b)| (a.ln(), b.ln())).unzip();
    if lx.len() != idx.len() {
        return None;
    }
    ols(&lx, &ly).ok().map(|f| f.slope)
}

/// Lowest power excluded by the linearity policy, or `f64::INFINITY` when
/// every point is accepted.
pub fn detect_saturation(powers: &[f64], variances: &[f64], policy: &LinearityPolicy) -> Result<f64> {
    let fit = fit_linearity(powers, variances, policy)?;
    Ok(fit.excluded_points.iter().map(|&i| powers[i]).fold(f64::INFINITY, f64::min))
}
