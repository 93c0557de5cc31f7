use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::detector::ButterworthShape;
use crate::dsp::Spectrum;
use crate::error::{Error, Result};

/// Starting values of `p` tried by [`fit_butterworth`].
pub const P_STARTS: [f64; 3] = [0.8, SQRT_2, 1.8];

const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ButterworthFit {
    pub shape: ButterworthShape,
    /// Multiplies the unit-DC-gain response.
    pub scale: f64,
    pub r_squared: f64,
    /// `data - model` at each fitted frequency.
    pub residuals: Vec<f64>,
    pub freqs: Vec<f64>,
}

impl ButterworthFit {
    pub fn model(&self, f: f64) -> f64 {
        self.scale * self.shape.gain(f)
    }
}

/// Model value and gradient with respect to `(p, ln f_star, scale)`.
fn model_and_grad(theta: &[f64; 3], f: f64) -> (f64, [f64; 3]) {
    let [p, ln_fs, scale] = *theta;
    let x2 = (f / ln_fs.exp()).powi(2);
    let d = 1.0 + (p * p - 2.0) * x2 + x2 * x2;
    let g = 1.0 / d;
    let g2 = g * g;
    let dg_dp = -g2 * 2.0 * p * x2;
    let dg_dln = g2 * (2.0 * x2 * (p * p - 2.0) + 4.0 * x2 * x2);
    (scale * g, [scale * dg_dp, scale * dg_dln, g])
}

fn sum_sq_residuals(theta: &[f64; 3], f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(&fi, &yi)| (yi - model_and_grad(theta, fi).0).powi(2)).sum()
}

/// Solves a 3x3 system by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let k = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= k * a[col][c];
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg-Marquardt with Marquardt's diagonal scaling.
fn levenberg_marquardt(start: [f64; 3], f: &[f64], y: &[f64]) -> ([f64; 3], f64) {
    let mut theta = start;
    let mut cost = sum_sq_residuals(&theta, f, y);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&fi, &yi) in f.iter().zip(y) {
            let (m, g) = model_and_grad(&theta, fi);
            let r = yi - m;
            for i in 0..3 {
                jtr[i] += g[i] * r;
                for j in 0..3 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-30);
            }
            let Some(step) = solve3(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            let trial_cost = sum_sq_residuals(&trial, f, y);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                theta = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (theta, cost)
}

/// First frequency where the data fall below half of their low-frequency
/// level, or the last frequency if they never do.
fn half_power_crossing(f: &[f64], y: &[f64]) -> f64 {
    let head = (f.len() / 20).max(1);
    let plateau = y[..head].iter().sum::<f64>() / head as f64;
    f.iter().zip(y).find(|(_, &v)| v < 0.5 * plateau).map_or(f[f.len() - 1], |(&fi, _)| fi)
}

/// Least-squares fit of `scale / (1 + (p^2 - 2) x^2 + x^4)`, `x = f / f_star`,
/// to a normalized gain spectrum. Bins at zero frequency are skipped.
pub fn fit_butterworth(corrected_gain: &Spectrum) -> Result<ButterworthFit> {
    let (f, y): (Vec<f64>, Vec<f64>) = corrected_gain
        .freqs
        .iter()
        .zip(&corrected_gain.psd)
        .filter(|(fi, _)| **fi > 0.0)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if f.len() < 4 {
        return Err(Error::DegenerateInput(format!("need at least 4 positive-frequency bins, got {}", f.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("gain spectrum contains non-finite values".into()));
    }
    let head = (f.len() / 20).max(1);
    let plateau = y[..head].iter().sum::<f64>() / head as f64;
    if !(plateau > 0.0) {
        return Err(Error::DegenerateInput("gain spectrum has no positive low-frequency plateau".into()));
    }
    let f_cross = half_power_crossing(&f, &y);

    let mut best: Option<([f64; 3], f64)> = None;
    for p0 in P_STARTS {
        let (theta, cost) = levenberg_marquardt([p0, f_cross.ln(), plateau], &f, &y);
        if theta.iter().all(|v| v.is_finite()) && best.is_none_or(|(_, c)| cost < c) {
            best = Some((theta, cost));
        }
    }
    let Some((theta, cost)) = best else {
        return Err(Error::FitDiverged(format!(
            "no start converged (starts p={P_STARTS:?}, f_star={f_cross:e} Hz, scale={plateau:e})"
        )));
    };
    let shape = ButterworthShape::new(theta[0].abs(), theta[1].exp()).map_err(|e| {
        Error::FitDiverged(format!("fit left the valid region (p={}, f_star={}): {e}", theta[0], theta[1].exp()))
    })?;
    if !(theta[2] > 0.0) {
        return Err(Error::FitDiverged(format!("fitted scale {} is not positive", theta[2])));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - cost / sst).clamp(0.0, 1.0) } else { 1.0 };
    let residuals = f.iter().zip(&y).map(|(&fi, &yi)| yi - theta[2] * shape.gain(fi)).collect();
    Ok(ButterworthFit { shape, scale: theta[2], r_squared, residuals, freqs: f })
}

/// -3 dB readings of a fitted response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    /// Hz; half power relative to the zero-frequency gain.
    pub relative_to_dc: f64,
    /// Hz; half power relative to the peak, when the response peaks above DC.
    pub relative_to_peak: Option<f64>,
    /// `relative_to_dc` under the other unit reading of the corner: the
    /// bandwidth obtained if the angular corner `2 pi f_star` were taken as a
    /// frequency in Hz.
    pub omega_read_as_hz: f64,
}

/// Smallest `f > 0` with `gain(f) = level`, above the response peak.
fn crossing(shape: &ButterworthShape, level: f64) -> Result<f64> {
    let mut lo = shape.peak_frequency();
    if shape.gain(lo) < level {
        lo = 0.0;
    }
    let mut hi = shape.f_star.max(lo) * 2.0;
    while shape.gain(hi) >= level {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi > shape.f_star * 1e12 {
            return Err(Error::NoCrossing);
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if shape.gain(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Half-power frequency relative to the fitted DC gain, in Hz.
pub fn bandwidth_3db(fit: &ButterworthFit) -> Result<f64> {
    crossing(&fit.shape, 0.5)
}

/// All -3 dB readings of a response, including the peak-relative one and the
/// value under the other unit reading of the corner.
pub fn bandwidth_details(shape: &ButterworthShape) -> Result<Bandwidth> {
    let relative_to_dc = crossing(shape, 0.5)?;
    let peak = shape.peak_gain();
    let relative_to_peak = if peak > 1.0 { Some(crossing(shape, 0.5 * peak)?) } else { None };
    Ok(Bandwidth { relative_to_dc, relative_to_peak, omega_read_as_hz: relative_to_dc * 2.0 * PI })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SpectrumUnits;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn spectrum(f: Vec<f64>, y: Vec<f64>) -> Spectrum {
        Spectrum::new(f, y, 1e5, 1e5, 1, SpectrumUnits::V2PerHz).unwrap()
    }

    fn grid() -> Vec<f64> {
        (1..=800).map(|k| k as f64 * 50e3).collect()
    }

    #[test]
    fn noiseless_recovery() {
        let truth = ButterworthShape::new(1.12, 9.708e6).unwrap();
        let f = grid();
        let y = f.iter().map(|&x| 0.97 * truth.gain(x)).collect();
        let fit = fit_butterworth(&spectrum(f, y)).unwrap();
        assert!((fit.shape.p / 1.12 - 1.0).abs() < 1e-3, "{:?}", fit.shape);
        assert!((fit.shape.f_star / 9.708e6 - 1.0).abs() < 1e-3);
        assert!((fit.scale - 0.97).abs() < 1e-3);
        assert!(fit.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn noisy_recovery_over_seeds() {
        let truth = ButterworthShape::new(1.12, 9.708e6).unwrap();
        let f = grid();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = f.iter().map(|&x| truth.gain(x) * (1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal))).collect();
            let fit = fit_butterworth(&spectrum(f.clone(), y)).unwrap();
            assert!((fit.shape.p - 1.12).abs() < 0.05, "seed {seed}: {:?}", fit.shape);
            assert!((fit.shape.f_star / 9.708e6 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn flat_response_bandwidth_is_f_star() {
        let b = bandwidth_details(&ButterworthShape::flat(61e6)).unwrap();
        assert!((b.relative_to_dc / 61e6 - 1.0).abs() < 1e-6);
        assert!(b.relative_to_peak.is_none());
    }

    #[test]
    fn peaked_response_bandwidths() {
        // x at half power: x^2 solves x^4 + (p^2 - 2) x^2 - 1 = 0
        let p: f64 = 1.12;
        let b2 = 2.0 - p * p;
        let x = ((b2 + (b2 * b2 + 4.0).sqrt()) / 2.0).sqrt();
        let f_star = 61e6 / (2.0 * PI);
        let b = bandwidth_details(&ButterworthShape::new(p, f_star).unwrap()).unwrap();
        assert!((b.relative_to_dc / (x * f_star) - 1.0).abs() < 1e-6);
        assert!((b.relative_to_dc / 11.650e6 - 1.0).abs() < 1e-3);
        assert!((b.omega_read_as_hz / 73.20e6 - 1.0).abs() < 1e-3);
        let peak = b.relative_to_peak.unwrap();
        assert!(peak < b.relative_to_dc);
        assert!((peak / (1.1404875 * f_star) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn too_short_input() {
        let s = spectrum(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]);
        assert!(fit_butterworth(&s).is_err());
    }

    proptest! {
        #[test]
        fn maximally_flat_crossing_over_three_decades(exp in 5.0f64..8.0) {
            let fs = 10f64.powf(exp);
            let shape = ButterworthShape::flat(fs);
            let fit = ButterworthFit { shape, scale: 1.0, r_squared: 1.0, residuals: vec![], freqs: vec![] };
            prop_assert!((bandwidth_3db(&fit).unwrap() / fs - 1.0).abs() < 1e-3);
        }
    }
}
