//! Spectrum-analyser emulation.
//!
//! [`estimate_psd`] is an averaged Hann-window periodogram with 50 % overlap.
//! The segment length is the smallest power of two giving a bin spacing of
//! at most `rbw / 2`; the window's noise bandwidth is divided out, so a
//! white input of density `s` reads back `s` in every bin.
//!
//! The video filter is a zero-phase single-pole smoother run across bins in
//! sweep order. With the analyser's sweep time auto-coupled
//! (`T = k span / (rbw * min(rbw, vbw))`, `k = 2.5`) the dwell per bin is
//! `k df / (rbw vbw)`, so the smoothing per bin depends only on `df / rbw`
//! once `vbw < rbw`, and it is off for `vbw >= rbw`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{parse_f64, TimeTrace};

/// Sweep-time coupling factor used by the video-filter emulation.
const SWEEP_TIME_FACTOR: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumUnits {
    V2PerHz,
    /// Analyser power in the resolution bandwidth, dBm.
    DbmInRbw,
}

impl fmt::Display for SpectrumUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumUnits::V2PerHz => "v2_per_hz",
            SpectrumUnits::DbmInRbw => "dbm_in_rbw",
        })
    }
}

impl FromStr for SpectrumUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v2_per_hz" => Ok(SpectrumUnits::V2PerHz),
            "dbm_in_rbw" => Ok(SpectrumUnits::DbmInRbw),
            other => Err(Error::Config(format!("unknown spectrum units '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz, strictly increasing.
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    /// Hz
    pub rbw: f64,
    /// Hz
    pub vbw: f64,
    pub n_averages: usize,
    pub units: SpectrumUnits,
}

impl Spectrum {
    pub fn new(
        freqs: Vec<f64>,
        psd: Vec<f64>,
        rbw: f64,
        vbw: f64,
        n_averages: usize,
        units: SpectrumUnits,
    ) -> Result<Self> {
        if freqs.len() != psd.len() || freqs.is_empty() {
            return Err(Error::Config("spectrum needs equal-length, nonempty arrays".into()));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("spectrum frequencies must be strictly increasing".into()));
        }
        if !(rbw > 0.0) {
            return Err(Error::Config(format!("rbw must be positive, got {rbw}")));
        }
        Ok(Spectrum { freqs, psd, rbw, vbw, n_averages, units })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    fn with_psd(&self, psd: Vec<f64>) -> Spectrum {
        Spectrum { psd, ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Spectrum {
        self.with_psd(self.freqs.iter().zip(&self.psd).map(|(&x, &y)| f(x, y)).collect())
    }

    pub fn scale(&self, k: f64) -> Spectrum {
        self.map(|_, y| k * y)
    }

    /// Bin-wise `self - other`; both must share the frequency grid.
    pub fn subtract(&self, other: &Spectrum) -> Result<Spectrum> {
        self.check_grid(other)?;
        Ok(self.with_psd(self.psd.iter().zip(&other.psd).map(|(a, b)| a - b).collect()))
    }

    fn check_grid(&self, other: &Spectrum) -> Result<()> {
        let same = self.freqs.len() == other.freqs.len()
            && self.freqs.iter().zip(&other.freqs).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
        if same {
            Ok(())
        } else {
            Err(Error::Config("spectra are on different frequency grids".into()))
        }
    }

    /// Power in `rbw` from a V^2/Hz density, `2 S rbw / R_imp`, as dBm.
    pub fn to_dbm(&self, impedance: f64) -> Result<Spectrum> {
        match self.units {
            SpectrumUnits::DbmInRbw => Ok(self.clone()),
            SpectrumUnits::V2PerHz => {
                let rbw = self.rbw;
                let mut out = self.map(|_, s| 10.0 * (2.0 * s * rbw / impedance / 1e-3).log10());
                out.units = SpectrumUnits::DbmInRbw;
                Ok(out)
            }
        }
    }

    pub fn to_v2_per_hz(&self, impedance: f64) -> Spectrum {
        match self.units {
            SpectrumUnits::V2PerHz => self.clone(),
            SpectrumUnits::DbmInRbw => {
                let rbw = self.rbw;
                let mut out = self.map(|_, dbm| 1e-3 * 10f64.powf(dbm / 10.0) * impedance / (2.0 * rbw));
                out.units = SpectrumUnits::V2PerHz;
                out
            }
        }
    }

    /// Linear interpolation at `f`.
    pub fn value_at(&self, f: f64) -> Result<f64> {
        let (min, max) = (self.freqs[0], self.freqs[self.len() - 1]);
        if !(f >= min && f <= max) {
            return Err(Error::BandOutOfRange { lo: f, hi: f, min, max });
        }
        let i = self.freqs.partition_point(|&x| x <= f).min(self.len() - 1);
        if i == 0 {
            return Ok(self.psd[0]);
        }
        let (x0, x1) = (self.freqs[i - 1], self.freqs[i]);
        if f >= x1 {
            return Ok(self.psd[i]);
        }
        let t = (f - x0) / (x1 - x0);
        Ok(self.psd[i - 1] + t * (self.psd[i] - self.psd[i - 1]))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rbw={:e} vbw={:e} n_averages={} units={}", self.rbw, self.vbw, self.n_averages, self.units)?;
        for (f, s) in self.freqs.iter().zip(&self.psd) {
            writeln!(w, "{f:e} {s:e}")?;
        }
        Ok(())
    }

    /// Reads the two-column format. Columns may be separated by whitespace
    /// or commas; `vbw` defaults to `rbw` and `n_averages` to 1.
    pub fn read_from<R: BufRead>(r: R) -> Result<Spectrum> {
        let (mut rbw, mut vbw, mut n_avg, mut units) = (None, None, None, None);
        let (mut freqs, mut psd) = (Vec::new(), Vec::new());
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(header) = t.strip_prefix('#') {
                for token in header.split_whitespace() {
                    let Some((k, v)) = token.split_once('=') else { continue };
                    match k {
                        "rbw" => rbw = Some(parse_f64(v, lineno)?),
                        "vbw" => vbw = Some(parse_f64(v, lineno)?),
                        "n_averages" => {
                            n_avg = Some(v.parse::<usize>().map_err(|e| Error::parse(lineno, e.to_string()))?)
                        }
                        "units" => units = Some(v.parse::<SpectrumUnits>()?),
                        _ => {}
                    }
                }
                continue;
            }
            let mut cols = t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let (Some(f), Some(s)) = (cols.next(), cols.next()) else {
                return Err(Error::parse(lineno, "expected two columns"));
            };
            freqs.push(parse_f64(f, lineno)?);
            psd.push(parse_f64(s, lineno)?);
        }
        let rbw = rbw.ok_or_else(|| Error::parse(1, "missing rbw in header"))?;
        let units = units.ok_or_else(|| Error::parse(1, "missing units in header"))?;
        Spectrum::new(freqs, psd, rbw, vbw.unwrap_or(rbw), n_avg.unwrap_or(1), units)
    }
}

/// Segment length used by [`estimate_psd`] for a given sample rate and RBW.
pub fn segment_length(sample_rate: f64, rbw: f64) -> usize {
    ((2.0 * sample_rate / rbw).ceil() as usize).next_power_of_two()
}

/// Samples needed for `n_averages` half-overlapping segments.
pub fn samples_needed(sample_rate: f64, rbw: f64, n_averages: usize) -> usize {
    let n = segment_length(sample_rate, rbw);
    n + n_averages.saturating_sub(1) * (n / 2)
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

pub fn estimate_psd(trace: &TimeTrace, rbw: f64, vbw: f64, n_averages: usize) -> Result<Spectrum> {
    if !(rbw > 0.0) || n_averages == 0 {
        return Err(Error::Config("rbw and n_averages must be positive".into()));
    }
    let fs = trace.sample_rate();
    let n = segment_length(fs, rbw);
    let needed = samples_needed(fs, rbw, n_averages);
    if trace.len() < needed {
        return Err(Error::InsufficientData { needed, available: trace.len() });
    }
    let window = hann(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let hop = n / 2;
    let samples = trace.samples();

    let periodograms: Vec<Vec<f64>> = (0..n_averages)
        .into_par_iter()
        .map(|seg| {
            let start = seg * hop;
            let mut buf: Vec<Complex64> =
                samples[start..start + n].iter().zip(&window).map(|(x, w)| Complex64::new(x * w, 0.0)).collect();
            fft.process(&mut buf);
            buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();

    let mut psd = vec![0.0; n / 2 + 1];
    for p in &periodograms {
        for (acc, v) in psd.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let norm = 1.0 / (fs * window_power * n_averages as f64);
    for (k, v) in psd.iter_mut().enumerate() {
        let one_sided = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
        *v *= one_sided * norm;
    }

    let df = fs / n as f64;
    if vbw < rbw {
        video_filter(&mut psd, 1.0 - (-2.0 * PI * SWEEP_TIME_FACTOR * df / rbw).exp());
    }
    let freqs = (0..=n / 2).map(|k| k as f64 * df).collect();
    Spectrum::new(freqs, psd, rbw, vbw, n_averages, SpectrumUnits::V2PerHz)
}

/// Forward-backward single-pole smoother with unit DC gain.
fn video_filter(psd: &mut [f64], alpha: f64) {
    if psd.is_empty() || alpha >= 1.0 {
        return;
    }
    let mut y = psd[0];
    for v in psd.iter_mut() {
        y += alpha * (*v - y);
        *v = y;
    }
    let mut y = psd[psd.len() - 1];
    for v in psd.iter_mut().rev() {
        y += alpha * (*v - y);
        *v = y;
    }
}

/// Widths of the bins centred on each frequency (half-gaps to neighbours).
fn bin_widths(freqs: &[f64]) -> Vec<f64> {
    let n = freqs.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i == 0 { freqs[1] - freqs[0] } else { freqs[i] - freqs[i - 1] };
            let right = if i == n - 1 { freqs[n - 1] - freqs[n - 2] } else { freqs[i + 1] - freqs[i] };
            0.5 * (left + right)
        })
        .collect()
}

/// Moving average with a unit-area Gaussian kernel of the given FWHM.
///
/// The kernel is cut at four standard deviations; near the edges it is
/// truncated and renormalized over the bins that exist.
pub fn gaussian_smooth(spec: &Spectrum, fwhm: f64) -> Result<Spectrum> {
    let widths = bin_widths(&spec.freqs);
    let max_width = widths.iter().cloned().fold(0.0, f64::max);
    if !(fwhm >= max_width * (1.0 - 1e-9)) {
        return Err(Error::Domain(format!("smoothing FWHM {fwhm:e} Hz is below the bin spacing")));
    }
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let reach = 4.0 * sigma;
    let f = &spec.freqs;
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        while f[lo] < f[i] - reach {
            lo += 1;
        }
        while hi + 1 < f.len() && f[hi + 1] <= f[i] + reach {
            hi += 1;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for j in lo..=hi {
            let u = (f[j] - f[i]) / sigma;
            let w = (-0.5 * u * u).exp() * widths[j];
            num += w * spec.psd[j];
            den += w;
        }
        out.push(num / den);
    }
    Ok(spec.with_psd(out))
}

fn band_indices(spec: &Spectrum, f_lo: f64, f_hi: f64) -> Result<std::ops::Range<usize>> {
    let (min, max) = (spec.freqs[0], spec.freqs[spec.len() - 1]);
    let out_of_range = Error::BandOutOfRange { lo: f_lo, hi: f_hi, min, max };
    if !(f_lo <= f_hi && f_lo >= min && f_hi <= max) {
        return Err(out_of_range);
    }
    let start = spec.freqs.partition_point(|&x| x < f_lo);
    let end = spec.freqs.partition_point(|&x| x <= f_hi);
    if start >= end {
        return Err(out_of_range);
    }
    Ok(start..end)
}

/// Mean PSD over the bins inside the closed band `[f_lo, f_hi]`.
pub fn band_average(spec: &Spectrum, f_lo: f64, f_hi: f64) -> Result<f64> {
    let range = band_indices(spec, f_lo, f_hi)?;
    let n = range.len() as f64;
    Ok(spec.psd[range].iter().sum::<f64>() / n)
}

/// Integrated power `sum(S * bin width)` over the bins in `[f_lo, f_hi]`.
pub fn band_power(spec: &Spectrum, f_lo: f64, f_hi: f64) -> Result<f64> {
    let range = band_indices(spec, f_lo, f_hi)?;
    let widths = bin_widths(&spec.freqs);
    Ok(range.map(|i| spec.psd[i] * widths[i]).sum())
}

pub fn to_db(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return Err(Error::Domain(format!("dB of nonpositive ratio {ratio}")));
    }
    Ok(10.0 * ratio.log10())
}

/// `10 log10(a(f) / b(f))` with both spectra interpolated at `f`.
pub fn db_diff(a: &Spectrum, b: &Spectrum, f: f64) -> Result<f64> {
    let va = a.value_at(f)?;
    let vb = b.value_at(f)?;
    if !(vb > 0.0) {
        return Err(Error::Domain(format!("dB of nonpositive value {vb}")));
    }
    to_db(va / vb)
}
