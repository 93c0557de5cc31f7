//! Monte-Carlo synthesis of detector traces.
//!
//! The chain is envelope -> photocurrents -> subtraction -> TIA -> output
//! clip -> bias tee. Every random stream is derived from the configured seed
//! and a fixed stream tag, so a given `(model, lo, scenario, cfg)` always
//! produces bit-identical traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::ELEMENTARY_CHARGE;
use crate::detector::{DetectorModel, LocalOscillator};
use crate::error::{Error, Result};
use crate::trace::{TimeTrace, Units};

/// Largest trace this module will allocate.
pub const MAX_SAMPLES: usize = 1 << 25;

/// Pulses narrower than this many samples (FWHM) are not resolvable.
const MIN_SAMPLES_PER_FWHM: f64 = 2.0;

const STREAM_RIN: u64 = 1;
const STREAM_SHOT_PLUS: u64 = 2;
const STREAM_SHOT_MINUS: u64 = 3;
const STREAM_ELECTRONIC: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Balanced,
    /// PD+ blocked.
    BlockedPlus,
    /// PD- blocked.
    BlockedMinus,
    /// All LO power routed to PD+.
    Addition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Fractional splitter imbalance: PD+ gets `(1 + e)` and PD- `(1 - e)`
    /// times its balanced share.
    pub arm_imbalance: f64,
    /// Extra delay of the PD- arm, s.
    pub path_delay: f64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Scenario { kind, arm_imbalance: 0.0, path_delay: 0.0 }
    }

    pub fn balanced() -> Self {
        Self::new(ScenarioKind::Balanced)
    }

    pub fn with_imbalance(mut self, imbalance: f64) -> Self {
        self.arm_imbalance = imbalance;
        self
    }

    pub fn with_path_delay(mut self, delay: f64) -> Self {
        self.path_delay = delay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.arm_imbalance) {
            return Err(Error::Config(format!("arm imbalance must lie in [0, 1], got {}", self.arm_imbalance)));
        }
        if !self.path_delay.is_finite() {
            return Err(Error::Config("path delay must be finite".into()));
        }
        Ok(())
    }

    /// Fractions of the LO power reaching (PD+, PD-).
    pub fn power_shares(&self, model: &DetectorModel) -> (f64, f64) {
        let (sp, sm) = model.balanced_split();
        let e = self.arm_imbalance;
        match self.kind {
            ScenarioKind::Balanced => (sp * (1.0 + e), sm * (1.0 - e)),
            ScenarioKind::BlockedPlus => (0.0, sm * (1.0 - e)),
            ScenarioKind::BlockedMinus => (sp * (1.0 + e), 0.0),
            ScenarioKind::Addition => (1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Gaussian,
    /// Equal-area impulses, one per repetition period.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Hz
    pub sample_rate: f64,
    /// s
    pub duration: f64,
    pub seed: u64,
    pub pulse_shape: PulseShape,
}

impl SynthConfig {
    pub fn new(sample_rate: f64, duration: f64, seed: u64) -> Self {
        SynthConfig { sample_rate, duration, seed, pulse_shape: PulseShape::Delta }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn validate(&self, model: &DetectorModel) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.duration > 0.0) {
            return Err(Error::Config("sample rate and duration must be positive".into()));
        }
        let f_star = model.response().f_star;
        if self.sample_rate <= 4.0 * f_star {
            return Err(Error::Config(format!(
                "sample rate {:.4e} Hz must exceed 4 f_star = {:.4e} Hz",
                self.sample_rate,
                4.0 * f_star
            )));
        }
        let n = self.n_samples();
        if n == 0 || n > MAX_SAMPLES {
            return Err(Error::Config(format!("{n} samples outside (0, {MAX_SAMPLES}]")));
        }
        Ok(())
    }
}

/// Mixes a base seed with a stream or sweep index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Optical power envelope of the pulsed LO, in watts.
///
/// The sample mean is normalized to the LO average power before RIN is
/// applied. RIN multiplies the envelope by `1 + n(t)` with `n` white of
/// single-sided density `rin_density`.
pub fn synth_pulse_train(lo: &LocalOscillator, cfg: &SynthConfig) -> Result<TimeTrace> {
    lo.validate()?;
    let n = cfg.n_samples();
    if n == 0 || n > MAX_SAMPLES {
        return Err(Error::Config(format!("{n} samples outside (0, {MAX_SAMPLES}]")));
    }
    let fs = cfg.sample_rate;
    let dt = 1.0 / fs;
    let period = 1.0 / lo.repetition_rate;
    let pulse_energy = lo.average_power * period;
    let mut env = vec![0.0; n];

    match cfg.pulse_shape {
        PulseShape::Delta => {
            let n_pulses = ((n as f64 * dt) / period).ceil() as usize;
            for k in 0..n_pulses {
                let mut pos = k as f64 * fs / lo.repetition_rate;
                if (pos - pos.round()).abs() < 1e-9 {
                    pos = pos.round();
                }
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                if i < n {
                    env[i] += (1.0 - frac) * pulse_energy / dt;
                }
                env[(i + 1) % n] += frac * pulse_energy / dt;
            }
        }
        PulseShape::Gaussian => {
            if lo.pulse_fwhm * fs < MIN_SAMPLES_PER_FWHM {
                return Err(Error::Config(format!(
                    "pulse FWHM {:.3e} s is unresolvable at {:.3e} Hz; use delta pulses",
                    lo.pulse_fwhm, fs
                )));
            }
            let sigma = lo.pulse_fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
            let norm = pulse_energy / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let reach = (6.0 * sigma / period).ceil() as i64 + 1;
            for (i, e) in env.iter_mut().enumerate() {
                let t = i as f64 * dt;
                let k0 = (t / period).round() as i64;
                *e = (k0 - reach..=k0 + reach)
                    .filter(|&k| k >= 0)
                    .map(|k| {
                        let u = (t - k as f64 * period) / sigma;
                        norm * (-0.5 * u * u).exp()
                    })
                    .sum();
            }
        }
    }

    let mean = env.iter().sum::<f64>() / n as f64;
    if mean > 0.0 {
        let scale = lo.average_power / mean;
        env.iter_mut().for_each(|e| *e *= scale);
    }

    if lo.rin_density > 0.0 {
        let sigma = (lo.rin_density * fs / 2.0).sqrt();
        let mut rng = stream(cfg.seed, STREAM_RIN);
        for e in env.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *e *= (1.0 + sigma * z).max(0.0);
        }
    }

    TimeTrace::new(env, dt, Units::Watts, cfg.seed)
}

/// Photocurrent at each diode: mean photocurrent, dark current, and white
/// Gaussian shot noise of density `2 q i(t)` following the instantaneous
/// photocurrent. Envelope fluctuations are common to both arms; the shot
/// noise streams are independent.
pub fn synth_photocurrents(
    envelope: &TimeTrace,
    model: &DetectorModel,
    scenario: &Scenario,
    seed: u64,
) -> Result<(TimeTrace, TimeTrace)> {
    if envelope.units() != Units::Watts {
        return Err(Error::Config(format!("envelope must be in watts, got {}", envelope.units())));
    }
    scenario.validate()?;
    let fs = envelope.sample_rate();
    let (share_plus, share_minus) = scenario.power_shares(model);

    let delayed;
    let env_minus = if scenario.path_delay != 0.0 && share_minus > 0.0 {
        delayed = fractional_delay(envelope.samples(), scenario.path_delay, fs);
        delayed.as_slice()
    } else {
        envelope.samples()
    };

    let arm = |env: &[f64], share: f64, gain: f64, dark: f64, tag: u64| {
        let mut rng = stream(seed, tag);
        let scale = share * gain;
        env.iter()
            .map(|&p| {
                let photo = (scale * p).max(0.0);
                let z: f64 = rng.sample(StandardNormal);
                photo + dark + (ELEMENTARY_CHARGE * photo * fs).sqrt() * z
            })
            .collect::<Vec<f64>>()
    };
    let plus = arm(
        envelope.samples(),
        share_plus,
        model.pd_plus.conversion_gain(),
        model.pd_plus.dark_current,
        STREAM_SHOT_PLUS,
    );
    let minus =
        arm(env_minus, share_minus, model.pd_minus.conversion_gain(), model.pd_minus.dark_current, STREAM_SHOT_MINUS);
    let dt = envelope.dt();
    Ok((TimeTrace::new(plus, dt, Units::Amps, seed)?, TimeTrace::new(minus, dt, Units::Amps, seed)?))
}

/// Circular delay by `delay` seconds via a linear phase ramp.
fn fractional_delay(samples: &[f64], delay: f64, fs: f64) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    apply_real_response(&mut buf, fs, |f| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * delay));
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Multiplies a full FFT by `response(f)` on positive bins and its
/// conjugate on negative bins; the Nyquist bin takes the real part.
fn apply_real_response(buf: &mut [Complex64], fs: f64, response: impl Fn(f64) -> Complex64) {
    let n = buf.len();
    let df = fs / n as f64;
    buf[0] *= response(0.0).re;
    for k in 1..n.div_ceil(2) {
        let h = response(k as f64 * df);
        buf[k] *= h;
        buf[n - k] *= h.conj();
    }
    if n.is_multiple_of(2) {
        buf[n / 2] *= response(fs / 2.0).re;
    }
}

/// Transimpedance stage: `R_f` times the current filtered by the model
/// response, applied exactly on the trace's DFT grid (circular convolution).
pub fn tia_filter(current: &TimeTrace, model: &DetectorModel) -> Result<TimeTrace> {
    if current.units() != Units::Amps {
        return Err(Error::Config(format!("TIA input must be in amps, got {}", current.units())));
    }
    let shape = model.response();
    let fs = current.sample_rate();
    if fs / 2.0 < 0.8 * shape.f_star {
        return Err(Error::Config(format!("sample rate {fs:.4e} Hz cannot represent the response up to 0.8 f_star")));
    }
    let n = current.len();
    let mut buf: Vec<Complex64> = current.samples().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    apply_real_response(&mut buf, fs, |f| shape.transfer(f));
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = model.feedback.gain_resistor / n as f64;
    let out = buf.iter().map(|c| c.re * scale).collect();
    Ok(current.with_samples(out).relabel(Units::Volts))
}

/// Output-stage clip: identity for `|v| <= rail / 2`, then a tanh approach
/// to `rail` with continuous slope at the knee.
pub fn soft_clip(v: f64, rail: f64) -> f64 {
    let knee = 0.5 * rail;
    let a = v.abs();
    if a <= knee {
        v
    } else {
        let span = rail - knee;
        v.signum() * (knee + span * ((a - knee) / span).tanh())
    }
}

pub fn apply_saturation(voltage: &TimeTrace, model: &DetectorModel) -> Result<TimeTrace> {
    if voltage.units() != Units::Volts {
        return Err(Error::Config(format!("saturation input must be in volts, got {}", voltage.units())));
    }
    let rail = model.opamp.output_swing;
    Ok(voltage.with_samples(voltage.samples().iter().map(|&v| soft_clip(v, rail)).collect()))
}

/// AC-coupled output and DC level as split by a bias tee.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneOutput {
    pub ac: TimeTrace,
    /// V
    pub dc_value: f64,
}

/// Full chain for one scenario. The subtraction current carries the
/// input-referred electronic noise; dark-current imbalance is part of
/// `v_offset` and is removed from the subtraction.
pub fn simulate_homodyne(
    model: &DetectorModel,
    lo: &LocalOscillator,
    scenario: &Scenario,
    cfg: &SynthConfig,
) -> Result<HomodyneOutput> {
    model.validate(lo.wavelength)?;
    cfg.validate(model)?;
    let envelope = synth_pulse_train(lo, cfg)?;
    let (plus, minus) = synth_photocurrents(&envelope, model, scenario, cfg.seed)?;
    drop(envelope);

    let fs = cfg.sample_rate;
    let dark_imbalance = model.pd_plus.dark_current - model.pd_minus.dark_current;
    let sigma_e = model.electronic_noise_density * (fs / 2.0).sqrt();
    let mut rng = stream(cfg.seed, STREAM_ELECTRONIC);
    let diff: Vec<f64> = plus
        .samples()
        .iter()
        .zip(minus.samples())
        .map(|(a, b)| {
            let z: f64 = rng.sample(StandardNormal);
            a - b - dark_imbalance + sigma_e * z
        })
        .collect();
    let diff = TimeTrace::new(diff, plus.dt(), Units::Amps, cfg.seed)?;
    drop((plus, minus));

    let mut volts = tia_filter(&diff, model)?.into_samples();
    volts.iter_mut().for_each(|v| *v += model.v_offset);
    let volts = TimeTrace::new(volts, diff.dt(), Units::Volts, cfg.seed)?;
    let clipped = apply_saturation(&volts, model)?;

    let dc_value = clipped.mean();
    let ac = clipped.samples().iter().map(|v| v - dc_value).collect();
    Ok(HomodyneOutput { ac: clipped.with_samples(ac), dc_value })
}
