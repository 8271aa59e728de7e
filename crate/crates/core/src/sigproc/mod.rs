//! Measurement pipeline: decimation, band-pass filtering, observation
//! windows and the oscillation-energy functional used as the reward.

mod filter;
mod trace;

pub use filter::{Biquad, SosFilter};
pub use trace::SignalTrace;

use thiserror::Error;

/// Order of the anti-aliasing low-pass applied before decimation.
pub const ANTI_ALIAS_ORDER: usize = 8;

/// Anti-aliasing cutoff as a fraction of the target rate.
pub const ANTI_ALIAS_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("incompatible rates: {from} Hz cannot be decimated to {to} Hz by an integer factor")]
    IncompatibleRates { from: f64, to: f64 },
    #[error("operation needs a non-empty trace")]
    EmptyTrace,
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("invalid band: need 0 < f_min < f_max, got f_min = {f_min}, f_max = {f_max}")]
    InvalidBand { f_min: f64, f_max: f64 },
    #[error("f_max = {f_max} Hz is not below the Nyquist frequency {nyquist} Hz")]
    AboveNyquist { f_max: f64, nyquist: f64 },
    #[error("filter order must be a positive even number, got {0}")]
    InvalidOrder(usize),
    #[error("window exceeds trace: need {needed} samples from index {start}, trace has {available}")]
    WindowExceedsTrace {
        start: usize,
        needed: usize,
        available: usize,
    },
    #[error("horizon {horizon} s exceeds trace duration {duration} s")]
    HorizonExceedsTrace { horizon: f64, duration: f64 },
    #[error("no samples between {start} s and {end} s")]
    EmptySlice { start: f64, end: f64 },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Band edges and prototype order of the Butterworth band-pass.
///
/// `order` is the low-pass prototype order: the band-pass has `2 * order`
/// poles arranged as `order` second-order sections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub order: usize,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self {
            f_min: 15.0,
            f_max: 55.0,
            order: 4,
        }
    }
}

impl BandpassSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<(), SignalError> {
        if self.order == 0 || !self.order.is_multiple_of(2) {
            return Err(SignalError::InvalidOrder(self.order));
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(SignalError::InvalidBand {
                f_min: self.f_min,
                f_max: self.f_max,
            });
        }
        let nyquist = 0.5 * sample_rate;
        if self.f_max >= nyquist {
            return Err(SignalError::AboveNyquist {
                f_max: self.f_max,
                nyquist,
            });
        }
        Ok(())
    }

    pub fn design(&self, sample_rate: f64) -> Result<SosFilter, SignalError> {
        self.validate(sample_rate)?;
        SosFilter::butterworth_bandpass(self.order, self.f_min, self.f_max, sample_rate)
    }
}

/// A fixed-length processed window fed to the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
    pub window_start: f64,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn decimation_factor(from: f64, to: f64) -> Result<usize, SignalError> {
    let bad = SignalError::IncompatibleRates { from, to };
    if !(to.is_finite() && to > 0.0) || to > from {
        return Err(bad);
    }
    let ratio = from / to;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(bad);
    }
    Ok(factor as usize)
}

/// Decimates to `target_rate` after an 8th-order Butterworth anti-aliasing
/// low-pass at `0.45 * target_rate`.
pub fn downsample(trace: &SignalTrace, target_rate: f64) -> Result<SignalTrace, SignalError> {
    let factor = decimation_factor(trace.sample_rate(), target_rate)?;
    if trace.is_empty() {
        return Err(SignalError::EmptyTrace);
    }
    if factor == 1 {
        return Ok(trace.clone());
    }
    let aa = SosFilter::butterworth_lowpass(
        ANTI_ALIAS_ORDER,
        ANTI_ALIAS_FRACTION * target_rate,
        trace.sample_rate(),
    )?;
    let filtered = aa.filter(trace.samples());
    let samples = filtered.into_iter().step_by(factor).collect();
    SignalTrace::new(samples, target_rate, trace.t0())
}

/// Causal band-pass from zero initial state.
pub fn bandpass(trace: &SignalTrace, spec: &BandpassSpec) -> Result<SignalTrace, SignalError> {
    if trace.is_empty() {
        return Err(SignalError::EmptyTrace);
    }
    let filt = spec.design(trace.sample_rate())?;
    Ok(trace.with_samples(filt.filter(trace.samples())))
}

/// `d_obs` consecutive samples starting at the first sample at or after `start`.
pub fn extract_window(
    trace: &SignalTrace,
    start: f64,
    d_obs: usize,
) -> Result<Observation, SignalError> {
    let first = trace.index_at_or_after(start);
    if first + d_obs > trace.len() {
        return Err(SignalError::WindowExceedsTrace {
            start: first,
            needed: d_obs,
            available: trace.len().saturating_sub(first),
        });
    }
    Ok(Observation {
        values: trace.samples()[first..first + d_obs].to_vec(),
        window_start: trace.time_of(first),
    })
}

/// Trapezoidal `∫ (x(t) - p_nom)^2 dt` over the first `horizon` seconds.
pub fn oscillation_energy(
    trace: &SignalTrace,
    p_nom: f64,
    horizon: f64,
) -> Result<f64, SignalError> {
    if trace.is_empty() {
        return Err(SignalError::EmptyTrace);
    }
    let duration = trace.duration();
    if !(horizon >= 0.0) || horizon > duration + 1e-9 {
        return Err(SignalError::HorizonExceedsTrace { horizon, duration });
    }
    let intervals = ((horizon * trace.sample_rate()).round() as usize).min(trace.len() - 1);
    let sq: Vec<f64> = trace.samples()[..=intervals]
        .iter()
        .map(|v| (v - p_nom) * (v - p_nom))
        .collect();
    let sum: f64 = sq.windows(2).map(|w| w[0] + w[1]).sum();
    Ok(0.5 * trace.dt() * sum)
}

/// Where the band-pass runs relative to decimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterStage {
    #[default]
    PreDecimation,
    /// Band-pass at the decimated rate, with `f_max` clamped to 0.95 Nyquist.
    PostDecimation,
}

impl FilterStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterStage::PreDecimation => "pre_decimation",
            FilterStage::PostDecimation => "post_decimation",
        }
    }
}

impl std::str::FromStr for FilterStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pre_decimation" => Ok(FilterStage::PreDecimation),
            "post_decimation" => Ok(FilterStage::PostDecimation),
            other => Err(format!(
                "unknown filter stage `{other}` (expected pre_decimation or post_decimation)"
            )),
        }
    }
}

/// The full raw-measurement to filtered-trace chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub bandpass: BandpassSpec,
    pub target_rate: f64,
    pub stage: FilterStage,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            bandpass: BandpassSpec::default(),
            target_rate: 100.0,
            stage: FilterStage::PreDecimation,
        }
    }
}

impl Pipeline {
    pub fn process(&self, raw: &SignalTrace) -> Result<SignalTrace, SignalError> {
        match self.stage {
            FilterStage::PreDecimation => {
                let filtered = bandpass(raw, &self.bandpass)?;
                downsample(&filtered, self.target_rate)
            }
            FilterStage::PostDecimation => {
                let decimated = downsample(raw, self.target_rate)?;
                bandpass(&decimated, &self.post_decimation_spec())
            }
        }
    }

    fn post_decimation_spec(&self) -> BandpassSpec {
        let limit = 0.95 * 0.5 * self.target_rate;
        let mut spec = self.bandpass;
        if spec.f_max >= limit {
            log::warn!(
                "band-pass upper edge {} Hz clamped to {} Hz for post-decimation filtering at {} Hz",
                spec.f_max,
                limit,
                self.target_rate
            );
            spec.f_max = limit;
        }
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(f: f64, rate: f64, n: usize) -> SignalTrace {
        SignalTrace::from_fn(n, rate, 0.0, |t| (2.0 * PI * f * t).sin()).unwrap()
    }

    /// Amplitude of the `f` component over the last `periods_len` samples,
    /// by projection onto sin/cos. Needs an integer number of periods.
    fn tail_amplitude(x: &[f64], f: f64, rate: f64, len: usize) -> f64 {
        let start = x.len() - len;
        let (mut s, mut c) = (0.0, 0.0);
        for (k, v) in x[start..].iter().enumerate() {
            let ph = 2.0 * PI * f * (start + k) as f64 / rate;
            s += v * ph.sin();
            c += v * ph.cos();
        }
        2.0 * (s * s + c * c).sqrt() / len as f64
    }

    #[test]
    fn downsample_table_rates() {
        let trace = SignalTrace::from_fn(50_000, 5000.0, 0.0, |_| 0.0).unwrap();
        let d = downsample(&trace, 100.0).unwrap();
        assert_eq!(d.len(), 1000);
        assert_eq!(d.sample_rate(), 100.0);
        let odd = SignalTrace::from_fn(50_001, 5000.0, 0.0, |_| 0.0).unwrap();
        assert_eq!(downsample(&odd, 100.0).unwrap().len(), 1001);
    }

    #[test]
    fn downsample_keeps_constants() {
        let trace = SignalTrace::from_fn(20_000, 5000.0, 0.0, |_| 0.7).unwrap();
        let d = downsample(&trace, 100.0).unwrap();
        // DC gain is exactly one; the step transient settles well within 1 s.
        for v in &d.samples()[100..] {
            assert!((v - 0.7).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn downsample_passes_low_frequencies() {
        let d = downsample(&sine(1.0, 5000.0, 50_000), 100.0).unwrap();
        let amp = tail_amplitude(d.samples(), 1.0, 100.0, 500);
        assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    }

    #[test]
    fn downsample_rejects_bad_rates() {
        let trace = sine(1.0, 5000.0, 100);
        assert!(matches!(
            downsample(&trace, 300.0),
            Err(SignalError::IncompatibleRates { .. })
        ));
        assert!(downsample(&trace, 0.0).is_err());
        let empty = SignalTrace::new(vec![], 5000.0, 0.0).unwrap();
        assert_eq!(downsample(&empty, 100.0), Err(SignalError::EmptyTrace));
    }

    #[test]
    fn bandpass_kills_dc() {
        let trace = SignalTrace::from_fn(25_000, 5000.0, 0.0, |_| 1.0).unwrap();
        let y = bandpass(&trace, &BandpassSpec::default()).unwrap();
        let tail = &y.samples()[10_000..];
        assert!(tail.iter().all(|v| v.abs() <= 1e-3));
    }

    #[test]
    fn bandpass_steady_state_matches_transfer_function() {
        let spec = BandpassSpec::default();
        let filt = spec.design(5000.0).unwrap();
        let y = bandpass(&sine(48.0, 5000.0, 25_000), &spec).unwrap();
        let amp = tail_amplitude(y.samples(), 48.0, 5000.0, 5000);
        let expected = filt.response(48.0, 5000.0).norm();
        assert!((amp - expected).abs() < 1e-6, "{amp} vs {expected}");
    }

    #[test]
    fn bandpass_stop_band_at_5hz() {
        let y = bandpass(&sine(5.0, 5000.0, 25_000), &BandpassSpec::default()).unwrap();
        let amp = tail_amplitude(y.samples(), 5.0, 5000.0, 5000);
        assert!(amp <= 0.05, "{amp}");
    }

    #[test]
    fn bandpass_nyquist_guard_names_frequencies() {
        let trace = sine(1.0, 100.0, 100);
        let err = bandpass(&trace, &BandpassSpec::default()).unwrap_err();
        assert_eq!(err, SignalError::AboveNyquist { f_max: 55.0, nyquist: 50.0 });
        let msg = err.to_string();
        assert!(msg.contains("55") && msg.contains("50"), "{msg}");
        let odd = BandpassSpec { order: 3, ..BandpassSpec::default() };
        assert_eq!(odd.validate(5000.0), Err(SignalError::InvalidOrder(3)));
    }

    #[test]
    fn impulse_response_decays() {
        let spec = BandpassSpec::default();
        let n = (10.0 * 5000.0 / spec.f_min) as usize;
        let mut x = vec![0.0; 2 * n + 1];
        x[0] = 1.0;
        let h = spec.design(5000.0).unwrap().filter(&x);
        let peak = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak(&h[n..=2 * n]) < peak(&h[..n]));
    }

    #[test]
    fn window_extraction() {
        let trace = SignalTrace::from_fn(1000, 100.0, 0.0, |t| t).unwrap();
        let w = extract_window(&trace, 0.0, 30).unwrap();
        assert_eq!(w.values, trace.samples()[..30].to_vec());
        assert_eq!(w.window_start, 0.0);
        let err = extract_window(&trace, 9.8, 30).unwrap_err();
        assert!(err.to_string().starts_with("window exceeds trace"));
        let mid = extract_window(&trace, 4.655, 30).unwrap();
        assert!((mid.window_start - 4.66).abs() < 1e-12);
        assert!((mid.values[29] - mid.values[0] - 0.29).abs() < 1e-9);
    }

    #[test]
    fn energy_of_sine_is_half_window() {
        let trace = sine(48.0, 5000.0, 6000);
        let tw = 48.0 / 48.0;
        let e = oscillation_energy(&trace, 0.0, tw).unwrap();
        assert!((e - tw / 2.0).abs() <= 0.005 * tw / 2.0, "{e}");
    }

    #[test]
    fn energy_trivial_cases() {
        let zero = SignalTrace::from_fn(100, 100.0, 0.0, |_| 0.0).unwrap();
        assert_eq!(oscillation_energy(&zero, 0.0, 0.5).unwrap(), 0.0);
        let flat = SignalTrace::from_fn(100, 100.0, 0.0, |_| 0.3).unwrap();
        assert_eq!(oscillation_energy(&flat, 0.3, 0.99).unwrap(), 0.0);
        assert!(matches!(
            oscillation_energy(&flat, 0.0, 1.5),
            Err(SignalError::HorizonExceedsTrace { .. })
        ));
    }

    #[test]
    fn post_decimation_clamps_upper_edge() {
        let pipeline = Pipeline {
            stage: FilterStage::PostDecimation,
            ..Pipeline::default()
        };
        assert_eq!(pipeline.post_decimation_spec().f_max, 47.5);
        let raw = sine(30.0, 5000.0, 10_000);
        let out = pipeline.process(&raw).unwrap();
        assert_eq!(out.sample_rate(), 100.0);
        assert_eq!(out.len(), 200);
    }

    #[test]
    fn filter_stage_parses() {
        assert_eq!("post_decimation".parse::<FilterStage>(), Ok(FilterStage::PostDecimation));
        assert!("both".parse::<FilterStage>().is_err());
    }
}
