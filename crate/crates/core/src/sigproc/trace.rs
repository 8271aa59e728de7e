use std::io::{BufRead, Write};

use super::SignalError;

/// Tolerance, in sample periods, when mapping a time onto a sample index.
const INDEX_SLACK: f64 = 1e-6;

/// Maximum deviation from uniform spacing accepted when reading a CSV trace.
const SPACING_TOLERANCE: f64 = 1e-9;

/// A uniformly sampled scalar time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    samples: Vec<f64>,
    sample_rate: f64,
    t0: f64,
}

impl SignalTrace {
    /// Builds a trace, rejecting a non-positive rate or any non-finite value.
    pub fn new(samples: Vec<f64>, sample_rate: f64, t0: f64) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::InvalidRate(sample_rate));
        }
        if !t0.is_finite() {
            return Err(SignalError::NonFinite { index: 0 });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    /// Samples `f(t)` at `n` points starting at `t0`.
    pub fn from_fn(
        n: usize,
        sample_rate: f64,
        t0: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, SignalError> {
        let samples = (0..n).map(|k| f(t0 + k as f64 / sample_rate)).collect();
        Self::new(samples, sample_rate, t0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Time of sample `k`.
    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    /// Span covered by the samples, `(N - 1) / rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 / self.sample_rate
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let pos = (t - self.t0) * self.sample_rate;
        if pos <= 0.0 {
            0
        } else {
            (pos - INDEX_SLACK).ceil().max(0.0) as usize
        }
    }

    /// Samples with time in `[start, end]`, both ends inclusive.
    pub fn slice_time(&self, start: f64, end: f64) -> Result<SignalTrace, SignalError> {
        let first = self.index_at_or_after(start);
        let last_pos = ((end - self.t0) * self.sample_rate + INDEX_SLACK).floor();
        if last_pos < 0.0 || first >= self.samples.len() || (last_pos as usize) < first {
            return Err(SignalError::EmptySlice { start, end });
        }
        let last = (last_pos as usize).min(self.samples.len() - 1);
        Ok(SignalTrace {
            samples: self.samples[first..=last].to_vec(),
            sample_rate: self.sample_rate,
            t0: self.time_of(first),
        })
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> SignalTrace {
        SignalTrace {
            samples,
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }

    /// Writes the trace as `t,value` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(out, "{:.12e},{:.16e}", self.time_of(k), v)?;
        }
        out.flush()
    }

    /// Reads a `t,value` CSV, verifying uniform spacing.
    ///
    /// The sample rate is recovered from the time column and snapped to the
    /// nearest integer when it is within 1e-6 relative of one.
    pub fn read_csv<R: BufRead>(input: R) -> Result<SignalTrace, SignalError> {
        let mut lines = input.lines().enumerate();
        match lines.next() {
            Some((_, Ok(header))) if header.trim() == "t,value" => {}
            Some((_, Ok(header))) => {
                return Err(SignalError::Csv {
                    line: 1,
                    message: format!("expected header `t,value`, found `{}`", header.trim()),
                })
            }
            Some((_, Err(e))) => return Err(SignalError::Io(e.to_string())),
            None => {
                return Err(SignalError::Csv {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| SignalError::Io(e.to_string()))?;
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (t, v) = line.split_once(',').ok_or_else(|| SignalError::Csv {
                line: line_no,
                message: "expected two comma-separated columns".into(),
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| SignalError::Csv {
                    line: line_no,
                    message: format!("bad number `{}`: {e}", s.trim()),
                })
            };
            times.push(parse(t)?);
            values.push(parse(v)?);
        }
        if times.len() < 2 {
            return Err(SignalError::Csv {
                line: times.len() + 1,
                message: "a trace needs at least two rows to fix its sample rate".into(),
            });
        }
        let n = times.len();
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(SignalError::Csv {
                line: 2,
                message: "time column must be increasing".into(),
            });
        }
        for (k, &t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * dt)).abs() > SPACING_TOLERANCE {
                return Err(SignalError::Csv {
                    line: k + 2,
                    message: format!("non-uniform sample spacing at t = {t}"),
                });
            }
        }
        let mut rate = 1.0 / dt;
        if (rate - rate.round()).abs() < 1e-6 * rate {
            rate = rate.round();
        }
        SignalTrace::new(values, rate, times[0])
    }
}
