//! Butterworth IIR design by bilinear transform, realized as cascaded
//! second-order sections.
//!
//! Analog prototype poles sit at `exp(j*pi*(2k + N + 1) / (2N))`. Band edges
//! are pre-warped with `2 fs tan(pi f / fs)` so the digital response hits the
//! requested -3 dB points exactly. Each section is normalized to unit gain at
//! the reference frequency (DC for low-pass, the geometric band centre for
//! band-pass), so the cascade is unit gain there too.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SignalError;

/// Imaginary parts below this are treated as real poles.
const REAL_POLE_TOL: f64 = 1e-12;

/// One second-order section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn from_pole_pair(zeros: [f64; 3], poles: &[Complex64]) -> Self {
        let a = match poles {
            [p] => [1.0, -p.re, 0.0],
            [p, q] => [1.0, -(p + q).re, (p * q).re],
            _ => unreachable!("a section holds one or two poles"),
        };
        Biquad { b: zeros, a }
    }

    /// Complex response at `z = e^{j*omega}`.
    pub fn response_at(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = self.a[0] + self.a[1] * z1 + self.a[2] * z2;
        num / den
    }

    fn scale(&mut self, g: f64) {
        for b in &mut self.b {
            *b *= g;
        }
    }
}

/// A cascade of biquads run in transposed direct form II.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Butterworth low-pass of the given order with -3 dB point at `cutoff`.
    pub fn butterworth_lowpass(order: usize, cutoff: f64, fs: f64) -> Result<Self, SignalError> {
        if order == 0 {
            return Err(SignalError::InvalidOrder(order));
        }
        check_band(cutoff, cutoff, fs, true)?;
        let k = 2.0 * fs;
        let wc = k * (PI * cutoff / fs).tan();
        let z_poles: Vec<Complex64> = prototype_poles(order)
            .into_iter()
            .map(|p| bilinear(p * wc, k))
            .collect();
        let mut sections: Vec<Biquad> = group_conjugates(&z_poles)
            .into_iter()
            .map(|group| {
                let zeros = if group.len() == 2 {
                    [1.0, 2.0, 1.0]
                } else {
                    [1.0, 1.0, 0.0]
                };
                Biquad::from_pole_pair(zeros, &group)
            })
            .collect();
        for s in &mut sections {
            let g = s.response_at(0.0).norm();
            s.scale(1.0 / g);
        }
        Ok(SosFilter { sections })
    }

    /// Butterworth band-pass built from an order-`order` low-pass prototype.
    ///
    /// The result has `2 * order` poles in `order` sections, each carrying
    /// one zero at DC and one at Nyquist.
    pub fn butterworth_bandpass(
        order: usize,
        f_low: f64,
        f_high: f64,
        fs: f64,
    ) -> Result<Self, SignalError> {
        if order == 0 {
            return Err(SignalError::InvalidOrder(order));
        }
        check_band(f_low, f_high, fs, false)?;
        let k = 2.0 * fs;
        let w1 = k * (PI * f_low / fs).tan();
        let w2 = k * (PI * f_high / fs).tan();
        let w0 = (w1 * w2).sqrt();
        let bw = w2 - w1;

        let mut z_poles = Vec::with_capacity(2 * order);
        for p in prototype_poles(order) {
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
            z_poles.push(bilinear((pb + disc) / 2.0, k));
            z_poles.push(bilinear((pb - disc) / 2.0, k));
        }
        let centre = 2.0 * (w0 / k).atan();
        let mut sections: Vec<Biquad> = group_conjugates(&z_poles)
            .into_iter()
            .map(|group| Biquad::from_pole_pair([1.0, 0.0, -1.0], &group))
            .collect();
        for s in &mut sections {
            let g = s.response_at(centre).norm();
            s.scale(1.0 / g);
        }
        Ok(SosFilter { sections })
    }

    /// Complex frequency response at `freq` Hz for sample rate `fs`.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let omega = 2.0 * PI * freq / fs;
        self.sections
            .iter()
            .map(|s| s.response_at(omega))
            .product()
    }

    /// Causal single pass from zero initial state.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let xin = *x;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[1] * y + z2;
                z2 = s.b[2] * xin - s.a[2] * y;
                *x = y;
            }
        }
        out
    }
}

fn check_band(f_low: f64, f_high: f64, fs: f64, lowpass: bool) -> Result<(), SignalError> {
    let nyquist = 0.5 * fs;
    let ordered = if lowpass {
        f_low > 0.0
    } else {
        f_low > 0.0 && f_low < f_high
    };
    if !ordered || !f_high.is_finite() {
        return Err(SignalError::InvalidBand { f_min: f_low, f_max: f_high });
    }
    if f_high >= nyquist {
        return Err(SignalError::AboveNyquist { f_max: f_high, nyquist });
    }
    Ok(())
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n)))
        .collect()
}

fn bilinear(s: Complex64, k: f64) -> Complex64 {
    (k + s) / (k - s)
}

/// Groups poles into conjugate pairs; real poles are paired with each other,
/// leaving at most one single real pole.
fn group_conjugates(poles: &[Complex64]) -> Vec<Vec<Complex64>> {
    let mut groups = Vec::new();
    let mut reals = Vec::new();
    for &p in poles {
        if p.im.abs() <= REAL_POLE_TOL {
            reals.push(Complex64::new(p.re, 0.0));
        } else if p.im > 0.0 {
            groups.push(vec![p, p.conj()]);
        }
    }
    reals.sort_by(|a, b| a.re.total_cmp(&b.re));
    for chunk in reals.chunks(2) {
        groups.push(chunk.to_vec());
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth band-pass magnitude at the pre-warped frequency.
    fn analog_bandpass_mag(order: usize, f: f64, f1: f64, f2: f64, fs: f64) -> f64 {
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (w, w1, w2) = (warp(f), warp(f1), warp(f2));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + x.powi(2 * order as i32)).sqrt()
    }

    fn analog_lowpass_mag(order: usize, f: f64, fc: f64, fs: f64) -> f64 {
        let warp = |f: f64| (PI * f / fs).tan();
        let x = warp(f) / warp(fc);
        1.0 / (1.0 + x.powi(2 * order as i32)).sqrt()
    }

    #[test]
    fn bandpass_matches_analog_prototype() {
        let filt = SosFilter::butterworth_bandpass(4, 15.0, 55.0, 5000.0).unwrap();
        assert_eq!(filt.sections().len(), 4);
        for f in [1.0, 5.0, 15.0, 28.0, 35.0, 48.0, 55.0, 100.0, 1000.0] {
            let digital = filt.response(f, 5000.0).norm();
            let analog = analog_bandpass_mag(4, f, 15.0, 55.0, 5000.0);
            assert!((digital - analog).abs() < 1e-9, "f={f}: {digital} vs {analog}");
        }
        assert!((filt.response(15.0, 5000.0).norm() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(filt.response(0.0, 5000.0).norm() < 1e-12);
    }

    #[test]
    fn lowpass_matches_analog_prototype() {
        for order in [1, 2, 5, 8] {
            let filt = SosFilter::butterworth_lowpass(order, 45.0, 5000.0).unwrap();
            assert_eq!(filt.sections().len(), order.div_ceil(2));
            for f in [0.0, 10.0, 45.0, 48.0, 90.0, 500.0] {
                let digital = filt.response(f, 5000.0).norm();
                let analog = analog_lowpass_mag(order, f, 45.0, 5000.0);
                assert!((digital - analog).abs() < 1e-9, "order {order} f={f}");
            }
        }
    }

    #[test]
    fn wide_band_with_real_poles() {
        // B > 2*w0 puts real poles on the band-pass; the odd prototype pole
        // must still land in a single section.
        let filt = SosFilter::butterworth_bandpass(3, 1.0, 400.0, 1000.0).unwrap();
        assert_eq!(filt.sections().len(), 3);
        for f in [0.5, 1.0, 20.0, 400.0] {
            let d = filt.response(f, 1000.0).norm();
            let a = analog_bandpass_mag(3, f, 1.0, 400.0, 1000.0);
            assert!((d - a).abs() < 1e-9, "f={f}: {d} vs {a}");
        }
    }

    #[test]
    fn rejects_band_above_nyquist() {
        let err = SosFilter::butterworth_bandpass(4, 15.0, 55.0, 100.0).unwrap_err();
        assert_eq!(err, SignalError::AboveNyquist { f_max: 55.0, nyquist: 50.0 });
        assert!(SosFilter::butterworth_bandpass(4, 30.0, 20.0, 100.0).is_err());
        assert!(SosFilter::butterworth_lowpass(0, 10.0, 100.0).is_err());
    }
}
