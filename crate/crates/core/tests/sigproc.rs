use std::f64::consts::PI;

use proptest::prelude::*;
use ssci_core::sigproc::{
    bandpass, downsample, extract_window, oscillation_energy, BandpassSpec, FilterStage, Pipeline,
    SignalError, SignalTrace,
};

fn sine(freq: f64, rate: f64, n: usize, amp: f64) -> SignalTrace {
    SignalTrace::from_fn(n, rate, 0.0, |t| amp * (2.0 * PI * freq * t).sin()).unwrap()
}

/// Least-squares amplitude of a `freq` tone over the last `seconds` of a trace.
fn tone_amplitude(trace: &SignalTrace, freq: f64, seconds: f64) -> f64 {
    let n = (seconds * trace.sample_rate()).round() as usize;
    let start = trace.len() - n;
    let (mut c, mut s) = (0.0, 0.0);
    for k in start..trace.len() {
        let ph = 2.0 * PI * freq * trace.time_of(k);
        c += trace.samples()[k] * ph.cos();
        s += trace.samples()[k] * ph.sin();
    }
    2.0 * (c * c + s * s).sqrt() / n as f64
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn operators_are_linear() {
    let rate = 5000.0;
    let x = SignalTrace::from_fn(4000, rate, 0.0, |t| (2.0 * PI * 31.0 * t).sin() + 0.3).unwrap();
    let y = SignalTrace::from_fn(4000, rate, 0.0, |t| (2.0 * PI * 7.0 * t).cos() * t).unwrap();
    let (alpha, beta) = (1.7, -0.45);
    let combo = SignalTrace::from_fn(4000, rate, 0.0, |t| {
        alpha * ((2.0 * PI * 31.0 * t).sin() + 0.3) + beta * (2.0 * PI * 7.0 * t).cos() * t
    })
    .unwrap();
    let spec = BandpassSpec::default();
    type Op = Box<dyn Fn(&SignalTrace) -> SignalTrace>;
    let ops: Vec<Op> = vec![
        Box::new(move |t| bandpass(t, &spec).unwrap()),
        Box::new(|t| downsample(t, 100.0).unwrap()),
    ];
    for op in ops {
        let lhs = op(&combo);
        let (ox, oy) = (op(&x), op(&y));
        let rhs: Vec<f64> = ox
            .samples()
            .iter()
            .zip(oy.samples())
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        assert!(max_rel_diff(lhs.samples(), &rhs) <= 1e-12);
    }
}

#[test]
fn band_pass_rejects_dc() {
    for rate in [5000.0, 1000.0] {
        let dc = SignalTrace::new(vec![2.5; (rate * 4.0) as usize], rate, 0.0).unwrap();
        let out = bandpass(&dc, &BandpassSpec::default()).unwrap();
        let tail = &out.samples()[out.len() - (rate as usize / 2)..];
        let peak = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 1e-3 * 2.5, "rate {rate}: {peak}");
    }
}

#[test]
fn impulse_response_decays() {
    let rate = 5000.0;
    let spec = BandpassSpec::default();
    let n = (10.0 * rate / spec.f_min) as usize;
    let mut imp = vec![0.0; 2 * n + 1];
    imp[0] = 1.0;
    let h = bandpass(&SignalTrace::new(imp, rate, 0.0).unwrap(), &spec).unwrap();
    let peak = |r: std::ops::Range<usize>| h.samples()[r].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak(n..2 * n + 1) < peak(0..n + 1));
}

#[test]
fn downsample_then_bandpass_commutes_in_band() {
    // At 200 Hz the anti-aliasing corner is 90 Hz, so the whole
    // 15-55 Hz pass band survives decimation.
    let spec = BandpassSpec::default();
    for freq in [25.0, 35.0, 45.0] {
        let x = sine(freq, 5000.0, 5000 * 6, 1.0);
        let high_first = downsample(&bandpass(&x, &spec).unwrap(), 200.0).unwrap();
        let low_first = bandpass(&downsample(&x, 200.0).unwrap(), &spec).unwrap();
        assert_eq!(high_first.len(), low_first.len());
        let a = tone_amplitude(&high_first, freq, 2.0);
        let b = tone_amplitude(&low_first, freq, 2.0);
        assert!((a / b - 1.0).abs() <= 0.02, "{freq} Hz: {a} vs {b}");
    }
}

#[test]
fn pipeline_keeps_the_mode_and_removes_the_operating_point() {
    let raw = SignalTrace::from_fn(50_000, 5000.0, 0.0, |t| 1.0 + 0.02 * (2.0 * PI * 30.0 * t).sin())
        .unwrap();
    let out = Pipeline::default().process(&raw).unwrap();
    assert_eq!(out.len(), 1000);
    assert_eq!(out.sample_rate(), 100.0);
    let tail = &out.samples()[500..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(mean.abs() < 1e-4, "{mean}");
    assert!((tone_amplitude(&out, 30.0, 4.0) / 0.02 - 1.0).abs() < 0.05);
}

#[test]
fn post_decimation_stage_clamps_the_band() {
    let raw = sine(30.0, 5000.0, 30_000, 1.0);
    let p = Pipeline {
        stage: FilterStage::PostDecimation,
        ..Pipeline::default()
    };
    let out = p.process(&raw).unwrap();
    assert_eq!(out.sample_rate(), 100.0);
    assert!(out.samples().iter().all(|v| v.is_finite()));
    let direct = bandpass(&downsample(&raw, 100.0).unwrap(), &BandpassSpec::default());
    assert!(matches!(direct, Err(SignalError::AboveNyquist { .. })));
}

#[test]
fn thirty_sample_window_spans_three_tenths_of_a_second() {
    let t = SignalTrace::from_fn(1000, 100.0, 0.0, |t| t).unwrap();
    let obs = extract_window(&t, 4.63, 30).unwrap();
    assert_eq!(obs.len(), 30);
    assert!((obs.window_start - 4.63).abs() < 1e-9);
    assert!((obs.values[29] - obs.values[0] - 0.29).abs() < 1e-9);
    assert!(matches!(
        extract_window(&t, 9.8, 30),
        Err(SignalError::WindowExceedsTrace { available: 20, .. })
    ));
}

#[test]
fn csv_round_trip() {
    let t = SignalTrace::from_fn(777, 5000.0, 1.25, |t| (t * 91.0).sin() * 1e-3 + 1.0).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let back = SignalTrace::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.sample_rate(), 5000.0);
    assert_eq!(back.len(), t.len());
    assert!((back.t0() - 1.25).abs() < 1e-12);
    assert_eq!(back.samples(), t.samples());
}

#[test]
fn unit_sine_energy_is_half_the_window() {
    let x = sine(48.0, 5000.0, 10_001, 1.0);
    let tw = 25.0 / 48.0;
    let e = oscillation_energy(&x, 0.0, tw).unwrap();
    assert!((e / (tw / 2.0) - 1.0).abs() <= 0.005, "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_nonnegative_and_quadratic(
        values in prop::collection::vec(-2.0f64..2.0, 2..200),
        alpha in -5.0f64..5.0,
    ) {
        let x = SignalTrace::new(values.clone(), 100.0, 0.0).unwrap();
        let h = x.duration();
        let e = oscillation_energy(&x, 0.0, h).unwrap();
        prop_assert!(e >= 0.0);
        let scaled = SignalTrace::new(values.iter().map(|v| alpha * v).collect(), 100.0, 0.0).unwrap();
        let es = oscillation_energy(&scaled, 0.0, h).unwrap();
        prop_assert!((es - alpha * alpha * e).abs() <= 1e-12 * es.abs().max(1e-300));
    }

    #[test]
    fn energy_vanishes_only_at_the_operating_point(p in -3.0f64..3.0, n in 2usize..100, k in 0usize..100) {
        let flat = SignalTrace::new(vec![p; n], 100.0, 0.0).unwrap();
        prop_assert_eq!(oscillation_energy(&flat, p, flat.duration()).unwrap(), 0.0);
        let mut bumped = vec![p; n];
        bumped[k % n] += 0.1;
        let b = SignalTrace::new(bumped, 100.0, 0.0).unwrap();
        prop_assert!(oscillation_energy(&b, p, b.duration()).unwrap() > 0.0);
    }

    #[test]
    fn constant_survives_downsampling(c in -10.0f64..10.0, factor in 1usize..6) {
        let rate = 100.0 * factor as f64;
        let x = SignalTrace::new(vec![c; 600 * factor], rate, 0.0).unwrap();
        let y = downsample(&x, 100.0).unwrap();
        prop_assert_eq!(y.len(), x.len().div_ceil(factor));
        let last = *y.samples().last().unwrap();
        prop_assert!((last - c).abs() <= 1e-9 * c.abs().max(1.0));
    }
}
