use super::*;
use crate::modem::{shape_symbols, PamAlphabet};

const TS: f64 = 8e-6;

fn tx(n_os: usize) -> TxConfig {
    TxConfig::new(TS, 1.0, n_os).unwrap()
}

fn cam_nyquist() -> CameraConfig {
    CameraConfig::with_exposure(TS, 1.0, 64, 4, 8).unwrap()
}

/// Integral of the piecewise-constant transmit intensity over
/// `[start, start + width)`, from the overlap of the window with each pulse.
fn overlap_oracle(symbols: &[f64], ts: f64, start: f64, width: f64, i0: f64) -> f64 {
    let end = start + width;
    let mut total = 0.0;
    let first = (start / ts).floor().max(0.0) as usize;
    for k in first..symbols.len() {
        let lo = (k as f64 * ts).max(start);
        let hi = ((k + 1) as f64 * ts).min(end);
        if hi > lo {
            total += i0 * (1.0 + symbols[k]) * (hi - lo);
        }
    }
    total
}

#[test]
fn camera_config_validation() {
    assert!(CameraConfig::new(1e-5, 1e5, 1.0, 10, 10, 8).is_ok());
    assert!(matches!(
        CameraConfig::new(1e-5, 0.9e5, 1.0, 10, 10, 8),
        Err(Error::Config(_))
    ));
    assert!(CameraConfig::new(0.0, 1e5, 1.0, 10, 10, 8).is_err());
    assert!(CameraConfig::with_exposure(1e-5, 0.0, 10, 10, 8).is_err());
    assert!(CameraConfig::with_exposure(1e-5, 1.0, 0, 10, 8).is_err());
    assert!(CameraConfig::with_exposure(1e-5, 1.0, 10, 10, 12).is_err());
}

#[test]
fn timing_offset_range() {
    assert!(TimingOffset::new(-1e-9, TS).is_err());
    assert!(TimingOffset::new(TS, TS).is_err());
    let o = TimingOffset::from_fraction(0.25, TS).unwrap();
    assert!((o.fraction() - 0.25).abs() < 1e-15);
    assert_eq!(o.grid_position(TS / 64.0), (16, 0.0));
    let o = TimingOffset::from_fraction(0.1, TS).unwrap();
    let (steps, frac) = o.grid_position(TS / 256.0);
    assert_eq!(steps, 25);
    assert!((frac - 0.6).abs() < 1e-9);
}

#[test]
fn non_integer_window_is_a_config_error() {
    let w = Waveform::new(vec![1.0; 100], TS / 10.0, 0.0).unwrap();
    let cam = CameraConfig::with_exposure(TS * 0.55, 1.0, 4, 4, 8).unwrap();
    assert!(matches!(matched_filter(&w, &cam), Err(Error::Config(_))));
}

#[test]
fn constant_input_integrates_to_gain_times_exposure() {
    let cam = CameraConfig::with_exposure(TS, 2.5, 4, 4, 8).unwrap();
    let w = Waveform::new(vec![0.6; 400], TS / 40.0, 0.0).unwrap();
    let r = matched_filter(&w, &cam).unwrap();
    for v in &r.samples()[39..] {
        assert!((v - 2.5 * TS * 0.6).abs() < 1e-18);
    }
}

#[test]
fn rect_through_rect_gives_triangle() {
    let m = 50;
    let dt = TS / m as f64;
    let mut x = vec![0.0; 4 * m];
    x[m..2 * m].fill(1.0);
    let w = Waveform::new(x, dt, 0.0).unwrap();
    let cam = CameraConfig::with_exposure(TS, 1.0, 4, 4, 8).unwrap();
    let r = matched_filter(&w, &cam).unwrap();
    let peak = r.samples().iter().cloned().fold(0.0, f64::max);
    assert!((peak - TS).abs() < 1e-18);
    // window ending at sample k covers [(k-m+1)dt, (k+1)dt); compare with the
    // continuous overlap of that window with the pulse [T, 2T).
    for k in 0..r.len() {
        let start = (k as f64 + 1.0 - m as f64) * dt;
        let end = start + TS;
        let overlap = (end.min(2.0 * TS) - start.max(TS)).max(0.0);
        assert!((r.samples()[k] - overlap).abs() < 1e-12 * TS, "k={k}");
    }
    // nonzero support spans 2·T_exp
    let support = r.samples().iter().filter(|v| **v > 1e-20).count();
    assert_eq!(support, 2 * m - 1);
}

#[test]
fn capture_rows_matches_filter_then_sample() {
    let symbols = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 0.0];
    let t = tx(32);
    let w = shape_symbols(&symbols, &t);
    let cam = CameraConfig::with_exposure(TS, 1.3, 16, 1, 8).unwrap();
    for frac in [0.0, 0.125, 0.5, 0.875, 0.1, 0.33] {
        let off = TimingOffset::from_fraction(frac, TS).unwrap();
        let rows = 7;
        let a = sample_rows(&matched_filter(&w, &cam).unwrap(), &cam, &off, rows).unwrap();
        let b = capture_rows(&w, &cam, &off, rows).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn row_samples_match_overlap_oracle() {
    let symbols = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
    let t = tx(256);
    let w = shape_symbols(&symbols, &t);
    let cam = cam_nyquist();
    for frac in [0.0, 0.1, 0.25, 0.4, 0.5, 0.75, 0.013, 0.6667] {
        let off = TimingOffset::from_fraction(frac, TS).unwrap();
        let y = capture_rows(&w, &cam, &off, 7).unwrap();
        for (n, v) in y.values.iter().enumerate() {
            let expected = overlap_oracle(&symbols, TS, n as f64 * TS + off.delta(), TS, 0.5);
            assert!((v - expected).abs() < 1e-9 * TS, "frac {frac} row {n}");
        }
    }
}

#[test]
fn insufficient_waveform_is_shape_error() {
    let t = tx(16);
    let w = shape_symbols(&[1.0, -1.0, 1.0], &t);
    let cam = cam_nyquist();
    let off = TimingOffset::from_fraction(0.5, TS).unwrap();
    assert!(capture_rows(&w, &cam, &off, 2).is_ok());
    assert!(matches!(capture_rows(&w, &cam, &off, 3), Err(Error::Shape(_))));
    let r = matched_filter(&w, &cam).unwrap();
    assert!(matches!(sample_rows(&r, &cam, &off, 3), Err(Error::Shape(_))));
    assert_eq!(max_rows(&w, &cam, &off).unwrap(), 2);
}

#[test]
fn perfect_sync_rows_are_the_symbols() {
    let symbols = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
    let t = tx(64);
    let w = shape_symbols(&symbols, &t);
    let cam = cam_nyquist();
    let y = capture_rows(&w, &cam, &TimingOffset::zero(TS).unwrap(), 6).unwrap();
    let yn = normalize_rows(&y, &cam, &t).unwrap();
    assert_eq!(yn.values, symbols.to_vec());
}

#[test]
fn quarter_offset_bpsk_levels() {
    let alphabet = PamAlphabet::bpsk();
    let bits: Vec<u8> = (0..64).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
    let symbols = crate::modem::map_bits(&bits, &alphabet).unwrap();
    let t = tx(64);
    let w = shape_symbols(&symbols, &t);
    let cam = cam_nyquist();
    let off = TimingOffset::from_fraction(0.25, TS).unwrap();
    let y = capture_rows(&w, &cam, &off, symbols.len() - 1).unwrap();
    let yn = normalize_rows(&y, &cam, &t).unwrap();
    for (n, v) in yn.values.iter().enumerate() {
        let expected = 0.75 * symbols[n] + 0.25 * symbols[n + 1];
        assert!((v - expected).abs() < 1e-12);
        assert!([-1.0, -0.5, 0.5, 1.0].iter().any(|l| (v - l).abs() < 1e-12));
    }
}

#[test]
fn half_offset_alternating_cancels() {
    let symbols: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let t = tx(64);
    let w = shape_symbols(&symbols, &t);
    let cam = cam_nyquist();
    let off = TimingOffset::from_fraction(0.5, TS).unwrap();
    let y = capture_rows(&w, &cam, &off, 19).unwrap();
    let unit = cam.sensor_gain() * cam.exposure_time() * t.nominal_intensity();
    for v in &y.values {
        assert!(((v - unit) / unit).abs() < 1e-12);
    }
    // every row is at the bias, so nothing is modulated
    assert!(matches!(normalize_rows(&y, &cam, &t), Err(Error::UnusableCapture(_))));
}

#[test]
fn oversampled_capture_staircase() {
    // T_s = 3·T_exp: every row lies inside one symbol at zero offset
    let symbols = [1.0, -1.0, 1.0, 1.0];
    let t = tx(48);
    let w = shape_symbols(&symbols, &t);
    let cam = CameraConfig::with_exposure(TS / 3.0, 1.0, 12, 1, 8).unwrap();
    let y = capture_rows(&w, &cam, &TimingOffset::zero(TS).unwrap(), 12).unwrap();
    let yn = normalize_rows(&y, &cam, &t).unwrap();
    for (n, v) in yn.values.iter().enumerate() {
        assert!((v - symbols[n / 3]).abs() < 1e-12);
    }
}

#[test]
fn unusable_capture_detection() {
    let cam = cam_nyquist();
    let t = tx(8);
    let flat = RowSamples::new(vec![3.0; 10], TS);
    assert!(matches!(normalize_rows(&flat, &cam, &t), Err(Error::UnusableCapture(_))));
    assert!(matches!(
        normalize_rows_two_point(&flat, 0..10),
        Err(Error::UnusableCapture(_))
    ));
    assert!(matches!(
        normalize_rows_two_point(&flat, 0..11),
        Err(Error::Shape(_))
    ));
}

#[test]
fn two_point_normalization() {
    let y = RowSamples::new(vec![2.0, 4.0, 3.0, 2.5, 10.0], TS);
    let yn = normalize_rows_two_point(&y, 0..4).unwrap();
    assert_eq!(yn.values, vec![-1.0, 1.0, 0.0, -0.5, 7.0]);
}

#[test]
fn render_endpoints_and_alternation() {
    let cam = CameraConfig::with_exposure(TS, 1.0, 4, 3, 8).unwrap();
    let fs = cam.full_scale(&tx(8));
    let y = RowSamples::new(vec![0.0, fs, 0.0, fs], TS);
    let img = render_stripe_image(&y, &cam, fs).unwrap();
    assert_eq!(img.row(0), &[0, 0, 0]);
    assert_eq!(img.row(1), &[255, 255, 255]);
    assert_eq!(img.row(2), &[0, 0, 0]);
    assert_eq!(img.row(3), &[255, 255, 255]);

    let cam16 = CameraConfig::with_exposure(TS, 1.0, 2, 1, 16).unwrap();
    let img = render_stripe_image(&RowSamples::new(vec![-1.0, 2.0 * fs], TS), &cam16, fs).unwrap();
    assert_eq!(img.pixels(), &[0, 65535]);
}

#[test]
fn quantizer_rounds_half_away_from_zero() {
    assert_eq!(quantize(0.5 / 255.0, 1.0, 255), 1);
    assert_eq!(quantize(1.5 / 255.0, 1.0, 255), 2);
    assert_eq!(quantize(1.49 / 255.0, 1.0, 255), 1);
    assert_eq!(quantize(f64::NAN, 1.0, 255), 0);
}

#[test]
fn render_rejects_too_many_rows() {
    let cam = CameraConfig::with_exposure(TS, 1.0, 2, 1, 8).unwrap();
    let y = RowSamples::new(vec![0.0; 3], TS);
    assert!(matches!(render_stripe_image(&y, &cam, 1.0), Err(Error::Shape(_))));
}

#[test]
fn ingest_recovers_quantized_rows() {
    let cam = CameraConfig::with_exposure(TS, 1.0, 5, 6, 8).unwrap();
    let fs = 1.0;
    let y = RowSamples::new(vec![0.1, 0.37, 0.999, 0.5, 0.0], TS);
    let img = render_stripe_image(&y, &cam, fs).unwrap();
    let back = ingest_stripe_image(&img, 1..4, fs, TS).unwrap();
    for (orig, got) in y.values.iter().zip(&back.values) {
        let q = quantize(*orig, fs, 255) as f64 * (fs / 255.0);
        assert_eq!(*got, q);
        assert!((got - orig).abs() <= 0.5 * fs / 255.0 + 1e-15);
    }
}

#[test]
fn ingest_two_row_image() {
    let img = StripeImage::new(2, 4, 8, vec![0, 0, 0, 0, 255, 255, 255, 255]).unwrap();
    let y = ingest_stripe_image(&img, 0..4, 3.0, TS).unwrap();
    assert_eq!(y.values, vec![0.0, 3.0]);
    assert!(matches!(ingest_stripe_image(&img, 2..2, 3.0, TS), Err(Error::Shape(_))));
    assert!(matches!(ingest_stripe_image(&img, 0..5, 3.0, TS), Err(Error::Shape(_))));
}

#[test]
fn row_mean_variance_shrinks_with_roi_width() {
    // per-pixel dither of ±1 code around mid-gray
    let mut gen = crate::numerics::SeededGaussian::new(11);
    let rows = 4000;
    let cols = 64;
    let pixels: Vec<u16> = (0..rows * cols)
        .map(|_| if gen.next_bit() == 1 { 129 } else { 127 })
        .collect();
    let img = StripeImage::new(rows, cols, 8, pixels).unwrap();
    let var = |w: usize| {
        let y = ingest_stripe_image(&img, 0..w, 255.0, TS).unwrap();
        let mean = y.values.iter().sum::<f64>() / rows as f64;
        y.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rows - 1) as f64
    };
    // single-pixel variance is 1 code²; the mean over w pixels has variance 1/w
    for w in [1usize, 4, 16, 64] {
        let v = var(w);
        let expected = 1.0 / w as f64;
        assert!((v / expected - 1.0).abs() < 0.1, "w={w} var={v}");
    }
}

#[test]
fn stripe_image_validation() {
    assert!(StripeImage::new(2, 2, 8, vec![0; 3]).is_err());
    assert!(StripeImage::new(1, 1, 8, vec![256]).is_err());
    assert!(StripeImage::new(1, 1, 12, vec![0]).is_err());
}
