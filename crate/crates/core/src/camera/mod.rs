//! Rolling-shutter receiver model.
//!
//! Each pixel row integrates the incident intensity for the exposure time
//! `T_exp`, and successive rows start `T_exp` apart. That is a rectangular
//! matched filter of width `T_exp` followed by sampling at the row rate
//! `f_row = 1/T_exp`. Row `n` of a capture with timing offset `δ` integrates
//! `[n·T_exp + δ, (n+1)·T_exp + δ)`, so at one symbol per row the interfering
//! symbol is the *next* one.

pub mod pgm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::TxConfig;
use crate::waveform::Waveform;

/// Relative tolerance for "integer multiple of the grid step" checks.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    exposure_time: f64,
    row_rate_hz: f64,
    sensor_gain: f64,
    rows: usize,
    cols: usize,
    bit_depth: u32,
}

impl CameraConfig {
    /// Rejects any configuration where the row period differs from the
    /// exposure time (no readout gaps).
    pub fn new(
        exposure_time: f64,
        row_rate_hz: f64,
        sensor_gain: f64,
        rows: usize,
        cols: usize,
        bit_depth: u32,
    ) -> Result<Self> {
        if !(exposure_time > 0.0 && exposure_time.is_finite()) {
            return Err(Error::Config(format!(
                "exposure time must be positive, got {exposure_time}"
            )));
        }
        if (row_rate_hz * exposure_time - 1.0).abs() > GRID_TOLERANCE {
            return Err(Error::Config(format!(
                "row rate {row_rate_hz} Hz does not equal 1/T_exp = {} Hz",
                1.0 / exposure_time
            )));
        }
        if !(sensor_gain > 0.0 && sensor_gain.is_finite()) {
            return Err(Error::Config(format!(
                "sensor gain must be positive, got {sensor_gain}"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "image must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::Config(format!("bit depth must be 8 or 16, got {bit_depth}")));
        }
        Ok(Self {
            exposure_time,
            row_rate_hz,
            sensor_gain,
            rows,
            cols,
            bit_depth,
        })
    }

    /// Camera whose row rate is `1/exposure_time`.
    pub fn with_exposure(
        exposure_time: f64,
        sensor_gain: f64,
        rows: usize,
        cols: usize,
        bit_depth: u32,
    ) -> Result<Self> {
        Self::new(exposure_time, 1.0 / exposure_time, sensor_gain, rows, cols, bit_depth)
    }

    pub fn exposure_time(&self) -> f64 {
        self.exposure_time
    }

    pub fn row_rate_hz(&self) -> f64 {
        self.row_rate_hz
    }

    pub fn sensor_gain(&self) -> f64 {
        self.sensor_gain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bit_depth(&self) -> u32 {
        self.bit_depth
    }

    pub fn max_pixel(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    /// Filter output for a constant `I_max` input, the top of the pixel range.
    pub fn full_scale(&self, tx: &TxConfig) -> f64 {
        self.sensor_gain * self.exposure_time * tx.max_intensity()
    }

    /// Exposure window length in grid samples.
    pub fn window_len(&self, dt: f64) -> Result<usize> {
        let ratio = self.exposure_time / dt;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > GRID_TOLERANCE * m {
            return Err(Error::Config(format!(
                "exposure time {} s is not an integer multiple of the grid step {dt} s \
                 (ratio {ratio}); choose an oversampling that makes T_exp = m·Δt",
                self.exposure_time
            )));
        }
        Ok(m as usize)
    }
}

/// Transmitter-to-camera misalignment, constant over one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingOffset {
    delta: f64,
    symbol_duration: f64,
}

impl TimingOffset {
    pub fn new(delta: f64, symbol_duration: f64) -> Result<Self> {
        if !(symbol_duration > 0.0) {
            return Err(Error::Config(format!(
                "symbol duration must be positive, got {symbol_duration}"
            )));
        }
        if !(0.0..symbol_duration).contains(&delta) {
            return Err(Error::Config(format!(
                "timing offset must lie in [0, T_s) = [0, {symbol_duration}), got {delta}"
            )));
        }
        Ok(Self {
            delta,
            symbol_duration,
        })
    }

    /// Offset given as a fraction of the symbol duration.
    pub fn from_fraction(fraction: f64, symbol_duration: f64) -> Result<Self> {
        Self::new(fraction * symbol_duration, symbol_duration)
    }

    pub fn zero(symbol_duration: f64) -> Result<Self> {
        Self::new(0.0, symbol_duration)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn fraction(&self) -> f64 {
        self.delta / self.symbol_duration
    }

    /// Offset in grid steps, split into whole steps and a fractional part.
    /// Offsets within a tiny tolerance of a grid point count as on the grid.
    pub fn grid_position(&self, dt: f64) -> (usize, f64) {
        let x = self.delta / dt;
        let nearest = x.round();
        if (x - nearest).abs() <= GRID_TOLERANCE * nearest.max(1.0) {
            (nearest as usize, 0.0)
        } else {
            (x.floor() as usize, x - x.floor())
        }
    }
}

/// Row samples `y[n]` of one capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSamples {
    pub values: Vec<f64>,
    pub row_period: f64,
}

impl RowSamples {
    pub fn new(values: Vec<f64>, row_period: f64) -> Self {
        Self { values, row_period }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// Sum of w[lo..=hi] left to right, scaled.
fn window_sum(w: &[f64], end: usize, m: usize, scale: f64) -> f64 {
    let lo = (end + 1).saturating_sub(m);
    scale * w[lo..=end].iter().fold(0.0, |acc, v| acc + v)
}

/// Convolution with the exposure kernel:
/// `r_k = G_cam·Δt·Σ_{j=0}^{m−1} w_{k−j}`, where `m = T_exp/Δt`.
///
/// Output sample `k` is the integral over grid samples `k−m+1 ..= k`; the first
/// `m−1` outputs only see part of the window.
pub fn matched_filter(w: &Waveform, cam: &CameraConfig) -> Result<Waveform> {
    let m = cam.window_len(w.dt())?;
    let scale = cam.sensor_gain() * w.dt();
    let s = w.samples();
    let out = (0..s.len()).map(|k| window_sum(s, k, m, scale)).collect();
    Ok(w.with_samples(out))
}

fn row_end_index(n: usize, m: usize, steps: usize) -> usize {
    (n + 1) * m + steps - 1
}

// Highest filter-output index a capture of `n_rows` reads.
fn last_index(n_rows: usize, m: usize, (steps, frac): (usize, f64)) -> usize {
    row_end_index(n_rows - 1, m, steps) + usize::from(frac > 0.0)
}

fn shape_check(n_rows: usize, m: usize, pos: (usize, f64), available: usize) -> Result<()> {
    if n_rows == 0 {
        return Ok(());
    }
    let last = last_index(n_rows, m, pos);
    if last >= available {
        return Err(Error::Shape(format!(
            "{n_rows} rows at offset {} steps need {} samples, waveform has {available}",
            pos.0 as f64 + pos.1,
            last + 1
        )));
    }
    Ok(())
}

// Value between two consecutive filter outputs. The grid signal is held
// constant over each step, so the running integral is piecewise linear and the
// interpolated value is the exact integral over the shifted window.
fn interpolate(at: f64, next: impl FnOnce() -> f64, frac: f64) -> f64 {
    if frac == 0.0 {
        at
    } else {
        (1.0 - frac) * at + frac * next()
    }
}

/// Sample the matched-filter output at the end of each row window:
/// `y[n] = r[(n+1)·m + s − 1]`, with `s` the offset in grid steps. Offsets
/// between grid points interpolate linearly between adjacent outputs.
pub fn sample_rows(
    r: &Waveform,
    cam: &CameraConfig,
    offset: &TimingOffset,
    n_rows: usize,
) -> Result<RowSamples> {
    let m = cam.window_len(r.dt())?;
    let pos = offset.grid_position(r.dt());
    shape_check(n_rows, m, pos, r.len())?;
    let s = r.samples();
    let values = (0..n_rows)
        .map(|n| {
            let i = row_end_index(n, m, pos.0);
            interpolate(s[i], || s[i + 1], pos.1)
        })
        .collect();
    Ok(RowSamples::new(values, cam.exposure_time()))
}

/// Number of whole rows a waveform supports at the given offset.
pub fn max_rows(w: &Waveform, cam: &CameraConfig, offset: &TimingOffset) -> Result<usize> {
    let m = cam.window_len(w.dt())?;
    let (steps, frac) = offset.grid_position(w.dt());
    let used = steps + usize::from(frac > 0.0);
    Ok(w.len().saturating_sub(used) / m)
}

/// Integrate only the windows that [`sample_rows`] would read. Bit-identical to
/// `sample_rows(matched_filter(w))`, without computing the full filter output.
pub fn capture_rows(
    w: &Waveform,
    cam: &CameraConfig,
    offset: &TimingOffset,
    n_rows: usize,
) -> Result<RowSamples> {
    let m = cam.window_len(w.dt())?;
    let pos = offset.grid_position(w.dt());
    shape_check(n_rows, m, pos, w.len())?;
    let scale = cam.sensor_gain() * w.dt();
    let s = w.samples();
    let values = (0..n_rows)
        .map(|n| {
            let i = row_end_index(n, m, pos.0);
            interpolate(window_sum(s, i, m, scale), || window_sum(s, i + 1, m, scale), pos.1)
        })
        .collect();
    Ok(RowSamples::new(values, cam.exposure_time()))
}

fn peak_to_peak(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    })
}

fn check_modulated(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::UnusableCapture("capture has no rows".into()));
    }
    let (lo, hi) = peak_to_peak(values);
    let magnitude = lo.abs().max(hi.abs());
    if !(hi - lo > 1e-12 * magnitude) || !(hi - lo).is_finite() {
        return Err(Error::UnusableCapture(format!(
            "rows span [{lo}, {hi}]; no modulation present"
        )));
    }
    Ok((lo, hi))
}

/// Remove the known bias `G_cam·T_exp·I_0` and scale by it, so ideal levels
/// land on the PAM alphabet.
pub fn normalize_rows(y: &RowSamples, cam: &CameraConfig, tx: &TxConfig) -> Result<RowSamples> {
    normalize_rows_with_gain(y, cam, tx, 1.0)
}

/// [`normalize_rows`] for a known optical path gain.
pub fn normalize_rows_with_gain(
    y: &RowSamples,
    cam: &CameraConfig,
    tx: &TxConfig,
    path_gain: f64,
) -> Result<RowSamples> {
    check_modulated(&y.values)?;
    let unit = path_gain * cam.sensor_gain() * cam.exposure_time() * tx.nominal_intensity();
    Ok(RowSamples::new(
        y.values.iter().map(|v| (v - unit) / unit).collect(),
        y.row_period,
    ))
}

/// Two-point normalization for captures of unknown scale: the midrange of
/// `region` maps to 0 and its extremes to ±1.
pub fn normalize_rows_two_point(
    y: &RowSamples,
    region: std::ops::Range<usize>,
) -> Result<RowSamples> {
    let values = y.values.get(region.clone()).ok_or_else(|| {
        Error::Shape(format!(
            "normalization region {region:?} exceeds {} rows",
            y.len()
        ))
    })?;
    let (lo, hi) = check_modulated(values)?;
    let mid = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    Ok(RowSamples::new(
        y.values.iter().map(|v| (v - mid) / half).collect(),
        y.row_period,
    ))
}

/// Grayscale image of the stripe pattern, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeImage {
    rows: usize,
    cols: usize,
    bit_depth: u32,
    pixels: Vec<u16>,
}

impl StripeImage {
    pub fn new(rows: usize, cols: usize, bit_depth: u32, pixels: Vec<u16>) -> Result<Self> {
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::Config(format!("bit depth must be 8 or 16, got {bit_depth}")));
        }
        if rows == 0 || cols == 0 || rows * cols != pixels.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} image cannot hold {} pixels",
                pixels.len()
            )));
        }
        let max = ((1u32 << bit_depth) - 1) as u16;
        if let Some(p) = pixels.iter().find(|p| **p > max) {
            return Err(Error::Domain(format!(
                "pixel value {p} exceeds {max} for {bit_depth}-bit depth"
            )));
        }
        Ok(Self {
            rows,
            cols,
            bit_depth,
            pixels,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bit_depth(&self) -> u32 {
        self.bit_depth
    }

    pub fn max_value(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn row(&self, n: usize) -> &[u16] {
        &self.pixels[n * self.cols..(n + 1) * self.cols]
    }
}

/// Map an intensity in `[0, full_scale]` onto `[0, max]`, rounding half away
/// from zero and saturating.
pub fn quantize(value: f64, full_scale: f64, max: u16) -> u16 {
    let q = (value / full_scale * max as f64).round();
    if q.is_nan() {
        0
    } else {
        q.clamp(0.0, max as f64) as u16
    }
}

/// One stripe per row sample, replicated across all columns. Rows past the end
/// of `y` are left dark.
pub fn render_stripe_image(y: &RowSamples, cam: &CameraConfig, full_scale: f64) -> Result<StripeImage> {
    if y.len() > cam.rows() {
        return Err(Error::Shape(format!(
            "{} row samples do not fit in a {}-row image",
            y.len(),
            cam.rows()
        )));
    }
    let max = cam.max_pixel();
    let mut pixels = vec![0u16; cam.rows() * cam.cols()];
    for (n, v) in y.values.iter().enumerate() {
        let q = quantize(*v, full_scale, max);
        pixels[n * cam.cols()..(n + 1) * cam.cols()].fill(q);
    }
    StripeImage::new(cam.rows(), cam.cols(), cam.bit_depth(), pixels)
}

/// Average each row over `roi_cols` and map back to intensity units.
pub fn ingest_stripe_image(
    img: &StripeImage,
    roi_cols: std::ops::Range<usize>,
    full_scale: f64,
    row_period: f64,
) -> Result<RowSamples> {
    if roi_cols.is_empty() || roi_cols.end > img.cols() {
        return Err(Error::Shape(format!(
            "column range {roi_cols:?} is empty or outside a {}-column image",
            img.cols()
        )));
    }
    let width = roi_cols.len() as f64;
    let to_intensity = full_scale / img.max_value() as f64;
    let values = (0..img.rows())
        .map(|n| {
            let sum: u64 = img.row(n)[roi_cols.clone()].iter().map(|p| *p as u64).sum();
            sum as f64 / width * to_intensity
        })
        .collect();
    Ok(RowSamples::new(values, row_period))
}

#[cfg(test)]
mod tests;
