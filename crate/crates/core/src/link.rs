//! End-to-end composition: transmitter → LED → optical path → rolling-shutter
//! capture, and the receive chain sync → estimate → design → equalize → slice.

use serde::{Deserialize, Serialize};

use crate::camera::{self, CameraConfig, RowSamples, TimingOffset};
use crate::equalizer::{self, ChannelEstimate, DelayChoice, FrameSync, ZfEqualizer};
use crate::error::{Error, Result};
use crate::modem::{self, PamAlphabet, TxConfig};
use crate::optics::{self, LedModel, OpticalChannel};
use crate::waveform::Waveform;

/// Physical parameters of one simulated capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub tx: TxConfig,
    /// `T_s / T_exp`; 1 is one symbol per row.
    pub rows_per_symbol: usize,
    pub sensor_gain: f64,
    pub led: LedModel,
    pub channel: OpticalChannel,
    pub offset: TimingOffset,
    /// Idle (bias-only) symbols sent before the frame.
    pub lead_symbols: usize,
    /// Idle symbols sent after the frame.
    pub trail_symbols: usize,
}

impl LinkParams {
    pub fn exposure_time(&self) -> f64 {
        self.tx.symbol_duration() / self.rows_per_symbol as f64
    }

    pub fn camera(&self, rows: usize, cols: usize, bit_depth: u32) -> Result<CameraConfig> {
        if self.rows_per_symbol == 0 || self.tx.oversampling() % self.rows_per_symbol != 0 {
            return Err(Error::Config(format!(
                "oversampling {} must be a multiple of the rows per symbol {}",
                self.tx.oversampling(),
                self.rows_per_symbol
            )));
        }
        CameraConfig::with_exposure(self.exposure_time(), self.sensor_gain, rows, cols, bit_depth)
    }
}

/// Image size; `rows: None` sizes the image to the whole capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub rows: Option<usize>,
    pub cols: usize,
    pub bit_depth: u32,
}

impl Default for ImageGeometry {
    fn default() -> Self {
        Self {
            rows: None,
            cols: 16,
            bit_depth: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Capture {
    /// DC-biased transmit waveform `x(t)`, including idle padding.
    pub transmitted: Waveform,
    /// Intensity reaching the sensor, after the LED and the optical path.
    pub received: Waveform,
    /// Raw row samples `y[n]`.
    pub rows: RowSamples,
    /// Row whose exposure window starts at the first frame symbol plus `δ`.
    pub first_frame_row: usize,
    pub camera: CameraConfig,
}

/// Transmit `symbols` with idle padding and capture them.
pub fn simulate_capture(symbols: &[f64], params: &LinkParams, geometry: ImageGeometry) -> Result<Capture> {
    let mut padded = vec![0.0; params.lead_symbols];
    padded.extend_from_slice(symbols);
    padded.extend(std::iter::repeat_n(0.0, params.trail_symbols));

    let transmitted = modem::shape_symbols(&padded, &params.tx);
    let emitted = optics::apply_led(&transmitted, &params.led);
    let received = optics::apply_channel(&emitted, &params.channel);

    let probe = params.camera(1, geometry.cols, geometry.bit_depth)?;
    let available = camera::max_rows(&received, &probe, &params.offset)?;
    let image_rows = geometry.rows.unwrap_or(available);
    let cam = params.camera(image_rows, geometry.cols, geometry.bit_depth)?;
    let rows = camera::capture_rows(&received, &cam, &params.offset, available.min(image_rows))?;
    Ok(Capture {
        transmitted,
        received,
        rows,
        first_frame_row: params.lead_symbols * params.rows_per_symbol,
        camera: cam,
    })
}

/// Receiver settings for one frame layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub alphabet: PamAlphabet,
    pub preamble: Vec<f64>,
    pub payload_symbols: usize,
    pub channel_memory: usize,
    pub eq_taps: usize,
    pub delay: DelayChoice,
    pub sync_threshold: f64,
    /// Rows before the correlation peak where the estimation window starts, so
    /// that interference from the following symbol appears as a causal tap.
    pub precursor_rows: usize,
    pub slicer_seed: u64,
}

impl ReceiverConfig {
    pub fn new(alphabet: PamAlphabet, preamble: Vec<f64>, payload_symbols: usize) -> Self {
        Self {
            alphabet,
            preamble,
            payload_symbols,
            channel_memory: equalizer::DEFAULT_CHANNEL_MEMORY,
            eq_taps: equalizer::DEFAULT_EQ_TAPS,
            delay: DelayChoice::Auto,
            sync_threshold: equalizer::DEFAULT_SYNC_THRESHOLD,
            precursor_rows: 1,
            slicer_seed: 0,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.preamble.len() + self.payload_symbols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reception {
    pub sync: FrameSync,
    pub estimate: ChannelEstimate,
    pub equalizer: ZfEqualizer,
    /// Equalizer output aligned to frame symbols (preamble and payload).
    pub equalized: Vec<f64>,
    pub payload_symbols: Vec<f64>,
    pub payload_bits: Vec<u8>,
}

impl Reception {
    pub fn payload_soft<'a>(&'a self, cfg: &ReceiverConfig) -> &'a [f64] {
        &self.equalized[cfg.preamble.len()..]
    }

    /// Estimated `(main, next)` coupling of the row aligned with the first
    /// frame symbol. `None` when that row precedes the estimation window.
    pub fn coupling(&self, aligned_row: usize) -> Option<(f64, f64)> {
        let main_index = aligned_row.checked_sub(self.estimate.frame_start)?;
        Some(equalizer::offset_pair(&self.estimate.taps, main_index))
    }
}

/// Preamble search restricted to the lags at which the whole frame still fits
/// in the capture. Payload windows can correlate with the preamble about as
/// well as a strongly blurred preamble does, so lags past the last possible
/// frame start are never considered.
pub fn sync_frame(y: &[f64], cfg: &ReceiverConfig) -> Result<FrameSync> {
    let frame_len = cfg.frame_len();
    if y.len() < frame_len {
        return Err(Error::Shape(format!(
            "a {frame_len}-symbol frame does not fit in {} rows",
            y.len()
        )));
    }
    let last_start = y.len() - frame_len;
    let search = &y[..last_start + cfg.preamble.len()];
    equalizer::find_frame_start(search, &cfg.preamble, cfg.sync_threshold)
}

/// Decode normalized rows: sync, LS channel estimate, ZF design, equalize and
/// slice the payload.
pub fn receive(y: &[f64], cfg: &ReceiverConfig) -> Result<Reception> {
    let sync = sync_frame(y, cfg)?;
    let frame_start = sync.start.saturating_sub(cfg.precursor_rows);
    let estimate = equalizer::estimate_channel(y, &cfg.preamble, frame_start, cfg.channel_memory)?;
    let eq = equalizer::design_zf(&estimate.taps, cfg.eq_taps, cfg.delay)?;
    let equalized = equalizer::equalize(y, &eq, frame_start, cfg.frame_len())?;
    let soft = &equalized[cfg.preamble.len()..];
    let payload_symbols = modem::slice(soft, &cfg.alphabet, cfg.slicer_seed);
    let payload_bits = modem::symbols_to_bits(&payload_symbols, &cfg.alphabet)?;
    Ok(Reception {
        sync,
        estimate,
        equalizer: eq,
        equalized,
        payload_symbols,
        payload_bits,
    })
}

/// Payload decisions read straight off the rows aligned with the correlation
/// peak, with no equalization.
pub fn slice_unequalized(y: &[f64], sync: &FrameSync, cfg: &ReceiverConfig) -> Result<Vec<f64>> {
    let start = sync.start + cfg.preamble.len();
    let end = start + cfg.payload_symbols;
    let rows = y.get(start..end).ok_or_else(|| {
        Error::Shape(format!("payload rows {start}..{end} exceed the {}-row capture", y.len()))
    })?;
    Ok(modem::slice(rows, &cfg.alphabet, cfg.slicer_seed))
}

/// Normalize rows of unknown scale and decode them. Two-point normalization is
/// first applied over the whole capture to find the frame, then refined over
/// the preamble rows.
pub fn receive_blind(raw: &RowSamples, cfg: &ReceiverConfig) -> Result<(RowSamples, Reception)> {
    let coarse = camera::normalize_rows_two_point(raw, 0..raw.len())?;
    let sync = sync_frame(&coarse.values, cfg)?;
    let end = (sync.start + cfg.preamble.len()).min(raw.len());
    let fine = camera::normalize_rows_two_point(raw, sync.start..end)?;
    let rx = receive(&fine.values, cfg)?;
    Ok((fine, rx))
}

/// Row samples normalized with the known bias and scale of the simulation.
pub fn normalize_capture(capture: &Capture, params: &LinkParams) -> Result<RowSamples> {
    camera::normalize_rows_with_gain(&capture.rows, &capture.camera, &params.tx, params.channel.gain())
}

/// Peak-to-peak spread of a set of row values.
pub fn row_contrast(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Full-scale intensity of the rendered image for a link.
pub fn full_scale(cam: &CameraConfig, params: &LinkParams) -> f64 {
    cam.full_scale(&params.tx) * params.channel.gain()
}
