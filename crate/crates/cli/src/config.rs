//! Run configuration: JSON schema, defaults, validation and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use occlink::modem::{PamAlphabet, MAX_ORDER};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Timing offset as a fraction of `T_s`, or drawn per image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OffsetSpec {
    Fraction(f64),
    Named(RandomOffset),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RandomOffset {
    #[serde(rename = "random")]
    Random,
}

impl OffsetSpec {
    pub const RANDOM: OffsetSpec = OffsetSpec::Named(RandomOffset::Random);

    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(Self::RANDOM);
        }
        s.parse::<f64>()
            .map(Self::Fraction)
            .map_err(|_| format!("expected a fraction of T_s or \"random\", got {s:?}"))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Fraction(f) => f.to_string(),
            Self::Named(_) => "random".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Fixed(usize),
    Named(AutoDelay),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoDelay {
    #[serde(rename = "auto")]
    Auto,
}

impl DelaySpec {
    pub const AUTO: DelaySpec = DelaySpec::Named(AutoDelay::Auto);

    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::AUTO);
        }
        s.parse::<usize>()
            .map(Self::Fixed)
            .map_err(|_| format!("expected a delay in rows or \"auto\", got {s:?}"))
    }

    pub fn choice(&self) -> occlink::equalizer::DelayChoice {
        match self {
            Self::Fixed(d) => occlink::equalizer::DelayChoice::Fixed(*d),
            Self::Named(_) => occlink::equalizer::DelayChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSection {
    /// Image height; `null` sizes the image to the whole capture.
    pub rows: Option<usize>,
    pub cols: usize,
    pub bit_depth: u32,
    pub sensor_gain: f64,
    /// Columns averaged when ingesting an image, `[start, end)`; `null` uses all.
    pub roi_cols: Option<[usize; 2]>,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            rows: None,
            cols: 16,
            bit_depth: 8,
            sensor_gain: 1.0,
            roi_cols: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Offsets to sweep; empty means the top-level `offset` only.
    pub offsets: Vec<OffsetSpec>,
    /// SNR points in dB; `null` is a noiseless point. Empty means the
    /// top-level `snr_db` only.
    pub snr_db: Vec<Option<f64>>,
    pub trials: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            offsets: vec![
                OffsetSpec::Fraction(0.0),
                OffsetSpec::Fraction(0.25),
                OffsetSpec::Fraction(0.5),
            ],
            snr_db: vec![None],
            trials: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub modulation_order: usize,
    pub preamble_length: usize,
    pub payload_bits: usize,
    /// Send these symbols instead of a preamble and random payload. The
    /// capture is produced and rendered but not decoded.
    pub explicit_symbols: Option<Vec<f64>>,
    pub symbol_duration: f64,
    pub oversampling: usize,
    pub rows_per_symbol: usize,
    pub max_intensity: f64,
    /// LED 3 dB cutoff; `null` is an ideal LED.
    pub led_cutoff_hz: Option<f64>,
    pub channel_gain: f64,
    /// SNR per symbol; `null` is noiseless.
    pub snr_db: Option<f64>,
    pub offset: OffsetSpec,
    pub camera: CameraSection,
    pub channel_memory: usize,
    pub eq_taps: usize,
    pub delay: DelaySpec,
    pub sync_threshold: f64,
    pub master_seed: u64,
    pub lead_symbols: usize,
    pub trail_symbols: usize,
    pub sweep: SweepSection,
    pub demo_offsets: Vec<f64>,
    pub write_waveform: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            modulation_order: 2,
            preamble_length: occlink::modem::DEFAULT_PREAMBLE_LEN,
            payload_bits: 1000,
            explicit_symbols: None,
            symbol_duration: 4e-6,
            oversampling: 64,
            rows_per_symbol: 1,
            max_intensity: 1.0,
            led_cutoff_hz: None,
            channel_gain: 1.0,
            snr_db: None,
            offset: OffsetSpec::Fraction(0.0),
            camera: CameraSection::default(),
            channel_memory: occlink::equalizer::DEFAULT_CHANNEL_MEMORY,
            eq_taps: occlink::equalizer::DEFAULT_EQ_TAPS,
            delay: DelaySpec::AUTO,
            sync_threshold: occlink::equalizer::DEFAULT_SYNC_THRESHOLD,
            master_seed: 0,
            lead_symbols: 8,
            trail_symbols: 40,
            sweep: SweepSection::default(),
            demo_offsets: vec![0.0, 0.1, 0.25, 0.4, 0.5],
            write_waveform: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn field_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn check_fraction(field: &str, f: f64) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&f) {
        return Err(field_err(field, format!("offset fraction must lie in [0, 1), got {f}")));
    }
    Ok(())
}

fn check_offset(field: &str, o: &OffsetSpec) -> Result<(), CliError> {
    match o {
        OffsetSpec::Fraction(f) => check_fraction(field, *f),
        OffsetSpec::Named(_) => Ok(()),
    }
}

fn check_positive(field: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(field_err(field, format!("must be a positive finite number, got {v}")));
    }
    Ok(())
}

fn check_snr(field: &str, snr: Option<f64>) -> Result<(), CliError> {
    match snr {
        Some(s) if !s.is_finite() => Err(field_err(field, format!("must be finite or null, got {s}"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    /// Parse a JSON config; missing fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| field_err("<config>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn alphabet(&self) -> PamAlphabet {
        PamAlphabet::new(self.modulation_order).expect("validated modulation order")
    }

    /// Whether the run decodes a preamble + payload frame.
    pub fn decodes(&self) -> bool {
        self.explicit_symbols.is_none()
    }

    /// Check every field against the library invariants. Messages name the
    /// offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let m = self.modulation_order;
        if m < 2 || !m.is_power_of_two() || m > MAX_ORDER {
            return Err(field_err(
                "modulation_order",
                format!("must be a power of two in [2, {MAX_ORDER}], got {m}"),
            ));
        }
        let b = m.trailing_zeros() as usize;
        if self.payload_bits % b != 0 {
            return Err(field_err(
                "payload_bits",
                format!("{} is not a multiple of the {b} bits per symbol", self.payload_bits),
            ));
        }
        check_positive("symbol_duration", self.symbol_duration)?;
        if self.oversampling < 2 {
            return Err(field_err("oversampling", format!("must be at least 2, got {}", self.oversampling)));
        }
        if self.rows_per_symbol == 0 || self.oversampling % self.rows_per_symbol != 0 {
            return Err(field_err(
                "rows_per_symbol",
                format!(
                    "must divide oversampling {} exactly, got {}",
                    self.oversampling, self.rows_per_symbol
                ),
            ));
        }
        check_positive("max_intensity", self.max_intensity)?;
        if let Some(c) = self.led_cutoff_hz {
            check_positive("led_cutoff_hz", c)?;
        }
        check_positive("channel_gain", self.channel_gain)?;
        check_snr("snr_db", self.snr_db)?;
        check_offset("offset", &self.offset)?;
        let cam = &self.camera;
        if cam.rows == Some(0) {
            return Err(field_err("camera.rows", "must be at least 1 or null"));
        }
        if cam.cols == 0 {
            return Err(field_err("camera.cols", "must be at least 1"));
        }
        if cam.bit_depth != 8 && cam.bit_depth != 16 {
            return Err(field_err("camera.bit_depth", format!("must be 8 or 16, got {}", cam.bit_depth)));
        }
        check_positive("camera.sensor_gain", cam.sensor_gain)?;
        if let Some([lo, hi]) = cam.roi_cols {
            if lo >= hi {
                return Err(field_err("camera.roi_cols", format!("empty column range [{lo}, {hi})")));
            }
        }
        if self.eq_taps == 0 {
            return Err(field_err("eq_taps", "must be at least 1"));
        }
        if let DelaySpec::Fixed(d) = self.delay {
            let max = (self.channel_memory + self.eq_taps).saturating_sub(2);
            if d > max {
                return Err(field_err("delay", format!("must be at most {max} or \"auto\", got {d}")));
            }
        }
        if !(self.sync_threshold > 0.0 && self.sync_threshold <= 1.0) {
            return Err(field_err(
                "sync_threshold",
                format!("must lie in (0, 1], got {}", self.sync_threshold),
            ));
        }
        for (i, o) in self.sweep.offsets.iter().enumerate() {
            check_offset(&format!("sweep.offsets[{i}]"), o)?;
        }
        for (i, s) in self.sweep.snr_db.iter().enumerate() {
            check_snr(&format!("sweep.snr_db[{i}]"), *s)?;
        }
        if self.sweep.trials == 0 {
            return Err(field_err("sweep.trials", "must be at least 1"));
        }
        for (i, f) in self.demo_offsets.iter().enumerate() {
            check_fraction(&format!("demo_offsets[{i}]"), *f)?;
        }
        match &self.explicit_symbols {
            Some(symbols) => {
                if symbols.is_empty() {
                    return Err(field_err("explicit_symbols", "must not be empty"));
                }
                let alphabet = self.alphabet();
                if let Some((i, s)) = symbols
                    .iter()
                    .enumerate()
                    .find(|(_, s)| **s != 0.0 && !alphabet.contains(**s))
                {
                    return Err(field_err(
                        &format!("explicit_symbols[{i}]"),
                        format!("{s} is not a {m}-PAM level (0 marks an idle symbol)"),
                    ));
                }
            }
            None => self.validate_decoding()?,
        }
        Ok(())
    }

    fn validate_decoding(&self) -> Result<(), CliError> {
        if self.rows_per_symbol != 1 {
            return Err(field_err(
                "rows_per_symbol",
                "decoding runs at one row per symbol; oversampled captures need explicit_symbols",
            ));
        }
        let taps = self.channel_memory + 1;
        if self.preamble_length < 2 * taps {
            return Err(field_err(
                "preamble_length",
                format!(
                    "{} symbols cannot support {taps} channel taps; need at least {}",
                    self.preamble_length,
                    2 * taps
                ),
            ));
        }
        occlink::modem::default_preamble(self.preamble_length)
            .map_err(|e| field_err("preamble_length", e.to_string()))?;
        let tail = self.channel_memory + self.eq_taps;
        if self.trail_symbols < tail {
            return Err(field_err(
                "trail_symbols",
                format!(
                    "must be at least channel_memory + eq_taps = {tail} so the equalizer sees the whole frame, got {}",
                    self.trail_symbols
                ),
            ));
        }
        if self.lead_symbols < 1 {
            return Err(field_err("lead_symbols", "must be at least 1 so the frame start can be found"));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.seed => self.master_seed);
        set!(o.out => self.out_dir);
        set!(o.order => self.modulation_order);
        set!(o.payload_bits => self.payload_bits);
        set!(o.preamble_length => self.preamble_length);
        set!(o.offset => self.offset);
        set!(o.symbol_duration => self.symbol_duration);
        set!(o.oversampling => self.oversampling);
        set!(o.rows_per_symbol => self.rows_per_symbol);
        set!(o.channel_gain => self.channel_gain);
        set!(o.channel_memory => self.channel_memory);
        set!(o.eq_taps => self.eq_taps);
        set!(o.delay => self.delay);
        set!(o.cols => self.camera.cols);
        set!(o.bit_depth => self.camera.bit_depth);
        if let Some(v) = o.snr_db {
            self.snr_db = v.0;
        }
        if let Some(v) = o.led_cutoff_hz {
            self.led_cutoff_hz = v.0;
        }
        if let Some(v) = o.rows {
            self.camera.rows = v.0;
        }
        if o.write_waveform {
            self.write_waveform = true;
        }
    }
}

/// A flag value that may be the literal `none`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nullable<T>(pub Option<T>);

impl<T: std::str::FromStr> std::str::FromStr for Nullable<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "none" {
            return Ok(Self(None));
        }
        s.parse::<T>()
            .map(|v| Self(Some(v)))
            .map_err(|_| format!("expected a number or \"none\", got {s:?}"))
    }
}

/// Command-line flags that override config fields.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Master seed for all derived random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PAM order M.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub payload_bits: Option<usize>,
    #[arg(long)]
    pub preamble_length: Option<usize>,
    /// Offset as a fraction of T_s, or "random".
    #[arg(long, value_parser = OffsetSpec::parse)]
    pub offset: Option<OffsetSpec>,
    /// SNR per symbol in dB, or "none" for a noiseless channel.
    #[arg(long)]
    pub snr_db: Option<Nullable<f64>>,
    /// LED cutoff in Hz, or "none" for an ideal LED.
    #[arg(long)]
    pub led_cutoff_hz: Option<Nullable<f64>>,
    #[arg(long)]
    pub symbol_duration: Option<f64>,
    #[arg(long)]
    pub oversampling: Option<usize>,
    #[arg(long)]
    pub rows_per_symbol: Option<usize>,
    #[arg(long)]
    pub channel_gain: Option<f64>,
    #[arg(long)]
    pub channel_memory: Option<usize>,
    #[arg(long)]
    pub eq_taps: Option<usize>,
    /// Equalizer delay in rows, or "auto".
    #[arg(long, value_parser = DelaySpec::parse)]
    pub delay: Option<DelaySpec>,
    /// Image rows, or "none" to fit the capture.
    #[arg(long)]
    pub rows: Option<Nullable<usize>>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub bit_depth: Option<u32>,
    /// Also write the transmitted and received waveforms.
    #[arg(long)]
    pub write_waveform: bool,
}
