//! One seeded transmission: frame, capture, normalization and decoding.

use occlink::camera::{RowSamples, TimingOffset};
use occlink::link::{self, Capture, ImageGeometry, LinkParams, ReceiverConfig, Reception};
use occlink::modem::{self, TxConfig};
use occlink::numerics::{derive_seed, SeededGaussian};
use occlink::optics::{self, LedModel, OpticalChannel};
use occlink::Error;

use crate::config::{OffsetSpec, RunConfig};
use crate::error::{CliError, StageExt};

/// Independent random streams of one trial, all derived from
/// `derive_seed(master_seed, trial_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub payload: u64,
    pub noise: u64,
    pub slicer: u64,
    pub offset: u64,
}

impl TrialSeeds {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let trial = derive_seed(master_seed, trial_index);
        Self {
            trial,
            payload: derive_seed(trial, 0),
            noise: derive_seed(trial, 1),
            slicer: derive_seed(trial, 2),
            offset: derive_seed(trial, 3),
        }
    }
}

/// Offset as a fraction of `T_s`; `random` draws uniformly from [0, 1).
pub fn resolve_offset(spec: OffsetSpec, seed: u64) -> f64 {
    match spec {
        OffsetSpec::Fraction(f) => f,
        OffsetSpec::Named(_) => SeededGaussian::new(seed).next_unit(),
    }
}

pub fn payload_bits(cfg: &RunConfig, seed: u64) -> Vec<u8> {
    let mut g = SeededGaussian::new(seed);
    (0..cfg.payload_bits).map(|_| g.next_bit()).collect()
}

pub fn link_params(
    cfg: &RunConfig,
    offset_fraction: f64,
    snr_db: Option<f64>,
    noise_seed: u64,
) -> Result<LinkParams, CliError> {
    let tx = TxConfig::new(cfg.symbol_duration, cfg.max_intensity, cfg.oversampling).stage("transmit")?;
    let led = match cfg.led_cutoff_hz {
        Some(c) => LedModel::low_pass(c).stage("optics")?,
        None => LedModel::Ideal,
    };
    let sigma = snr_db.map_or(0.0, |snr| {
        optics::noise_sigma_for_snr(snr, cfg.channel_gain, tx.nominal_intensity(), cfg.oversampling)
    });
    let channel = OpticalChannel::new(cfg.channel_gain, sigma, noise_seed).stage("optics")?;
    let offset = TimingOffset::from_fraction(offset_fraction, cfg.symbol_duration).stage("capture")?;
    Ok(LinkParams {
        tx,
        rows_per_symbol: cfg.rows_per_symbol,
        sensor_gain: cfg.camera.sensor_gain,
        led,
        channel,
        offset,
        lead_symbols: cfg.lead_symbols,
        trail_symbols: cfg.trail_symbols,
    })
}

pub fn geometry(cfg: &RunConfig) -> ImageGeometry {
    ImageGeometry {
        rows: cfg.camera.rows,
        cols: cfg.camera.cols,
        bit_depth: cfg.camera.bit_depth,
    }
}

pub fn receiver(cfg: &RunConfig, slicer_seed: u64) -> Result<ReceiverConfig, CliError> {
    let preamble = modem::default_preamble(cfg.preamble_length).stage("frame")?;
    let alphabet = cfg.alphabet();
    let payload_symbols = cfg.payload_bits / alphabet.bits_per_symbol();
    let mut rc = ReceiverConfig::new(alphabet, preamble, payload_symbols);
    rc.channel_memory = cfg.channel_memory;
    rc.eq_taps = cfg.eq_taps;
    rc.delay = cfg.delay.choice();
    rc.sync_threshold = cfg.sync_threshold;
    rc.slicer_seed = slicer_seed;
    Ok(rc)
}

/// Stage name for an error raised inside [`link::receive`].
pub fn receive_stage(e: &Error) -> &'static str {
    match e {
        Error::SyncFailure { .. } => "sync",
        Error::EstimationSingular(_) => "estimate",
        Error::DesignSingular(_) => "design",
        Error::UnusableCapture(_) => "normalize",
        _ => "receive",
    }
}

pub fn decode(y: &[f64], rc: &ReceiverConfig) -> Result<Reception, CliError> {
    link::receive(y, rc).map_err(|source| CliError::Stage {
        stage: receive_stage(&source),
        source,
    })
}

/// Transmitted frame and its capture, before any receiver processing.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub seeds: TrialSeeds,
    pub offset_fraction: f64,
    pub params: LinkParams,
    /// Frame symbols, without idle padding.
    pub symbols: Vec<f64>,
    /// Payload bits; empty for explicit-symbol runs.
    pub bits: Vec<u8>,
    pub capture: Capture,
}

impl Transmission {
    /// Frame symbols padded with the idle lead and trail, one per symbol slot.
    pub fn padded_symbols(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.params.lead_symbols];
        s.extend_from_slice(&self.symbols);
        s.extend(std::iter::repeat_n(0.0, self.params.trail_symbols));
        s
    }

    pub fn normalized(&self) -> Result<RowSamples, CliError> {
        link::normalize_capture(&self.capture, &self.params).stage("normalize")
    }

    /// Rows whose exposure lies entirely inside the frame.
    pub fn frame_rows(&self) -> std::ops::Range<usize> {
        let r = self.params.rows_per_symbol;
        let start = self.capture.first_frame_row;
        let n = self.symbols.len().saturating_sub(1) * r;
        start..(start + n).min(self.capture.rows.len())
    }
}

pub fn transmit(
    cfg: &RunConfig,
    offset: OffsetSpec,
    snr_db: Option<f64>,
    trial_index: u64,
) -> Result<Transmission, CliError> {
    let seeds = TrialSeeds::new(cfg.master_seed, trial_index);
    let offset_fraction = resolve_offset(offset, seeds.offset);
    let params = link_params(cfg, offset_fraction, snr_db, seeds.noise)?;
    let (symbols, bits) = match &cfg.explicit_symbols {
        Some(s) => (s.clone(), Vec::new()),
        None => {
            let bits = payload_bits(cfg, seeds.payload);
            let preamble = modem::default_preamble(cfg.preamble_length).stage("frame")?;
            let frame = modem::build_frame(&preamble, &bits, &cfg.alphabet()).stage("frame")?;
            (frame.symbols(), bits)
        }
    };
    let capture = link::simulate_capture(&symbols, &params, geometry(cfg)).stage("capture")?;
    Ok(Transmission {
        seeds,
        offset_fraction,
        params,
        symbols,
        bits,
        capture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_streams_are_distinct() {
        let a = TrialSeeds::new(1, 0);
        let b = TrialSeeds::new(1, 1);
        let all = [a.payload, a.noise, a.slicer, a.offset, b.payload, b.noise, b.slicer, b.offset];
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
        assert_eq!(TrialSeeds::new(1, 0), a);
    }

    #[test]
    fn random_offset_is_seeded() {
        let f = resolve_offset(OffsetSpec::RANDOM, 5);
        assert!((0.0..1.0).contains(&f));
        assert_eq!(f, resolve_offset(OffsetSpec::RANDOM, 5));
        assert_ne!(f, resolve_offset(OffsetSpec::RANDOM, 6));
        assert_eq!(resolve_offset(OffsetSpec::Fraction(0.3), 5), 0.3);
    }

    #[test]
    fn default_trial_decodes() {
        let cfg = RunConfig::default();
        let t = transmit(&cfg, cfg.offset, None, 0).unwrap();
        let y = t.normalized().unwrap();
        let rx = decode(&y.values, &receiver(&cfg, t.seeds.slicer).unwrap()).unwrap();
        assert_eq!(rx.payload_bits, t.bits);
    }
}
