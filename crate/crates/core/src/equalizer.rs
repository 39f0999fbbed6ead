//! Frame synchronization, least-squares channel estimation and zero-forcing
//! equalization of row samples.
//!
//! The estimator uses the causal model `y[n0 + j] = Σ_k h_k·a[j − k]` over
//! the frame symbols `a`. A channel that reaches forward in time (the camera's
//! timing offset mixes in the *next* symbol) is handled by starting the
//! estimation window a few rows before the correlation peak, which turns the
//! precursor into an ordinary causal tap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{convolution_matrix, convolve, norm2, ConvMode, QrFactorization};

/// Default minimum normalized correlation for a frame to count as found.
pub const DEFAULT_SYNC_THRESHOLD: f64 = 0.5;

/// Default number of estimated taps minus one (three taps).
pub const DEFAULT_CHANNEL_MEMORY: usize = 2;

/// Default equalizer length.
pub const DEFAULT_EQ_TAPS: usize = 31;

/// Normalized cross-correlation of DC-removed `y` with `preamble` at every
/// lag `0 ..= |y| − |preamble|`. Windows with no energy score 0.
pub fn preamble_correlation(y: &[f64], preamble: &[f64]) -> Result<Vec<f64>> {
    let n = preamble.len();
    if n == 0 {
        return Err(Error::Config("preamble must not be empty".into()));
    }
    if y.len() < n {
        return Err(Error::Shape(format!(
            "{} rows cannot contain a {n}-symbol preamble",
            y.len()
        )));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let p_norm = norm2(preamble);
    Ok((0..=y.len() - n)
        .map(|lag| {
            let window = &centered[lag..lag + n];
            let num = window.iter().zip(preamble).fold(0.0, |acc, (a, b)| acc + a * b);
            let den = norm2(window) * p_norm;
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect())
}

/// Result of a successful preamble search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSync {
    pub start: usize,
    pub peak: f64,
}

/// Lag of the strongest normalized correlation with the preamble. Ties go to
/// the smallest lag; a peak below `threshold` is a sync failure.
pub fn find_frame_start(y: &[f64], preamble: &[f64], threshold: f64) -> Result<FrameSync> {
    let corr = preamble_correlation(y, preamble)?;
    let (start, peak) = corr
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (lag, &c)| {
            if c > best.1 {
                (lag, c)
            } else {
                best
            }
        });
    if !(peak >= threshold) {
        return Err(Error::SyncFailure { peak, threshold });
    }
    Ok(FrameSync { start, peak })
}

/// Least-squares estimate of the causal channel taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub taps: Vec<f64>,
    pub frame_start: usize,
    pub residual_norm: f64,
}

impl ChannelEstimate {
    /// Number of taps minus one.
    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }
}

/// Estimate `memory + 1` taps from the rows covering the preamble, which
/// starts at row `frame_start`.
///
/// Only the rows whose every contributing symbol is a known preamble symbol are
/// used, i.e. `y[frame_start + memory ..= frame_start + N_pre − 1]` against the
/// valid-mode convolution matrix of the preamble.
pub fn estimate_channel(
    y: &[f64],
    preamble: &[f64],
    frame_start: usize,
    memory: usize,
) -> Result<ChannelEstimate> {
    let n_taps = memory + 1;
    if preamble.len() < 2 * n_taps {
        return Err(Error::Config(format!(
            "a {}-symbol preamble cannot support {n_taps} taps; need at least {}",
            preamble.len(),
            2 * n_taps
        )));
    }
    let end = frame_start + preamble.len();
    if end > y.len() {
        return Err(Error::Shape(format!(
            "preamble rows {frame_start}..{end} exceed the {}-row capture",
            y.len()
        )));
    }
    let a_pre = convolution_matrix(preamble, n_taps, ConvMode::Valid)?;
    let y_pre = &y[frame_start + memory..end];
    let taps = QrFactorization::new(&a_pre)
        .map_err(|e| match e {
            Error::SingularSystem(msg) => Error::EstimationSingular(msg),
            other => other,
        })?
        .solve(y_pre)?;
    let fitted = a_pre.mul_vec(&taps)?;
    let residual: Vec<f64> = fitted.iter().zip(y_pre).map(|(f, v)| f - v).collect();
    Ok(ChannelEstimate {
        taps,
        frame_start,
        residual_norm: norm2(&residual),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayChoice {
    /// Try every admissible delay and keep the smallest residual ISI.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZfEqualizer {
    pub taps: Vec<f64>,
    pub delay: usize,
    pub residual_isi: f64,
}

impl ZfEqualizer {
    /// Pass-through equalizer.
    pub fn identity(n_taps: usize) -> Self {
        let mut taps = vec![0.0; n_taps.max(1)];
        taps[0] = 1.0;
        Self {
            taps,
            delay: 0,
            residual_isi: 0.0,
        }
    }
}

/// `‖conv(g, h) − e_d‖₂`.
pub fn residual_isi(eq_taps: &[f64], channel: &[f64], delay: usize) -> f64 {
    let mut combined = convolve(eq_taps, channel);
    if delay < combined.len() {
        combined[delay] -= 1.0;
    }
    norm2(&combined)
}

/// Zero-forcing equalizer of `n_taps` taps for the channel `taps`: the
/// least-squares solution of `H·g ≈ e_d`, where `H` is the full convolution
/// matrix of the channel.
pub fn design_zf(channel: &[f64], n_taps: usize, delay: DelayChoice) -> Result<ZfEqualizer> {
    if n_taps == 0 {
        return Err(Error::Config("equalizer needs at least one tap".into()));
    }
    if channel.is_empty() {
        return Err(Error::Config("channel estimate has no taps".into()));
    }
    let memory = channel.len() - 1;
    let max_delay = (memory + n_taps).saturating_sub(2);
    if let DelayChoice::Fixed(d) = delay {
        if d > max_delay {
            return Err(Error::Config(format!(
                "delay {d} is outside the admissible range 0..={max_delay}"
            )));
        }
    }
    let h = convolution_matrix(channel, n_taps, ConvMode::Full)?;
    let qr = QrFactorization::new(&h).map_err(|e| match e {
        Error::SingularSystem(msg) => Error::DesignSingular(msg),
        other => other,
    })?;
    let solve_for = |d: usize| -> Result<ZfEqualizer> {
        let mut target = vec![0.0; h.rows()];
        target[d] = 1.0;
        let taps = qr.solve(&target)?;
        let residual_isi = residual_isi(&taps, channel, d);
        Ok(ZfEqualizer {
            taps,
            delay: d,
            residual_isi,
        })
    };
    match delay {
        DelayChoice::Fixed(d) => solve_for(d),
        DelayChoice::Auto => {
            let mut best = solve_for(0)?;
            for d in 1..=max_delay {
                let candidate = solve_for(d)?;
                if candidate.residual_isi < best.residual_isi {
                    best = candidate;
                }
            }
            Ok(best)
        }
    }
}

/// Filter the rows with the equalizer and realign by its delay, so that entry
/// `j` of the result estimates frame symbol `j`:
/// `out[j] = Σ_i g[i]·y[frame_start + j + d − i]`. Rows before the start of the
/// capture count as zero.
pub fn equalize(
    y: &[f64],
    eq: &ZfEqualizer,
    frame_start: usize,
    frame_len: usize,
) -> Result<Vec<f64>> {
    let needed = frame_start + frame_len + eq.delay;
    if frame_len > 0 && needed > y.len() {
        return Err(Error::Shape(format!(
            "equalizing {frame_len} symbols from row {frame_start} with delay {} needs {needed} rows, capture has {}",
            eq.delay,
            y.len()
        )));
    }
    Ok((0..frame_len)
        .map(|j| {
            let center = frame_start + j + eq.delay;
            eq.taps
                .iter()
                .enumerate()
                .take_while(|(i, _)| *i <= center)
                .fold(0.0, |acc, (i, g)| acc + g * y[center - i])
        })
        .collect())
}

/// Normalized coupling of row `n` to `a[n]` and `a[n+1]` at one symbol per row
/// with ideal optics: `(1 − δ/T_s, δ/T_s)`.
pub fn analytic_offset_taps(delta: f64, symbol_duration: f64) -> Result<(f64, f64)> {
    if !(symbol_duration > 0.0) || !(0.0..symbol_duration).contains(&delta) {
        return Err(Error::Config(format!(
            "offset {delta} must lie in [0, {symbol_duration})"
        )));
    }
    let f = delta / symbol_duration;
    Ok((1.0 - f, f))
}

/// Read the `(main, next)` coupling pair out of causal taps, where `main_index`
/// is the tap multiplying the symbol a row was aligned to.
pub fn offset_pair(taps: &[f64], main_index: usize) -> (f64, f64) {
    let main = taps.get(main_index).copied().unwrap_or(0.0);
    let next = main_index
        .checked_sub(1)
        .and_then(|i| taps.get(i))
        .copied()
        .unwrap_or(0.0);
    (main, next)
}
