//! LED low-pass response, flat optical path gain and additive white Gaussian
//! noise on the pre-camera simulation grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededGaussian;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LedModel {
    /// No filtering.
    Ideal,
    /// Single-pole low-pass with unit DC gain.
    LowPass { cutoff_hz: f64 },
}

impl LedModel {
    pub fn low_pass(cutoff_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && cutoff_hz.is_finite()) {
            return Err(Error::Config(format!(
                "LED cutoff must be positive, got {cutoff_hz}"
            )));
        }
        Ok(Self::LowPass { cutoff_hz })
    }

    /// Smoothing coefficient `α = 1 − exp(−2π·f_3dB·Δt)`; `1` for an ideal LED.
    pub fn alpha(&self, dt: f64) -> f64 {
        match *self {
            LedModel::Ideal => 1.0,
            LedModel::LowPass { cutoff_hz } => {
                -(-std::f64::consts::TAU * cutoff_hz * dt).exp_m1()
            }
        }
    }
}

/// Filter `w` through the LED response, starting from the first sample value.
pub fn apply_led(w: &Waveform, led: &LedModel) -> Waveform {
    match led {
        LedModel::Ideal => w.clone(),
        LedModel::LowPass { .. } => {
            let init = w.samples().first().copied().unwrap_or(0.0);
            apply_led_from_state(w, led, init)
        }
    }
}

/// `y_k = α·x_k + (1−α)·y_{k−1}` with `y_{−1} = initial`.
pub fn apply_led_from_state(w: &Waveform, led: &LedModel, initial: f64) -> Waveform {
    if let LedModel::Ideal = led {
        return w.clone();
    }
    let alpha = led.alpha(w.dt());
    let mut state = initial;
    let out = w
        .samples()
        .iter()
        .map(|&x| {
            state = alpha * x + (1.0 - alpha) * state;
            state
        })
        .collect();
    w.with_samples(out)
}

/// Flat optical path with AWGN defined per grid sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalChannel {
    gain: f64,
    noise_sigma: f64,
    seed: u64,
}

impl OpticalChannel {
    pub fn new(gain: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::Config(format!("channel gain must be positive, got {gain}")));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be non-negative, got {noise_sigma}"
            )));
        }
        Ok(Self {
            gain,
            noise_sigma,
            seed,
        })
    }

    pub fn noiseless(gain: f64) -> Result<Self> {
        Self::new(gain, 0.0, 0)
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// `gain·w_k + n_k`.
pub fn apply_channel(w: &Waveform, ch: &OpticalChannel) -> Waveform {
    if ch.noise_sigma == 0.0 {
        return w.with_samples(w.samples().iter().map(|x| ch.gain * x).collect());
    }
    let mut gen = SeededGaussian::new(ch.seed);
    let out = w
        .samples()
        .iter()
        .map(|x| ch.gain * x + ch.noise_sigma * gen.next_gaussian())
        .collect();
    w.with_samples(out)
}

/// Per-grid-sample noise sigma giving the requested per-symbol SNR, with
/// `SNR = (gain·I_0)²·N_os / σ²`.
pub fn noise_sigma_for_snr(snr_db: f64, gain: f64, nominal_intensity: f64, oversampling: usize) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    gain * nominal_intensity * (oversampling as f64 / snr).sqrt()
}
