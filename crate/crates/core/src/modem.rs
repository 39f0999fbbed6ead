//! M-PAM mapping, framing, transmit pulse shaping and slicing.
//!
//! Levels are normalized to `{±1, ±3, …, ±(M−1)}/(M−1)` so that the peak
//! level never drives the LED above `I_max`. Bit groups are Gray coded over the
//! ascending level order: for 4-PAM, `00 → −1`, `01 → −1/3`, `11 → +1/3`,
//! `10 → +1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededGaussian;
use crate::waveform::Waveform;

/// Largest supported modulation order.
pub const MAX_ORDER: usize = 1 << 16;

/// Default preamble length: one period of the degree-5 m-sequence.
pub const DEFAULT_PREAMBLE_LEN: usize = 31;

/// Normalized M-PAM constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamAlphabet {
    order: usize,
    bits_per_symbol: usize,
    levels: Vec<f64>,
}

impl PamAlphabet {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() || order > MAX_ORDER {
            return Err(Error::Config(format!(
                "modulation order must be a power of two in [2, {MAX_ORDER}], got {order}"
            )));
        }
        let denom = (order - 1) as f64;
        let levels = (0..order)
            .map(|i| (2.0 * i as f64 - denom) / denom)
            .collect();
        Ok(Self {
            order,
            bits_per_symbol: order.trailing_zeros() as usize,
            levels,
        })
    }

    pub fn bpsk() -> Self {
        Self::new(2).expect("order 2 is valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Ascending levels.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Distance between adjacent levels, `2/(M−1)`.
    pub fn spacing(&self) -> f64 {
        2.0 / (self.order - 1) as f64
    }

    /// Index of `symbol` in the ascending level list, if it is a level.
    pub fn level_index(&self, symbol: f64) -> Option<usize> {
        let u = (symbol + 1.0) / self.spacing();
        let i = u.round();
        if !(0.0..self.order as f64).contains(&i) {
            return None;
        }
        let i = i as usize;
        ((symbol - self.levels[i]).abs() <= 1e-9).then_some(i)
    }

    pub fn contains(&self, symbol: f64) -> bool {
        self.level_index(symbol).is_some()
    }
}

fn gray_encode(i: usize) -> usize {
    i ^ (i >> 1)
}

fn gray_decode(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Gray-map bits (MSB first within each group) onto PAM levels.
pub fn map_bits(bits: &[u8], alphabet: &PamAlphabet) -> Result<Vec<f64>> {
    let b = alphabet.bits_per_symbol();
    if bits.len() % b != 0 {
        return Err(Error::Shape(format!(
            "{} bits cannot be split into {b}-bit symbols",
            bits.len()
        )));
    }
    bits.chunks(b)
        .map(|group| {
            let mut word = 0usize;
            for &bit in group {
                if bit > 1 {
                    return Err(Error::Domain(format!("bit value {bit} is not 0 or 1")));
                }
                word = (word << 1) | bit as usize;
            }
            Ok(alphabet.levels[gray_decode(word)])
        })
        .collect()
}

/// Inverse of [`map_bits`].
pub fn symbols_to_bits(symbols: &[f64], alphabet: &PamAlphabet) -> Result<Vec<u8>> {
    let b = alphabet.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols.len() * b);
    for &s in symbols {
        let i = alphabet
            .level_index(s)
            .ok_or_else(|| Error::Domain(format!("{s} is not a {}-PAM level", alphabet.order())))?;
        let word = gray_encode(i);
        bits.extend((0..b).rev().map(|k| ((word >> k) & 1) as u8));
    }
    Ok(bits)
}

// Exponents of the non-leading terms of primitive polynomials, indexed by degree.
const PRIMITIVE_TAPS: [&[usize]; 15] = [
    &[],
    &[],
    &[1, 0],
    &[1, 0],
    &[1, 0],
    &[2, 0],
    &[1, 0],
    &[1, 0],
    &[4, 3, 2, 0],
    &[4, 0],
    &[3, 0],
    &[2, 0],
    &[6, 4, 1, 0],
    &[4, 3, 1, 0],
    &[5, 3, 1, 0],
];

/// One period of the binary maximal-length sequence of the given degree,
/// from the all-ones initial state. Degree 5 uses `x^5 + x^2 + 1`.
pub fn m_sequence(degree: usize) -> Result<Vec<u8>> {
    if !(2..PRIMITIVE_TAPS.len()).contains(&degree) {
        return Err(Error::Config(format!(
            "m-sequence degree must be in [2, {}], got {degree}",
            PRIMITIVE_TAPS.len() - 1
        )));
    }
    let period = (1usize << degree) - 1;
    let taps = PRIMITIVE_TAPS[degree];
    let mut s = vec![1u8; degree];
    s.reserve(period);
    for n in 0..period - degree {
        let next = taps.iter().fold(0u8, |acc, &t| acc ^ s[n + t]);
        s.push(next);
    }
    Ok(s)
}

/// Antipodal preamble of length `len` (0 → −1, 1 → +1), taken from the
/// shortest m-sequence whose period covers `len`.
pub fn default_preamble(len: usize) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::Config("preamble length must be at least 1".into()));
    }
    let degree = (2..PRIMITIVE_TAPS.len())
        .find(|d| (1usize << d) - 1 >= len)
        .ok_or_else(|| Error::Config(format!("preamble length {len} is too long")))?;
    Ok(m_sequence(degree)?
        .into_iter()
        .take(len)
        .map(|b| if b == 1 { 1.0 } else { -1.0 })
        .collect())
}

/// Preamble followed by payload, all drawn from one alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    preamble: Vec<f64>,
    payload: Vec<f64>,
    alphabet: PamAlphabet,
}

impl Frame {
    pub fn new(preamble: Vec<f64>, payload: Vec<f64>, alphabet: PamAlphabet) -> Result<Self> {
        if let Some(s) = preamble.iter().chain(&payload).find(|s| !alphabet.contains(**s)) {
            return Err(Error::Domain(format!(
                "symbol {s} is not a {}-PAM level",
                alphabet.order()
            )));
        }
        Ok(Self {
            preamble,
            payload,
            alphabet,
        })
    }

    pub fn preamble(&self) -> &[f64] {
        &self.preamble
    }

    pub fn payload(&self) -> &[f64] {
        &self.payload
    }

    pub fn alphabet(&self) -> &PamAlphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.preamble.len() + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[preamble, payload]`.
    pub fn symbols(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.len());
        s.extend_from_slice(&self.preamble);
        s.extend_from_slice(&self.payload);
        s
    }
}

/// Frame with an antipodal preamble and a Gray-mapped payload.
pub fn build_frame(preamble: &[f64], payload_bits: &[u8], alphabet: &PamAlphabet) -> Result<Frame> {
    if preamble.is_empty() {
        return Err(Error::Config("preamble must not be empty".into()));
    }
    if let Some(s) = preamble.iter().find(|s| **s != 1.0 && **s != -1.0) {
        return Err(Error::Config(format!("preamble symbols must be ±1, found {s}")));
    }
    let payload = map_bits(payload_bits, alphabet)?;
    Frame::new(preamble.to_vec(), payload, alphabet.clone())
}

/// Transmitter timing and intensity settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    symbol_duration: f64,
    max_intensity: f64,
    oversampling: usize,
}

impl TxConfig {
    pub fn new(symbol_duration: f64, max_intensity: f64, oversampling: usize) -> Result<Self> {
        if !(symbol_duration > 0.0 && symbol_duration.is_finite()) {
            return Err(Error::Config(format!(
                "symbol duration must be positive, got {symbol_duration}"
            )));
        }
        if !(max_intensity > 0.0 && max_intensity.is_finite()) {
            return Err(Error::Config(format!(
                "maximum intensity must be positive, got {max_intensity}"
            )));
        }
        if oversampling < 2 {
            return Err(Error::Config(format!(
                "oversampling must be at least 2, got {oversampling}"
            )));
        }
        Ok(Self {
            symbol_duration,
            max_intensity,
            oversampling,
        })
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    pub fn max_intensity(&self) -> f64 {
        self.max_intensity
    }

    /// Pulse amplitude and DC bias, `I_max / 2`.
    pub fn nominal_intensity(&self) -> f64 {
        self.max_intensity / 2.0
    }

    /// Grid samples per symbol.
    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn grid_step(&self) -> f64 {
        self.symbol_duration / self.oversampling as f64
    }
}

/// DC-biased rectangular-pulse waveform: symbol `a` holds `I_0·(1 + a)` for
/// `N_os` grid samples.
pub fn shape_waveform(frame: &Frame, cfg: &TxConfig) -> Waveform {
    shape_symbols(&frame.symbols(), cfg)
}

/// [`shape_waveform`] over a bare symbol sequence. A symbol of `0` is the idle
/// (bias-only) level.
pub fn shape_symbols(symbols: &[f64], cfg: &TxConfig) -> Waveform {
    let i0 = cfg.nominal_intensity();
    let n_os = cfg.oversampling();
    let mut samples = Vec::with_capacity(symbols.len() * n_os);
    for &a in symbols {
        samples.extend(std::iter::repeat_n(i0 * (1.0 + a), n_os));
    }
    Waveform::new(samples, cfg.grid_step(), 0.0).expect("grid step validated by TxConfig")
}

/// Samples closer than this (in units of level spacing) to a decision
/// midpoint count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Nearest-level decisions. Samples within [`TIE_TOLERANCE`] of a midpoint
/// between two levels are resolved by a fair coin drawn from `rng_seed`;
/// out-of-range samples clamp to the extreme levels.
pub fn slice(samples: &[f64], alphabet: &PamAlphabet, rng_seed: u64) -> Vec<f64> {
    let mut coin = SeededGaussian::new(rng_seed);
    let top = (alphabet.order() - 1) as f64;
    samples
        .iter()
        .map(|&x| {
            let u = ((x + 1.0) / alphabet.spacing()).clamp(0.0, top);
            let lower = u.floor();
            let frac = u - lower;
            let idx = if lower >= top {
                top
            } else if (frac - 0.5).abs() <= TIE_TOLERANCE {
                lower + coin.next_bit() as f64
            } else {
                u.round()
            };
            alphabet.levels[idx as usize]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_levels() {
        let a = PamAlphabet::new(4).unwrap();
        assert_eq!(a.bits_per_symbol(), 2);
        let expected = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (l, e) in a.levels().iter().zip(expected) {
            assert!((l - e).abs() < 1e-15);
        }
        for m in [2, 4, 8, 16, 32] {
            let a = PamAlphabet::new(m).unwrap();
            let mean: f64 = a.levels().iter().sum::<f64>() / m as f64;
            assert!(mean.abs() < 1e-15);
            for w in a.levels().windows(2) {
                assert!((w[1] - w[0] - a.spacing()).abs() < 1e-14);
            }
            for l in a.levels() {
                assert!(a.contains(-l));
            }
            assert_eq!(a.levels()[m - 1], 1.0);
        }
    }

    #[test]
    fn alphabet_rejects_bad_orders() {
        for m in [0, 1, 3, 6, 12] {
            assert!(matches!(PamAlphabet::new(m), Err(Error::Config(_))));
        }
    }

    #[test]
    fn gray_table_examples() {
        assert_eq!(map_bits(&[0], &PamAlphabet::bpsk()).unwrap(), vec![-1.0]);
        let pam4 = PamAlphabet::new(4).unwrap();
        let s = map_bits(&[1, 1, 0, 0], &pam4).unwrap();
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s[1], -1.0);
        assert_eq!(symbols_to_bits(&[1.0 / 3.0], &pam4).unwrap(), vec![1, 1]);
        assert_eq!(symbols_to_bits(&[-1.0], &PamAlphabet::bpsk()).unwrap(), vec![0]);
    }

    #[test]
    fn every_pattern_hits_each_level_once() {
        for m in [2usize, 4, 8, 16, 32] {
            let a = PamAlphabet::new(m).unwrap();
            let b = a.bits_per_symbol();
            let bits: Vec<u8> = (0..m)
                .flat_map(|w| (0..b).rev().map(move |k| ((w >> k) & 1) as u8))
                .collect();
            let mut s = map_bits(&bits, &a).unwrap();
            s.sort_by(f64::total_cmp);
            assert_eq!(s, a.levels());
        }
    }

    #[test]
    fn adjacent_levels_differ_in_one_bit() {
        let a = PamAlphabet::new(16).unwrap();
        let bits = symbols_to_bits(a.levels(), &a).unwrap();
        for pair in bits.chunks(4).collect::<Vec<_>>().windows(2) {
            let diff = pair[0].iter().zip(pair[1]).filter(|(x, y)| x != y).count();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn map_bits_shape_and_domain_errors() {
        let pam4 = PamAlphabet::new(4).unwrap();
        assert!(matches!(map_bits(&[1, 0, 1], &pam4), Err(Error::Shape(_))));
        assert!(matches!(map_bits(&[2, 0], &pam4), Err(Error::Domain(_))));
        assert!(matches!(symbols_to_bits(&[0.5], &pam4), Err(Error::Domain(_))));
    }

    #[test]
    fn degree5_m_sequence_properties() {
        let s = m_sequence(5).unwrap();
        assert_eq!(s.len(), 31);
        assert_eq!(s.iter().filter(|b| **b == 1).count(), 16);
        let p = default_preamble(31).unwrap();
        for lag in 1..31 {
            let c: f64 = (0..31).map(|i| p[i] * p[(i + lag) % 31]).sum();
            assert_eq!(c, -1.0, "lag {lag}");
        }
    }

    #[test]
    fn every_tabulated_polynomial_is_maximal() {
        for degree in 2..PRIMITIVE_TAPS.len() {
            let s = m_sequence(degree).unwrap();
            let period = (1usize << degree) - 1;
            // every nonzero degree-bit window appears exactly once around the cycle
            let mut seen = vec![false; 1 << degree];
            for i in 0..period {
                let w = (0..degree).fold(0usize, |acc, k| (acc << 1) | s[(i + k) % period] as usize);
                assert!(w != 0 && !seen[w], "degree {degree}");
                seen[w] = true;
            }
        }
    }

    #[test]
    fn build_frame_concatenates() {
        let f = build_frame(&[1.0, -1.0], &[0], &PamAlphabet::bpsk()).unwrap();
        assert_eq!(f.symbols(), vec![1.0, -1.0, -1.0]);
        let f = build_frame(&default_preamble(31).unwrap(), &[1; 100], &PamAlphabet::bpsk()).unwrap();
        assert_eq!(f.len(), 131);
    }

    #[test]
    fn build_frame_rejects_empty_or_non_antipodal_preamble() {
        let a = PamAlphabet::new(4).unwrap();
        assert!(matches!(build_frame(&[], &[0, 0], &a), Err(Error::Config(_))));
        assert!(matches!(build_frame(&[1.0 / 3.0], &[0, 0], &a), Err(Error::Config(_))));
    }

    #[test]
    fn shaped_waveform_levels() {
        let cfg = TxConfig::new(1e-5, 1.0, 4).unwrap();
        let bpsk = PamAlphabet::bpsk();
        let up = Frame::new(vec![1.0], vec![], bpsk.clone()).unwrap();
        assert_eq!(shape_waveform(&up, &cfg).samples(), &[1.0; 4]);
        let down = Frame::new(vec![-1.0], vec![], bpsk.clone()).unwrap();
        assert_eq!(shape_waveform(&down, &cfg).samples(), &[0.0; 4]);

        let fig = Frame::new(vec![1.0, -1.0, 1.0, 1.0], vec![], bpsk).unwrap();
        let w = shape_waveform(&fig, &cfg);
        assert_eq!(w.len(), 16);
        let expected: Vec<f64> = [1.0, 0.0, 1.0, 1.0]
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, 4))
            .collect();
        assert_eq!(w.samples(), expected.as_slice());
    }

    #[test]
    fn tx_config_validation() {
        assert!(TxConfig::new(0.0, 1.0, 4).is_err());
        assert!(TxConfig::new(1e-6, -1.0, 4).is_err());
        assert!(TxConfig::new(1e-6, 1.0, 1).is_err());
        let c = TxConfig::new(1e-6, 2.0, 8).unwrap();
        assert_eq!(c.nominal_intensity(), 1.0);
    }

    #[test]
    fn slicer_nearest_level() {
        let bpsk = PamAlphabet::bpsk();
        assert_eq!(slice(&[0.9, -0.2, 7.0, -3.0], &bpsk, 1), vec![1.0, -1.0, 1.0, -1.0]);
        let pam4 = PamAlphabet::new(4).unwrap();
        assert_eq!(slice(&[0.4], &pam4, 1), vec![1.0 / 3.0]);
        assert_eq!(slice(&[1.0, -1.0], &pam4, 1), vec![1.0, -1.0]);
    }

    #[test]
    fn midpoint_ties_are_fair_coin_flips() {
        let bpsk = PamAlphabet::bpsk();
        let out = slice(&vec![0.0; 10_000], &bpsk, 99);
        assert_eq!(out, slice(&vec![0.0; 10_000], &bpsk, 99));
        let ups = out.iter().filter(|s| **s == 1.0).count() as f64 / 1e4;
        assert!((ups - 0.5).abs() <= 0.01, "fraction of +1 decisions {ups}");

        let pam4 = PamAlphabet::new(4).unwrap();
        for s in slice(&vec![2.0 / 3.0; 200], &pam4, 5) {
            assert!(s == 1.0 || s == 1.0 / 3.0);
        }
    }
}
