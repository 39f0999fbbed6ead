//! Error rates, amplitude histograms and histogram cluster counting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions where `tx` and `rx` differ.
pub fn error_positions<T: PartialEq>(tx: &[T], rx: &[T]) -> Result<Vec<usize>> {
    if tx.len() != rx.len() {
        return Err(Error::Shape(format!(
            "cannot compare {} transmitted with {} received items",
            tx.len(),
            rx.len()
        )));
    }
    Ok(tx
        .iter()
        .zip(rx)
        .enumerate()
        .filter_map(|(i, (a, b))| (a != b).then_some(i))
        .collect())
}

/// Hamming distance over length. An empty comparison has rate 0.
pub fn bit_error_rate(tx: &[u8], rx: &[u8]) -> Result<f64> {
    let errors = error_positions(tx, rx)?.len();
    Ok(if tx.is_empty() {
        0.0
    } else {
        errors as f64 / tx.len() as f64
    })
}

/// Outcome of one decoded frame, or of several merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub ber: f64,
    pub ser: f64,
    pub n_bits: usize,
    pub n_symbols: usize,
    pub bit_errors: usize,
    pub symbol_errors: usize,
    pub snr_db: Option<f64>,
    pub offset_fraction: f64,
    pub residual_isi: f64,
    pub estimated_taps: Vec<f64>,
}

impl LinkReport {
    #[allow(clippy::too_many_arguments)]
    pub fn from_decisions(
        tx_bits: &[u8],
        rx_bits: &[u8],
        tx_symbols: &[f64],
        rx_symbols: &[f64],
        snr_db: Option<f64>,
        offset_fraction: f64,
        residual_isi: f64,
        estimated_taps: Vec<f64>,
    ) -> Result<Self> {
        let bit_errors = error_positions(tx_bits, rx_bits)?.len();
        let symbol_errors = error_positions(tx_symbols, rx_symbols)?.len();
        Ok(Self::from_counts(
            tx_bits.len(),
            bit_errors,
            tx_symbols.len(),
            symbol_errors,
            snr_db,
            offset_fraction,
            residual_isi,
            estimated_taps,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        n_bits: usize,
        bit_errors: usize,
        n_symbols: usize,
        symbol_errors: usize,
        snr_db: Option<f64>,
        offset_fraction: f64,
        residual_isi: f64,
        estimated_taps: Vec<f64>,
    ) -> Self {
        let rate = |e: usize, n: usize| if n == 0 { 0.0 } else { e as f64 / n as f64 };
        Self {
            ber: rate(bit_errors, n_bits),
            ser: rate(symbol_errors, n_symbols),
            n_bits,
            n_symbols,
            bit_errors,
            symbol_errors,
            snr_db,
            offset_fraction,
            residual_isi,
            estimated_taps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    /// Indices of bins with at least one sample.
    pub fn occupied(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|i| self.counts[*i] > 0).collect()
    }

    /// Bin-wise sum of two histograms over identical edges.
    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::Shape("histograms have different bin edges".into()));
        }
        Ok(Histogram {
            bin_edges: self.bin_edges.clone(),
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Uniform bins over `[low, high]`; samples outside the range land in the edge
/// bins. NaN samples go to the lowest bin.
pub fn histogram(samples: &[f64], n_bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (low, high) = range;
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::Config(format!("invalid histogram range [{low}, {high}]")));
    }
    let width = (high - low) / n_bins as f64;
    let bin_edges = (0..=n_bins).map(|i| low + i as f64 * width).collect();
    let mut counts = vec![0u64; n_bins];
    for &s in samples {
        let i = ((s - low) / width).floor();
        let i = if i.is_nan() { 0.0 } else { i.clamp(0.0, (n_bins - 1) as f64) };
        counts[i as usize] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}

/// Count histogram peaks whose prominence is at least
/// `min_prominence · max(counts)`.
///
/// A peak is a maximal run of equal counts whose neighbors on both sides are
/// strictly lower (or absent). Its prominence is the peak height minus the
/// higher of the two valley floors, each floor being the lowest count between
/// the peak and the nearest strictly higher bin on that side (or the histogram
/// edge). A side with no bins at all sets no floor.
pub fn detect_clusters(h: &Histogram, min_prominence: f64) -> usize {
    let c = &h.counts;
    let top = c.iter().copied().max().unwrap_or(0);
    if top == 0 {
        return 0;
    }
    let threshold = min_prominence * top as f64;
    let mut found = 0;
    let mut i = 0;
    while i < c.len() {
        let mut j = i;
        while j + 1 < c.len() && c[j + 1] == c[i] {
            j += 1;
        }
        let height = c[i];
        let left_lower = i == 0 || c[i - 1] < height;
        let right_lower = j + 1 == c.len() || c[j + 1] < height;
        if height > 0 && left_lower && right_lower {
            let left_floor = c[..i].iter().rev().take_while(|v| **v <= height).min();
            let right_floor = c[j + 1..].iter().take_while(|v| **v <= height).min();
            // a side with no bins before a higher one (or the edge) sets no floor
            let floor = match (left_floor, right_floor) {
                (Some(l), Some(r)) => Some(*l.max(r)),
                (Some(x), None) | (None, Some(x)) => Some(*x),
                (None, None) => None,
            };
            let counted = match floor {
                Some(f) => (height - f) as f64 >= threshold,
                None => true,
            };
            if counted {
                found += 1;
            }
        }
        i = j + 1;
    }
    found
}

/// Default relative prominence for [`detect_clusters`].
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.05;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ber_basics() {
        assert_eq!(bit_error_rate(&[0, 1, 1], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(bit_error_rate(&[0, 1, 1, 0], &[1, 0, 0, 1]).unwrap(), 1.0);
        assert_eq!(bit_error_rate(&[0, 1, 1, 0], &[0, 0, 1, 0]).unwrap(), 0.25);
        assert!(matches!(bit_error_rate(&[0], &[0, 1]), Err(Error::Shape(_))));
    }

    #[test]
    fn report_rates_are_exact_ratios() {
        let tx_bits = [0, 1, 1, 0, 1, 0];
        let rx_bits = [0, 1, 0, 0, 1, 1];
        let tx_sym = [-1.0, 1.0, 1.0, -1.0, 1.0, -1.0];
        let rx_sym = [-1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        let r = LinkReport::from_decisions(&tx_bits, &rx_bits, &tx_sym, &rx_sym, None, 0.0, 0.0, vec![])
            .unwrap();
        assert_eq!(r.bit_errors, 2);
        assert_eq!(r.ber, 2.0 / 6.0);
        assert_eq!(r.ser, 2.0 / 6.0);
        let positions = error_positions(&tx_bits, &rx_bits).unwrap();
        assert_eq!(positions, vec![2, 5]);
        assert_eq!(positions.len() as f64 / 6.0, r.ber);
    }

    #[test]
    fn histogram_bins_and_saturation() {
        let h = histogram(&[0.0], 10, (-1.0, 1.0)).unwrap();
        assert_eq!(h.occupied().len(), 1);
        let h = histogram(&[-5.0, 5.0, 0.99, -1.0, f64::NAN], 4, (-1.0, 1.0)).unwrap();
        assert_eq!(h.counts, vec![3, 0, 0, 2]);
        assert_eq!(h.total(), 5);
        assert_eq!(h.bin_edges.len(), 5);
        assert!(histogram(&[], 0, (0.0, 1.0)).is_err());
        assert!(histogram(&[], 3, (1.0, 1.0)).is_err());
    }

    #[test]
    fn histogram_merge_adds_counts() {
        let a = histogram(&[0.1, 0.2], 4, (0.0, 1.0)).unwrap();
        let b = histogram(&[0.9], 4, (0.0, 1.0)).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.counts, vec![2, 0, 0, 1]);
        let c = histogram(&[0.9], 5, (0.0, 1.0)).unwrap();
        assert!(a.merge(&c).is_err());
    }

    fn hist(counts: Vec<u64>) -> Histogram {
        let bin_edges = (0..=counts.len()).map(|i| i as f64).collect();
        Histogram { bin_edges, counts }
    }

    #[test]
    fn cluster_counting() {
        assert_eq!(detect_clusters(&hist(vec![0, 1, 4, 9, 4, 1, 0]), 0.05), 1);
        assert_eq!(detect_clusters(&hist(vec![0, 9, 0, 0, 8, 0, 5, 0, 7]), 0.05), 4);
        // plateau counts once
        assert_eq!(detect_clusters(&hist(vec![0, 5, 5, 5, 0]), 0.05), 1);
        // shoulder below the prominence threshold is ignored
        assert_eq!(detect_clusters(&hist(vec![0, 100, 60, 61, 0]), 0.05), 1);
        assert_eq!(detect_clusters(&hist(vec![0, 100, 60, 61, 0]), 0.001), 2);
        assert_eq!(detect_clusters(&hist(vec![0, 0, 0]), 0.05), 0);
        assert_eq!(detect_clusters(&hist(vec![3]), 0.05), 1);
    }

    #[test]
    fn cluster_count_is_scale_invariant() {
        let base = vec![1, 7, 2, 0, 3, 9, 9, 1, 0, 4, 1];
        let n = detect_clusters(&hist(base.clone()), 0.1);
        for k in [2u64, 5, 1000] {
            let scaled = base.iter().map(|c| c * k).collect();
            assert_eq!(detect_clusters(&hist(scaled), 0.1), n);
        }
    }
}
