//! Numerical kernels shared by the link chain: linear convolution, convolution
//! (Toeplitz) matrices, Householder least squares and a reproducible Gaussian
//! generator.
//!
//! Summation order is fixed everywhere (ascending index) so that results are
//! bit-stable across runs on the same platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A·x`, each row summed left to right.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(0.0, |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// `Aᵀ·y`.
    pub fn transpose_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Shape(format!(
                "matrix has {} rows, vector has {} entries",
                self.rows,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        Ok(out)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Full linear convolution, length `a.len() + b.len() - 1`.
///
/// `out[n] = Σ_j a[n-j]·b[j]` with `j` ascending. Empty input yields an empty
/// output.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n_out = a.len() + b.len() - 1;
    (0..n_out)
        .map(|n| {
            let j_lo = n.saturating_sub(a.len() - 1);
            let j_hi = n.min(b.len() - 1);
            (j_lo..=j_hi).fold(0.0, |acc, j| acc + a[n - j] * b[j])
        })
        .collect()
}

/// Row layout of a convolution matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvMode {
    /// `|seq| + n_cols - 1` rows: the whole of `convolve(seq, x)`.
    Full,
    /// `|seq| - n_cols + 1` rows: only outputs where `x` fully overlaps `seq`,
    /// i.e. `convolve(seq, x)[n_cols-1 ..= |seq|-1]`.
    Valid,
}

/// Matrix `T` with constant diagonals such that `T·x` equals the selected slice
/// of `convolve(seq, x)` bit for bit.
pub fn convolution_matrix(seq: &[f64], n_cols: usize, mode: ConvMode) -> Result<DenseMatrix> {
    if seq.is_empty() || n_cols == 0 {
        return Err(Error::Shape(
            "convolution matrix needs a nonempty sequence and at least one column".into(),
        ));
    }
    let (n_rows, first) = match mode {
        ConvMode::Full => (seq.len() + n_cols - 1, 0),
        ConvMode::Valid => {
            if seq.len() < n_cols {
                return Err(Error::Shape(format!(
                    "valid-mode convolution matrix needs |seq| >= n_cols ({} < {n_cols})",
                    seq.len()
                )));
            }
            (seq.len() - n_cols + 1, n_cols - 1)
        }
    };
    let mut m = DenseMatrix::zeros(n_rows, n_cols);
    for i in 0..n_rows {
        let n = i + first;
        for j in 0..n_cols {
            if n >= j && n - j < seq.len() {
                m[(i, j)] = seq[n - j];
            }
        }
    }
    Ok(m)
}

/// Householder QR factorization of a tall matrix, kept in compact form so the
/// same factorization can solve several right-hand sides.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    rows: usize,
    cols: usize,
    // Householder vectors below the diagonal, R on and above it.
    qr: DenseMatrix,
    // Scalars beta_k of each reflector H_k = I - beta_k v_k v_kᵀ, with v_k[k] = 1.
    betas: Vec<f64>,
}

/// Relative threshold on `|R_kk| / max|R_jj|` below which a system counts as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

impl QrFactorization {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if n == 0 || m < n {
            return Err(Error::Shape(format!(
                "least squares needs rows >= cols >= 1, got {m}x{n}"
            )));
        }
        let mut qr = a.clone();
        let mut betas = Vec::with_capacity(n);
        for k in 0..n {
            let norm = (k..m).fold(0.0, |acc, i| acc + qr[(i, k)] * qr[(i, k)]).sqrt();
            if norm == 0.0 {
                betas.push(0.0);
                continue;
            }
            let x0 = qr[(k, k)];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let v0 = x0 - alpha;
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            let beta = -v0 / alpha;
            qr[(k, k)] = alpha;
            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= beta;
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    let vi = qr[(i, k)];
                    qr[(i, j)] -= s * vi;
                }
            }
            betas.push(beta);
        }
        let f = Self {
            rows: m,
            cols: n,
            qr,
            betas,
        };
        let diag: Vec<f64> = (0..n).map(|k| f.qr[(k, k)].abs()).collect();
        let largest = diag.iter().cloned().fold(0.0, f64::max);
        if let Some((k, d)) = diag
            .iter()
            .enumerate()
            .find(|(_, d)| **d <= RANK_TOLERANCE * largest || largest == 0.0)
        {
            return Err(Error::SingularSystem(format!(
                "|R[{k},{k}]| = {d:e} is below {RANK_TOLERANCE:e} of the largest diagonal {largest:e}"
            )));
        }
        Ok(f)
    }

    /// Minimizer of `‖A·x − b‖₂`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.rows {
            return Err(Error::Shape(format!(
                "right-hand side has {} entries, matrix has {} rows",
                b.len(),
                self.rows
            )));
        }
        let (m, n) = (self.rows, self.cols);
        let mut y = b.to_vec();
        // y <- Qᵀ b
        for k in 0..n {
            let mut s = y[k];
            for i in k + 1..m {
                s += self.qr[(i, k)] * y[i];
            }
            s *= self.betas[k];
            y[k] -= s;
            for i in k + 1..m {
                y[i] -= s * self.qr[(i, k)];
            }
        }
        // back substitution with R
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..n {
                s -= self.qr[(k, j)] * x[j];
            }
            x[k] = s / self.qr[(k, k)];
        }
        Ok(x)
    }
}

/// Least-squares solution of `A·x ≈ b` by Householder QR.
pub fn solve_least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::Shape(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            a.rows()
        )));
    }
    QrFactorization::new(a)?.solve(b)
}

/// Euclidean norm, summed left to right.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, index)`. For a fixed `seed`, distinct
/// indices map to distinct outputs.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Counter-based generator: draw `k` is `mix64(seed + (k+1)·γ)`, with `γ` the
/// 64-bit golden-ratio increment. Normal draws use Box–Muller on pairs of
/// 53-bit uniforms in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededGaussian {
    seed: u64,
    counter: u64,
    spare: Option<u64>,
}

impl SeededGaussian {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            counter: 0,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(self.counter)))
    }

    /// Uniform in the open interval (0, 1).
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(bits) = self.spare.take() {
            return f64::from_bits(bits);
        }
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some((radius * angle.sin()).to_bits());
        radius * angle.cos()
    }
}

/// `n` standard normal draws, advancing `gen`.
pub fn gaussian_stream(gen: &mut SeededGaussian, n: usize) -> Vec<f64> {
    (0..n).map(|_| gen.next_gaussian()).collect()
}
