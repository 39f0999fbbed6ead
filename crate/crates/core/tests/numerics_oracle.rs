use occlink::numerics::{self, gaussian_stream, DenseMatrix, SeededGaussian};

/// Error-free sum of two doubles.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free product of two doubles.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Dot product in double-double arithmetic, rounded once at the end.
fn dot_dd(x: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut hi, mut lo) = (0.0, 0.0);
    for (a, b) in x {
        let (p, pe) = two_prod(a, b);
        let (s, se) = two_sum(hi, p);
        hi = s;
        lo += se + pe;
    }
    hi + lo
}

/// Normal equations `AᵀA x = Aᵀb` with compensated accumulation and Gaussian
/// elimination with partial pivoting.
fn normal_equations(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    let mut g = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = dot_dd((0..m).map(|k| (a[(k, i)], a[(k, j)])));
        }
        g[i][n] = dot_dd((0..m).map(|k| (a[(k, i)], b[k])));
    }
    for c in 0..n {
        let p = (c..n).max_by(|x, y| g[*x][c].abs().total_cmp(&g[*y][c].abs())).unwrap();
        g.swap(c, p);
        for r in c + 1..n {
            let f = g[r][c] / g[c][c];
            for k in c..=n {
                g[r][k] -= f * g[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s = dot_dd((r + 1..n).map(|k| (g[r][k], x[k])));
        x[r] = (g[r][n] - s) / g[r][r];
    }
    x
}

#[test]
fn qr_matches_normal_equations_oracle() {
    for seed in 0..20u64 {
        let mut rng = SeededGaussian::new(seed);
        let data = gaussian_stream(&mut rng, 40 * 8);
        let b = gaussian_stream(&mut rng, 40);
        let a = DenseMatrix::from_row_major(40, 8, data).unwrap();
        let x = numerics::solve_least_squares(&a, &b).unwrap();
        let oracle = normal_equations(&a, &b);
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-10, "seed {seed}: {p} vs {q}");
        }
    }
}

#[test]
fn gaussian_moments() {
    let n = 1_000_000;
    let mut g = SeededGaussian::new(12345);
    let x = gaussian_stream(&mut g, n);
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    assert!(mean.abs() <= 0.004, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.005, "variance {var}");
}

#[test]
fn adjacent_seeds_are_uncorrelated() {
    let n = 1_000_000;
    for s in [0u64, 1, 77, u64::MAX - 1] {
        let a = gaussian_stream(&mut SeededGaussian::new(s), n);
        let b = gaussian_stream(&mut SeededGaussian::new(s.wrapping_add(1)), n);
        let c = a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() / n as f64;
        assert!(c.abs() <= 0.004, "seeds {s}, {}: {c}", s.wrapping_add(1));
    }
}

#[test]
fn derived_streams_are_reproducible() {
    let s = numerics::derive_seed(42, 3);
    let a = gaussian_stream(&mut SeededGaussian::new(s), 100);
    let b = gaussian_stream(&mut SeededGaussian::new(numerics::derive_seed(42, 3)), 100);
    assert_eq!(a, b);
    let c = gaussian_stream(&mut SeededGaussian::new(numerics::derive_seed(42, 4)), 100);
    assert_ne!(a, c);
}
