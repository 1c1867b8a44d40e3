//! Deterministic test data and dense-matrix oracles shared by unit tests.

use std::f64::consts::TAU;

use crate::grid::{PeriodicGrid, WaveFunction};
use crate::scalar::Cplx;

pub type C = Cplx<f64>;

/// xorshift in [-0.5, 0.5); deterministic without an RNG dependency.
pub fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

pub fn random_wave(n: usize, seed: u64) -> WaveFunction<f64> {
    let re = pseudo_random(n, seed);
    let im = pseudo_random(n, seed ^ 0x5555);
    re.iter().zip(&im).map(|(&a, &b)| C::new(a, b)).collect()
}

pub type Dense = Vec<Vec<C>>;

/// Spectral differentiation matrix `𝒦ᵏ` assembled from a direct DFT sum
/// of the multiplier `(iκ)^k` (Nyquist zero for odd `k`).
pub fn dense_derivative(grid: &PeriodicGrid<f64>, k: usize) -> Dense {
    let m = grid.len();
    let mult = grid.multiplier(k);
    (0..m)
        .map(|j| {
            (0..m)
                .map(|l| {
                    let mut s = C::new(0.0, 0.0);
                    for (q, mq) in mult.iter().enumerate() {
                        let phase = TAU * (q * ((j + m - l) % m) % m) as f64 / m as f64;
                        s += mq * C::from_polar(1.0, phase);
                    }
                    s / m as f64
                })
                .collect()
        })
        .collect()
}

pub fn dense_diag(f: &[f64]) -> Dense {
    let m = f.len();
    (0..m)
        .map(|j| (0..m).map(|l| C::new(if j == l { f[j] } else { 0.0 }, 0.0)).collect())
        .collect()
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let m = a.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn dense_add(a: &Dense, b: &Dense, alpha: C) -> Dense {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + alpha * y).collect())
        .collect()
}

pub fn dense_apply(a: &Dense, v: &WaveFunction<f64>) -> WaveFunction<f64> {
    a.iter()
        .map(|row| row.iter().zip(v.iter()).map(|(x, y)| x * y).sum())
        .collect()
}

/// `½(D_f 𝒦ᵏ + 𝒦ᵏ D_f)`
pub fn dense_symmetrized(grid: &PeriodicGrid<f64>, f: &[f64], k: usize) -> Dense {
    let dk = dense_derivative(grid, k);
    let df = dense_diag(f);
    let lhs = dense_mul(&df, &dk);
    let rhs = dense_mul(&dk, &df);
    dense_add(&lhs, &rhs, C::new(1.0, 0.0))
        .into_iter()
        .map(|r| r.into_iter().map(|z| z * 0.5).collect())
        .collect()
}

pub fn max_abs_diff(a: &WaveFunction<f64>, b: &WaveFunction<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
