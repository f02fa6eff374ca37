//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `A X = B` by Gauss-Jordan elimination with partial pivoting.
/// `a` is n×n, `b` is n×m, both row-major nested vectors.
pub fn gauss_jordan(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for v in b[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..n {
                        a[r][c] -= f * a[col][c];
                    }
                    for c in 0..b[r].len() {
                        b[r][c] -= f * b[col][c];
                    }
                }
            }
        }
    }
    b
}

/// `(ΦᵀΦ + λI)⁻¹ ΦᵀH` through explicit sums and Gauss-Jordan.
pub fn ridge_reference(phi: &[Vec<f64>], h: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let n = phi[0].len();
    let f = h[0].len();
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![vec![0.0; f]; n];
    for (row, hrow) in phi.iter().zip(h) {
        for i in 0..n {
            for j in 0..n {
                a[i][j] += row[i] * row[j];
            }
            for c in 0..f {
                rhs[i][c] += row[i] * hrow[c];
            }
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    gauss_jordan(a, rhs)
}

/// `T_m(τ) = cos(m arccos τ)`.
pub fn cheb_trig(m: usize, tau: f64) -> f64 {
    (m as f64 * tau.clamp(-1.0, 1.0).acos()).cos()
}

/// Random instance with strictly increasing times in `[0, 1]`.
pub struct RidgeInstance {
    pub times: Vec<f64>,
    pub degree: usize,
    pub h: Vec<Vec<f64>>,
    pub lambda: f64,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> RidgeInstance {
    let k = rng.random_range(1..=12);
    let degree = rng.random_range(0..=6);
    let f = rng.random_range(1..=16);
    let mut times: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let h = times
        .iter()
        .map(|_| (0..f).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
    RidgeInstance { times, degree, h, lambda }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Design rows built with the trigonometric form of `T_m`.
pub fn design_rows(times: &[f64], degree: usize) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|&t| (0..=degree).map(|m| cheb_trig(m, 2.0 * t - 1.0)).collect())
        .collect()
}
