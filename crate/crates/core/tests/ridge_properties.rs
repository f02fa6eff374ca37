mod common;

use common::{design_rows, random_instance, ridge_reference, rng};
use rand::Rng;
use spectral_forecast::chebyshev::{project_time, BasisDegree};
use spectral_forecast::linalg::Matrix;
use spectral_forecast::ridge::{
    build_design, min_singular, ridge_objective, solve_ridge, CoefficientMatrix, DesignMatrix, FeatureMatrix,
    RegStrength,
};

fn design(times: &[f64], degree: usize) -> DesignMatrix {
    let taus: Vec<_> = times.iter().map(|&t| project_time(t).unwrap()).collect();
    build_design(&taus, BasisDegree::new(degree)).unwrap()
}

fn features(h: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(h).unwrap()
}

#[test]
fn matches_normal_equation_oracle() {
    let mut r = rng(2024);
    for _ in 0..100 {
        let inst = random_instance(&mut r);
        let phi = design(&inst.times, inst.degree);
        let c = solve_ridge(&phi, &features(&inst.h), RegStrength::new(inst.lambda).unwrap()).unwrap();
        let reference = ridge_reference(&design_rows(&inst.times, inst.degree), &inst.h, inst.lambda);
        for (i, row) in reference.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((c.matrix()[(i, j)] - v).abs() <= 1e-8, "({i},{j}) {} vs {v}", c.matrix()[(i, j)]);
            }
        }
    }
}

#[test]
fn solution_minimizes_objective() {
    let mut r = rng(7);
    for _ in 0..30 {
        let inst = random_instance(&mut r);
        let phi = design(&inst.times, inst.degree);
        let h = features(&inst.h);
        let lambda = RegStrength::new(inst.lambda).unwrap();
        let c = solve_ridge(&phi, &h, lambda).unwrap();
        let best = ridge_objective(&phi, &h, &c, lambda).unwrap();
        for _ in 0..10 {
            let m = c.matrix();
            let data: Vec<f64> = m.as_slice().iter().map(|v| v + r.random_range(-1e-3..1e-3)).collect();
            let perturbed = CoefficientMatrix::new(Matrix::from_row_major(m.rows(), m.cols(), data).unwrap()).unwrap();
            assert!(ridge_objective(&phi, &h, &perturbed, lambda).unwrap() >= best - 1e-12 * best.max(1.0));
        }
    }
}

#[test]
fn coefficient_norm_shrinks_with_lambda() {
    let mut r = rng(11);
    for _ in 0..30 {
        let inst = random_instance(&mut r);
        let phi = design(&inst.times, inst.degree);
        let h = features(&inst.h);
        let mut prev = f64::INFINITY;
        for lambda in [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0] {
            let c = solve_ridge(&phi, &h, RegStrength::new(lambda).unwrap()).unwrap();
            let norm = c.matrix().frobenius();
            assert!(norm <= prev * (1.0 + 1e-12));
            prev = norm;
        }
    }
}

#[test]
fn columns_are_fitted_independently() {
    let mut r = rng(5);
    for _ in 0..20 {
        let inst = random_instance(&mut r);
        let phi = design(&inst.times, inst.degree);
        let lambda = RegStrength::new(inst.lambda).unwrap();
        let full = solve_ridge(&phi, &features(&inst.h), lambda).unwrap();
        let f = inst.h[0].len();
        for col in 0..f {
            let single: Vec<Vec<f64>> = inst.h.iter().map(|row| vec![row[col]]).collect();
            let c = solve_ridge(&phi, &features(&single), lambda).unwrap();
            for i in 0..=inst.degree {
                assert!((c.matrix()[(i, 0)] - full.matrix()[(i, col)]).abs() <= 1e-12);
            }
        }
    }
}

/// Number of eigenvalues of symmetric `a` below `mu`, from the signs of the
/// LDLᵀ pivots of `a - mu I` (Sylvester's law of inertia).
fn eigen_count_below(a: &[Vec<f64>], mu: f64) -> usize {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for (i, r) in m.iter_mut().enumerate() {
        r[i] -= mu;
    }
    let mut negatives = 0;
    for k in 0..n {
        let d = m[k][k];
        if d < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = m[i][k] / d;
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    negatives
}

#[test]
fn smallest_singular_value_matches_inertia_bisection() {
    let mut r = rng(99);
    let mut checked = 0;
    while checked < 40 {
        let inst = random_instance(&mut r);
        if inst.times.len() < inst.degree + 1 {
            continue;
        }
        let rows = design_rows(&inst.times, inst.degree);
        let n = inst.degree + 1;
        let mut gram = vec![vec![0.0; n]; n];
        for row in &rows {
            for i in 0..n {
                for j in 0..n {
                    gram[i][j] += row[i] * row[j];
                }
            }
        }
        let (mut lo, mut hi) = (0.0f64, gram.iter().enumerate().map(|(i, r)| r[i]).sum::<f64>() + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eigen_count_below(&gram, mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let expected = (0.5 * (lo + hi)).sqrt();
        let got = min_singular(&design(&inst.times, inst.degree)).unwrap();
        assert!((got - expected).abs() <= 1e-7 * expected.max(1.0), "{got} vs {expected}");
        checked += 1;
    }
}

#[test]
fn chebyshev_nodes_give_orthogonal_design() {
    // at K Gauss nodes with M < K the Gram matrix is diag(K, K/2, ..., K/2)
    for k in [5usize, 8, 12] {
        let nodes = spectral_forecast::chebyshev::chebyshev_gauss_nodes(k);
        let times: Vec<f64> = nodes.iter().map(|x| (x + 1.0) / 2.0).collect();
        let s = min_singular(&design(&times, 4)).unwrap();
        assert!((s - (k as f64 / 2.0).sqrt()).abs() < 1e-10);
    }
}
