//! Closed-form ridge regression onto a Chebyshev basis.
//!
//! The normal matrix `ΦᵀΦ + λI` is only `(M+1) x (M+1)`, so every fit is
//! recomputed from scratch with a Cholesky solve.

use crate::chebyshev::{fill_basis_row, BasisDegree, ProjectedTime};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix};

/// Iterative refinement passes after the Cholesky solve.
const REFINE_STEPS: usize = 3;

/// Relative jitter applied when the factorization fails at `λ = 0`.
pub const JITTER_SCALE: f64 = 1e-10;

/// Stack of basis rows, one per cached timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Matrix,
    cached_taus: Vec<ProjectedTime>,
}

impl DesignMatrix {
    /// Wraps an arbitrary `K x (M+1)` matrix that did not come from
    /// [`build_design`]; it carries no timesteps.
    pub fn from_matrix(rows: Matrix) -> Self {
        Self {
            rows,
            cached_taus: Vec::new(),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn cached_taus(&self) -> &[ProjectedTime] {
        &self.cached_taus
    }

    /// `K`, the number of cached points.
    pub fn k_points(&self) -> usize {
        self.rows.rows()
    }

    /// `M + 1`.
    pub fn n_basis(&self) -> usize {
        self.rows.cols()
    }
}

/// `K x F` stack of cached feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(values: Matrix) -> Self {
        Self(values)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Matrix::from_rows(rows).map(Self)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// `(M+1) x F` Chebyshev coefficients, one column per feature channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(Matrix);

impl CoefficientMatrix {
    pub fn new(coeffs: Matrix) -> Result<Self> {
        if !coeffs.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(n_basis: usize, features: usize) -> Self {
        Self(Matrix::zeros(n_basis, features))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n_basis(&self) -> usize {
        self.0.rows()
    }

    pub fn features(&self) -> usize {
        self.0.cols()
    }

    /// `φ(τ) · C` for a basis row `φ`.
    pub fn combine(&self, basis: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.features()];
        for (m, &phi) in basis.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.0.row(m)) {
                *o += phi * c;
            }
        }
        out
    }
}

/// Ridge weight `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RegStrength(f64);

impl RegStrength {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParam(format!("ridge weight must be finite and >= 0, got {lambda}")));
        }
        Ok(Self(lambda))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for RegStrength {
    fn default() -> Self {
        Self(0.1)
    }
}

/// Result of a ridge solve plus what happened while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub coeffs: CoefficientMatrix,
    /// Diagonal shift that was actually added to `ΦᵀΦ`.
    pub effective_lambda: f64,
    /// Set when the `λ = 0` factorization failed and was retried with jitter.
    pub jittered: bool,
}

/// Builds `Φ` with row `k` equal to `φ(cached_taus[k])`.
pub fn build_design(cached_taus: &[ProjectedTime], degree: BasisDegree) -> Result<DesignMatrix> {
    if cached_taus.is_empty() {
        return Err(Error::EmptyCache);
    }
    for w in cached_taus.windows(2) {
        if !(w[1].value() > w[0].value()) {
            return Err(Error::NonMonotone {
                prev: w[0].value(),
                next: w[1].value(),
            });
        }
    }
    let mut rows = Matrix::zeros(cached_taus.len(), degree.len());
    for (k, &tau) in cached_taus.iter().enumerate() {
        fill_basis_row(rows.row_mut(k), tau);
    }
    Ok(DesignMatrix {
        rows,
        cached_taus: cached_taus.to_vec(),
    })
}

/// `C = (ΦᵀΦ + λI)⁻¹ ΦᵀH`.
pub fn solve_ridge(phi: &DesignMatrix, h: &FeatureMatrix, lambda: RegStrength) -> Result<CoefficientMatrix> {
    solve_ridge_with_diagnostics(phi, h, lambda).map(|fit| fit.coeffs)
}

/// Same as [`solve_ridge`], also reporting whether jitter was needed.
///
/// At `λ = 0` a design with fewer rows than basis functions is rejected
/// outright. Otherwise a failed factorization is retried once with
/// `λ = 1e-10 · trace(ΦᵀΦ) / (M+1)`; with `λ > 0` no jitter is ever added.
pub fn solve_ridge_with_diagnostics(phi: &DesignMatrix, h: &FeatureMatrix, lambda: RegStrength) -> Result<RidgeFit> {
    let design = phi.matrix();
    let features = h.matrix();
    if design.rows() != features.rows() {
        return Err(Error::Shape(format!(
            "design has {} rows but feature matrix has {}",
            design.rows(),
            features.rows()
        )));
    }
    let n = phi.n_basis();
    let lam = lambda.get();
    if lam == 0.0 && phi.k_points() < n {
        return Err(Error::NotPositiveDefinite { pivot: phi.k_points(), value: 0.0 });
    }

    let gram = design.t_matmul(design)?;
    let rhs = design.t_matmul(features)?;

    let attempt = |shift: f64| -> Result<Matrix> {
        let mut normal = gram.clone();
        for i in 0..n {
            normal[(i, i)] += shift;
        }
        let chol = Cholesky::factor(&normal)?;
        let mut c = rhs.clone();
        chol.solve_in_place(&mut c)?;
        // refine with residuals formed from Φ itself rather than ΦᵀΦ, which
        // recovers the accuracy that squaring the condition number costs
        for _ in 0..REFINE_STEPS {
            let fitted = design.matmul(&c)?;
            let mut resid = features.clone();
            for (r, f) in resid.as_mut_slice().iter_mut().zip(fitted.as_slice()) {
                *r -= f;
            }
            let mut delta = design.t_matmul(&resid)?;
            for (d, ci) in delta.as_mut_slice().iter_mut().zip(c.as_slice()) {
                *d -= shift * ci;
            }
            chol.solve_in_place(&mut delta)?;
            for (ci, d) in c.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *ci += d;
            }
            if delta.frobenius() <= f64::EPSILON * c.frobenius() {
                break;
            }
        }
        Ok(c)
    };

    let (coeffs, effective_lambda, jittered) = match attempt(lam) {
        Ok(c) => (c, lam, false),
        Err(err @ Error::NotPositiveDefinite { .. }) if lam == 0.0 => {
            let jitter = JITTER_SCALE * gram.trace() / n as f64;
            if !(jitter > 0.0) {
                return Err(err);
            }
            (attempt(jitter)?, jitter, true)
        }
        Err(err) => return Err(err),
    };
    Ok(RidgeFit {
        coeffs: CoefficientMatrix::new(coeffs)?,
        effective_lambda,
        jittered,
    })
}

/// Smallest singular value of `Φ`, as the root of the smallest eigenvalue
/// of `ΦᵀΦ`.
pub fn min_singular(phi: &DesignMatrix) -> Result<f64> {
    let design = phi.matrix();
    if design.rows() == 0 || design.cols() == 0 {
        return Err(Error::Shape("design matrix is empty".into()));
    }
    let gram = design.t_matmul(design)?;
    let eig = symmetric_eigenvalues(&gram)?;
    // K < M+1 leaves an exact zero eigenvalue that rounding may push negative
    Ok(eig[0].max(0.0).sqrt())
}

/// `‖ΦC − H‖_F² + λ‖C‖_F²`.
pub fn ridge_objective(phi: &DesignMatrix, h: &FeatureMatrix, c: &CoefficientMatrix, lambda: RegStrength) -> Result<f64> {
    let fitted = phi.matrix().matmul(c.matrix())?;
    let target = h.matrix();
    if fitted.rows() != target.rows() || fitted.cols() != target.cols() {
        return Err(Error::Shape(format!(
            "ΦC is {}x{} but H is {}x{}",
            fitted.rows(),
            fitted.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let residual: f64 = fitted
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(residual + lambda.get() * c.matrix().frobenius_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::project_time;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn taus(xs: &[f64]) -> Vec<ProjectedTime> {
        xs.iter().map(|&x| ProjectedTime::new(x).unwrap()).collect()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_row_major(rows, cols, data).unwrap()
    }

    /// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
    fn gauss_jordan_inverse(a: &Matrix) -> Matrix {
        let n = a.rows();
        let mut aug = vec![vec![0.0; 2 * n]; n];
        for i in 0..n {
            for j in 0..n {
                aug[i][j] = a[(i, j)];
            }
            aug[i][n + i] = 1.0;
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs())).unwrap();
            aug.swap(col, piv);
            let d = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[r][col];
                    let pivot_row = aug[col].clone();
                    for (v, p) in aug[r].iter_mut().zip(pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[i][n + j];
            }
        }
        inv
    }

    fn brute_force_ridge(phi: &Matrix, h: &Matrix, lambda: f64) -> Matrix {
        let mut normal = phi.transpose().matmul(phi).unwrap();
        for i in 0..normal.rows() {
            normal[(i, i)] += lambda;
        }
        gauss_jordan_inverse(&normal)
            .matmul(&phi.transpose().matmul(h).unwrap())
            .unwrap()
    }

    #[test]
    fn build_design_examples() {
        let d = build_design(&taus(&[-1.0, 0.0, 1.0]), BasisDegree::new(1)).unwrap();
        assert_eq!(d.matrix().as_slice(), &[1.0, -1.0, 1.0, 0.0, 1.0, 1.0]);
        let d = build_design(&taus(&[0.0]), BasisDegree::new(2)).unwrap();
        assert_eq!(d.matrix().as_slice(), &[1.0, 0.0, -1.0]);
        let d = build_design(&taus(&[-1.0, 1.0]), BasisDegree::new(0)).unwrap();
        assert_eq!(d.matrix().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn build_design_rejects_bad_timesteps() {
        assert_eq!(build_design(&[], BasisDegree::new(2)), Err(Error::EmptyCache));
        assert!(matches!(
            build_design(&taus(&[0.1, 0.1]), BasisDegree::new(2)),
            Err(Error::NonMonotone { .. })
        ));
        assert!(matches!(
            build_design(&taus(&[0.5, 0.1]), BasisDegree::new(2)),
            Err(Error::NonMonotone { .. })
        ));
    }

    #[test]
    fn square_system_interpolates() {
        let degree = BasisDegree::new(3);
        let phi = build_design(&taus(&[-0.9, -0.2, 0.4, 0.8]), degree).unwrap();
        let h = FeatureMatrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [-1.0, 0.0], [2.0, 1.5]]).unwrap();
        let c = solve_ridge(&phi, &h, RegStrength::new(0.0).unwrap()).unwrap();
        let back = phi.matrix().matmul(c.matrix()).unwrap();
        for (a, b) in back.as_slice().iter().zip(h.matrix().as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }
        let obj = ridge_objective(&phi, &h, &c, RegStrength::new(0.0).unwrap()).unwrap();
        assert!(obj <= 1e-20);
    }

    #[test]
    fn huge_lambda_drives_coefficients_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = DesignMatrix::from_matrix(random_matrix(&mut rng, 7, 4));
        let h = FeatureMatrix::new(random_matrix(&mut rng, 7, 3));
        let lambda = 1e12;
        let c = solve_ridge(&phi, &h, RegStrength::new(lambda).unwrap()).unwrap();
        let rhs_norm = phi.matrix().t_matmul(h.matrix()).unwrap().frobenius();
        assert!(c.matrix().frobenius() <= 1e-6 * rhs_norm);
        assert!(c.matrix().frobenius() <= rhs_norm / lambda * (1.0 + 1e-9));
    }

    #[test]
    fn matches_brute_force_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = random_matrix(&mut rng, 6, 3);
        let h = random_matrix(&mut rng, 6, 2);
        let c = solve_ridge(
            &DesignMatrix::from_matrix(phi.clone()),
            &FeatureMatrix::new(h.clone()),
            RegStrength::new(0.1).unwrap(),
        )
        .unwrap();
        let oracle = brute_force_ridge(&phi, &h, 0.1);
        for (a, b) in c.matrix().as_slice().iter().zip(oracle.as_slice()) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn normal_equation_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let k = rng.random_range(1..12);
            let m = rng.random_range(0..7);
            let f = rng.random_range(1..9);
            let ts: Vec<f64> = {
                let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            };
            let taus: Vec<_> = ts.iter().map(|&t| project_time(t).unwrap()).collect();
            let phi = build_design(&taus, BasisDegree::new(m)).unwrap();
            let h = FeatureMatrix::new(random_matrix(&mut rng, taus.len(), f));
            let lambda = RegStrength::new(rng.random_range(0.01..2.0)).unwrap();
            let c = solve_ridge(&phi, &h, lambda).unwrap();
            let mut normal = phi.matrix().t_matmul(phi.matrix()).unwrap();
            for i in 0..normal.rows() {
                normal[(i, i)] += lambda.get();
            }
            let lhs = normal.matmul(c.matrix()).unwrap();
            let rhs = phi.matrix().t_matmul(h.matrix()).unwrap();
            let diff: f64 = lhs
                .as_slice()
                .iter()
                .zip(rhs.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 1e-10 * rhs.frobenius().max(1e-300), "relative residual {}", diff / rhs.frobenius());
        }
    }

    #[test]
    fn short_cache_with_ridge_is_solvable() {
        let phi = build_design(&taus(&[-1.0, -0.9]), BasisDegree::new(4)).unwrap();
        let h = FeatureMatrix::from_rows(&[[1.0], [1.2]]).unwrap();
        let fit = solve_ridge_with_diagnostics(&phi, &h, RegStrength::default()).unwrap();
        assert!(!fit.jittered);
        assert_eq!(fit.effective_lambda, 0.1);
    }

    #[test]
    fn degenerate_cache_without_ridge_fails() {
        let phi = build_design(&taus(&[-1.0, -0.9]), BasisDegree::new(4)).unwrap();
        let h = FeatureMatrix::from_rows(&[[1.0], [1.2]]).unwrap();
        let err = solve_ridge(&phi, &h, RegStrength::new(0.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        // same answer every time
        assert_eq!(err, solve_ridge(&phi, &h, RegStrength::new(0.0).unwrap()).unwrap_err());
    }

    #[test]
    fn rank_deficient_square_design_is_jittered() {
        let phi = DesignMatrix::from_matrix(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap());
        let h = FeatureMatrix::from_rows(&[[2.0], [0.0]]).unwrap();
        let fit = solve_ridge_with_diagnostics(&phi, &h, RegStrength::new(0.0).unwrap()).unwrap();
        assert!(fit.jittered);
        assert_eq!(fit.effective_lambda, JITTER_SCALE * 1.0 / 2.0);
        // positive λ never jitters, it just solves
        let fit = solve_ridge_with_diagnostics(&phi, &h, RegStrength::new(0.5).unwrap()).unwrap();
        assert!(!fit.jittered);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let phi = build_design(&taus(&[-1.0, 0.0, 1.0]), BasisDegree::new(1)).unwrap();
        let h = FeatureMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(matches!(solve_ridge(&phi, &h, RegStrength::default()), Err(Error::Shape(_))));
        let c = CoefficientMatrix::zeros(2, 1);
        assert!(matches!(
            ridge_objective(&phi, &h, &c, RegStrength::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn reg_strength_validates() {
        assert!(RegStrength::new(-0.1).is_err());
        assert!(RegStrength::new(f64::NAN).is_err());
        assert_eq!(RegStrength::default().get(), 0.1);
    }

    #[test]
    fn objective_examples() {
        let phi = build_design(&taus(&[-0.5, 0.5]), BasisDegree::new(1)).unwrap();
        let h = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let zero = CoefficientMatrix::zeros(2, 2);
        let obj = ridge_objective(&phi, &h, &zero, RegStrength::new(0.7).unwrap()).unwrap();
        assert_eq!(obj, 15.0);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_matrix(&mut rng, 5, 3);
        let hh = random_matrix(&mut rng, 5, 4);
        let cc = random_matrix(&mut rng, 3, 4);
        let lam = 0.37;
        // direct elementwise summation
        let mut expected = 0.0;
        for k in 0..5 {
            for i in 0..4 {
                let mut pred = 0.0;
                for m in 0..3 {
                    pred += p[(k, m)] * cc[(m, i)];
                }
                expected += (pred - hh[(k, i)]).powi(2);
            }
        }
        for m in 0..3 {
            for i in 0..4 {
                expected += lam * cc[(m, i)].powi(2);
            }
        }
        let got = ridge_objective(
            &DesignMatrix::from_matrix(p),
            &FeatureMatrix::new(hh),
            &CoefficientMatrix::new(cc).unwrap(),
            RegStrength::new(lam).unwrap(),
        )
        .unwrap();
        assert!((got - expected).abs() <= 1e-10);
    }

    #[test]
    fn min_singular_examples() {
        let id = DesignMatrix::from_matrix(Matrix::identity(2));
        assert!((min_singular(&id).unwrap() - 1.0).abs() < 1e-15);
        let def = DesignMatrix::from_matrix(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap());
        assert_eq!(min_singular(&def).unwrap(), 0.0);
    }

    #[test]
    fn min_singular_on_gauss_nodes() {
        // ΦᵀΦ = diag(K, K/2, ..., K/2) on K Chebyshev-Gauss nodes
        let nodes = crate::chebyshev::chebyshev_gauss_nodes(8);
        let phi = build_design(&taus(&nodes), BasisDegree::new(4)).unwrap();
        assert!((min_singular(&phi).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coefficient_matrix_rejects_non_finite() {
        let m = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert_eq!(CoefficientMatrix::new(m), Err(Error::NonFinite));
    }
}
