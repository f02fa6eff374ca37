//! Chebyshev polynomials of the first kind on `[-1, 1]`.
//!
//! Everything here is evaluated with the three-term recurrence
//! `T_m = 2 tau T_{m-1} - T_{m-2}`; `cos(m acos tau)` only appears in tests.

use crate::error::{Error, Result};

/// Slack admitted at the boundary of `[-1, 1]` to absorb round-off from
/// [`project_time`].
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// A point of the Chebyshev domain `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProjectedTime(f64);

impl ProjectedTime {
    /// Values within [`BOUNDARY_SLACK`] of the interval are clamped onto it.
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || !(-1.0 - BOUNDARY_SLACK..=1.0 + BOUNDARY_SLACK).contains(&tau) {
            return Err(Error::OutOfRange {
                what: "projected time",
                value: tau,
                lo: -1.0,
                hi: 1.0,
            });
        }
        Ok(Self(tau.clamp(-1.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Maximum polynomial degree `M`; a basis row has `M + 1` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisDegree(usize);

impl BasisDegree {
    pub const fn new(m_max: usize) -> Self {
        Self(m_max)
    }

    pub const fn get(self) -> usize {
        self.0
    }

    /// Number of basis functions, `M + 1`.
    pub const fn len(self) -> usize {
        self.0 + 1
    }
}

impl Default for BasisDegree {
    fn default() -> Self {
        Self(4)
    }
}

/// Parameters of a Bernstein ellipse `E_rho` together with a bound `B` on
/// `|f|` over it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EllipseBoundParams {
    rho: f64,
    b_sup: f64,
}

impl EllipseBoundParams {
    pub fn new(rho: f64, b_sup: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 1.0) {
            return Err(Error::InvalidParam(format!("ellipse parameter rho must exceed 1, got {rho}")));
        }
        if !(b_sup.is_finite() && b_sup > 0.0) {
            return Err(Error::InvalidParam(format!("sup bound B must be positive, got {b_sup}")));
        }
        Ok(Self { rho, b_sup })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn b_sup(&self) -> f64 {
        self.b_sup
    }

    /// Semi-major axis `(rho + 1/rho) / 2` of the ellipse.
    pub fn semi_major(&self) -> f64 {
        0.5 * (self.rho + self.rho.recip())
    }
}

/// `T_m(tau)` by the three-term recurrence.
pub fn eval_cheb(m: usize, tau: ProjectedTime) -> f64 {
    let x = tau.value();
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 2..=m {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// The row `[T_0(tau), ..., T_M(tau)]`.
pub fn basis_row(degree: BasisDegree, tau: ProjectedTime) -> Vec<f64> {
    let mut row = vec![0.0; degree.len()];
    fill_basis_row(&mut row, tau);
    row
}

/// Writes `T_0..T_{len-1}` at `tau` into `row`.
pub(crate) fn fill_basis_row(row: &mut [f64], tau: ProjectedTime) {
    let x = tau.value();
    for m in 0..row.len() {
        row[m] = match m {
            0 => 1.0,
            1 => x,
            _ => 2.0 * x * row[m - 1] - row[m - 2],
        };
    }
}

/// Fixed map of diffusion time `t in [0, 1]` onto `[-1, 1]`: `2t - 1`.
pub fn project_time(t: f64) -> Result<ProjectedTime> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            what: "diffusion time",
            value: t,
            lo: 0.0,
            hi: 1.0,
        });
    }
    ProjectedTime::new(2.0 * t - 1.0)
}

/// Uniform bound `2B / (rho - 1) * rho^(-M)` on the error of the degree-`M`
/// Chebyshev truncation of a function analytic inside `E_rho`.
pub fn truncation_bound(params: &EllipseBoundParams, degree: BasisDegree) -> f64 {
    let rho = params.rho();
    2.0 * params.b_sup() / (rho - 1.0) * rho.powi(-(degree.get() as i32))
}

/// Chebyshev–Gauss nodes `cos((2k + 1) pi / (2K))`, `k = 0..K`, in
/// increasing order.
pub fn chebyshev_gauss_nodes(count: usize) -> Vec<f64> {
    let k_total = count as f64;
    let mut nodes: Vec<f64> = (0..count)
        .map(|k| ((2 * k + 1) as f64 * std::f64::consts::PI / (2.0 * k_total)).cos())
        .collect();
    nodes.reverse();
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tau(x: f64) -> ProjectedTime {
        ProjectedTime::new(x).unwrap()
    }

    #[test]
    fn eval_cheb_examples() {
        assert_eq!(eval_cheb(0, tau(0.3)), 1.0);
        assert_eq!(eval_cheb(1, tau(-0.4)), -0.4);
        assert_eq!(eval_cheb(2, tau(0.5)), -0.5);
        assert_eq!(eval_cheb(7, tau(1.0)), 1.0);
    }

    #[test]
    fn basis_row_examples() {
        assert_eq!(basis_row(BasisDegree::new(2), tau(0.0)), vec![1.0, 0.0, -1.0]);
        assert_eq!(basis_row(BasisDegree::new(0), tau(0.9)), vec![1.0]);
        assert_eq!(basis_row(BasisDegree::new(3), tau(1.0)), vec![1.0; 4]);
    }

    #[test]
    fn project_time_examples() {
        assert_eq!(project_time(0.5).unwrap().value(), 0.0);
        assert_eq!(project_time(0.0).unwrap().value(), -1.0);
        assert_eq!(project_time(1.0).unwrap().value(), 1.0);
        assert!(project_time(1.5).is_err());
        assert!(project_time(-1e-9).is_err());
        assert!(project_time(f64::NAN).is_err());
    }

    #[test]
    fn projected_time_rejects_out_of_range() {
        assert!(ProjectedTime::new(1.1).is_err());
        assert!(ProjectedTime::new(-1.0 - 1e-6).is_err());
        assert_eq!(ProjectedTime::new(1.0 + 1e-13).unwrap().value(), 1.0);
    }

    #[test]
    fn truncation_bound_examples() {
        let p = EllipseBoundParams::new(2.0, 1.0).unwrap();
        assert_eq!(truncation_bound(&p, BasisDegree::new(3)), 0.25);
        assert_eq!(truncation_bound(&p, BasisDegree::new(0)), 2.0);
        // 3 * 2 / 0.5 / 1.5^4 = 12 / 5.0625
        let p = EllipseBoundParams::new(1.5, 3.0).unwrap();
        let expected = 12.0 / 5.0625;
        assert!((truncation_bound(&p, BasisDegree::new(4)) - expected).abs() < 1e-12);
        assert!((expected - 2.3704).abs() < 1e-4);
    }

    #[test]
    fn ellipse_params_validate() {
        assert!(EllipseBoundParams::new(1.0, 1.0).is_err());
        assert!(EllipseBoundParams::new(2.0, 0.0).is_err());
        assert!(EllipseBoundParams::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn magnitude_bounded_on_interval() {
        // deterministic sweep; the proptest below covers random points
        for i in 0..=1000 {
            let x = -1.0 + 2.0 * i as f64 / 1000.0;
            for m in 0..=64 {
                assert!(eval_cheb(m, tau(x)).abs() <= 1.0 + 1e-12, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn matches_trigonometric_form() {
        for i in 0..=2000 {
            let theta = std::f64::consts::PI * i as f64 / 2000.0;
            for m in 0..=32 {
                let got = eval_cheb(m, tau(theta.cos()));
                assert!((got - (m as f64 * theta).cos()).abs() <= 1e-10, "m={m} theta={theta}");
            }
        }
    }

    #[test]
    fn discrete_orthogonality_on_gauss_nodes() {
        let m_max = 8;
        for k in [m_max + 1, 12, 20] {
            let nodes = chebyshev_gauss_nodes(k);
            for m in 0..=m_max {
                for n in 0..=m_max {
                    if m == n {
                        continue;
                    }
                    let s: f64 = nodes.iter().map(|&x| eval_cheb(m, tau(x)) * eval_cheb(n, tau(x))).sum();
                    assert!(s.abs() <= 1e-9, "m={m} n={n} K={k} sum={s}");
                }
            }
        }
    }

    #[test]
    fn truncation_bound_monotone() {
        let p = EllipseBoundParams::new(1.7, 2.0).unwrap();
        let q = EllipseBoundParams::new(1.7, 2.5).unwrap();
        for m in 0..30 {
            let a = truncation_bound(&p, BasisDegree::new(m));
            assert!(truncation_bound(&p, BasisDegree::new(m + 1)) < a);
            assert!(truncation_bound(&q, BasisDegree::new(m)) > a);
        }
    }

    proptest! {
        #[test]
        fn bounded_by_one(x in -1.0f64..=1.0, m in 0usize..=64) {
            prop_assert!(eval_cheb(m, tau(x)).abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn row_agrees_with_scalar(x in -1.0f64..=1.0, m_max in 0usize..=16) {
            let row = basis_row(BasisDegree::new(m_max), tau(x));
            for (m, v) in row.iter().enumerate() {
                prop_assert_eq!(*v, eval_cheb(m, tau(x)));
            }
        }
    }
}
