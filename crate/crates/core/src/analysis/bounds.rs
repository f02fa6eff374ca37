//! Closed-form error bounds and numerical checks against them.
//!
//! Sup-norms are measured on a uniform grid of [`SUP_GRID`] points.

use serde::Serialize;

use crate::chebyshev::{
    chebyshev_gauss_nodes, project_time, truncation_bound, BasisDegree, EllipseBoundParams,
};
use crate::error::{Error, Result};
use crate::forecast::{spectrum_fit, spectrum_forecast, taylor_forecast, FeatureCache, CachePolicy, SpectrumConfig, TaylorConfig};
use crate::ridge::{build_design, min_singular};
use crate::sandbox::Channel;

pub const SUP_GRID: usize = 10_000;

/// Max/min ratio of the windowed Spectrum error over gaps in
/// `[0.05, 0.6]`, measured at 1.2 to 5.4 on the exp and pole channels for
/// λ in {0, 0.1, 10}.
pub const GAP_CONSTANT: f64 = 6.0;

/// Degree of the reference expansion used to measure truncation errors.
const REFERENCE_DEGREE: usize = 96;

/// One named pass/fail assertion in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorBoundParams {
    /// Sup of the `(P+1)`-th derivative.
    pub deriv_bound: f64,
    pub order: usize,
    /// Forecast gap.
    pub step: f64,
}

impl TaylorBoundParams {
    pub fn new(deriv_bound: f64, order: usize, step: f64) -> Result<Self> {
        if !(deriv_bound.is_finite() && deriv_bound > 0.0) {
            return Err(Error::InvalidParam(format!("derivative bound must be > 0, got {deriv_bound}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParam(format!("step must be > 0, got {step}")));
        }
        Ok(Self {
            deriv_bound,
            order,
            step,
        })
    }
}

/// `L / (P+1)! · h^(P+1)`.
pub fn taylor_worst_case(params: &TaylorBoundParams) -> f64 {
    let p1 = params.order + 1;
    params.deriv_bound / factorial(p1) * params.step.powi(p1 as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorAttainment {
    pub order: usize,
    pub step: f64,
    pub deriv_bound: f64,
    pub bound: f64,
    pub attained: f64,
    pub rel_error: f64,
    pub passed: bool,
}

/// Evaluates the extremal function `L/(P+1)! · (τ - τ_k)^(P+1)`, whose
/// derivatives up to order `P` vanish at `τ_k`, against the ideal order-`P`
/// Taylor predictor built from those exact derivatives.
pub fn verify_taylor_attainment(order: usize, step: f64, deriv_bound: f64) -> Result<TaylorAttainment> {
    let params = TaylorBoundParams::new(deriv_bound, order, step)?;
    let bound = taylor_worst_case(&params);
    let p1 = order + 1;
    // n-th derivative of the witness, at offset s from the anchor
    let witness_deriv = |n: usize, s: f64| -> f64 {
        if n > p1 {
            0.0
        } else {
            deriv_bound * s.powi((p1 - n) as i32) / factorial(p1 - n)
        }
    };
    let predicted: f64 = (0..=order)
        .map(|n| witness_deriv(n, 0.0) * step.powi(n as i32) / factorial(n))
        .sum();
    let attained = (witness_deriv(0, step) - predicted).abs();
    let rel_error = (attained - bound).abs() / bound;
    Ok(TaylorAttainment {
        order,
        step,
        deriv_bound,
        bound,
        attained,
        rel_error,
        passed: rel_error <= 1e-12,
    })
}

/// Chebyshev coefficients of the degree-`m` interpolant at the `m+1`
/// Chebyshev-Gauss nodes.
pub fn chebyshev_interpolant(f: &dyn Fn(f64) -> f64, m: usize) -> Vec<f64> {
    let n = m + 1;
    // T_k at node j is cos(k θ_j), which stays accurate at high degree
    let thetas: Vec<f64> = (0..n)
        .map(|j| std::f64::consts::PI * (2 * j + 1) as f64 / (2 * n) as f64)
        .collect();
    let values: Vec<f64> = thetas.iter().map(|th| f(th.cos())).collect();
    (0..n)
        .map(|k| {
            let s: f64 = thetas.iter().zip(&values).map(|(th, v)| v * (k as f64 * th).cos()).sum();
            if k == 0 {
                s / n as f64
            } else {
                2.0 * s / n as f64
            }
        })
        .collect()
}

/// Clenshaw evaluation of `Σ a_k T_k(τ)`.
pub fn eval_series(coeffs: &[f64], tau: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = a + 2.0 * tau * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + tau * b1 - b2
}

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..SUP_GRID).map(move |i| lo + (hi - lo) * i as f64 / (SUP_GRID - 1) as f64)
}

/// Sup-norm error of the degree-`m` interpolant on `[-1, 1]`.
pub fn interpolation_error(f: &dyn Fn(f64) -> f64, m: usize) -> f64 {
    let c = chebyshev_interpolant(f, m);
    grid(-1.0, 1.0).map(|x| (f(x) - eval_series(&c, x)).abs()).fold(0.0, f64::max)
}

/// Sup-norm error of the degree-`m` truncated Chebyshev series, measured
/// through a high-degree reference expansion.
pub fn truncation_error(f: &dyn Fn(f64) -> f64, m: usize) -> f64 {
    let c = chebyshev_interpolant(f, REFERENCE_DEGREE.max(m + 1));
    // coefficients at the summation noise level carry no information
    let scale = c.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
    let floor = c.len() as f64 * f64::EPSILON * scale;
    let tail: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, &a)| if k > m && a.abs() > floor { a } else { 0.0 })
        .collect();
    grid(-1.0, 1.0).map(|x| eval_series(&tail, x).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub degree: usize,
    pub sup_error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebDecayReport {
    pub rows: Vec<DecayRow>,
    /// Negated least-squares slope of `ln(error)` against degree.
    pub fitted_rate: f64,
    pub checks: Vec<Check>,
}

impl ChebDecayReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Errors below this are rounding noise and stay out of the rate fit.
const RATE_FLOOR: f64 = 1e-13;

/// Interpolates `f` at each degree in `degrees`, checks the sup error
/// against twice the truncation bound, and fits the geometric rate.
pub fn verify_cheb_decay(f: &dyn Fn(f64) -> f64, ellipse: &EllipseBoundParams, degrees: &[usize]) -> ChebDecayReport {
    let rows: Vec<DecayRow> = degrees
        .iter()
        .map(|&m| DecayRow {
            degree: m,
            sup_error: interpolation_error(f, m),
            bound: truncation_bound(ellipse, BasisDegree::new(m)),
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup_error > RATE_FLOOR)
        .map(|r| (r.degree as f64, r.sup_error.ln()))
        .collect();
    let fitted_rate = if pts.len() < 2 {
        f64::INFINITY
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        -sxy / sxx
    };
    let mut checks: Vec<Check> = rows
        .iter()
        .map(|r| {
            Check::new(
                format!("decay M={}", r.degree),
                r.sup_error <= 2.0 * r.bound,
                format!("error {:e} vs 2x bound {:e}", r.sup_error, 2.0 * r.bound),
            )
        })
        .collect();
    let floor = 0.9 * ellipse.rho().ln();
    checks.push(Check::new(
        "decay rate",
        fitted_rate >= floor,
        format!("rate {fitted_rate} vs floor {floor}"),
    ));
    ChebDecayReport {
        rows,
        fitted_rate,
        checks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumBoundParams {
    pub eps_m: f64,
    pub degree: usize,
    pub k_points: usize,
    pub sigma_min: f64,
    pub lambda: f64,
    pub ellipse: EllipseBoundParams,
}

impl SpectrumBoundParams {
    pub fn new(
        eps_m: f64,
        degree: usize,
        k_points: usize,
        sigma_min: f64,
        lambda: f64,
        ellipse: EllipseBoundParams,
    ) -> Result<Self> {
        for (what, v) in [("eps_m", eps_m), ("sigma_min", sigma_min), ("lambda", lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParam(format!("{what} must be finite and >= 0, got {v}")));
            }
        }
        if sigma_min == 0.0 && lambda == 0.0 {
            return Err(Error::InvalidParam("sigma_min and lambda cannot both be zero".into()));
        }
        Ok(Self {
            eps_m,
            degree,
            k_points,
            sigma_min,
            lambda,
            ellipse,
        })
    }
}

/// `ε_M (1 + (M+1)K/(σ² + λ)) + λ√(M+1)/(σ² + λ) · 2B/√(1 - ρ⁻²)`.
///
/// There is deliberately no forecast-time argument.
pub fn spectrum_bound(p: &SpectrumBoundParams) -> f64 {
    let m1 = (p.degree + 1) as f64;
    let denom = p.sigma_min * p.sigma_min + p.lambda;
    let rho = p.ellipse.rho();
    let coeff_sum = 2.0 * p.ellipse.b_sup() / (1.0 - 1.0 / (rho * rho)).sqrt();
    p.eps_m * (1.0 + m1 * p.k_points as f64 / denom) + p.lambda * m1.sqrt() / denom * coeff_sum
}

/// A scalar channel with analytically known ellipse constants and
/// derivative bounds on `t in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownChannel {
    pub name: &'static str,
    pub channel: Channel,
    pub ellipse: EllipseBoundParams,
    /// `deriv_sup[n] = sup |f^(n)(t)|` over `[0, 1]`.
    pub deriv_sup: Vec<f64>,
}

impl KnownChannel {
    /// `e^t = exp((τ+1)/2)`. On `E_4` the real part of τ reaches
    /// `a = (4 + 1/4)/2`, so `B = exp((a+1)/2)`. Every t-derivative is
    /// bounded by `e`.
    pub fn exp() -> Self {
        let rho = 4.0;
        let a = (rho + 1.0 / rho) / 2.0;
        Self {
            name: "exp",
            channel: Channel::Exp { scale: 1.0, rate: 1.0 },
            ellipse: EllipseBoundParams::new(rho, ((a + 1.0) / 2.0).exp()).expect("valid ellipse"),
            deriv_sup: vec![std::f64::consts::E; 8],
        }
    }

    /// `1/(τ - 2) = 1/(2t - 3)`. On `E_3` the nearest point to the pole is
    /// `a = 5/3`, so `B = 1/(2 - a) = 3`. The n-th t-derivative
    /// `(-2)^n n! / (2t - 3)^(n+1)` peaks at `t = 1` with `2^n n!`.
    pub fn inverse_pole() -> Self {
        Self {
            name: "inverse_pole",
            channel: Channel::Pole { pole: 2.0 },
            ellipse: EllipseBoundParams::new(3.0, 3.0).expect("valid ellipse"),
            deriv_sup: (0..8).map(|n| 2f64.powi(n as i32) * factorial(n)).collect(),
        }
    }

    pub fn eval_t(&self, t: f64) -> f64 {
        self.channel.eval(t)
    }

    /// The channel as a function of `τ = 2t - 1`.
    pub fn eval_tau(&self, tau: f64) -> f64 {
        self.channel.eval((tau + 1.0) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCheckConfig {
    pub spectrum: SpectrumConfig,
    /// Cached points at the Chebyshev-Gauss nodes mapped to `t`.
    pub k_points: usize,
    pub anchor: f64,
    pub gaps: Vec<f64>,
    pub taylor_order: usize,
    /// Spacing of the local cache behind the anchor for the Taylor baseline.
    pub taylor_spacing: f64,
    /// Allowed max/min ratio of the windowed error across gaps.
    pub gap_constant: f64,
}

impl SpectrumCheckConfig {
    /// `count` gaps evenly spread over `[lo, hi]`.
    pub fn linspace_gaps(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![lo];
        }
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    }
}

impl Default for SpectrumCheckConfig {
    fn default() -> Self {
        Self {
            spectrum: SpectrumConfig::default(),
            k_points: 8,
            anchor: 0.4,
            gaps: Self::linspace_gaps(0.05, 0.6, 20),
            taylor_order: 1,
            taylor_spacing: 0.02,
            gap_constant: GAP_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub gap: f64,
    /// Sup of the Spectrum error over `(anchor, anchor + gap]`.
    pub empirical: f64,
    pub bound: f64,
    pub taylor_empirical: f64,
    pub taylor_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumBoundReport {
    pub channel: String,
    pub lambda: f64,
    pub eps_m: f64,
    pub sigma_min: f64,
    pub bound: f64,
    pub rows: Vec<GapRow>,
    pub gap_ratio: f64,
    pub taylor_growth: f64,
    pub checks: Vec<Check>,
}

impl SpectrumBoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn scalar_cache(points: impl IntoIterator<Item = (f64, f64)>) -> Result<FeatureCache> {
    let mut cache = FeatureCache::new(CachePolicy::All)?;
    for (t, v) in points {
        cache.insert(t, vec![v])?;
    }
    Ok(cache)
}

/// Fits the channel on the mapped Chebyshev nodes, then compares the
/// forecast error at each gap past the anchor with the spectral bound
/// (fixed across gaps) and with the Taylor bound (growing with the gap).
pub fn verify_spectrum_bound(f: &KnownChannel, cfg: &SpectrumCheckConfig) -> Result<SpectrumBoundReport> {
    if cfg.gaps.len() < 2 {
        return Err(Error::InvalidParam("need at least two forecast gaps".into()));
    }
    if let Some(&g) = cfg.gaps.iter().find(|&&g| !(g > 0.0 && cfg.anchor + g <= 1.0)) {
        return Err(Error::InvalidParam(format!("gap {g} leaves [0, 1] from anchor {}", cfg.anchor)));
    }
    let (degree, lambda) = cfg.spectrum.validate()?;
    let nodes_t: Vec<f64> = chebyshev_gauss_nodes(cfg.k_points).iter().map(|x| (x + 1.0) / 2.0).collect();
    let cache = scalar_cache(nodes_t.iter().map(|&t| (t, f.eval_t(t))))?;
    let state = spectrum_fit(&cache, &cfg.spectrum)?;

    let taus = nodes_t.iter().map(|&t| project_time(t)).collect::<Result<Vec<_>>>()?;
    let sigma_min = min_singular(&build_design(&taus, degree)?)?;
    let eps_m = truncation_error(&|tau| f.eval_tau(tau), degree.get());
    let bound = spectrum_bound(&SpectrumBoundParams::new(
        eps_m,
        degree.get(),
        cfg.k_points,
        sigma_min,
        lambda.get(),
        f.ellipse,
    )?);

    let taylor_cache = scalar_cache(
        (0..=cfg.taylor_order)
            .rev()
            .map(|i| cfg.anchor - i as f64 * cfg.taylor_spacing)
            .map(|t| (t, f.eval_t(t))),
    )?;
    let taylor_l = *f
        .deriv_sup
        .get(cfg.taylor_order + 1)
        .ok_or_else(|| Error::InvalidParam(format!("no derivative bound for order {}", cfg.taylor_order + 1)))?;

    let mut rows = Vec::with_capacity(cfg.gaps.len());
    for &gap in &cfg.gaps {
        let mut empirical: f64 = 0.0;
        for i in 1..=SUP_GRID {
            let t = cfg.anchor + gap * i as f64 / SUP_GRID as f64;
            empirical = empirical.max((f.eval_t(t) - spectrum_forecast(&state, t)?[0]).abs());
        }
        let t = cfg.anchor + gap;
        let taylor_pred = taylor_forecast(&taylor_cache, t, TaylorConfig { order: cfg.taylor_order })?[0];
        rows.push(GapRow {
            gap,
            empirical,
            bound,
            taylor_empirical: (f.eval_t(t) - taylor_pred).abs(),
            taylor_bound: taylor_worst_case(&TaylorBoundParams::new(taylor_l, cfg.taylor_order, gap)?),
        });
    }

    let max_e = rows.iter().map(|r| r.empirical).fold(0.0, f64::max);
    let min_e = rows.iter().map(|r| r.empirical).fold(f64::INFINITY, f64::min);
    let gap_ratio = max_e / min_e;
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let taylor_growth = last.taylor_bound / first.taylor_bound;
    let growth_floor = 0.9 * (last.gap / first.gap).powi(cfg.taylor_order as i32 + 1);

    let mut checks: Vec<Check> = rows
        .iter()
        .map(|r| {
            Check::new(
                format!("{} lambda={} gap={:.4} contained", f.name, lambda.get(), r.gap),
                r.empirical <= r.bound,
                format!("error {:e} vs bound {:e}", r.empirical, r.bound),
            )
        })
        .collect();
    checks.push(Check::new(
        format!("{} lambda={} gap independence", f.name, lambda.get()),
        gap_ratio <= cfg.gap_constant,
        format!("max/min {gap_ratio} vs {}", cfg.gap_constant),
    ));
    checks.push(Check::new(
        format!("{} taylor bound growth", f.name),
        taylor_growth >= growth_floor,
        format!("growth {taylor_growth} vs floor {growth_floor}"),
    ));

    Ok(SpectrumBoundReport {
        channel: f.name.to_string(),
        lambda: lambda.get(),
        eps_m,
        sigma_min,
        bound,
        rows,
        gap_ratio,
        taylor_growth,
        checks,
    })
}
