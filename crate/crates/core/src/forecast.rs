//! Feature cache and the three forecasters that stand in for a denoiser
//! pass: naive reuse, discrete Taylor, and Chebyshev ridge ("spectrum").

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::chebyshev::{basis_row, project_time, BasisDegree};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ridge::{build_design, solve_ridge_with_diagnostics, CoefficientMatrix, FeatureMatrix, RegStrength};

/// How many entries a [`FeatureCache`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CachePolicy {
    /// Keep every entry.
    #[default]
    All,
    /// Keep the most recent `W` entries.
    Window(usize),
}

/// Time-ordered `(t_k, h_k)` pairs recorded at actual denoiser passes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureCache {
    entries: VecDeque<(f64, Vec<f64>)>,
    policy: CachePolicy,
}

impl FeatureCache {
    pub fn new(policy: CachePolicy) -> Result<Self> {
        if policy == CachePolicy::Window(0) {
            return Err(Error::InvalidParam("cache window must hold at least one entry".into()));
        }
        Ok(Self {
            entries: VecDeque::new(),
            policy,
        })
    }

    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Feature length `F`, once known.
    pub fn feature_len(&self) -> Option<usize> {
        self.entries.front().map(|(_, h)| h.len())
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.entries.back().map(|(t, h)| (*t, h.as_slice()))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(t, _)| *t)
    }

    pub fn entries(&self) -> impl DoubleEndedIterator<Item = (f64, &[f64])> + ExactSizeIterator {
        self.entries.iter().map(|(t, h)| (*t, h.as_slice()))
    }

    /// Appends an entry, evicting the oldest one under a full window.
    pub fn insert(&mut self, t: f64, h: Vec<f64>) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::InvalidParam(format!("cache time must be finite, got {t}")));
        }
        if let Some((last_t, _)) = self.entries.back() {
            if !(t > *last_t) {
                return Err(Error::NonMonotone { prev: *last_t, next: t });
            }
        }
        if let Some(f) = self.feature_len() {
            if h.len() != f {
                return Err(Error::Shape(format!("feature has length {}, cache holds length {f}", h.len())));
            }
        }
        self.entries.push_back((t, h));
        if let CachePolicy::Window(w) = self.policy {
            while self.entries.len() > w {
                self.entries.pop_front();
            }
        }
        Ok(())
    }
}

/// Value-style insert: returns the updated cache.
pub fn cache_insert(mut cache: FeatureCache, t: f64, h: Vec<f64>) -> Result<FeatureCache> {
    cache.insert(t, h)?;
    Ok(cache)
}

/// Copy of the newest cached feature.
pub fn naive_forecast(cache: &FeatureCache, _t_j: f64) -> Result<Vec<f64>> {
    cache.last().map(|(_, h)| h.to_vec()).ok_or(Error::EmptyCache)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorConfig {
    pub order: usize,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        Self { order: 1 }
    }
}

/// Order-`P` Taylor prediction anchored at the newest cache entry.
///
/// The `p`-th derivative at `t_k` is estimated by `p! · h[t_k, ..., t_{k-p}]`
/// (Newton divided differences over the `P+1` newest entries), so the
/// prediction is `h_k + Σ_p h[t_k..t_{k-p}] (t_j - t_k)^p`. With equal
/// spacing `d` this is exactly `h_k + Σ_p ∇^p h_k / p! · ((t_j - t_k)/d)^p`
/// with backward differences `∇`.
pub fn taylor_forecast(cache: &FeatureCache, t_j: f64, cfg: TaylorConfig) -> Result<Vec<f64>> {
    let order = cfg.order;
    if cache.len() < order + 1 {
        return Err(Error::InsufficientCache {
            order,
            needed: order + 1,
            have: cache.len(),
        });
    }
    // newest first
    let recent: Vec<(f64, &[f64])> = cache.entries().rev().take(order + 1).collect();
    let (t_k, h_k) = recent[0];
    let mut out = h_k.to_vec();
    if order == 0 {
        return Ok(out);
    }

    let f = h_k.len();
    let times: Vec<f64> = recent.iter().map(|(t, _)| *t).collect();
    // table[i] holds h[t_i, ..., t_{i+p}] for the current p
    let mut table: Vec<Vec<f64>> = recent.iter().map(|(_, h)| h.to_vec()).collect();
    let gap = t_j - t_k;
    let mut power = 1.0;
    for p in 1..=order {
        for i in 0..table.len() - p {
            let span = times[i] - times[i + p];
            for c in 0..f {
                table[i][c] = (table[i][c] - table[i + 1][c]) / span;
            }
        }
        power *= gap;
        for (o, d) in out.iter_mut().zip(&table[0]) {
            *o += d * power;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub degree: usize,
    pub lambda: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { degree: 4, lambda: 0.1 }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<(BasisDegree, RegStrength)> {
        Ok((BasisDegree::new(self.degree), RegStrength::new(self.lambda)?))
    }
}

/// Coefficients fitted on a cache snapshot, reused by later forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumState {
    pub coeffs: CoefficientMatrix,
    pub degree: BasisDegree,
    /// Newest cache time at fit.
    pub fitted_at: f64,
    pub k_points: usize,
    pub jittered: bool,
}

/// Projects the cached times onto `[-1, 1]` and solves the ridge problem.
pub fn spectrum_fit(cache: &FeatureCache, cfg: &SpectrumConfig) -> Result<SpectrumState> {
    let (degree, lambda) = cfg.validate()?;
    let (fitted_at, _) = cache.last().ok_or(Error::EmptyCache)?;
    let taus = cache.times().map(project_time).collect::<Result<Vec<_>>>()?;
    let phi = build_design(&taus, degree)?;
    let f = cache.feature_len().unwrap_or(0);
    let mut data = Vec::with_capacity(cache.len() * f);
    for (_, h) in cache.entries() {
        data.extend_from_slice(h);
    }
    let h = FeatureMatrix::new(Matrix::from_row_major(cache.len(), f, data)?);
    let fit = solve_ridge_with_diagnostics(&phi, &h, lambda)?;
    Ok(SpectrumState {
        coeffs: fit.coeffs,
        degree,
        fitted_at,
        k_points: cache.len(),
        jittered: fit.jittered,
    })
}

/// `φ(2 t_j − 1) · C`.
pub fn spectrum_forecast(state: &SpectrumState, t_j: f64) -> Result<Vec<f64>> {
    let tau = project_time(t_j)?;
    Ok(state.coeffs.combine(&basis_row(state.degree, tau)))
}

/// Which forecaster to run and with what settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForecasterConfig {
    Naive,
    Taylor { order: usize },
    Spectrum { degree: usize, lambda: f64 },
}

impl ForecasterConfig {
    pub fn build(&self, policy: CachePolicy) -> Result<Box<dyn Forecaster>> {
        let cache = FeatureCache::new(policy)?;
        Ok(match *self {
            ForecasterConfig::Naive => Box::new(NaiveForecaster { cache }),
            ForecasterConfig::Taylor { order } => Box::new(TaylorForecaster {
                cache,
                cfg: TaylorConfig { order },
                updates: 0,
            }),
            ForecasterConfig::Spectrum { degree, lambda } => {
                let cfg = SpectrumConfig { degree, lambda };
                cfg.validate()?;
                Box::new(SpectrumForecaster {
                    cache,
                    cfg,
                    state: None,
                    fits: 0,
                })
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            ForecasterConfig::Naive => "naive".into(),
            ForecasterConfig::Taylor { order } => format!("taylor(P={order})"),
            ForecasterConfig::Spectrum { degree, lambda } => format!("spectrum(M={degree},lambda={lambda})"),
        }
    }
}

/// Stateful forecaster driven by the sampler: it sees every actual pass and
/// answers for skipped steps.
pub trait Forecaster: Send {
    /// Records an actual-pass feature (and refits, where applicable).
    fn observe(&mut self, t: f64, h: Vec<f64>) -> Result<()>;

    fn forecast(&self, t: f64) -> Result<Vec<f64>>;

    fn cache(&self) -> &FeatureCache;

    /// Number of coefficient fits performed so far.
    fn fit_count(&self) -> usize;
}

#[derive(Debug, Clone)]
pub struct NaiveForecaster {
    cache: FeatureCache,
}

impl Forecaster for NaiveForecaster {
    fn observe(&mut self, t: f64, h: Vec<f64>) -> Result<()> {
        self.cache.insert(t, h)
    }

    fn forecast(&self, t: f64) -> Result<Vec<f64>> {
        naive_forecast(&self.cache, t)
    }

    fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    fn fit_count(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone)]
pub struct TaylorForecaster {
    cache: FeatureCache,
    cfg: TaylorConfig,
    updates: usize,
}

impl Forecaster for TaylorForecaster {
    fn observe(&mut self, t: f64, h: Vec<f64>) -> Result<()> {
        self.cache.insert(t, h)?;
        self.updates += 1;
        Ok(())
    }

    /// Falls back to the highest order the cache can support during warm-up.
    fn forecast(&self, t: f64) -> Result<Vec<f64>> {
        let have = self.cache.len();
        if have == 0 {
            return Err(Error::EmptyCache);
        }
        let order = self.cfg.order.min(have - 1);
        taylor_forecast(&self.cache, t, TaylorConfig { order })
    }

    fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    fn fit_count(&self) -> usize {
        self.updates
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumForecaster {
    cache: FeatureCache,
    cfg: SpectrumConfig,
    state: Option<SpectrumState>,
    fits: usize,
}

impl SpectrumForecaster {
    pub fn state(&self) -> Option<&SpectrumState> {
        self.state.as_ref()
    }
}

impl Forecaster for SpectrumForecaster {
    /// Without regularization the fit waits until the cache holds `M+1`
    /// points; warm-up full passes never fail.
    fn observe(&mut self, t: f64, h: Vec<f64>) -> Result<()> {
        self.cache.insert(t, h)?;
        if self.cfg.lambda == 0.0 && self.cache.len() <= self.cfg.degree {
            self.state = None;
            return Ok(());
        }
        self.state = Some(spectrum_fit(&self.cache, &self.cfg)?);
        self.fits += 1;
        Ok(())
    }

    fn forecast(&self, t: f64) -> Result<Vec<f64>> {
        match &self.state {
            Some(state) => spectrum_forecast(state, t),
            None if self.cache.is_empty() => Err(Error::EmptyCache),
            None if self.cfg.lambda == 0.0 => Err(Error::InsufficientCache {
                order: self.cfg.degree,
                needed: self.cfg.degree + 1,
                have: self.cache.len(),
            }),
            None => Err(Error::Unfitted),
        }
    }

    fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    fn fit_count(&self) -> usize {
        self.fits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cache_from(points: &[(f64, &[f64])]) -> FeatureCache {
        let mut c = FeatureCache::default();
        for (t, h) in points {
            c.insert(*t, h.to_vec()).unwrap();
        }
        c
    }

    #[test]
    fn insert_examples() {
        let c = cache_insert(FeatureCache::default(), 0.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(c.len(), 1);

        let mut w = FeatureCache::new(CachePolicy::Window(2)).unwrap();
        w.insert(0.0, vec![1.0]).unwrap();
        w.insert(0.1, vec![2.0]).unwrap();
        w.insert(0.2, vec![3.0]).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.times().collect::<Vec<_>>(), vec![0.1, 0.2]);

        let err = cache_insert(c.clone(), 0.0, vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { .. }));
        let err = cache_insert(c, 0.5, vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        assert!(FeatureCache::new(CachePolicy::Window(0)).is_err());
    }

    #[test]
    fn naive_examples() {
        let c = cache_from(&[(0.1, &[3.0]), (0.3, &[5.0])]);
        assert_eq!(naive_forecast(&c, 0.5).unwrap(), vec![5.0]);
        let c = cache_from(&[(0.0, &[0.0, 0.0])]);
        assert_eq!(naive_forecast(&c, 0.9).unwrap(), vec![0.0, 0.0]);
        let mut w = FeatureCache::new(CachePolicy::Window(1)).unwrap();
        w.insert(0.0, vec![1.0]).unwrap();
        w.insert(0.2, vec![7.0]).unwrap();
        assert_eq!(naive_forecast(&w, 0.4).unwrap(), vec![7.0]);
        assert_eq!(naive_forecast(&FeatureCache::default(), 0.1), Err(Error::EmptyCache));
    }

    #[test]
    fn taylor_linear_extrapolation() {
        let (a, b) = (2.0, 3.0);
        let pts: Vec<(f64, Vec<f64>)> = (0..4).map(|k| (0.1 * k as f64, vec![a + b * 0.1 * k as f64])).collect();
        let mut c = FeatureCache::default();
        for (t, h) in &pts {
            c.insert(*t, h.clone()).unwrap();
        }
        let got = taylor_forecast(&c, 0.7, TaylorConfig { order: 1 }).unwrap();
        assert!((got[0] - 4.1).abs() <= 1e-12);
    }

    #[test]
    fn taylor_two_point_example() {
        // slope 1/0.2 = 5 extrapolated 0.4 past t_k = 0.2: 2 + 5 * 0.4
        let c = cache_from(&[(0.0, &[1.0]), (0.2, &[2.0])]);
        let got = taylor_forecast(&c, 0.6, TaylorConfig { order: 1 }).unwrap();
        assert!((got[0] - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn taylor_matches_backward_differences_on_uniform_cache() {
        let d = 0.04;
        let hs = [0.3, -1.1, 0.7, 2.4, -0.6];
        let mut c = FeatureCache::default();
        for (k, h) in hs.iter().enumerate() {
            c.insert(0.2 + d * k as f64, vec![*h]).unwrap();
        }
        let t_k = 0.2 + d * 4.0;
        for order in 1..=4 {
            for &t_j in &[t_k + 0.5 * d, t_k + 3.0 * d] {
                // sum_p (1/p!) sum_i (-1)^i C(p, i) h_{k-i} s^p, s = (t_j - t_k)/d
                let s = (t_j - t_k) / d;
                let mut want = hs[4];
                let mut fact = 1.0;
                for p in 1..=order {
                    fact *= p as f64;
                    let mut binom = 1.0;
                    let mut diff = 0.0;
                    for i in 0..=p {
                        diff += if i % 2 == 0 { binom } else { -binom } * hs[4 - i];
                        binom = binom * (p - i) as f64 / (i + 1) as f64;
                    }
                    want += diff / fact * s.powi(p as i32);
                }
                let got = taylor_forecast(&c, t_j, TaylorConfig { order }).unwrap()[0];
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "P={order} {got} vs {want}");
            }
        }
    }

    #[test]
    fn taylor_order_zero_is_naive() {
        let c = cache_from(&[(0.0, &[1.0, -3.5]), (0.2, &[2.25, 0.125])]);
        assert_eq!(
            taylor_forecast(&c, 0.9, TaylorConfig { order: 0 }).unwrap(),
            naive_forecast(&c, 0.9).unwrap()
        );
    }

    #[test]
    fn taylor_needs_enough_entries() {
        let c = cache_from(&[(0.0, &[1.0]), (0.2, &[2.0])]);
        assert_eq!(
            taylor_forecast(&c, 0.6, TaylorConfig { order: 2 }),
            Err(Error::InsufficientCache {
                order: 2,
                needed: 3,
                have: 2
            })
        );
    }

    #[test]
    fn spectrum_interpolates_polynomial_channels() {
        let ts = [0.0, 0.2, 0.45, 0.7, 0.9];
        let f = |t: f64| [1.0 + t - 2.0 * t.powi(4), (3.0 * t).powi(2) - 0.5];
        let mut c = FeatureCache::default();
        for &t in &ts {
            c.insert(t, f(t).to_vec()).unwrap();
        }
        let state = spectrum_fit(&c, &SpectrumConfig { degree: 4, lambda: 0.0 }).unwrap();
        assert_eq!(state.k_points, 5);
        assert_eq!(state.fitted_at, 0.9);
        for &t in &ts {
            let got = spectrum_forecast(&state, t).unwrap();
            for (g, e) in got.iter().zip(f(t)) {
                assert!((g - e).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn single_point_ridge_shrinks() {
        // one row φ, λ: c = φ h / (|φ|² + λ), prediction at that point = |φ|² h / (|φ|² + λ)
        let t = 0.3;
        let h = [2.0, -1.0];
        let c = cache_from(&[(t, &h)]);
        let state = spectrum_fit(&c, &SpectrumConfig::default()).unwrap();
        let row = basis_row(BasisDegree::new(4), project_time(t).unwrap());
        let norm_sq: f64 = row.iter().map(|v| v * v).sum();
        let pred = spectrum_forecast(&state, t).unwrap();
        for (p, v) in pred.iter().zip(h) {
            assert!((p - norm_sq / (norm_sq + 0.1) * v).abs() <= 1e-12);
        }
        let pn: f64 = pred.iter().map(|v| v * v).sum::<f64>().sqrt();
        let hn: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(pn < hn);
    }

    #[test]
    fn spectrum_errors() {
        assert_eq!(
            spectrum_fit(&FeatureCache::default(), &SpectrumConfig::default()),
            Err(Error::EmptyCache)
        );
        let state = SpectrumState {
            coeffs: CoefficientMatrix::zeros(5, 3),
            degree: BasisDegree::new(4),
            fitted_at: 0.0,
            k_points: 1,
            jittered: false,
        };
        assert_eq!(spectrum_forecast(&state, 0.42).unwrap(), vec![0.0; 3]);
        assert!(spectrum_forecast(&state, 1.2).is_err());
        let f = ForecasterConfig::Spectrum { degree: 4, lambda: 0.1 }.build(CachePolicy::All).unwrap();
        assert_eq!(f.forecast(0.5).unwrap_err(), Error::EmptyCache);
        // without regularization the fit waits for M+1 points
        let mut f = ForecasterConfig::Spectrum { degree: 2, lambda: 0.0 }.build(CachePolicy::All).unwrap();
        f.observe(0.0, vec![1.0]).unwrap();
        f.observe(0.1, vec![1.0]).unwrap();
        assert_eq!(f.fit_count(), 0);
        assert_eq!(
            f.forecast(0.2).unwrap_err(),
            Error::InsufficientCache {
                order: 2,
                needed: 3,
                have: 2
            }
        );
        f.observe(0.2, vec![1.0]).unwrap();
        assert_eq!(f.fit_count(), 1);
        assert!((f.forecast(0.3).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!(ForecasterConfig::Spectrum { degree: 4, lambda: -1.0 }
            .build(CachePolicy::All)
            .is_err());
    }

    #[test]
    fn spectrum_on_sine_within_bound_ceiling() {
        use crate::chebyshev::{truncation_bound, EllipseBoundParams};
        let f = |t: f64| (2.0 * std::f64::consts::PI * t).sin();
        let mut c = FeatureCache::default();
        for k in 0..6 {
            let t = k as f64 * 0.15;
            c.insert(t, vec![f(t)]).unwrap();
        }
        let state = spectrum_fit(&c, &SpectrumConfig::default()).unwrap();
        let err = (spectrum_forecast(&state, 0.9).unwrap()[0] - f(0.9)).abs();
        // sin(pi (tau + 1)) is entire; on E_rho, |sin(pi z)| <= cosh(pi b), b = (rho - 1/rho)/2
        let rho: f64 = 2.0;
        let b = (std::f64::consts::PI * 0.5 * (rho - 1.0 / rho)).cosh();
        let ceiling = truncation_bound(&EllipseBoundParams::new(rho, b).unwrap(), BasisDegree::new(4));
        assert!(err < ceiling, "err {err} ceiling {ceiling}");
    }

    #[test]
    fn forecaster_objects_track_fits() {
        let mut s = ForecasterConfig::Spectrum { degree: 2, lambda: 0.1 }
            .build(CachePolicy::All)
            .unwrap();
        let mut t = ForecasterConfig::Taylor { order: 2 }.build(CachePolicy::All).unwrap();
        for k in 0..3 {
            let x = k as f64 * 0.1;
            s.observe(x, vec![x]).unwrap();
            t.observe(x, vec![x]).unwrap();
        }
        assert_eq!(s.fit_count(), 3);
        assert_eq!(t.fit_count(), 3);
        assert_eq!(s.cache().len(), 3);

        // warm-up: a single entry degrades Taylor to reuse
        let mut t1 = ForecasterConfig::Taylor { order: 2 }.build(CachePolicy::All).unwrap();
        t1.observe(0.0, vec![4.0]).unwrap();
        assert_eq!(t1.forecast(0.1).unwrap(), vec![4.0]);
    }
}
