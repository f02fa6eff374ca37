//! Analytic stand-ins for a denoiser network.
//!
//! All flows use the rectified path `x_t = (1 - t) z + t x_1` with
//! `z ~ N(0, I)`, integrated from `t = 0` (noise) to `t = 1` (data).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-dimension variance.
    pub variance: Vec<f64>,
}

/// Diagonal-covariance Gaussian mixture used as the data distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParam("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidParam("mixture dimension must be positive".into()));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::Shape(format!("component {i} does not have dimension {dim}")));
            }
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(Error::InvalidParam(format!("component {i} has weight {}", c.weight)));
            }
            if let Some(v) = c.variance.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::InvalidParam(format!("component {i} has variance {v}")));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidParam(format!("component {i} has a non-finite mean")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    /// Seeded random mixture: means `~ N(0, mean_scale² I)`, variances
    /// uniform in `var_range`, weights proportional to `U(0.5, 1.5)`.
    pub fn random(dim: usize, count: usize, seed: u64, mean_scale: f64, var_range: (f64, f64)) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::InvalidParam("mixture needs positive dimension and component count".into()));
        }
        let (lo, hi) = var_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParam(format!("bad variance range [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut comps: Vec<MixtureComponent> = (0..count)
            .map(|_| {
                let mean = (0..dim)
                    .map(|_| mean_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let variance = (0..dim)
                    .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
                    .collect();
                let weight = rng.random_range(0.5..1.5);
                MixtureComponent { weight, mean, variance }
            })
            .collect();
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in &mut comps {
            c.weight /= total;
        }
        // renormalizing can leave the sum a few ulps away from 1
        let drift = 1.0 - comps.iter().map(|c| c.weight).sum::<f64>();
        comps[0].weight += drift;
        Self::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Posterior-weighted velocity `E[x_1 - z | x_t = x]`.
    ///
    /// Given component `c`, `x_t ~ N(t μ_c, s²)` with `s² = (1-t)² + t² σ_c²`
    /// per dimension, and the conditional velocity is
    /// `μ_c + (t σ_c² - (1 - t)) / s² · (x - t μ_c)`.
    pub fn velocity(&self, x: &[f64], t: f64) -> Vec<f64> {
        let dim = self.dim();
        let mut log_resp = Vec::with_capacity(self.components.len());
        let mut per_comp = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut log_p = if c.weight > 0.0 { c.weight.ln() } else { f64::NEG_INFINITY };
            let mut v = vec![0.0; dim];
            for d in 0..dim {
                let s2 = (1.0 - t) * (1.0 - t) + t * t * c.variance[d];
                let dev = x[d] - t * c.mean[d];
                log_p -= 0.5 * (dev * dev / s2 + s2.ln());
                v[d] = c.mean[d] + (t * c.variance[d] - (1.0 - t)) / s2 * dev;
            }
            log_resp.push(log_p);
            per_comp.push(v);
        }
        let max = log_resp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_resp.iter().map(|l| (l - max).exp()).collect();
        let norm: f64 = weights.iter().sum();
        let mut out = vec![0.0; dim];
        for (w, v) in weights.iter().zip(&per_comp) {
            let r = w / norm;
            for (o, vd) in out.iter_mut().zip(v) {
                *o += r * vd;
            }
        }
        out
    }
}

/// Analytic scalar function of diffusion time `t in [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Channel {
    /// `Σ_i coeffs[i] t^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude · sin(2π frequency t + phase)`.
    Sine { amplitude: f64, frequency: f64, phase: f64 },
    /// `scale · exp(rate t)`.
    Exp { scale: f64, rate: f64 },
    /// `1 / (tau - pole)` with `tau = 2t - 1`; needs `|pole| > 1`.
    Pole { pole: f64 },
}

impl Channel {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Channel::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Channel::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t + phase).sin(),
            Channel::Exp { scale, rate } => scale * (rate * t).exp(),
            Channel::Pole { pole } => 1.0 / ((2.0 * t - 1.0) - pole),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Channel::Pole { pole } if !(pole.abs() > 1.0) => Err(Error::InvalidParam(format!(
                "pole channel needs |pole| > 1 to stay analytic on [-1, 1], got {pole}"
            ))),
            _ => Ok(()),
        }
    }
}

/// One residual block: `y + gate(t) · gain · Qᵀ tanh(Q y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub mix: Matrix,
    pub gain: f64,
    pub gate_amp: f64,
    pub gate_phase: f64,
}

impl Block {
    /// Time modulation `1 + gate_amp · sin(π t + gate_phase)`.
    pub fn gate(&self, t: f64) -> f64 {
        1.0 + self.gate_amp * (std::f64::consts::PI * t + self.gate_phase).sin()
    }

    /// Ungated branch `gain · Qᵀ tanh(Q y)`.
    pub fn branch(&self, y: &[f64]) -> Vec<f64> {
        let q = &self.mix;
        let n = q.rows();
        let act: Vec<f64> = (0..n)
            .map(|i| q.row(i).iter().zip(y).map(|(a, b)| a * b).sum::<f64>().tanh())
            .collect();
        let mut out = vec![0.0; q.cols()];
        for (i, a) in act.iter().enumerate() {
            for (o, qij) in out.iter_mut().zip(q.row(i)) {
                *o += self.gain * qij * a;
            }
        }
        out
    }
}

/// Stack of smooth residual blocks over the mixture velocity.
///
/// With `y_0 = v(x, t)` and `y_l = y_{l-1} + gate_l(t) · branch_l(y_{l-1})`,
/// the network output is `y_B`. For per-block caching the stack is split
/// into `B` parts: the first block's whole output `y_1`, then the ungated
/// branches of blocks `2..=B`, recombined with freshly evaluated gates.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStack {
    base: GaussianMixture,
    blocks: Vec<Block>,
}

impl BlockStack {
    pub fn new(base: GaussianMixture, blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParam("block stack needs at least one block".into()));
        }
        let d = base.dim();
        for (i, b) in blocks.iter().enumerate() {
            if b.mix.rows() != d || b.mix.cols() != d {
                return Err(Error::Shape(format!("block {i} mixing matrix is not {d}x{d}")));
            }
        }
        Ok(Self { base, blocks })
    }

    /// Blocks with seeded random rotations; the first block's gate is held
    /// at 1.
    pub fn random(base: GaussianMixture, count: usize, gain: f64, gate_amp: f64, seed: u64) -> Result<Self> {
        let d = base.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = (0..count)
            .map(|l| Block {
                mix: random_rotation(d, &mut rng),
                gain,
                gate_amp: if l == 0 { 0.0 } else { gate_amp },
                gate_phase: rng.random_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        Self::new(base, blocks)
    }

    /// Identity mixing and zero gain: the output is the base velocity.
    pub fn identity(base: GaussianMixture, count: usize) -> Result<Self> {
        let d = base.dim();
        let blocks = (0..count)
            .map(|_| Block {
                mix: Matrix::identity(d),
                gain: 0.0,
                gate_amp: 0.0,
                gate_phase: 0.0,
            })
            .collect();
        Self::new(base, blocks)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn base(&self) -> &GaussianMixture {
        &self.base
    }

    pub fn forward(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut y = self.base.velocity(x, t);
        for b in &self.blocks {
            let g = b.gate(t);
            let br = b.branch(&y);
            for (yi, bi) in y.iter_mut().zip(br) {
                *yi += g * bi;
            }
        }
        y
    }

    /// The `B` per-block features: `y_1`, then branches `2..=B`.
    pub fn forward_parts(&self, x: &[f64], t: f64) -> Vec<Vec<f64>> {
        let mut parts = Vec::with_capacity(self.blocks.len());
        let mut y = self.base.velocity(x, t);
        for (l, b) in self.blocks.iter().enumerate() {
            let g = b.gate(t);
            let br = b.branch(&y);
            for (yi, bi) in y.iter_mut().zip(&br) {
                *yi += g * bi;
            }
            parts.push(if l == 0 { y.clone() } else { br });
        }
        parts
    }

    /// Inverse of [`forward_parts`](Self::forward_parts) at time `t`.
    pub fn compose(&self, parts: &[Vec<f64>], t: f64) -> Result<Vec<f64>> {
        if parts.len() != self.blocks.len() {
            return Err(Error::Shape(format!(
                "expected {} block parts, got {}",
                self.blocks.len(),
                parts.len()
            )));
        }
        let mut y = parts[0].clone();
        for (b, part) in self.blocks.iter().zip(parts).skip(1) {
            let g = b.gate(t);
            for (yi, pi) in y.iter_mut().zip(part) {
                *yi += g * pi;
            }
        }
        Ok(y)
    }
}

/// Orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (vi, ri) in v.iter_mut().zip(r) {
                *vi -= dot * ri;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_rows(&rows).expect("square rows")
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserKind {
    GaussianMixtureFlow(GaussianMixture),
    /// Features depend on `t` only; the drift equals the feature.
    FunctionFamily(Vec<Channel>),
    BlockStack(BlockStack),
}

/// A synthetic denoiser plus the seed it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    pub seed: u64,
}

impl DenoiserSpec {
    pub fn mixture(mixture: GaussianMixture, seed: u64) -> Self {
        Self {
            kind: DenoiserKind::GaussianMixtureFlow(mixture),
            seed,
        }
    }

    pub fn function_family(channels: Vec<Channel>, seed: u64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidParam("function family needs at least one channel".into()));
        }
        for c in &channels {
            c.validate()?;
        }
        Ok(Self {
            kind: DenoiserKind::FunctionFamily(channels),
            seed,
        })
    }

    pub fn block_stack(stack: BlockStack, seed: u64) -> Self {
        Self {
            kind: DenoiserKind::BlockStack(stack),
            seed,
        }
    }

    /// Latent dimension `D`.
    pub fn latent_dim(&self) -> usize {
        match &self.kind {
            DenoiserKind::GaussianMixtureFlow(m) => m.dim(),
            DenoiserKind::FunctionFamily(c) => c.len(),
            DenoiserKind::BlockStack(s) => s.base().dim(),
        }
    }

    /// Feature dimension `F`; equal to `D` for every kind here since the
    /// score map on the cached feature is the identity.
    pub fn feature_dim(&self) -> usize {
        self.latent_dim()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DenoiserKind::GaussianMixtureFlow(_) => "gaussian_mixture_flow",
            DenoiserKind::FunctionFamily(_) => "function_family",
            DenoiserKind::BlockStack(_) => "block_stack",
        }
    }
}

/// Feature and score from one full pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserOutput {
    pub feature: Vec<f64>,
    pub eps: Vec<f64>,
}

/// One full denoiser pass at `(x, t)`. The score is the identity map of the
/// last-block feature for every kind.
pub fn analytic_denoiser(x: &[f64], t: f64, spec: &DenoiserSpec) -> Result<DenoiserOutput> {
    if !(t.is_finite() && (0.0..=1.0).contains(&t)) {
        return Err(Error::OutOfRange {
            what: "denoiser time",
            value: t,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if x.len() != spec.latent_dim() {
        return Err(Error::Shape(format!(
            "latent has length {}, denoiser expects {}",
            x.len(),
            spec.latent_dim()
        )));
    }
    let feature = match &spec.kind {
        DenoiserKind::GaussianMixtureFlow(m) => m.velocity(x, t),
        DenoiserKind::FunctionFamily(channels) => channels.iter().map(|c| c.eval(t)).collect(),
        DenoiserKind::BlockStack(s) => s.forward(x, t),
    };
    Ok(DenoiserOutput {
        eps: feature.clone(),
        feature,
    })
}

/// Seeded standard-normal vector, used for initial latents.
pub fn standard_normal(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
