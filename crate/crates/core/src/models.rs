//! Synthetic populations: equi-correlated samples and K-factor models.
//!
//! The equi-correlated sampler draws
//! `x_it = μ_i + δ_i (√ρ f_t + √(1−ρ) e_it)` with independent standard
//! normal `f_t` and `e_it`, whose population correlation matrix is `Σ_ρ`.
//! The factor sampler draws `x_it = μ_i + ℓ_i f_t + e_it` where the
//! `K`-vector `f_t` and the idiosyncratic `e_it` (variance `ψ₁`) come from
//! centered, unit-variance laws.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataMatrix;
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("equi-correlation must lie in [0, 1), got {0}")]
    InvalidRho(f64),
    #[error("scaling entry {index} must be positive and finite, got {value}")]
    InvalidDelta { index: usize, value: f64 },
    #[error("{field} has length {got}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("specific variance must be positive and finite, got {0}")]
    InvalidPsi(f64),
    #[error("sample needs n >= 1 and t >= 2, got n={n}, t={t}")]
    InvalidSize { n: usize, t: usize },
    #[error("invalid loadings: {0}")]
    InvalidLoadings(String),
}

/// Centered, unit-variance noise laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    Normal,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// ±1 with equal probability.
    Rademacher,
}

impl Noise {
    pub fn draw(self, rng: &mut SimRng) -> f64 {
        match self {
            Noise::Normal => rng.sample(StandardNormal),
            Noise::Uniform => {
                let s3 = 3f64.sqrt();
                rng.random_range(-s3..s3)
            }
            Noise::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Equi-correlated normal population with mean `mu` and diagonal scaling
/// `delta`. Empty `mu` means zero mean and empty `delta` means `Δ = I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiCorrSpec {
    pub rho: f64,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
}

impl EquiCorrSpec {
    pub fn new(rho: f64, mu: Vec<f64>, delta: Vec<f64>) -> Result<Self, ModelError> {
        let spec = Self { rho, mu, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn standard(rho: f64) -> Result<Self, ModelError> {
        Self::new(rho, Vec::new(), Vec::new())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(ModelError::InvalidRho(self.rho));
        }
        if let Some((index, &value)) = self
            .delta
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(ModelError::InvalidDelta { index, value });
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(ModelError::InvalidLoadings("non-finite mean".into()));
        }
        Ok(())
    }

    fn check_len(&self, n: usize) -> Result<(), ModelError> {
        for (field, v) in [("mu", &self.mu), ("delta", &self.delta)] {
            if !v.is_empty() && v.len() != n {
                return Err(ModelError::LengthMismatch {
                    field,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

fn check_size(n: usize, t: usize) -> Result<(), ModelError> {
    if n < 1 || t < 2 {
        return Err(ModelError::InvalidSize { n, t });
    }
    Ok(())
}

/// Draws an `n × t` equi-correlated sample. Deterministic in `seed`.
pub fn sample_equicorr(
    spec: &EquiCorrSpec,
    n: usize,
    t: usize,
    seed: u64,
) -> Result<DataMatrix, ModelError> {
    spec.validate()?;
    check_size(n, t)?;
    spec.check_len(n)?;
    let mut rng = rng_from_seed(seed);
    let common: Vec<f64> = (0..t).map(|_| Noise::Normal.draw(&mut rng)).collect();
    let (a, b) = (spec.rho.sqrt(), (1.0 - spec.rho).sqrt());
    let mut x = DMatrix::zeros(n, t);
    for i in 0..n {
        let mu = spec.mu.get(i).copied().unwrap_or(0.0);
        let delta = spec.delta.get(i).copied().unwrap_or(1.0);
        for (col, f) in common.iter().enumerate() {
            let e: f64 = Noise::Normal.draw(&mut rng);
            x[(i, col)] = mu + delta * (a * f + b * e);
        }
    }
    Ok(DataMatrix::new(x).expect("finite by construction"))
}

type IndexFn<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

/// Loadings `ℓ_i` as a function of the 1-based variable index, together
/// with their declared limit `ℓ`.
#[derive(Clone)]
pub struct LoadingRule {
    limit: Vec<f64>,
    rule: IndexFn<Vec<f64>>,
}

impl fmt::Debug for LoadingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadingRule")
            .field("limit", &self.limit)
            .finish_non_exhaustive()
    }
}

impl LoadingRule {
    pub fn constant(loadings: Vec<f64>) -> Self {
        let l = loadings.clone();
        Self {
            limit: loadings,
            rule: Arc::new(move |_| l.clone()),
        }
    }

    /// `f(i)` must return `limit.len()` entries for every `i ≥ 1`.
    pub fn from_fn<F>(limit: Vec<f64>, f: F) -> Self
    where
        F: Fn(usize) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            limit,
            rule: Arc::new(f),
        }
    }

    pub fn k(&self) -> usize {
        self.limit.len()
    }

    pub fn limit(&self) -> &[f64] {
        &self.limit
    }

    /// `ℓ_i` for the 1-based index `i`.
    pub fn at(&self, i: usize) -> Vec<f64> {
        (self.rule)(i)
    }
}

/// Parametric loadings `ℓ_ik = base_k + alternating_k·(−1)^i + decay_k / i`
/// for config files. The declared limit defaults to `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingTerms {
    pub base: Vec<f64>,
    #[serde(default)]
    pub alternating: Vec<f64>,
    #[serde(default)]
    pub decay: Vec<f64>,
    #[serde(default)]
    pub limit: Option<Vec<f64>>,
}

impl LoadingTerms {
    pub fn into_rule(self) -> Result<LoadingRule, ModelError> {
        let k = self.base.len();
        let pad = |name: &str, v: Vec<f64>| -> Result<Vec<f64>, ModelError> {
            match v.len() {
                0 => Ok(vec![0.0; k]),
                len if len == k => Ok(v),
                len => Err(ModelError::InvalidLoadings(format!(
                    "{name} has {len} entries but base has {k}"
                ))),
            }
        };
        let alternating = pad("alternating", self.alternating)?;
        let decay = pad("decay", self.decay)?;
        let limit = match self.limit {
            Some(l) if l.len() != k => {
                return Err(ModelError::InvalidLoadings(format!(
                    "limit has {} entries but base has {k}",
                    l.len()
                )))
            }
            Some(l) => l,
            None => self.base.clone(),
        };
        if self
            .base
            .iter()
            .chain(&alternating)
            .chain(&decay)
            .chain(&limit)
            .any(|v| !v.is_finite())
        {
            return Err(ModelError::InvalidLoadings("non-finite term".into()));
        }
        let base = self.base;
        Ok(LoadingRule::from_fn(limit, move |i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (0..k)
                .map(|c| base[c] + alternating[c] * sign + decay[c] / i as f64)
                .collect()
        }))
    }
}

#[derive(Clone)]
pub struct FactorModelSpec {
    pub loadings: LoadingRule,
    /// `μ_i` for the 1-based index `i`.
    pub means: IndexFn<f64>,
    pub psi1: f64,
    pub factor_dist: Noise,
    pub idio_dist: Noise,
}

impl fmt::Debug for FactorModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorModelSpec")
            .field("loadings", &self.loadings)
            .field("psi1", &self.psi1)
            .field("factor_dist", &self.factor_dist)
            .field("idio_dist", &self.idio_dist)
            .finish_non_exhaustive()
    }
}

impl FactorModelSpec {
    /// Zero means and normal noise throughout.
    pub fn new(loadings: LoadingRule, psi1: f64) -> Result<Self, ModelError> {
        let spec = Self {
            loadings,
            means: Arc::new(|_| 0.0),
            psi1,
            factor_dist: Noise::Normal,
            idio_dist: Noise::Normal,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_means<F>(mut self, f: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        self.means = Arc::new(f);
        self
    }

    pub fn with_noise(mut self, factor_dist: Noise, idio_dist: Noise) -> Self {
        self.factor_dist = factor_dist;
        self.idio_dist = idio_dist;
        self
    }

    pub fn k(&self) -> usize {
        self.loadings.k()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.psi1.is_finite() && self.psi1 > 0.0) {
            return Err(ModelError::InvalidPsi(self.psi1));
        }
        if self.loadings.limit.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidLoadings("non-finite limit".into()));
        }
        Ok(())
    }
}

/// Draws an `n × t` factor-model sample. Deterministic in `seed`.
pub fn sample_factor(
    spec: &FactorModelSpec,
    n: usize,
    t: usize,
    seed: u64,
) -> Result<DataMatrix, ModelError> {
    spec.validate()?;
    check_size(n, t)?;
    let k = spec.k();
    let mut rng = rng_from_seed(seed);
    // f is t × k, drawn time-major
    let mut factors = vec![0.0; t * k];
    for v in factors.iter_mut() {
        *v = spec.factor_dist.draw(&mut rng);
    }
    let scale = spec.psi1.sqrt();
    let mut x = DMatrix::zeros(n, t);
    for i in 0..n {
        let l = spec.loadings.at(i + 1);
        if l.len() != k {
            return Err(ModelError::InvalidLoadings(format!(
                "loading rule returned {} entries at i={}, expected {k}",
                l.len(),
                i + 1
            )));
        }
        let mu = (spec.means)(i + 1);
        for col in 0..t {
            let f = &factors[col * k..(col + 1) * k];
            let common: f64 = l.iter().zip(f).map(|(a, b)| a * b).sum();
            let e = spec.idio_dist.draw(&mut rng);
            x[(i, col)] = mu + common + scale * e;
        }
    }
    DataMatrix::new(x).map_err(|e| ModelError::InvalidLoadings(e.to_string()))
}

/// `(σ∞², ρ) = (‖ℓ‖² + ψ₁, ‖ℓ‖² / (‖ℓ‖² + ψ₁))` from the declared limit.
pub fn limiting_params(spec: &FactorModelSpec) -> (f64, f64) {
    let l2: f64 = spec.loadings.limit().iter().map(|v| v * v).sum();
    let sigma2 = l2 + spec.psi1;
    (sigma2, l2 / sigma2)
}

/// `Σ_ρ`: unit diagonal, every off-diagonal entry `rho`.
pub fn population_equicorr(n: usize, rho: f64) -> Result<DMatrix<f64>, ModelError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(ModelError::InvalidRho(rho));
    }
    Ok(DMatrix::from_fn(
        n,
        n,
        |i, j| if i == j { 1.0 } else { rho },
    ))
}
