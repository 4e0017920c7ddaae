//! Estimators and limit-theorem normalizations for equi-correlated
//! populations.

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{correlation, DataMatrix, SpectraError};
use crate::distance::{DistributionFunction, Esd};
use crate::eigen::{eigen_sym, eigenvalues_sym, top_eigenvalue};
use crate::mp::{MpError, MpParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Mp(#[from] MpError),
    #[error("fitted scale 1 - lambda1/N = {0} is not positive")]
    DegenerateScale(f64),
    #[error("rho must lie in (0, 1) for the CLT normalization, got {0}")]
    RhoZero(f64),
    #[error("population spectrum has no gap between its two largest eigenvalues")]
    NoSpectralGap,
    #[error("index q must be finite and > 1, got {0}")]
    InvalidQ(f64),
    #[error("spike must be finite and > 1, got {0}")]
    InvalidSpike(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// `λ₁(C)/N`, the equi-correlation estimator. Always in `[0, 1]`.
pub fn estimate_rho(x: &DataMatrix) -> Result<f64, TheoryError> {
    let c = correlation(x)?;
    let lambda1 = top_eigenvalue(&c)?;
    Ok((lambda1 / x.n() as f64).clamp(0.0, 1.0))
}

/// `MP_{t/n, 1 − λ₁/n}` from a known top correlation eigenvalue.
pub fn fitted_mp_from_lambda1(lambda1: f64, n: usize, t: usize) -> Result<MpParams, TheoryError> {
    let sigma2 = 1.0 - lambda1 / n as f64;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(TheoryError::DegenerateScale(sigma2));
    }
    Ok(MpParams::new(t as f64 / n as f64, sigma2)?)
}

/// The Marčenko–Pastur law with index `T/N` and scale `1 − λ₁(C)/N`.
pub fn fitted_mp(x: &DataMatrix) -> Result<MpParams, TheoryError> {
    let rho = estimate_rho(x)?;
    fitted_mp_from_lambda1(rho * x.n() as f64, x.n(), x.t())
}

/// Grid points this close to the origin are skipped by [`scaling_residual`].
pub const ORIGIN_EXCLUSION: f64 = 1e-6;

/// `max_x |F^C(x) − MP_{T/N, 1−λ₁(C)/N}(x)|` over the grid, ignoring points
/// within [`ORIGIN_EXCLUSION`] of zero.
pub fn scaling_residual(x: &DataMatrix, grid: &[f64]) -> Result<f64, TheoryError> {
    let c = correlation(x)?;
    let eigs = eigenvalues_sym(&c)?;
    let mp = fitted_mp_from_lambda1(eigs[0], x.n(), x.t())?;
    let esd = Esd::new(eigs);
    Ok(grid
        .iter()
        .filter(|g| g.abs() > ORIGIN_EXCLUSION)
        .map(|&g| (esd.cdf(g) - mp.cdf(g)).abs())
        .fold(0.0, f64::max))
}

/// `points` evenly spaced values on `(0, upper]`.
pub fn residual_grid(points: usize, upper: f64) -> Vec<f64> {
    (1..=points)
        .map(|k| upper * k as f64 / points as f64)
        .collect()
}

/// Centering and scale for the largest sample-covariance eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltParams {
    pub tau: f64,
    pub varsigma: f64,
}

/// `τ = ((N−1)ρ+1)((1+(T−1)N)ρ + N − 1)/(NTρ)` and `ς = ((N−1)ρ+1)·√(2/T)`.
///
/// `ς` is `λ₁(Σ_ρ)` times the `√(2/T)` scale of [`clt_center_general`]:
/// `λ₁(S)/λ₁(Σ)` has asymptotic variance `2/T`.
pub fn clt_params(n: usize, t: usize, rho: f64) -> Result<CltParams, TheoryError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(TheoryError::RhoZero(rho));
    }
    let (nf, tf) = (n as f64, t as f64);
    let spike = (nf - 1.0) * rho + 1.0;
    let tau = spike * ((1.0 + (tf - 1.0) * nf) * rho + nf - 1.0) / (nf * tf * rho);
    let varsigma = spike * (2.0 / tf).sqrt();
    Ok(CltParams { tau, varsigma })
}

/// Centering `1 + T⁻¹ Σ_{k≥2} λ_k/(λ₁ − λ_k)` and scale `√(2/T)` for
/// `λ₁(S)/λ₁(Σ)` under a spectral gap. `population_eigs` must be sorted
/// nonincreasing.
pub fn clt_center_general(population_eigs: &[f64], t: usize) -> Result<(f64, f64), TheoryError> {
    let (&top, rest) = population_eigs
        .split_first()
        .ok_or(TheoryError::NoSpectralGap)?;
    if rest.first().is_some_and(|&second| second >= top) {
        return Err(TheoryError::NoSpectralGap);
    }
    let tf = t as f64;
    let sum: f64 = rest.iter().map(|&l| l / (top - l)).sum();
    Ok((1.0 + sum / tf, (2.0 / tf).sqrt()))
}

/// `(λ − τ)/ς` elementwise.
pub fn normalize_lambda1(samples: &[f64], params: &CltParams) -> Vec<f64> {
    samples
        .iter()
        .map(|l| (l - params.tau) / params.varsigma)
        .collect()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov statistic against the standard normal.
pub fn ks_normal(samples: &[f64]) -> Result<f64, TheoryError> {
    if samples.len() < 2 {
        return Err(TheoryError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let p = normal_cdf(x);
        let above = (i as f64 + 1.0) / n - p;
        let below = p - i as f64 / n;
        acc.max(above).max(below)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbpReport {
    pub regime: Regime,
    pub center: f64,
    pub scale: f64,
}

/// Edge centering `(1 + √(1/q))²` and scale `(1+√q)^{4/3}/(√q·t^{2/3})`.
pub fn edge_normalization(q: f64, t: usize) -> (f64, f64) {
    let center = (1.0 + (1.0 / q).sqrt()).powi(2);
    let scale = (1.0 + q.sqrt()).powf(4.0 / 3.0) / (q.sqrt() * (t as f64).powf(2.0 / 3.0));
    (center, scale)
}

/// Gaussian centering `ℓ + q⁻¹ℓ/(ℓ−1)` and scale
/// `√(2(ℓ² − q⁻¹ℓ²/(ℓ−1)²))/√t` for a population spike `ℓ > 1`.
///
/// The factor 2 is the real-valued case; complex data would drop it.
pub fn spike_normalization(spike: f64, q: f64, t: usize) -> (f64, f64) {
    let center = spike + spike / (q * (spike - 1.0));
    let var = 2.0 * (spike * spike - spike * spike / (q * (spike - 1.0).powi(2)));
    (center, var.max(0.0).sqrt() / (t as f64).sqrt())
}

/// Classifies a population spike against the threshold `1 + 1/√q`.
///
/// Supercritical spikes get the Gaussian normalization; subcritical and
/// critical spikes get the edge normalization (a spike sitting exactly at
/// the threshold shares the edge scaling).
pub fn bbp_classify(spike: f64, q: f64, t: usize) -> Result<BbpReport, TheoryError> {
    if !(q.is_finite() && q > 1.0) {
        return Err(TheoryError::InvalidQ(q));
    }
    if !(spike.is_finite() && spike > 1.0) {
        return Err(TheoryError::InvalidSpike(spike));
    }
    let threshold = 1.0 + 1.0 / q.sqrt();
    let (regime, (center, scale)) = if spike > threshold {
        (Regime::Supercritical, spike_normalization(spike, q, t))
    } else if spike < threshold {
        (Regime::Subcritical, edge_normalization(q, t))
    } else {
        (Regime::Critical, edge_normalization(q, t))
    };
    Ok(BbpReport {
        regime,
        center,
        scale,
    })
}

/// Eigenvalue clipping of a correlation matrix estimated from `t`
/// observations.
///
/// Eigenvalues inside the fitted bulk `[σ²a_q, σ²b_q]` (with `q = t/N`,
/// `σ² = 1 − λ₁/N`) are replaced by their mean, which keeps the trace; the
/// rest and all eigenvectors are kept.
pub fn clip_eigenvalues(c: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>, TheoryError> {
    let n = c.nrows();
    let eig = eigen_sym(c)?;
    let mp = fitted_mp_from_lambda1(eig.values[0], n, t)?;
    let (lo, hi) = mp.support();
    let bulk: Vec<usize> = (0..n)
        .filter(|&k| eig.values[k] >= lo && eig.values[k] <= hi)
        .collect();
    if bulk.is_empty() {
        return Ok(c.clone());
    }
    let mean = bulk.iter().map(|&k| eig.values[k]).sum::<f64>() / bulk.len() as f64;
    let mut values = eig.values.clone();
    for &k in &bulk {
        values[k] = mean;
    }
    let lambda = DMatrix::from_diagonal(&DVector::from_vec(values));
    let mut out = &eig.vectors * lambda * eig.vectors.transpose();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}
