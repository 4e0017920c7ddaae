//! Seeded Monte Carlo experiments over grids of `(N, T, model)`.
//!
//! Replication `r` of grid point `g` draws from
//! `mix_seed(master_seed, g, r)`, so the output does not depend on the
//! number of workers. Results come back sorted by `(g, r)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{correlation, sample_covariance, DataMatrix};
use crate::distance::{kolmogorov_distance, Esd};
use crate::eigen::{eigenvalues_sym, top_eigenvalue};
use crate::models::{
    limiting_params, sample_equicorr, sample_factor, EquiCorrSpec, FactorModelSpec, LoadingTerms,
    ModelError, Noise,
};
use crate::mp::MpParams;
use crate::rng::mix_seed;
use crate::theory::{
    bbp_classify, clt_params, edge_normalization, estimate_rho, fitted_mp_from_lambda1, ks_normal,
    residual_grid, scaling_residual, spike_normalization, Regime, TheoryError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// `λ₁(C)/N`.
    #[serde(rename = "lambda1_C_over_N")]
    Lambda1COverN,
    /// `λ₁(S)` with `S = XXᵀ/T`.
    #[serde(rename = "lambda1_S")]
    Lambda1S,
    /// Kolmogorov distance between `F^C` and `MP_{T/N, 1−ρ}`.
    #[serde(rename = "esd_K_distance")]
    EsdKDistance,
    /// Sup distance between `F^C` and the fitted MP law on `(0, upper]`.
    #[serde(rename = "scaling_residual")]
    ScalingResidual,
    /// `(λ₁(S) − τ)/ς`; equi-correlated points with `ρ > 0` only.
    #[serde(rename = "clt_normalized")]
    CltNormalized,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Lambda1COverN => "lambda1_C_over_N",
            Statistic::Lambda1S => "lambda1_S",
            Statistic::EsdKDistance => "esd_K_distance",
            Statistic::ScalingResidual => "scaling_residual",
            Statistic::CltNormalized => "clt_normalized",
        }
    }
}

/// A named population in the `[models]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Equicorr {
        rho: f64,
        #[serde(default)]
        mu: Vec<f64>,
        #[serde(default)]
        delta: Vec<f64>,
    },
    Factor {
        loadings: LoadingTerms,
        psi1: f64,
        #[serde(default)]
        factor_noise: Noise,
        #[serde(default)]
        idio_noise: Noise,
    },
}

#[derive(Debug, Clone)]
enum Population {
    Equicorr(EquiCorrSpec),
    Factor(FactorModelSpec),
}

impl ModelConfig {
    fn build(&self) -> Result<Population, ModelError> {
        match self {
            ModelConfig::Equicorr { rho, mu, delta } => Ok(Population::Equicorr(
                EquiCorrSpec::new(*rho, mu.clone(), delta.clone())?,
            )),
            ModelConfig::Factor {
                loadings,
                psi1,
                factor_noise,
                idio_noise,
            } => Ok(Population::Factor(
                FactorModelSpec::new(loadings.clone().into_rule()?, *psi1)?
                    .with_noise(*factor_noise, *idio_noise),
            )),
        }
    }
}

impl Population {
    /// Population (or limiting) equi-correlation.
    fn rho(&self) -> f64 {
        match self {
            Population::Equicorr(s) => s.rho,
            Population::Factor(s) => limiting_params(s).1,
        }
    }

    fn sample(&self, n: usize, t: usize, seed: u64) -> Result<DataMatrix, ModelError> {
        match self {
            Population::Equicorr(s) => sample_equicorr(s, n, t, seed),
            Population::Factor(s) => sample_factor(s, n, t, seed),
        }
    }
}

/// One grid point: either `rho` (standard equi-correlated data) or a
/// reference into `[models]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub n: usize,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

fn default_workers() -> usize {
    1
}

fn default_residual_points() -> usize {
    200
}

fn default_residual_upper() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub statistic: Statistic,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub grid: Vec<GridPoint>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelConfig>,
    #[serde(default = "default_residual_points")]
    pub residual_points: usize,
    #[serde(default = "default_residual_upper")]
    pub residual_upper: f64,
}

impl ExperimentConfig {
    pub fn new(statistic: Statistic, grid: Vec<GridPoint>, reps: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            statistic,
            reps,
            master_seed,
            workers: 1,
            grid,
            models: BTreeMap::new(),
            residual_points: default_residual_points(),
            residual_upper: default_residual_upper(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Structural checks. Model preconditions at individual grid points
    /// surface as [`ErrorRow`]s instead.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.residual_points == 0 || self.residual_upper.is_nan() || self.residual_upper <= 0.0 {
            return bad("residual grid must be nonempty with a positive upper end".into());
        }
        for (g, p) in self.grid.iter().enumerate() {
            match (&p.rho, &p.model) {
                (Some(_), Some(_)) | (None, None) => {
                    return bad(format!("grid point {g} needs exactly one of rho, model"))
                }
                (None, Some(m)) if !self.models.contains_key(m) => {
                    return bad(format!("grid point {g} references unknown model {m}"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One successful replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub t: usize,
    pub rho: f64,
    #[serde(rename = "rep")]
    pub rep_index: usize,
    #[serde(rename = "statistic")]
    pub statistic_name: String,
    pub value: f64,
    #[serde(rename = "seed")]
    pub seed_used: u64,
}

/// A replication that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub grid_index: usize,
    pub n: usize,
    pub t: usize,
    pub rep: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<ErrorRow>,
}

fn compute(
    cfg: &ExperimentConfig,
    pop: &Population,
    point: &GridPoint,
    rho: f64,
    seed: u64,
) -> Result<f64, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    if cfg.statistic == Statistic::CltNormalized && !matches!(pop, Population::Equicorr(_)) {
        return Err("clt_normalized needs an equi-correlated population".into());
    }
    let (n, t) = (point.n, point.t);
    let x = pop.sample(n, t, seed).map_err(|e| err(&e))?;
    let value = match cfg.statistic {
        Statistic::Lambda1COverN => estimate_rho(&x).map_err(|e| err(&e))?,
        Statistic::Lambda1S => top_eigenvalue(&sample_covariance(&x)).map_err(|e| err(&e))?,
        Statistic::EsdKDistance => {
            let c = correlation(&x).map_err(|e| err(&e))?;
            let eigs = eigenvalues_sym(&c).map_err(|e| err(&e))?;
            let mp = MpParams::new(t as f64 / n as f64, 1.0 - rho).map_err(|e| err(&e))?;
            kolmogorov_distance(&Esd::new(eigs), &mp)
        }
        Statistic::ScalingResidual => {
            let grid = residual_grid(cfg.residual_points, cfg.residual_upper);
            scaling_residual(&x, &grid).map_err(|e| err(&e))?
        }
        Statistic::CltNormalized => {
            let p = clt_params(n, t, rho).map_err(|e| err(&e))?;
            let l1 = top_eigenvalue(&sample_covariance(&x)).map_err(|e| err(&e))?;
            (l1 - p.tau) / p.varsigma
        }
    };
    Ok(value)
}

/// Runs every `(grid point, replication)` pair on `config.workers` threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let points: Vec<Result<Population, String>> = config
        .grid
        .iter()
        .map(|p| match (&p.rho, &p.model) {
            (Some(rho), _) => EquiCorrSpec::standard(*rho)
                .map(Population::Equicorr)
                .map_err(|e| e.to_string()),
            (None, Some(m)) => config.models[m].build().map_err(|e| e.to_string()),
            (None, None) => unreachable!("validated"),
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|g| (0..config.reps).map(move |r| (g, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results: Vec<Result<ResultRow, ErrorRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(g, r)| {
                let point = &config.grid[g];
                let seed = mix_seed(config.master_seed, g as u64, r as u64);
                let outcome = points[g].as_ref().map_err(Clone::clone).and_then(|pop| {
                    let rho = pop.rho();
                    compute(config, pop, point, rho, seed).map(|v| (rho, v))
                });
                match outcome {
                    Ok((rho, value)) => Ok(ResultRow {
                        n: point.n,
                        t: point.t,
                        rho,
                        rep_index: r,
                        statistic_name: config.statistic.name().to_string(),
                        value,
                        seed_used: seed,
                    }),
                    Err(reason) => Err(ErrorRow {
                        grid_index: g,
                        n: point.n,
                        t: point.t,
                        rep: r,
                        reason,
                    }),
                }
            })
            .collect()
    });
    let mut out = ExperimentOutput::default();
    for res in results {
        match res {
            Ok(row) => out.rows.push(row),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

pub fn write_rows<W: Write>(
    w: W,
    rows: &[ResultRow],
    format: OutputFormat,
) -> Result<(), HarnessError> {
    let out = |e: &dyn std::fmt::Display| HarnessError::Output(e.to_string());
    match format {
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            if rows.is_empty() {
                wtr.write_record(["n", "t", "rho", "rep", "statistic", "value", "seed"])
                    .map_err(|e| out(&e))?;
            }
            for r in rows {
                wtr.serialize(r).map_err(|e| out(&e))?;
            }
            wtr.flush().map_err(|e| out(&e))
        }
        OutputFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(w);
            for r in rows {
                serde_json::to_writer(&mut w, r).map_err(|e| out(&e))?;
                w.write_all(b"\n").map_err(|e| out(&e))?;
            }
            w.flush().map_err(|e| out(&e))
        }
    }
}

/// Density-normalized histogram over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
    /// Values below `lo`, above `hi`, or NaN.
    pub outside: usize,
}

/// `bins` equal-width bins on `[lo, hi]`; `hi` itself falls in the last
/// bin. Densities integrate to the fraction of values inside the range.
///
/// # Panics
/// If `bins == 0` or `lo >= hi`.
pub fn histogram(values: &[f64], bins: usize, (lo, hi): (f64, f64)) -> Histogram {
    assert!(bins >= 1 && lo < hi, "need bins >= 1 and lo < hi");
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0;
    for &v in values {
        if !(lo..=hi).contains(&v) {
            outside += 1;
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = values.len().max(1) as f64;
    Histogram {
        centers: (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        densities: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        counts,
        outside,
    }
}

/// Histogram of the correlation eigenvalues below `λ₁` over the fitted MP
/// support, paired with the fitted density: `(center, density, mp_pdf)`.
pub fn esd_overlay(x: &DataMatrix, bins: usize) -> Result<Vec<(f64, f64, f64)>, HarnessError> {
    let c = correlation(x).map_err(TheoryError::from)?;
    let eigs = eigenvalues_sym(&c).map_err(TheoryError::from)?;
    let mp = fitted_mp_from_lambda1(eigs[0], x.n(), x.t())?;
    let h = histogram(&eigs[1..], bins, mp.support());
    Ok(h.centers
        .iter()
        .zip(&h.densities)
        .map(|(&c, &d)| (c, d, mp.pdf(c)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltCheck {
    pub mean: f64,
    pub var: f64,
    pub ks: f64,
    pub reps: usize,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn single_point(n: usize, t: usize, rho: f64) -> Vec<GridPoint> {
    vec![GridPoint {
        n,
        t,
        rho: Some(rho),
        model: None,
    }]
}

fn first_error(out: &ExperimentOutput) -> Result<(), HarnessError> {
    match out.errors.first() {
        Some(e) => Err(HarnessError::Config(format!(
            "grid point {} rep {}: {}",
            e.grid_index, e.rep, e.reason
        ))),
        None => Ok(()),
    }
}

/// Replicates `(λ₁(S) − τ)/ς` on equi-correlated data and compares it
/// with the standard normal.
pub fn clt_check(
    n: usize,
    t: usize,
    rho: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<CltCheck, HarnessError> {
    clt_params(n, t, rho)?;
    let mut cfg = ExperimentConfig::new(
        Statistic::CltNormalized,
        single_point(n, t, rho),
        reps,
        seed,
    );
    cfg.workers = workers;
    let out = run_experiment(&cfg)?;
    first_error(&out)?;
    let values: Vec<f64> = out.rows.iter().map(|r| r.value).collect();
    let (mean, var) = mean_var(&values);
    Ok(CltCheck {
        mean,
        var,
        ks: ks_normal(&values)?,
        reps,
    })
}

/// Sup residual between `F^C` and the fitted MP law on a one-off sample.
pub fn scaling_check(
    n: usize,
    t: usize,
    rho: f64,
    seed: u64,
    grid_points: usize,
) -> Result<f64, HarnessError> {
    let mut cfg =
        ExperimentConfig::new(Statistic::ScalingResidual, single_point(n, t, rho), 1, seed);
    cfg.residual_points = grid_points;
    let out = run_experiment(&cfg)?;
    first_error(&out)?;
    Ok(out.rows[0].value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbpRow {
    pub n: usize,
    pub t: usize,
    pub rho: f64,
    pub n_rho: f64,
    pub spike: f64,
    pub regime: Regime,
    /// KS distance to N(0,1) under the Gaussian spike normalization; only
    /// defined above the threshold.
    pub ks_normal_super: Option<f64>,
    /// KS distance to N(0,1) under the edge normalization.
    pub ks_normal_sub: f64,
}

/// For each `t`, sets `N = round(t/q)` and `ρ_N = c·N^{−γ}`, replicates
/// `λ₁(S)` and reports its distance from normality under both
/// normalizations.
pub fn bbp_sweep(
    q: f64,
    t_list: &[usize],
    c: f64,
    gamma: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<BbpRow>, HarnessError> {
    if !(q.is_finite() && q > 1.0) {
        return Err(TheoryError::InvalidQ(q).into());
    }
    if reps < 2 {
        return Err(HarnessError::Config("reps must be at least 2".into()));
    }
    let grid: Vec<GridPoint> = t_list
        .iter()
        .map(|&t| {
            let n = ((t as f64 / q).round() as usize).max(1);
            let rho = c * (n as f64).powf(-gamma);
            GridPoint {
                n,
                t,
                rho: Some(rho),
                model: None,
            }
        })
        .collect();
    let mut cfg = ExperimentConfig::new(Statistic::Lambda1S, grid.clone(), reps, seed);
    cfg.workers = workers;
    let out = run_experiment(&cfg)?;
    first_error(&out)?;
    grid.iter()
        .enumerate()
        .map(|(g, p)| {
            let rho = p.rho.unwrap_or_default();
            let samples: Vec<f64> = out.rows[g * reps..(g + 1) * reps]
                .iter()
                .map(|r| r.value)
                .collect();
            let spike = (p.n as f64 - 1.0) * rho + 1.0;
            let report = bbp_classify(spike, q, p.t)?;
            let normalize = |(center, scale): (f64, f64)| -> Vec<f64> {
                samples.iter().map(|l| (l - center) / scale).collect()
            };
            let ks_normal_super = match report.regime {
                Regime::Supercritical => {
                    Some(ks_normal(&normalize(spike_normalization(spike, q, p.t)))?)
                }
                _ => None,
            };
            Ok(BbpRow {
                n: p.n,
                t: p.t,
                rho,
                n_rho: p.n as f64 * rho,
                spike,
                regime: report.regime,
                ks_normal_super,
                ks_normal_sub: ks_normal(&normalize(edge_normalization(q, p.t)))?,
            })
        })
        .collect()
}
