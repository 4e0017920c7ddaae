//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use corrspec::data::{correlation, sample_covariance, DataMatrix};
use corrspec::distance::LEVY_TOL;
use corrspec::eigen::eigenvalues_sym;
use corrspec::finance::{read_rho_bar, read_summary, regress_summary};
use corrspec::harness::{
    bbp_sweep, clt_check, run_experiment, scaling_check, ExperimentConfig, GridPoint, Statistic,
};
use corrspec::models::{
    limiting_params, sample_equicorr, sample_factor, EquiCorrSpec, FactorModelSpec, LoadingRule,
    LoadingTerms, Noise,
};
use corrspec::rng::{mix_seed, rng_from_seed};
use corrspec::theory::{
    bbp_classify, edge_normalization, estimate_rho, ks_normal, spike_normalization, Regime,
};
use corrspec::{kolmogorov_distance, levy_distance, Esd, MpParams};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Midpoint rule in `θ` after `x = c − h·cos θ`; the integrand
/// `pdf(x)·dx = q h² sin²θ / (2πσ² x)` is smooth and periodic.
fn mp_moments(mp: &MpParams, panels: usize) -> (f64, f64) {
    let (a, b) = mp.support();
    let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
    let (q, s2) = (mp.q(), mp.sigma2());
    let (mut mass, mut mean) = (0.0, 0.0);
    for k in 0..panels {
        let th = PI * (k as f64 + 0.5) / panels as f64;
        let x = c - h * th.cos();
        let w = q * h * h * th.sin().powi(2) / (2.0 * PI * s2 * x) * PI / panels as f64;
        mass += w;
        mean += w * x;
    }
    (mass + mp.mass_at_zero(), mean)
}

fn mp_normalization() -> Outcome {
    let (mut worst_mass, mut worst_mean, mut worst_cdf) = (0.0f64, 0.0f64, 0.0f64);
    for q in [0.5, 1.0, 2.5] {
        for s2 in [0.5, 1.0] {
            let mp = MpParams::new(q, s2).unwrap();
            let (mass, mean) = mp_moments(&mp, 4000);
            worst_mass = worst_mass.max((mass - 1.0).abs());
            worst_mean = worst_mean.max((mean - s2).abs());
            worst_cdf = worst_cdf.max((mp.cdf(mp.support().1) - 1.0).abs());
        }
    }
    outcome(
        worst_mass <= 1e-8 && worst_cdf <= 1e-8 && worst_mean <= 1e-6,
        format!(
            "max |mass-1| = {worst_mass:.2e}, max |F(upper)-1| = {worst_cdf:.2e} (tol 1e-8); \
             max |mean-s2| = {worst_mean:.2e} (tol 1e-6)"
        ),
    )
}

fn correlation_esd(x: &DataMatrix) -> Esd {
    Esd::new(eigenvalues_sym(&correlation(x).unwrap()).unwrap())
}

fn two_factor_model() -> FactorModelSpec {
    let rule = LoadingTerms {
        base: vec![0.6, 0.3],
        alternating: vec![],
        decay: vec![0.0, 0.5],
        limit: None,
    }
    .into_rule()
    .unwrap();
    FactorModelSpec::new(rule, 0.55)
        .unwrap()
        .with_noise(Noise::Normal, Noise::Rademacher)
}

fn lsd_scaling() -> Outcome {
    let (n, t) = (400, 1000);
    let mut parts = Vec::new();
    let mut pass = true;
    for (g, rho) in [0.0, 0.3, 0.7].into_iter().enumerate() {
        let x = sample_equicorr(
            &EquiCorrSpec::standard(rho).unwrap(),
            n,
            t,
            mix_seed(2, g as u64, 0),
        )
        .unwrap();
        let mp = MpParams::new(2.5, 1.0 - rho).unwrap();
        let k = kolmogorov_distance(&correlation_esd(&x), &mp);
        pass &= k <= 0.05;
        parts.push(format!("rho={rho}: K={k:.4}"));
    }
    let spec = two_factor_model();
    let (_, rho) = limiting_params(&spec);
    let x = sample_factor(&spec, n, t, mix_seed(2, 3, 0)).unwrap();
    let k = kolmogorov_distance(
        &correlation_esd(&x),
        &MpParams::new(2.5, 1.0 - rho).unwrap(),
    );
    pass &= k <= 0.06;
    outcome(
        pass,
        format!(
            "{} (tol 0.05); two-factor rademacher rho={rho:.2}: K={k:.4} (tol 0.06)",
            parts.join(", ")
        ),
    )
}

fn mean_abs_error(n: usize, t: usize, rho: f64, reps: usize, grid: u64) -> f64 {
    let spec = EquiCorrSpec::standard(rho).unwrap();
    (0..reps)
        .map(|r| {
            let x = sample_equicorr(&spec, n, t, mix_seed(3, grid, r as u64)).unwrap();
            (estimate_rho(&x).unwrap() - rho).abs()
        })
        .sum::<f64>()
        / reps as f64
}

fn consistency() -> Outcome {
    let main = mean_abs_error(500, 1250, 0.4, 20, 0);
    let path: Vec<f64> = [100usize, 200, 400]
        .iter()
        .enumerate()
        .map(|(g, &n)| mean_abs_error(n, n * 5 / 2, 0.4, 50, 1 + g as u64))
        .collect();
    let monotone = path.windows(2).all(|w| w[1] < w[0]);
    outcome(
        main <= 0.02 && monotone,
        format!(
            "N=500 T=1250: mean |rho_hat-0.4| = {main:.4} (tol 0.02); \
             N=100/200/400 at Q=2.5: {:.4} > {:.4} > {:.4} required",
            path[0], path[1], path[2]
        ),
    )
}

fn clt() -> Outcome {
    let c = clt_check(200, 400, 0.5, 2000, 4, workers()).unwrap();
    outcome(
        c.mean.abs() <= 0.1 && (0.85..=1.15).contains(&c.var) && c.ks <= 0.05,
        format!(
            "mean = {:.4} (|.| <= 0.1), var = {:.4} (in [0.85, 1.15]), KS = {:.4} (<= 0.05), reps = {}",
            c.mean, c.var, c.ks, c.reps
        ),
    )
}

fn scaling_residual() -> Outcome {
    let r = scaling_check(400, 1000, 0.5, 5, 200).unwrap();
    outcome(
        r <= 0.05,
        format!("sup residual on 200 points of (0,3] = {r:.4} (tol 0.05)"),
    )
}

fn table1_regression() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/table1.csv");
    let summary = read_summary(std::fs::File::open(&path).unwrap()).unwrap();
    let rho_bar = read_rho_bar(std::fs::File::open(&path).unwrap()).unwrap();
    let r = regress_summary(&summary, &rho_bar).unwrap();
    outcome(
        r.n_points == 12
            && (r.slope - 0.98488).abs() <= 0.01
            && (r.intercept + 0.07190).abs() <= 0.01
            && (r.adj_r2 - 0.9916).abs() <= 0.005,
        format!(
            "slope = {:.5} (0.98488 +- 0.01), intercept = {:.5} (-0.07190 +- 0.01), \
             adj R2 = {:.5} (0.9916 +- 0.005), points = {}",
            r.slope, r.intercept, r.adj_r2, r.n_points
        ),
    )
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Spectrum of `A Aᵀ` with round-off around zero snapped to zero.
fn gram_esd(a: &DMatrix<f64>) -> Esd {
    let g = a * a.transpose();
    let g = (&g + g.transpose()) * 0.5;
    let eigs = eigenvalues_sym(&g).unwrap();
    let cut = 1e-9 * eigs[0].abs().max(1.0);
    Esd::new(
        eigs.into_iter()
            .map(|v| if v.abs() < cut { 0.0 } else { v })
            .collect(),
    )
}

fn trace_gram(a: &DMatrix<f64>) -> f64 {
    a.norm_squared()
}

fn inequality_suite() -> Outcome {
    let mut rng = rng_from_seed(7);
    let instances = 100;
    let (mut rank_bad, mut levy_bad, mut l4_bad, mut trace_bad) = (0, 0, 0, 0);

    for _ in 0..instances {
        let n = rng.random_range(5..60);
        let t = rng.random_range(n / 2 + 1..3 * n);
        let a = gaussian(&mut rng, n, t, 1.0 / (t as f64).sqrt());
        let r = rng.random_range(0..=n.min(t) / 3);
        let b = &a + gaussian(&mut rng, n, r, 1.0) * gaussian(&mut rng, r, t, 1.0 / t as f64);
        let k = kolmogorov_distance(&gram_esd(&a), &gram_esd(&b));
        if k > r as f64 / n as f64 + 1e-12 {
            rank_bad += 1;
        }
    }

    for i in 0..instances {
        let n = rng.random_range(5..60);
        let t = rng.random_range(n..4 * n);
        let fa = gram_esd(&gaussian(&mut rng, n, t, 1.0 / (t as f64).sqrt()));
        let (k, l) = if i % 2 == 0 {
            let scale = rng.random_range(0.5..2.0) / (t as f64).sqrt();
            let fb = gram_esd(&gaussian(&mut rng, n, t, scale));
            (kolmogorov_distance(&fa, &fb), levy_distance(&fa, &fb))
        } else {
            let mp = MpParams::new(t as f64 / n as f64, rng.random_range(0.5..1.5)).unwrap();
            (kolmogorov_distance(&fa, &mp), levy_distance(&fa, &mp))
        };
        if l > k + LEVY_TOL {
            levy_bad += 1;
        }
    }

    for i in 0..instances {
        let n = rng.random_range(5..50);
        let t = rng.random_range(n..4 * n);
        let (a, b) = if i % 2 == 0 {
            let a = gaussian(&mut rng, n, t, 1.0 / (t as f64).sqrt());
            let eps = 10f64.powf(rng.random_range(-3.0..0.0));
            let b = &a + gaussian(&mut rng, n, t, eps / (t as f64).sqrt());
            (a, b)
        } else {
            let rho = rng.random_range(0.0..0.9);
            let x =
                sample_equicorr(&EquiCorrSpec::standard(rho).unwrap(), n, t, rng.random()).unwrap();
            (x.normalized_rows().unwrap(), x.centered_scaled())
        };
        let bound =
            2.0 / n as f64 * (trace_gram(&a) + trace_gram(&b)) / n as f64 * trace_gram(&(&a - &b));
        let l = (levy_distance(&gram_esd(&a), &gram_esd(&b)) - LEVY_TOL).max(0.0);
        if l.powi(4) > bound * (1.0 + 1e-12) {
            l4_bad += 1;
        }
    }

    // ‖ℓ‖² = 0.1 keeps the O(‖ℓ‖²/√T) factor fluctuation of the trace small.
    let spec = FactorModelSpec::new(LoadingRule::constant(vec![0.2, 0.06f64.sqrt()]), 0.9)
        .unwrap()
        .with_noise(Noise::Normal, Noise::Uniform);
    let (sigma2, _) = limiting_params(&spec);
    let mut worst = 0.0f64;
    for rep in 0..instances {
        let x = sample_factor(&spec, 400, 1000, mix_seed(7, 1, rep as u64)).unwrap();
        let dev = (sample_covariance(&x).trace() / 400.0 - sigma2).abs();
        worst = worst.max(dev);
        if dev > 0.02 {
            trace_bad += 1;
        }
    }

    outcome(
        rank_bad + levy_bad + l4_bad + trace_bad == 0,
        format!(
            "violations over {instances} instances each: rank {rank_bad}, levy<=K {levy_bad}, \
             levy^4 trace {l4_bad}, trace limit {trace_bad} (max |Tr S/N - {sigma2:.3}| = {worst:.4}, tol 0.02)"
        ),
    )
}

fn bbp_samples(spike: f64, seed: u64) -> Vec<f64> {
    let (n, t) = (400, 800);
    let rho = (spike - 1.0) / (n as f64 - 1.0);
    let mut cfg = ExperimentConfig::new(
        Statistic::Lambda1S,
        vec![GridPoint {
            n,
            t,
            rho: Some(rho),
            model: None,
        }],
        1000,
        seed,
    );
    cfg.workers = workers();
    let out = run_experiment(&cfg).unwrap();
    assert!(out.errors.is_empty());
    out.rows.iter().map(|r| r.value).collect()
}

fn bbp_separation() -> Outcome {
    let (q, t) = (2.0, 800);
    let normalize =
        |v: &[f64], (c, s): (f64, f64)| -> Vec<f64> { v.iter().map(|l| (l - c) / s).collect() };

    let sup = bbp_classify(3.0, q, t).unwrap();
    let ks_super = ks_normal(&normalize(
        &bbp_samples(3.0, 8),
        spike_normalization(3.0, q, t),
    ))
    .unwrap();
    let sub = bbp_classify(1.2, q, t).unwrap();
    let ks_sub = ks_normal(&normalize(&bbp_samples(1.2, 9), edge_normalization(q, t))).unwrap();
    outcome(
        sup.regime == Regime::Supercritical
            && sub.regime == Regime::Subcritical
            && ks_super <= 0.08
            && ks_sub >= 0.10,
        format!(
            "Q=2 T=800 1000 reps: spike 3 ({:?}) KS = {ks_super:.4} (<= 0.08); \
             spike 1.2 ({:?}) KS = {ks_sub:.4} (>= 0.10)",
            sup.regime, sub.regime
        ),
    )
}

fn determinism() -> Outcome {
    let mut mismatches = Vec::new();
    let grid = vec![
        GridPoint {
            n: 30,
            t: 75,
            rho: Some(0.4),
            model: None,
        },
        GridPoint {
            n: 20,
            t: 60,
            rho: Some(0.0),
            model: None,
        },
    ];
    for stat in [
        Statistic::Lambda1COverN,
        Statistic::Lambda1S,
        Statistic::EsdKDistance,
        Statistic::ScalingResidual,
        Statistic::CltNormalized,
    ] {
        let mut cfg = ExperimentConfig::new(stat, grid.clone(), 16, 99);
        let bits = |cfg: &ExperimentConfig| {
            let out = run_experiment(cfg).unwrap();
            (
                out.rows
                    .iter()
                    .map(|r| (r.value.to_bits(), r.seed_used))
                    .collect::<Vec<_>>(),
                out.errors,
            )
        };
        cfg.workers = 1;
        let a = bits(&cfg);
        let a2 = bits(&cfg);
        cfg.workers = 8;
        let b = bits(&cfg);
        if a != a2 || a != b {
            mismatches.push(stat.name().to_string());
        }
    }
    if clt_check(40, 80, 0.5, 50, 3, 1).unwrap() != clt_check(40, 80, 0.5, 50, 3, 8).unwrap() {
        mismatches.push("clt_check".into());
    }
    if bbp_sweep(2.0, &[40, 60], 3.0, 1.0, 20, 3, 1).unwrap()
        != bbp_sweep(2.0, &[40, 60], 3.0, 1.0, 20, 3, 8).unwrap()
    {
        mismatches.push("bbp_sweep".into());
    }
    if scaling_check(40, 100, 0.5, 3, 50).unwrap().to_bits()
        != scaling_check(40, 100, 0.5, 3, 50).unwrap().to_bits()
    {
        mismatches.push("scaling_check".into());
    }
    let spec = two_factor_model();
    if sample_factor(&spec, 20, 40, 5).unwrap().values()
        != sample_factor(&spec, 20, 40, 5).unwrap().values()
    {
        mismatches.push("sample_factor".into());
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "all seeded pipelines bit-identical across reruns and workers 1 vs 8".into()
        } else {
            format!("mismatch in {}", mismatches.join(", "))
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("MP normalization and mean", mp_normalization),
        ("LSD scaling", lsd_scaling),
        ("consistency of lambda1(C)/N", consistency),
        ("largest-eigenvalue CLT", clt),
        ("scaling residual", scaling_residual),
        ("Table 1 regression", table1_regression),
        ("inequality property suite", inequality_suite),
        ("phase-transition regime separation", bbp_separation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
