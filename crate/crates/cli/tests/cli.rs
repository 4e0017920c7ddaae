use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn corrspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).trim()).unwrap()
}

/// Tiny returns table: two sectors with distinct common factors.
fn write_returns(dir: &Path) -> (String, String) {
    let mut text = String::from("Date,A1,A2,A3,B1,B2\n");
    for d in 0..60u32 {
        let f = ((d * 7919) % 97) as f64 / 97.0 - 0.5;
        let g = ((d * 104_729) % 89) as f64 / 89.0 - 0.5;
        let noise = |k: u32| ((d * 31 + k * 17) % 13) as f64 / 130.0 - 0.05;
        let day = 1 + d % 28;
        let month = 1 + d / 28;
        text.push_str(&format!(
            "2021-{month:02}-{day:02},{},{},{},{},{}\n",
            f + noise(1),
            f + noise(2),
            f + noise(3),
            g + noise(4),
            g + noise(5)
        ));
    }
    let returns = dir.join("returns.csv");
    let sectors = dir.join("sectors.csv");
    fs::write(&returns, text).unwrap();
    fs::write(
        &sectors,
        "ticker,sector\nA1,Alpha\nA2,Alpha\nA3,Alpha\nB1,Beta\nB2,Beta\n",
    )
    .unwrap();
    (
        returns.to_str().unwrap().to_string(),
        sectors.to_str().unwrap().to_string(),
    )
}

#[test]
fn mp_curve_rows() {
    let o = corrspec(&["mp-curve", "--q", "1", "--sigma2", "1", "--points", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,pdf,cdf");
    assert_eq!(lines.len(), 6);
    let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 4.4).abs() < 1e-12);
    assert_eq!(last[2], 1.0);
}

#[test]
fn missing_input_is_a_domain_error() {
    let o = corrspec(&["estimate-rho", "--input", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("missing.csv"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        corrspec(&["mp-curve", "--q", "1", "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(corrspec(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(corrspec(&["mp-curve"]).status.code(), Some(2));
}

#[test]
fn invalid_parameters_exit_1() {
    let o = corrspec(&["mp-curve", "--q=-1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = corrspec(&[
        "clt-check",
        "--n",
        "10",
        "--t",
        "20",
        "--rho",
        "0",
        "--reps",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_everywhere() {
    for args in [
        vec!["--help"],
        vec!["mp-curve", "--help"],
        vec!["simulate", "--help"],
        vec!["estimate-rho", "--help"],
        vec!["clt-check", "--help"],
        vec!["scaling-check", "--help"],
        vec!["bbp-sweep", "--help"],
        vec!["clip", "--help"],
        vec!["finance", "--help"],
        vec!["finance", "summarize", "--help"],
        vec!["finance", "regress", "--help"],
        vec!["finance", "heatmap", "--help"],
    ] {
        let o = corrspec(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert!(stdout(&o).contains("Usage"), "{args:?}");
    }
    let help = stdout(&corrspec(&["bbp-sweep", "--help"]));
    for flag in [
        "--q",
        "--t-list",
        "--c",
        "--gamma",
        "--reps",
        "--seed",
        "--workers",
    ] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn clt_check_is_reproducible() {
    let args = [
        "clt-check",
        "--n",
        "30",
        "--t",
        "60",
        "--rho",
        "0.5",
        "--reps",
        "40",
        "--seed",
        "7",
    ];
    let a = corrspec(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = corrspec(&[&args[..], &["--workers", "4"]].concat());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    for key in ["mean", "var", "ks"] {
        assert!(v[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert_eq!(v["reps"], 40);
}

#[test]
fn scaling_check_and_bbp_sweep() {
    let o = corrspec(&[
        "scaling-check",
        "--n",
        "40",
        "--t",
        "100",
        "--rho",
        "0.5",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o)["residual"].as_f64().unwrap();
    assert!(r > 0.0 && r < 1.0);

    let o = corrspec(&[
        "bbp-sweep",
        "--q",
        "2",
        "--t-list",
        "40,80",
        "--c",
        "3",
        "--gamma",
        "1",
        "--reps",
        "20",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["n"], 20);
    assert_eq!(rows[1]["n"], 40);
    assert_eq!(rows[0]["regime"], "supercritical");
    assert!(rows[0]["ks_normal_sub"].as_f64().is_some());
}

#[test]
fn simulate_formats_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        "statistic = \"lambda1_C_over_N\"\nreps = 4\nmaster_seed = 5\n\n\
         [[grid]]\nn = 10\nt = 25\nrho = 0.3\n\n[[grid]]\nn = 12\nt = 30\nmodel = \"f\"\n\n\
         [models.f]\nkind = \"factor\"\npsi1 = 0.5\nloadings = { base = [0.5, 0.5] }\n",
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let run = |workers: &str, format: &str, name: &str| {
        let out = dir.path().join(name);
        let o = corrspec(&[
            "simulate",
            "--config",
            cfg,
            "--out",
            out.to_str().unwrap(),
            "--format",
            format,
            "--workers",
            workers,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out).unwrap()
    };
    let a = run("1", "csv", "a.csv");
    let b = run("8", "csv", "b.csv");
    assert_eq!(a, b);
    assert_eq!(a.lines().next(), Some("n,t,rho,rep,statistic,value,seed"));
    assert_eq!(a.lines().count(), 9);
    let j = run("2", "jsonl", "c.jsonl");
    assert_eq!(j.lines().count(), 8);
    let first: serde_json::Value = serde_json::from_str(j.lines().next().unwrap()).unwrap();
    assert_eq!(first["statistic"], "lambda1_C_over_N");

    let o = corrspec(&["simulate", "--config", cfg, "--seed", "6"]);
    assert!(o.status.success());
    assert_ne!(stdout(&o), a);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "statistic = 3\n").unwrap();
    let o = corrspec(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_rho_and_clip() {
    let dir = tempfile::tempdir().unwrap();
    let (returns, _) = write_returns(dir.path());
    let o = corrspec(&["estimate-rho", "--input", &returns]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["n"], 5);
    assert_eq!(v["t"], 60);
    let rho = v["rho_hat"].as_f64().unwrap();
    assert!(rho > 0.2 && rho <= 1.0);

    let out = dir.path().join("clipped.csv");
    let o = corrspec(&[
        "clip",
        "--input",
        &returns,
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with(",A1,A2,A3,B1,B2\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn finance_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (returns, sectors) = write_returns(dir.path());
    let summary = dir.path().join("summary.csv");
    let o = corrspec(&[
        "finance",
        "summarize",
        "--returns",
        &returns,
        "--sectors",
        &sectors,
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&summary).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sector,n,n_over_t,lambda1_over_n");
    assert!(lines[1].starts_with("Alpha,3,0.05,"));
    assert!(lines[3].starts_with("total,5,"));

    let rhobar = dir.path().join("rhobar.csv");
    fs::write(
        &rhobar,
        "sector,rho_bar,extra\nAlpha,0.5,x\nBeta,0.7,y\ntotal,0.3,z\n",
    )
    .unwrap();
    let o = corrspec(&[
        "finance",
        "regress",
        "--summary",
        summary.to_str().unwrap(),
        "--rhobar",
        rhobar.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["n_points"], 3);
    assert!(v["slope"].as_f64().unwrap().is_finite());

    let heat = dir.path().join("heat.csv");
    let o = corrspec(&[
        "finance",
        "heatmap",
        "--returns",
        &returns,
        "--sectors",
        &sectors,
        "--sector",
        "Alpha",
        "--out",
        heat.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&heat).unwrap().lines().count(), 4);

    let o = corrspec(&[
        "finance",
        "heatmap",
        "--returns",
        &returns,
        "--sectors",
        &sectors,
        "--sector",
        "Gamma",
        "--out",
        heat.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Gamma"));
}
