//! Acceptance checks. Each test prints one `PASS`/`FAIL` line with the
//! measured quantities, then asserts.

mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use instability_core::analysis::{bootstrap_correlations, BootstrapConfig};
use instability_core::linalg::Matrix;
use instability_core::prediction::{
    agreement_stats, fleiss_kappa_instability, pairwise_disagreement, prediction_report, PredictionSet,
};
use instability_core::representation::{
    cca_distance, center, cka_distance, op_distance, representation_profile, svcca_distance, LayerRepresentation,
    DEFAULT_SVCCA_THRESHOLD,
};
use instability_core::stats::spearman_rho;
use instability_core::synth::{generate_ensemble, SynthConfig};
use instability_core::validity::{run_split_comparison, split_runs, subsample_consistency, SubsampleConfig};
use instability_core::{Measure, RepresentationOptions};
use instab::oracle;
use instab::{load_bundle, save_bundle};
use nalgebra::DMatrix;
use rand::Rng;

use common::{random_bundle, random_matrix, rng, snapshot, BundleShape};

// Written to the stdout handle directly so the line survives test output
// capture and shows up in plain `cargo test` runs.
fn report(id: u32, title: &str, ok: bool, detail: &str) {
    let line = format!("criterion {id:02} {} {title}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

#[test]
fn c01_kappa_disagreement_identity() {
    let mut r = rng(101);
    let start = Instant::now();
    let (mut worst, mut checked, mut degenerate) = (0.0f64, 0, 0);
    for _ in 0..1000 {
        let m = r.random_range(2..=10);
        let n = r.random_range(1..=50);
        let k = r.random_range(1..=5);
        let labels: Vec<Vec<u32>> = (0..m).map(|_| (0..n).map(|_| r.random_range(0..k as u32)).collect()).collect();
        let set = PredictionSet::new(&labels, k).unwrap();
        let pwd = pairwise_disagreement(&set).unwrap();
        let stats = agreement_stats(&set).unwrap();
        match fleiss_kappa_instability(&set) {
            Ok(kappa) => {
                worst = worst.max((kappa * (1.0 - stats.p_epsilon) - pwd).abs());
                checked += 1;
            }
            Err(_) => {
                // every prediction is one class: kappa undefined, no disagreement
                assert_eq!(pwd, 0.0);
                degenerate += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(5);
    report(
        1,
        "kappa-disagreement identity",
        ok,
        &format!("max |I_k(1-p_e) - I_pwd| = {worst:.2e} over {checked} sets ({degenerate} single-class sets skipped), {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn c02_oracle_equivalence() {
    let mut r = rng(202);
    let options = RepresentationOptions::default();
    let start = Instant::now();
    let (mut pred_exact, mut jsd_err, mut rep_err, mut sd_err) = (true, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let shape = BundleShape::random(&mut r, 24, 6, 12, 2);
        let bundle = random_bundle(&mut r, &shape);
        let main = prediction_report(&bundle).unwrap();
        let reference = oracle::oracle_measures(&bundle, &options);
        pred_exact &= main.get(Measure::Pwd) == reference.prediction.get(&Measure::Pwd).copied();
        pred_exact &= main.get(Measure::Kappa) == reference.prediction.get(&Measure::Kappa).copied();
        jsd_err = jsd_err.max((main.get(Measure::Jsd).unwrap() - reference.prediction[&Measure::Jsd]).abs());
        sd_err = sd_err.max((main.get(Measure::Sd).unwrap() - reference.prediction[&Measure::Sd]).abs());
        let profiles = representation_profile(&bundle, &Measure::REPRESENTATION, None, &options).unwrap();
        for p in profiles {
            for (a, b) in p.scores.iter().zip(&reference.profiles[&p.measure]) {
                rep_err = rep_err.max((a - b).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = pred_exact && jsd_err <= 1e-12 && rep_err <= 1e-8 && elapsed < Duration::from_secs(60);
    report(
        2,
        "oracle equivalence",
        ok,
        &format!(
            "pwd/kappa exact: {pred_exact}, jsd err {jsd_err:.2e}, sd err {sd_err:.2e}, cka/op/svcca err {rep_err:.2e}, {elapsed:.2?}"
        ),
    );
    assert!(ok);
}

fn random_orthogonal(r: &mut rand_chacha::ChaCha8Rng, size: usize) -> Matrix {
    let a = common::random_matrix(r, size, size);
    let q = DMatrix::from_row_slice(size, size, a.as_slice()).qr().q();
    let rows: Vec<Vec<f64>> = (0..size).map(|i| q.row(i).iter().copied().collect()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Matrix::from_rows(&refs).unwrap()
}

type Distance = fn(&LayerRepresentation, &LayerRepresentation) -> f64;

fn distances() -> [(&'static str, Distance, f64); 4] {
    [
        ("op", |x, y| op_distance(x, y).unwrap(), 1e-10),
        ("cka", |x, y| cka_distance(x, y).unwrap(), 1e-10),
        ("cca", |x, y| cca_distance(x, y).unwrap(), 1e-8),
        ("svcca", |x, y| svcca_distance(x, y, DEFAULT_SVCCA_THRESHOLD).unwrap(), 1e-8),
    ]
}

#[test]
fn c03_representation_invariances() {
    let mut r = rng(303);
    let mut worst = [[0.0f64; 4]; 4]; // [measure][self, orthogonal, scaling, symmetry]
    for case in 0..50 {
        let (n, e) = if case % 2 == 0 {
            (r.random_range(5..=12), r.random_range(14..=24))
        } else {
            (r.random_range(20..=40), r.random_range(2..=10))
        };
        let x = random_matrix(&mut r, n, e);
        let y = random_matrix(&mut r, n, e);
        let (qx, qy) = (random_orthogonal(&mut r, e), random_orthogonal(&mut r, e));
        let (a, b) = (r.random_range(0.1..10.0), r.random_range(0.1..10.0));
        let cx = center(&x).unwrap();
        let cy = center(&y).unwrap();
        let rx = center(&x.mul(&qx)).unwrap();
        let ry = center(&y.mul(&qy)).unwrap();
        let sx = center(&x.scaled(a)).unwrap();
        let sy = center(&y.scaled(b)).unwrap();
        for (i, (_, d, _)) in distances().iter().enumerate() {
            let base = d(&cx, &cy);
            worst[i][0] = worst[i][0].max(d(&cx, &cx).abs());
            worst[i][1] = worst[i][1].max((d(&rx, &ry) - base).abs());
            if i < 2 {
                worst[i][2] = worst[i][2].max((d(&sx, &sy) - base).abs());
            }
            worst[i][3] = worst[i][3].max((d(&cy, &cx) - base).abs());
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, _, self_tol)) in distances().iter().enumerate() {
        let w = worst[i];
        ok &= w[0] <= *self_tol && w[1] <= 1e-8 && w[2] <= 1e-8 && w[3] <= 1e-10;
        parts.push(format!(
            "{name}: self {:.1e} orth {:.1e} scale {:.1e} sym {:.1e}",
            w[0], w[1], w[2], w[3]
        ));
    }
    report(3, "representation invariances", ok, &parts.join("; "));
    assert!(ok);
}

#[test]
fn c04_one_dimensional_closed_forms() {
    let mut r = rng(404);
    let (mut cka_err, mut op_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = r.random_range(3..=40);
        let x: Vec<f64> = (0..n).map(|_| common::gaussian(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|v| r.random_range(-1.0..1.0) * v + common::gaussian(&mut r)).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&x), mean(&y));
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let rho = sxy / (sxx * syy).sqrt();
        let cx = center(&Matrix::new(n, 1, x).unwrap()).unwrap();
        let cy = center(&Matrix::new(n, 1, y).unwrap()).unwrap();
        cka_err = cka_err.max(((1.0 - cka_distance(&cx, &cy).unwrap()) - rho * rho).abs());
        op_err = op_err.max(((1.0 - op_distance(&cx, &cy).unwrap()) - rho.abs()).abs());
    }
    let ok = cka_err <= 1e-10 && op_err <= 1e-10;
    report(
        4,
        "1-D closed forms",
        ok,
        &format!("max |cka_sim - rho^2| = {cka_err:.2e}, max |op_sim - |rho|| = {op_err:.2e}"),
    );
    assert!(ok);
}

#[test]
fn c05_monotone_in_noise() {
    let sigmas: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (rung, &sigma) in sigmas.iter().enumerate() {
        let bundle = generate_ensemble(&SynthConfig {
            n: 256,
            layer_widths: vec![32; 4],
            m: 10,
            noise_scale: sigma,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let pred = prediction_report(&bundle).unwrap();
        let mut row: Vec<(String, f64)> = Measure::PREDICTION
            .iter()
            .map(|&m| (m.name().to_string(), pred.get(m).unwrap()))
            .collect();
        for p in representation_profile(&bundle, &Measure::REPRESENTATION, None, &Default::default()).unwrap() {
            for (l, v) in p.layers.iter().zip(&p.scores) {
                row.push((format!("{}@{l}", p.measure), *v));
            }
        }
        if rung == 0 {
            columns = row.iter().map(|(name, _)| (name.clone(), Vec::new())).collect();
        }
        for ((_, col), (_, v)) in columns.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let mut min_rho = f64::INFINITY;
    let mut weakest = String::new();
    let mut drops = 0;
    for (name, col) in &columns {
        let rho = spearman_rho(&sigmas, col).unwrap_or(f64::NEG_INFINITY);
        drops += col.windows(2).filter(|w| w[1] < w[0]).count();
        if rho < min_rho {
            min_rho = rho;
            weakest = name.clone();
        }
    }
    let ok = min_rho >= 0.9 && drops == 0;
    report(
        5,
        "monotone in noise",
        ok,
        &format!(
            "min Spearman {min_rho:.3} ({weakest}) over {} series; {drops} adjacent-rung decreases",
            columns.len()
        ),
    );
    assert!(ok);
}

#[test]
fn c06_failed_runs_less_unstable() {
    let config = SynthConfig {
        n: 128,
        layer_widths: vec![16; 4],
        m: 20,
        noise_scale: 0.3,
        failed_fraction: 0.45,
        failed_update_scale: 0.1,
        seed: 6,
        ..Default::default()
    };
    let bundle = generate_ensemble(&config).unwrap();
    let constructed: Vec<String> = bundle
        .runs()
        .iter()
        .filter(|r| r.tags["kind"] == "failed")
        .map(|r| r.run_id.clone())
        .collect();
    let split = split_runs(&bundle);
    let recovered = split.failed == constructed;
    let cmp = run_split_comparison(&bundle, &[Measure::Cka, Measure::Op], &Default::default()).unwrap();
    let mut below = true;
    let mut gaps = Vec::new();
    for p in &cmp.profiles {
        below &= p.failed.iter().zip(&p.successful).all(|(f, s)| f < s);
        let gap = p.failed.iter().zip(&p.successful).map(|(f, s)| s - f).fold(f64::INFINITY, f64::min);
        gaps.push(format!("{} min gap {gap:.4}", p.measure));
    }
    let ok = recovered && below;
    report(
        6,
        "failed runs less unstable",
        ok,
        &format!(
            "{} of {} failed recovered exactly: {recovered}; failed below successful at every layer: {below} ({})",
            split.failed.len(),
            constructed.len(),
            gaps.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn c07_subsample_consistency() {
    let bundle = generate_ensemble(&SynthConfig {
        n: 512,
        layer_widths: vec![32; 4],
        m: 20,
        noise_scale: 0.7,
        seed: 7,
        ..Default::default()
    })
    .unwrap();
    let half = subsample_consistency(
        &bundle,
        &SubsampleConfig {
            rate: 0.5,
            count: 4,
            seed: 7,
            ..Default::default()
        },
    )
    .unwrap();
    let full = subsample_consistency(
        &bundle,
        &SubsampleConfig {
            rate: 1.0,
            count: 4,
            seed: 7,
            ..Default::default()
        },
    )
    .unwrap();
    let cvs: Vec<(Measure, f64)> = half
        .measures
        .iter()
        .map(|m| (m.measure, m.max_coefficient_of_variation()))
        .collect();
    let all_small = cvs.iter().all(|(_, cv)| *cv < 0.05);
    let zero = full.measures.iter().all(|m| m.max_coefficient_of_variation() == 0.0);
    let ok = all_small && zero && half.measures.len() == 7;
    let parts: Vec<String> = cvs.iter().map(|(m, cv)| format!("{m} {:.2}%", cv * 100.0)).collect();
    report(
        7,
        "subsample consistency",
        ok,
        &format!("max CV per measure at rate 0.5: {}; rate 1.0 dispersion exactly 0: {zero}", parts.join(", ")),
    );
    assert!(ok);
}

#[test]
fn c08_granularity_ordering() {
    let bundle = generate_ensemble(&SynthConfig {
        n: 200,
        layer_widths: vec![64; 2],
        m: 10,
        noise_scale: 0.3,
        failed_fraction: 0.5,
        failed_update_scale: 0.1,
        failed_blend: 0.0,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let start = Instant::now();
    let result = bootstrap_correlations(
        &bundle,
        &BootstrapConfig {
            iterations: 1000,
            seed: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let elapsed = start.elapsed();
    let pwd_kappa = result.correlation.get(Measure::Pwd, Measure::Kappa);
    let sd_cka = result.correlation.get(Measure::Sd, Measure::Cka);
    let ok = match (pwd_kappa, sd_cka) {
        (Some(a), Some(b)) => a >= 0.95 && a > b,
        _ => false,
    } && elapsed < Duration::from_secs(60);
    report(
        8,
        "granularity ordering",
        ok,
        &format!("r(pwd, kappa) = {pwd_kappa:?}, r(sd, cka) = {sd_cka:?}, B = 1000 in {elapsed:.2?}"),
    );
    assert!(ok);
}

fn instab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_instab")).args(args).output().unwrap()
}

#[test]
fn c09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut ok = true;
    let mut failures = Vec::new();

    // synth twice into separate directories
    let synth = |out: &str, threads: &str| {
        instab(&[
            "synth", "--n", "64", "--e", "8,8,8", "--m", "10", "--noise", "0.3", "--failed-fraction", "0.3",
            "--seed", "9", "--threads", threads, "--out", out,
        ])
    };
    assert!(synth(&p("a"), "8").status.success());
    assert!(synth(&p("b"), "1").status.success());
    if snapshot(Path::new(&p("a"))) != snapshot(Path::new(&p("b"))) {
        ok = false;
        failures.push("synth".to_string());
    }
    assert!(synth(&p("c"), "8").status.success());
    assert!(instab(&["synth", "--n", "64", "--e", "8,8,8", "--m", "10", "--noise", "0.6", "--seed", "10", "--out", &p("d")])
        .status
        .success());

    let bundle = p("a");
    let commands: Vec<Vec<String>> = [
        vec!["measure", &bundle],
        vec!["validity", "convergent", &bundle],
        vec!["validity", "subsample", &bundle, "--seed", "3"],
        vec!["validity", "runs", &bundle],
        vec!["rank", &bundle, &p("c"), &p("d")],
        vec!["bootstrap", &bundle, "--iters", "200", "--seed", "4", "--emit-scores"],
    ]
    .iter()
    .map(|c| c.iter().map(|s| s.to_string()).collect())
    .collect();
    for cmd in &commands {
        let mut outputs = Vec::new();
        for threads in ["8", "8", "1"] {
            let mut args: Vec<&str> = cmd.iter().map(String::as_str).collect();
            args.extend(["--threads", threads]);
            let out = instab(&args);
            assert!(out.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
            outputs.push(out.stdout);
        }
        if outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            ok = false;
            failures.push(cmd[..2].join(" "));
        }
    }
    // csv rendering
    let csv = |out: &str| {
        instab(&["bootstrap", &bundle, "--iters", "50", "--emit-scores", "--format", "csv", "--threads", "8", "--out", out])
    };
    assert!(csv(&p("csv1")).status.success());
    assert!(csv(&p("csv2")).status.success());
    if snapshot(Path::new(&p("csv1"))) != snapshot(Path::new(&p("csv2"))) {
        ok = false;
        failures.push("bootstrap csv".into());
    }
    report(
        9,
        "determinism",
        ok,
        &format!(
            "{} commands x 3 invocations (--threads 8, 8, 1) plus synth and csv output; mismatches: {failures:?}",
            commands.len()
        ),
    );
    assert!(ok);
}

#[test]
fn c10_format_round_trip() {
    let mut r = rng(1010);
    let root = tempfile::tempdir().unwrap();
    let (mut identical, mut equal) = (0, 0);
    for i in 0..100 {
        let mut shape = BundleShape::random(&mut r, 30, 5, 6, 3);
        shape.probabilities = r.random_bool(0.7);
        let bundle = random_bundle(&mut r, &shape);
        let first = root.path().join(format!("{i}-a"));
        let second = root.path().join(format!("{i}-b"));
        save_bundle(&bundle, &first).unwrap();
        let loaded = load_bundle(&first).unwrap();
        if loaded == bundle {
            equal += 1;
        }
        save_bundle(&loaded, &second).unwrap();
        if snapshot(&first) == snapshot(&second) {
            identical += 1;
        }
    }
    let ok = identical == 100 && equal == 100;
    report(
        10,
        "format round trip",
        ok,
        &format!("{identical}/100 byte-identical rewrites, {equal}/100 loaded bundles equal the originals"),
    );
    assert!(ok);
}
