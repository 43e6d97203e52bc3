//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Set `GAITAUTH_HAR_DIR` to the unpacked UCI HAR directory to run the
//! real-data ordering check.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use gaitauth::attackeval::{compute_metrics, counts_from_scores, random_vector_attack, zero_effort_eval, ConfusionCounts};
use gaitauth::betagen::{sample_beta_noise, BetaNoiseParams};
use gaitauth::classifiers::{Family, Scorer};
use gaitauth::dataio::{ColumnSpec, FeatureTable, Origin, RowLabel};
use gaitauth::harness::config::{ExperimentConfig, Variant};
use gaitauth::harness::report::{summarize, write_run, DatasetSummary};
use gaitauth::harness::run::{run_experiment, RunOptions};
use gaitauth::ictgan::{train_ictgan, TrainConfig};
use gaitauth::seed;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

const FAMILIES: [Family; 4] = [Family::Linsvm, Family::Rbfsvm, Family::Rndf, Family::Ffnn];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

fn within_budget(o: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    let ok = elapsed <= budget;
    let mut detail = format!("{}; {:.1}s (budget {}s)", o.detail, elapsed.as_secs_f64(), budget.as_secs());
    if !ok {
        detail.push_str(" over budget");
    }
    Outcome::new(o.passed && ok, detail)
}

// ---------------------------------------------------------------------------
// 1. metric arithmetic

/// Score is the first coordinate, so rows carry their own scores.
struct Identity;

impl Scorer for Identity {
    fn feature_dim(&self) -> usize {
        1
    }
    fn score_unchecked(&self, x: &[f64]) -> f64 {
        x[0]
    }
}

fn brute_force_counts(genuine: &[f64], impostor: &[f64], t: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &s in genuine {
        if s >= t { c.ta += 1 } else { c.fr += 1 }
    }
    for &s in impostor {
        if s >= t { c.fa += 1 } else { c.tr += 1 }
    }
    c
}

fn metric_arithmetic() -> Outcome {
    let m = compute_metrics(&ConfusionCounts { fa: 3, tr: 97, fr: 10, ta: 90 }).unwrap();
    if (m.far, m.frr, m.hter) != (0.03, 0.10, 0.065) {
        return Outcome::new(false, format!("fixed table gave {m:?}"));
    }
    let mut rng = seed::rng(101);
    for table in 0..1000 {
        // Scores on a 1/20 grid so ties with the threshold occur.
        let (ng, ni) = (rng.random_range(1..60), rng.random_range(1..60));
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(0..=20) as f64 / 20.0).collect() };
        let (genuine, impostor) = (draw(ng), draw(ni));
        let t = rng.random_range(0..=20) as f64 / 20.0;
        let oracle = brute_force_counts(&genuine, &impostor, t);
        let g = Array2::from_shape_vec((ng, 1), genuine.clone()).unwrap();
        let i = Array2::from_shape_vec((ni, 1), impostor.clone()).unwrap();
        let via_model = zero_effort_eval(&Identity, g.view(), i.view(), t).unwrap();
        if via_model != oracle || counts_from_scores(&genuine, &impostor, t) != oracle {
            return Outcome::new(false, format!("table {table}: {via_model:?} vs oracle {oracle:?}"));
        }
        let r = compute_metrics(&via_model).unwrap();
        let far = oracle.fa as f64 / (oracle.fa + oracle.tr) as f64;
        let frr = oracle.fr as f64 / (oracle.fr + oracle.ta) as f64;
        if r.far != far || r.frr != frr || r.hter != (far + frr) / 2.0 {
            return Outcome::new(false, format!("table {table}: rates {r:?}"));
        }
    }
    Outcome::new(true, "fixed table exact; 1000 random tables agree")
}

// ---------------------------------------------------------------------------
// 2. random-vector AR soundness

struct BoxAcceptor {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxAcceptor {
    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

impl Scorer for BoxAcceptor {
    fn feature_dim(&self) -> usize {
        self.lo.len()
    }
    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let inside = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h);
        if inside { 1.0 } else { 0.0 }
    }
}

fn ar_soundness() -> Outcome {
    let n = 100_000;
    let mut rng = seed::rng(202);
    let mut worst: f64 = 0.0;
    for b in 0..20u64 {
        let d = rng.random_range(3..=20);
        // Target volume in [0.02, 0.6], spread unevenly over the sides.
        let target: f64 = rng.random_range(0.02..0.6);
        let weights: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        let wsum: f64 = weights.iter().sum();
        let sides: Vec<f64> = weights.iter().map(|w| target.powf(w / wsum)).collect();
        let lo: Vec<f64> = sides.iter().map(|s| rng.random_range(0.0..=1.0 - s)).collect();
        let hi: Vec<f64> = lo.iter().zip(&sides).map(|(l, s)| l + s).collect();
        let acceptor = BoxAcceptor { lo, hi };
        let v = acceptor.volume();
        let est = random_vector_attack(&acceptor, n, d, 0.5, seed::derive_index(203, "box", b)).unwrap();
        let sigma = (v * (1.0 - v) / n as f64).sqrt();
        let z = (est.estimate - v).abs() / sigma;
        worst = worst.max(z);
        if z >= 4.0 {
            return Outcome::new(false, format!("box {b} (d={d}): estimate {} vs volume {v}, {z:.2} sigma", est.estimate));
        }
    }
    Outcome::new(true, format!("20 boxes, worst deviation {worst:.2} sigma"))
}

// ---------------------------------------------------------------------------
// 3. beta noise moments

fn beta_moments(a: f64, b: f64) -> (f64, f64, f64) {
    let mean = a / (a + b);
    let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
    // Fourth central moment of Beta(a, b).
    let s = a + b;
    let m4 = 3.0 * a * b * (a * b * (s - 6.0) + 2.0 * s * s) / (s.powi(4) * (s + 1.0) * (s + 2.0) * (s + 3.0));
    (mean, var, m4)
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn beta_noise_moments() -> Outcome {
    let mus = vec![0.1, 0.2, 0.5, 0.8, 0.9];
    let n = 100_000;
    let params = BetaNoiseParams::from_means(mus.clone()).unwrap();
    let draws = sample_beta_noise(&params, n, 303).unwrap();
    let mut notes = Vec::new();
    for (j, &mu) in mus.iter().enumerate() {
        let alpha = (0.5 - mu).abs() + 0.5;
        let (m, v, m4) = beta_moments(alpha, 0.5);
        let expect_mean = if mu > 0.5 { 1.0 - m } else { m };
        let col = draws.column(j);
        let mean = col.mean().unwrap();
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (v / n as f64).sqrt();
        let se_var = ((m4 - v * v) / n as f64).sqrt();
        let zm = (mean - expect_mean).abs() / se_mean;
        let zv = (var - v).abs() / se_var;
        if zm >= 3.0 || zv >= 3.0 {
            return Outcome::new(false, format!("mu {mu}: mean {mean} vs {expect_mean} ({zm:.2} SE), var {var} vs {v} ({zv:.2} SE)"));
        }
        notes.push(format!("{zm:.1}/{zv:.1}"));
    }
    // A draw for mu and one minus a draw for 1 - mu share a distribution.
    let crit = 1.949 * ((2 * n) as f64 / (n as f64 * n as f64)).sqrt();
    for (a, b) in [(0, 4), (1, 3), (2, 2)] {
        let other = if a == b { sample_beta_noise(&params, n, 304).unwrap().column(b).to_vec() } else { draws.column(b).to_vec() };
        let d = ks_statistic(draws.column(a).to_vec(), other.iter().map(|x| 1.0 - x).collect());
        if d >= crit {
            return Outcome::new(false, format!("mirror of mu {} vs {}: KS {d:.4} >= {crit:.4}", mus[a], mus[b]));
        }
    }
    Outcome::new(true, format!("mean/var deviations in SE: {}; mirror KS below {crit:.4}", notes.join(" ")))
}

// ---------------------------------------------------------------------------
// 4. gradients

fn gradient_checks() -> Outcome {
    let mut results = Vec::new();
    for case in 0..20 {
        results.push(common::check_ffnn(case));
        results.push(common::check_generator(case));
        results.push(common::check_critic(case));
    }
    let worst = results.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)).unwrap();
    if let Some(bad) = results.iter().find(|r| !r.passed()) {
        return Outcome::new(false, format!("{}: relative error {:.2e}", bad.label, bad.rel_error));
    }
    Outcome::new(true, format!("{} configurations, worst relative error {:.2e}", results.len(), worst.rel_error))
}

// ---------------------------------------------------------------------------
// 5. GAN fidelity

struct ModeStats {
    low_mean: f64,
    high_mean: f64,
    low_mass: f64,
}

fn mode_stats(values: &[f64]) -> ModeStats {
    let (low, high): (Vec<f64>, Vec<f64>) = values.iter().partition(|&&v| v < 5.0);
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    ModeStats { low_mean: mean(&low), high_mean: mean(&high), low_mass: low.len() as f64 / values.len() as f64 }
}

fn fidelity_ok(s: &ModeStats) -> bool {
    s.low_mean.abs() < 0.5 && (s.high_mean - 10.0).abs() < 0.5 && (s.low_mass - 0.5).abs() <= 0.1
}

fn bimodal(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let centre = if rng.random::<bool>() { 10.0 } else { 0.0 };
            centre + rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

fn gan_fidelity() -> Outcome {
    let n = 2000;
    let mut rng = seed::rng(505);
    let values = bimodal(n, &mut rng);
    let labels = vec![RowLabel { user_id: "toy".into(), origin: Origin::Real }; n];
    let table = FeatureTable::new(
        vec![ColumnSpec::continuous("x")],
        Array2::from_shape_vec((n, 1), values).unwrap(),
        labels,
    )
    .unwrap();
    let (model, _) = match train_ictgan(&table, &TrainConfig::default(), 506) {
        Ok(m) => m,
        Err(e) => return Outcome::new(false, format!("training failed: {e}")),
    };
    let generated = model.generate(n, 507).unwrap();
    let got = mode_stats(generated.rows().column(0).as_slice().unwrap_or(&generated.rows().column(0).to_vec()));
    let oracle = mode_stats(&bimodal(n, &mut seed::rng(508)));
    let ok = fidelity_ok(&got) && fidelity_ok(&oracle);
    Outcome::new(
        ok,
        format!(
            "generated modes {:.3} / {:.3}, low mass {:.3}; mixture oracle {:.3} / {:.3}, {:.3}",
            got.low_mean, got.high_mean, got.low_mass, oracle.low_mean, oracle.high_mean, oracle.low_mass
        ),
    )
}

// ---------------------------------------------------------------------------
// 6 and 8. walkers trend and determinism

const WALKERS: &str = r#"
seed = 20240601
[[datasets]]
name = "walkers"
kind = "walkers"
n_users = 10
duration_s = 120
sample_rate_hz = 50
[attack]
n_probes = 100000
"#;

fn run_into(cfg: &ExperimentConfig, dir: &Path) -> gaitauth::Result<DatasetSummary> {
    let opts = RunOptions { models_dir: Some(dir.join("models")), ..RunOptions::default() };
    let record = run_experiment(cfg, &opts)?;
    write_run(&record, dir)?;
    if let Some(cell) = record.failed_cells().next() {
        return Err(gaitauth::Error::Validation(format!(
            "cell {} {} {} failed: {}",
            cell.user,
            cell.classifier,
            cell.variant,
            cell.error.as_deref().unwrap_or("")
        )));
    }
    Ok(summarize(&record)?.remove(0))
}

fn ar_grid(s: &DatasetSummary) -> String {
    FAMILIES
        .iter()
        .map(|&f| {
            let cells: Vec<String> = Variant::ALL
                .iter()
                .map(|&v| format!("{:.4}", s.ar_of(f, v).unwrap_or(f64::NAN)))
                .collect();
            format!("{f} {}", cells.join("/"))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn walkers_trend(s: &DatasetSummary) -> Outcome {
    let mut failures = Vec::new();
    for f in FAMILIES {
        let ar = |v| s.ar_of(f, v).unwrap_or(f64::NAN);
        let hter = |v| s.hter_of(f, v).unwrap_or(f64::NAN);
        let (v, b, i) = (ar(Variant::Vanilla), ar(Variant::Beta), ar(Variant::Ictgan));
        if !(v >= b) {
            failures.push(format!("{f}: AR vanilla {v} < beta {b}"));
        }
        if !(v >= i) {
            failures.push(format!("{f}: AR vanilla {v} < ictgan {i}"));
        }
        if !(i < 0.05) {
            failures.push(format!("{f}: AR ictgan {i} >= 0.05"));
        }
        for variant in [Variant::Beta, Variant::Ictgan] {
            let gap = (hter(variant) - hter(Variant::Vanilla)).abs();
            if !(gap <= 0.05) {
                failures.push(format!("{f}: HTER {variant} differs from vanilla by {gap:.4}"));
            }
        }
    }
    if failures.is_empty() {
        Outcome::new(true, format!("mean AR vanilla/beta/ictgan: {}", ar_grid(s)))
    } else {
        Outcome::new(false, failures.join("; "))
    }
}

fn collect_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "timing.json") {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism(cfg: &ExperimentConfig, first: &Path) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    if let Err(e) = run_into(cfg, second.path()) {
        return Outcome::new(false, format!("second run failed: {e}"));
    }
    let (a, b) = (collect_files(first), collect_files(second.path()));
    if a.keys().ne(b.keys()) {
        return Outcome::new(false, format!("file sets differ: {} vs {} files", a.len(), b.len()));
    }
    if let Some((name, _)) = a.iter().find(|(k, v)| b[*k] != **v) {
        return Outcome::new(false, format!("{name} differs"));
    }
    Outcome::new(true, format!("{} files byte-identical (timing.json excluded)", a.len()))
}

// ---------------------------------------------------------------------------
// 7. public HAR data

fn har_ordering(dir: &str) -> Outcome {
    let text = format!("seed = 20240601\n[[datasets]]\nname = \"har\"\nkind = \"uci_har\"\ndir = {dir:?}\n");
    let cfg = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let out = tempfile::tempdir().unwrap();
    let s = match run_into(&cfg, out.path()) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, format!("run failed: {e}")),
    };
    let mut failures = Vec::new();
    for f in FAMILIES {
        let ar = |v| s.ar_of(f, v).unwrap_or(f64::NAN);
        let (v, b, i) = (ar(Variant::Vanilla), ar(Variant::Beta), ar(Variant::Ictgan));
        if !(v > b && b >= i) {
            failures.push(format!("{f}: {v:.4}/{b:.4}/{i:.4}"));
        }
    }
    if failures.is_empty() {
        Outcome::new(true, format!("mean AR vanilla/beta/ictgan: {}", ar_grid(&s)))
    } else {
        Outcome::new(false, format!("ordering broken: {}", failures.join(", ")))
    }
}

// ---------------------------------------------------------------------------

fn report(id: u32, name: &str, outcome: Option<Outcome>, failed: &mut bool) {
    match outcome {
        Some(o) => {
            *failed |= !o.passed;
            println!("criterion {id} {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        }
        None => println!("criterion {id} {name}: SKIP (set GAITAUTH_HAR_DIR to the UCI HAR directory)"),
    }
}

fn timed(budget_s: u64, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let o = f();
    within_budget(o, start.elapsed(), Duration::from_secs(budget_s))
}

fn main() {
    // `cargo test` passes libtest flags; a filter that excludes us means skip.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let mut failed = false;
    report(1, "metric arithmetic", Some(timed(1, metric_arithmetic)), &mut failed);
    report(2, "random-vector AR soundness", Some(timed(30, ar_soundness)), &mut failed);
    report(3, "beta noise moments", Some(timed(10, beta_noise_moments)), &mut failed);
    report(4, "gradient correctness", Some(timed(60, gradient_checks)), &mut failed);
    report(5, "GAN bimodal fidelity", Some(timed(600, gan_fidelity)), &mut failed);

    let cfg = ExperimentConfig::from_toml(WALKERS).unwrap();
    let first = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let walkers = run_into(&cfg, first.path());
    let walkers_time = start.elapsed();
    let trend = match &walkers {
        Ok(s) => walkers_trend(s),
        Err(e) => Outcome::new(false, format!("run failed: {e}")),
    };
    report(6, "walkers AR trend", Some(within_budget(trend, walkers_time, Duration::from_secs(1800))), &mut failed);

    let har = std::env::var("GAITAUTH_HAR_DIR").ok().map(|dir| timed(7200, || har_ordering(&dir)));
    report(7, "HAR AR ordering", har, &mut failed);

    let start = Instant::now();
    let det = determinism(&cfg, first.path());
    let budget = (2 * walkers_time).max(Duration::from_secs(60));
    report(8, "run determinism", Some(within_budget(det, start.elapsed(), budget)), &mut failed);

    if failed {
        std::process::exit(1);
    }
}
