//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts. Run with `cargo test --release --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use fdsched::assignment::{brute_force_assignment, hungarian_max};
use fdsched::harness::{canned_experiments, run_experiment, write_outputs, ExperimentResult, RunRecord};
use fdsched::model::{db_to_linear, GainTable, ScenarioParams, WeightMode};
use fdsched::scenario::{build_gain_table, substream};
use fdsched::solvers::{dual_multipliers, solve_c_hun, solve_p_opt, solve_r_epa};

const SEED: u64 = 20_240_601;

const ORACLE_MATRICES: usize = 1_000;
const ORACLE_MAX_SIZE: usize = 7;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);

const SANDWICH_DROPS: usize = 200;
const SANDWICH_SLACK: f64 = 1e-12;
const SANDWICH_MUS: [f64; 3] = [0.1, 0.5, 0.9];
const SANDWICH_BUDGET: Duration = Duration::from_secs(120);

const FIG2_BAND_LOW_MU: (f64, f64) = (0.15, 0.50);
const FIG2_BAND_HIGH_MU: (f64, f64) = (0.10, 0.40);
const FIG2_BUDGET: Duration = Duration::from_secs(600);

const FIG3_JAIN_GAIN_BAND: (f64, f64) = (0.08, 0.25);
const FIG3_BASELINE_GAP_ABS: f64 = 0.05;
const FIG3_WEIGHT_MODE_REL: f64 = 0.03;
const FIG34_BUDGET: Duration = Duration::from_secs(900);

const FIG4_SUM_SE_GAIN_BAND: (f64, f64) = (0.09, 0.25);
const FIG4_WEIGHT_MODE_REL: f64 = 0.03;

const DUAL_INSTANCES: usize = 100;
const DUAL_SIMPLEX_POINTS: usize = 10_000;
const DUAL_TOL: f64 = 1e-12;
const DUAL_BUDGET: Duration = Duration::from_secs(5);

const BINARY_PAIRS: usize = 500;
const BINARY_GRID: usize = 50;
const BINARY_TOL: f64 = 1e-9;
const BINARY_BUDGET: Duration = Duration::from_secs(60);

const REPRO_BUDGET: Duration = Duration::from_secs(1_800);

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Nearest-rank median, computed from scratch.
fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    xs[xs.len().div_ceil(2) - 1]
}

fn metric_of(r: &RunRecord, metric: &str) -> f64 {
    match metric {
        "objective" => r.objective,
        "sum_se" => r.sum_se,
        "jain" => {
            let x: Vec<f64> = r.se_ul.iter().chain(&r.se_dl).copied().collect();
            let s: f64 = x.iter().sum();
            let q: f64 = x.iter().map(|v| v * v).sum();
            if q == 0.0 {
                1.0
            } else {
                s * s / (x.len() as f64 * q)
            }
        }
        other => panic!("metric {other}"),
    }
}

fn series_median(res: &ExperimentResult, metric: &str, strategy: &str, mu: f64, wm: WeightMode) -> f64 {
    let xs: Vec<f64> = res
        .records
        .iter()
        .filter(|r| r.strategy == strategy && r.mu == mu && r.weight_mode == wm)
        .map(|r| metric_of(r, metric))
        .collect();
    assert_eq!(xs.len(), res.config.iterations, "{strategy} mu={mu} {wm}");
    median(xs)
}

fn fig3_run() -> &'static (ExperimentResult, Duration) {
    static RUN: OnceLock<(ExperimentResult, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = canned_experiments("fig3").unwrap();
        cfg.parallelism = 1;
        let t = Instant::now();
        let res = run_experiment(&cfg).unwrap();
        (res, t.elapsed())
    })
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-50i32..=50) as f64).collect())
        .collect()
}

#[test]
fn criterion_1_hungarian_matches_brute_force() {
    let mut rng = substream(SEED, 1);
    let t = Instant::now();
    let mut mismatches = 0;
    for _ in 0..ORACLE_MATRICES {
        let rows = rng.random_range(1..=ORACLE_MAX_SIZE);
        let cols = rng.random_range(1..=ORACLE_MAX_SIZE);
        let m = random_matrix(&mut rng, rows, cols);
        let fast = hungarian_max(&m).unwrap().total;
        let slow = brute_force_assignment(&m).unwrap().total;
        if fast != slow {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    let pass = mismatches == 0 && elapsed < ORACLE_BUDGET;
    report(
        1,
        pass,
        &format!("{mismatches} mismatches in {ORACLE_MATRICES} matrices, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_optimality_sandwich() {
    let base = ScenarioParams {
        si_cancellation: db_to_linear(-100.0),
        ..ScenarioParams::urban_micro(4, 4, 4)
    };
    let t = Instant::now();
    let (mut hun_viol, mut epa_viol, mut worst) = (0, 0, f64::NEG_INFINITY);
    for k in 0..SANDWICH_DROPS as u64 {
        let gains: GainTable = build_gain_table(&base, &mut substream(SEED, 2 * k)).unwrap();
        for mu in SANDWICH_MUS {
            let p = base.clone().with_mu(mu);
            let opt = solve_p_opt(&gains, &p).unwrap().objective;
            let hun = solve_c_hun(&gains, &p).unwrap().objective;
            let epa = solve_r_epa(&gains, &p, &mut substream(SEED, 2 * k + 1))
                .unwrap()
                .objective;
            worst = worst.max(hun - opt).max(epa - opt);
            hun_viol += usize::from(hun > opt + SANDWICH_SLACK);
            epa_viol += usize::from(epa > opt + SANDWICH_SLACK);
        }
    }
    let elapsed = t.elapsed();
    let pass = hun_viol == 0 && epa_viol == 0 && elapsed < SANDWICH_BUDGET;
    report(
        2,
        pass,
        &format!(
            "C-HUN>P-OPT {hun_viol}, R-EPA>P-OPT {epa_viol} over {} cases, worst excess {worst:.3e}, {elapsed:.2?}",
            SANDWICH_DROPS * SANDWICH_MUS.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_fig2_gap_trend() {
    let cfg = canned_experiments("fig2").unwrap();
    let t = Instant::now();
    let res = run_experiment(&cfg).unwrap();
    let elapsed = t.elapsed();
    let gap = |mu: f64| {
        let opt = series_median(&res, "objective", "p-opt", mu, WeightMode::SumRate);
        let hun = series_median(&res, "objective", "c-hun", mu, WeightMode::SumRate);
        (opt - hun) / hun
    };
    let (lo, hi) = (gap(0.1), gap(0.9));
    let within = |x: f64, (a, b): (f64, f64)| (a..=b).contains(&x);
    let pass = hi < lo
        && within(lo, FIG2_BAND_LOW_MU)
        && within(hi, FIG2_BAND_HIGH_MU)
        && elapsed < FIG2_BUDGET;
    report(
        3,
        pass,
        &format!(
            "median gap mu=0.1 {:.1}% (want {:.0}..{:.0}%), mu=0.5 {:.1}%, mu=0.9 {:.1}% (want {:.0}..{:.0}%), decreasing {}, {elapsed:.2?}",
            100.0 * lo,
            100.0 * FIG2_BAND_LOW_MU.0,
            100.0 * FIG2_BAND_LOW_MU.1,
            100.0 * gap(0.5),
            100.0 * hi,
            100.0 * FIG2_BAND_HIGH_MU.0,
            100.0 * FIG2_BAND_HIGH_MU.1,
            hi < lo
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_fig3_jain() {
    let (res, elapsed) = fig3_run();
    let m = |s: &str, wm| series_median(res, "jain", s, 0.9, wm);
    let sr = WeightMode::SumRate;
    let pl = WeightMode::PathLossCompensation;
    let gain = (m("c-hun", sr) - m("c-nint", sr)) / m("c-nint", sr);
    let baseline_gap = m("c-nint", sr) - m("r-epa", sr);
    let mode_rel = (m("c-hun", sr) - m("c-hun", pl)).abs() / m("c-hun", sr);
    let ok_gain = gain > 0.0 && (FIG3_JAIN_GAIN_BAND.0..=FIG3_JAIN_GAIN_BAND.1).contains(&gain);
    let ok_base = baseline_gap.abs() <= FIG3_BASELINE_GAP_ABS;
    let ok_mode = mode_rel <= FIG3_WEIGHT_MODE_REL;
    let pass = ok_gain && ok_base && ok_mode && *elapsed < FIG34_BUDGET;
    report(
        4,
        pass,
        &format!(
            "Jain C-HUN vs C-NINT {:+.1}% [{ok_gain}], C-NINT - R-EPA {:+.1} pp [{ok_base}], C-HUN SR vs PL {:.1}% [{ok_mode}], {elapsed:.2?}",
            100.0 * gain,
            100.0 * baseline_gap,
            100.0 * mode_rel
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_fig4_sum_se() {
    let (res, elapsed) = fig3_run();
    let m = |s: &str, wm| series_median(res, "sum_se", s, 0.9, wm);
    let sr = WeightMode::SumRate;
    let pl = WeightMode::PathLossCompensation;
    let gain = (m("c-hun", sr) - m("c-nint", sr)) / m("c-nint", sr);
    let mode_rel = (m("c-hun", sr) - m("c-hun", pl)).abs() / m("c-hun", sr);
    let ok_gain = (FIG4_SUM_SE_GAIN_BAND.0..=FIG4_SUM_SE_GAIN_BAND.1).contains(&gain);
    let ok_mode = mode_rel <= FIG4_WEIGHT_MODE_REL;
    let pass = ok_gain && ok_mode && *elapsed < FIG34_BUDGET;
    report(
        5,
        pass,
        &format!(
            "sum SE C-HUN vs C-NINT {:+.1}% [{ok_gain}], C-HUN SR vs PL {:.1}% [{ok_mode}], {elapsed:.2?}",
            100.0 * gain,
            100.0 * mode_rel
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_dual_multipliers() {
    let mut rng = substream(SEED, 6);
    let t = Instant::now();
    let (mut value_viol, mut beaten) = (0, 0);
    for _ in 0..DUAL_INSTANCES {
        let n = rng.random_range(1..=12);
        let mu: f64 = rng.random();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0)).collect();
        let lambda = dual_multipliers(&c, mu).unwrap();
        let value: f64 = lambda.iter().zip(&c).map(|(l, v)| l * v).sum();
        let min_c = c.iter().copied().fold(f64::INFINITY, f64::min);
        let feasible = lambda.iter().all(|&l| l >= 0.0)
            && (lambda.iter().sum::<f64>() - mu).abs() <= DUAL_TOL;
        if !feasible || (value - mu * min_c).abs() > DUAL_TOL {
            value_viol += 1;
        }
        for _ in 0..DUAL_SIMPLEX_POINTS {
            // uniform point on the simplex scaled to mass mu
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            let other: f64 = e.iter().zip(&c).map(|(x, v)| mu * x / s * v).sum();
            if other < value - DUAL_TOL {
                beaten += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    let pass = value_viol == 0 && beaten == 0 && elapsed < DUAL_BUDGET;
    report(
        6,
        pass,
        &format!(
            "value mismatches {value_viol}, simplex points doing better {beaten} of {}, {elapsed:.2?}",
            DUAL_INSTANCES * DUAL_SIMPLEX_POINTS
        ),
    );
    assert!(pass);
}

/// Pair benefit with SR weights, written out directly.
fn pair_benefit_oracle(g: &GainTable, p: &ScenarioParams, pu: f64, pd: f64) -> f64 {
    let (gu, gd, gc) = (g.g_ul[0], g.g_dl[0], g.g_cross[0][0]);
    let cu = (1.0 + pu * gu / (p.noise_power_w + pd * p.si_cancellation)).log2();
    let cd = (1.0 + pd * gd / (p.noise_power_w + pu * gc)).log2();
    (1.0 - p.mu) * (cu + cd) + p.mu * cu.min(cd)
}

fn binary_power_violations(mu: f64) -> (usize, f64) {
    let base = ScenarioParams::urban_micro(1, 1, 1).with_mu(mu);
    let (mut violations, mut worst) = (0, f64::NEG_INFINITY);
    for k in 0..BINARY_PAIRS as u64 {
        let g = build_gain_table(&base, &mut substream(SEED + 7, k)).unwrap();
        let (pu, pd) = (base.p_max_ul_w, base.p_max_dl_w);
        let corner = [(pu, pd), (pu, 0.0), (0.0, pd)]
            .iter()
            .map(|&(a, b)| pair_benefit_oracle(&g, &base, a, b))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut grid = f64::NEG_INFINITY;
        for a in 0..BINARY_GRID {
            for b in 0..BINARY_GRID {
                let x = pu * a as f64 / (BINARY_GRID - 1) as f64;
                let y = pd * b as f64 / (BINARY_GRID - 1) as f64;
                grid = grid.max(pair_benefit_oracle(&g, &base, x, y));
            }
        }
        let excess = grid - corner;
        worst = worst.max(excess);
        violations += usize::from(corner < grid - BINARY_TOL);
    }
    (violations, worst)
}

#[test]
fn criterion_7_binary_power() {
    let t = Instant::now();
    let (violations, worst) = binary_power_violations(0.0);
    let (v5, w5) = binary_power_violations(0.5);
    let (v1, w1) = binary_power_violations(1.0);
    let elapsed = t.elapsed();
    let pass = violations == 0 && elapsed < BINARY_BUDGET;
    report(
        7,
        pass,
        &format!(
            "mu=0: {violations}/{BINARY_PAIRS} violations (worst grid excess {worst:.2e}); reported only: mu=0.5 {v5} (worst {w5:.2e}), mu=1 {v1} (worst {w1:.2e}); {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_8_reproducibility() {
    let t = Instant::now();
    let (serial, _) = fig3_run();
    let mut cfg = canned_experiments("fig3").unwrap();
    cfg.parallelism = 8;
    let parallel = run_experiment(&cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(serial, a.path()).unwrap();
    write_outputs(&parallel, b.path()).unwrap();
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    let differing: Vec<&String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .collect();
    let elapsed = t.elapsed();
    let pass = !fa.is_empty() && differing.is_empty() && elapsed < REPRO_BUDGET;
    report(
        8,
        pass,
        &format!(
            "{} CSV files compared, {} differ between parallelism 1 and 8, {elapsed:.2?}",
            fa.len(),
            differing.len()
        ),
    );
    assert!(pass);
}
