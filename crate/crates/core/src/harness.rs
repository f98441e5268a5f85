//! Seeded Monte Carlo experiments.
//!
//! Every drop `k` owns two counter-addressed random streams derived from the
//! master seed: stream `2k` places users and draws gains, stream `2k + 1`
//! feeds randomized strategies. All requested (strategy, mu, weight mode)
//! combinations run on the same gain table, and records are merged in drop
//! order, so output files do not depend on the thread count.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{empirical_cdf, median_gap, CdfSeries, MetricsError, SeriesMeta};
use crate::model::{
    db_to_linear, dbm_to_watts, validate_params, GainTable, LosRule, ScenarioParams, WeightMode,
};
use crate::scenario::{build_gain_table, substream, ScenarioDump, ScenarioError};
use crate::solvers::{Registry, SolverError, P_OPT_MAX_USERS};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "FDSCHED_OUT_DIR";

/// Name of the marker file written next to partial results.
pub const FAILURE_MARKER: &str = "FAILED";

/// Metrics that get an empirical CDF per series.
pub const CDF_METRICS: [&str; 4] = ["objective", "sum_se", "min_se", "jain"];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("drop {drop}: {source}")]
    Drop {
        drop: usize,
        #[source]
        source: Box<HarnessError>,
        /// Records of every drop that completed.
        partial: Vec<RunRecord>,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 for anything
    /// that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Scenario section of a config file, in the units people quote:
/// dBm, dB, metres, GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "defaults::radius")]
    pub cell_radius_m: f64,
    pub num_ul: usize,
    pub num_dl: usize,
    pub num_channels: usize,
    #[serde(default = "defaults::carrier")]
    pub carrier_ghz: f64,
    #[serde(default = "defaults::bandwidth")]
    pub bandwidth_mhz: f64,
    #[serde(default = "defaults::noise")]
    pub noise_dbm: f64,
    #[serde(default = "defaults::si")]
    pub si_cancellation_db: f64,
    #[serde(default = "defaults::power")]
    pub p_max_ul_dbm: f64,
    #[serde(default = "defaults::power")]
    pub p_max_dl_dbm: f64,
    #[serde(default = "defaults::min_distance")]
    pub min_bs_ue_distance_m: f64,
    #[serde(default)]
    pub los_rule: LosRule,
    /// LOS rule for UE-to-UE links; omitted means same as `los_rule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue_los_rule: Option<LosRule>,
    #[serde(default = "defaults::yes")]
    pub shadowing: bool,
}

mod defaults {
    pub fn radius() -> f64 {
        100.0
    }
    pub fn carrier() -> f64 {
        2.5
    }
    pub fn bandwidth() -> f64 {
        5.0
    }
    pub fn noise() -> f64 {
        -116.4
    }
    pub fn si() -> f64 {
        -100.0
    }
    pub fn power() -> f64 {
        24.0
    }
    pub fn min_distance() -> f64 {
        3.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn iterations() -> usize {
        400
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn parallelism() -> usize {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

impl ScenarioConfig {
    /// Urban-micro single cell with the given population.
    pub fn urban_micro(num_ul: usize, num_dl: usize, num_channels: usize) -> Self {
        ScenarioConfig {
            cell_radius_m: defaults::radius(),
            num_ul,
            num_dl,
            num_channels,
            carrier_ghz: defaults::carrier(),
            bandwidth_mhz: defaults::bandwidth(),
            noise_dbm: defaults::noise(),
            si_cancellation_db: defaults::si(),
            p_max_ul_dbm: defaults::power(),
            p_max_dl_dbm: defaults::power(),
            min_bs_ue_distance_m: defaults::min_distance(),
            los_rule: LosRule::Umi,
            ue_los_rule: None,
            shadowing: true,
        }
    }

    pub fn to_params(&self, mu: f64, weight_mode: WeightMode, seed: u64) -> ScenarioParams {
        ScenarioParams {
            cell_radius_m: self.cell_radius_m,
            num_ul: self.num_ul,
            num_dl: self.num_dl,
            num_channels: self.num_channels,
            carrier_hz: self.carrier_ghz * 1e9,
            noise_power_w: dbm_to_watts(self.noise_dbm),
            si_cancellation: db_to_linear(self.si_cancellation_db),
            p_max_ul_w: dbm_to_watts(self.p_max_ul_dbm),
            p_max_dl_w: dbm_to_watts(self.p_max_dl_dbm),
            mu,
            weight_mode,
            min_bs_ue_distance_m: self.min_bs_ue_distance_m,
            rng_seed: seed,
            los_rule: self.los_rule,
            ue_los_rule: self.ue_los_rule,
            shadowing: self.shadowing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: ScenarioConfig,
    pub strategies: Vec<String>,
    pub mus: Vec<f64>,
    pub weight_modes: Vec<WeightMode>,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "defaults::parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub dump_scenarios: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Output directory: the environment override if set, then the config,
    /// then `results/<name>`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            return PathBuf::from(dir);
        }
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("results").join(&self.name))
    }

    pub fn params(&self, mu: f64, weight_mode: WeightMode) -> ScenarioParams {
        self.scenario.to_params(mu, weight_mode, self.seed)
    }

    pub fn validate(&self, registry: &Registry) -> Result<(), HarnessError> {
        let mut problems = Vec::new();
        if self.iterations < 1 {
            problems.push("iterations must be at least 1".to_string());
        }
        if self.parallelism < 1 {
            problems.push("parallelism must be at least 1".to_string());
        }
        if self.strategies.is_empty() {
            problems.push("no strategies requested".to_string());
        }
        if self.mus.is_empty() {
            problems.push("no mu values requested".to_string());
        }
        if self.weight_modes.is_empty() {
            problems.push("no weight modes requested".to_string());
        }
        let users = self.scenario.num_ul + self.scenario.num_dl;
        for s in &self.strategies {
            match registry.get(s) {
                Err(e) => problems.push(e.to_string()),
                Ok(sched) if sched.name() == "p-opt" && users > P_OPT_MAX_USERS => problems.push(
                    format!("p-opt needs I + J ≤ {P_OPT_MAX_USERS}, config has {users}"),
                ),
                Ok(_) => {}
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &mu in &self.mus {
            if !seen.insert(format!("{mu}")) {
                problems.push(format!("mu {mu} listed twice"));
            }
            let report = validate_params(&self.params(mu, WeightMode::SumRate));
            if !report.is_ok() {
                problems.push(report.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(problems.join("; ")))
        }
    }
}

/// Configs for the three stock experiments: `fig2` compares the exhaustive
/// optimum with the Hungarian heuristic on a 4+4 user cell over three
/// values of mu; `fig3` and `fig4` run the fully loaded 25+25 cell with
/// both weight modes against the two baselines (fig3 reads Jain's index,
/// fig4 the sum spectral efficiency, from the same run).
pub fn canned_experiments(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let base = |scenario, strategies: &[&str], mus: Vec<f64>, weight_modes| ExperimentConfig {
        name: name.to_string(),
        scenario,
        strategies: strategies.iter().map(|s| s.to_string()).collect(),
        mus,
        weight_modes,
        iterations: 400,
        seed: defaults::seed(),
        output_dir: None,
        parallelism: defaults::parallelism(),
        dump_scenarios: false,
    };
    match name {
        "fig2" => Ok(base(
            ScenarioConfig::urban_micro(4, 4, 4),
            &["p-opt", "c-hun"],
            vec![0.1, 0.5, 0.9],
            vec![WeightMode::SumRate],
        )),
        "fig3" | "fig4" => Ok(base(
            ScenarioConfig::urban_micro(25, 25, 25),
            &["c-hun", "c-nint", "r-epa"],
            vec![0.9],
            vec![WeightMode::SumRate, WeightMode::PathLossCompensation],
        )),
        other => Err(HarnessError::Config(format!(
            "unknown canned experiment {other:?} (expected fig2, fig3 or fig4)"
        ))),
    }
}

/// One (drop, strategy, mu, weight mode) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub drop: usize,
    pub strategy: String,
    pub mu: f64,
    pub weight_mode: WeightMode,
    pub objective: f64,
    pub sum_se: f64,
    pub min_se: f64,
    pub jain: f64,
    pub se_ul: Vec<f64>,
    pub se_dl: Vec<f64>,
    pub master_seed: u64,
    /// Stream index the drop's gains were drawn from.
    pub stream: u64,
    pub gain_hash: u64,
    /// Kept out of the records file; see the timing sidecar.
    #[serde(skip)]
    pub wall_time_us: u128,
}

impl RunRecord {
    fn csv_header() -> &'static str {
        "drop,strategy,mu,weight_mode,objective,sum_se,min_se,jain,master_seed,stream,gain_hash,se_ul,se_dl\n"
    }

    fn write_csv_row(&self, out: &mut String) {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{:016x},{},{}",
            self.drop,
            self.strategy,
            self.mu,
            self.weight_mode,
            self.objective,
            self.sum_se,
            self.min_se,
            self.jain,
            self.master_seed,
            self.stream,
            self.gain_hash,
            join(&self.se_ul),
            join(&self.se_dl),
        );
    }
}

/// Hash of every gain's bit pattern.
pub fn gain_table_hash(gains: &GainTable) -> u64 {
    let mut h = DefaultHasher::new();
    for g in gains.g_ul.iter().chain(&gains.g_dl).chain(gains.g_cross.iter().flatten()) {
        g.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn gain_stream(drop: usize) -> u64 {
    2 * drop as u64
}

pub fn strategy_stream(drop: usize) -> u64 {
    2 * drop as u64 + 1
}

/// Gain table of drop `k`, exactly as the experiment sees it.
pub fn drop_gain_table(cfg: &ExperimentConfig, drop: usize) -> Result<GainTable, ScenarioError> {
    let params = cfg.params(cfg.mus.first().copied().unwrap_or(0.0), WeightMode::SumRate);
    build_gain_table(&params, &mut substream(cfg.seed, gain_stream(drop)))
}

struct DropResult {
    records: Vec<RunRecord>,
    gains: Option<GainTable>,
}

fn run_drop(
    cfg: &ExperimentConfig,
    registry: &Registry,
    drop: usize,
) -> Result<DropResult, HarnessError> {
    let gains = drop_gain_table(cfg, drop)?;
    let hash = gain_table_hash(&gains);
    let mut records = Vec::new();
    for name in &cfg.strategies {
        let scheduler = registry.get(name)?;
        for &weight_mode in &cfg.weight_modes {
            for &mu in &cfg.mus {
                let params = cfg.params(mu, weight_mode);
                // every combination starts from the same strategy stream
                let mut rng = substream(cfg.seed, strategy_stream(drop));
                let start = Instant::now();
                let out = scheduler.schedule(&gains, &params, &mut rng)?;
                let wall_time_us = start.elapsed().as_micros();
                debug_assert_eq!(gain_table_hash(&gains), hash);
                records.push(RunRecord {
                    drop,
                    strategy: scheduler.name().to_string(),
                    mu,
                    weight_mode,
                    objective: out.objective,
                    sum_se: out.sum_se,
                    min_se: out.min_se,
                    jain: out.jain,
                    se_ul: out.se_ul,
                    se_dl: out.se_dl,
                    master_seed: cfg.seed,
                    stream: gain_stream(drop),
                    gain_hash: hash,
                    wall_time_us,
                });
            }
        }
    }
    Ok(DropResult {
        records,
        gains: cfg.dump_scenarios.then_some(gains),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianEntry {
    pub metric: String,
    pub strategy: String,
    pub mu: String,
    pub weight_mode: String,
    pub median: f64,
}

/// Relative median gap `(p50(a) - p50(b)) / p50(b)` between two series of
/// the same metric and mu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub metric: String,
    pub mu: String,
    pub a: String,
    pub b: String,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub iterations: usize,
    pub seed: u64,
    pub medians: Vec<MedianEntry>,
    pub gaps: Vec<GapEntry>,
}

impl Summary {
    pub fn median(&self, metric: &str, strategy: &str, mu: f64, weight_mode: WeightMode) -> Option<f64> {
        let mu = format!("{mu}");
        self.medians
            .iter()
            .find(|m| {
                m.metric == metric
                    && m.strategy == strategy
                    && m.mu == mu
                    && m.weight_mode == weight_mode.short_name()
            })
            .map(|m| m.median)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub cdfs: Vec<CdfSeries>,
    pub summary: Summary,
    pub scenarios: Vec<GainTable>,
    pub wall_time_s: f64,
}

impl ExperimentResult {
    pub fn cdf(&self, metric: &str, strategy: &str, mu: f64, weight_mode: WeightMode) -> Option<&CdfSeries> {
        let meta = SeriesMeta::new(metric, strategy, mu, weight_mode.short_name());
        self.cdfs.iter().find(|c| c.meta == meta)
    }

    pub fn records_csv(&self) -> String {
        records_csv(&self.records)
    }
}

fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RunRecord::csv_header());
    for r in records {
        r.write_csv_row(&mut out);
    }
    out
}

fn metric_value(r: &RunRecord, metric: &str) -> f64 {
    match metric {
        "objective" => r.objective,
        "sum_se" => r.sum_se,
        "min_se" => r.min_se,
        "jain" => r.jain,
        _ => unreachable!("unknown metric {metric}"),
    }
}

fn label(meta: &SeriesMeta) -> String {
    format!("{}/{}", meta.strategy, meta.weight_mode)
}

fn summarize(cfg: &ExperimentConfig, cdfs: &[CdfSeries]) -> Summary {
    let medians = cdfs
        .iter()
        .map(|c| MedianEntry {
            metric: c.meta.metric.clone(),
            strategy: c.meta.strategy.clone(),
            mu: c.meta.mu.clone(),
            weight_mode: c.meta.weight_mode.clone(),
            median: c.median(),
        })
        .collect();
    let mut gaps = Vec::new();
    for a in cdfs {
        for b in cdfs {
            let same_slot = a.meta.metric == b.meta.metric && a.meta.mu == b.meta.mu;
            let one_axis = (a.meta.strategy == b.meta.strategy) != (a.meta.weight_mode == b.meta.weight_mode);
            if same_slot && one_axis {
                gaps.push(GapEntry {
                    metric: a.meta.metric.clone(),
                    mu: a.meta.mu.clone(),
                    a: label(&a.meta),
                    b: label(&b.meta),
                    gap: median_gap(a, b).ok(),
                });
            }
        }
    }
    Summary {
        name: cfg.name.clone(),
        iterations: cfg.iterations,
        seed: cfg.seed,
        medians,
        gaps,
    }
}

/// Runs every drop and aggregates the results in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    let registry = Registry::with_builtins();
    cfg.validate(&registry)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let results: Vec<Result<DropResult, HarnessError>> = pool.install(|| {
        (0..cfg.iterations)
            .into_par_iter()
            .map(|k| run_drop(cfg, &registry, k))
            .collect()
    });

    let mut records = Vec::new();
    let mut scenarios = Vec::new();
    for (drop, res) in results.into_iter().enumerate() {
        match res {
            Ok(d) => {
                records.extend(d.records);
                scenarios.extend(d.gains);
            }
            Err(e) => {
                return Err(HarnessError::Drop {
                    drop,
                    source: Box::new(e),
                    partial: records,
                })
            }
        }
    }

    // series keyed in a fixed order: metric, strategy, weight mode, mu
    let mut series: BTreeMap<(usize, usize, usize, usize), Vec<f64>> = BTreeMap::new();
    let index_of = |list: &[String], s: &str| {
        list.iter()
            .position(|x| registry.get(x).map(|r| r.name() == s).unwrap_or(false))
            .unwrap_or(usize::MAX)
    };
    for r in &records {
        let s = index_of(&cfg.strategies, &r.strategy);
        let w = cfg.weight_modes.iter().position(|&w| w == r.weight_mode).unwrap_or(usize::MAX);
        let m = cfg.mus.iter().position(|&m| m == r.mu).unwrap_or(usize::MAX);
        for (k, metric) in CDF_METRICS.iter().enumerate() {
            series.entry((k, s, w, m)).or_default().push(metric_value(r, metric));
        }
    }
    let mut cdfs = Vec::with_capacity(series.len());
    for ((k, s, w, m), samples) in series {
        let strategy = registry.get(&cfg.strategies[s])?.name().to_string();
        let meta = SeriesMeta::new(
            CDF_METRICS[k],
            strategy,
            cfg.mus[m],
            cfg.weight_modes[w].short_name(),
        );
        cdfs.push(empirical_cdf(&samples, meta)?);
    }
    let summary = summarize(cfg, &cdfs);
    Ok(ExperimentResult {
        config: cfg.clone(),
        records,
        cdfs,
        summary,
        scenarios,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes `records.csv`, `cdf/*.csv`, `summary.json`, `config.json`,
/// optional `scenarios/drop_*.json`, and the `timing.log` sidecar.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let cdf_dir = dir.join("cdf");
    fs::create_dir_all(&cdf_dir).map_err(io_err(&cdf_dir))?;
    let mut written = Vec::new();

    let p = dir.join("records.csv");
    write(&p, &result.records_csv())?;
    written.push(p);

    for cdf in &result.cdfs {
        let p = cdf_dir.join(format!("{}.csv", cdf.meta.file_stem()));
        write(&p, &cdf.to_csv())?;
        written.push(p);
    }

    let p = dir.join("summary.json");
    write(&p, &(serde_json::to_string_pretty(&result.summary).expect("summary serializes") + "\n"))?;
    written.push(p);

    let p = dir.join("config.json");
    write(&p, &(result.config.to_json() + "\n"))?;
    written.push(p);

    if !result.scenarios.is_empty() {
        let sdir = dir.join("scenarios");
        fs::create_dir_all(&sdir).map_err(io_err(&sdir))?;
        let mu = result.config.mus.first().copied().unwrap_or(0.0);
        for (k, gains) in result.scenarios.iter().enumerate() {
            let dump = ScenarioDump {
                params: result.config.params(mu, WeightMode::SumRate),
                gains: gains.clone(),
            };
            let p = sdir.join(format!("drop_{k:04}.json"));
            write(&p, &dump.to_json())?;
            written.push(p);
        }
    }

    let p = dir.join("timing.log");
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut log = format!(
        "finished_unix={stamp} wall_time_s={:.3} parallelism={}\n",
        result.wall_time_s, result.config.parallelism
    );
    for r in &result.records {
        let _ = writeln!(
            log,
            "drop={} strategy={} mu={} weight_mode={} wall_time_us={}",
            r.drop, r.strategy, r.mu, r.weight_mode, r.wall_time_us
        );
    }
    write(&p, &log)?;
    written.push(p);
    Ok(written)
}

/// Runs and writes. On a mid-run failure the completed records are still
/// written, together with a `FAILED` marker holding the error.
pub fn run_and_write(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult, HarnessError> {
    let _ = fs::remove_file(dir.join(FAILURE_MARKER));
    match run_experiment(cfg) {
        Ok(result) => {
            write_outputs(&result, dir)?;
            Ok(result)
        }
        Err(HarnessError::Drop {
            drop,
            source,
            partial,
        }) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            write(&dir.join("records.csv"), &records_csv(&partial))?;
            write(
                &dir.join(FAILURE_MARKER),
                &format!("drop {drop}: {source}\n"),
            )?;
            Err(HarnessError::Drop {
                drop,
                source,
                partial,
            })
        }
        Err(e) => Err(e),
    }
}
