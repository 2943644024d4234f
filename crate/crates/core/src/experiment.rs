//! Experiment recipes, config files and the Monte Carlo runner.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{ConfigError, Error, Result};
use crate::field::TypicalInit;
use crate::graph::{generate_synthetic, parse_graph, GeneratorParams, NavGraph, NodeId};
use crate::metrics::{self, AggregateMetric, NodeMetric, ResultRow};
use crate::rng::{self, Stream};
use crate::sim::{run_seeded, DelayMode, RunResult, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    SweepSod,
    SweepPod,
    RandomDeployment,
    SweepPoe,
    Combined,
    Custom,
}

impl Recipe {
    pub const ALL: [Recipe; 6] = [
        Recipe::SweepSod,
        Recipe::SweepPod,
        Recipe::RandomDeployment,
        Recipe::SweepPoe,
        Recipe::Combined,
        Recipe::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::SweepSod => "sweep-sod",
            Recipe::SweepPod => "sweep-pod",
            Recipe::RandomDeployment => "random-deployment",
            Recipe::SweepPoe => "sweep-poe",
            Recipe::Combined => "combined",
            Recipe::Custom => "custom",
        }
    }

    /// The preset grid, population and run count of a named recipe.
    /// `Custom` has an empty grid.
    pub fn preset(self) -> RecipePreset {
        const PODS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let point = |pod, sod, poe| GridPoint { pod, sod, poe };
        let (grid, users, runs, static_field) = match self {
            Recipe::SweepSod => (
                (1..=5).map(|sod| point(0.1, sod, 0.0)).collect(),
                Users::AllNodes,
                1,
                None,
            ),
            Recipe::SweepPod => (
                PODS.iter()
                    .flat_map(|&pod| (1..=3).map(move |sod| point(pod, sod, 0.0)))
                    .collect(),
                Users::AllNodes,
                1,
                None,
            ),
            Recipe::RandomDeployment => (
                (1..=5).map(|sod| point(0.1, sod, 0.0)).collect(),
                Users::Random(150),
                53,
                None,
            ),
            Recipe::SweepPoe => (
                PODS.iter().map(|&poe| point(0.0, 0, poe)).collect(),
                Users::AllNodes,
                1,
                Some(true),
            ),
            Recipe::Combined => (vec![point(0.4, 3, 0.4)], Users::AllNodes, 1, None),
            Recipe::Custom => (Vec::new(), Users::AllNodes, 1, None),
        };
        RecipePreset {
            grid,
            users,
            runs,
            static_field,
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown recipe `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecipePreset {
    pub grid: Vec<GridPoint>,
    pub users: Users,
    pub runs: usize,
    /// `Some(true)` forces a static field.
    pub static_field: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub pod: f64,
    pub sod: usize,
    pub poe: f64,
}

impl GridPoint {
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            pod: self.pod,
            sod: self.sod,
            poe: self.poe,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Users {
    AllNodes,
    Random(usize),
}

impl FromStr for Users {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" || s == "all-nodes" {
            return Ok(Users::AllNodes);
        }
        s.strip_prefix("random:")
            .and_then(|n| n.parse().ok())
            .filter(|&n: &usize| n > 0)
            .map(Users::Random)
            .ok_or_else(|| ConfigError::Invalid(format!("users must be `all` or `random:<n>`, got `{s}`")))
    }
}

impl fmt::Display for Users {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Users::AllNodes => f.write_str("all"),
            Users::Random(n) => write!(f, "random:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    /// Generator parameters and the generator seed.
    Synthetic(GeneratorParams, u64),
}

impl GraphSource {
    pub fn load(&self) -> Result<NavGraph> {
        match self {
            GraphSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Ok(parse_graph(&text)?)
            }
            GraphSource::Synthetic(params, seed) => Ok(generate_synthetic(params, *seed)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub recipe: Recipe,
    pub grid: Vec<GridPoint>,
    pub runs: usize,
    pub users: Users,
    pub graph: GraphSource,
    pub out: PathBuf,
    /// Reuse run 0's random placement in every run.
    pub fixed_placement: bool,
}

impl ExperimentSpec {
    /// Spec of a named recipe on the synthetic ship graph.
    pub fn from_recipe(recipe: Recipe) -> Self {
        let preset = recipe.preset();
        ExperimentSpec {
            recipe,
            grid: preset.grid,
            runs: preset.runs,
            users: preset.users,
            graph: GraphSource::Synthetic(GeneratorParams::ship(), 0),
            out: PathBuf::from("results"),
            fixed_placement: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid.is_empty() {
            return Err(ConfigError::Invalid("experiment grid is empty".into()));
        }
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be at least 1".into()));
        }
        for p in &self.grid {
            for (name, value) in [("pod", p.pod), ("poe", p.poe)] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ConfigError::Probability { name, value });
                }
            }
        }
        Ok(())
    }
}

/// Parses `pod=0.1|0.2,sod=1|2|3,poe=0` into the cartesian grid.
/// Keys left out take the value from `base`.
pub fn parse_grid(text: &str, base: &ScenarioConfig) -> Result<Vec<GridPoint>, ConfigError> {
    let mut pods = vec![base.pod];
    let mut sods = vec![base.sod];
    let mut poes = vec![base.poe];
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("grid term `{part}` is not key=value")))?;
        let bad = |v: &str| ConfigError::BadValue {
            line: 0,
            key: key.to_string(),
            value: v.to_string(),
        };
        let items: Vec<&str> = values.split('|').map(str::trim).collect();
        match key.trim() {
            "pod" => {
                pods = items
                    .iter()
                    .map(|v| v.parse().map_err(|_| bad(v)))
                    .collect::<Result<_, _>>()?
            }
            "poe" => {
                poes = items
                    .iter()
                    .map(|v| v.parse().map_err(|_| bad(v)))
                    .collect::<Result<_, _>>()?
            }
            "sod" => {
                sods = items
                    .iter()
                    .map(|v| v.parse().map_err(|_| bad(v)))
                    .collect::<Result<_, _>>()?
            }
            other => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: other.to_string(),
                })
            }
        }
    }
    let mut grid = Vec::new();
    for &pod in &pods {
        for &sod in &sods {
            for &poe in &poes {
                for (name, value) in [("pod", pod), ("poe", poe)] {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(ConfigError::Probability { name, value });
                    }
                }
                grid.push(GridPoint { pod, sod, poe });
            }
        }
    }
    Ok(grid)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a flat `key=value` config. Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<(ScenarioConfig, ExperimentSpec), ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut spec = ExperimentSpec::from_recipe(Recipe::Custom);
    let mut recipe: Option<Recipe> = None;
    let mut runs: Option<usize> = None;
    let mut users: Option<Users> = None;
    let mut static_field: Option<bool> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or(ConfigError::Malformed { line })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "t_s" => cfg.t_s = float()?,
            "t_a" => cfg.t_a = float()?,
            "t_el" => cfg.t_el = float()?,
            "refresh_interval" => cfg.refresh_interval = float()?,
            "pod" => cfg.pod = float()?,
            "sod" => cfg.sod = value.parse().map_err(|_| bad())?,
            "poe" => cfg.poe = float()?,
            "v_worst" => cfg.speeds.worst = float()?,
            "v_nominal" => cfg.speeds.nominal = float()?,
            "persistence" => cfg.persistence = float()?,
            "static_field" => static_field = Some(parse_bool(value).ok_or_else(bad)?),
            "delay_mode" => {
                cfg.delay_mode = match value {
                    "per-decision" => DelayMode::PerDecision,
                    "per-node" => DelayMode::PerNode,
                    _ => return Err(bad()),
                }
            }
            "typical_init" => {
                cfg.typical_init = match value {
                    "sampled" => TypicalInit::Sampled,
                    "nominal" => TypicalInit::Nominal,
                    "worst" => TypicalInit::Worst,
                    _ => return Err(bad()),
                }
            }
            "seed" | "master_seed" => cfg.master_seed = value.parse().map_err(|_| bad())?,
            "recipe" => recipe = Some(value.parse().map_err(|_| bad())?),
            "runs" => runs = Some(value.parse().map_err(|_| bad())?),
            "users" => users = Some(value.parse().map_err(|_| bad())?),
            "graph" => {
                spec.graph = if value == "synthetic" {
                    GraphSource::Synthetic(GeneratorParams::ship(), 0)
                } else {
                    GraphSource::File(PathBuf::from(value))
                }
            }
            "out" => spec.out = PathBuf::from(value),
            "fixed_placement" => spec.fixed_placement = parse_bool(value).ok_or_else(bad)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    let recipe = recipe.unwrap_or(Recipe::Custom);
    let preset = recipe.preset();
    spec.recipe = recipe;
    spec.grid = if recipe == Recipe::Custom {
        vec![GridPoint {
            pod: cfg.pod,
            sod: cfg.sod,
            poe: cfg.poe,
        }]
    } else {
        preset.grid
    };
    spec.runs = runs.unwrap_or(preset.runs);
    spec.users = users.unwrap_or(preset.users);
    cfg.static_field = static_field.or(preset.static_field).unwrap_or(false);

    cfg.validate()?;
    spec.validate()?;
    Ok((cfg, spec))
}

/// Start nodes of run `run_index`. Exit-node starts are never drawn.
pub fn placement(g: &NavGraph, users: Users, run_seed: u64) -> Vec<NodeId> {
    match users {
        Users::AllNodes => g.non_exit_nodes(),
        Users::Random(count) => {
            let candidates = g.non_exit_nodes();
            if candidates.is_empty() {
                return vec![g.exit(); count];
            }
            let mut rng = rng::stream(run_seed, Stream::Placement);
            (0..count)
                .map(|_| candidates[rng.gen_range(0..candidates.len())])
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateMetric>,
}

/// One grid point's paired runs, in run order.
#[derive(Debug, Clone)]
pub struct PointRuns {
    pub point: GridPoint,
    pub runs: Vec<PairedRun>,
}

#[derive(Debug, Clone)]
pub struct PairedRun {
    pub run_id: usize,
    pub run_seed: u64,
    pub ideal: Arc<RunResult>,
    pub perturbed: RunResult,
}

impl PairedRun {
    /// `(perturbed, ideal)` arrival pairs, exit starts excluded.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.ideal
            .evacuees
            .iter()
            .zip(&self.perturbed.evacuees)
            .filter(|(i, _)| i.arrival > 0.0)
            .map(|(i, p)| (p.arrival, i.arrival))
            .collect()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, ConfigError> {
    if workers == 0 {
        return Err(ConfigError::Invalid("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start worker pool: {e}")))
}

/// Runs every grid point `spec.runs` times on `workers` threads.
///
/// The ideal member of a pair depends only on the run seed, so it is
/// simulated once per run and shared by every grid point.
pub fn simulate_grid(
    g: &NavGraph,
    cfg: &ScenarioConfig,
    spec: &ExperimentSpec,
    workers: usize,
) -> Result<Vec<PointRuns>> {
    spec.validate()?;
    cfg.validate()?;
    let pool = pool(workers)?;
    let seeds: Vec<u64> = (0..spec.runs)
        .map(|r| rng::run_seed(cfg.master_seed, r as u64))
        .collect();
    let placement_seed = |r: usize| if spec.fixed_placement { seeds[0] } else { seeds[r] };
    let starts: Vec<Vec<NodeId>> = (0..spec.runs)
        .map(|r| placement(g, spec.users, placement_seed(r)))
        .collect();

    let ideal_cfg = cfg.ideal();
    let ideals: Vec<Arc<RunResult>> = pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|r| run_seeded(g, &ideal_cfg, &starts[r], seeds[r]).map(Arc::new))
            .collect::<Result<_, _>>()
    })?;

    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|p| (0..spec.runs).map(move |r| (p, r)))
        .collect();
    let perturbed: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, r)| run_seeded(g, &spec.grid[p].apply(cfg), &starts[r], seeds[r]))
            .collect::<Result<_, _>>()
    })?;

    let mut perturbed = perturbed.into_iter();
    Ok(spec
        .grid
        .iter()
        .map(|&point| PointRuns {
            point,
            runs: (0..spec.runs)
                .map(|r| PairedRun {
                    run_id: r,
                    run_seed: seeds[r],
                    ideal: Arc::clone(&ideals[r]),
                    perturbed: perturbed.next().expect("one result per job"),
                })
                .collect(),
        })
        .collect())
}

/// Flattens paired runs into CSV rows ordered by grid point, run, node id.
pub fn collect_rows(points: &[PointRuns]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for pr in points {
        for run in &pr.runs {
            let mut order: Vec<usize> = (0..run.ideal.evacuees.len()).collect();
            order.sort_by_key(|&i| (run.ideal.evacuees[i].start, i));
            for i in order {
                let (ideal, actual) = (&run.ideal.evacuees[i], &run.perturbed.evacuees[i]);
                let Ok(metric) = NodeMetric::new(ideal.start, ideal.arrival, actual.arrival) else {
                    continue;
                };
                rows.push(ResultRow {
                    run_id: run.run_id,
                    seed: run.run_seed,
                    pod: pr.point.pod,
                    sod: pr.point.sod,
                    poe: pr.point.poe,
                    metric,
                    deadline_violated: actual.deadline_violated,
                });
            }
        }
    }
    rows
}

pub fn run_parallel(
    g: &NavGraph,
    cfg: &ScenarioConfig,
    spec: &ExperimentSpec,
    workers: usize,
) -> Result<ExperimentOutput> {
    let points = simulate_grid(g, cfg, spec, workers)?;
    let rows = collect_rows(&points);
    let mut aggregates = Vec::with_capacity(points.len());
    for pr in &points {
        let point_rows: Vec<ResultRow> = rows
            .iter()
            .filter(|r| r.pod == pr.point.pod && r.sod == pr.point.sod && r.poe == pr.point.poe)
            .cloned()
            .collect();
        if point_rows.is_empty() {
            continue;
        }
        aggregates.push(metrics::aggregate(&point_rows, spec.runs)?);
    }
    Ok(ExperimentOutput { rows, aggregates })
}

/// Single-worker run of a recipe.
pub fn run_recipe(g: &NavGraph, cfg: &ScenarioConfig, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    run_parallel(g, cfg, spec, 1)
}

/// Writes `runs.csv` and `aggregate.csv` under `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let runs = dir.join("runs.csv");
    let aggregate = dir.join("aggregate.csv");
    metrics::write_results_csv(&output.rows, &runs)?;
    metrics::write_aggregate_csv(&output.aggregates, &aggregate)?;
    Ok((runs, aggregate))
}

/// Table of `delta_avg` per grid point. `<sod` marks the largest value over
/// SoD at fixed (PoD, PoE); `<pod` the largest over PoD at fixed (SoD, PoE).
pub fn summary_table(aggs: &[AggregateMetric]) -> String {
    let argmax = |same: &dyn Fn(&AggregateMetric, &AggregateMetric) -> bool, a: &AggregateMetric| {
        let group: Vec<&AggregateMetric> = aggs.iter().filter(|b| same(a, b)).collect();
        group.len() > 1
            && group
                .iter()
                .all(|b| b.delta_avg <= a.delta_avg)
    };
    let same_sod_group = |a: &AggregateMetric, b: &AggregateMetric| a.pod == b.pod && a.poe == b.poe;
    let same_pod_group = |a: &AggregateMetric, b: &AggregateMetric| a.sod == b.sod && a.poe == b.poe;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6} {:>4} {:>6} {:>5} {:>13} {:>9} {:>12} {:>9}  flags",
        "pod", "sod", "poe", "runs", "delta_avg", "frac_pos", "mean_arr_s", "viol"
    );
    let mut sorted: Vec<&AggregateMetric> = aggs.iter().collect();
    sorted.sort_by(|a, b| {
        a.pod
            .total_cmp(&b.pod)
            .then(a.sod.cmp(&b.sod))
            .then(a.poe.total_cmp(&b.poe))
    });
    for a in sorted {
        let mut flags = Vec::new();
        if argmax(&same_sod_group, a) {
            flags.push("<sod");
        }
        if argmax(&same_pod_group, a) {
            flags.push("<pod");
        }
        let _ = writeln!(
            out,
            "{:>6.2} {:>4} {:>6.2} {:>5} {:>13.6} {:>9.4} {:>12.2} {:>9.4}  {}",
            a.pod,
            a.sod,
            a.poe,
            a.runs,
            a.delta_avg,
            a.fraction_positive,
            a.mean_arrival,
            a.violation_rate,
            flags.join(" ")
        );
    }
    out
}
