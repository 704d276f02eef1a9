//! Replicated parameter sweeps over the predictor, plus the single-file
//! `predict` report.
//!
//! A sweep is a list of grid points (game configurations) times a number of
//! replicas. Replica `r` uses seed `base_seed + r` for the game; the signal
//! realization is derived from that seed too, so every grid point of a replica
//! sees the same series. Runs may execute on a worker pool, but rows are
//! always assembled in (point, replica) order, so the CSVs do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{GameConfig, GameKind, PayoffKind, SpaceMode};
use crate::predictor::{psi_max_oracle, psi_windowed, run_prediction, RunOptions, RunResult};
use crate::signal::{
    load_prices, ArProcess, IidNoise, PriceCsvOptions, RegimeSwitchSource, ReturnSeries,
    SignalSource, DEFAULT_SWITCH_T,
};
use crate::wiener::{evaluate_wiener, WienerEvaluation};

pub const DEFAULT_HORIZON: usize = 3000;
pub const DEFAULT_REPLICAS: usize = 10;
pub const DEFAULT_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    NsSweep,
    MinVsMaj,
    LambdaSweep,
    RegimeSwitch,
    MSweep,
    UtilityTrace,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::NsSweep,
        ExperimentKind::MinVsMaj,
        ExperimentKind::LambdaSweep,
        ExperimentKind::RegimeSwitch,
        ExperimentKind::MSweep,
        ExperimentKind::UtilityTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NsSweep => "ns-sweep",
            ExperimentKind::MinVsMaj => "min-vs-maj",
            ExperimentKind::LambdaSweep => "lambda-sweep",
            ExperimentKind::RegimeSwitch => "regime-switch",
            ExperimentKind::MSweep => "m-sweep",
            ExperimentKind::UtilityTrace => "utility-trace",
        }
    }

    pub fn default_source(self) -> SourceSpec {
        match self {
            ExperimentKind::NsSweep | ExperimentKind::MinVsMaj => SourceSpec::Benchmark,
            ExperimentKind::LambdaSweep
            | ExperimentKind::RegimeSwitch
            | ExperimentKind::UtilityTrace => SourceSpec::RegimeSwitch {
                switch_t: DEFAULT_SWITCH_T,
            },
            ExperimentKind::MSweep => SourceSpec::Ar {
                coeffs: vec![ANTI_CORRELATED_LAG1],
            },
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.trim().replace('_', "-");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// Lag-1 coefficient of the default m-sweep source.
pub const ANTI_CORRELATED_LAG1: f64 = -0.5;

/// Where samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// The stationary benchmark AR(3).
    Benchmark,
    /// Benchmark AR(3) replaced by the switched AR(3) after `switch_t` samples.
    RegimeSwitch { switch_t: usize },
    /// Unit-noise AR process with the given coefficients.
    Ar { coeffs: Vec<f64> },
    Iid,
    /// Returns of a price file; identical for every replica.
    Csv { path: PathBuf, opts: PriceCsvOptions },
}

/// Seed of the signal realization for a replica seed, decorrelated from the
/// game's own stream.
pub fn source_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
}

impl SourceSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn SignalSource + Send>> {
        let s = source_seed(seed);
        Ok(match self {
            SourceSpec::Benchmark => Box::new(ArProcess::benchmark(s)),
            SourceSpec::RegimeSwitch { switch_t } => {
                Box::new(RegimeSwitchSource::benchmark_at(s, *switch_t))
            }
            SourceSpec::Ar { coeffs } => Box::new(ArProcess::new(coeffs, 1.0, s)?),
            SourceSpec::Iid => Box::new(IidNoise::new(s)),
            SourceSpec::Csv { path, opts } => Box::new(load_prices(path, opts)?.source()),
        })
    }

    pub fn has_known_mean(&self) -> bool {
        !matches!(self, SourceSpec::Csv { .. })
    }
}

impl std::fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceSpec::Benchmark => f.write_str("ar3"),
            SourceSpec::RegimeSwitch { switch_t } => write!(f, "regime-switch:{switch_t}"),
            SourceSpec::Ar { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(f64::to_string).collect();
                write!(f, "ar:{}", c.join(","))
            }
            SourceSpec::Iid => f.write_str("iid"),
            SourceSpec::Csv { path, opts } => write!(
                f,
                "csv:{}:{}:{}",
                opts.column,
                opts.delimiter as char,
                path.display()
            ),
        }
    }
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "ar3" => Ok(SourceSpec::Benchmark),
            "iid" => Ok(SourceSpec::Iid),
            "regime-switch" => Ok(SourceSpec::RegimeSwitch {
                switch_t: if rest.is_empty() {
                    DEFAULT_SWITCH_T
                } else {
                    rest.parse().map_err(|_| format!("bad switch time `{rest}`"))?
                },
            }),
            "ar" => {
                let coeffs = rest
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| format!("bad AR coefficients `{rest}`"))?;
                Ok(SourceSpec::Ar { coeffs })
            }
            "csv" => {
                let mut parts = rest.splitn(3, ':');
                let column = parts.next().unwrap_or_default();
                let delim = parts.next().unwrap_or_default();
                let path = parts.next().unwrap_or_default();
                if column.is_empty() || delim.len() != 1 || path.is_empty() {
                    return Err(format!("expected csv:COLUMN:DELIM:PATH, got `{s}`"));
                }
                Ok(SourceSpec::Csv {
                    path: PathBuf::from(path),
                    opts: PriceCsvOptions {
                        column: column.to_string(),
                        delimiter: delim.as_bytes()[0],
                        memory: 1,
                    },
                })
            }
            _ => Err(format!("unknown source `{s}`")),
        }
    }
}

/// Value lists that replace an experiment's default grid axes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridOverrides {
    pub n: Option<Vec<usize>>,
    pub s: Option<Vec<usize>>,
    pub m: Option<Vec<u32>>,
    pub lambda: Option<Vec<f64>>,
    pub kind: Option<GameKind>,
    pub payoff: Option<PayoffKind>,
    pub space: Option<SpaceMode>,
    pub grand_canonical: Option<bool>,
}

impl GridOverrides {
    fn touches_shape(&self) -> bool {
        self.n.is_some() || self.s.is_some() || self.space.is_some()
    }
}

/// Cartesian block of grid points.
#[derive(Debug, Clone)]
struct Axes {
    n: Vec<usize>,
    s: Vec<usize>,
    m: Vec<u32>,
    lambda: Vec<f64>,
    kind: Vec<GameKind>,
    payoff: PayoffKind,
    space: SpaceMode,
    grand_canonical: bool,
}

impl Axes {
    fn single(space: SpaceMode) -> Self {
        Axes {
            n: vec![1],
            s: vec![2],
            m: vec![3],
            lambda: vec![1.0],
            kind: vec![GameKind::Minority],
            payoff: PayoffKind::Step,
            space,
            grand_canonical: false,
        }
    }

    fn apply(&mut self, o: &GridOverrides) {
        if let Some(v) = &o.n {
            self.n = v.clone();
        }
        if let Some(v) = &o.s {
            self.s = v.clone();
        }
        if let Some(v) = &o.m {
            self.m = v.clone();
        }
        if let Some(v) = &o.lambda {
            self.lambda = v.clone();
        }
        if let Some(k) = o.kind {
            self.kind = vec![k];
        }
        if let Some(p) = o.payoff {
            self.payoff = p;
        }
        if let Some(s) = o.space {
            self.space = s;
        }
        if let Some(g) = o.grand_canonical {
            self.grand_canonical = g;
        }
    }

    fn expand(&self, out: &mut Vec<GameConfig>) {
        let s_axis: Vec<usize> = match self.space {
            SpaceMode::RandomDraw => self.s.clone(),
            _ => vec![0],
        };
        for &m in &self.m {
            for &kind in &self.kind {
                for &n in &self.n {
                    for &s in &s_axis {
                        for &lambda in &self.lambda {
                            let mut cfg = GameConfig {
                                n,
                                s,
                                m,
                                lambda,
                                payoff: self.payoff,
                                kind,
                                grand_canonical: self.grand_canonical,
                                space_mode: self.space,
                                ..GameConfig::default()
                            };
                            if self.space != SpaceMode::RandomDraw {
                                cfg.s = cfg.strategies_per_agent();
                            }
                            out.push(cfg);
                        }
                    }
                }
            }
        }
    }
}

/// Default grid of an experiment, with `overrides` applied.
pub fn default_points(kind: ExperimentKind, overrides: &GridOverrides) -> Vec<GameConfig> {
    let blocks: Vec<Axes> = match kind {
        ExperimentKind::NsSweep if !overrides.touches_shape() => {
            let mut s2 = Axes::single(SpaceMode::RandomDraw);
            s2.n = vec![1, 2, 4, 8, 16, 32, 64, 128];
            let mut s5 = Axes::single(SpaceMode::RandomDraw);
            s5.s = vec![5];
            s5.n = vec![1, 2, 4, 8, 16, 32, 64];
            let mut n1 = Axes::single(SpaceMode::RandomDraw);
            n1.s = vec![4, 8, 16, 32, 64, 128, 256];
            vec![
                s2,
                s5,
                n1,
                Axes::single(SpaceMode::AllRss),
                Axes::single(SpaceMode::AllFss),
            ]
        }
        ExperimentKind::NsSweep => vec![Axes::single(SpaceMode::RandomDraw)],
        ExperimentKind::MinVsMaj => {
            let mut a = Axes::single(SpaceMode::RandomDraw);
            a.n = vec![1, 3, 5, 9, 17, 33, 65, 129];
            a.kind = vec![GameKind::Minority, GameKind::Majority];
            vec![a]
        }
        ExperimentKind::LambdaSweep => {
            let mut a = Axes::single(SpaceMode::AllRss);
            a.lambda = vec![0.7, 0.9, 0.95, 0.97, 0.99, 1.0];
            vec![a]
        }
        ExperimentKind::RegimeSwitch => {
            let mut a = Axes::single(SpaceMode::AllRss);
            a.lambda = vec![0.7, 0.97, 1.0];
            vec![a]
        }
        ExperimentKind::MSweep => {
            let mut a = Axes::single(SpaceMode::AllRss);
            a.m = vec![1, 2, 5];
            a.lambda = vec![0.97];
            vec![a]
        }
        ExperimentKind::UtilityTrace => {
            let mut a = Axes::single(SpaceMode::AllRss);
            a.lambda = vec![1.0, 0.97];
            vec![a]
        }
    };
    let mut out = Vec::new();
    for mut b in blocks {
        b.apply(overrides);
        b.expand(&mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub points: Vec<GameConfig>,
    pub source: SourceSpec,
    pub replicas: usize,
    pub base_seed: u64,
    pub horizon: usize,
    pub warmup: usize,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub out_dir: Option<PathBuf>,
    /// Restrict the run to these point ids (all when `None`).
    pub only_points: Option<Vec<usize>>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            points: default_points(kind, &GridOverrides::default()),
            source: kind.default_source(),
            replicas: DEFAULT_REPLICAS,
            base_seed: 0,
            horizon: DEFAULT_HORIZON,
            warmup: 0,
            jobs: 0,
            out_dir: None,
            only_points: None,
        }
    }

    pub fn replica_seed(&self, replica: usize) -> u64 {
        self.base_seed.wrapping_add(replica as u64)
    }

    /// Every problem with the spec, found before any run starts.
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::config("grid", "no grid points"));
        }
        if self.replicas == 0 {
            return Err(Error::config("replicas", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.warmup >= self.horizon {
            return Err(Error::config("warmup", "must be smaller than the horizon"));
        }
        for cfg in &self.points {
            cfg.validate()?;
        }
        if let Some(ids) = &self.only_points {
            if let Some(bad) = ids.iter().find(|&&i| i >= self.points.len()) {
                return Err(Error::config(
                    "point",
                    format!("point {bad} does not exist ({} points)", self.points.len()),
                ));
            }
        }
        if let SourceSpec::Ar { coeffs } = &self.source {
            if coeffs.is_empty() {
                return Err(Error::config("source", "AR source needs coefficients"));
            }
        }
        Ok(())
    }

    /// Flat `key=value` text that [`ExperimentSpec::from_manifest`] reads back.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gcmg experiment manifest");
        let _ = writeln!(out, "experiment={}", self.kind.name());
        let _ = writeln!(out, "source={}", self.source);
        let _ = writeln!(out, "horizon={}", self.horizon);
        let _ = writeln!(out, "warmup={}", self.warmup);
        let _ = writeln!(out, "replicas={}", self.replicas);
        let _ = writeln!(out, "seed={}", self.base_seed);
        for (id, cfg) in self.points.iter().enumerate() {
            let _ = writeln!(out, "point.{id}={}", point_params(cfg));
        }
        out
    }

    /// Rebuilds a spec from a manifest (or any flat config naming the experiment).
    pub fn from_manifest(text: &str) -> Result<Self> {
        let kv = parse_flat_config(text)?;
        let kind: ExperimentKind = kv
            .get("experiment")
            .ok_or_else(|| Error::config("experiment", "missing"))?
            .parse()
            .map_err(|e| Error::config("experiment", e))?;
        let mut spec = ExperimentSpec::new(kind);
        if let Some(v) = kv.get("source") {
            spec.source = v.parse().map_err(|e| Error::config("source", e))?;
        }
        let num = |key: &'static str| -> Result<Option<u64>> {
            kv.get(key)
                .map(|v| v.parse::<u64>().map_err(|_| Error::config(key, format!("bad value `{v}`"))))
                .transpose()
        };
        if let Some(v) = num("horizon")? {
            spec.horizon = v as usize;
        }
        if let Some(v) = num("warmup")? {
            spec.warmup = v as usize;
        }
        if let Some(v) = num("replicas")? {
            spec.replicas = v as usize;
        }
        if let Some(v) = num("seed")? {
            spec.base_seed = v;
        }
        let mut points = BTreeMap::new();
        for (k, v) in &kv {
            if let Some(id) = k.strip_prefix("point.") {
                let id: usize = id
                    .parse()
                    .map_err(|_| Error::config("point", format!("bad point key `{k}`")))?;
                points.insert(id, parse_point_params(v)?);
            }
        }
        if !points.is_empty() {
            if points.keys().copied().ne(0..points.len()) {
                return Err(Error::config("point", "point ids must be 0..n without gaps"));
            }
            spec.points = points.into_values().collect();
        }
        Ok(spec)
    }
}

/// `n=1 s=16 m=3 lambda=0.97 kind=minority payoff=step space=rss gc=false`
pub fn point_params(cfg: &GameConfig) -> String {
    format!(
        "n={} s={} m={} lambda={} kind={} payoff={} space={} gc={}",
        cfg.n,
        cfg.s,
        cfg.m,
        cfg.lambda,
        cfg.kind,
        cfg.payoff,
        cfg.space_mode,
        cfg.grand_canonical
    )
}

fn parse_point_params(text: &str) -> Result<GameConfig> {
    let mut cfg = GameConfig::default();
    for tok in text.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::config("point", format!("bad token `{tok}`")))?;
        let bad = |field: &'static str| Error::config(field, format!("bad value `{v}`"));
        match k {
            "n" => cfg.n = v.parse().map_err(|_| bad("n"))?,
            "s" => cfg.s = v.parse().map_err(|_| bad("s"))?,
            "m" => cfg.m = v.parse().map_err(|_| bad("m"))?,
            "lambda" => cfg.lambda = v.parse().map_err(|_| bad("lambda"))?,
            "kind" => cfg.kind = v.parse().map_err(|_| bad("kind"))?,
            "payoff" => cfg.payoff = v.parse().map_err(|_| bad("payoff"))?,
            "space" => cfg.space_mode = v.parse().map_err(|_| bad("space"))?,
            "gc" => cfg.grand_canonical = v.parse().map_err(|_| bad("gc"))?,
            _ => return Err(Error::config("point", format!("unknown key `{k}`"))),
        }
    }
    Ok(cfg)
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
/// Later keys win.
pub fn parse_flat_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config("config", format!("line {}: expected key=value", i + 1))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub point_id: usize,
    pub replica: usize,
    pub seed: u64,
    pub psi_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub point_id: usize,
    pub config: GameConfig,
    pub psi_mean: f64,
    /// Sample standard deviation over replicas (0 for a single replica).
    pub psi_std: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeilingRow {
    pub replica: usize,
    pub seed: u64,
    pub psi_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub point_id: usize,
    pub replica: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
    /// Oracle correctness per replica, when the source's process is known.
    pub ceiling: Vec<CeilingRow>,
    /// Mean running correctness per step, one column per point.
    pub trajectories: Vec<(usize, Vec<f64>)>,
    pub failures: Vec<Failure>,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn point(&self, id: usize) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.point_id == id)
    }

    pub fn ceiling_mean(&self) -> Option<f64> {
        (!self.ceiling.is_empty())
            .then(|| self.ceiling.iter().map(|c| c.psi_max).sum::<f64>() / self.ceiling.len() as f64)
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Recomputes the per-point aggregate from raw rows.
pub fn aggregate(points: &[GameConfig], raw: &[RawRow]) -> Vec<AggregateRow> {
    let mut by_point: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in raw {
        by_point.entry(row.point_id).or_default().push(row.psi_final);
    }
    by_point
        .into_iter()
        .map(|(point_id, psis)| {
            let (psi_mean, psi_std) = mean_std(&psis);
            AggregateRow {
                point_id,
                config: points[point_id].clone(),
                psi_mean,
                psi_std,
                replicas: psis.len(),
            }
        })
        .collect()
}

/// Runs one (point, replica) cell.
pub fn run_cell(spec: &ExperimentSpec, point_id: usize, replica: usize) -> Result<RunResult> {
    let seed = spec.replica_seed(replica);
    let cfg = GameConfig {
        seed,
        ..spec.points[point_id].clone()
    };
    let mut source = spec.source.build(seed)?;
    let opts = RunOptions {
        warmup: spec.warmup,
        record_utilities: spec.kind == ExperimentKind::UtilityTrace && replica == 0,
    };
    run_prediction(&cfg, &mut source, spec.horizon, opts)
}

fn ceiling_cell(spec: &ExperimentSpec, replica: usize) -> Result<CeilingRow> {
    let seed = spec.replica_seed(replica);
    let mut source = spec.source.build(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = psi_max_oracle(&mut source, spec.horizon, &mut rng)?;
    Ok(CeilingRow {
        replica,
        seed,
        psi_max: run.psi,
    })
}

/// Executes every (point, replica) cell and, if `spec.out_dir` is set, writes
/// `raw.csv`, `aggregate.csv`, `manifest.txt` and the experiment's extra files.
///
/// A failing cell does not stop the sweep; it is reported in
/// [`SweepResult::failures`] and marked in the manifest.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let point_ids: Vec<usize> = match &spec.only_points {
        Some(ids) => ids.clone(),
        None => (0..spec.points.len()).collect(),
    };
    let cells: Vec<(usize, usize)> = point_ids
        .iter()
        .flat_map(|&p| (0..spec.replicas).map(move |r| (p, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .expect("thread pool");
    let (outcomes, ceiling): (Vec<Result<RunResult>>, Vec<Result<CeilingRow>>) = pool.install(|| {
        let outcomes = cells
            .par_iter()
            .map(|&(p, r)| run_cell(spec, p, r))
            .collect();
        let ceiling = if spec.source.has_known_mean() {
            (0..spec.replicas)
                .into_par_iter()
                .map(|r| ceiling_cell(spec, r))
                .collect()
        } else {
            Vec::new()
        };
        (outcomes, ceiling)
    });

    let mut result = SweepResult::default();
    let mut traces: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    let mut utility_runs: Vec<(usize, RunResult)> = Vec::new();
    for (&(point_id, replica), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(run) => {
                result.raw.push(RawRow {
                    point_id,
                    replica,
                    seed: spec.replica_seed(replica),
                    psi_final: run.psi_final,
                });
                if spec.kind == ExperimentKind::RegimeSwitch {
                    traces
                        .entry(point_id)
                        .or_default()
                        .push(run.records.iter().map(|r| r.psi_running).collect());
                }
                if spec.kind == ExperimentKind::UtilityTrace && replica == 0 {
                    utility_runs.push((point_id, run));
                }
            }
            Err(e) => result.failures.push(Failure {
                point_id,
                replica,
                message: e.to_string(),
            }),
        }
    }
    result.ceiling = ceiling.into_iter().filter_map(Result::ok).collect();
    result.aggregate = aggregate(&spec.points, &result.raw);
    result.trajectories = traces
        .into_iter()
        .map(|(id, runs)| {
            let len = runs.iter().map(Vec::len).min().unwrap_or(0);
            let mean = (0..len)
                .map(|t| runs.iter().map(|r| r[t]).sum::<f64>() / runs.len() as f64)
                .collect();
            (id, mean)
        })
        .collect();

    if let Some(dir) = &spec.out_dir {
        write_outputs(dir, spec, &result, &utility_runs)?;
    }
    Ok(result)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn raw_csv(rows: &[RawRow]) -> String {
    let mut out = String::from("point_id,replica,seed,psi_final\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.point_id, r.replica, r.seed, r.psi_final);
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out =
        String::from("point_id,n,s,m,lambda,kind,payoff,space,gc,psi_mean,psi_std,replicas\n");
    for r in rows {
        let c = &r.config;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point_id,
            c.n,
            c.s,
            c.m,
            c.lambda,
            c.kind,
            c.payoff,
            c.space_mode,
            c.grand_canonical,
            r.psi_mean,
            r.psi_std,
            r.replicas
        );
    }
    out
}

fn write_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    result: &SweepResult,
    utility_runs: &[(usize, RunResult)],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("raw.csv"), &raw_csv(&result.raw))?;
    write_file(&dir.join("aggregate.csv"), &aggregate_csv(&result.aggregate))?;

    if !result.ceiling.is_empty() {
        let mut out = String::from("replica,seed,psi_max\n");
        for c in &result.ceiling {
            let _ = writeln!(out, "{},{},{}", c.replica, c.seed, c.psi_max);
        }
        write_file(&dir.join("ceiling.csv"), &out)?;
    }

    if !result.trajectories.is_empty() {
        let mut out = String::from("t");
        for (id, _) in &result.trajectories {
            let _ = write!(out, ",point_{id}");
        }
        out.push('\n');
        let len = result.trajectories.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
        for t in 0..len {
            let _ = write!(out, "{}", t + 1);
            for (_, v) in &result.trajectories {
                let _ = write!(out, ",{}", v[t]);
            }
            out.push('\n');
        }
        write_file(&dir.join("trajectory.csv"), &out)?;
    }

    for (point_id, run) in utility_runs {
        let game = crate::game::Game::new(spec.points[*point_id].clone())?;
        let labels: Vec<String> = game.agents()[0]
            .strategies()
            .iter()
            .map(|s| s.label())
            .collect();
        write_file(
            &dir.join(format!("utilities_point_{point_id}.csv")),
            &utilities_csv(run, &labels),
        )?;
    }

    let mut manifest = spec.manifest();
    let failed: BTreeMap<usize, &Failure> =
        result.failures.iter().map(|f| (f.point_id, f)).collect();
    let ids: Vec<usize> = spec
        .only_points
        .clone()
        .unwrap_or_else(|| (0..spec.points.len()).collect());
    for id in ids {
        match failed.get(&id) {
            None => {
                let _ = writeln!(manifest, "status.{id}=complete");
            }
            Some(f) => {
                let _ = writeln!(
                    manifest,
                    "status.{id}=incomplete (replica {}: {})",
                    f.replica,
                    f.message.replace('\n', " ")
                );
            }
        }
    }
    write_file(&dir.join("manifest.txt"), &manifest)
}

fn utilities_csv(run: &RunResult, labels: &[String]) -> String {
    let mut out = String::from("t");
    for l in labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for r in &run.records {
        let _ = write!(out, "{}", r.t);
        for u in r.utilities.iter().flatten() {
            let _ = write!(out, ",{u}");
        }
        out.push('\n');
    }
    out
}

/// Settings of the `predict` report.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictSpec {
    pub input: PathBuf,
    pub csv: PriceCsvOptions,
    pub game: GameConfig,
    pub window: usize,
    pub wiener_order: usize,
    pub trace: bool,
    pub out_dir: Option<PathBuf>,
}

impl PredictSpec {
    /// Single agent over the reduced space with `lambda = 0.97`.
    pub fn new(input: impl Into<PathBuf>, m: u32) -> Self {
        PredictSpec {
            input: input.into(),
            csv: PriceCsvOptions {
                memory: m,
                ..PriceCsvOptions::default()
            },
            game: GameConfig {
                n: 1,
                m,
                lambda: 0.97,
                space_mode: SpaceMode::AllRss,
                s: 2 << m,
                ..GameConfig::default()
            },
            window: DEFAULT_WINDOW,
            wiener_order: 1,
            trace: false,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub series: ReturnSeries,
    pub run: RunResult,
    pub windowed: Vec<f64>,
    /// Game correctness restricted to the second half of the series, the part
    /// the Wiener baseline is evaluated on.
    pub psi_test_half: f64,
    pub wiener: std::result::Result<WienerEvaluation, String>,
}

/// Runs the predictor over the returns of a price file and the Wiener baseline
/// next to it.
pub fn predict_report(spec: &PredictSpec) -> Result<PredictReport> {
    spec.game.validate()?;
    if spec.window == 0 {
        return Err(Error::config("window", "must be at least 1"));
    }
    let mut csv = spec.csv.clone();
    csv.memory = spec.game.m;
    let series = load_prices(&spec.input, &csv)?;
    report_for_series(spec, series)
}

/// As [`predict_report`] for an already loaded series.
pub fn report_for_series(spec: &PredictSpec, series: ReturnSeries) -> Result<PredictReport> {
    let m = spec.game.m as usize;
    if series.nonzero_count() == 0 {
        return Err(Error::Degenerate(format!(
            "all {} returns are zero; correctness is undefined",
            series.len()
        )));
    }
    if series.len() <= m {
        return Err(Error::InsufficientData(format!(
            "{} returns, need more than m={m}",
            series.len()
        )));
    }
    let horizon = series.len() - m;
    let opts = RunOptions {
        warmup: 0,
        record_utilities: spec.trace,
    };
    let run = run_prediction(&spec.game, &mut series.source(), horizon, opts)?;
    let hits = run.hits();
    let windowed = psi_windowed(&hits, spec.window);

    // record t is 1-based over samples m..; sample index = m + t - 1
    let split = series.len() / 2;
    let test: Vec<bool> = run
        .records
        .iter()
        .filter(|r| m + r.t > split)
        .map(|r| r.hit())
        .collect();
    let psi_test_half = if test.is_empty() {
        f64::NAN
    } else {
        crate::predictor::psi_running(&test)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.game.seed);
    let wiener =
        evaluate_wiener(&series.returns, spec.wiener_order, &mut rng).map_err(|e| e.to_string());

    let report = PredictReport {
        series,
        run,
        windowed,
        psi_test_half,
        wiener,
    };
    if let Some(dir) = &spec.out_dir {
        write_predict_outputs(dir, spec, &report)?;
    }
    Ok(report)
}

fn write_predict_outputs(dir: &Path, spec: &PredictSpec, report: &PredictReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = String::from("t,predicted,realized,hit,psi_running,psi_window\n");
    for (r, w) in report.run.records.iter().zip(&report.windowed) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            r.predicted,
            r.realized,
            u8::from(r.hit()),
            r.psi_running,
            w
        );
    }
    write_file(&dir.join("predictions.csv"), &out)?;

    if spec.trace {
        let game = crate::game::Game::new(spec.game.clone())?;
        let labels: Vec<String> = game.agents()[0]
            .strategies()
            .iter()
            .map(|s| s.label())
            .collect();
        write_file(&dir.join("utilities.csv"), &utilities_csv(&report.run, &labels))?;
    }
    write_file(&dir.join("summary.txt"), &predict_summary(spec, report))
}

pub fn predict_summary(spec: &PredictSpec, report: &PredictReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "input={}", spec.input.display());
    let _ = writeln!(out, "column={}", spec.csv.column);
    let _ = writeln!(out, "returns={}", report.series.len());
    let _ = writeln!(out, "zero_returns_skipped={}", report.run.skipped);
    let _ = writeln!(out, "game={}", point_params(&spec.game));
    let _ = writeln!(out, "seed={}", spec.game.seed);
    let _ = writeln!(out, "window={}", spec.window);
    let _ = writeln!(out, "psi_final={}", report.run.psi_final);
    let _ = writeln!(out, "psi_test_half={}", report.psi_test_half);
    match &report.wiener {
        Ok(w) => {
            let _ = writeln!(out, "wiener_order={}", w.filter.order());
            let weights: Vec<String> = w.filter.weights().iter().map(f64::to_string).collect();
            let _ = writeln!(out, "wiener_weights={}", weights.join(","));
            let _ = writeln!(out, "wiener_psi_test_half={}", w.psi);
        }
        Err(e) => {
            let _ = writeln!(out, "wiener_error={e}");
        }
    }
    out
}
