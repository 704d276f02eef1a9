//! `gcmg`: experiment runner and price-file predictor.
//!
//! Exit status: 0 success, 1 configuration error, 2 runtime or data error.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gcmg::experiment::{
    default_points, parse_flat_config, predict_report, predict_summary, run_experiment,
    ExperimentKind, ExperimentSpec, GridOverrides, PredictSpec, SourceSpec,
};
use gcmg::game::{GameKind, PayoffKind, SpaceMode};

#[derive(Parser, Debug)]
#[command(name = "gcmg", version, about = "Minority/majority game sign predictor and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correctness over N and S at fixed m (single agents, random draws, RSS, FSS).
    NsSweep(SweepArgs),
    /// Minority against majority over the N grid.
    MinVsMaj(SweepArgs),
    /// Correctness over the discount factor on the regime-switch source.
    LambdaSweep(SweepArgs),
    /// Running correctness around a regime switch for a few discount factors.
    RegimeSwitch(SweepArgs),
    /// Correctness over the memory length.
    MSweep(SweepArgs),
    /// Per-strategy utility trajectories.
    UtilityTrace(SweepArgs),
    /// Predicts the return signs of a price file and compares with a Wiener filter.
    Predict(PredictArgs),
}

/// Game parameters shared by every subcommand. Lists are comma separated.
#[derive(Args, Debug, Default)]
struct GameArgs {
    /// Memory length(s).
    #[arg(long)]
    m: Option<String>,
    /// Number(s) of agents.
    #[arg(long)]
    n: Option<String>,
    /// Strategies per agent (random draw only).
    #[arg(long)]
    s: Option<String>,
    /// Discount factor(s).
    #[arg(long)]
    lambda: Option<String>,
    /// step, prop or scaled.
    #[arg(long)]
    payoff: Option<String>,
    /// minority or majority.
    #[arg(long)]
    kind: Option<String>,
    /// draw, rss or fss.
    #[arg(long)]
    space: Option<String>,
    /// Adds the abstaining zero strategy to every agent.
    #[arg(long)]
    grand_canonical: bool,
    /// Base seed.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Window of the windowed correctness.
    #[arg(long)]
    window: Option<String>,
    /// Flat key=value file; command-line flags win over its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// Steps learned on but not scored.
    #[arg(long)]
    warmup: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<String>,
    /// ar3, iid, regime-switch[:T], ar:c1,c2,..., or csv:COLUMN:DELIM:PATH.
    #[arg(long)]
    source: Option<String>,
    /// Runs only these grid point ids.
    #[arg(long)]
    point: Option<String>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Price file (CSV with a header row).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Price column name.
    #[arg(long)]
    column: Option<String>,
    /// Field delimiter, one character.
    #[arg(long)]
    delimiter: Option<String>,
    /// Order of the Wiener baseline.
    #[arg(long)]
    wiener_order: Option<String>,
    /// Also writes the utility of every strategy at every step.
    #[arg(long)]
    trace: bool,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn config_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, err: err.into() }
}

impl From<gcmg::Error> for Failure {
    fn from(e: gcmg::Error) -> Self {
        Failure {
            code: if e.is_config() { 1 } else { 2 },
            err: e.into(),
        }
    }
}

const SWEEP_KEYS: &[&str] = &[
    "m", "n", "s", "lambda", "payoff", "kind", "space", "grand-canonical", "seed", "out",
    "replicas", "horizon", "warmup", "jobs", "source", "point", "experiment",
];
const PREDICT_KEYS: &[&str] = &[
    "m", "n", "s", "lambda", "payoff", "kind", "space", "grand-canonical", "seed", "out", "window",
    "input", "column", "delimiter", "wiener-order", "trace",
];

/// Config-file values overlaid with the flags that were given.
struct Settings {
    values: BTreeMap<String, String>,
    /// Point definitions carried by a manifest used as config.
    manifest: Option<String>,
}

impl Settings {
    fn load(path: Option<&PathBuf>, allowed: &[&str]) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Settings { values: BTreeMap::new(), manifest: None });
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(config_err)?;
        let mut values = parse_flat_config(&text)?;
        let has_points = values.keys().any(|k| k.starts_with("point."));
        values.retain(|k, _| !k.starts_with("point.") && !k.starts_with("status."));
        let normalized: BTreeMap<String, String> =
            values.into_iter().map(|(k, v)| (k.replace('_', "-"), v)).collect();
        if let Some(bad) = normalized.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(config_err(anyhow!("{}: unknown key `{bad}`", path.display())));
        }
        Ok(Settings {
            values: normalized,
            manifest: has_points.then_some(text),
        })
    }

    fn set(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    fn apply_game(&mut self, g: &GameArgs) {
        self.set("m", g.m.as_ref());
        self.set("n", g.n.as_ref());
        self.set("s", g.s.as_ref());
        self.set("lambda", g.lambda.as_ref());
        self.set("payoff", g.payoff.as_ref());
        self.set("kind", g.kind.as_ref());
        self.set("space", g.space.as_ref());
        self.set("seed", g.seed.as_ref());
        self.set("window", g.window.as_ref());
        self.set("out", g.out.as_ref().map(|p| p.display()));
        if g.grand_canonical {
            self.values.insert("grand-canonical".into(), "true".into());
        }
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| config_err(anyhow!("--{key} `{v}`: {e}")))
            })
            .transpose()
    }

    fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<T>()
                            .map_err(|e| config_err(anyhow!("--{key} `{x}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn single<T: Copy>(key: &str, values: Option<Vec<T>>) -> Result<Option<T>, Failure> {
    match values.as_deref() {
        None => Ok(None),
        Some([v]) => Ok(Some(*v)),
        Some(_) => Err(config_err(anyhow!("--{key} takes a single value here"))),
    }
}

fn sweep(kind: ExperimentKind, args: SweepArgs) -> Result<(), Failure> {
    let mut st = Settings::load(args.game.config.as_ref(), SWEEP_KEYS)?;
    if let Some(name) = st.values.get("experiment") {
        let named: ExperimentKind = name.parse().map_err(|e: String| config_err(anyhow!(e)))?;
        if named != kind {
            return Err(config_err(anyhow!(
                "config is for `{}`, not `{}`",
                named.name(),
                kind.name()
            )));
        }
    }
    st.apply_game(&args.game);
    if st.values.contains_key("window") {
        return Err(config_err(anyhow!("--window only applies to predict")));
    }
    st.set("replicas", args.replicas.as_ref());
    st.set("horizon", args.horizon.as_ref());
    st.set("warmup", args.warmup.as_ref());
    st.set("jobs", args.jobs.as_ref());
    st.set("source", args.source.as_ref());
    st.set("point", args.point.as_ref());

    let overrides = GridOverrides {
        n: st.list("n")?,
        s: st.list("s")?,
        m: st.list("m")?,
        lambda: st.list("lambda")?,
        kind: st.get::<GameKind>("kind")?,
        payoff: st.get::<PayoffKind>("payoff")?,
        space: st.get::<SpaceMode>("space")?,
        grand_canonical: st.get::<bool>("grand-canonical")?,
    };
    let mut spec = match &st.manifest {
        Some(text) if overrides == GridOverrides::default() => ExperimentSpec::from_manifest(text)?,
        _ => {
            let mut spec = ExperimentSpec::new(kind);
            spec.points = default_points(kind, &overrides);
            spec
        }
    };
    spec.kind = kind;
    if let Some(v) = st.get("replicas")? {
        spec.replicas = v;
    }
    if let Some(v) = st.get("horizon")? {
        spec.horizon = v;
    }
    if let Some(v) = st.get("warmup")? {
        spec.warmup = v;
    }
    if let Some(v) = st.get("seed")? {
        spec.base_seed = v;
    }
    if let Some(v) = st.get("jobs")? {
        spec.jobs = v;
    }
    if let Some(v) = st.get::<SourceSpec>("source")? {
        spec.source = v;
    }
    spec.only_points = st.list("point")?;
    spec.out_dir = Some(
        st.get::<PathBuf>("out")?
            .unwrap_or_else(|| PathBuf::from("results").join(kind.name())),
    );

    let result = run_experiment(&spec)?;
    println!("experiment={} source={} replicas={} horizon={}", kind.name(), spec.source, spec.replicas, spec.horizon);
    println!("{:>5}  {:<58} {:>9} {:>9}", "point", "parameters", "psi_mean", "psi_std");
    for row in &result.aggregate {
        println!(
            "{:>5}  {:<58} {:>9.4} {:>9.4}",
            row.point_id,
            gcmg::experiment::point_params(&row.config),
            row.psi_mean,
            row.psi_std
        );
    }
    if let Some(c) = result.ceiling_mean() {
        println!("oracle ceiling mean={c:.4}");
    }
    let out = spec.out_dir.as_ref().expect("set above");
    println!("wrote {}", out.display());
    if !result.is_complete() {
        for f in &result.failures {
            eprintln!("point {} replica {}: {}", f.point_id, f.replica, f.message);
        }
        return Err(Failure {
            code: 2,
            err: anyhow!("{} run(s) failed; see manifest.txt", result.failures.len()),
        });
    }
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), Failure> {
    let mut st = Settings::load(args.game.config.as_ref(), PREDICT_KEYS)?;
    st.apply_game(&args.game);
    st.set("input", args.input.as_ref().map(|p| p.display()));
    st.set("column", args.column.as_ref());
    st.set("delimiter", args.delimiter.as_ref());
    st.set("wiener-order", args.wiener_order.as_ref());
    if args.trace {
        st.values.insert("trace".into(), "true".into());
    }

    let input: PathBuf = st
        .get("input")?
        .ok_or_else(|| config_err(anyhow!("--input is required")))?;
    let m = single("m", st.list::<u32>("m")?)?.unwrap_or(1);
    let mut spec = PredictSpec::new(input, m);
    if let Some(n) = single("n", st.list("n")?)? {
        spec.game.n = n;
    }
    if let Some(l) = single("lambda", st.list("lambda")?)? {
        spec.game.lambda = l;
    }
    if let Some(k) = st.get("kind")? {
        spec.game.kind = k;
    }
    if let Some(p) = st.get("payoff")? {
        spec.game.payoff = p;
    }
    if let Some(sp) = st.get::<SpaceMode>("space")? {
        spec.game.space_mode = sp;
    }
    if let Some(s) = single("s", st.list("s")?)? {
        spec.game.s = s;
    } else if spec.game.space_mode == SpaceMode::RandomDraw {
        spec.game.s = 2;
    }
    spec.game.s = match spec.game.space_mode {
        SpaceMode::RandomDraw => spec.game.s,
        _ => spec.game.strategies_per_agent(),
    };
    if let Some(g) = st.get("grand-canonical")? {
        spec.game.grand_canonical = g;
    }
    if let Some(seed) = st.get("seed")? {
        spec.game.seed = seed;
    }
    if let Some(w) = st.get("window")? {
        spec.window = w;
    }
    if let Some(c) = st.get::<String>("column")? {
        spec.csv.column = c;
    }
    if let Some(d) = st.get::<String>("delimiter")? {
        let d = if d == "\\t" || d == "tab" { "\t".to_string() } else { d };
        if d.len() != 1 {
            return Err(config_err(anyhow!("--delimiter must be one byte, got `{d}`")));
        }
        spec.csv.delimiter = d.as_bytes()[0];
    }
    if let Some(o) = st.get("wiener-order")? {
        spec.wiener_order = o;
    }
    spec.trace = st.get("trace")?.unwrap_or(false);
    spec.out_dir = Some(
        st.get::<PathBuf>("out")?
            .unwrap_or_else(|| PathBuf::from("results").join("predict")),
    );

    let report = predict_report(&spec)?;
    print!("{}", predict_summary(&spec, &report));
    println!("wrote {}", spec.out_dir.as_ref().expect("set above").display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::NsSweep(a) => sweep(ExperimentKind::NsSweep, a),
        Command::MinVsMaj(a) => sweep(ExperimentKind::MinVsMaj, a),
        Command::LambdaSweep(a) => sweep(ExperimentKind::LambdaSweep, a),
        Command::RegimeSwitch(a) => sweep(ExperimentKind::RegimeSwitch, a),
        Command::MSweep(a) => sweep(ExperimentKind::MSweep, a),
        Command::UtilityTrace(a) => sweep(ExperimentKind::UtilityTrace, a),
        Command::Predict(a) => predict(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
