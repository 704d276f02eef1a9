//! Acceptance report: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p gcmg-core --release --test acceptance`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use gcmg::experiment::{
    default_points, mean_std, predict_report, raw_csv, aggregate_csv, run_experiment,
    ExperimentKind, ExperimentSpec, GridOverrides, PredictSpec, SweepResult,
};
use gcmg::game::{Agent, Game, GameConfig, GameKind, PayoffKind, SpaceMode};
use gcmg::predictor::psi_max_oracle;
use gcmg::signal::{ArProcess, Replay, BENCHMARK_AR3};
use gcmg::strategy::{generate_rss, History, Strategy};
use gcmg::wiener::fit_wiener;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REPLICAS: usize = 10;
const HORIZON: usize = 3000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sweep(kind: ExperimentKind) -> SweepResult {
    let mut spec = ExperimentSpec::new(kind);
    spec.replicas = REPLICAS;
    spec.horizon = HORIZON;
    spec.base_seed = 0;
    let result = run_experiment(&spec).expect("sweep runs");
    assert!(result.is_complete(), "{:?}", result.failures);
    result
}

fn find(result: &SweepResult, pred: impl Fn(&GameConfig) -> bool) -> f64 {
    result
        .aggregate
        .iter()
        .find(|r| pred(&r.config))
        .expect("grid point present")
        .psi_mean
}

fn criterion_1(ns: &SweepResult) -> (Outcome, f64) {
    let psi: Vec<f64> = ns.ceiling.iter().map(|c| c.psi_max).collect();
    let (mean, std) = mean_std(&psi);
    let var = std * std;
    let pass = psi.len() == REPLICAS && (mean - 0.77).abs() <= 0.02 && var < 0.01;
    (
        outcome(pass, format!("mean={mean:.4} (0.77 +- 0.02), var={var:.2e} (< 0.01), n={}", psi.len())),
        mean,
    )
}

fn criterion_2(ns: &SweepResult, ceiling: f64) -> Outcome {
    let fss = find(ns, |c| c.space_mode == SpaceMode::AllFss);
    let draw32 = find(ns, |c| c.space_mode == SpaceMode::RandomDraw && c.n == 32 && c.s == 2);
    let gap = ceiling - fss;
    let lead = fss - draw32;
    outcome(
        gap.abs() <= 0.05 && lead >= 0.03,
        format!(
            "FSS={fss:.4}, ceiling={ceiling:.4}, |gap|={:.4} (<= 0.05); N=32,S=2 {draw32:.4}, lead={lead:.4} (>= 0.03)",
            gap.abs()
        ),
    )
}

fn criterion_3(ns: &SweepResult) -> Outcome {
    let fss = find(ns, |c| c.space_mode == SpaceMode::AllFss);
    let rss = find(ns, |c| c.space_mode == SpaceMode::AllRss);
    let d = (fss - rss).abs();
    outcome(d < 0.03, format!("FSS={fss:.4}, RSS={rss:.4}, |diff|={d:.4} (< 0.03)"))
}

fn criterion_4() -> Outcome {
    let mm = sweep(ExperimentKind::MinVsMaj);
    let ns: Vec<usize> = {
        let mut v: Vec<usize> = mm.aggregate.iter().map(|r| r.config.n).collect();
        v.dedup();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for n in ns {
        let min = find(&mm, |c| c.n == n && c.kind == GameKind::Minority);
        let maj = find(&mm, |c| c.n == n && c.kind == GameKind::Majority);
        worst = worst.max((min - maj).abs());
        let _ = write!(detail, " N={n}:{:+.3}", maj - min);
    }
    outcome(worst < 0.05, format!("max |dPsi|={worst:.4} (< 0.05); maj-min{detail}"))
}

fn criterion_5() -> Outcome {
    let rs = sweep(ExperimentKind::RegimeSwitch);
    let at = |r: &SweepResult, l: f64| find(r, |c| c.lambda == l);
    let adapt = at(&rs, 0.97) - at(&rs, 1.0);

    let ls = sweep(ExperimentKind::LambdaSweep);
    let grid: Vec<(f64, f64)> = ls.aggregate.iter().map(|r| (r.config.lambda, r.psi_mean)).collect();
    let best = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let target = grid.iter().position(|&(l, _)| l == 0.97).unwrap();
    let peak_ok = best.abs_diff(target) <= 1;
    let curve: Vec<String> = grid.iter().map(|(l, p)| format!("{l}:{p:.4}")).collect();
    outcome(
        adapt >= 0.05 && peak_ok,
        format!(
            "Psi(0.97)-Psi(1.0)={adapt:.4} (>= 0.05); sweep peak at lambda={} ({}) [{}]",
            grid[best].0,
            if peak_ok { "within one step of 0.97" } else { "off target" },
            curve.join(" ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let steps = 10_000;
    let transient = 1_000;
    let mut per_seed = Vec::new();
    for seed in 0..REPLICAS as u64 {
        let cfg = GameConfig {
            n: 64,
            s: 2,
            m: 3,
            payoff: PayoffKind::Proportional,
            kind: GameKind::Majority,
            seed,
            ..GameConfig::default()
        };
        let mut game = Game::new(cfg).unwrap();
        let mut sum = 0.0;
        for t in 0..steps {
            let step = game.step_endogenous();
            if t >= transient {
                sum += step.majority_fraction(64);
            }
        }
        per_seed.push(sum / (steps - transient) as f64);
    }
    let (mean, _) = mean_std(&per_seed);
    outcome(
        (mean - 0.75).abs() <= 0.05,
        format!("majority fraction={mean:.4} (0.75 +- 0.05), N=64 S=2 m=3 over {REPLICAS} seeds"),
    )
}

fn mirrored(s: &Strategy) -> Strategy {
    let p = s.table().len();
    Strategy::from_table((0..p).map(|i| -s.table()[p - 1 - i]).collect()).unwrap()
}

fn random_agents(rng: &mut ChaCha8Rng, n: usize, s: usize, m: u32, gc: bool) -> Vec<Agent> {
    (0..n)
        .map(|_| {
            let st = (0..s).map(|_| Strategy::from_bits(m, rng.random())).collect();
            Agent::new(st, gc)
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let mut failed = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // utility recursion at lambda = 1 and the pinned zero strategy
    let mut recursion_ok = true;
    let mut zero_ok = true;
    for trial in 0..20u64 {
        let m = 3;
        let agents = random_agents(&mut rng, 5, 3, m, true);
        let start = History::from_index(m, 0).unwrap();
        let cfg = GameConfig { m, seed: trial, ..GameConfig::default() };
        let mut game = Game::with_agents(cfg, agents.clone(), start).unwrap();
        let mut sums = vec![vec![0i64; 4]; agents.len()];
        let mut h = start;
        for _ in 0..300 {
            let y: i8 = if rng.random() { 1 } else { -1 };
            for (a, sum) in agents.iter().zip(&mut sums) {
                for (k, st) in a.strategies().iter().enumerate() {
                    sum[k] -= i64::from(st.action(&h)) * i64::from(y);
                }
            }
            game.step_exogenous(y);
            h.push(y);
        }
        for (a, sum) in game.agents().iter().zip(&sums) {
            recursion_ok &= a.utilities().iter().zip(sum).all(|(u, s)| *u == *s as f64);
            zero_ok &= a.utilities()[a.zero_strategy().unwrap()] == 0.0;
        }
        let cfg = GameConfig {
            n: 11,
            s: 2,
            m: 2,
            lambda: 0.9,
            grand_canonical: true,
            payoff: PayoffKind::Proportional,
            seed: trial,
            ..GameConfig::default()
        };
        let mut g = Game::new(cfg).unwrap();
        for _ in 0..300 {
            g.step_endogenous();
        }
        zero_ok &= g.agents().iter().all(|a| a.utilities()[a.zero_strategy().unwrap()] == 0.0);
    }
    if !recursion_ok {
        failed.push("utility recursion");
    }
    if !zero_ok {
        failed.push("zero strategy");
    }

    // sign-flip symmetry
    let mut flip_ok = true;
    for trial in 0..20u64 {
        let m = 3;
        let agents = random_agents(&mut rng, 7, 2, m, false);
        let flipped = agents
            .iter()
            .map(|a| Agent::new(a.strategies().iter().map(mirrored).collect(), false))
            .collect();
        let cfg = GameConfig { m, seed: trial, ..GameConfig::default() };
        let mut a = Game::with_agents(cfg.clone(), agents, History::from_index(m, 3).unwrap()).unwrap();
        let mut b = Game::with_agents(cfg, flipped, History::from_index(m, 4).unwrap()).unwrap();
        for _ in 0..300 {
            let y: i8 = if rng.random() { 1 } else { -1 };
            flip_ok &= a.step_exogenous(y) == -b.step_exogenous(-y);
        }
    }
    if !flip_ok {
        failed.push("sign flip");
    }

    // encode/decode bijection
    let bijection = (1..=10u32).all(|m| {
        (0..1usize << m).all(|i| {
            History::encode(&History::from_index(m, i).unwrap().decode()).unwrap().index() == i
        })
    });
    if !bijection {
        failed.push("encode/decode");
    }

    // RSS distance spectrum
    let spectrum = (1..=5u32).all(|m| {
        let rss = generate_rss(m).unwrap();
        rss.iter().enumerate().all(|(i, a)| {
            rss[i + 1..].iter().all(|b| {
                let d = a.hamming_distance(b);
                d == 0.5 || d == 1.0
            })
        })
    });
    if !spectrum {
        failed.push("RSS spectrum");
    }

    // determinism across schedules
    let run = |jobs| {
        let mut spec = ExperimentSpec::new(ExperimentKind::MinVsMaj);
        spec.points = default_points(
            ExperimentKind::MinVsMaj,
            &GridOverrides { n: Some(vec![1, 5, 17]), ..Default::default() },
        );
        spec.replicas = 4;
        spec.horizon = 500;
        spec.jobs = jobs;
        let r = run_experiment(&spec).unwrap();
        (raw_csv(&r.raw), aggregate_csv(&r.aggregate))
    };
    if run(1) != run(4) {
        failed.push("determinism");
    }

    // Wiener recovery
    let xs = ArProcess::benchmark(99).generate(100_000);
    let w = fit_wiener(&xs, 3).unwrap();
    let wiener_ok = w.weights().iter().zip(BENCHMARK_AR3).all(|(w, c)| (w - c).abs() <= 0.05);
    if !wiener_ok {
        failed.push("Wiener recovery");
    }

    let detail = if failed.is_empty() {
        "recursion, zero strategy, sign flip, bijection m<=10, RSS spectrum m<=5, determinism, Wiener +-0.05 all hold".into()
    } else {
        format!("failed: {}", failed.join(", "))
    };
    outcome(failed.is_empty(), detail)
}

fn criterion_8() -> Outcome {
    let ms = sweep(ExperimentKind::MSweep);
    let psi = |m: u32| find(&ms, |c| c.m == m);
    let (p1, p2, p5) = (psi(1), psi(2), psi(5));
    let monotone = p1 >= p2 && p2 >= p5;

    // end-to-end predict on synthetic prices, compared with the oracle per realization
    let dir = std::env::temp_dir().join(format!("gcmg-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut gaps = Vec::new();
    for seed in 0..REPLICAS as u64 {
        let ys = ArProcess::benchmark(1000 + seed).with_burn_in(100).generate(HORIZON + 1);
        let mut csv = String::from("t,close\n");
        let mut price = 100.0f64;
        let _ = writeln!(csv, "0,{price}");
        for (t, y) in ys.iter().enumerate() {
            price *= 1.0 + 0.01 * y;
            let _ = writeln!(csv, "{},{price}", t + 1);
        }
        let path: PathBuf = dir.join(format!("prices_{seed}.csv"));
        std::fs::write(&path, csv).unwrap();

        let mut spec = PredictSpec::new(&path, 3);
        spec.game.seed = seed;
        let report = predict_report(&spec).unwrap();

        // the game scores samples m.. of the return series; the oracle scores the same ones
        let m = 3;
        let past: Vec<f64> = ys[..m].iter().rev().copied().collect();
        let mut replay = Replay::new(ys[m..].to_vec()).with_ar_model(&BENCHMARK_AR3, &past);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let oracle = psi_max_oracle(&mut replay, ys.len() - m, &mut rng).unwrap();
        gaps.push((report.run.psi_final, oracle.psi));
    }
    std::fs::remove_dir_all(&dir).ok();
    let worst = gaps.iter().map(|(g, o)| (o - g).abs()).fold(0.0, f64::max);
    let mean_game = gaps.iter().map(|g| g.0).sum::<f64>() / gaps.len() as f64;
    let mean_oracle = gaps.iter().map(|g| g.1).sum::<f64>() / gaps.len() as f64;
    let predict_ok = worst <= 0.05;
    outcome(
        monotone && predict_ok,
        format!(
            "m-sweep Psi(1)={p1:.4} >= Psi(2)={p2:.4} >= Psi(5)={p5:.4}: {}; predict vs oracle: mean {mean_game:.4} vs {mean_oracle:.4}, worst |gap|={worst:.4} (<= 0.05): {}",
            if monotone { "ok" } else { "violated" },
            if predict_ok { "ok" } else { "violated" }
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--list`; answer them without running
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }

    let ns = sweep(ExperimentKind::NsSweep);
    let (c1, ceiling) = criterion_1(&ns);
    let results = [
        ("1 oracle ceiling", c1),
        ("2 FSS near ceiling", criterion_2(&ns, ceiling)),
        ("3 RSS ~ FSS", criterion_3(&ns)),
        ("4 minority ~ majority", criterion_4()),
        ("5 lambda adaptation", criterion_5()),
        ("6 endogenous majority", criterion_6()),
        ("7 property suites", criterion_7()),
        ("8 m-sweep and predict", criterion_8()),
    ];
    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let passed = results.iter().filter(|r| r.1.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
