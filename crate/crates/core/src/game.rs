//! One instance of the (grand canonical) minority or majority game.
//!
//! Agents hold a fixed set of strategies with real-valued utilities. Every
//! step each agent plays its highest-utility strategy, the actions are summed
//! into the aggregate demand `A`, and then every strategy (played or not) is
//! scored on the current history:
//!
//! ```text
//! U <- lambda * U + Phi,   Phi = -a * g(X) (minority)   or   +a * g(X) (majority)
//! ```
//!
//! `X` is the game's own demand `A` in endogenous mode. In exogenous mode the
//! history is fed from outside and `X = N * sgn(y)` for the realized sign of
//! the external series, so a strategy that called the sign right is rewarded
//! under majority scoring and penalized under minority scoring.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sign::{coin, sgn, sgn_int};
use crate::strategy::{
    draw_strategies, generate_fss_with_limit, generate_rss, History, Strategy,
    DEFAULT_FSS_MAX_MEMORY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameKind {
    Minority,
    Majority,
}

impl GameKind {
    /// +1 for majority scoring, -1 for minority scoring.
    fn orientation(self) -> f64 {
        match self {
            GameKind::Minority => -1.0,
            GameKind::Majority => 1.0,
        }
    }

    /// The winning side for demand `a`; a zero demand is a coin flip.
    pub fn winning_action<R: Rng + ?Sized>(self, a: i64, rng: &mut R) -> i8 {
        match self {
            GameKind::Minority => minority_action(a, rng),
            GameKind::Majority => majority_action(a, rng),
        }
    }
}

/// The odd payoff function `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffKind {
    /// g(x) = sgn(x)
    Step,
    /// g(x) = x
    Proportional,
    /// g(x) = x / N
    Scaled,
}

impl PayoffKind {
    pub fn g(self, x: f64, n: usize) -> f64 {
        match self {
            PayoffKind::Step => f64::from(sgn(x)),
            PayoffKind::Proportional => x,
            PayoffKind::Scaled => x / n as f64,
        }
    }
}

/// How the agents' strategy sets are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceMode {
    /// Each agent draws `S` distinct tables uniformly from the full space.
    RandomDraw,
    /// A single agent holds the whole reduced space.
    AllRss,
    /// A single agent holds the whole full space.
    AllFss,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name $(| $alias)* => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

str_enum!(GameKind { Minority => "minority" | "min", Majority => "majority" | "maj" });
str_enum!(PayoffKind { Step => "step", Proportional => "prop" | "proportional", Scaled => "scaled" });
str_enum!(SpaceMode { RandomDraw => "draw", AllRss => "rss", AllFss => "fss" });

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub n: usize,
    /// Strategies per agent. Ignored unless `space_mode` is `RandomDraw`.
    pub s: usize,
    pub m: u32,
    pub lambda: f64,
    pub payoff: PayoffKind,
    pub kind: GameKind,
    pub grand_canonical: bool,
    pub space_mode: SpaceMode,
    pub seed: u64,
    pub fss_max_memory: u32,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            n: 1,
            s: 2,
            m: 3,
            lambda: 1.0,
            payoff: PayoffKind::Step,
            kind: GameKind::Minority,
            grand_canonical: false,
            space_mode: SpaceMode::RandomDraw,
            seed: 0,
            fss_max_memory: DEFAULT_FSS_MAX_MEMORY,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "need at least one agent"));
        }
        if self.m == 0 || self.m > crate::strategy::MAX_MEMORY {
            return Err(Error::config(
                "m",
                format!("must be in 1..={}", crate::strategy::MAX_MEMORY),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(
                "lambda",
                format!("must lie in [0, 1], got {}", self.lambda),
            ));
        }
        match self.space_mode {
            SpaceMode::RandomDraw => {
                if self.s == 0 {
                    return Err(Error::config("s", "need at least one strategy per agent"));
                }
            }
            SpaceMode::AllRss | SpaceMode::AllFss => {
                if self.space_mode == SpaceMode::AllFss
                    && self.m > self.fss_max_memory.min(crate::strategy::FSS_HARD_MAX_MEMORY)
                {
                    return Err(Error::Capacity {
                        what: format!("full strategy space for m={}", self.m),
                        limit: format!(
                            "m <= {}",
                            self.fss_max_memory.min(crate::strategy::FSS_HARD_MAX_MEMORY)
                        ),
                    });
                }
                if self.n != 1 {
                    return Err(Error::config(
                        "n",
                        format!(
                            "space mode `{}` gives one agent the whole space; n must be 1, got {}",
                            self.space_mode, self.n
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Strategies per agent, not counting the zero strategy.
    pub fn strategies_per_agent(&self) -> usize {
        match self.space_mode {
            SpaceMode::RandomDraw => self.s,
            SpaceMode::AllRss => 2usize << self.m,
            SpaceMode::AllFss => crate::strategy::fss_size(self.m).unwrap_or(u64::MAX) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    strategies: Vec<Strategy>,
    utilities: Vec<f64>,
}

impl Agent {
    /// All utilities start at 0. With `grand_canonical` a zero strategy is appended last.
    pub fn new(mut strategies: Vec<Strategy>, grand_canonical: bool) -> Self {
        if grand_canonical {
            let m = strategies.first().map_or(1, Strategy::memory);
            strategies.push(Strategy::zero(m));
        }
        let utilities = vec![0.0; strategies.len()];
        Agent {
            strategies,
            utilities,
        }
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn set_utilities(&mut self, utilities: &[f64]) {
        assert_eq!(utilities.len(), self.utilities.len());
        self.utilities.copy_from_slice(utilities);
    }

    pub fn zero_strategy(&self) -> Option<usize> {
        self.strategies.iter().position(Strategy::is_zero)
    }

    fn score(&mut self, h: &History, lambda: f64, kind: GameKind, g: f64) {
        let orient = kind.orientation();
        for (u, s) in self.utilities.iter_mut().zip(&self.strategies) {
            let a = f64::from(s.action(h));
            *u = lambda * *u + orient * a * g;
        }
    }
}

/// Greedy choice: index of the highest utility, ties broken uniformly.
/// The rng is drawn from only when there is a tie.
pub fn choose_strategy<R: Rng + ?Sized>(agent: &Agent, rng: &mut R) -> usize {
    assert!(!agent.utilities.is_empty(), "agent has no strategies");
    let best = agent
        .utilities
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut ties = agent
        .utilities
        .iter()
        .enumerate()
        .filter(|(_, &u)| u == best)
        .map(|(i, _)| i);
    let first = ties.next().expect("max is attained");
    let rest: Vec<usize> = ties.collect();
    if rest.is_empty() {
        return first;
    }
    let pick = rng.random_range(0..=rest.len());
    if pick == 0 {
        first
    } else {
        rest[pick - 1]
    }
}

pub fn aggregate_demand(actions: &[i8]) -> i64 {
    actions.iter().map(|&a| i64::from(a)).sum()
}

/// `-sgn(A)`, with `A = 0` resolved by a fair coin.
pub fn minority_action<R: Rng + ?Sized>(a: i64, rng: &mut R) -> i8 {
    match sgn_int(a) {
        0 => coin(rng),
        s => -s,
    }
}

/// `sgn(A)`, with `A = 0` resolved by a fair coin.
pub fn majority_action<R: Rng + ?Sized>(a: i64, rng: &mut R) -> i8 {
    match sgn_int(a) {
        0 => coin(rng),
        s => s,
    }
}

/// Payoff of playing `action` when the outcome signal is `outcome`.
pub fn payoff(action: i8, outcome: f64, kind: GameKind, payoff: PayoffKind, n: usize) -> f64 {
    kind.orientation() * f64::from(action) * payoff.g(outcome, n)
}

/// What one endogenous step produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndogenousStep {
    pub demand: i64,
    /// Winning decision appended to the history.
    pub decision: i8,
    pub buyers: usize,
    pub sellers: usize,
}

impl EndogenousStep {
    pub fn active(&self) -> usize {
        self.buyers + self.sellers
    }

    /// Share of all `n` agents on the more crowded side.
    pub fn majority_fraction(&self, n: usize) -> f64 {
        self.buyers.max(self.sellers) as f64 / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct Game {
    cfg: GameConfig,
    agents: Vec<Agent>,
    history: History,
    t: u64,
    last_demand: i64,
    chosen: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Game {
    /// Builds agents per the space mode, then a random initial history, all
    /// from the rng seeded with `cfg.seed`.
    pub fn new(cfg: GameConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let agents = match cfg.space_mode {
            SpaceMode::RandomDraw => (0..cfg.n)
                .map(|_| {
                    draw_strategies(cfg.m, cfg.s, &mut rng)
                        .map(|s| Agent::new(s, cfg.grand_canonical))
                })
                .collect::<Result<Vec<_>>>()?,
            SpaceMode::AllRss => vec![Agent::new(generate_rss(cfg.m)?, cfg.grand_canonical)],
            SpaceMode::AllFss => vec![Agent::new(
                generate_fss_with_limit(cfg.m, cfg.fss_max_memory)?,
                cfg.grand_canonical,
            )],
        };
        let signs: Vec<i8> = (0..cfg.m).map(|_| coin(&mut rng)).collect();
        let history = History::encode(&signs)?;
        Ok(Game {
            chosen: vec![0; agents.len()],
            cfg,
            agents,
            history,
            t: 0,
            last_demand: 0,
            rng,
        })
    }

    /// A game over explicitly supplied agents. `cfg.n` is taken from `agents`,
    /// `cfg.space_mode` is ignored, and no rng draws happen before the first step.
    pub fn with_agents(mut cfg: GameConfig, agents: Vec<Agent>, history: History) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::config("n", "need at least one agent"));
        }
        cfg.n = agents.len();
        cfg.space_mode = SpaceMode::RandomDraw;
        cfg.s = cfg.s.max(1);
        cfg.m = history.memory();
        cfg.validate()?;
        let p = 1usize << cfg.m;
        for agent in &agents {
            if agent.strategies.is_empty() {
                return Err(Error::config("s", "agent without strategies"));
            }
            if agent.strategies.iter().any(|s| s.table().len() != p) {
                return Err(Error::config("m", "strategy table length differs from 2^m"));
            }
        }
        Ok(Game {
            chosen: vec![0; agents.len()],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            agents,
            history,
            t: 0,
            last_demand: 0,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn history(&self) -> History {
        self.history
    }

    pub fn set_history(&mut self, history: History) {
        assert_eq!(history.memory(), self.cfg.m, "history memory mismatch");
        self.history = history;
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn last_demand(&self) -> i64 {
        self.last_demand
    }

    /// Index of the strategy each agent played in the last step.
    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Every agent plays its best strategy on the current history; returns the
    /// actions and records the demand.
    fn play(&mut self) -> Vec<i8> {
        let h = self.history;
        let mut actions = Vec::with_capacity(self.agents.len());
        for (agent, chosen) in self.agents.iter().zip(self.chosen.iter_mut()) {
            let idx = choose_strategy(agent, &mut self.rng);
            *chosen = idx;
            actions.push(agent.strategies[idx].action(&h));
        }
        self.last_demand = aggregate_demand(&actions);
        actions
    }

    /// Scores every strategy of every agent on the current history against
    /// `outcome` (the argument of `g`): `U <- lambda * U + Phi`.
    pub fn update_utilities(&mut self, outcome: f64) {
        let g = self.cfg.payoff.g(outcome, self.cfg.n);
        let h = self.history;
        for agent in &mut self.agents {
            agent.score(&h, self.cfg.lambda, self.cfg.kind, g);
        }
    }

    /// One prediction step on an external series. Returns the forecast of
    /// `next_sign`, then learns from it and shifts it into the history.
    pub fn step_exogenous(&mut self, next_sign: i8) -> i8 {
        assert!(next_sign == 1 || next_sign == -1, "realized sign must be +-1");
        self.play();
        let forecast = self.cfg.kind.winning_action(self.last_demand, &mut self.rng);
        self.update_utilities((self.cfg.n as f64) * f64::from(next_sign));
        self.history.push(next_sign);
        self.t += 1;
        forecast
    }

    /// One step of the self-referential game: the winning decision becomes
    /// the next history entry and payoffs use the realized demand.
    pub fn step_endogenous(&mut self) -> EndogenousStep {
        let actions = self.play();
        let demand = self.last_demand;
        let decision = self.cfg.kind.winning_action(demand, &mut self.rng);
        self.update_utilities(demand as f64);
        self.history.push(decision);
        self.t += 1;
        EndogenousStep {
            demand,
            decision,
            buyers: actions.iter().filter(|&&a| a > 0).count(),
            sellers: actions.iter().filter(|&&a| a < 0).count(),
        }
    }
}
