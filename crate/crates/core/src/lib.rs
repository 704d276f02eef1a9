//! Grand canonical minority and majority games used as one-step sign
//! predictors for time series.
//!
//! The building blocks, bottom up:
//!
//! - [`strategy`]: m-bit histories, strategy tables, the full and reduced strategy spaces.
//! - [`game`]: agents, greedy choice, payoffs and the discounted utility update.
//! - [`signal`]: AR processes, regime switches, recorded series and price CSV ingestion.
//! - [`predictor`]: the game run as a sign forecaster, running/windowed correctness and
//!   the ceiling attained by the true conditional mean.
//! - [`wiener`]: the FIR Wiener linear predictor baseline.
//! - [`experiment`]: replicated parameter sweeps written to CSV.

pub mod error;
pub mod experiment;
pub mod game;
pub mod predictor;
pub mod sign;
pub mod signal;
pub mod strategy;
pub mod wiener;

pub use error::{Error, Result};
pub use game::{Agent, Game, GameConfig, GameKind, PayoffKind, SpaceMode};
pub use predictor::{
    psi_max_oracle, psi_running, psi_windowed, run_prediction, PredictionRecord, RunOptions,
    RunResult,
};
pub use signal::{ArProcess, RegimeSwitchSource, ReturnSeries, SignalSource};
pub use strategy::{History, Strategy};
pub use wiener::WienerFilter;
