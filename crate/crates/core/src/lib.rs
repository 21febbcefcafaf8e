//! Monte Carlo simulator for C-V2X Mode 4 broadcast scheduling.
//!
//! Target vehicles run semi-persistent scheduling (SPS), optionally
//! interleaved with one-shot transmissions. Smart DoS attackers watch which
//! resources carried decodable packets during the last sensing window and jam
//! one of them, always reselecting when their hold counter expires. The
//! channel is fully connected and loses packets only to collisions.
//!
//! The crate is organized bottom-up:
//!
//! - [`config`]: scenario parameters, defaults, validation and overrides
//! - [`rng`]: per-agent deterministic random streams
//! - [`ledger`]: sliding-window resource usage observations
//! - [`sps`]: the target-vehicle SPS / one-shot state machine
//! - [`attacker`]: the smart attacker
//! - [`channel`]: collision resolution and the per-replication loop
//! - [`metrics`]: PDR, inter-packet gap and age-of-information statistics
//! - [`sweep`]: experiment grids, parallel replications and result tables

pub mod attacker;
pub mod channel;
pub mod config;
pub mod ledger;
pub mod metrics;
pub mod rng;
pub mod sps;
pub mod sweep;
pub mod trace;

pub use attacker::AttackerState;
pub use channel::{resolve_period, run_replication, PeriodReport, Simulation};
pub use config::{AttackerInterval, ConfigError, IntRange, ScenarioConfig, SelectionPolicy};
pub use ledger::UsageLedger;
pub use metrics::{Histogram, MetricsStore, Summary};
pub use rng::{AgentId, RngStreams, SimRng};
pub use sps::{SpsParams, TxDecision, VehicleState};
pub use sweep::{builtin_sweeps, run_sweep, SweepSpec, SweepTable};
