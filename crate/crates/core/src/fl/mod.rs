//! Federated training orchestration: device profiles, aggregation, timing
//! rules, early stopping and the event-driven round scheduler.

mod ops;
mod scenario;
mod sim;

use thiserror::Error;

use crate::adversary::{AdversaryError, AdversarySpec};
use crate::config::ConfigIssue;
use crate::data::DataError;
use crate::kernel::KernelError;
use crate::learning::LearningError;
use crate::net::{NetError, Position};

pub use ops::{aggregate, compute_time, early_stop, effective_batch, gossip_select, init_seed, local_update, train_seed, AggregateError};
pub use scenario::Scenario;
pub use sim::{run_simulation, run_simulation_with_stop, RunOutput};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    /// Relative compute rate.
    pub speed_factor: f64,
    pub ram_mb: u64,
    /// bits/second, applied to both directions of every link.
    pub bandwidth_cap: f64,
    pub has_accelerator: bool,
    pub adversary: AdversarySpec,
    /// Only used in wireless mode.
    pub mobile: bool,
    /// Initial position in wireless mode; drawn in the arena when absent.
    pub position: Option<Position>,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        Self {
            speed_factor: 1.0,
            ram_mb: 4096,
            bandwidth_cap: 1e9,
            has_accelerator: false,
            adversary: AdversarySpec::Honest,
            mobile: true,
            position: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationStrategy {
    /// Uniform mean over the local model and every received model.
    #[default]
    PeerAverage,
    /// Mean weighted by training shard sizes.
    WeightedAverage,
    /// Push to `fanout` random neighbors each round, average whatever arrived.
    GossipPush { fanout: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    Loss,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopConfig {
    pub patience: usize,
    pub min_delta: f64,
    pub metric: StopMetric,
}

/// Constants of the simulated compute model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub base_seconds_per_row: f64,
    pub accelerator_speedup: f64,
    /// Rows of a mini-batch that fit in one MB of device RAM.
    pub rows_per_mb: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            base_seconds_per_row: 0.0005,
            accelerator_speedup: 10.0,
            rows_per_mb: 64.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigIssue>),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}
