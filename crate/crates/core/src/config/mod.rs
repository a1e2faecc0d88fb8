//! Simulation configuration: typed schema, YAML parsing and rendering,
//! cross-field validation and example presets.

mod parse;
mod presets;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

use crate::adversary::AdversarySpec;
use crate::fl::{AggregationStrategy, DeviceProfile, EarlyStopConfig, TimingConfig};
use crate::learning::Compression;
use crate::net::{AccessPoint, ChannelMode, LossMode, PathLossModel, Position, RateTable, TopologyKind, DEFAULT_MTU_BITS};

pub use parse::{parse_config, render_config};
pub use presets::{preset, PRESETS};
pub use validate::validate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    /// YAML syntax, unknown key or type mismatch; the message carries the
    /// key path and line.
    #[error("{0}")]
    Syntax(String),
    #[error("missing required key `{path}`")]
    Missing { path: String },
    #[error("`{path}`: {msg}")]
    Invalid { path: String, msg: String },
}

/// One violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub msg: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "`{}`: {}", self.path, self.msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    P2P,
    Centralized { aggregator: usize },
}

/// Who each device sends its update to in P2P mode (gossip aggregation
/// overrides this with a random neighbor subset).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainingGraph {
    /// Every overlay neighbor.
    Neighbors,
    /// Device `i` sends to `(i + 1) mod n`, routed over the overlay.
    Ring,
    /// Explicit directed edges, routed over the overlay.
    Edges(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        rows: usize,
        features: usize,
        classes: usize,
        separation: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        classes: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Global held-out test split.
    pub test_fraction: f64,
    /// Per-device validation split used by early stopping.
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionConfig {
    Iid,
    Dirichlet { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Hidden ReLU units; 0 means softmax regression.
    pub hidden: usize,
    /// Explicit layer dims; must agree with the dataset when given.
    pub layers: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    /// Per-edge bandwidth cap; defaults to `channel.data_rate`.
    pub edge_cap: Option<f64>,
    /// When set, caps are drawn uniformly from `[edge_cap, edge_cap_max]`.
    pub edge_cap_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    /// Default link rate, bits/second.
    pub data_rate: f64,
    /// Per-hop delay, seconds.
    pub delay: f64,
    pub loss: f64,
    pub loss_mode: LossMode,
    pub mtu_bits: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            mode: ChannelMode::Ideal,
            data_rate: 1e8,
            delay: 0.001,
            loss: 0.0,
            loss_mode: LossMode::Expected,
            mtu_bits: DEFAULT_MTU_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WirelessConfig {
    pub width: f64,
    pub height: f64,
    pub access_points: Vec<AccessPoint>,
    pub rates: RateTable,
    pub path_loss: PathLossModel,
    /// Mobility speed, meters/second.
    pub speed: f64,
    /// Mobility update interval, seconds.
    pub tick: f64,
}

impl Default for WirelessConfig {
    fn default() -> Self {
        Self {
            width: 100.0,
            height: 100.0,
            access_points: Vec::new(),
            rates: RateTable::default(),
            path_loss: PathLossModel::default(),
            speed: 1.0,
            tick: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub mode: Mode,
    pub rounds: usize,
    /// Local epochs per round; 0 makes rounds aggregation-only.
    pub epochs_per_round: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub aggregation: AggregationStrategy,
    pub training_graph: TrainingGraph,
    pub compression: Compression,
    pub horizon: f64,
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub devices: Vec<DeviceProfile>,
    pub timing: TimingConfig,
    pub topology: TopologyConfig,
    pub channel: ChannelConfig,
    pub wireless: WirelessConfig,
    pub early_stop: Option<EarlyStopConfig>,
}

impl SimConfig {
    /// A small P2P configuration with every optional field at its default.
    pub fn with_defaults(seed: u64, devices: usize, topology: TopologyKind) -> Self {
        Self {
            seed,
            mode: Mode::P2P,
            rounds: 5,
            epochs_per_round: 1,
            batch_size: 32,
            learning_rate: 0.1,
            aggregation: AggregationStrategy::PeerAverage,
            training_graph: TrainingGraph::Neighbors,
            compression: Compression::None,
            horizon: 1e9,
            model: ModelConfig {
                hidden: 0,
                layers: None,
            },
            dataset: DatasetConfig {
                source: DatasetSource::Synthetic {
                    rows: 1000,
                    features: 8,
                    classes: 3,
                    separation: 4.0,
                },
                test_fraction: 0.2,
                validation_fraction: 0.2,
            },
            partition: PartitionConfig::Iid,
            devices: vec![DeviceProfile::default(); devices],
            timing: TimingConfig::default(),
            topology: TopologyConfig {
                kind: topology,
                edge_cap: None,
                edge_cap_max: None,
            },
            channel: ChannelConfig::default(),
            wireless: WirelessConfig::default(),
            early_stop: None,
        }
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn edge_cap_range(&self) -> (f64, f64) {
        let lo = self.topology.edge_cap.unwrap_or(self.channel.data_rate);
        (lo, self.topology.edge_cap_max.unwrap_or(lo))
    }

    /// Mark device `index` with an adversary kind.
    pub fn set_adversary(&mut self, index: usize, spec: AdversarySpec) {
        self.devices[index].adversary = spec;
    }

    pub fn set_position(&mut self, index: usize, pos: Position) {
        self.devices[index].position = Some(pos);
    }
}
