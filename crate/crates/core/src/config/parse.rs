//! YAML <-> [`SimConfig`].
//!
//! The document is read into `Raw*` mirror structs (every field optional,
//! unknown keys rejected), then defaults are applied while converting to the
//! typed config. Rendering goes the other way with every field explicit.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::de::{self, value::MapAccessDeserializer, IntoDeserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::{
    ChannelConfig, ConfigError, DatasetConfig, DatasetSource, Mode, ModelConfig, PartitionConfig, SimConfig, TopologyConfig,
    TrainingGraph, WirelessConfig,
};
use crate::adversary::AdversarySpec;
use crate::fl::{AggregationStrategy, DeviceProfile, EarlyStopConfig, StopMetric, TimingConfig};
use crate::learning::Compression;
use crate::net::{AccessPoint, ChannelMode, LossMode, PathLossModel, Position, RateTable, RateTier, TopologyKind};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<RawMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aggregator: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs_per_round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aggregation: Option<RawAggregation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fanout: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    training_graph: Option<RawTrainingGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    training_edges: Option<Vec<(usize, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compression: Option<RawCompression>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<RawModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<RawDataset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<RawPartition>,
    devices: RawDevices,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<RawTiming>,
    topology: RawTopology,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<RawChannel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wireless: Option<RawWireless>,
    #[serde(skip_serializing_if = "Option::is_none")]
    early_stop: Option<RawEarlyStop>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    P2p,
    Centralized,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawAggregation {
    PeerAverage,
    WeightedAverage,
    Gossip,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawTrainingGraph {
    Neighbors,
    Ring,
    Edges,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawCompression {
    None,
    Quantized8,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawDatasetKind {
    Synthetic,
    Csv,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<RawDatasetKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    separation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawPartitionKind {
    Iid,
    Dirichlet,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    kind: RawPartitionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AdvKind {
    Honest,
    HonestButCurious,
    LabelFlip,
    SignFlip,
    NoiseInjection,
    FgsmEval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdvSpec {
    kind: AdvKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

/// `adversary: label_flip` or `adversary: {kind: noise_injection, sigma: 0.5}`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum RawAdversary {
    Kind(AdvKind),
    Spec(RawAdvSpec),
}

impl<'de> Deserialize<'de> for RawAdversary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RawAdversary;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an adversary kind or a map with `kind`")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<RawAdversary, E> {
                AdvKind::deserialize(v.into_deserializer()).map(RawAdversary::Kind)
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<RawAdversary, A::Error> {
                RawAdvSpec::deserialize(MapAccessDeserializer::new(map)).map(RawAdversary::Spec)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ram_mb: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accelerator: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adversary: Option<RawAdversary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mobile: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    position: Option<(f64, f64)>,
}

impl RawDevice {
    fn overlay(&self, top: &RawDevice) -> RawDevice {
        RawDevice {
            speed_factor: top.speed_factor.or(self.speed_factor),
            ram_mb: top.ram_mb.or(self.ram_mb),
            bandwidth_cap: top.bandwidth_cap.or(self.bandwidth_cap),
            accelerator: top.accelerator.or(self.accelerator),
            adversary: top.adversary.clone().or_else(|| self.adversary.clone()),
            mobile: top.mobile.or(self.mobile),
            position: top.position.or(self.position),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeviceGroup {
    count: usize,
    #[serde(default)]
    template: RawDevice,
    /// Per-index patches applied over the template.
    #[serde(default)]
    overrides: BTreeMap<usize, RawDevice>,
}

/// Either an explicit list or `{count, template, overrides}`.
#[derive(Debug, Serialize)]
#[serde(untagged)]
enum RawDevices {
    List(Vec<RawDevice>),
    Group(RawDeviceGroup),
}

impl<'de> Deserialize<'de> for RawDevices {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RawDevices;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of devices or a map with `count`")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<RawDevices, A::Error> {
                let mut out = Vec::new();
                while let Some(d) = seq.next_element::<RawDevice>()? {
                    out.push(d);
                }
                Ok(RawDevices::List(out))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<RawDevices, A::Error> {
                RawDeviceGroup::deserialize(MapAccessDeserializer::new(map)).map(RawDevices::Group)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    #[serde(skip_serializing_if = "Option::is_none")]
    base_seconds_per_row: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accelerator_speedup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows_per_mb: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawTopologyKind {
    Ring,
    Line,
    Star,
    Complete,
    RandomRegular,
    Inline,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    kind: RawTopologyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<usize>,
    /// Neighbor list per node.
    #[serde(skip_serializing_if = "Option::is_none")]
    adjacency: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_cap_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawChannelMode {
    Ideal,
    Wireless,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawLossMode {
    Expected,
    Stochastic,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<RawChannelMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_mode: Option<RawLossMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mtu_bits: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAccessPoint {
    position: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    backbone_rate: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWireless {
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    access_points: Option<Vec<RawAccessPoint>>,
    /// `[max_loss_db, rate_bps]` pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    tiers: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    floor_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path_loss_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ref_loss_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ref_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tick: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawStopMetric {
    Loss,
    Accuracy,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEarlyStop {
    #[serde(skip_serializing_if = "Option::is_none")]
    patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metric: Option<RawStopMetric>,
}

const DEFAULT_BACKBONE: f64 = 1e9;

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        msg: msg.into(),
    }
}

fn forbid<T>(v: &Option<T>, path: &str, why: &str) -> Result<(), ConfigError> {
    match v {
        Some(_) => Err(invalid(path, why)),
        None => Ok(()),
    }
}

/// Parse a configuration document, applying every default.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let raw: RawConfig = serde_yaml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    from_raw(raw)
}

fn adversary_from(raw: &Option<RawAdversary>, path: &str) -> Result<AdversarySpec, ConfigError> {
    let (kind, sigma, epsilon) = match raw {
        None => return Ok(AdversarySpec::Honest),
        Some(RawAdversary::Kind(k)) => (*k, None, None),
        Some(RawAdversary::Spec(s)) => (s.kind, s.sigma, s.epsilon),
    };
    if kind != AdvKind::NoiseInjection {
        forbid(&sigma, &format!("{path}.sigma"), "only valid for noise_injection")?;
    }
    if kind != AdvKind::FgsmEval {
        forbid(&epsilon, &format!("{path}.epsilon"), "only valid for fgsm_eval")?;
    }
    Ok(match kind {
        AdvKind::Honest => AdversarySpec::Honest,
        AdvKind::HonestButCurious => AdversarySpec::HonestButCurious,
        AdvKind::LabelFlip => AdversarySpec::LabelFlip,
        AdvKind::SignFlip => AdversarySpec::SignFlip,
        AdvKind::NoiseInjection => AdversarySpec::NoiseInjection {
            sigma: sigma.ok_or_else(|| ConfigError::Missing {
                path: format!("{path}.sigma"),
            })?,
        },
        AdvKind::FgsmEval => AdversarySpec::FgsmEval {
            epsilon: epsilon.ok_or_else(|| ConfigError::Missing {
                path: format!("{path}.epsilon"),
            })?,
        },
    })
}

fn device_from(raw: &RawDevice, path: &str) -> Result<DeviceProfile, ConfigError> {
    let d = DeviceProfile::default();
    Ok(DeviceProfile {
        speed_factor: raw.speed_factor.unwrap_or(d.speed_factor),
        ram_mb: raw.ram_mb.unwrap_or(d.ram_mb),
        bandwidth_cap: raw.bandwidth_cap.unwrap_or(d.bandwidth_cap),
        has_accelerator: raw.accelerator.unwrap_or(d.has_accelerator),
        adversary: adversary_from(&raw.adversary, &format!("{path}.adversary"))?,
        mobile: raw.mobile.unwrap_or(d.mobile),
        position: raw.position.map(|(x, y)| Position::new(x, y)),
    })
}

fn from_raw(raw: RawConfig) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::with_defaults(raw.seed, 0, TopologyKind::Ring);

    cfg.mode = match raw.mode.unwrap_or(RawMode::P2p) {
        RawMode::P2p => {
            forbid(&raw.aggregator, "aggregator", "only valid in centralized mode")?;
            Mode::P2P
        }
        RawMode::Centralized => Mode::Centralized {
            aggregator: raw.aggregator.unwrap_or(0),
        },
    };
    cfg.rounds = raw.rounds.unwrap_or(cfg.rounds);
    cfg.epochs_per_round = raw.epochs_per_round.unwrap_or(cfg.epochs_per_round);
    cfg.batch_size = raw.batch_size.unwrap_or(cfg.batch_size);
    cfg.learning_rate = raw.learning_rate.unwrap_or(cfg.learning_rate);
    cfg.horizon = raw.horizon.unwrap_or(cfg.horizon);

    cfg.aggregation = match raw.aggregation.unwrap_or(RawAggregation::PeerAverage) {
        RawAggregation::Gossip => AggregationStrategy::GossipPush {
            fanout: raw.fanout.ok_or_else(|| ConfigError::Missing { path: "fanout".into() })?,
        },
        other => {
            forbid(&raw.fanout, "fanout", "only valid with gossip aggregation")?;
            match other {
                RawAggregation::WeightedAverage => AggregationStrategy::WeightedAverage,
                _ => AggregationStrategy::PeerAverage,
            }
        }
    };
    cfg.training_graph = match raw.training_graph.unwrap_or(RawTrainingGraph::Neighbors) {
        RawTrainingGraph::Edges => TrainingGraph::Edges(raw.training_edges.ok_or_else(|| ConfigError::Missing {
            path: "training_edges".into(),
        })?),
        other => {
            forbid(&raw.training_edges, "training_edges", "only valid with training_graph: edges")?;
            match other {
                RawTrainingGraph::Ring => TrainingGraph::Ring,
                _ => TrainingGraph::Neighbors,
            }
        }
    };
    cfg.compression = match raw.compression.unwrap_or(RawCompression::None) {
        RawCompression::None => Compression::None,
        RawCompression::Quantized8 => Compression::Quantized8,
    };

    if let Some(m) = raw.model {
        cfg.model = ModelConfig {
            hidden: m.hidden.unwrap_or(0),
            layers: m.layers,
        };
        if cfg.model.layers.is_some() && cfg.model.hidden != 0 {
            return Err(invalid("model.hidden", "give either `hidden` or `layers`, not both"));
        }
    }

    if let Some(d) = raw.dataset {
        let DatasetConfig {
            source,
            test_fraction,
            validation_fraction,
        } = cfg.dataset.clone();
        let source = match d.kind.unwrap_or(RawDatasetKind::Synthetic) {
            RawDatasetKind::Synthetic => {
                forbid(&d.path, "dataset.path", "only valid for csv datasets")?;
                forbid(&d.label_column, "dataset.label_column", "only valid for csv datasets")?;
                let DatasetSource::Synthetic {
                    rows,
                    features,
                    classes,
                    separation,
                } = source
                else {
                    unreachable!("default dataset is synthetic")
                };
                DatasetSource::Synthetic {
                    rows: d.rows.unwrap_or(rows),
                    features: d.features.unwrap_or(features),
                    classes: d.classes.unwrap_or(classes),
                    separation: d.separation.unwrap_or(separation),
                }
            }
            RawDatasetKind::Csv => {
                for (v, k) in [(d.rows, "rows"), (d.features, "features")] {
                    forbid(&v, &format!("dataset.{k}"), "not valid for csv datasets; taken from the file")?;
                }
                forbid(&d.separation, "dataset.separation", "only valid for synthetic datasets")?;
                DatasetSource::Csv {
                    path: d.path.ok_or_else(|| ConfigError::Missing {
                        path: "dataset.path".into(),
                    })?,
                    label_column: d.label_column.unwrap_or_else(|| "label".into()),
                    classes: d.classes.ok_or_else(|| ConfigError::Missing {
                        path: "dataset.classes".into(),
                    })?,
                }
            }
        };
        cfg.dataset = DatasetConfig {
            source,
            test_fraction: d.test_fraction.unwrap_or(test_fraction),
            validation_fraction: d.validation_fraction.unwrap_or(validation_fraction),
        };
    }

    if let Some(p) = raw.partition {
        cfg.partition = match p.kind {
            RawPartitionKind::Iid => {
                forbid(&p.alpha, "partition.alpha", "only valid for dirichlet partitions")?;
                PartitionConfig::Iid
            }
            RawPartitionKind::Dirichlet => PartitionConfig::Dirichlet {
                alpha: p.alpha.unwrap_or(0.5),
            },
        };
    }

    cfg.devices = match &raw.devices {
        RawDevices::List(list) => list
            .iter()
            .enumerate()
            .map(|(i, d)| device_from(d, &format!("devices[{i}]")))
            .collect::<Result<_, _>>()?,
        RawDevices::Group(g) => {
            if let Some((&i, _)) = g.overrides.iter().find(|(&i, _)| i >= g.count) {
                return Err(invalid(
                    format!("devices.overrides.{i}"),
                    format!("index out of range for {} devices", g.count),
                ));
            }
            let template = device_from(&g.template, "devices.template")?;
            (0..g.count)
                .map(|i| match g.overrides.get(&i) {
                    Some(o) => device_from(&g.template.overlay(o), &format!("devices.overrides.{i}")),
                    None => Ok(template.clone()),
                })
                .collect::<Result<_, _>>()?
        }
    };

    if let Some(t) = raw.timing {
        let d = TimingConfig::default();
        cfg.timing = TimingConfig {
            base_seconds_per_row: t.base_seconds_per_row.unwrap_or(d.base_seconds_per_row),
            accelerator_speedup: t.accelerator_speedup.unwrap_or(d.accelerator_speedup),
            rows_per_mb: t.rows_per_mb.unwrap_or(d.rows_per_mb),
        };
    }

    let t = raw.topology;
    let kind = match t.kind {
        RawTopologyKind::RandomRegular => TopologyKind::RandomRegular {
            degree: t.degree.ok_or_else(|| ConfigError::Missing {
                path: "topology.degree".into(),
            })?,
        },
        RawTopologyKind::Star => TopologyKind::Star {
            center: t.center.unwrap_or(0),
        },
        RawTopologyKind::Inline => TopologyKind::Inline {
            adjacency: t.adjacency.clone().ok_or_else(|| ConfigError::Missing {
                path: "topology.adjacency".into(),
            })?,
        },
        RawTopologyKind::Ring => TopologyKind::Ring,
        RawTopologyKind::Line => TopologyKind::Line,
        RawTopologyKind::Complete => TopologyKind::Complete,
    };
    if !matches!(kind, TopologyKind::RandomRegular { .. }) {
        forbid(&t.degree, "topology.degree", "only valid for random_regular")?;
    }
    if !matches!(kind, TopologyKind::Star { .. }) {
        forbid(&t.center, "topology.center", "only valid for star")?;
    }
    if !matches!(kind, TopologyKind::Inline { .. }) {
        forbid(&t.adjacency, "topology.adjacency", "only valid for inline")?;
    }
    cfg.topology = TopologyConfig {
        kind,
        edge_cap: t.edge_cap,
        edge_cap_max: t.edge_cap_max,
    };

    if let Some(c) = raw.channel {
        let d = ChannelConfig::default();
        cfg.channel = ChannelConfig {
            mode: match c.mode {
                Some(RawChannelMode::Wireless) => ChannelMode::Wireless,
                _ => ChannelMode::Ideal,
            },
            data_rate: c.data_rate.unwrap_or(d.data_rate),
            delay: c.delay.unwrap_or(d.delay),
            loss: c.loss.unwrap_or(d.loss),
            loss_mode: match c.loss_mode {
                Some(RawLossMode::Stochastic) => LossMode::Stochastic,
                _ => LossMode::Expected,
            },
            mtu_bits: c.mtu_bits.unwrap_or(d.mtu_bits),
        };
    }

    if let Some(w) = raw.wireless {
        let d = WirelessConfig::default();
        cfg.wireless = WirelessConfig {
            width: w.width.unwrap_or(d.width),
            height: w.height.unwrap_or(d.height),
            access_points: w
                .access_points
                .unwrap_or_default()
                .iter()
                .enumerate()
                .map(|(id, ap)| AccessPoint {
                    id,
                    position: Position::new(ap.position.0, ap.position.1),
                    backbone_rate: ap.backbone_rate.unwrap_or(DEFAULT_BACKBONE),
                })
                .collect(),
            rates: RateTable {
                tiers: match w.tiers {
                    Some(t) => t
                        .iter()
                        .map(|&(max_loss_db, rate_bps)| RateTier { max_loss_db, rate_bps })
                        .collect(),
                    None => d.rates.tiers.clone(),
                },
                floor_rate: w.floor_rate.unwrap_or(d.rates.floor_rate),
            },
            path_loss: PathLossModel {
                exponent: w.path_loss_exponent.unwrap_or(d.path_loss.exponent),
                ref_loss_db: w.ref_loss_db.unwrap_or(d.path_loss.ref_loss_db),
                ref_distance: w.ref_distance.unwrap_or(d.path_loss.ref_distance),
            },
            speed: w.speed.unwrap_or(d.speed),
            tick: w.tick.unwrap_or(d.tick),
        };
    }

    if let Some(e) = raw.early_stop {
        cfg.early_stop = Some(EarlyStopConfig {
            patience: e.patience.unwrap_or(3),
            min_delta: e.min_delta.unwrap_or(0.0),
            metric: match e.metric {
                Some(RawStopMetric::Accuracy) => StopMetric::Accuracy,
                _ => StopMetric::Loss,
            },
        });
    }
    Ok(cfg)
}

fn adversary_to_raw(a: &AdversarySpec) -> RawAdversary {
    let spec = |kind, sigma, epsilon| RawAdversary::Spec(RawAdvSpec { kind, sigma, epsilon });
    match *a {
        AdversarySpec::Honest => RawAdversary::Kind(AdvKind::Honest),
        AdversarySpec::HonestButCurious => RawAdversary::Kind(AdvKind::HonestButCurious),
        AdversarySpec::LabelFlip => RawAdversary::Kind(AdvKind::LabelFlip),
        AdversarySpec::SignFlip => RawAdversary::Kind(AdvKind::SignFlip),
        AdversarySpec::NoiseInjection { sigma } => spec(AdvKind::NoiseInjection, Some(sigma), None),
        AdversarySpec::FgsmEval { epsilon } => spec(AdvKind::FgsmEval, None, Some(epsilon)),
    }
}

fn to_raw(cfg: &SimConfig) -> RawConfig {
    let (mode, aggregator) = match cfg.mode {
        Mode::P2P => (RawMode::P2p, None),
        Mode::Centralized { aggregator } => (RawMode::Centralized, Some(aggregator)),
    };
    let (aggregation, fanout) = match cfg.aggregation {
        AggregationStrategy::PeerAverage => (RawAggregation::PeerAverage, None),
        AggregationStrategy::WeightedAverage => (RawAggregation::WeightedAverage, None),
        AggregationStrategy::GossipPush { fanout } => (RawAggregation::Gossip, Some(fanout)),
    };
    let (training_graph, training_edges) = match &cfg.training_graph {
        TrainingGraph::Neighbors => (RawTrainingGraph::Neighbors, None),
        TrainingGraph::Ring => (RawTrainingGraph::Ring, None),
        TrainingGraph::Edges(e) => (RawTrainingGraph::Edges, Some(e.clone())),
    };
    let dataset = match &cfg.dataset.source {
        DatasetSource::Synthetic {
            rows,
            features,
            classes,
            separation,
        } => RawDataset {
            kind: Some(RawDatasetKind::Synthetic),
            rows: Some(*rows),
            features: Some(*features),
            classes: Some(*classes),
            separation: Some(*separation),
            path: None,
            label_column: None,
            test_fraction: Some(cfg.dataset.test_fraction),
            validation_fraction: Some(cfg.dataset.validation_fraction),
        },
        DatasetSource::Csv {
            path,
            label_column,
            classes,
        } => RawDataset {
            kind: Some(RawDatasetKind::Csv),
            rows: None,
            features: None,
            classes: Some(*classes),
            separation: None,
            path: Some(path.clone()),
            label_column: Some(label_column.clone()),
            test_fraction: Some(cfg.dataset.test_fraction),
            validation_fraction: Some(cfg.dataset.validation_fraction),
        },
    };
    let (tkind, degree, center, adjacency) = match &cfg.topology.kind {
        TopologyKind::Ring => (RawTopologyKind::Ring, None, None, None),
        TopologyKind::Line => (RawTopologyKind::Line, None, None, None),
        TopologyKind::Complete => (RawTopologyKind::Complete, None, None, None),
        TopologyKind::Star { center } => (RawTopologyKind::Star, None, Some(*center), None),
        TopologyKind::RandomRegular { degree } => (RawTopologyKind::RandomRegular, Some(*degree), None, None),
        TopologyKind::Inline { adjacency } => (RawTopologyKind::Inline, None, None, Some(adjacency.clone())),
    };
    let w = &cfg.wireless;
    RawConfig {
        seed: cfg.seed,
        mode: Some(mode),
        aggregator,
        rounds: Some(cfg.rounds),
        epochs_per_round: Some(cfg.epochs_per_round),
        batch_size: Some(cfg.batch_size),
        learning_rate: Some(cfg.learning_rate),
        horizon: Some(cfg.horizon),
        aggregation: Some(aggregation),
        fanout,
        training_graph: Some(training_graph),
        training_edges,
        compression: Some(match cfg.compression {
            Compression::None => RawCompression::None,
            Compression::Quantized8 => RawCompression::Quantized8,
        }),
        model: Some(RawModel {
            hidden: cfg.model.layers.is_none().then_some(cfg.model.hidden),
            layers: cfg.model.layers.clone(),
        }),
        dataset: Some(dataset),
        partition: Some(match cfg.partition {
            PartitionConfig::Iid => RawPartition {
                kind: RawPartitionKind::Iid,
                alpha: None,
            },
            PartitionConfig::Dirichlet { alpha } => RawPartition {
                kind: RawPartitionKind::Dirichlet,
                alpha: Some(alpha),
            },
        }),
        devices: RawDevices::List(
            cfg.devices
                .iter()
                .map(|d| RawDevice {
                    speed_factor: Some(d.speed_factor),
                    ram_mb: Some(d.ram_mb),
                    bandwidth_cap: Some(d.bandwidth_cap),
                    accelerator: Some(d.has_accelerator),
                    adversary: Some(adversary_to_raw(&d.adversary)),
                    mobile: Some(d.mobile),
                    position: d.position.map(|p| (p.x, p.y)),
                })
                .collect(),
        ),
        timing: Some(RawTiming {
            base_seconds_per_row: Some(cfg.timing.base_seconds_per_row),
            accelerator_speedup: Some(cfg.timing.accelerator_speedup),
            rows_per_mb: Some(cfg.timing.rows_per_mb),
        }),
        topology: RawTopology {
            kind: tkind,
            degree,
            center,
            adjacency,
            edge_cap: cfg.topology.edge_cap,
            edge_cap_max: cfg.topology.edge_cap_max,
        },
        channel: Some(RawChannel {
            mode: Some(match cfg.channel.mode {
                ChannelMode::Ideal => RawChannelMode::Ideal,
                ChannelMode::Wireless => RawChannelMode::Wireless,
            }),
            data_rate: Some(cfg.channel.data_rate),
            delay: Some(cfg.channel.delay),
            loss: Some(cfg.channel.loss),
            loss_mode: Some(match cfg.channel.loss_mode {
                LossMode::Expected => RawLossMode::Expected,
                LossMode::Stochastic => RawLossMode::Stochastic,
            }),
            mtu_bits: Some(cfg.channel.mtu_bits),
        }),
        wireless: Some(RawWireless {
            width: Some(w.width),
            height: Some(w.height),
            access_points: Some(
                w.access_points
                    .iter()
                    .map(|ap| RawAccessPoint {
                        position: (ap.position.x, ap.position.y),
                        backbone_rate: Some(ap.backbone_rate),
                    })
                    .collect(),
            ),
            tiers: Some(w.rates.tiers.iter().map(|t| (t.max_loss_db, t.rate_bps)).collect()),
            floor_rate: Some(w.rates.floor_rate),
            path_loss_exponent: Some(w.path_loss.exponent),
            ref_loss_db: Some(w.path_loss.ref_loss_db),
            ref_distance: Some(w.path_loss.ref_distance),
            speed: Some(w.speed),
            tick: Some(w.tick),
        }),
        early_stop: cfg.early_stop.map(|e| RawEarlyStop {
            patience: Some(e.patience),
            min_delta: Some(e.min_delta),
            metric: Some(match e.metric {
                StopMetric::Loss => RawStopMetric::Loss,
                StopMetric::Accuracy => RawStopMetric::Accuracy,
            }),
        }),
    }
}

/// Render with every field explicit. `parse_config(&render_config(c)) == c`
/// for any config whose access point ids are `0..n` in order.
pub fn render_config(cfg: &SimConfig) -> String {
    serde_yaml::to_string(&to_raw(cfg)).expect("config is always serializable")
}
