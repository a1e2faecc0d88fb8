//! Documented example configurations emitted by `fedmesh gen-config`.

pub const PRESETS: &[&str] = &["line3", "star10", "scale100"];

const LINE3: &str = r#"# Three devices on a line, peer averaging with both neighbors.
seed: 42
mode: p2p                  # p2p | centralized
rounds: 5
epochs_per_round: 5        # 0 makes rounds aggregation-only
batch_size: 32
learning_rate: 0.1
aggregation: peer_average  # peer_average | weighted_average | gossip (needs fanout)
training_graph: neighbors  # neighbors | ring | edges (needs training_edges)
compression: none          # none | quantized8
model:
  hidden: 0                # 0 = softmax regression, else one ReLU hidden layer
dataset:
  kind: synthetic          # synthetic | csv (path, label_column, classes)
  rows: 3000
  features: 8
  classes: 3
  separation: 4.0
  test_fraction: 0.2
  validation_fraction: 0.2
partition:
  kind: iid                # iid | dirichlet (alpha)
devices:
  count: 3
  template:
    speed_factor: 1.0
    ram_mb: 4096
    bandwidth_cap: 1.0e9
topology:
  kind: line               # ring | line | star | complete | random_regular | inline
channel:
  mode: ideal              # ideal | wireless
  data_rate: 1.0e8
  delay: 0.001
  loss: 0.0
  loss_mode: expected      # expected | stochastic
"#;

const STAR10: &str = r#"# Ten devices around an aggregator (device 0): classical federated averaging
# over a wireless star with mobile clients.
seed: 7
mode: centralized
aggregator: 0
rounds: 10
epochs_per_round: 2
batch_size: 32
learning_rate: 0.1
aggregation: weighted_average
model:
  hidden: 16
dataset:
  kind: synthetic
  rows: 5000
  features: 8
  classes: 4
  separation: 3.0
partition:
  kind: dirichlet
  alpha: 0.5
devices:
  count: 10
  template:
    speed_factor: 1.0
    ram_mb: 2048
    bandwidth_cap: 5.0e7
  overrides:
    0:
      accelerator: true
      mobile: false
      position: [50.0, 50.0]
    3:
      speed_factor: 0.25
      ram_mb: 1
topology:
  kind: star
  center: 0
channel:
  mode: wireless
  delay: 0.002
  loss: 0.05
  loss_mode: stochastic
wireless:
  width: 200.0
  height: 200.0
  access_points:
    - position: [50.0, 50.0]
      backbone_rate: 1.0e9
    - position: [150.0, 150.0]
      backbone_rate: 1.0e9
  tiers: [[60.0, 5.4e7], [80.0, 6.0e6]]
  floor_rate: 1.0e6
  speed: 1.5
  tick: 1.0
early_stop:
  patience: 3
  min_delta: 0.001
  metric: loss
"#;

const SCALE100: &str = r#"# One hundred devices on a random 3-regular overlay. Each device sends its
# update to device (i + 1) mod 100, routed over the overlay.
seed: 1
rounds: 3
epochs_per_round: 1
batch_size: 32
learning_rate: 0.1
training_graph: ring
model:
  hidden: 0
dataset:
  kind: synthetic
  rows: 10000
  features: 8
  classes: 3
  separation: 4.0
devices:
  count: 100
topology:
  kind: random_regular
  degree: 3
  edge_cap: 1.0e7
channel:
  mode: ideal
  delay: 0.005
"#;

/// Text of a named preset.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "line3" => Some(LINE3),
        "star10" => Some(STAR10),
        "scale100" => Some(SCALE100),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, validate};

    #[test]
    fn presets_parse_and_validate() {
        for name in PRESETS {
            let cfg = parse_config(preset(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            validate(&cfg).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        }
        assert!(preset("nope").is_none());
    }
}
