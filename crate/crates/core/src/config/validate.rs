use super::{ConfigIssue, DatasetSource, Mode, PartitionConfig, SimConfig, TrainingGraph};
use crate::fl::{AggregationStrategy, Scenario};
use crate::learning::ModelShape;
use crate::net::{Arena, ChannelMode, ChannelState, TopologyGraph, TopologyKind};
use crate::rng::{stream_rng, Stream};

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.0.push(ConfigIssue {
            path: path.into(),
            msg: msg.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be finite and positive, got {v}"));
        }
    }

    fn nonneg(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(path, format!("must be finite and nonnegative, got {v}"));
        }
    }

    fn fraction(&mut self, path: &str, v: f64, allow_zero: bool) {
        let ok = if allow_zero { (0.0..1.0).contains(&v) } else { v > 0.0 && v < 1.0 };
        if !ok {
            let lo = if allow_zero { "[0" } else { "(0" };
            self.push(path, format!("must lie in {lo}, 1), got {v}"));
        }
    }
}

/// Check every cross-field constraint. Returns all violations; an empty
/// error list never reaches `Err`.
pub fn validate(cfg: &SimConfig) -> Result<(), Vec<ConfigIssue>> {
    let mut is = Issues(Vec::new());
    let n = cfg.device_count();
    if n == 0 {
        is.push("devices", "at least one device is required");
    }
    if cfg.rounds == 0 {
        is.push("rounds", "must be at least 1");
    }
    if cfg.batch_size == 0 {
        is.push("batch_size", "must be at least 1");
    }
    is.positive("learning_rate", cfg.learning_rate);
    is.positive("horizon", cfg.horizon);

    match cfg.mode {
        Mode::Centralized { aggregator } => {
            if aggregator >= n {
                is.push("aggregator", format!("device {aggregator} does not exist ({n} devices)"));
            }
            if matches!(cfg.aggregation, AggregationStrategy::GossipPush { .. }) {
                is.push("aggregation", "gossip aggregation needs p2p mode");
            }
            if cfg.training_graph != TrainingGraph::Neighbors {
                is.push("training_graph", "only meaningful in p2p mode");
            }
        }
        Mode::P2P => {}
    }
    if let AggregationStrategy::GossipPush { fanout } = cfg.aggregation {
        if fanout == 0 {
            is.push("fanout", "must be at least 1");
        }
        if cfg.training_graph != TrainingGraph::Neighbors {
            is.push("training_graph", "gossip always pushes to overlay neighbors");
        }
    }
    if let TrainingGraph::Edges(edges) = &cfg.training_graph {
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                is.push(format!("training_edges[{k}]"), format!("endpoint out of range for {n} devices"));
            } else if a == b {
                is.push(format!("training_edges[{k}]"), "self loop");
            }
        }
    }

    // dataset and model
    let mut width_classes = None;
    let mut rows = None;
    match &cfg.dataset.source {
        DatasetSource::Synthetic {
            rows: r,
            features,
            classes,
            separation,
        } => {
            if *features == 0 {
                is.push("dataset.features", "must be at least 1");
            }
            if *classes < 2 {
                is.push("dataset.classes", "must be at least 2");
            }
            is.nonneg("dataset.separation", *separation);
            if *r == 0 {
                is.push("dataset.rows", "must be at least 1");
            }
            width_classes = Some((*features, *classes));
            rows = Some(*r);
        }
        DatasetSource::Csv { path, label_column, classes } => {
            if *classes < 2 {
                is.push("dataset.classes", "must be at least 2");
            }
            match crate::data::load_csv(path, label_column, *classes) {
                Ok(d) => {
                    width_classes = Some((d.dim(), *classes));
                    rows = Some(d.len());
                }
                Err(e) => is.push("dataset.path", e.to_string()),
            }
        }
    }
    is.fraction("dataset.test_fraction", cfg.dataset.test_fraction, false);
    is.fraction("dataset.validation_fraction", cfg.dataset.validation_fraction, true);
    if let Some(r) = rows {
        let held = (r as f64 * cfg.dataset.test_fraction).floor() as usize;
        if held == 0 {
            is.push("dataset.test_fraction", format!("leaves no test rows out of {r}"));
        }
        let pool = r.saturating_sub(held);
        if n > pool {
            is.push("devices", format!("{n} devices but only {pool} training rows"));
        }
    }
    if let PartitionConfig::Dirichlet { alpha } = cfg.partition {
        is.positive("partition.alpha", alpha);
        if n < 2 {
            is.push("partition.kind", "dirichlet partition needs at least 2 devices");
        }
    }
    if let Some((features, classes)) = width_classes {
        if let Some(layers) = &cfg.model.layers {
            match ModelShape::new(layers.clone()) {
                Ok(s) => {
                    if s.input_dim() != features {
                        is.push("model.layers", format!("input width {} but dataset has {features} features", s.input_dim()));
                    }
                    if s.classes() != classes {
                        is.push("model.layers", format!("{} outputs but dataset has {classes} classes", s.classes()));
                    }
                }
                Err(e) => is.push("model.layers", e.to_string()),
            }
        }
    }

    // devices
    let arena = Arena {
        width: cfg.wireless.width,
        height: cfg.wireless.height,
    };
    for (i, d) in cfg.devices.iter().enumerate() {
        let p = |k: &str| format!("devices[{i}].{k}");
        is.positive(&p("speed_factor"), d.speed_factor);
        if d.ram_mb == 0 {
            is.push(p("ram_mb"), "must be at least 1");
        }
        is.positive(&p("bandwidth_cap"), d.bandwidth_cap);
        if let Err(e) = d.adversary.validate() {
            is.push(p("adversary"), e.to_string());
        }
        if let Some(pos) = d.position {
            if !arena.contains(&pos) {
                is.push(p("position"), format!("({}, {}) is outside the arena", pos.x, pos.y));
            }
        }
    }
    is.positive("timing.base_seconds_per_row", cfg.timing.base_seconds_per_row);
    is.positive("timing.accelerator_speedup", cfg.timing.accelerator_speedup);
    is.positive("timing.rows_per_mb", cfg.timing.rows_per_mb);

    // channel
    let ch = ChannelState {
        data_rate: cfg.channel.data_rate,
        delay: cfg.channel.delay,
        loss_prob: cfg.channel.loss,
    };
    if let Err(e) = ch.validate() {
        is.push("channel", e.to_string());
    }
    if cfg.channel.mtu_bits == 0 {
        is.push("channel.mtu_bits", "must be at least 1");
    }
    if cfg.channel.mode == ChannelMode::Wireless {
        let w = &cfg.wireless;
        if w.access_points.is_empty() {
            is.push("wireless.access_points", "wireless mode needs at least one access point");
        }
        is.positive("wireless.width", w.width);
        is.positive("wireless.height", w.height);
        is.nonneg("wireless.speed", w.speed);
        is.positive("wireless.tick", w.tick);
        is.positive("wireless.ref_distance", w.path_loss.ref_distance);
        is.positive("wireless.path_loss_exponent", w.path_loss.exponent);
        if !w.path_loss.ref_loss_db.is_finite() {
            is.push("wireless.ref_loss_db", "must be finite");
        }
        if let Err(e) = w.rates.validate() {
            is.push("wireless.tiers", e.to_string());
        }
        for (k, ap) in w.access_points.iter().enumerate() {
            is.positive(&format!("wireless.access_points[{k}].backbone_rate"), ap.backbone_rate);
            if !arena.contains(&ap.position) {
                is.push(format!("wireless.access_points[{k}].position"), "outside the arena");
            }
        }
    }

    if let Some(e) = &cfg.early_stop {
        if e.patience == 0 {
            is.push("early_stop.patience", "must be at least 1");
        }
        is.nonneg("early_stop.min_delta", e.min_delta);
    }

    // topology
    let (lo, hi) = cfg.edge_cap_range();
    let mut cap_ok = true;
    if let Some(c) = cfg.topology.edge_cap {
        if !(c > 0.0 && c.is_finite()) {
            is.push("topology.edge_cap", format!("must be finite and positive, got {c}"));
            cap_ok = false;
        }
    }
    if let Some(c) = cfg.topology.edge_cap_max {
        if !(c >= lo && c.is_finite()) {
            is.push("topology.edge_cap_max", format!("must be finite and at least edge_cap ({lo}), got {c}"));
            cap_ok = false;
        }
    }
    if let TopologyKind::Star { center } = cfg.topology.kind {
        if center >= n {
            is.push("topology.center", format!("device {center} does not exist ({n} devices)"));
        }
    }
    if n > 0 && cap_ok && lo > 0.0 && lo.is_finite() {
        let mut rng = stream_rng(cfg.seed, Stream::Topology, 0, 0);
        match TopologyGraph::generate(n, &cfg.topology.kind, lo, hi, &mut rng) {
            Ok(g) => check_routes(&g, &mut is),
            Err(e) => is.push("topology", e.to_string()),
        }
    }

    if is.0.is_empty() {
        // Anything left can only fail while building the run itself.
        if let Err(e) = Scenario::build(cfg) {
            is.push("config", e.to_string());
        }
    }
    if is.0.is_empty() {
        Ok(())
    } else {
        Err(is.0)
    }
}

fn check_routes(g: &TopologyGraph, is: &mut Issues) {
    if let Some((a, b)) = g.unreachable_pair() {
        is.push("topology", format!("disconnected: no path from device {a} to device {b}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::AccessPoint;

    fn base() -> SimConfig {
        let mut c = SimConfig::with_defaults(1, 4, TopologyKind::Ring);
        c.dataset.source = DatasetSource::Synthetic {
            rows: 200,
            features: 3,
            classes: 3,
            separation: 3.0,
        };
        c
    }

    #[test]
    fn valid_config_passes() {
        assert_eq!(validate(&base()), Ok(()));
    }

    #[test]
    fn disconnected_topology_names_pair() {
        let mut c = base();
        c.topology.kind = TopologyKind::Inline {
            adjacency: vec![vec![1], vec![0], vec![3], vec![2]],
        };
        let errs = validate(&c).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].msg.contains("no path from device 0 to device 2"), "{errs:?}");
    }

    #[test]
    fn wireless_needs_access_points() {
        let mut c = base();
        c.channel.mode = ChannelMode::Wireless;
        let errs = validate(&c).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "wireless.access_points"));
        c.wireless.access_points.push(AccessPoint {
            id: 0,
            position: crate::net::Position::new(50.0, 50.0),
            backbone_rate: 1e8,
        });
        assert_eq!(validate(&c), Ok(()));
    }

    #[test]
    fn reports_every_violation() {
        let mut c = base();
        c.mode = Mode::Centralized { aggregator: 9 };
        c.rounds = 0;
        c.model.layers = Some(vec![5, 3]);
        c.devices[2].speed_factor = 0.0;
        c.wireless.rates.tiers.reverse();
        c.channel.mode = ChannelMode::Wireless;
        let errs = validate(&c).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        for want in ["aggregator", "rounds", "model.layers", "devices[2].speed_factor", "wireless.tiers", "wireless.access_points"] {
            assert!(paths.contains(&want), "{want} missing from {paths:?}");
        }
    }
}
