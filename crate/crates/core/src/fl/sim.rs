//! Event-driven round scheduler.
//!
//! Events per device:
//!
//! - `RoundStart(r)`: average whatever the round consumes from the inbox,
//!   train, and schedule `TrainDone(r)` after the simulated compute time.
//! - `TrainDone(r)`: install the trained model, evaluate, send updates.
//! - `Hop`: a message reached the next node of its route; it is forwarded
//!   or delivered.
//!
//! In P2P mode with a fixed training graph a device starts round `r` once
//! every in-peer's round `r - 1` update has arrived (delivered or dropped);
//! gossip never waits. In centralized mode the aggregator averages all `n`
//! models of a round (its own included), evaluates and broadcasts; clients
//! adopt the broadcast model and start their next round on arrival.

use std::collections::{BTreeMap, HashMap};

use log::{debug, info};

use super::{
    compute_time, early_stop, gossip_select, init_seed, local_update, train_seed, AggregationStrategy, DeviceProfile,
    EarlyStopConfig, Scenario, SimError, StopMetric,
};
use crate::adversary::{adversarial_accuracy, poison_update, AdversarySpec, Phase as AttackPhase};
use crate::config::{validate, Mode, SimConfig, TrainingGraph};
use crate::kernel::{Kernel, SimEvent, SimTime, StopSignal};
use crate::learning::{deserialize, evaluate, serialize, EvalMetrics, ModelParams, TrainConfig};
use crate::metrics::{EventKind, MetricsLog, MetricsRecord};
use crate::net::{
    associate, hop_time, link_rate, route, update_positions, Arena, ChannelMode, ChannelState, Message, NodeId, Position,
    Waypoint,
};
use crate::rng::{stream_rng, SimRng, Stream};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: MetricsLog,
    /// Each device's model when the run ended.
    pub final_models: Vec<Option<ModelParams>>,
    /// Centralized mode: the aggregated model of every completed round.
    pub global_models: Vec<ModelParams>,
    /// Per completed round, the mean validation metric across devices.
    pub round_metrics: Vec<f64>,
    /// Round after which early stopping fired.
    pub stopped_early: Option<usize>,
    pub end_time: f64,
    pub events: u64,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    RoundStart(usize),
    TrainDone(usize),
    Hop { transfer: usize, hop: usize },
    MobilityTick,
    StopCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Training,
    Waiting,
    Done,
}

struct Inbound {
    src: usize,
    round: usize,
    /// `None` when the payload could not be decoded.
    params: Option<ModelParams>,
}

struct Device {
    profile: DeviceProfile,
    model: Option<ModelParams>,
    round: usize,
    phase: Phase,
    inbox: Vec<Inbound>,
    pending: Option<(ModelParams, EvalMetrics, f64)>,
    history: Vec<EvalMetrics>,
    gossip_rng: SimRng,
    noise_rng: SimRng,
}

struct Transfer {
    msg: Message,
    path: Vec<NodeId>,
}

struct Daemon {
    cfg: Option<EarlyStopConfig>,
    partial: Vec<(usize, f64)>,
    history: Vec<f64>,
}

impl Daemon {
    /// Returns true when `round` just became complete.
    fn report(&mut self, round: usize, value: f64, devices: usize) -> bool {
        if self.partial.len() <= round {
            self.partial.resize(round + 1, (0, 0.0));
        }
        let slot = &mut self.partial[round];
        slot.0 += 1;
        slot.1 += value;
        if slot.0 == devices {
            self.history.push(slot.1 / devices as f64);
            true
        } else {
            false
        }
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    sc: Scenario,
    n: usize,
    devices: Vec<Device>,
    in_peers: Vec<Vec<usize>>,
    out_peers: Vec<Vec<usize>>,
    gossip_fanout: Option<usize>,
    routes: HashMap<(usize, usize), Vec<NodeId>>,
    transfers: Vec<Option<Transfer>>,
    positions: Vec<Position>,
    waypoints: Vec<Waypoint>,
    arena: Arena,
    channel_rng: SimRng,
    mobility_rng: SimRng,
    log: MetricsLog,
    daemon: Daemon,
    stop: StopSignal,
    collected: BTreeMap<usize, Option<ModelParams>>,
    global_models: Vec<ModelParams>,
    stopped_early: Option<usize>,
}

/// Run a configuration to completion.
pub fn run_simulation(cfg: &SimConfig) -> Result<RunOutput, SimError> {
    run_simulation_with_stop(cfg, &StopSignal::new())
}

/// As [`run_simulation`], also halting when `stop` is raised from outside.
pub fn run_simulation_with_stop(cfg: &SimConfig, stop: &StopSignal) -> Result<RunOutput, SimError> {
    validate(cfg).map_err(SimError::Config)?;
    let sc = Scenario::build(cfg)?;
    let mut sim = Sim::new(cfg, sc, stop.clone());
    let mut kernel: Kernel<Ev> = Kernel::new();
    sim.start(&mut kernel)?;
    let end = kernel.run_until(SimTime::from_secs(cfg.horizon), stop, |k, ev| sim.handle(k, ev))?;
    info!(
        "run finished at t={:.6}s after {} events, {} records",
        end.secs(),
        kernel.processed(),
        sim.log.len()
    );
    Ok(RunOutput {
        final_models: sim.devices.iter().map(|d| d.model.clone()).collect(),
        log: sim.log,
        global_models: sim.global_models,
        round_metrics: sim.daemon.history,
        stopped_early: sim.stopped_early,
        end_time: end.secs(),
        events: kernel.processed(),
    })
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig, sc: Scenario, stop: StopSignal) -> Self {
        let n = cfg.device_count();
        let seed = cfg.seed;
        let gossip_fanout = match cfg.aggregation {
            AggregationStrategy::GossipPush { fanout } => Some(fanout),
            _ => None,
        };
        let out_peers: Vec<Vec<usize>> = match cfg.mode {
            Mode::Centralized { aggregator } => (0..n)
                .map(|i| if i == aggregator { Vec::new() } else { vec![aggregator] })
                .collect(),
            Mode::P2P => match &cfg.training_graph {
                TrainingGraph::Neighbors => (0..n).map(|i| sc.graph.neighbors(NodeId(i)).to_vec()).collect(),
                TrainingGraph::Ring => (0..n).map(|i| if n > 1 { vec![(i + 1) % n] } else { Vec::new() }).collect(),
                TrainingGraph::Edges(edges) => {
                    let mut out = vec![Vec::new(); n];
                    for &(a, b) in edges {
                        out[a].push(b);
                    }
                    for o in &mut out {
                        o.sort_unstable();
                        o.dedup();
                    }
                    out
                }
            },
        };
        let mut in_peers = vec![Vec::new(); n];
        for (i, outs) in out_peers.iter().enumerate() {
            for &j in outs {
                in_peers[j].push(i);
            }
        }
        let arena = Arena {
            width: cfg.wireless.width,
            height: cfg.wireless.height,
        };
        let wireless = cfg.channel.mode == ChannelMode::Wireless;
        let mut placement = stream_rng(seed, Stream::Placement, 0, 0);
        let mut mobility_rng = stream_rng(seed, Stream::Mobility, 0, 0);
        let positions: Vec<Position> = cfg
            .devices
            .iter()
            .map(|d| match d.position {
                Some(p) => p,
                None if wireless => arena.sample(&mut placement),
                None => Position::new(0.0, 0.0),
            })
            .collect();
        let waypoints = cfg
            .devices
            .iter()
            .map(|d| Waypoint {
                target: if wireless { arena.sample(&mut mobility_rng) } else { Position::new(0.0, 0.0) },
                mobile: wireless && d.mobile,
            })
            .collect();
        let devices = cfg
            .devices
            .iter()
            .enumerate()
            .map(|(i, p)| Device {
                profile: p.clone(),
                model: None,
                round: 0,
                phase: Phase::Idle,
                inbox: Vec::new(),
                pending: None,
                history: Vec::new(),
                gossip_rng: stream_rng(seed, Stream::Gossip, i as u64, 0),
                noise_rng: stream_rng(seed, Stream::Noise, i as u64, 0),
            })
            .collect();
        Self {
            cfg,
            sc,
            n,
            devices,
            in_peers,
            out_peers,
            gossip_fanout,
            routes: HashMap::new(),
            transfers: Vec::new(),
            positions,
            waypoints,
            arena,
            channel_rng: stream_rng(seed, Stream::Channel, 0, 0),
            mobility_rng,
            log: MetricsLog::default(),
            daemon: Daemon {
                cfg: cfg.early_stop,
                partial: Vec::new(),
                history: Vec::new(),
            },
            stop,
            collected: BTreeMap::new(),
            global_models: Vec::new(),
            stopped_early: None,
        }
    }

    fn start(&mut self, k: &mut Kernel<Ev>) -> Result<(), SimError> {
        for i in 0..self.n {
            if self.sc.batch_clamped[i] {
                let mut r = MetricsRecord::new(0, NodeId(i), EventKind::Warn, 0.0);
                r.bytes = self.sc.batch[i] as u64;
                self.log.push(r);
            }
        }
        for i in 0..self.n {
            k.schedule(SimTime::ZERO, NodeId(i), Ev::RoundStart(0))?;
        }
        let w = &self.cfg.wireless;
        if self.cfg.channel.mode == ChannelMode::Wireless && w.speed > 0.0 && self.waypoints.iter().any(|p| p.mobile) {
            k.schedule_in(w.tick, NodeId(0), Ev::MobilityTick)?;
        }
        Ok(())
    }

    fn handle(&mut self, k: &mut Kernel<Ev>, ev: SimEvent<Ev>) -> Result<(), SimError> {
        let i = ev.target.0;
        match ev.payload {
            Ev::RoundStart(r) => self.start_round(k, i, r),
            Ev::TrainDone(r) => self.finish_training(k, i, r),
            Ev::Hop { transfer, hop } => self.hop(k, transfer, hop),
            Ev::MobilityTick => {
                let w = &self.cfg.wireless;
                update_positions(&mut self.positions, &mut self.waypoints, &self.arena, w.tick, w.speed, &mut self.mobility_rng);
                if k.pending() > 0 {
                    k.schedule_in(w.tick, NodeId(0), Ev::MobilityTick)?;
                }
                Ok(())
            }
            Ev::StopCheck => {
                if let Some(c) = &self.daemon.cfg {
                    if self.stopped_early.is_none() && early_stop(&self.daemon.history, c) {
                        let round = self.daemon.history.len() - 1;
                        info!("early stop after round {round}");
                        self.stopped_early = Some(round);
                        self.stop.raise();
                    }
                }
                Ok(())
            }
        }
    }

    fn record(&mut self, k: &Kernel<Ev>, device: usize, event: EventKind) -> MetricsRecord {
        MetricsRecord::new(self.devices[device].round, NodeId(device), event, k.now().secs())
    }

    fn weights_for(&self, local: usize, senders: &[usize]) -> Option<Vec<f64>> {
        match self.cfg.aggregation {
            AggregationStrategy::WeightedAverage => Some(
                std::iter::once(local)
                    .chain(senders.iter().copied())
                    .map(|d| self.sc.train[d].len() as f64)
                    .collect(),
            ),
            _ => None,
        }
    }

    fn start_round(&mut self, k: &mut Kernel<Ev>, i: usize, r: usize) -> Result<(), SimError> {
        let mut taken: Vec<Inbound> = match self.cfg.mode {
            Mode::Centralized { .. } => Vec::new(),
            Mode::P2P if self.gossip_fanout.is_some() => std::mem::take(&mut self.devices[i].inbox),
            Mode::P2P if r == 0 => Vec::new(),
            Mode::P2P => {
                let inbox = std::mem::take(&mut self.devices[i].inbox);
                let (now, later) = inbox.into_iter().partition(|m| m.round + 1 == r);
                self.devices[i].inbox = later;
                now
            }
        };
        taken.sort_by_key(|m| (m.round, m.src));
        let usable: Vec<(usize, &ModelParams)> = taken.iter().filter_map(|m| m.params.as_ref().map(|p| (m.src, p))).collect();
        let senders: Vec<usize> = usable.iter().map(|(s, _)| *s).collect();
        let models: Vec<&ModelParams> = usable.iter().map(|(_, p)| *p).collect();
        let weights = self.weights_for(i, &senders);

        let seed = self.cfg.seed;
        let init = match self.cfg.mode {
            Mode::P2P => init_seed(seed, Some(i)),
            Mode::Centralized { .. } => init_seed(seed, None),
        };
        let tc = TrainConfig {
            epochs: self.cfg.epochs_per_round,
            batch_size: self.sc.batch[i],
            learning_rate: self.cfg.learning_rate,
            seed: train_seed(seed, i, r),
        };
        let dev = &self.devices[i];
        let (model, metrics) = local_update(dev.model.as_ref(), &self.sc.shape, init, &models, weights.as_deref(), &self.sc.train[i], &tc)?;
        let duration = compute_time(&dev.profile, self.sc.train[i].len(), self.cfg.epochs_per_round, &self.cfg.timing);
        debug!("device {i} round {r}: merged {} updates, training for {duration:.6}s", models.len());

        let dev = &mut self.devices[i];
        dev.round = r;
        dev.phase = Phase::Training;
        dev.pending = Some((model, metrics, duration));
        k.schedule_in(duration, NodeId(i), Ev::TrainDone(r))?;
        Ok(())
    }

    fn finish_training(&mut self, k: &mut Kernel<Ev>, i: usize, r: usize) -> Result<(), SimError> {
        let (model, metrics, duration) = self.devices[i].pending.take().expect("training was started");
        self.devices[i].model = Some(model);
        let mut rec = self.record(k, i, EventKind::Train);
        rec.loss = Some(metrics.loss);
        rec.accuracy = Some(metrics.accuracy);
        rec.duration = duration;
        self.log.push(rec);

        match self.cfg.mode {
            Mode::P2P => {
                self.evaluate_and_report(k, i, r)?;
                if r + 1 < self.cfg.rounds {
                    let targets = match self.gossip_fanout {
                        Some(f) => {
                            let peers = self.sc.graph.neighbors(NodeId(i)).to_vec();
                            gossip_select(&peers, f, &mut self.devices[i].gossip_rng)
                        }
                        None => self.out_peers[i].clone(),
                    };
                    self.send_model(k, i, &targets, r)?;
                }
                self.advance(k, i, r)
            }
            Mode::Centralized { aggregator } if aggregator == i => {
                let own = self.devices[i].model.clone();
                self.collected.insert(i, own);
                self.try_aggregate(k, aggregator, r)
            }
            Mode::Centralized { aggregator } => {
                self.send_model(k, i, &[aggregator], r)?;
                self.devices[i].phase = Phase::Waiting;
                Ok(())
            }
        }
    }

    /// P2P: move to the next round if its inputs are present.
    fn advance(&mut self, k: &mut Kernel<Ev>, i: usize, r: usize) -> Result<(), SimError> {
        if r + 1 >= self.cfg.rounds {
            self.devices[i].phase = Phase::Done;
            return Ok(());
        }
        self.devices[i].round = r + 1;
        self.devices[i].phase = Phase::Waiting;
        self.wake_if_ready(k, i)
    }

    fn wake_if_ready(&mut self, k: &mut Kernel<Ev>, i: usize) -> Result<(), SimError> {
        let dev = &self.devices[i];
        if dev.phase != Phase::Waiting {
            return Ok(());
        }
        let r = dev.round;
        let ready = self.gossip_fanout.is_some()
            || self.in_peers[i]
                .iter()
                .all(|&j| dev.inbox.iter().any(|m| m.src == j && m.round + 1 == r));
        if ready {
            self.devices[i].phase = Phase::Idle;
            k.schedule(k.now(), NodeId(i), Ev::RoundStart(r))?;
        }
        Ok(())
    }

    fn evaluate_and_report(&mut self, k: &mut Kernel<Ev>, i: usize, r: usize) -> Result<(), SimError> {
        let model = self.devices[i].model.as_ref().expect("model exists after training");
        let test = evaluate(model, &self.sc.test)?;
        let adv = match self.devices[i].profile.adversary {
            AdversarySpec::FgsmEval { epsilon } => Some(adversarial_accuracy(model, &self.sc.test, epsilon)?),
            _ => None,
        };
        let val = match &self.sc.validation[i] {
            Some(v) => evaluate(model, v)?,
            None => evaluate(model, &self.sc.train[i])?,
        };
        let mut rec = MetricsRecord::new(r, NodeId(i), EventKind::Eval, k.now().secs());
        rec.loss = Some(test.loss);
        rec.accuracy = Some(test.accuracy);
        rec.adv_accuracy = adv;
        self.log.push(rec);
        self.devices[i].history.push(val);

        let metric = match self.daemon.cfg.map(|c| c.metric) {
            Some(StopMetric::Accuracy) => val.accuracy,
            _ => val.loss,
        };
        if self.daemon.report(r, metric, self.n) && self.daemon.cfg.is_some() {
            k.schedule(k.now(), NodeId(i), Ev::StopCheck)?;
        }
        Ok(())
    }

    fn send_model(&mut self, k: &mut Kernel<Ev>, i: usize, targets: &[usize], r: usize) -> Result<(), SimError> {
        if targets.is_empty() {
            return Ok(());
        }
        let dev = &mut self.devices[i];
        let model = dev.model.as_ref().expect("model exists before sending");
        let spec = dev.profile.adversary;
        let payload = if spec.acts_at(AttackPhase::PreSend) {
            serialize(&poison_update(model, &spec, &mut dev.noise_rng)?, self.cfg.compression)
        } else {
            serialize(model, self.cfg.compression)
        };
        for &t in targets {
            let msg = Message::new(NodeId(i), NodeId(t), r, payload.clone(), k.now());
            let mut rec = MetricsRecord::new(r, NodeId(i), EventKind::Send, k.now().secs());
            rec.bytes = msg.byte_len();
            rec.peer = Some(NodeId(t));
            self.log.push(rec);
            let path = self.route_for(i, t)?;
            let id = self.transfers.len();
            self.transfers.push(Some(Transfer { msg, path }));
            self.forward(k, id, 0)?;
        }
        Ok(())
    }

    fn route_for(&mut self, a: usize, b: usize) -> Result<Vec<NodeId>, SimError> {
        if let Some(p) = self.routes.get(&(a, b)) {
            return Ok(p.clone());
        }
        let p = route(NodeId(a), NodeId(b), &self.sc.graph)?;
        self.routes.insert((a, b), p.clone());
        Ok(p)
    }

    fn radio_rate(&self, i: usize) -> f64 {
        let cap = self.devices[i].profile.bandwidth_cap;
        match self.cfg.channel.mode {
            ChannelMode::Ideal => cap,
            ChannelMode::Wireless => {
                let w = &self.cfg.wireless;
                let pos = self.positions[i];
                match associate(pos, &w.access_points) {
                    Some(ap) => link_rate(pos, ap, &w.rates, &w.path_loss).min(ap.backbone_rate).min(cap),
                    None => cap,
                }
            }
        }
    }

    /// Schedule arrival of transfer `id` at `path[hop + 1]`.
    fn forward(&mut self, k: &mut Kernel<Ev>, id: usize, hop: usize) -> Result<(), SimError> {
        let t = self.transfers[id].as_ref().expect("live transfer");
        let (a, b) = (t.path[hop], t.path[hop + 1]);
        let size = t.msg.size_bits;
        let cap = self.sc.graph.edge_cap(a, b).expect("routes follow overlay edges");
        let ch = ChannelState {
            data_rate: cap.min(self.radio_rate(a.0)).min(self.radio_rate(b.0)),
            delay: self.cfg.channel.delay,
            loss_prob: self.cfg.channel.loss,
        };
        let dt = hop_time(size, &ch, self.cfg.channel.loss_mode, self.cfg.channel.mtu_bits, &mut self.channel_rng);
        k.schedule_in(dt, b, Ev::Hop { transfer: id, hop: hop + 1 })?;
        Ok(())
    }

    fn hop(&mut self, k: &mut Kernel<Ev>, id: usize, hop: usize) -> Result<(), SimError> {
        let last = self.transfers[id].as_ref().expect("live transfer").path.len() - 1;
        if hop < last {
            return self.forward(k, id, hop);
        }
        let t = self.transfers[id].take().expect("live transfer");
        self.deliver(k, t.msg)
    }

    fn deliver(&mut self, k: &mut Kernel<Ev>, msg: Message) -> Result<(), SimError> {
        let d = msg.dst.0;
        let src = msg.src.0;
        let parsed = deserialize(&msg.payload, &self.sc.shape, self.cfg.compression);
        let done = self.devices[d].phase == Phase::Done;
        let kind = if done || parsed.is_err() { EventKind::Drop } else { EventKind::Receive };
        let mut rec = self.record(k, d, kind);
        rec.bytes = msg.byte_len();
        rec.peer = Some(msg.src);
        rec.duration = k.now().secs() - msg.created_at.secs();
        self.log.push(rec);
        if done {
            return Ok(());
        }
        if let Err(e) = &parsed {
            debug!("device {d} dropped update from {src}: {e}");
        }
        if self.devices[d].profile.adversary.acts_at(AttackPhase::Receive) {
            let mut obs = self.record(k, d, EventKind::Observe);
            obs.bytes = msg.byte_len();
            obs.peer = Some(msg.src);
            self.log.push(obs);
        }
        let params = parsed.ok();
        match self.cfg.mode {
            Mode::P2P => {
                self.devices[d].inbox.push(Inbound {
                    src,
                    round: msg.round,
                    params,
                });
                self.wake_if_ready(k, d)
            }
            Mode::Centralized { aggregator } if aggregator == d => {
                self.collected.insert(src, params);
                self.try_aggregate(k, aggregator, msg.round)
            }
            Mode::Centralized { .. } => {
                if let Some(p) = params {
                    self.devices[d].model = Some(p);
                }
                let r = msg.round;
                self.evaluate_and_report(k, d, r)?;
                self.next_centralized_round(k, d, r)
            }
        }
    }

    fn next_centralized_round(&mut self, k: &mut Kernel<Ev>, i: usize, r: usize) -> Result<(), SimError> {
        if r + 1 < self.cfg.rounds {
            self.devices[i].phase = Phase::Idle;
            k.schedule(k.now(), NodeId(i), Ev::RoundStart(r + 1))?;
        } else {
            self.devices[i].phase = Phase::Done;
        }
        Ok(())
    }

    fn try_aggregate(&mut self, k: &mut Kernel<Ev>, a: usize, r: usize) -> Result<(), SimError> {
        if self.collected.len() < self.n {
            return Ok(());
        }
        let collected = std::mem::take(&mut self.collected);
        let own = collected[&a].clone().expect("aggregator's own model");
        let others: Vec<(usize, &ModelParams)> = collected
            .iter()
            .filter(|(&s, _)| s != a)
            .filter_map(|(&s, p)| p.as_ref().map(|p| (s, p)))
            .collect();
        let senders: Vec<usize> = others.iter().map(|(s, _)| *s).collect();
        let models: Vec<&ModelParams> = others.iter().map(|(_, p)| *p).collect();
        let weights = self.weights_for(a, &senders);
        let global = super::aggregate(&own, &models, weights.as_deref())?;
        debug!("aggregator {a} round {r}: averaged {} models", models.len() + 1);
        self.global_models.push(global.clone());
        self.devices[a].model = Some(global);
        self.evaluate_and_report(k, a, r)?;
        let clients: Vec<usize> = (0..self.n).filter(|&j| j != a).collect();
        self.send_model(k, a, &clients, r)?;
        self.next_centralized_round(k, a, r)
    }
}
