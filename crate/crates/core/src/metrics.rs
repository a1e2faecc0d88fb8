//! Metrics records, CSV/JSONL persistence and run summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::net::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Train,
    Receive,
    Send,
    Eval,
    Drop,
    Warn,
    /// An honest-but-curious device recording a received update.
    Observe,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Train => "train",
            EventKind::Receive => "receive",
            EventKind::Send => "send",
            EventKind::Eval => "eval",
            EventKind::Drop => "drop",
            EventKind::Warn => "warn",
            EventKind::Observe => "observe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub round: usize,
    pub device: NodeId,
    pub event: EventKind,
    pub sim_time: f64,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub adv_accuracy: Option<f64>,
    pub bytes: u64,
    pub peer: Option<NodeId>,
    /// Seconds spent: training time for `train`, end-to-end transfer time
    /// for `receive` and `drop`, 0 otherwise.
    pub duration: f64,
}

impl MetricsRecord {
    pub fn new(round: usize, device: NodeId, event: EventKind, sim_time: f64) -> Self {
        Self {
            round,
            device,
            event,
            sim_time,
            loss: None,
            accuracy: None,
            adv_accuracy: None,
            bytes: 0,
            peer: None,
            duration: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn push(&mut self, r: MetricsRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &MetricsRecord> {
        self.records.iter().filter(move |r| r.event == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Csv,
    Jsonl,
}

pub const CSV_HEADER: &str = "round,device,event,sim_time,loss,accuracy,adv_accuracy,bytes,peer,duration";

/// `%.9g`: nine significant digits, trailing zeros trimmed, exponent form
/// outside `1e-5 <= |x| < 1e9`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn render_csv(log: &MetricsLog) -> String {
    let mut out = String::with_capacity(64 * (log.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &log.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.round,
            r.device,
            r.event.as_str(),
            fmt_float(r.sim_time),
            opt_float(r.loss),
            opt_float(r.accuracy),
            opt_float(r.adv_accuracy),
            r.bytes,
            r.peer.map(|p| p.to_string()).unwrap_or_default(),
            fmt_float(r.duration),
        );
    }
    out
}

fn json_float(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => fmt_float(x),
        _ => "null".into(),
    }
}

/// One JSON object per record, keys in CSV column order.
pub fn render_jsonl(log: &MetricsLog) -> String {
    let mut out = String::with_capacity(160 * log.len());
    for r in &log.records {
        let _ = writeln!(
            out,
            "{{\"round\":{},\"device\":{},\"event\":\"{}\",\"sim_time\":{},\"loss\":{},\"accuracy\":{},\"adv_accuracy\":{},\"bytes\":{},\"peer\":{},\"duration\":{}}}",
            r.round,
            r.device,
            r.event.as_str(),
            json_float(Some(r.sim_time)),
            json_float(r.loss),
            json_float(r.accuracy),
            json_float(r.adv_accuracy),
            r.bytes,
            r.peer.map(|p| p.to_string()).unwrap_or_else(|| "null".into()),
            json_float(Some(r.duration)),
        );
    }
    out
}

pub fn render_metrics(log: &MetricsLog, format: MetricsFormat) -> String {
    match format {
        MetricsFormat::Csv => render_csv(log),
        MetricsFormat::Jsonl => render_jsonl(log),
    }
}

pub fn write_metrics(log: &MetricsLog, path: &Path, format: MetricsFormat) -> io::Result<()> {
    std::fs::write(path, render_metrics(log, format))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundSplit {
    pub round: usize,
    pub comm_time: f64,
    pub compute_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub devices: usize,
    /// Mean over devices of each device's last evaluated test accuracy.
    pub final_mean_accuracy: Option<f64>,
    pub total_sim_time: f64,
    /// Bytes put on the wire by `send` records.
    pub total_bytes: u64,
    /// Sum of transfer durations of delivered and dropped messages.
    pub comm_time: f64,
    /// Sum of local training durations.
    pub compute_time: f64,
    /// `comm_time + compute_time`.
    pub busy_time: f64,
    pub messages: usize,
    pub drops: usize,
    pub per_round: Vec<RoundSplit>,
}

pub fn summarize(log: &MetricsLog) -> Summary {
    let mut last_acc: BTreeMap<usize, f64> = BTreeMap::new();
    let mut devices = BTreeMap::new();
    let mut rounds: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut total_bytes = 0;
    let mut messages = 0;
    let mut drops = 0;
    let mut end = 0.0f64;
    for r in &log.records {
        devices.insert(r.device.0, ());
        end = end.max(r.sim_time);
        match r.event {
            EventKind::Eval => {
                if let Some(a) = r.accuracy {
                    last_acc.insert(r.device.0, a);
                }
            }
            EventKind::Send => {
                total_bytes += r.bytes;
                messages += 1;
            }
            EventKind::Receive | EventKind::Drop => {
                if r.event == EventKind::Drop {
                    drops += 1;
                }
                rounds.entry(r.round).or_default().0 += r.duration;
            }
            EventKind::Train => rounds.entry(r.round).or_default().1 += r.duration,
            EventKind::Warn | EventKind::Observe => {}
        }
    }
    let per_round: Vec<RoundSplit> = rounds
        .into_iter()
        .map(|(round, (comm_time, compute_time))| RoundSplit {
            round,
            comm_time,
            compute_time,
        })
        .collect();
    let comm_time = per_round.iter().map(|r| r.comm_time).sum();
    let compute_time = per_round.iter().map(|r| r.compute_time).sum();
    let final_mean_accuracy = (!last_acc.is_empty()).then(|| last_acc.values().sum::<f64>() / last_acc.len() as f64);
    Summary {
        devices: devices.len(),
        final_mean_accuracy,
        total_sim_time: end,
        total_bytes,
        comm_time,
        compute_time,
        busy_time: comm_time + compute_time,
        messages,
        drops,
        per_round,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval() -> MetricsRecord {
        let mut r = MetricsRecord::new(2, NodeId(1), EventKind::Eval, 1.25);
        r.loss = Some(0.5);
        r.accuracy = Some(0.875);
        r
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(0.1), "0.1");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_float(123456789.0), "123456789");
        assert_eq!(fmt_float(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_float(2.5e-7), "2.5e-7");
        assert_eq!(fmt_float(-0.00012), "-0.00012");
        assert_eq!(fmt_float(9.9999999999), "10");
        for x in [1.0 / 7.0, 2.0f64.sqrt() * 1e12, -3.3e-9] {
            let back: f64 = fmt_float(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_shapes() {
        let mut log = MetricsLog::default();
        assert_eq!(render_csv(&log), format!("{CSV_HEADER}\n"));
        log.push(eval());
        assert_eq!(render_csv(&log), format!("{CSV_HEADER}\n2,1,eval,1.25,0.5,0.875,,0,,0\n"));
    }

    #[test]
    fn jsonl_parses() {
        let mut log = MetricsLog::default();
        log.push(eval());
        let mut s = MetricsRecord::new(0, NodeId(0), EventKind::Send, 0.0);
        s.bytes = 10;
        s.peer = Some(NodeId(3));
        log.push(s);
        let text = render_jsonl(&log);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            r#"{"round":2,"device":1,"event":"eval","sim_time":1.25,"loss":0.5,"accuracy":0.875,"adv_accuracy":null,"bytes":0,"peer":null,"duration":0}"#
        );
        assert!(lines[1].contains(r#""peer":3"#));
    }

    #[test]
    fn write_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = MetricsLog::default();
        log.push(eval());
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_metrics(&log, &a, MetricsFormat::Csv).unwrap();
        write_metrics(&log, &b, MetricsFormat::Csv).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        assert!(write_metrics(&log, &dir.path().join("missing/x.csv"), MetricsFormat::Csv).is_err());
    }

    #[test]
    fn summary_accounting() {
        let mut log = MetricsLog::default();
        let mut t = MetricsRecord::new(0, NodeId(0), EventKind::Train, 1.0);
        t.duration = 1.0;
        log.push(t.clone());
        t.round = 1;
        t.duration = 0.5;
        log.push(t);
        let mut rx = MetricsRecord::new(1, NodeId(1), EventKind::Receive, 2.0);
        rx.duration = 0.25;
        log.push(rx);
        log.push(eval());
        let s = summarize(&log);
        assert_eq!(s.comm_time, 0.25);
        assert_eq!(s.compute_time, 1.5);
        assert_eq!(s.busy_time, s.per_round.iter().map(|r| r.comm_time + r.compute_time).sum::<f64>());
        assert_eq!(s.final_mean_accuracy, Some(0.875));
        assert_eq!(s.total_sim_time, 2.0);
        assert_eq!(s.devices, 2);
    }
}
