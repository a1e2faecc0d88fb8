//! Discrete-event kernel.
//!
//! Events are kept in a min-heap keyed by `(time, seq)`. The sequence number
//! is assigned at scheduling time, so events sharing a timestamp are
//! delivered in the order they were scheduled. Nothing in here depends on
//! wall-clock time or thread scheduling: a run is a pure function of the
//! events fed into it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::Add;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;

use thiserror::Error;

use crate::net::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("cannot schedule event at t={requested} before current time t={now}")]
    PastEvent { requested: f64, now: f64 },
    #[error("simulated time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
}

/// Simulated wall-clock time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self, KernelError> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(SimTime(seconds))
        } else {
            Err(KernelError::InvalidTime(seconds))
        }
    }

    /// Panics on invalid input; for literals and already-validated values.
    pub fn from_secs(seconds: f64) -> Self {
        Self::new(seconds).expect("invalid simulated time")
    }

    #[inline]
    pub fn secs(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: f64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

/// A scheduled unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<P> {
    pub time: SimTime,
    pub seq: u64,
    pub target: NodeId,
    pub payload: P,
}

struct Pending<P>(SimEvent<P>);

impl<P> PartialEq for Pending<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl<P> Eq for Pending<P> {}

impl<P> PartialOrd for Pending<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Pending<P> {
    // Reversed so that BinaryHeap (a max-heap) pops the smallest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .cmp(&self.0.time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Shared flag that asks the kernel to stop between events.
#[derive(Debug, Clone, Default)]
pub struct StopSignal(Arc<AtomicBool>);

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raise(&self) {
        self.0.store(true, AtomicOrdering::SeqCst);
    }

    pub fn is_raised(&self) -> bool {
        self.0.load(AtomicOrdering::SeqCst)
    }
}

/// Single-threaded event scheduler.
pub struct Kernel<P> {
    queue: BinaryHeap<Pending<P>>,
    now: SimTime,
    next_seq: u64,
    processed: u64,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Self {
            queue: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            processed: 0,
        }
    }

    #[inline]
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn next_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|p| p.0.time)
    }

    /// Queue `payload` for `target` at absolute time `time`. Returns the
    /// sequence number assigned to the event.
    pub fn schedule(&mut self, time: SimTime, target: NodeId, payload: P) -> Result<u64, KernelError> {
        if !time.secs().is_finite() || time.secs() < 0.0 {
            return Err(KernelError::InvalidTime(time.secs()));
        }
        if time < self.now {
            return Err(KernelError::PastEvent {
                requested: time.secs(),
                now: self.now.secs(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Pending(SimEvent {
            time,
            seq,
            target,
            payload,
        }));
        Ok(seq)
    }

    /// Schedule relative to the current time.
    pub fn schedule_in(&mut self, delay: f64, target: NodeId, payload: P) -> Result<u64, KernelError> {
        let time = SimTime::new(self.now.secs() + delay)?;
        self.schedule(time, target, payload)
    }

    /// Process events in `(time, seq)` order until the queue drains, the next
    /// event lies beyond `horizon`, or `stop` is raised. The stop signal is
    /// only inspected between events.
    ///
    /// When the horizon cuts the run the clock is advanced to `horizon` and
    /// later events stay queued. Handler errors abort the run immediately.
    pub fn run_until<F, E>(&mut self, horizon: SimTime, stop: &StopSignal, mut handler: F) -> Result<SimTime, E>
    where
        F: FnMut(&mut Self, SimEvent<P>) -> Result<(), E>,
    {
        loop {
            if stop.is_raised() {
                return Ok(self.now);
            }
            let Some(next) = self.next_time() else {
                return Ok(self.now);
            };
            if next > horizon {
                if horizon > self.now {
                    self.now = horizon;
                }
                return Ok(self.now);
            }
            let Pending(event) = self.queue.pop().expect("peeked event");
            self.now = event.time;
            self.processed += 1;
            handler(self, event)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn drain(kernel: &mut Kernel<&'static str>, horizon: f64) -> (Vec<&'static str>, SimTime) {
        let mut seen = Vec::new();
        let end = kernel
            .run_until(t(horizon), &StopSignal::new(), |_, ev| {
                seen.push(ev.payload);
                Ok::<_, Infallible>(())
            })
            .unwrap();
        (seen, end)
    }

    #[test]
    fn earlier_event_dequeued_first() {
        let mut k = Kernel::new();
        k.schedule(t(5.0), NodeId(0), "late").unwrap();
        k.schedule(t(3.0), NodeId(0), "early").unwrap();
        let (seen, _) = drain(&mut k, 100.0);
        assert_eq!(seen, vec!["early", "late"]);
    }

    #[test]
    fn equal_times_are_fifo() {
        let mut k = Kernel::new();
        k.schedule(t(7.0), NodeId(0), "A").unwrap();
        k.schedule(t(7.0), NodeId(1), "B").unwrap();
        let (seen, _) = drain(&mut k, 100.0);
        assert_eq!(seen, vec!["A", "B"]);
    }

    #[test]
    fn scheduling_into_the_past_fails() {
        let mut k = Kernel::new();
        k.schedule(t(2.0), NodeId(0), "x").unwrap();
        drain(&mut k, 10.0);
        assert_eq!(k.now(), t(2.0));
        let err = k.schedule(t(1.0), NodeId(0), "y").unwrap_err();
        assert!(matches!(err, KernelError::PastEvent { .. }));
    }

    #[test]
    fn empty_queue_keeps_time() {
        let mut k: Kernel<&'static str> = Kernel::new();
        let (seen, end) = drain(&mut k, 100.0);
        assert!(seen.is_empty());
        assert_eq!(end, SimTime::ZERO);
    }

    #[test]
    fn horizon_cuts_run() {
        let mut k = Kernel::new();
        for (s, name) in [(1.0, "a"), (2.0, "b"), (3.0, "c")] {
            k.schedule(t(s), NodeId(0), name).unwrap();
        }
        let (seen, end) = drain(&mut k, 2.5);
        assert_eq!(seen, vec!["a", "b"]);
        assert_eq!(end, t(2.5));
        assert_eq!(k.pending(), 1);
        assert_eq!(k.next_time(), Some(t(3.0)));
    }

    #[test]
    fn stop_signal_checked_between_events() {
        let mut k = Kernel::new();
        for s in [1.0, 2.0, 3.0] {
            k.schedule(t(s), NodeId(0), "e").unwrap();
        }
        let stop = StopSignal::new();
        let mut count = 0;
        k.run_until(t(10.0), &stop, |_, _| {
            count += 1;
            stop.raise();
            Ok::<_, Infallible>(())
        })
        .unwrap();
        assert_eq!(count, 1);
        assert_eq!(k.pending(), 2);
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut k = Kernel::new();
        k.schedule(t(1.0), NodeId(0), 0u32).unwrap();
        let mut order = Vec::new();
        k.run_until(t(10.0), &StopSignal::new(), |k, ev| {
            order.push((ev.time.secs(), ev.payload));
            if ev.payload < 3 {
                k.schedule_in(1.0, NodeId(0), ev.payload + 1).unwrap();
                // same-time follow-up lands after already-queued same-time events
                k.schedule_in(0.0, NodeId(0), 100 + ev.payload).unwrap();
            }
            Ok::<_, Infallible>(())
        })
        .unwrap();
        assert_eq!(order[0], (1.0, 0));
        assert_eq!(order[1], (1.0, 100));
        assert_eq!(order[2], (2.0, 1));
        assert_eq!(k.processed(), 7);
    }

    #[test]
    fn rejects_non_finite_time() {
        assert!(SimTime::new(f64::NAN).is_err());
        assert!(SimTime::new(-1.0).is_err());
        assert!(SimTime::new(f64::INFINITY).is_err());
    }
}
