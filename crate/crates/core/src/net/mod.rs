//! Wireless channel, mobility, overlay topology and message transfer.

mod mobility;
mod radio;
mod topology;
mod transfer;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use mobility::{update_positions, Arena, Waypoint};
pub use radio::{associate, link_rate, path_loss_db, AccessPoint, PathLossModel, RateTier, RateTable};
pub use topology::{route, TopologyGraph, TopologyKind};
pub use transfer::{hop_time, transfer_time, ChannelMode, ChannelState, LossMode, Message, DEFAULT_MTU_BITS};

/// Dense device index, `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid path-loss parameters: {0}")]
    InvalidPathLoss(String),
    #[error("no route from node {src} to node {dst}")]
    Unroutable { src: usize, dst: usize },
    #[error("route endpoints must be distinct nodes below {n}, got {src} -> {dst}")]
    BadEndpoints { src: usize, dst: usize, n: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
}
