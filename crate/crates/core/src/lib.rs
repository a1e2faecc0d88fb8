//! Deterministic discrete-event simulator for centralized and peer-to-peer
//! federated learning.
//!
//! A run is described by a [`config::SimConfig`], usually parsed from YAML,
//! and executed by [`fl::run_simulation`], which returns the full
//! [`metrics::MetricsLog`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod adversary;
pub mod config;
pub mod data;
pub mod fl;
pub mod kernel;
pub mod learning;
pub mod metrics;
pub mod net;
pub mod rng;
