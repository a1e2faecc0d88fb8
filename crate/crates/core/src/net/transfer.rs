//! Store-and-forward transfer timing over multi-hop overlay routes.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::{NetError, NodeId};
use crate::kernel::SimTime;

pub const DEFAULT_MTU_BITS: u64 = 12_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// Fixed configured rates, no mobility.
    Ideal,
    /// Rates from device-to-access-point path loss; devices move.
    Wireless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Serialization inflated by `1 / (1 - p)`.
    Expected,
    /// Per-packet retransmissions drawn from the channel RNG.
    Stochastic,
}

/// Conditions seen by one hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// bits/second
    pub data_rate: f64,
    /// seconds
    pub delay: f64,
    pub loss_prob: f64,
}

impl ChannelState {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.data_rate > 0.0) || !self.data_rate.is_finite() {
            return Err(NetError::InvalidChannel(format!("data rate {} must be positive", self.data_rate)));
        }
        if !(self.delay >= 0.0) || !self.delay.is_finite() {
            return Err(NetError::InvalidChannel(format!("delay {} must be non-negative", self.delay)));
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return Err(NetError::InvalidChannel(format!("loss probability {} outside [0, 1)", self.loss_prob)));
        }
        Ok(())
    }
}

/// Serialized model update in flight between two devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub src: NodeId,
    pub dst: NodeId,
    /// Sender's round when the update was produced.
    pub round: usize,
    pub size_bits: u64,
    pub payload: Vec<u8>,
    pub created_at: SimTime,
}

impl Message {
    pub fn new(src: NodeId, dst: NodeId, round: usize, payload: Vec<u8>, created_at: SimTime) -> Self {
        Self {
            src,
            dst,
            round,
            size_bits: 8 * payload.len() as u64,
            payload,
            created_at,
        }
    }

    pub fn byte_len(&self) -> u64 {
        self.size_bits / 8
    }
}

/// Time for one hop: serialization (inflated by losses) plus propagation delay.
pub fn hop_time<R: Rng + ?Sized>(size_bits: u64, channel: &ChannelState, mode: LossMode, mtu_bits: u64, rng: &mut R) -> f64 {
    let p = channel.loss_prob;
    let serialization = match mode {
        LossMode::Expected => size_bits as f64 / channel.data_rate / (1.0 - p),
        LossMode::Stochastic => {
            let mtu = mtu_bits.max(1);
            let full = size_bits / mtu;
            let tail = size_bits % mtu;
            let retries = Geometric::new(1.0 - p).expect("loss probability in [0, 1)");
            let mut bits = 0u64;
            for _ in 0..full {
                bits += mtu * (1 + retries.sample(rng));
            }
            if tail > 0 {
                bits += tail * (1 + retries.sample(rng));
            }
            bits as f64 / channel.data_rate
        }
    };
    serialization + channel.delay
}

/// Store-and-forward time along `path`; `channels[i]` describes the hop from
/// `path[i]` to `path[i + 1]`.
pub fn transfer_time<R: Rng + ?Sized>(
    msg: &Message,
    path: &[NodeId],
    channels: &[ChannelState],
    mode: LossMode,
    mtu_bits: u64,
    rng: &mut R,
) -> Result<f64, NetError> {
    if path.len() < 2 || path[0] != msg.src || path[path.len() - 1] != msg.dst {
        return Err(NetError::InvalidChannel(format!(
            "path does not connect {} to {}",
            msg.src, msg.dst
        )));
    }
    if channels.len() != path.len() - 1 {
        return Err(NetError::InvalidChannel(format!(
            "{} hops but {} channel states",
            path.len() - 1,
            channels.len()
        )));
    }
    for ch in channels {
        ch.validate()?;
    }
    Ok(channels
        .iter()
        .map(|ch| hop_time(msg.size_bits, ch, mode, mtu_bits, rng))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn msg(bits: u64, hops: usize) -> (Message, Vec<NodeId>) {
        let path: Vec<NodeId> = (0..=hops).map(NodeId).collect();
        let m = Message {
            src: path[0],
            dst: path[hops],
            round: 0,
            size_bits: bits,
            payload: Vec::new(),
            created_at: SimTime::ZERO,
        };
        (m, path)
    }

    fn ch(rate: f64, delay: f64, loss: f64) -> ChannelState {
        ChannelState {
            data_rate: rate,
            delay,
            loss_prob: loss,
        }
    }

    #[test]
    fn single_hop() {
        let (m, p) = msg(8_000_000, 1);
        let t = transfer_time(&m, &p, &[ch(1e6, 0.05, 0.0)], LossMode::Expected, DEFAULT_MTU_BITS, &mut seeded(0)).unwrap();
        assert!((t - 8.05).abs() < 1e-12);
    }

    #[test]
    fn two_hops_store_and_forward() {
        let (m, p) = msg(8_000_000, 2);
        let c = ch(2e6, 0.01, 0.0);
        let t = transfer_time(&m, &p, &[c, c], LossMode::Expected, DEFAULT_MTU_BITS, &mut seeded(0)).unwrap();
        assert!((t - 8.02).abs() < 1e-12);
    }

    #[test]
    fn expected_loss_inflation() {
        let (m, p) = msg(1_000_000, 1);
        let lossless = transfer_time(&m, &p, &[ch(1e6, 0.0, 0.0)], LossMode::Expected, DEFAULT_MTU_BITS, &mut seeded(0)).unwrap();
        let lossy = transfer_time(&m, &p, &[ch(1e6, 0.0, 0.2)], LossMode::Expected, DEFAULT_MTU_BITS, &mut seeded(0)).unwrap();
        assert!((lossy - lossless * 1.25).abs() < 1e-12);
    }

    #[test]
    fn stochastic_without_loss_matches_expected() {
        let (m, p) = msg(30_001, 1);
        let c = [ch(1e5, 0.1, 0.0)];
        let a = transfer_time(&m, &p, &c, LossMode::Stochastic, DEFAULT_MTU_BITS, &mut seeded(1)).unwrap();
        let b = transfer_time(&m, &p, &c, LossMode::Expected, DEFAULT_MTU_BITS, &mut seeded(1)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn mismatched_path_rejected() {
        let (m, p) = msg(10, 2);
        assert!(transfer_time(&m, &p, &[ch(1.0, 0.0, 0.0)], LossMode::Expected, 1, &mut seeded(0)).is_err());
        assert!(transfer_time(&m, &p[..2], &[ch(1.0, 0.0, 0.0)], LossMode::Expected, 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn message_size_is_eight_bits_per_byte() {
        let m = Message::new(NodeId(0), NodeId(1), 3, vec![0u8; 17], SimTime::ZERO);
        assert_eq!(m.size_bits, 136);
        assert_eq!(m.byte_len(), 17);
    }

    proptest! {
        #[test]
        fn expected_time_monotone(
            bits in 1u64..10_000_000,
            extra_bits in 0u64..1_000_000,
            rate in 1e3f64..1e9,
            rate_drop in 0.0f64..0.9,
            delay in 0.0f64..1.0,
            loss in 0.0f64..0.9,
            loss_up in 0.0f64..0.09,
        ) {
            let mut rng = seeded(0);
            let base = hop_time(bits, &ch(rate, delay, loss), LossMode::Expected, DEFAULT_MTU_BITS, &mut rng);
            prop_assert!(hop_time(bits + extra_bits, &ch(rate, delay, loss), LossMode::Expected, DEFAULT_MTU_BITS, &mut rng) >= base);
            prop_assert!(hop_time(bits, &ch(rate * (1.0 - rate_drop), delay, loss), LossMode::Expected, DEFAULT_MTU_BITS, &mut rng) >= base);
            prop_assert!(hop_time(bits, &ch(rate, delay + 0.5, loss), LossMode::Expected, DEFAULT_MTU_BITS, &mut rng) >= base);
            prop_assert!(hop_time(bits, &ch(rate, delay, loss + loss_up), LossMode::Expected, DEFAULT_MTU_BITS, &mut rng) >= base);
        }
    }
}
