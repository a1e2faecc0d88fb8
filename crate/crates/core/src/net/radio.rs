//! Device-to-access-point radio link: log-distance path loss and tiered
//! rate adaptation.

use super::{NetError, Position};

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub id: usize,
    pub position: Position,
    /// bits/second
    pub backbone_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub exponent: f64,
    pub ref_loss_db: f64,
    pub ref_distance: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            exponent: 3.0,
            ref_loss_db: 40.0,
            ref_distance: 1.0,
        }
    }
}

impl PathLossModel {
    /// Loss at `distance`, treating zero distance as the reference distance.
    pub fn loss_at(&self, distance: f64) -> f64 {
        let d = if distance > 0.0 { distance } else { self.ref_distance };
        path_loss_db(d, self.exponent, self.ref_loss_db, self.ref_distance)
            .unwrap_or(self.ref_loss_db)
    }
}

/// Log-distance path loss in dB. Distances inside the reference distance are
/// clamped to the reference loss.
pub fn path_loss_db(distance: f64, exponent: f64, ref_loss_db: f64, ref_dist: f64) -> Result<f64, NetError> {
    if !(distance > 0.0) {
        return Err(NetError::NonPositiveDistance(distance));
    }
    if !(ref_dist > 0.0) || !(exponent >= 1.0) {
        return Err(NetError::InvalidPathLoss(format!(
            "ref_distance {ref_dist}, exponent {exponent}"
        )));
    }
    if distance < ref_dist {
        return Ok(ref_loss_db);
    }
    Ok(ref_loss_db + 10.0 * exponent * (distance / ref_dist).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTier {
    pub max_loss_db: f64,
    pub rate_bps: f64,
}

/// Ordered rate tiers plus the floor rate used beyond the last tier.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub tiers: Vec<RateTier>,
    pub floor_rate: f64,
}

impl Default for RateTable {
    fn default() -> Self {
        Self {
            tiers: vec![
                RateTier {
                    max_loss_db: 60.0,
                    rate_bps: 54e6,
                },
                RateTier {
                    max_loss_db: 80.0,
                    rate_bps: 6e6,
                },
            ],
            floor_rate: 1e6,
        }
    }
}

impl RateTable {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.tiers.is_empty() {
            return Err(NetError::InvalidChannel("rate tiers must be nonempty".into()));
        }
        for pair in self.tiers.windows(2) {
            if !(pair[0].max_loss_db < pair[1].max_loss_db) {
                return Err(NetError::InvalidChannel(
                    "rate tiers must be sorted by ascending max_loss_db".into(),
                ));
            }
            if !(pair[0].rate_bps > pair[1].rate_bps) {
                return Err(NetError::InvalidChannel(
                    "rate tier rates must be strictly decreasing".into(),
                ));
            }
        }
        if self.tiers.iter().any(|t| !(t.rate_bps > 0.0)) || !(self.floor_rate > 0.0) {
            return Err(NetError::InvalidChannel("rates must be positive".into()));
        }
        Ok(())
    }

    pub fn rate_for_loss(&self, loss_db: f64) -> f64 {
        self.tiers
            .iter()
            .find(|t| t.max_loss_db >= loss_db)
            .map_or(self.floor_rate, |t| t.rate_bps)
    }
}

/// Radio rate between a device and an access point.
pub fn link_rate(device_pos: Position, ap: &AccessPoint, tiers: &RateTable, model: &PathLossModel) -> f64 {
    let loss = model.loss_at(device_pos.distance(&ap.position));
    tiers.rate_for_loss(loss)
}

/// Nearest access point; ties go to the lowest id.
pub fn associate(device_pos: Position, aps: &[AccessPoint]) -> Option<&AccessPoint> {
    aps.iter().min_by(|a, b| {
        let da = device_pos.distance(&a.position);
        let db = device_pos.distance(&b.position);
        da.total_cmp(&db).then(a.id.cmp(&b.id))
    })
}
