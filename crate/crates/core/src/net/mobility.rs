//! Random-waypoint mobility.

use rand::Rng;

use super::Position;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn contains(&self, p: &Position) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(
            rng.random::<f64>() * self.width,
            rng.random::<f64>() * self.height,
        )
    }
}

/// Per-device mobility state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub target: Position,
    pub mobile: bool,
}

/// Advance every mobile device toward its waypoint by `speed * dt`. A device
/// that reaches its waypoint stops there and draws a fresh one; leftover
/// step length is discarded.
pub fn update_positions<R: Rng + ?Sized>(
    positions: &mut [Position],
    waypoints: &mut [Waypoint],
    arena: &Arena,
    dt: f64,
    speed: f64,
    rng: &mut R,
) {
    debug_assert_eq!(positions.len(), waypoints.len());
    if speed <= 0.0 || dt <= 0.0 {
        return;
    }
    let step = speed * dt;
    for (pos, wp) in positions.iter_mut().zip(waypoints.iter_mut()) {
        if !wp.mobile {
            continue;
        }
        let dx = wp.target.x - pos.x;
        let dy = wp.target.y - pos.y;
        let dist = dx.hypot(dy);
        if dist <= step {
            *pos = wp.target;
            wp.target = arena.sample(rng);
        } else {
            let f = step / dist;
            pos.x = (pos.x + dx * f).clamp(0.0, arena.width);
            pos.y = (pos.y + dy * f).clamp(0.0, arena.height);
        }
    }
}
