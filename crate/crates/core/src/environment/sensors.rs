//! The two onboard sensors: noisy distance-to-target and a local range scan.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::WorldMap;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Scalar;

/// Distance to the target plus Gaussian noise, floored at zero.
///
/// Obstacles do not attenuate this sensor.
pub fn sense_distance<S: Scalar, R: Rng + ?Sized>(
    agent_pos: Vec2<S>,
    target: Vec2<S>,
    sigma: S,
    rng: &mut R,
) -> S {
    let d = agent_pos.distance(target);
    if sigma <= S::zero() {
        return d;
    }
    let noise = Normal::new(0.0, sigma.as_f64())
        .expect("sigma is finite and positive")
        .sample(rng);
    (d + S::lit(noise)).max(S::zero())
}

/// Range readings on rays uniformly spaced over the full circle.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan<S> {
    pub origin: Vec2<S>,
    pub max_range: S,
    /// Ray `k` points at heading `k · 2π / distances.len()`.
    pub distances: Vec<S>,
}

impl<S: Scalar> RangeScan<S> {
    pub fn ray_count(&self) -> usize {
        self.distances.len()
    }

    pub fn heading(&self, ray: usize) -> S {
        S::TAU() * S::from_count(ray) / S::from_count(self.ray_count())
    }

    /// An obstacle-free scan.
    pub fn open(origin: Vec2<S>, ray_count: usize, max_range: S) -> Self {
        Self { origin, max_range, distances: vec![max_range; ray_count] }
    }
}

/// Ray-marches each ray at quarter-cell steps until the first non-free sample.
///
/// The map boundary counts as an obstacle.
pub fn range_scan<S: Scalar>(
    map: &WorldMap<S>,
    pos: Vec2<S>,
    ray_count: usize,
    max_range: S,
) -> Result<RangeScan<S>> {
    if !map.is_free(pos) {
        return Err(Error::OriginOccupied);
    }
    let step = map.cell_size * S::lit(0.25);
    let steps = (max_range / step).ceil().to_usize().unwrap_or(0).max(1);
    let mut scan = RangeScan::open(pos, ray_count, max_range);
    for ray in 0..ray_count {
        let dir = Vec2::from_heading(scan.heading(ray));
        for k in 1..=steps {
            let t = (step * S::from_count(k)).min(max_range);
            if !map.is_free(pos + dir * t) {
                scan.distances[ray] = t;
                break;
            }
        }
    }
    Ok(scan)
}
