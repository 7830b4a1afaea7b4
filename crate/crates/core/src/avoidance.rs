//! Single-stage vector field histogram heading selection.

use serde::{Deserialize, Serialize};

use crate::environment::RangeScan;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct VfhParams<S> {
    pub ray_count: usize,
    /// Range sensor reach, meters.
    pub max_range: S,
    pub sector_count: usize,
    /// Sector is blocked when its density exceeds this.
    pub threshold: S,
    pub safety_margin_sectors: usize,
}

impl<S: Scalar> Default for VfhParams<S> {
    fn default() -> Self {
        Self {
            ray_count: 72,
            max_range: S::lit(30.0),
            sector_count: 36,
            threshold: S::lit(0.6),
            safety_margin_sectors: 1,
        }
    }
}

impl<S: Scalar> VfhParams<S> {
    pub fn validate(&self) -> Result<()> {
        if self.ray_count < 8 {
            return Err(Error::InvalidConfig("avoidance.ray_count >= 8".into()));
        }
        if self.sector_count < 4 {
            return Err(Error::InvalidConfig("avoidance.sector_count >= 4".into()));
        }
        if !(self.max_range > S::zero()) {
            return Err(Error::InvalidConfig("avoidance.max_range > 0".into()));
        }
        if !(self.threshold >= S::zero()) {
            return Err(Error::InvalidConfig("avoidance.threshold >= 0".into()));
        }
        Ok(())
    }
}

/// Per-sector obstacle density around the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarHistogram<S> {
    pub density: Vec<S>,
    pub threshold: S,
}

impl<S: Scalar> PolarHistogram<S> {
    pub fn sector_count(&self) -> usize {
        self.density.len()
    }

    pub fn sector_width(&self) -> S {
        S::TAU() / S::from_count(self.sector_count())
    }

    pub fn blocked(&self, sector: usize) -> bool {
        self.density[sector % self.sector_count()] > self.threshold
    }

    pub fn sector_of(&self, heading: S) -> usize {
        let n = self.sector_count();
        let s = (wrap_angle(heading) / self.sector_width()).floor().to_usize().unwrap_or(0);
        s.min(n - 1)
    }

    pub fn sector_center(&self, sector: usize) -> S {
        (S::from_count(sector) + S::lit(0.5)) * self.sector_width()
    }

    /// The sector and its `margin` neighbours on each side are all unblocked.
    pub fn clear_with_margin(&self, sector: usize, margin: usize) -> bool {
        let n = self.sector_count();
        let span = (2 * margin + 1).min(n);
        (0..span).all(|k| !self.blocked((sector + n * (margin + 1) + k - margin) % n))
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<S: Scalar>(a: S) -> S {
    let tau = S::TAU();
    let w = a % tau;
    let w = if w < S::zero() { w + tau } else { w };
    if w >= tau {
        S::zero()
    } else {
        w
    }
}

/// Signed difference `to − from` wrapped into `(−π, π]`.
pub fn angle_diff<S: Scalar>(from: S, to: S) -> S {
    let d = wrap_angle(to - from);
    if d > S::PI() {
        d - S::TAU()
    } else {
        d
    }
}

/// Each ray adds `(max − d) / max` to its sector; a sector keeps its maximum.
pub fn build_histogram<S: Scalar>(scan: &RangeScan<S>, sector_count: usize, threshold: S) -> PolarHistogram<S> {
    let rays = scan.ray_count();
    let mut density = vec![S::zero(); sector_count];
    for (k, &d) in scan.distances.iter().enumerate() {
        // Rays are uniform, so the containing sector is exact in integers.
        let sector = k * sector_count / rays;
        let w = ((scan.max_range - d) / scan.max_range).max(S::zero());
        density[sector] = density[sector].max(w);
    }
    PolarHistogram { density, threshold }
}

/// Keeps `desired` when its sector is clear with margin, otherwise returns the
/// center of the closest sector that is. Ties go counterclockwise.
pub fn select_heading<S: Scalar>(hist: &PolarHistogram<S>, desired: S, margin: usize) -> Option<S> {
    let desired = wrap_angle(desired);
    if hist.clear_with_margin(hist.sector_of(desired), margin) {
        return Some(desired);
    }
    let tie = hist.sector_width() * S::lit(1e-6);
    let mut best: Option<(S, S, S)> = None; // (|dev|, dev, heading)
    for s in 0..hist.sector_count() {
        if !hist.clear_with_margin(s, margin) {
            continue;
        }
        let center = hist.sector_center(s);
        let dev = angle_diff(desired, center);
        let candidate = (dev.abs(), dev, center);
        best = match best {
            None => Some(candidate),
            Some(cur) if candidate.0 < cur.0 - tie => Some(candidate),
            Some(cur) if (candidate.0 - cur.0).abs() <= tie && candidate.1 > cur.1 => Some(candidate),
            keep => keep,
        };
    }
    best.map(|(_, _, h)| h)
}
