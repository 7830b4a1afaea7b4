//! Grid A* on the obstacle twin, used to pull trapped agents toward gbest.
//!
//! Costs are kept exactly as `straight + diagonal·√2` step counts, so two
//! optimal paths always compare equal regardless of summation order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::environment::{Cell, WorldMap};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Scalar;

/// Maximum number of path points inspected when string-pulling.
pub const LOOKAHEAD: usize = 24;

/// Path length as `straight + diagonal·√2` cell steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OctileCost {
    pub straight: u64,
    pub diagonal: u64,
}

impl OctileCost {
    pub const ZERO: Self = Self { straight: 0, diagonal: 0 };
    pub const STRAIGHT: Self = Self { straight: 1, diagonal: 0 };
    pub const DIAGONAL: Self = Self { straight: 0, diagonal: 1 };

    /// Octile distance between two cells.
    pub fn between(a: Cell, b: Cell) -> Self {
        let dc = a.col.abs_diff(b.col) as u64;
        let dr = a.row.abs_diff(b.row) as u64;
        Self { straight: dc.max(dr) - dc.min(dr), diagonal: dc.min(dr) }
    }

    /// Length in meters.
    pub fn meters<S: Scalar>(self, cell_size: S) -> S {
        (S::lit(self.straight as f64) + S::lit(self.diagonal as f64) * S::SQRT_2()) * cell_size
    }
}

impl Add for OctileCost {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { straight: self.straight + rhs.straight, diagonal: self.diagonal + rhs.diagonal }
    }
}

impl Ord for OctileCost {
    /// Exact comparison of `a + b√2` values.
    fn cmp(&self, other: &Self) -> Ordering {
        let da = self.straight as i128 - other.straight as i128;
        let db = other.diagonal as i128 - self.diagonal as i128;
        // Compare da with db·√2.
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (sa, sb) if sa >= 0 && sb <= 0 => Ordering::Greater,
            (sa, sb) if sa <= 0 && sb >= 0 => Ordering::Less,
            (1, 1) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct PlannerParams<S> {
    /// gbest drift (m) that triggers a fresh plan for a rescued agent.
    pub replan_threshold: S,
}

impl<S: Scalar> Default for PlannerParams<S> {
    fn default() -> Self {
        Self { replan_threshold: S::lit(15.0) }
    }
}

impl<S: Scalar> PlannerParams<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.replan_threshold >= S::zero() && self.replan_threshold.is_finite()) {
            return Err(Error::InvalidConfig("planner.replan_threshold >= 0".into()));
        }
        Ok(())
    }
}

/// Cell-center path from start to goal.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath<S> {
    pub cells: Vec<Cell>,
    pub points: Vec<Vec2<S>>,
    pub cost: OctileCost,
    /// Meters under the octile metric.
    pub total_cost: S,
}

impl<S: Scalar> GridPath<S> {
    pub fn goal(&self) -> Vec2<S> {
        *self.points.last().expect("paths are never empty")
    }
}

/// 8-connected moves with no corner cutting: a diagonal needs both adjacent
/// orthogonal cells free.
pub fn neighbors<S: Scalar>(map: &WorldMap<S>, c: Cell) -> impl Iterator<Item = (Cell, OctileCost)> + '_ {
    const STEPS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    let (col, row) = (c.col as i64, c.row as i64);
    STEPS.iter().filter_map(move |&(dc, dr)| {
        let (nc, nr) = (col + dc, row + dr);
        if map.blocked_at(nc, nr) {
            return None;
        }
        let cost = if dc != 0 && dr != 0 {
            if map.blocked_at(col + dc, row) || map.blocked_at(col, row + dr) {
                return None;
            }
            OctileCost::DIAGONAL
        } else {
            OctileCost::STRAIGHT
        };
        Some((Cell::new(nc as usize, nr as usize), cost))
    })
}

#[derive(PartialEq, Eq)]
struct Open {
    f: OctileCost,
    h: OctileCost,
    cell: Cell,
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then h, then cell for determinism.
        other
            .f
            .cmp(&self.f)
            .then_with(|| other.h.cmp(&self.h))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* from the cell of `from` to the cell of `to`.
///
/// An occupied goal is snapped to the nearest free cell.
pub fn plan<S: Scalar>(map: &WorldMap<S>, from: Vec2<S>, to: Vec2<S>) -> Result<GridPath<S>> {
    let start = map.cell_of(from).filter(|c| !map.is_occupied_cell(*c)).ok_or(Error::OriginOccupied)?;
    let goal = map.nearest_free_cell(to).ok_or(Error::UnreachableGoal)?;
    plan_cells(map, start, goal)
}

pub fn plan_cells<S: Scalar>(map: &WorldMap<S>, start: Cell, goal: Cell) -> Result<GridPath<S>> {
    let idx = |c: Cell| c.row * map.cols + c.col;
    let mut g: Vec<Option<OctileCost>> = vec![None; map.cols * map.rows];
    let mut parent: Vec<Option<Cell>> = vec![None; map.cols * map.rows];
    let mut closed = vec![false; map.cols * map.rows];
    let mut open = BinaryHeap::new();

    g[idx(start)] = Some(OctileCost::ZERO);
    let h0 = OctileCost::between(start, goal);
    open.push(Open { f: h0, h: h0, cell: start });

    while let Some(Open { cell, .. }) = open.pop() {
        if closed[idx(cell)] {
            continue;
        }
        closed[idx(cell)] = true;
        if cell == goal {
            break;
        }
        let gc = g[idx(cell)].expect("opened cells have a cost");
        for (next, step) in neighbors(map, cell) {
            if closed[idx(next)] {
                continue;
            }
            let cand = gc + step;
            if g[idx(next)].is_none_or(|old| cand < old) {
                g[idx(next)] = Some(cand);
                parent[idx(next)] = Some(cell);
                let h = OctileCost::between(next, goal);
                open.push(Open { f: cand + h, h, cell: next });
            }
        }
    }

    let cost = g[idx(goal)].filter(|_| closed[idx(goal)]).ok_or(Error::UnreachableGoal)?;
    let mut cells = vec![goal];
    let mut cur = goal;
    while let Some(p) = parent[idx(cur)] {
        cells.push(p);
        cur = p;
    }
    cells.reverse();
    debug_assert_eq!(cells[0], start);
    let points = cells.iter().map(|&c| map.cell_center(c)).collect();
    Ok(GridPath { cells, points, cost, total_cost: cost.meters(map.cell_size) })
}

/// Next position recommendation while following `path`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint<S> {
    pub point: Vec2<S>,
    /// Path index now reached, when the step lands on a path point.
    pub reached: Option<usize>,
}

/// String-pulled step along `path` from `pos`.
///
/// Looks at path points from `progress` onward, takes the farthest one whose
/// straight segment from `pos` is clear, and caps the step at `v_max`.
pub fn next_waypoint<S: Scalar>(
    map: &WorldMap<S>,
    path: &GridPath<S>,
    pos: Vec2<S>,
    progress: usize,
    v_max: S,
) -> Waypoint<S> {
    let last = path.points.len() - 1;
    let from = progress.min(last);
    let upto = (from + LOOKAHEAD).min(last);
    let aim = (from..=upto)
        .rev()
        .find(|&j| map.segment_clear(pos, path.points[j]))
        .unwrap_or(from);
    let target = path.points[aim];
    let dist = pos.distance(target);
    if dist <= v_max {
        return Waypoint { point: target, reached: Some(aim) };
    }
    let point = pos + (target - pos) * (v_max / dist);
    // Snap onto an intermediate path point when the capped step lands on it.
    let snap = map.cell_size * S::lit(1e-6);
    let reached = (from..aim).rev().find(|&j| path.points[j].distance(point) <= snap);
    match reached {
        Some(j) => Waypoint { point: path.points[j], reached: Some(j) },
        None => Waypoint { point, reached: None },
    }
}
