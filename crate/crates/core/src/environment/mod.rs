//! The static world: occupancy grid, target, base station and spawn region.

mod raster;
mod sensors;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Scalar;

pub use raster::supercover;
pub use sensors::{range_scan, sense_distance, RangeScan};

/// Default grid resolution in meters.
pub const DEFAULT_CELL_SIZE: f64 = 5.0;
/// Default map side length in meters.
pub const DEFAULT_MAP_SIDE: f64 = 600.0;

/// Axis-aligned rectangle `(x_min, y_min, x_max, y_max)` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[S; 4]", into = "[S; 4]", bound = "S: Scalar")]
pub struct Rect<S> {
    pub x_min: S,
    pub y_min: S,
    pub x_max: S,
    pub y_max: S,
}

impl<S: Scalar> From<[S; 4]> for Rect<S> {
    fn from([x_min, y_min, x_max, y_max]: [S; 4]) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }
}

impl<S: Scalar> From<Rect<S>> for [S; 4] {
    fn from(r: Rect<S>) -> Self {
        [r.x_min, r.y_min, r.x_max, r.y_max]
    }
}

impl<S: Scalar> Rect<S> {
    pub fn new(x_min: S, y_min: S, x_max: S, y_max: S) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2<S>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Obstacle geometry as a list of rectangles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent, bound = "S: Scalar")]
pub struct ObstacleSpec<S> {
    pub rects: Vec<Rect<S>>,
}

impl<S: Scalar> ObstacleSpec<S> {
    pub fn new(rects: Vec<Rect<S>>) -> Self {
        Self { rects }
    }

    pub fn contains(&self, p: Vec2<S>) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }
}

/// Everything needed to build a [`WorldMap`]; this is also the map file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
pub struct MapSpec<S> {
    #[serde(default)]
    pub name: String,
    pub width: S,
    pub height: S,
    pub cell_size: S,
    pub target: Vec2<S>,
    pub base_station: Vec2<S>,
    #[serde(default = "ObstacleSpec::default")]
    pub obstacles: ObstacleSpec<S>,
    /// Spawn rectangles; every free cell is a spawn cell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn: Option<Vec<Rect<S>>>,
}

impl<S: Scalar> MapSpec<S> {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::MapFile(e.to_string()))
    }

    /// The shipped plant layout.
    pub fn plant() -> Self {
        Self::from_toml(include_str!("../../maps/plant.toml")).expect("shipped map parses")
    }

    /// A square obstacle-free map with the plant's target and base station.
    pub fn empty() -> Self {
        let mut spec = Self::plant();
        spec.name = "empty".into();
        spec.obstacles = ObstacleSpec::default();
        spec.spawn = None;
        spec
    }

    pub fn build(&self) -> Result<WorldMap<S>> {
        WorldMap::build(self)
    }
}

/// Grid cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Static occupancy grid with the target and base station.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap<S> {
    pub name: String,
    pub width: S,
    pub height: S,
    pub cell_size: S,
    pub cols: usize,
    pub rows: usize,
    /// Row-major, `true` = obstacle.
    occupancy: Vec<bool>,
    pub target: Vec2<S>,
    pub base_station: Vec2<S>,
    spawn_cells: Vec<Cell>,
}

/// Builds a `600 × 600` map from obstacle rectangles.
pub fn build_map<S: Scalar>(
    spec: &ObstacleSpec<S>,
    target: Vec2<S>,
    base_station: Vec2<S>,
    cell_size: S,
) -> Result<WorldMap<S>> {
    MapSpec {
        name: String::new(),
        width: S::lit(DEFAULT_MAP_SIDE),
        height: S::lit(DEFAULT_MAP_SIDE),
        cell_size,
        target,
        base_station,
        obstacles: spec.clone(),
        spawn: None,
    }
    .build()
}

fn grid_extent<S: Scalar>(length: S, cell: S, what: &str) -> Result<usize> {
    let ratio = length / cell;
    let n = ratio.round();
    if n < S::one() || (ratio - n).abs() > S::lit(1e-6) {
        return Err(Error::InvalidMap(format!(
            "{what} {length} is not a positive multiple of cell_size {cell}"
        )));
    }
    Ok(n.to_usize().expect("finite grid extent"))
}

impl<S: Scalar> WorldMap<S> {
    pub fn build(spec: &MapSpec<S>) -> Result<Self> {
        if !(spec.cell_size > S::zero()) {
            return Err(Error::InvalidMap("cell_size must be positive".into()));
        }
        let cols = grid_extent(spec.width, spec.cell_size, "width")?;
        let rows = grid_extent(spec.height, spec.cell_size, "height")?;

        for (index, r) in spec.obstacles.rects.iter().enumerate() {
            if !(r.x_max > r.x_min && r.y_max > r.y_min) {
                return Err(Error::InvalidObstacle { index, reason: "non-positive area" });
            }
            if r.x_min < S::zero()
                || r.y_min < S::zero()
                || r.x_max > spec.width
                || r.y_max > spec.height
            {
                return Err(Error::InvalidObstacle { index, reason: "outside map bounds" });
            }
        }

        let mut map = WorldMap {
            name: spec.name.clone(),
            width: spec.width,
            height: spec.height,
            cell_size: spec.cell_size,
            cols,
            rows,
            occupancy: vec![false; cols * rows],
            target: spec.target,
            base_station: spec.base_station,
            spawn_cells: Vec::new(),
        };
        for row in 0..rows {
            for col in 0..cols {
                let c = map.cell_center(Cell::new(col, row));
                map.occupancy[row * cols + col] = spec.obstacles.contains(c);
            }
        }

        if map.cell_of(spec.target).is_none() {
            return Err(Error::OutOfBounds { what: "target" });
        }
        if map.cell_of(spec.base_station).is_none() {
            return Err(Error::OutOfBounds { what: "base station" });
        }
        if spec.obstacles.contains(spec.target) || !map.is_free(spec.target) {
            return Err(Error::TargetInsideObstacle);
        }
        if spec.obstacles.contains(spec.base_station) || !map.is_free(spec.base_station) {
            return Err(Error::BaseStationInsideObstacle);
        }

        map.spawn_cells = map
            .free_cells()
            .filter(|&cell| match &spec.spawn {
                None => true,
                Some(rects) => {
                    let c = map.cell_center(cell);
                    rects.iter().any(|r| r.contains(c))
                }
            })
            .collect();
        if map.spawn_cells.is_empty() {
            return Err(Error::InvalidMap("spawn region contains no free cell".into()));
        }

        let reachable = map.reachable_from(map.cell_of(map.target).expect("checked"));
        if let Some(bad) = map.spawn_cells.iter().find(|c| !reachable[map.index(**c)]) {
            return Err(Error::DisconnectedMap { col: bad.col, row: bad.row });
        }
        Ok(map)
    }

    #[inline]
    fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell_of(&self, p: Vec2<S>) -> Option<Cell> {
        if !(p.x >= S::zero() && p.y >= S::zero() && p.x < self.width && p.y < self.height) {
            return None;
        }
        let col = (p.x / self.cell_size).floor().to_usize()?;
        let row = (p.y / self.cell_size).floor().to_usize()?;
        (col < self.cols && row < self.rows).then_some(Cell::new(col, row))
    }

    pub fn cell_center(&self, cell: Cell) -> Vec2<S> {
        let half = S::lit(0.5);
        Vec2::new(
            (S::from_count(cell.col) + half) * self.cell_size,
            (S::from_count(cell.row) + half) * self.cell_size,
        )
    }

    pub fn is_occupied_cell(&self, cell: Cell) -> bool {
        self.occupancy[self.index(cell)]
    }

    /// Occupancy lookup with signed indices; outside the grid counts as blocked.
    pub fn blocked_at(&self, col: i64, row: i64) -> bool {
        if col < 0 || row < 0 || col as usize >= self.cols || row as usize >= self.rows {
            return true;
        }
        self.occupancy[row as usize * self.cols + col as usize]
    }

    /// False out of bounds, otherwise the negated occupancy of the containing cell.
    pub fn is_free(&self, p: Vec2<S>) -> bool {
        self.cell_of(p).is_some_and(|c| !self.is_occupied_cell(c))
    }

    /// True iff every cell touched by segment `a → b` is free.
    pub fn segment_clear(&self, a: Vec2<S>, b: Vec2<S>) -> bool {
        let mut clear = true;
        supercover(a, b, self.cell_size, |col, row| {
            if self.blocked_at(col, row) {
                clear = false;
            }
            clear
        });
        clear
    }

    /// Number of distinct obstacle runs crossed walking from `a` to `b`.
    pub fn obstacle_runs(&self, a: Vec2<S>, b: Vec2<S>) -> usize {
        let mut runs = 0;
        let mut inside = false;
        supercover(a, b, self.cell_size, |col, row| {
            let blocked = self.blocked_at(col, row);
            if blocked && !inside {
                runs += 1;
            }
            inside = blocked;
            true
        });
        runs
    }

    /// Clamps a point into the map, keeping it strictly inside the upper edges.
    pub fn clamp(&self, p: Vec2<S>) -> Vec2<S> {
        let inset = self.cell_size * S::lit(1e-6);
        Vec2::new(
            p.x.max(S::zero()).min(self.width - inset),
            p.y.max(S::zero()).min(self.height - inset),
        )
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows)
            .flat_map(move |row| (0..self.cols).map(move |col| Cell::new(col, row)))
            .filter(|c| !self.is_occupied_cell(*c))
    }

    pub fn spawn_cells(&self) -> &[Cell] {
        &self.spawn_cells
    }

    pub fn obstacle_cell_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Free cell whose center is nearest to `p`, preferring `p`'s own cell.
    pub fn nearest_free_cell(&self, p: Vec2<S>) -> Option<Cell> {
        if let Some(c) = self.cell_of(self.clamp(p)) {
            if !self.is_occupied_cell(c) {
                return Some(c);
            }
        }
        self.free_cells().min_by(|a, b| {
            let da = self.cell_center(*a).distance(p);
            let db = self.cell_center(*b).distance(p);
            da.partial_cmp(&db).expect("finite distances").then(a.cmp(b))
        })
    }

    /// 4-connected flood fill over free cells.
    fn reachable_from(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.cols * self.rows];
        let mut queue = VecDeque::from([start]);
        seen[self.index(start)] = true;
        while let Some(c) = queue.pop_front() {
            let (col, row) = (c.col as i64, c.row as i64);
            for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nc, nr) = (col + dc, row + dr);
                if self.blocked_at(nc, nr) {
                    continue;
                }
                let next = Cell::new(nc as usize, nr as usize);
                let i = self.index(next);
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}
