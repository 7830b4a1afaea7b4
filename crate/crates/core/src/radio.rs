//! Packet error rate field around a single base station.
//!
//! Path loss is log-distance with a fixed penalty per wall crossed on the
//! straight line to the base station; a logistic curve maps loss to PER.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Cell, WorldMap};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct RadioParams<S> {
    /// Loss at 1 m, dB.
    pub ref_loss_db: S,
    pub path_loss_exponent: S,
    /// Added once per distinct obstacle run on the line to the base station.
    pub wall_penetration_db: S,
    /// Loss at which PER = 0.5.
    pub per_midpoint_db: S,
    /// Logistic scale, dB.
    pub per_slope_db: S,
}

impl<S: Scalar> Default for RadioParams<S> {
    fn default() -> Self {
        Self {
            ref_loss_db: S::lit(40.0),
            path_loss_exponent: S::lit(3.0),
            wall_penetration_db: S::lit(8.0),
            per_midpoint_db: S::lit(118.0),
            per_slope_db: S::lit(4.0),
        }
    }
}

impl<S: Scalar> RadioParams<S> {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.ref_loss_db,
            self.path_loss_exponent,
            self.wall_penetration_db,
            self.per_midpoint_db,
            self.per_slope_db,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidConfig("radio parameters must be finite".into()));
        }
        if self.path_loss_exponent < S::lit(2.0) {
            return Err(Error::InvalidConfig("radio.path_loss_exponent >= 2".into()));
        }
        if self.wall_penetration_db < S::zero() {
            return Err(Error::InvalidConfig("radio.wall_penetration_db >= 0".into()));
        }
        if self.per_slope_db <= S::zero() {
            return Err(Error::InvalidConfig("radio.per_slope_db > 0".into()));
        }
        Ok(())
    }

    /// Loss → PER logistic.
    pub fn per_from_loss(&self, loss_db: S) -> S {
        let z = (loss_db - self.per_midpoint_db) / self.per_slope_db;
        S::one() / (S::one() + (-z).exp())
    }
}

/// Distance term and wall count of the path loss at `p`.
pub fn path_loss_terms<S: Scalar>(map: &WorldMap<S>, params: &RadioParams<S>, p: Vec2<S>) -> (S, usize) {
    let d = p.distance(map.base_station).max(S::one());
    let distance_db = params.ref_loss_db + S::lit(10.0) * params.path_loss_exponent * d.log10();
    (distance_db, map.obstacle_runs(map.base_station, p))
}

/// Path loss in dB from the base station to `p`.
pub fn path_loss<S: Scalar>(map: &WorldMap<S>, params: &RadioParams<S>, p: Vec2<S>) -> S {
    let (distance_db, walls) = path_loss_terms(map, params, p);
    distance_db + params.wall_penetration_db * S::from_count(walls)
}

/// Per-cell packet error rate, same shape as the occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioField<S> {
    cols: usize,
    rows: usize,
    cell_size: S,
    per: Vec<S>,
}

/// Evaluates the PER at every cell center.
pub fn compute_field<S: Scalar>(map: &WorldMap<S>, params: &RadioParams<S>) -> RadioField<S> {
    RadioField::from_fn(map, |center| params.per_from_loss(path_loss(map, params, center)))
}

impl<S: Scalar> RadioField<S> {
    pub fn from_fn(map: &WorldMap<S>, mut per_at: impl FnMut(Vec2<S>) -> S) -> Self {
        let mut per = Vec::with_capacity(map.cols * map.rows);
        for row in 0..map.rows {
            for col in 0..map.cols {
                let v = per_at(map.cell_center(Cell::new(col, row)));
                per.push(v.max(S::zero()).min(S::one()));
            }
        }
        Self { cols: map.cols, rows: map.rows, cell_size: map.cell_size, per }
    }

    /// The same PER everywhere; `0` is a perfect channel.
    pub fn uniform(map: &WorldMap<S>, per: S) -> Self {
        Self::from_fn(map, |_| per)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn values(&self) -> &[S] {
        &self.per
    }

    pub fn at_cell(&self, cell: Cell) -> S {
        self.per[cell.row * self.cols + cell.col]
    }

    pub fn set_cell(&mut self, cell: Cell, per: S) {
        self.per[cell.row * self.cols + cell.col] = per.max(S::zero()).min(S::one());
    }

    /// PER of the cell containing `p`; out-of-bounds points are clamped.
    pub fn at(&self, p: Vec2<S>) -> S {
        let idx = |v: S, n: usize| {
            (v / self.cell_size).floor().to_i64().unwrap_or(0).clamp(0, n as i64 - 1) as usize
        };
        self.at_cell(Cell::new(idx(p.x, self.cols), idx(p.y, self.rows)))
    }

    pub fn min(&self) -> S {
        self.per.iter().copied().fold(S::one(), S::min)
    }

    pub fn max(&self) -> S {
        self.per.iter().copied().fold(S::zero(), S::max)
    }

    /// CSV grid: one line per row from `y = 0` upward, one value per column.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.per.len() * 9);
        for row in self.per.chunks(self.cols) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{:.6}", v.as_f64()).expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

/// One Bernoulli transmission attempt at `p`; succeeds with probability `1 − PER`.
///
/// Consumes exactly one uniform draw.
pub fn try_transmit<S: Scalar, R: Rng + ?Sized>(field: &RadioField<S>, p: Vec2<S>, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u >= field.at(p).as_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_map, ObstacleSpec, Rect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn empty() -> WorldMap<f64> {
        build_map(&ObstacleSpec::default(), p(320.0, 290.0), p(300.0, 300.0), 5.0).unwrap()
    }

    #[test]
    fn loss_at_base_station_is_reference_loss() {
        let map = empty();
        let params = RadioParams::default();
        assert_eq!(path_loss(&map, &params, map.base_station), 40.0);
    }

    #[test]
    fn loss_formula_at_100m() {
        let map = empty();
        let params = RadioParams::default();
        let loss = path_loss(&map, &params, p(400.0, 300.0));
        assert!((loss - 100.0).abs() < 1e-9, "{loss}");
    }

    #[test]
    fn one_wall_adds_exactly_its_penalty() {
        let spec = ObstacleSpec::new(vec![Rect::new(350.0, 250.0, 360.0, 350.0)]);
        let map = build_map(&spec, p(320.0, 290.0), p(300.0, 300.0), 5.0).unwrap();
        let params = RadioParams::default();
        let behind = p(402.5, 302.5);
        let mirrored = p(197.5, 302.5);
        let (db_behind, walls_behind) = path_loss_terms(&map, &params, behind);
        let (db_mirror, walls_mirror) = path_loss_terms(&map, &params, mirrored);
        assert_eq!(db_behind, db_mirror);
        assert_eq!((walls_behind, walls_mirror), (1, 0));
        let diff = path_loss(&map, &params, behind) - path_loss(&map, &params, mirrored);
        assert!((diff - params.wall_penetration_db).abs() < 1e-12);
    }

    #[test]
    fn logistic_midpoint_is_half() {
        let params = RadioParams::<f64>::default();
        assert_eq!(params.per_from_loss(params.per_midpoint_db), 0.5);
    }

    #[test]
    fn empty_map_field_is_radially_non_decreasing() {
        let map = empty();
        let field = compute_field(&map, &RadioParams::default());
        let bs = map.cell_of(map.base_station).unwrap();
        // Walk outward along both axes from the base-station cell.
        for (dc, dr) in [(1_i64, 0_i64), (-1, 0), (0, 1), (0, -1)] {
            let mut prev = field.at_cell(bs);
            let (mut c, mut r) = (bs.col as i64 + dc, bs.row as i64 + dr);
            while c >= 0 && r >= 0 && (c as usize) < map.cols && (r as usize) < map.rows {
                let v = field.at_cell(Cell::new(c as usize, r as usize));
                assert!(v >= prev, "PER decreased moving outward at ({c}, {r})");
                prev = v;
                c += dc;
                r += dr;
            }
        }
        assert_eq!(field.min(), field.at_cell(bs));
    }

    #[test]
    fn huge_slope_flattens_the_field() {
        let map = empty();
        let params = RadioParams { per_slope_db: 1e6, ..RadioParams::default() };
        let field = compute_field(&map, &params);
        assert!(field.max() - field.min() < 0.05);
    }

    #[test]
    fn transmit_extremes_and_rate() {
        let map = empty();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let perfect = RadioField::uniform(&map, 0.0);
        let dead = RadioField::uniform(&map, 1.0);
        assert!((0..1000).all(|_| try_transmit(&perfect, p(10.0, 10.0), &mut rng)));
        assert!((0..1000).all(|_| !try_transmit(&dead, p(10.0, 10.0), &mut rng)));
        let lossy = RadioField::uniform(&map, 0.3);
        let n = 100_000;
        let ok = (0..n).filter(|_| try_transmit(&lossy, p(10.0, 10.0), &mut rng)).count();
        let rate = ok as f64 / n as f64;
        assert!((rate - 0.7).abs() < 0.01, "{rate}");
    }

    #[test]
    fn field_is_deterministic_and_bounded() {
        let map = crate::environment::MapSpec::plant().build().unwrap();
        let a = compute_field(&map, &RadioParams::default());
        let b = compute_field(&map, &RadioParams::default());
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn csv_export_shape() {
        let map = empty();
        let csv = RadioField::uniform(&map, 0.25).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 120);
        assert_eq!(lines[0].split(',').count(), 120);
        assert!(lines[0].starts_with("0.250000,"));
    }
}
