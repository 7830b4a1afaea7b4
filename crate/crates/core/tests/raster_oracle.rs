use std::collections::BTreeSet;

use proptest::prelude::*;
use twinswarm::environment::{range_scan, supercover, MapSpec, ObstacleSpec, Rect};
use twinswarm::geometry::Vec2;

fn visited(a: (f64, f64), b: (f64, f64), cell: f64) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    supercover(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1), cell, |c, r| {
        out.insert((c, r));
        true
    });
    out
}

/// Liang–Barsky clip of segment `a → b` against the box `[lo, hi]²`.
fn clips(a: (f64, f64), b: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (p, q) in [(-dx, a.0 - lo.0), (dx, hi.0 - a.0), (-dy, a.1 - lo.1), (dy, hi.1 - a.1)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1
}

fn coord() -> impl Strategy<Value = f64> {
    0.0..40.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn supercover_is_direction_independent(ax in coord(), ay in coord(), bx in coord(), by in coord()) {
        prop_assert_eq!(visited((ax, ay), (bx, by), 5.0), visited((bx, by), (ax, ay), 5.0));
    }

    #[test]
    fn supercover_matches_clipping_oracle(ax in coord(), ay in coord(), bx in coord(), by in coord()) {
        let cell = 5.0;
        let got = visited((ax, ay), (bx, by), cell);
        let eps = 1e-7;
        for col in -1..10i64 {
            for row in -1..10i64 {
                let lo = (col as f64 * cell, row as f64 * cell);
                let hi = (lo.0 + cell, lo.1 + cell);
                let inner = clips((ax, ay), (bx, by), (lo.0 + eps, lo.1 + eps), (hi.0 - eps, hi.1 - eps));
                let outer = clips((ax, ay), (bx, by), (lo.0 - eps, lo.1 - eps), (hi.0 + eps, hi.1 + eps));
                if inner {
                    prop_assert!(got.contains(&(col, row)), "missed cell ({col},{row})");
                }
                if !outer {
                    prop_assert!(!got.contains(&(col, row)), "spurious cell ({col},{row})");
                }
            }
        }
    }

    #[test]
    fn supercover_is_a_connected_walk(ax in coord(), ay in coord(), bx in coord(), by in coord()) {
        let mut seq = Vec::new();
        supercover(Vec2::new(ax, ay), Vec2::new(bx, by), 5.0, |c, r| {
            seq.push((c, r));
            true
        });
        for w in seq.windows(2) {
            let (d0, d1) = ((w[1].0 - w[0].0).abs(), (w[1].1 - w[0].1).abs());
            prop_assert!(d0 <= 1 && d1 <= 1, "jump {:?} -> {:?}", w[0], w[1]);
        }
    }
}

fn block_map(blocks: &[(f64, f64, f64, f64)]) -> twinswarm::Result<twinswarm::Map> {
    let mut spec = MapSpec::<f64>::empty();
    spec.obstacles = ObstacleSpec::new(blocks.iter().map(|&(x0, y0, x1, y1)| Rect::new(x0, y0, x1, y1)).collect());
    spec.build()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn range_scan_agrees_with_segment_clear(
        x in 120.0..480.0f64,
        y in 120.0..480.0f64,
        blocks in prop::collection::vec((100.0..460.0f64, 100.0..460.0f64, 5.0..40.0f64, 5.0..40.0f64), 1..8),
    ) {
        let rects: Vec<_> = blocks.iter().map(|&(x0, y0, w, h)| (x0, y0, x0 + w, y0 + h)).collect();
        // Layouts covering the target or base station, or cutting the map apart, are rejected.
        let Ok(map) = block_map(&rects) else { return Ok(()) };
        let origin = Vec2::new(x, y);
        prop_assume!(map.is_free(origin));
        let scan = range_scan(&map, origin, 72, 30.0).unwrap();
        for (k, &d) in scan.distances.iter().enumerate() {
            prop_assert!(d > 0.0 && d <= 30.0);
            let dir = Vec2::from_heading(scan.heading(k));
            if map.segment_clear(origin, origin + dir * 30.0) {
                prop_assert_eq!(d, 30.0, "ray {} hit on a clear segment", k);
            }
            if d < 30.0 {
                prop_assert!(!map.is_free(origin + dir * d));
                prop_assert!(!map.segment_clear(origin, origin + dir * d));
            }
        }
    }
}

#[test]
fn scan_rays_are_uniform_over_the_circle() {
    let map = block_map(&[]).unwrap();
    let scan = range_scan(&map, Vec2::new(300.0, 300.0), 8, 30.0).unwrap();
    for k in 0..8 {
        let want = k as f64 * std::f64::consts::FRAC_PI_4;
        assert!((scan.heading(k) - want).abs() < 1e-12);
    }
    assert!(scan.distances.iter().all(|&d| d == 30.0));
}
