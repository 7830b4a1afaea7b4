use crate::geometry::Vec2;
use crate::scalar::Scalar;

/// Visits every grid cell touched by segment `a → b` (supercover traversal).
///
/// When the segment passes exactly through a cell corner both side cells are
/// visited. Endpoints are put in a canonical order first so that the visited
/// set does not depend on direction. `visit` returns `false` to stop early.
pub fn supercover<S, F>(a: Vec2<S>, b: Vec2<S>, cell: S, mut visit: F)
where
    S: Scalar,
    F: FnMut(i64, i64) -> bool,
{
    let (a, b) = if (b.x, b.y) < (a.x, a.y) { (b, a) } else { (a, b) };
    let (x0, y0) = (a.x / cell, a.y / cell);
    let (x1, y1) = (b.x / cell, b.y / cell);
    let to_i = |v: S| v.floor().to_i64().expect("finite coordinate");
    let (mut cx, mut cy) = (to_i(x0), to_i(y0));
    let (ex, ey) = (to_i(x1), to_i(y1));

    if !visit(cx, cy) {
        return;
    }

    let dx = x1 - x0;
    let dy = y1 - y0;
    let inf = S::infinity();
    // dx >= 0 after canonical ordering.
    let step_x: i64 = if dx > S::zero() { 1 } else { 0 };
    let step_y: i64 = if dy > S::zero() {
        1
    } else if dy < S::zero() {
        -1
    } else {
        0
    };
    let delta_x = if step_x != 0 { S::one() / dx } else { inf };
    let delta_y = if step_y != 0 { S::one() / dy.abs() } else { inf };
    let mut t_x = if step_x != 0 { (S::from_i64(cx + 1).unwrap() - x0) / dx } else { inf };
    let mut t_y = match step_y {
        1 => (S::from_i64(cy + 1).unwrap() - y0) / dy,
        -1 => (y0 - S::from_i64(cy).unwrap()) / -dy,
        _ => inf,
    };

    let corner_eps = S::epsilon().sqrt();
    let mut budget = (ex - cx).abs() + (ey - cy).abs();
    while (cx, cy) != (ex, ey) && budget > 0 {
        if step_x != 0 && step_y != 0 && (t_x - t_y).abs() <= corner_eps {
            if !visit(cx + step_x, cy) || !visit(cx, cy + step_y) {
                return;
            }
            cx += step_x;
            cy += step_y;
            t_x += delta_x;
            t_y += delta_y;
            budget -= 2;
        } else if t_x < t_y {
            cx += step_x;
            t_x += delta_x;
            budget -= 1;
        } else {
            cy += step_y;
            t_y += delta_y;
            budget -= 1;
        }
        if !visit(cx, cy) {
            return;
        }
    }
    if (cx, cy) != (ex, ey) {
        visit(ex, ey);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(a: (f64, f64), b: (f64, f64)) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        supercover(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1), 1.0, |c, r| {
            out.push((c, r));
            true
        });
        out
    }

    #[test]
    fn horizontal_run() {
        assert_eq!(cells((0.5, 0.5), (3.5, 0.5)), vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
    }

    #[test]
    fn exact_diagonal_includes_side_cells() {
        let got = cells((0.5, 0.5), (2.5, 2.5));
        for c in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2)] {
            assert!(got.contains(&c), "missing {c:?} in {got:?}");
        }
    }

    #[test]
    fn reversed_segment_visits_same_cells() {
        let mut f = cells((0.3, 2.7), (4.1, 0.2));
        let mut r = cells((4.1, 0.2), (0.3, 2.7));
        f.sort();
        r.sort();
        assert_eq!(f, r);
    }
}
