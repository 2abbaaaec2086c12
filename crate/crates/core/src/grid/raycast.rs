//! Exact grid traversal of a segment (incremental line-voxel walking).

use super::{CellIndex, GridSpec};
use crate::geometry::WorldPoint;

/// Walks the cells crossed by the segment `from -> to`, calling `visit` for
/// every cell in traversal order, starting with the origin cell and stopping
/// before the destination cell. Both endpoints must lie inside the grid.
///
/// When the segment passes exactly through a cell corner the x-step is taken
/// first. `visit` returns `false` to stop early.
pub(crate) fn walk<F>(spec: &GridSpec, from: WorldPoint, to: WorldPoint, mut visit: F)
where
    F: FnMut(CellIndex) -> bool,
{
    let fx = (from.x - spec.origin.x) / spec.resolution;
    let fy = (from.y - spec.origin.y) / spec.resolution;
    let tx = (to.x - spec.origin.x) / spec.resolution;
    let ty = (to.y - spec.origin.y) / spec.resolution;

    let mut ix = fx.floor() as i64;
    let mut iy = fy.floor() as i64;
    let dest_x = tx.floor() as i64;
    let dest_y = ty.floor() as i64;

    let dx = tx - fx;
    let dy = ty - fy;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };

    let mut t_max_x = if dx > 0.0 {
        (ix as f64 + 1.0 - fx) / dx
    } else if dx < 0.0 {
        (fx - ix as f64) / -dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (iy as f64 + 1.0 - fy) / dy
    } else if dy < 0.0 {
        (fy - iy as f64) / -dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };

    // The walk takes exactly one axis step per cell, so the remaining step
    // counts per axis bound the loop even under rounding.
    let mut left_x = (dest_x - ix).abs();
    let mut left_y = (dest_y - iy).abs();
    while left_x > 0 || left_y > 0 {
        if !visit(CellIndex::new(ix as usize, iy as usize)) {
            return;
        }
        let take_x = if left_x == 0 {
            false
        } else if left_y == 0 {
            true
        } else {
            t_max_x <= t_max_y
        };
        if take_x {
            ix += step_x;
            t_max_x += t_delta_x;
            left_x -= 1;
        } else {
            iy += step_y;
            t_max_y += t_delta_y;
            left_y -= 1;
        }
    }
}

/// Clips the segment `from -> to` against the grid rectangle, shrunk by a
/// tiny margin so that the clipped endpoints map to in-bounds cells.
/// Returns `None` when the segment misses the grid entirely.
pub(crate) fn clip_to_grid(
    spec: &GridSpec,
    from: WorldPoint,
    to: WorldPoint,
) -> Option<(WorldPoint, WorldPoint, bool)> {
    let eps = spec.resolution * 1e-9;
    let xmin = spec.origin.x + eps;
    let ymin = spec.origin.y + eps;
    let xmax = spec.origin.x + spec.width as f64 * spec.resolution - eps;
    let ymax = spec.origin.y + spec.height as f64 * spec.resolution - eps;
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (p, q) in [
        (-dx, from.x - xmin),
        (dx, xmax - from.x),
        (-dy, from.y - ymin),
        (dy, ymax - from.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
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
    if t0 > t1 {
        return None;
    }
    let a = WorldPoint::new(from.x + t0 * dx, from.y + t0 * dy);
    let b = WorldPoint::new(from.x + t1 * dx, from.y + t1 * dy);
    Some((a, b, t1 < 1.0))
}
