//! Intrinsic and topological windings of polygonal paths whose segments point
//! in multiples of π/4.

use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::error::{Error, Result};

/// Polygonal path in the universal cover given by its corner points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    pub points: Vec<Vec2>,
    /// Closed paths also turn from the last segment back into the first.
    pub closed: bool,
}

impl LatticePath {
    pub fn open(points: Vec<Vec2>) -> Self {
        Self { points, closed: false }
    }

    pub fn closed(points: Vec<Vec2>) -> Self {
        Self { points, closed: true }
    }

    fn segments(&self) -> Vec<(Vec2, Vec2)> {
        let mut segs: Vec<(Vec2, Vec2)> = self.points.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed {
            if let (Some(&a), Some(&b)) = (self.points.last(), self.points.first()) {
                if a != b {
                    segs.push((a, b));
                }
            }
        }
        segs
    }

    fn directions(&self) -> Result<Vec<i32>> {
        self.segments()
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let d = b - a;
                if d.is_zero() {
                    return Err(Error::ZeroLengthSegment(i));
                }
                d.octant().ok_or(Error::OffLatticeSegment(i))
            })
            .collect()
    }
}

/// Turning from direction `d1` to `d2` (octants) in `(-4, 4]`, units of π/4.
pub fn turn_units(d1: i32, d2: i32) -> i32 {
    let t = (d2 - d1).rem_euclid(8);
    if t > 4 {
        t - 8
    } else {
        t
    }
}

/// Total turning of the path in units of π/4.
pub fn intrinsic_winding(path: &LatticePath) -> Result<i64> {
    let dirs = path.directions()?;
    if dirs.is_empty() {
        return Err(Error::InvalidPath("path needs at least one segment".into()));
    }
    let mut total: i64 = dirs.windows(2).map(|w| turn_units(w[0], w[1]) as i64).sum();
    if path.closed && dirs.len() > 1 {
        total += turn_units(dirs[dirs.len() - 1], dirs[0]) as i64;
    }
    Ok(total)
}

/// Continuous increment of the argument of `path(t) - p`, in radians.
///
/// `p` may coincide with the start or end point of an open path, in which case
/// the argument is taken as the limit along the path.
pub fn topological_winding(path: &LatticePath, p: Vec2) -> Result<f64> {
    path.directions()?;
    let segs = path.segments();
    let n = segs.len();
    let mut total = 0.0;
    for (i, &(a, b)) in segs.iter().enumerate() {
        let (ra, rb) = (a - p, b - p);
        let at_start = ra.is_zero() && i == 0 && !path.closed;
        let at_end = rb.is_zero() && i + 1 == n && !path.closed;
        if at_start || at_end {
            // The argument is constant along a segment that starts or ends at p.
            continue;
        }
        if on_segment(a, b, p) {
            return Err(Error::PointOnPath);
        }
        total += (ra.cross(rb) as f64).atan2(ra.dot(rb) as f64);
    }
    Ok(total)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    let (ab, ap) = (b - a, p - a);
    ab.cross(ap) == 0 && ap.dot(ab) >= 0 && ap.dot(ab) <= ab.dot(ab)
}
