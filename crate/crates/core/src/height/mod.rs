//! Reference flow, dimer height one-form and height field, all in exact
//! integer units of 1/8.
//!
//! For an edge of `G` oriented from black `b` to white `w`, `f_l` and `f_r`
//! denote the faces on its left and right. The form takes the value
//! `omega(wb) = 8 * [wb is a dimer] - omega_ref(wb)` on the dual edge from
//! `f_r` to `f_l`, so that `h(f_l) - h(f_r) = omega(wb)`.

mod hodge;
mod winding_field;

pub use hodge::{harmonic_path_sum, hodge_decompose, HodgeOptions, HodgeParts};
pub use winding_field::{
    spine_increment_torus, spine_increment_torus_with, spine_terms, winding_increment_adjacent, winding_increment_path,
    SeparatingSpine, SpineOptions, SpineTerms,
};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{turn_units, LiftedFace, SuperpositionGraph, Vec2};
use crate::temperley::DimerConfig;

/// Reference flow from white to black along each edge of `G`, in units of 1/8.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceFlow {
    pub values: Vec<i64>,
}

/// Diagonal midpoint of the face on side `side` of the segment from `bp`
/// along `step`; a missing face is replaced by a point straight out to the side.
fn side_point(bp: Vec2, step: Vec2, side: Vec2, present: bool) -> Vec2 {
    if present {
        bp + step + side
    } else {
        bp + side
    }
}

/// Builds the reference flow from the turning of the path
/// `m(f_r) -> b -> m(f_l)` and checks that every white vertex sends, and
/// every black vertex receives, exactly 8 units.
pub fn reference_flow(s: &SuperpositionGraph) -> Result<ReferenceFlow> {
    let mut values = Vec::with_capacity(s.edges.len());
    for e in &s.edges {
        let bp = s.positions[e.black];
        let l = e.step.rot90();
        let ml = side_point(bp, e.step, l, e.left.is_some());
        let mr = side_point(bp, e.step, -l, e.right.is_some());
        let d_in = (bp - mr).octant().expect("lattice direction");
        let d_out = (ml - bp).octant().expect("lattice direction");
        values.push(turn_units(d_in, d_out) as i64 + 4);
    }
    let flow = ReferenceFlow { values };
    for v in 0..s.n_vertices() {
        let total: i64 = s.vertex_edges(v).iter().map(|&e| flow.values[e]).sum();
        if total != 8 {
            return Err(Error::Inconsistent(format!("reference flow has divergence {total}/8 at vertex {v} of G")));
        }
    }
    Ok(flow)
}

impl ReferenceFlow {
    /// Sum of the reference flow out of vertex `v` of `G`, units of 1/8.
    pub fn divergence(&self, s: &SuperpositionGraph, v: usize) -> i64 {
        s.vertex_edges(v).iter().map(|&e| self.values[e]).sum()
    }

    /// Sums of `-omega_ref` along the straight loops from `base_face` used for
    /// the instanton, so that `a = 8 * (signed dimers crossed) + sums[0]`.
    /// The second entry is 0 on the annulus.
    pub fn loop_sums(&self, s: &SuperpositionGraph, base_face: usize) -> Result<[i64; 2]> {
        let empty = HeightOneForm { values: self.values.iter().map(|v| -v).collect() };
        let base = LiftedFace::new(base_face, [0, 0]);
        let mut out = [0; 2];
        for (axis, slot) in out.iter_mut().enumerate() {
            if s.topology.periods()[axis].is_some() {
                *slot = empty.path_sum(s, &straight_loop(s, base, axis)?)?;
            }
        }
        Ok(out)
    }
}

/// Exact height one-form; `values[e]` is `h(f_l) - h(f_r)` across `G` edge `e`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightOneForm {
    pub values: Vec<i64>,
}

pub fn height_one_form(s: &SuperpositionGraph, dimer: &DimerConfig, reference: &ReferenceFlow) -> Result<HeightOneForm> {
    dimer.validate(s)?;
    let values = (0..s.edges.len())
        .map(|e| 8 * dimer.contains(s, e) as i64 - reference.values[e])
        .collect();
    let form = HeightOneForm { values };
    form.check_closed(s)?;
    Ok(form)
}

impl HeightOneForm {
    /// Sum of the form around the dual face of every vertex of `G`.
    pub fn check_closed(&self, s: &SuperpositionGraph) -> Result<()> {
        for v in 0..s.n_vertices() {
            let total: i64 = s.vertex_edges(v).iter().map(|&e| self.values[e]).sum();
            if total != 0 {
                return Err(Error::NotClosed(format!("sum {total} around the dual face of vertex {v}")));
            }
        }
        Ok(())
    }

    /// `h(to) - h(from)` for adjacent lifted faces.
    pub fn increment(&self, s: &SuperpositionGraph, from: LiftedFace, to: LiftedFace) -> Result<i64> {
        let st = s.step_between(from, to).ok_or(Error::NotAdjacent(from.face, to.face))?;
        let w = self.values[st.edge];
        Ok(if st.from_left { -w } else { w })
    }

    /// `h(last) - h(first)` along a path of adjacent lifted faces.
    pub fn path_sum(&self, s: &SuperpositionGraph, path: &[LiftedFace]) -> Result<i64> {
        path.windows(2).map(|w| self.increment(s, w[0], w[1])).sum()
    }

    pub fn negated(&self) -> HeightOneForm {
        HeightOneForm { values: self.values.iter().map(|v| -v).collect() }
    }
}

/// Face path from `start` stepping by `delta` (quarter units, ±2 along one
/// axis) until the translate of `start` by one period is reached.
pub fn straight_loop(s: &SuperpositionGraph, start: LiftedFace, axis: usize) -> Result<Vec<LiftedFace>> {
    let periods = s.topology.periods();
    let period = periods[axis].ok_or_else(|| Error::InvalidPath("axis is not periodic".into()))?;
    let delta = if axis == 0 { Vec2::new(2, 0) } else { Vec2::new(0, 2) };
    let mut path = vec![start];
    let m = s.face_mid(start);
    for k in 1..=period / 2 {
        let f = s
            .locate_face(m + delta.scale(k))
            .ok_or_else(|| Error::InvalidPath("straight loop leaves the faces of G".into()))?;
        path.push(f);
    }
    Ok(path)
}

/// Heights on the canonical copy of every face, with the instanton: `a`
/// (and `b` on the torus) is the height gained along one period in x (y).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightField {
    pub heights: Vec<i64>,
    pub base_face: usize,
    pub a: i64,
    pub b: i64,
}

impl HeightField {
    /// Height of a lifted face.
    pub fn at(&self, f: LiftedFace) -> i64 {
        self.heights[f.face] + f.shift[0] * self.a + f.shift[1] * self.b
    }

    /// Heights of all faces with shifts in `window` (inclusive ranges per axis).
    pub fn window(&self, window: [std::ops::RangeInclusive<i64>; 2]) -> Vec<(LiftedFace, i64)> {
        let mut out = Vec::new();
        for sy in window[1].clone() {
            for sx in window[0].clone() {
                for f in 0..self.heights.len() {
                    let lf = LiftedFace::new(f, [sx, sy]);
                    out.push((lf, self.at(lf)));
                }
            }
        }
        out
    }
}

impl HeightField {
    /// TSV with one row per canonical face: midpoint in quarter units and
    /// height in units of 1/8; the instanton is recorded in header comments.
    pub fn to_tsv(&self, s: &SuperpositionGraph) -> String {
        let mut out = format!("# a\t{}\n# b\t{}\n# base_face\t{}\nface_x\tface_y\theight_units\n", self.a, self.b, self.base_face);
        for (f, h) in self.heights.iter().enumerate() {
            let m = s.face_mid(LiftedFace::new(f, [0, 0]));
            out.push_str(&format!("{}\t{}\t{}\n", m.x, m.y, h));
        }
        out
    }
}

/// Integrates the form from `base_face` (height 0) over the lifted dual graph
/// and reads off the instanton from straight loops; every dual edge is checked
/// against the result, so any path dependence is reported.
pub fn height_field(s: &SuperpositionGraph, form: &HeightOneForm, base_face: usize) -> Result<HeightField> {
    let nf = s.faces.len();
    if base_face >= nf {
        return Err(Error::InvalidPath(format!("no face {base_face}")));
    }
    let base = LiftedFace::new(base_face, [0, 0]);
    let a = form.path_sum(s, &straight_loop(s, base, 0)?)?;
    let b = if s.topology.is_torus() { form.path_sum(s, &straight_loop(s, base, 1)?)? } else { 0 };
    const UNSET: i64 = i64::MIN;
    let mut heights = vec![UNSET; nf];
    heights[base_face] = 0;
    let mut queue = VecDeque::from([base_face]);
    while let Some(f) = queue.pop_front() {
        for st in s.face_steps(f) {
            let w = form.values[st.edge];
            let inc = if st.from_left { -w } else { w };
            let target = heights[f] + inc - st.to.shift[0] * a - st.to.shift[1] * b;
            let g = st.to.face;
            if heights[g] == UNSET {
                heights[g] = target;
                queue.push_back(g);
            } else if heights[g] != target {
                return Err(Error::NotClosed(format!(
                    "integration from face {f} to face {g} gives {target}, expected {}",
                    heights[g]
                )));
            }
        }
    }
    if heights.contains(&UNSET) {
        return Err(Error::Inconsistent("dual graph of G is disconnected".into()));
    }
    Ok(HeightField { heights, base_face, a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_annulus, build_torus, Weights};
    use crate::temperley::{dual_forest, orient_dual_random, temperley_map};
    use crate::wilson::{sample_crsf, sample_rng};

    #[test]
    fn symmetric_reference_flow_is_quarter() {
        let g = build_torus(4, 4, &Weights::Uniform).unwrap();
        let s = g.superpose().unwrap();
        let r = reference_flow(&s).unwrap();
        assert!(r.values.iter().all(|&v| v == 2));
    }

    #[test]
    fn annulus_reference_flow_is_valid() {
        for (n, m) in [(4, 2), (4, 3), (7, 5)] {
            let g = build_annulus(n, m, &Weights::Uniform).unwrap();
            let s = g.superpose().unwrap();
            let r = reference_flow(&s).unwrap();
            for v in 0..s.n_vertices() {
                assert_eq!(r.divergence(&s, v), 8);
            }
        }
    }

    #[test]
    fn increments_are_quarters() {
        let g = build_torus(5, 4, &Weights::Uniform).unwrap();
        let s = g.superpose().unwrap();
        let r = reference_flow(&s).unwrap();
        let mut rng = sample_rng(2, 0);
        let t = sample_crsf(&g, &mut rng, None).unwrap();
        let d = orient_dual_random(&g, &dual_forest(&g, &t).unwrap(), &mut rng).unwrap();
        let m = temperley_map(&g, &s, &t, &d).unwrap();
        let form = height_one_form(&s, &m, &r).unwrap();
        assert!(form.values.iter().all(|v| [-2, 6].contains(v)));
        let hf = height_field(&s, &form, 0).unwrap();
        let hf2 = height_field(&s, &form, 7).unwrap();
        let c = hf.heights[0] - hf2.heights[0];
        assert!(hf.heights.iter().zip(&hf2.heights).all(|(x, y)| x - y == c));
        assert_eq!((hf.a, hf.b), (hf2.a, hf2.b));
    }
}
