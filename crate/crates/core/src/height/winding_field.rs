//! Height differences recovered from the geometry of the Temperleyan pair:
//! windings of forest branches plus sign terms counting on which side
//! branches merge and which spines separate them.
//!
//! The path and spine operations return `h(x) - h(y)` for their first face
//! `x` and last face `y`; the adjacent operation returns the height-form value
//! `h(f_r) - h(f_l)`. All are in units of 1/8 (one unit is a winding of π/4).

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{
    intrinsic_winding, topological_winding, turn_units, GKind, HalfEdge, Hom, LatticePath, LiftedFace,
    SuperpositionGraph, SurfaceGraph, Vec2,
};
use crate::temperley::TemperleyanPair;
use crate::wilson::CrsfCycle;

/// Direction (octant) of the out-edge of black vertex `b` of `G`.
fn out_octant(g: &SurfaceGraph, s: &SuperpositionGraph, pair: &TemperleyanPair, b: usize) -> Result<i32> {
    let d = match s.kinds[b] {
        GKind::Primal { vertex } => {
            let h = pair.crsf.out_edge[vertex].ok_or(Error::BoundaryVertex(vertex))?;
            g.primal.disp(h)
        }
        GKind::Dual { vertex } => g.dual.disp(pair.dual.out_edge[vertex]),
        GKind::White { .. } => return Err(Error::Inconsistent(format!("vertex {b} of G is white"))),
    };
    Ok(d.octant().expect("lattice edge"))
}

/// Merge sign at a vertex whose out-edge points along `out`, for branches
/// arriving from directions `rx` and `ry` (pointing away from the vertex):
/// `-1` iff the out-edge lies counterclockwise between `rx` and `ry`.
fn merge_sign(out: i32, rx: i32, ry: i32) -> i64 {
    if (ry - out).rem_euclid(8) > (rx - out).rem_euclid(8) {
        1
    } else {
        -1
    }
}

fn octant(v: Vec2) -> i32 {
    v.octant().expect("lattice direction")
}

/// `h(x) - h(y)` for two faces sharing the black corner at `b`.
fn local_increment(x: Vec2, y: Vec2, b: Vec2, out: i32) -> i64 {
    turn_units(octant(b - x), octant(y - b)) as i64 + 4 * merge_sign(out, octant(x - b), octant(y - b))
}

/// `h(f_r) - h(f_l)` for adjacent faces, from the turning of
/// `m(f_r) -> b -> m(f_l)` and the side on which the out-edge of `b` leaves.
pub fn winding_increment_adjacent(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    pair: &TemperleyanPair,
    f_l: LiftedFace,
    f_r: LiftedFace,
) -> Result<i64> {
    let st = s.step_between(f_r, f_l).ok_or(Error::NotAdjacent(f_r.face, f_l.face))?;
    let out = out_octant(g, s, pair, s.edges[st.edge].black)?;
    Ok(local_increment(s.face_mid(f_r), s.face_mid(f_l), st.black, out))
}

/// `h(first) - h(last)` along a path of adjacent lifted faces: the
/// intrinsic winding of the path through diagonal midpoints and black
/// corners, plus four units per merge sign.
pub fn winding_increment_path(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    pair: &TemperleyanPair,
    path: &[LiftedFace],
) -> Result<i64> {
    let Some(&first) = path.first() else { return Err(Error::InvalidPath("empty path".into())) };
    // Consecutive steps around one black corner are merged into a single
    // step, and steps that return to the previous face cancel, so the
    // reduced path runs straight through every intermediate midpoint.
    let mut faces = vec![first];
    let mut blacks: Vec<(Vec2, usize)> = Vec::new();
    for w in path.windows(2) {
        let st = s
            .step_between(w[0], w[1])
            .ok_or_else(|| Error::InvalidPath(format!("faces {} and {} are not adjacent", w[0].face, w[1].face)))?;
        if blacks.last().map(|b| b.0) == Some(st.black) {
            faces.pop();
            if faces.last() == Some(&w[1]) {
                blacks.pop();
            } else {
                faces.push(w[1]);
            }
        } else {
            blacks.push((st.black, s.edges[st.edge].black));
            faces.push(w[1]);
        }
    }
    if blacks.is_empty() {
        return Ok(0);
    }
    let mut points = Vec::with_capacity(2 * faces.len());
    let mut signs = 0;
    for (i, &(bp, b)) in blacks.iter().enumerate() {
        let (x, y) = (s.face_mid(faces[i]), s.face_mid(faces[i + 1]));
        points.push(x);
        points.push(bp);
        signs += merge_sign(out_octant(g, s, pair, b)?, octant(x - bp), octant(y - bp));
    }
    points.push(s.face_mid(*faces.last().expect("nonempty")));
    Ok(intrinsic_winding(&LatticePath::open(points))? + 4 * signs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpineOptions {
    /// Minimum number of spine periods followed before truncating a branch.
    pub depth: usize,
}

impl Default for SpineOptions {
    fn default() -> Self {
        Self { depth: 3 }
    }
}

/// Branch of the primal forest from the midpoint of a face to the point where
/// it joins its cycle.
struct Branch {
    /// `m(f)`, the primal corner, then forest vertices up to the join point.
    points: Vec<Vec2>,
    cycle: usize,
    /// Index of the join vertex within the cycle.
    join: usize,
}

/// Lifted cycle traversed forever in its own direction.
struct Spine<'a> {
    cycle: &'a CrsfCycle,
    /// Lifted position of `cycle.vertices[0]` on this spine, reduced modulo the period.
    anchor: Vec2,
}

struct Geometry<'a> {
    g: &'a SurfaceGraph,
    s: &'a SuperpositionGraph,
    pair: &'a TemperleyanPair,
    on_cycle: Vec<Option<(usize, usize)>>,
    /// Primitive class shared (up to sign) by all cycles, and its translation.
    c0: Hom,
    u0: Vec2,
}

fn cycle_disp(graph: &crate::surface::EmbeddedGraph, edges: &[HalfEdge]) -> Vec2 {
    graph.disp_sum(edges)
}

fn orientation(hom: Hom, c0: Hom) -> Result<i64> {
    if hom == c0 {
        Ok(1)
    } else if hom == [-c0[0], -c0[1]] {
        Ok(-1)
    } else {
        Err(Error::Inconsistent(format!("cycle class {hom:?} is not parallel to {c0:?}")))
    }
}

impl<'a> Geometry<'a> {
    fn new(g: &'a SurfaceGraph, s: &'a SuperpositionGraph, pair: &'a TemperleyanPair) -> Result<Self> {
        if !g.is_torus() {
            return Err(Error::RequiresTorus);
        }
        let first = pair.crsf.cycles.first().ok_or_else(|| Error::Inconsistent("torus forest without cycles".into()))?;
        let mut c0 = first.hom_class;
        if c0[0] < 0 || (c0[0] == 0 && c0[1] < 0) {
            c0 = [-c0[0], -c0[1]];
        }
        let mut on_cycle = vec![None; g.primal.n_vertices()];
        for (ci, c) in pair.crsf.cycles.iter().enumerate() {
            orientation(c.hom_class, c0)?;
            for (k, &v) in c.vertices.iter().enumerate() {
                on_cycle[v] = Some((ci, k));
            }
        }
        for c in &pair.dual.cycles {
            orientation(c.hom_class, c0)?;
        }
        let u0 = s.topology.shift_vector([c0[0] as i64, c0[1] as i64]);
        Ok(Self { g, s, pair, on_cycle, c0, u0 })
    }

    fn branch(&self, f: LiftedFace) -> Branch {
        let m = self.s.face_mid(f);
        let face = &self.s.faces[f.face];
        let mut pos = m + face.primal_offset;
        let GKind::Primal { vertex } = self.s.kinds[face.primal] else { unreachable!("primal corner") };
        let mut v = vertex;
        let mut points = vec![m, pos];
        loop {
            if let Some((cycle, join)) = self.on_cycle[v] {
                return Branch { points, cycle, join };
            }
            let h = self.pair.crsf.out_edge[v].expect("torus vertices have out-edges");
            pos = pos + self.g.primal.disp(h);
            v = self.g.primal.head(h);
            points.push(pos);
        }
    }

    /// Translation of one period of `c` in its direction of travel.
    fn period(&self, graph: &crate::surface::EmbeddedGraph, c: &CrsfCycle) -> Vec2 {
        cycle_disp(graph, &c.edges)
    }

    fn reduce(&self, p: Vec2) -> Vec2 {
        let k = p.dot(self.u0).div_euclid(self.u0.dot(self.u0));
        p - self.u0.scale(k)
    }

    /// Spine through the join point of a branch.
    fn spine_of(&self, b: &Branch) -> Spine<'a> {
        let c = &self.pair.crsf.cycles[b.cycle];
        let join_pos = *b.points.last().expect("branch has points");
        let back: Vec2 = self.g.primal.disp_sum(&c.edges[..b.join]);
        Spine { cycle: c, anchor: self.reduce(join_pos - back) }
    }

    /// Area functional: larger means further to the left of `u0`.
    fn area(&self, graph: &crate::surface::EmbeddedGraph, c: &CrsfCycle, anchor: Vec2, o: i64) -> i128 {
        let u = self.u0;
        let mut pts = Vec::with_capacity(c.edges.len() + 1);
        let mut z = anchor;
        pts.push(z);
        if o > 0 {
            for &h in &c.edges {
                z = z + graph.disp(h);
                pts.push(z);
            }
        } else {
            for &h in c.edges.iter().rev() {
                z = z - graph.disp(h);
                pts.push(z);
            }
        }
        pts.windows(2)
            .map(|w| (u.cross(w[0]) as i128 + u.cross(w[1]) as i128) * (w[1] - w[0]).dot(u) as i128)
            .sum()
    }

    /// Change of the area functional between neighbouring lifts of one cycle.
    fn lift_step(&self) -> i128 {
        let t = self.s.topology;
        let (nx, ny) = t.dims();
        2 * 16 * (nx as i128) * (ny as i128) * self.u0.dot(self.u0) as i128
    }

    /// Polyline of a branch continued along its spine far enough that the
    /// rest of the spine stays ahead of every point in `refs`.
    fn truncated(&self, b: &Branch, refs: &[Vec2], depth: usize) -> (Vec<Vec2>, Vec2) {
        let c = &self.pair.crsf.cycles[b.cycle];
        let u = self.period(&self.g.primal, c);
        let n = c.edges.len();
        let mut pts = b.points.clone();
        let start = *pts.last().expect("branch has points");
        // Lowest projection on u within one period from its start.
        let mut z = start;
        let mut delta = 0i64;
        for k in 0..n {
            z = z + self.g.primal.disp(c.edges[(b.join + k) % n]);
            delta = delta.min((z - start).dot(u));
        }
        let mut periods = 0;
        let mut z = start;
        loop {
            let ahead = refs.iter().all(|&q| (z - q).dot(u) + delta > 0);
            if periods >= depth && ahead {
                return (pts, u);
            }
            for k in 0..n {
                z = z + self.g.primal.disp(c.edges[(b.join + k) % n]);
                pts.push(z);
            }
            periods += 1;
        }
    }
}

fn principal(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Winding of the infinite branch around `q`: the truncated polyline plus the
/// remaining turn of the direction towards the asymptotic direction `u`.
fn infinite_winding(points: &[Vec2], u: Vec2, q: Vec2) -> Result<f64> {
    let end = *points.last().expect("nonempty");
    let w = topological_winding(&LatticePath::open(points.to_vec()), q)?;
    Ok(w + principal(u.angle() - (end - q).angle()))
}

/// Quantities entering the torus spine formula, exposed for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpineTerms {
    pub same_spine: bool,
    /// Winding part, units of π/4 (exact integer up to rounding).
    pub winding: f64,
    /// Sum of the jump signs; the result is `round(winding) + 4 * jumps`.
    pub jumps: i64,
    pub orientation_f: i64,
    pub orientation_f2: i64,
    /// `+1` if the spine of `f'` lies to the right of the spine of `f`, seen along the latter.
    pub right: i64,
    /// Primal spines strictly between the two.
    pub primal_between: Vec<SeparatingSpine>,
    /// Dual spines strictly between the two.
    pub dual_between: Vec<SeparatingSpine>,
}

/// One lift of a cycle separating the spines of `f` and `f'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatingSpine {
    /// Index into the primal or dual cycle list.
    pub cycle: usize,
    /// Orientation relative to the spine of `f`.
    pub orientation: i64,
}

/// `h(f) - h(f')` on the torus from the windings of the primal branches
/// of `f` and `f'` out to infinity along their spines, and the signs of the
/// spines separating them.
pub fn spine_increment_torus(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    pair: &TemperleyanPair,
    f: LiftedFace,
    f2: LiftedFace,
) -> Result<i64> {
    spine_increment_torus_with(g, s, pair, f, f2, &SpineOptions::default())
}

pub fn spine_increment_torus_with(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    pair: &TemperleyanPair,
    f: LiftedFace,
    f2: LiftedFace,
    opts: &SpineOptions,
) -> Result<i64> {
    let t = spine_terms(g, s, pair, f, f2, opts)?;
    let w = t.winding.round();
    if (t.winding - w).abs() > 1e-6 {
        return Err(Error::Inconsistent(format!("spine winding {} is not an integer", t.winding)));
    }
    Ok(w as i64 + 4 * t.jumps)
}

pub fn spine_terms(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    pair: &TemperleyanPair,
    f: LiftedFace,
    f2: LiftedFace,
    opts: &SpineOptions,
) -> Result<SpineTerms> {
    let geo = Geometry::new(g, s, pair)?;
    let (bf, bf2) = (geo.branch(f), geo.branch(f2));
    let (sp, sp2) = (geo.spine_of(&bf), geo.spine_of(&bf2));
    let c = &pair.crsf.cycles[bf.cycle];
    let c2 = &pair.crsf.cycles[bf2.cycle];
    let o = orientation(c.hom_class, geo.c0)?;
    let o2 = orientation(c2.hom_class, geo.c0)?;
    let same_spine = bf.cycle == bf2.cycle && sp.anchor == sp2.anchor;
    if f == f2 {
        return Ok(SpineTerms {
            same_spine: true,
            winding: 0.0,
            jumps: 0,
            orientation_f: o,
            orientation_f2: o2,
            right: 0,
            primal_between: vec![],
            dual_between: vec![],
        });
    }
    if same_spine {
        return same_spine_terms(&geo, &bf, &bf2, o);
    }

    let (mf, mf2) = (bf.points[0], bf2.points[0]);
    let refs = [mf, mf2];
    let (pf, u) = geo.truncated(&bf, &refs, opts.depth);
    let (pf2, u2) = geo.truncated(&bf2, &refs, opts.depth);
    let winding = (infinite_winding(&pf, u, mf)? - infinite_winding(&pf2, u2, mf)? + infinite_winding(&pf, u, mf2)?
        - infinite_winding(&pf2, u2, mf2)?)
        * 4.0
        / PI;

    let a = geo.area(&g.primal, sp.cycle, sp.anchor, o);
    let a2 = geo.area(&g.primal, sp2.cycle, sp2.anchor, o2);
    let right = if a > a2 { o } else { -o };
    let (lo, hi) = if a < a2 { (a, a2) } else { (a2, a) };
    let step = geo.lift_step();
    let between = |graph: &crate::surface::EmbeddedGraph, cycles: &[CrsfCycle]| -> Result<Vec<SeparatingSpine>> {
        let mut out = Vec::new();
        for (ci, cyc) in cycles.iter().enumerate() {
            let oc = orientation(cyc.hom_class, geo.c0)?;
            let base = geo.area(graph, cyc, graph.positions[cyc.vertices[0]], oc);
            // Lifts have areas base + m * step; count those strictly inside (lo, hi).
            let m_lo = (lo - base).div_euclid(step) + 1;
            let m_hi = (hi - base - 1).div_euclid(step);
            for _ in m_lo..=m_hi {
                out.push(SeparatingSpine { cycle: ci, orientation: oc * o });
            }
        }
        Ok(out)
    };
    let primal_between = between(&g.primal, &pair.crsf.cycles)?;
    let dual_between = between(&g.dual, &pair.dual.cycles)?;
    let jumps = jump_rule(right, o * o2, &primal_between, &dual_between);
    Ok(SpineTerms {
        same_spine: false,
        winding,
        jumps,
        orientation_f: o,
        orientation_f2: o2,
        right,
        primal_between,
        dual_between,
    })
}

/// Each spine strictly between the two contributes its orientation relative
/// to the spine of `f`; the two end spines contribute one unit each when
/// parallel and cancel when antiparallel.
fn jump_rule(right: i64, rel: i64, primal: &[SeparatingSpine], dual: &[SeparatingSpine]) -> i64 {
    let between: i64 = primal.iter().chain(dual).map(|s| s.orientation).sum();
    right * (1 + rel + between)
}

/// Branches on one spine merge at their first common vertex; the height gap
/// is the winding of the path joining the midpoints through it, plus the merge sign.
fn same_spine_terms(geo: &Geometry, bf: &Branch, bf2: &Branch, o: i64) -> Result<SpineTerms> {
    let c = &geo.pair.crsf.cycles[bf.cycle];
    let n = c.edges.len() as i64;
    let disp = |k: i64| geo.g.primal.disp(c.edges[k.rem_euclid(n) as usize]);
    // Tree parts of the second branch, by lifted position.
    let tree2: HashMap<Vec2, usize> = bf2.points[1..].iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
    let mut merge = None;
    for (i, &p) in bf.points.iter().enumerate().skip(1) {
        if let Some(&j) = tree2.get(&p) {
            merge = Some((i, j));
            break;
        }
    }
    let (mut path1, mut path2) = match merge {
        Some((i, j)) => (bf.points[..=i].to_vec(), bf2.points[..=j].to_vec()),
        None => {
            // Both reach the spine without meeting: the later join point is the merge.
            let x1 = *bf.points.last().expect("nonempty");
            let x2 = *bf2.points.last().expect("nonempty");
            let mut p1 = bf.points.clone();
            let mut p2 = bf2.points.clone();
            // One join point lies ahead of the other along the spine.
            let reach = |from: usize, start: Vec2, target: Vec2| -> Option<Vec<Vec2>> {
                let mut z = start;
                let mut out = Vec::new();
                // Lifted faces are at most a few periods apart.
                let limit = (n as usize) * (8 + 2 * geo.s.topology.dims().0.max(geo.s.topology.dims().1));
                for k in from as i64..(from + limit) as i64 {
                    if z == target {
                        return Some(out);
                    }
                    z = z + disp(k);
                    out.push(z);
                }
                (z == target).then_some(out)
            };
            if let Some(ext) = reach(bf.join, x1, x2) {
                p1.extend(ext);
            } else if let Some(ext) = reach(bf2.join, x2, x1) {
                p2.extend(ext);
            } else {
                return Err(Error::Inconsistent("join points are not on one lifted spine".into()));
            }
            (p1, p2)
        }
    };
    let v = *path1.last().expect("nonempty");
    let out = octant(match geo.out_edge_at(v) {
        Some(h) => geo.g.primal.disp(h),
        None => return Err(Error::Inconsistent("merge vertex has no out-edge".into())),
    });
    let rx = octant(path1[path1.len() - 2] - v);
    let ry = octant(path2[path2.len() - 2] - v);
    let eps = merge_sign(out, rx, ry);
    path2.pop();
    path2.reverse();
    path1.extend(path2);
    let w = intrinsic_winding(&LatticePath::open(path1))?;
    Ok(SpineTerms {
        same_spine: true,
        winding: w as f64,
        jumps: eps,
        orientation_f: o,
        orientation_f2: o,
        right: 0,
        primal_between: vec![],
        dual_between: vec![],
    })
}

impl Geometry<'_> {
    /// Out-edge of the lifted vertex at `p`, found through its canonical position.
    fn out_edge_at(&self, p: Vec2) -> Option<HalfEdge> {
        let (v, _) = self.s.locate(p)?;
        match self.s.kinds[v] {
            GKind::Primal { vertex } => self.pair.crsf.out_edge[vertex],
            _ => None,
        }
    }
}
