//! The superposition graph `G`: black vertices are the primal and dual
//! vertices, white vertices are the edge crossings, and every face is a
//! quadrangle whose diagonal joins a primal and a dual black vertex.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{SurfaceGraph, Topology, Vec2};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GKind {
    /// Crossing of primal edge `edge` with its dual.
    White { edge: usize },
    /// Non-wired primal vertex.
    Primal { vertex: usize },
    /// Dual vertex.
    Dual { vertex: usize },
}

/// A face of `G` together with the lattice shift of the copy meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedFace {
    pub face: usize,
    pub shift: [i64; 2],
}

impl LiftedFace {
    pub fn new(face: usize, shift: [i64; 2]) -> Self {
        Self { face, shift }
    }

    pub fn shifted(self, by: [i64; 2]) -> Self {
        Self { face: self.face, shift: [self.shift[0] + by[0], self.shift[1] + by[1]] }
    }
}

/// Edge of `G` between a white and a black vertex, described from the black
/// vertex at its canonical position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GEdge {
    pub white: usize,
    pub black: usize,
    /// Unit step from black to white (half a `G` spacing is 2 quarter units).
    pub step: Vec2,
    /// Lattice shift of the white endpoint.
    pub white_shift: [i64; 2],
    /// Face on the left of the oriented segment black -> white.
    pub left: Option<LiftedFace>,
    /// Face on the right of the oriented segment black -> white.
    pub right: Option<LiftedFace>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadFace {
    /// Canonical midpoint of the diagonal (odd coordinates).
    pub mid: Vec2,
    /// Offset from the midpoint to the primal black corner; the dual black
    /// corner sits at the opposite offset.
    pub primal_offset: Vec2,
    pub primal: usize,
    pub dual: usize,
}

/// Step from a canonical face to an adjacent face across an edge of `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceStep {
    pub edge: usize,
    /// Neighbour, relative to the canonical copy of the source face.
    pub to: LiftedFace,
    /// Whether the source face lies on the left of black -> white.
    pub from_left: bool,
    /// Lifted position of the black endpoint of `edge`.
    pub black: Vec2,
}

#[derive(Clone, Debug)]
pub struct SuperpositionGraph {
    pub topology: Topology,
    pub positions: Vec<Vec2>,
    pub kinds: Vec<GKind>,
    pub edges: Vec<GEdge>,
    pub faces: Vec<QuadFace>,
    n_white: usize,
    black_of_primal: Vec<Option<usize>>,
    black_of_dual: Vec<usize>,
    vertex_start: Vec<usize>,
    vertex_list: Vec<usize>,
    lookup: HashMap<Vec2, usize>,
    face_lookup: HashMap<Vec2, usize>,
    step_start: Vec<usize>,
    step_list: Vec<FaceStep>,
}

const AXES: [Vec2; 4] = [Vec2::new(1, 0), Vec2::new(0, 1), Vec2::new(-1, 0), Vec2::new(0, -1)];

impl SuperpositionGraph {
    pub fn new(g: &SurfaceGraph) -> Result<Self> {
        g.check_faithful()?;
        let topology = g.topology;
        let mut positions = Vec::new();
        let mut kinds = Vec::new();
        for e in 0..g.primal.n_edges() {
            positions.push(g.primal.midpoint(&topology, e));
            kinds.push(GKind::White { edge: e });
        }
        let n_white = positions.len();
        let mut black_of_primal = vec![None; g.primal.n_vertices()];
        for v in g.interior_vertices() {
            black_of_primal[v] = Some(positions.len());
            positions.push(g.primal.positions[v]);
            kinds.push(GKind::Primal { vertex: v });
        }
        let mut black_of_dual = Vec::with_capacity(g.dual.n_vertices());
        for d in 0..g.dual.n_vertices() {
            black_of_dual.push(positions.len());
            positions.push(g.dual.positions[d]);
            kinds.push(GKind::Dual { vertex: d });
        }
        let mut lookup = HashMap::with_capacity(positions.len());
        for (i, &p) in positions.iter().enumerate() {
            if lookup.insert(p, i).is_some() {
                return Err(Error::NotFaithful(format!("two vertices of G share position {p:?}")));
            }
        }

        let mut s = Self {
            topology,
            positions,
            kinds,
            edges: Vec::new(),
            faces: Vec::new(),
            n_white,
            black_of_primal,
            black_of_dual,
            vertex_start: Vec::new(),
            vertex_list: Vec::new(),
            lookup,
            face_lookup: HashMap::new(),
            step_start: Vec::new(),
            step_list: Vec::new(),
        };

        for w in 0..n_white {
            let wp = s.positions[w];
            for u in AXES {
                let Some((b, _)) = s.locate(wp + u.scale(2)) else { continue };
                if s.is_white(b) {
                    return Err(Error::NotFaithful("G is not bipartite".into()));
                }
                let bp = s.positions[b];
                let step = -u;
                let (wc, white_shift) = topology.wrap(bp + step.scale(2));
                debug_assert_eq!(wc, wp);
                let left = s.face_at(bp, step, step.rot90());
                let right = s.face_at(bp, step, -step.rot90());
                s.edges.push(GEdge { white: w, black: b, step, white_shift, left, right });
            }
        }

        let n = s.positions.len();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, e) in s.edges.iter().enumerate() {
            incident[e.white].push(i);
            incident[e.black].push(i);
        }
        s.vertex_start.push(0);
        for list in incident {
            s.vertex_list.extend(list);
            s.vertex_start.push(s.vertex_list.len());
        }

        let mut steps: Vec<Vec<FaceStep>> = vec![Vec::new(); s.faces.len()];
        for (i, e) in s.edges.iter().enumerate() {
            let (Some(l), Some(r)) = (e.left, e.right) else { continue };
            let bp = s.positions[e.black];
            let d = [r.shift[0] - l.shift[0], r.shift[1] - l.shift[1]];
            steps[l.face].push(FaceStep {
                edge: i,
                to: LiftedFace::new(r.face, d),
                from_left: true,
                black: bp - topology.shift_vector(l.shift),
            });
            steps[r.face].push(FaceStep {
                edge: i,
                to: LiftedFace::new(l.face, [-d[0], -d[1]]),
                from_left: false,
                black: bp - topology.shift_vector(r.shift),
            });
        }
        s.step_start.push(0);
        for list in steps {
            s.step_list.extend(list);
            s.step_start.push(s.step_list.len());
        }

        for (i, e) in s.edges.iter().enumerate() {
            if !s.is_white(e.white) || s.is_white(e.black) {
                return Err(Error::NotFaithful(format!("edge {i} joins two vertices of one colour")));
            }
        }
        if s.n_white() != s.n_black() {
            return Err(Error::NotFaithful(format!(
                "{} white vs {} black vertices",
                s.n_white(),
                s.n_black()
            )));
        }
        Ok(s)
    }

    /// Face on side `side` of the segment from black position `bp` along
    /// `step`, registering it on first sight.
    fn face_at(&mut self, bp: Vec2, step: Vec2, side: Vec2) -> Option<LiftedFace> {
        let center = bp + step + side;
        let other_black = bp + (step + side).scale(2);
        let (ob, _) = self.locate(other_black)?;
        let (w2, _) = self.locate(bp + side.scale(2))?;
        let (w1, _) = self.locate(bp + step.scale(2))?;
        if !self.is_white(w1) || !self.is_white(w2) || self.is_white(ob) {
            return None;
        }
        let (mid, shift) = self.topology.wrap(center);
        let id = match self.face_lookup.get(&mid) {
            Some(&id) => id,
            None => {
                let (b, _) = self.locate(bp).expect("black vertex exists");
                let (primal, dual, primal_offset) = match self.kinds[b] {
                    GKind::Primal { .. } => (b, ob, bp - center),
                    _ => (ob, b, other_black - center),
                };
                let id = self.faces.len();
                self.faces.push(QuadFace { mid, primal_offset, primal, dual });
                self.face_lookup.insert(mid, id);
                id
            }
        };
        Some(LiftedFace { face: id, shift })
    }

    /// Vertex of `G` at a position of the universal cover, with its lattice shift.
    pub fn locate(&self, p: Vec2) -> Option<(usize, [i64; 2])> {
        let (c, s) = self.topology.wrap(p);
        self.lookup.get(&c).map(|&v| (v, s))
    }

    /// Face whose diagonal midpoint is at `p` in the universal cover.
    pub fn locate_face(&self, p: Vec2) -> Option<LiftedFace> {
        let (c, s) = self.topology.wrap(p);
        self.face_lookup.get(&c).map(|&f| LiftedFace::new(f, s))
    }

    pub fn n_white(&self) -> usize {
        self.n_white
    }

    pub fn n_black(&self) -> usize {
        self.positions.len() - self.n_white
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn is_white(&self, v: usize) -> bool {
        v < self.n_white
    }

    /// Black vertex of a non-wired primal vertex.
    pub fn primal_black(&self, v: usize) -> Option<usize> {
        self.black_of_primal[v]
    }

    pub fn dual_black(&self, d: usize) -> usize {
        self.black_of_dual[d]
    }

    /// Edges of `G` incident to `v`.
    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_list[self.vertex_start[v]..self.vertex_start[v + 1]]
    }

    /// The edge joining white `w` and black `b`, if any.
    pub fn edge_between(&self, w: usize, b: usize) -> Option<usize> {
        self.vertex_edges(w).iter().copied().find(|&e| self.edges[e].black == b)
    }

    /// Midpoint of a lifted face in the universal cover.
    pub fn face_mid(&self, f: LiftedFace) -> Vec2 {
        self.faces[f.face].mid + self.topology.shift_vector(f.shift)
    }

    /// Lifted position of the black endpoint of edge `e` when its faces are
    /// taken relative to shift `s`.
    pub fn black_pos(&self, e: usize, s: [i64; 2]) -> Vec2 {
        self.positions[self.edges[e].black] + self.topology.shift_vector(s)
    }

    /// Steps from the canonical copy of face `f` to its neighbours.
    pub fn face_steps(&self, f: usize) -> &[FaceStep] {
        &self.step_list[self.step_start[f]..self.step_start[f + 1]]
    }

    /// The step from lifted face `from` to lifted face `to`, if adjacent.
    pub fn step_between(&self, from: LiftedFace, to: LiftedFace) -> Option<FaceStep> {
        self.face_steps(from.face).iter().copied().find(|st| st.to.shifted(from.shift) == to).map(|st| FaceStep {
            to,
            black: st.black + self.topology.shift_vector(from.shift),
            ..st
        })
    }

    /// Edges of `G` separating two faces, with each face as seen from the other.
    /// Returns `(edge, left, right)` for every edge that has both faces.
    pub fn dual_edges(&self) -> impl Iterator<Item = (usize, LiftedFace, LiftedFace)> + '_ {
        self.edges.iter().enumerate().filter_map(|(i, e)| Some((i, e.left?, e.right?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_annulus, build_torus, Weights};

    #[test]
    fn torus_faces_are_quads() {
        for (nx, ny) in [(2, 2), (3, 2), (5, 4)] {
            let g = build_torus(nx, ny, &Weights::Uniform).unwrap();
            let s = g.superpose().unwrap();
            assert_eq!(s.n_white(), 2 * nx * ny);
            assert_eq!(s.faces.len(), 4 * nx * ny);
            assert!(s.edges.iter().all(|e| e.left.is_some() && e.right.is_some()));
            for f in 0..s.faces.len() {
                let n = s.edges.iter().filter(|e| e.left.map(|l| l.face) == Some(f)).count();
                assert_eq!(n, 2, "each face has two black-to-white edges with the face on the left");
            }
        }
    }

    #[test]
    fn face_steps_are_symmetric() {
        let g = build_torus(2, 3, &Weights::Uniform).unwrap();
        let s = g.superpose().unwrap();
        for f in 0..s.faces.len() {
            let base = LiftedFace::new(f, [0, 0]);
            assert_eq!(s.face_steps(f).len(), 4);
            for st in s.face_steps(f) {
                let d = s.face_mid(st.to) - s.faces[f].mid;
                assert_eq!(d.x.abs() + d.y.abs(), 2);
                let back = s.step_between(st.to, base).unwrap();
                assert_eq!(back.edge, st.edge);
                assert_eq!(back.black, st.black);
                assert_ne!(back.from_left, st.from_left);
            }
        }
    }

    #[test]
    fn annulus_counts() {
        let g = build_annulus(4, 3, &Weights::Uniform).unwrap();
        let s = g.superpose().unwrap();
        assert_eq!(s.n_white(), g.primal.n_edges());
        assert_eq!(s.n_white(), s.n_black());
        assert_eq!(s.n_white(), 4 * (2 * 3 - 3));
    }

    #[test]
    fn face_midpoints_bisect_diagonals() {
        let g = build_torus(3, 3, &Weights::Uniform).unwrap();
        let s = g.superpose().unwrap();
        for f in &s.faces {
            let (p, _) = s.locate(f.mid + f.primal_offset).unwrap();
            let (d, _) = s.locate(f.mid - f.primal_offset).unwrap();
            assert_eq!((p, d), (f.primal, f.dual));
            assert!(matches!(s.kinds[p], GKind::Primal { .. }));
            assert!(matches!(s.kinds[d], GKind::Dual { .. }));
        }
    }
}
