//! Square-lattice graphs faithfully embedded on the flat torus and the flat annulus.
//!
//! All positions are integers in *quarter units*: a primal vertex `(i, j)` sits
//! at `(4i, 4j)`, dual vertices and edge crossings sit at even offsets, and the
//! midpoints of superposition-face diagonals sit at odd coordinates. Every
//! direction that occurs is a multiple of π/4, so windings are exact integers.
//!
//! Vertex indexing is row-major with the angular/horizontal seam at index 0:
//! primal vertex `(i, j)` has index `j * nx + i`, and its two outgoing lattice
//! edges (east, north) have indices `2v` and `2v + 1`. The dual vertex `(i, j)`
//! sits at `(i + 1/2, j + 1/2)`, and dual edge `e` crosses primal edge `e`
//! (the primal edge turned a quarter turn counterclockwise).

mod superpose;
mod winding;

pub use superpose::{FaceStep, GEdge, GKind, LiftedFace, QuadFace, SuperpositionGraph};
pub use winding::{intrinsic_winding, topological_winding, turn_units, LatticePath};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer homology vector. The annulus uses only the first coordinate.
pub type Hom = [i32; 2];

/// Integer 2-vector in quarter lattice units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: i64,
    pub y: i64,
}

impl Vec2 {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn cross(self, o: Vec2) -> i64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dot(self, o: Vec2) -> i64 {
        self.x * o.x + self.y * o.y
    }

    /// Quarter turn counterclockwise.
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_zero(self) -> bool {
        self.x == 0 && self.y == 0
    }

    /// Direction as a multiple of π/4 in `0..8` (0 = east, 2 = north), if the
    /// vector is nonzero and axis-aligned or diagonal.
    pub fn octant(self) -> Option<i32> {
        let (x, y) = (self.x, self.y);
        if x == 0 && y == 0 {
            return None;
        }
        if x != 0 && y != 0 && x.abs() != y.abs() {
            return None;
        }
        let sx = x.signum();
        let sy = y.signum();
        Some(match (sx, sy) {
            (1, 0) => 0,
            (1, 1) => 1,
            (0, 1) => 2,
            (-1, 1) => 3,
            (-1, 0) => 4,
            (-1, -1) => 5,
            (0, -1) => 6,
            _ => 7,
        })
    }

    pub fn angle(self) -> f64 {
        (self.y as f64).atan2(self.x as f64)
    }

    pub fn scale(self, k: i64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Topology {
    /// Square grid `Z_nx x Z_ny` on a rectangular flat torus.
    Torus { nx: usize, ny: usize },
    /// Cylinder grid with `n_ang` angular sites and `n_rad` radial layers; the
    /// first and last layer are wired rims.
    Annulus { n_ang: usize, n_rad: usize },
}

impl Topology {
    pub fn genus(&self) -> i32 {
        match self {
            Topology::Torus { .. } => 1,
            Topology::Annulus { .. } => 0,
        }
    }

    pub fn boundary_components(&self) -> i32 {
        match self {
            Topology::Torus { .. } => 0,
            Topology::Annulus { .. } => 2,
        }
    }

    pub fn euler_characteristic(&self) -> i32 {
        2 - 2 * self.genus() - self.boundary_components()
    }

    pub fn homology_rank(&self) -> usize {
        match self {
            Topology::Torus { .. } => 2,
            Topology::Annulus { .. } => 1,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Topology::Torus { .. })
    }

    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Topology::Torus { nx, ny } => (nx, ny),
            Topology::Annulus { n_ang, n_rad } => (n_ang, n_rad),
        }
    }

    /// Translation periods in quarter units; the annulus is periodic only in x.
    pub fn periods(&self) -> [Option<i64>; 2] {
        match *self {
            Topology::Torus { nx, ny } => [Some(4 * nx as i64), Some(4 * ny as i64)],
            Topology::Annulus { n_ang, .. } => [Some(4 * n_ang as i64), None],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Topology::Torus { nx, ny } if nx < 2 || ny < 2 => Err(Error::InvalidDimensions(format!(
                "torus needs nx >= 2 and ny >= 2, got {nx}x{ny}"
            ))),
            Topology::Annulus { n_ang, n_rad } if n_ang < 3 || n_rad < 2 => {
                Err(Error::InvalidDimensions(format!(
                    "annulus needs n_ang >= 3 and n_rad >= 2, got {n_ang}x{n_rad}"
                )))
            }
            _ => {
                debug_assert_eq!(self.euler_characteristic(), 0);
                Ok(())
            }
        }
    }

    /// Reduce a position into the fundamental domain, returning the canonical
    /// position and the lattice shift `s` with `p = canonical + s * period`.
    pub fn wrap(&self, p: Vec2) -> (Vec2, [i64; 2]) {
        let [px, py] = self.periods();
        let (x, sx) = match px {
            Some(px) => (p.x.rem_euclid(px), p.x.div_euclid(px)),
            None => (p.x, 0),
        };
        let (y, sy) = match py {
            Some(py) => (p.y.rem_euclid(py), p.y.div_euclid(py)),
            None => (p.y, 0),
        };
        (Vec2::new(x, y), [sx, sy])
    }

    /// Translation vector of a lattice shift.
    pub fn shift_vector(&self, s: [i64; 2]) -> Vec2 {
        let [px, py] = self.periods();
        Vec2::new(s[0] * px.unwrap_or(0), s[1] * py.unwrap_or(0))
    }
}

/// Oriented edge of an embedded graph: edge index `e` traversed forward
/// (`2e`) or backward (`2e + 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HalfEdge(pub u32);

impl HalfEdge {
    pub fn new(edge: usize, reversed: bool) -> Self {
        HalfEdge((2 * edge + reversed as usize) as u32)
    }

    pub fn edge(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_reversed(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn reverse(self) -> Self {
        HalfEdge(self.0 ^ 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    /// Displacement from tail to head in the universal cover.
    pub disp: Vec2,
    /// Homology signature: number of seam crossings, signed.
    pub hom: Hom,
}

/// A graph embedded with straight edges on a flat surface.
#[derive(Clone, Debug)]
pub struct EmbeddedGraph {
    pub positions: Vec<Vec2>,
    pub edges: Vec<Edge>,
    /// `[forward, backward]` weight per edge.
    pub weights: Vec<[f64; 2]>,
    /// Wired boundary vertices (absorbing, no out-edge).
    pub wired: Vec<bool>,
    out_start: Vec<usize>,
    out_list: Vec<HalfEdge>,
    out_cum: Vec<f64>,
}

impl EmbeddedGraph {
    fn new(
        topology: &Topology,
        positions: Vec<Vec2>,
        wired: Vec<bool>,
        raw_edges: Vec<(usize, usize, Vec2)>,
        weights: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let [px, py] = topology.periods();
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (tail, head, disp) in raw_edges {
            let lag = positions[tail] + disp - positions[head];
            let comp = |d: i64, p: Option<i64>| -> Result<i32> {
                match p {
                    Some(p) if d % p == 0 => Ok((d / p) as i32),
                    None if d == 0 => Ok(0),
                    _ => Err(Error::NotFaithful(format!(
                        "edge {tail}->{head} displacement does not close modulo the periods"
                    ))),
                }
            };
            let hom = [comp(lag.x, px)?, comp(lag.y, py)?];
            edges.push(Edge { tail, head, disp, hom });
        }
        for (e, w) in weights.iter().enumerate() {
            for (d, &x) in w.iter().enumerate() {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::NonPositiveWeight { half_edge: 2 * e + d, weight: x });
                }
            }
        }

        let n = positions.len();
        let mut incident: Vec<Vec<HalfEdge>> = vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            incident[edge.tail].push(HalfEdge::new(e, false));
            incident[edge.head].push(HalfEdge::new(e, true));
        }
        let mut out_start = Vec::with_capacity(n + 1);
        let mut out_list = Vec::with_capacity(2 * edges.len());
        let mut out_cum = Vec::with_capacity(2 * edges.len());
        out_start.push(0);
        for list in incident.iter_mut() {
            list.sort_by(|a, b| {
                let da = half_disp(&edges, *a).angle().rem_euclid(2.0 * PI);
                let db = half_disp(&edges, *b).angle().rem_euclid(2.0 * PI);
                da.total_cmp(&db).then(a.cmp(b))
            });
            let mut acc = 0.0;
            for &h in list.iter() {
                acc += weights[h.edge()][h.is_reversed() as usize];
                out_list.push(h);
                out_cum.push(acc);
            }
            out_start.push(out_list.len());
        }
        Ok(Self { positions, edges, weights, wired, out_start, out_list, out_cum })
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn tail(&self, h: HalfEdge) -> usize {
        let e = &self.edges[h.edge()];
        if h.is_reversed() {
            e.head
        } else {
            e.tail
        }
    }

    pub fn head(&self, h: HalfEdge) -> usize {
        let e = &self.edges[h.edge()];
        if h.is_reversed() {
            e.tail
        } else {
            e.head
        }
    }

    pub fn disp(&self, h: HalfEdge) -> Vec2 {
        half_disp(&self.edges, h)
    }

    pub fn hom(&self, h: HalfEdge) -> Hom {
        let hm = self.edges[h.edge()].hom;
        if h.is_reversed() {
            [-hm[0], -hm[1]]
        } else {
            hm
        }
    }

    pub fn weight(&self, h: HalfEdge) -> f64 {
        self.weights[h.edge()][h.is_reversed() as usize]
    }

    /// Outgoing half-edges of `v`, sorted counterclockwise by direction from east.
    pub fn out_edges(&self, v: usize) -> &[HalfEdge] {
        &self.out_list[self.out_start[v]..self.out_start[v + 1]]
    }

    /// Cumulative out-weights aligned with [`Self::out_edges`].
    pub fn out_cumulative(&self, v: usize) -> &[f64] {
        &self.out_cum[self.out_start[v]..self.out_start[v + 1]]
    }

    /// Position of the midpoint of edge `e`, in the fundamental domain.
    pub fn midpoint(&self, topology: &Topology, e: usize) -> Vec2 {
        let edge = &self.edges[e];
        let d = edge.disp;
        topology.wrap(self.positions[edge.tail] + Vec2::new(d.x / 2, d.y / 2)).0
    }

    /// Faces of the rotation system, each as the cycle of half-edges that
    /// keeps the face on its left.
    pub fn faces(&self) -> Vec<Vec<HalfEdge>> {
        let nh = 2 * self.edges.len();
        let mut pos_in_rot = vec![0usize; nh];
        for v in 0..self.n_vertices() {
            for (k, h) in self.out_edges(v).iter().enumerate() {
                pos_in_rot[h.0 as usize] = k;
            }
        }
        let mut seen = vec![false; nh];
        let mut faces = Vec::new();
        for start in 0..nh {
            if seen[start] {
                continue;
            }
            let mut face = Vec::new();
            let mut h = HalfEdge(start as u32);
            while !seen[h.0 as usize] {
                seen[h.0 as usize] = true;
                face.push(h);
                let v = self.head(h);
                let rot = self.out_edges(v);
                let k = pos_in_rot[h.reverse().0 as usize];
                h = rot[(k + rot.len() - 1) % rot.len()];
            }
            faces.push(face);
        }
        faces
    }

    /// Sum of homology signatures along a sequence of half-edges.
    pub fn hom_sum(&self, path: &[HalfEdge]) -> Hom {
        path.iter().fold([0, 0], |acc, &h| {
            let x = self.hom(h);
            [acc[0] + x[0], acc[1] + x[1]]
        })
    }

    /// Sum of displacements along a sequence of half-edges.
    pub fn disp_sum(&self, path: &[HalfEdge]) -> Vec2 {
        path.iter().fold(Vec2::default(), |acc, &h| acc + self.disp(h))
    }
}

fn half_disp(edges: &[Edge], h: HalfEdge) -> Vec2 {
    let d = edges[h.edge()].disp;
    if h.is_reversed() {
        -d
    } else {
        d
    }
}

/// Edge weights for the primal graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    #[default]
    Uniform,
    /// `[forward, backward]` weight per primal edge, in edge-index order.
    Table(Vec<[f64; 2]>),
}

impl Weights {
    fn resolve(&self, n_edges: usize) -> Result<Vec<[f64; 2]>> {
        match self {
            Weights::Uniform => Ok(vec![[1.0, 1.0]; n_edges]),
            Weights::Table(t) if t.len() == n_edges => Ok(t.clone()),
            Weights::Table(t) => Err(Error::WeightTable { expected: n_edges, found: t.len() }),
        }
    }
}

/// JSON description of a graph: `{"topology": "torus", "dims": [nx, ny], "weights": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub topology: TopologyKind,
    pub dims: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Torus,
    Annulus,
}

impl GraphSpec {
    pub fn topology(&self) -> Topology {
        match self.topology {
            TopologyKind::Torus => Topology::Torus { nx: self.dims[0], ny: self.dims[1] },
            TopologyKind::Annulus => Topology::Annulus { n_ang: self.dims[0], n_rad: self.dims[1] },
        }
    }

    pub fn build(&self) -> Result<SurfaceGraph> {
        let w = match &self.weights {
            Some(t) => Weights::Table(t.clone()),
            None => Weights::Uniform,
        };
        SurfaceGraph::build(self.topology(), &w)
    }
}

/// A primal graph on a torus or annulus together with its dual.
#[derive(Clone, Debug)]
pub struct SurfaceGraph {
    pub topology: Topology,
    pub primal: EmbeddedGraph,
    pub dual: EmbeddedGraph,
    /// Dual vertex cycles surrounding each boundary component (annulus only),
    /// listed in order of increasing angle.
    pub boundary_cycles: Vec<Vec<usize>>,
}

pub fn build_torus(nx: usize, ny: usize, weights: &Weights) -> Result<SurfaceGraph> {
    SurfaceGraph::build(Topology::Torus { nx, ny }, weights)
}

pub fn build_annulus(n_ang: usize, n_rad: usize, weights: &Weights) -> Result<SurfaceGraph> {
    SurfaceGraph::build(Topology::Annulus { n_ang, n_rad }, weights)
}

impl SurfaceGraph {
    pub fn build(topology: Topology, weights: &Weights) -> Result<Self> {
        topology.validate()?;
        let (nx, ny) = topology.dims();
        let torus = topology.is_torus();
        let idx = |i: usize, j: usize| j * nx + i;
        let mut positions = Vec::with_capacity(nx * ny);
        let mut wired = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                positions.push(Vec2::new(4 * i as i64, 4 * j as i64));
                wired.push(!torus && (j == 0 || j == ny - 1));
            }
        }
        // Primal edges and their duals are generated together so that dual
        // edge `e` crosses primal edge `e`.
        let mut primal_edges = Vec::new();
        let mut dual_edges = Vec::new();
        let dny = if torus { ny } else { ny - 1 };
        for j in 0..ny {
            for i in 0..nx {
                let v = idx(i, j);
                let east = torus || (j > 0 && j < ny - 1);
                if east {
                    primal_edges.push((v, idx((i + 1) % nx, j), Vec2::new(4, 0)));
                    let below = if torus { (j + ny - 1) % ny } else { j - 1 };
                    dual_edges.push((idx(i, below), idx(i, j), Vec2::new(0, 4)));
                }
                let north = torus || j < ny - 1;
                if north {
                    primal_edges.push((v, idx(i, (j + 1) % ny), Vec2::new(0, 4)));
                    dual_edges.push((idx(i, j), idx((i + nx - 1) % nx, j), Vec2::new(-4, 0)));
                }
            }
        }
        let mut dual_positions = Vec::with_capacity(nx * dny);
        for j in 0..dny {
            for i in 0..nx {
                dual_positions.push(Vec2::new(4 * i as i64 + 2, 4 * j as i64 + 2));
            }
        }
        let n_edges = primal_edges.len();
        let primal = EmbeddedGraph::new(&topology, positions, wired, primal_edges, weights.resolve(n_edges)?)?;
        let dual = EmbeddedGraph::new(
            &topology,
            dual_positions,
            vec![false; nx * dny],
            dual_edges,
            vec![[1.0, 1.0]; n_edges],
        )?;
        let boundary_cycles = if torus {
            Vec::new()
        } else {
            vec![(0..nx).collect(), (0..nx).map(|i| idx(i, dny - 1)).collect()]
        };
        let g = Self { topology, primal, dual, boundary_cycles };
        g.check_faithful()?;
        Ok(g)
    }

    pub fn is_torus(&self) -> bool {
        self.topology.is_torus()
    }

    pub fn genus(&self) -> i32 {
        self.topology.genus()
    }

    /// Non-wired primal vertices.
    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.primal.n_vertices()).filter(|&v| !self.primal.wired[v])
    }

    /// Checks that the embedding is faithful to the surface: homology sums
    /// vanish around disc faces, dual edges cross their primal edges, disc
    /// faces fill the surface, and each rim is surrounded by one dual cycle.
    pub fn check_faithful(&self) -> Result<()> {
        if self.primal.n_edges() != self.dual.n_edges() {
            return Err(Error::NotFaithful("primal and dual edge counts differ".into()));
        }
        for e in 0..self.primal.n_edges() {
            if self.primal.midpoint(&self.topology, e) != self.dual.midpoint(&self.topology, e) {
                return Err(Error::NotFaithful(format!("dual edge {e} does not cross primal edge {e}")));
            }
            let pd = self.primal.edges[e].disp;
            if pd.rot90() != self.dual.edges[e].disp {
                return Err(Error::NotFaithful(format!("dual edge {e} is not a quarter turn of its primal edge")));
            }
        }
        for (name, graph) in [("primal", &self.primal), ("dual", &self.dual)] {
            let mut non_disc = Vec::new();
            let faces = graph.faces();
            for f in &faces {
                let d = graph.disp_sum(f);
                let h = graph.hom_sum(f);
                if d.is_zero() {
                    if h != [0, 0] {
                        return Err(Error::NotFaithful(format!("{name} disc face with nonzero homology")));
                    }
                } else {
                    non_disc.push(h);
                }
            }
            let disc = faces.len() - non_disc.len();
            if self.is_torus() {
                if !non_disc.is_empty() {
                    return Err(Error::NotFaithful(format!("{name} graph has a non-disc face")));
                }
                let chi = graph.n_vertices() as i64 - graph.n_edges() as i64 + disc as i64;
                if chi != 0 {
                    return Err(Error::NotFaithful(format!("{name} face count gives Euler characteristic {chi}")));
                }
            } else if name == "dual" {
                let rims_ok = non_disc.len() == 2 && non_disc.iter().all(|h| h[0].abs() == 1 && h[1] == 0);
                let interior = self.interior_vertices().count();
                if !rims_ok || disc != interior {
                    return Err(Error::NotFaithful("dual graph does not surround each rim by one cycle".into()));
                }
            }
        }
        Ok(())
    }

    pub fn superpose(&self) -> Result<SuperpositionGraph> {
        SuperpositionGraph::new(self)
    }
}
