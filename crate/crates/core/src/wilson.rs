//! Wired oriented cycle-rooted spanning forests sampled by loop-erased random
//! walks that stop on the growing forest, on the wired boundary, or when they
//! close a noncontractible cycle.
//!
//! Contractibility is decided exactly: along the current loop-erased path each
//! vertex carries the cumulative homology signature from the start, and a loop
//! is contractible iff it returns to a vertex with the same offset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{EmbeddedGraph, HalfEdge, Hom, SurfaceGraph};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// Deterministic RNG stream for sample `index` under `master_seed`.
pub fn sample_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// One step of the jump chain: an out-edge of `v` with probability
/// proportional to its weight.
pub fn walk_step<R: Rng + ?Sized>(g: &EmbeddedGraph, v: usize, rng: &mut R) -> Result<HalfEdge> {
    if g.wired[v] {
        return Err(Error::BoundaryVertex(v));
    }
    let out = g.out_edges(v);
    let cum = g.out_cumulative(v);
    let Some(&total) = cum.last() else { return Err(Error::IsolatedVertex(v)) };
    let r = rng.random::<f64>() * total;
    let k = cum.partition_point(|&c| c <= r).min(out.len() - 1);
    Ok(out[k])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The walk entered an absorbing or wired vertex.
    HitAbsorbing { vertex: usize },
    /// The walk closed a loop with nonzero homology; the cycle starts at
    /// position `start` of the path.
    NoncontractibleCycle { start: usize, hom_class: Hom },
}

/// Loop-erased path. `edges[i]` leads from `vertices[i]`; for an absorbed walk
/// the absorbing vertex is the last entry of `vertices`, for a cycle the last
/// edge returns to `vertices[start]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopErasedPath {
    pub vertices: Vec<usize>,
    pub edges: Vec<HalfEdge>,
    pub termination: Termination,
}

const NOT_ON_PATH: u32 = u32::MAX;

/// Reusable scratch space for loop-erased walks on one graph.
pub struct Walker {
    in_path: Vec<u32>,
    offset: Vec<Hom>,
    pub step_cap: u64,
}

impl Walker {
    pub fn new(g: &EmbeddedGraph) -> Self {
        Self { in_path: vec![NOT_ON_PATH; g.n_vertices()], offset: vec![[0, 0]; g.n_vertices()], step_cap: DEFAULT_STEP_CAP }
    }

    /// Loop-erased walk from `start`, absorbed by `absorbing` and wired vertices.
    pub fn walk<R: Rng + ?Sized>(
        &mut self,
        g: &EmbeddedGraph,
        start: usize,
        absorbing: &[bool],
        rng: &mut R,
    ) -> Result<LoopErasedPath> {
        if absorbing[start] || g.wired[start] {
            return Err(Error::BoundaryVertex(start));
        }
        let mut vertices = vec![start];
        let mut edges: Vec<HalfEdge> = Vec::new();
        self.in_path[start] = 0;
        self.offset[start] = [0, 0];
        let mut steps: u64 = 0;
        let result = loop {
            if steps >= self.step_cap {
                break Err(Error::StepCapExceeded { cap: self.step_cap });
            }
            steps += 1;
            let cur = *vertices.last().expect("path is never empty");
            let h = match walk_step(g, cur, rng) {
                Ok(h) => h,
                Err(e) => break Err(e),
            };
            let u = g.head(h);
            if absorbing[u] || g.wired[u] {
                edges.push(h);
                vertices.push(u);
                break Ok(Termination::HitAbsorbing { vertex: u });
            }
            let dh = g.hom(h);
            let off = [self.offset[cur][0] + dh[0], self.offset[cur][1] + dh[1]];
            let idx = self.in_path[u];
            if idx == NOT_ON_PATH {
                self.in_path[u] = vertices.len() as u32;
                self.offset[u] = off;
                vertices.push(u);
                edges.push(h);
            } else if self.offset[u] == off {
                let keep = idx as usize + 1;
                for &w in &vertices[keep..] {
                    self.in_path[w] = NOT_ON_PATH;
                }
                vertices.truncate(keep);
                edges.truncate(keep - 1);
            } else {
                let o = self.offset[u];
                edges.push(h);
                break Ok(Termination::NoncontractibleCycle {
                    start: idx as usize,
                    hom_class: [off[0] - o[0], off[1] - o[1]],
                });
            }
        };
        for &w in &vertices {
            self.in_path[w] = NOT_ON_PATH;
        }
        result.map(|termination| LoopErasedPath { vertices, edges, termination })
    }
}

/// Loop-erased walk on the primal graph of `g`.
pub fn loop_erased_walk<R: Rng + ?Sized>(
    g: &SurfaceGraph,
    start: usize,
    absorbing: &[bool],
    rng: &mut R,
) -> Result<LoopErasedPath> {
    Walker::new(&g.primal).walk(&g.primal, start, absorbing, rng)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrsfCycle {
    /// Cycle vertices starting at the smallest index, in out-edge order.
    pub vertices: Vec<usize>,
    #[serde(default, skip_serializing)]
    pub edges: Vec<HalfEdge>,
    pub hom_class: Hom,
}

/// Wired oriented cycle-rooted spanning forest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientedCrsf {
    pub out_edge: Vec<Option<HalfEdge>>,
    pub cycles: Vec<CrsfCycle>,
    /// Component label per vertex: cycle components first (labelled by cycle
    /// index), then one label per wired root.
    #[serde(skip)]
    pub components: Vec<usize>,
}

/// Cycles and component labels of the functional graph `out` on `g`.
pub(crate) fn functional_structure(
    g: &EmbeddedGraph,
    out: &[Option<HalfEdge>],
) -> Result<(Vec<CrsfCycle>, Vec<usize>)> {
    let n = g.n_vertices();
    if out.len() != n {
        return Err(Error::Inconsistent(format!("out-edge map has {} entries for {n} vertices", out.len())));
    }
    const UNSEEN: usize = usize::MAX;
    const ACTIVE: usize = usize::MAX - 1;
    // root[v]: cycle index, or `n + wired vertex`, once resolved.
    let mut root = vec![UNSEEN; n];
    let mut cycles = Vec::new();
    let mut stack = Vec::new();
    for s in 0..n {
        let mut v = s;
        while root[v] == UNSEEN {
            root[v] = ACTIVE;
            stack.push(v);
            match out[v] {
                None => break,
                Some(h) => {
                    if g.tail(h) != v {
                        return Err(Error::Inconsistent(format!("out-edge of {v} does not leave it")));
                    }
                    v = g.head(h);
                }
            }
        }
        let r = if root[v] == ACTIVE {
            match out[v] {
                None => n + v,
                Some(_) => {
                    let pos = stack.iter().position(|&x| x == v).expect("active vertex is on the stack");
                    let min_v = *stack[pos..].iter().min().expect("cycle is nonempty");
                    let mut vertices = Vec::new();
                    let mut edges = Vec::new();
                    let mut hom = [0, 0];
                    let mut x = min_v;
                    loop {
                        let h = out[x].expect("cycle vertex has an out-edge");
                        let dh = g.hom(h);
                        hom = [hom[0] + dh[0], hom[1] + dh[1]];
                        vertices.push(x);
                        edges.push(h);
                        x = g.head(h);
                        if x == min_v {
                            break;
                        }
                    }
                    cycles.push(CrsfCycle { vertices, edges, hom_class: hom });
                    cycles.len() - 1
                }
            }
        } else {
            root[v]
        };
        for w in stack.drain(..) {
            root[w] = r;
        }
    }
    let k = cycles.len();
    let mut relabel = std::collections::HashMap::new();
    let components = root
        .iter()
        .map(|&r| {
            if r < k {
                r
            } else {
                let next = k + relabel.len();
                *relabel.entry(r).or_insert(next)
            }
        })
        .collect();
    Ok((cycles, components))
}

impl OrientedCrsf {
    /// Validates an out-edge map: wired vertices have none, all others one,
    /// and every cycle is noncontractible.
    pub fn from_out_edges(g: &SurfaceGraph, out_edge: Vec<Option<HalfEdge>>) -> Result<Self> {
        if out_edge.len() != g.primal.n_vertices() {
            return Err(Error::Inconsistent(format!(
                "out-edge map has {} entries for {} vertices",
                out_edge.len(),
                g.primal.n_vertices()
            )));
        }
        for (v, o) in out_edge.iter().enumerate() {
            if o.is_some() == g.primal.wired[v] {
                return Err(Error::Inconsistent(format!("vertex {v} has a wrong number of out-edges")));
            }
        }
        let (cycles, components) = functional_structure(&g.primal, &out_edge)?;
        if let Some(c) = cycles.iter().find(|c| c.hom_class == [0, 0]) {
            return Err(Error::ContractibleCycle { vertex: c.vertices[0] });
        }
        Ok(Self { out_edge, cycles, components })
    }

    /// Number of cycles.
    pub fn k(&self) -> usize {
        self.cycles.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and revalidates a serialized forest.
    pub fn from_json(g: &SurfaceGraph, s: &str) -> Result<Self> {
        let raw: OrientedCrsf = serde_json::from_str(s)?;
        let parsed = Self::from_out_edges(g, raw.out_edge)?;
        let claimed: Vec<_> = raw.cycles.iter().map(|c| (&c.vertices, c.hom_class)).collect();
        let actual: Vec<_> = parsed.cycles.iter().map(|c| (&c.vertices, c.hom_class)).collect();
        if claimed != actual {
            return Err(Error::Inconsistent("serialized cycles do not match the out-edge map".into()));
        }
        Ok(parsed)
    }
}

/// Samples a wired oriented CRSF with law proportional to the product of the
/// weights of its edges. Walks start from vertices in `vertex_order` (default
/// index order).
pub fn sample_crsf<R: Rng + ?Sized>(
    g: &SurfaceGraph,
    rng: &mut R,
    vertex_order: Option<&[usize]>,
) -> Result<OrientedCrsf> {
    let mut walker = Walker::new(&g.primal);
    sample_crsf_with(g, &mut walker, rng, vertex_order)
}

pub fn sample_crsf_with<R: Rng + ?Sized>(
    g: &SurfaceGraph,
    walker: &mut Walker,
    rng: &mut R,
    vertex_order: Option<&[usize]>,
) -> Result<OrientedCrsf> {
    let p = &g.primal;
    let n = p.n_vertices();
    let mut in_tree = p.wired.clone();
    let mut out_edge = vec![None; n];
    let default_order: Vec<usize>;
    let order = match vertex_order {
        Some(o) => o,
        None => {
            default_order = (0..n).collect();
            &default_order
        }
    };
    for &v in order {
        if in_tree[v] {
            continue;
        }
        let path = walker.walk(p, v, &in_tree, rng)?;
        for (i, &h) in path.edges.iter().enumerate() {
            let x = path.vertices[i];
            out_edge[x] = Some(h);
            in_tree[x] = true;
        }
    }
    if let Some(v) = (0..n).find(|&v| !in_tree[v]) {
        return Err(Error::Inconsistent(format!("vertex order does not cover vertex {v}")));
    }
    OrientedCrsf::from_out_edges(g, out_edge)
}

/// Length and homology class of every cycle.
pub fn cycle_census(crsf: &OrientedCrsf) -> Vec<(usize, Hom)> {
    crsf.cycles.iter().map(|c| (c.vertices.len(), c.hom_class)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_annulus, build_torus, Weights};

    #[test]
    fn step_probabilities() {
        let g = build_torus(3, 3, &Weights::Uniform).unwrap();
        let mut rng = sample_rng(1, 0);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            let h = walk_step(&g.primal, 4, &mut rng).unwrap();
            let k = g.primal.out_edges(4).iter().position(|&x| x == h).unwrap();
            counts[k] += 1;
        }
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn boundary_start_rejected() {
        let g = build_annulus(4, 3, &Weights::Uniform).unwrap();
        let mut rng = sample_rng(1, 0);
        assert!(matches!(walk_step(&g.primal, 0, &mut rng), Err(Error::BoundaryVertex(0))));
    }

    #[test]
    fn torus_walks_close_noncontractible_cycles() {
        let g = build_torus(4, 4, &Weights::Uniform).unwrap();
        let none = vec![false; 16];
        for i in 0..200 {
            let mut rng = sample_rng(7, i);
            let p = loop_erased_walk(&g, (i % 16) as usize, &none, &mut rng).unwrap();
            match p.termination {
                Termination::NoncontractibleCycle { start, hom_class } => {
                    assert_ne!(hom_class, [0, 0]);
                    assert_eq!(g.primal.hom_sum(&p.edges[start..]), hom_class);
                    assert_eq!(p.edges.len(), p.vertices.len());
                }
                t => panic!("unexpected {t:?}"),
            }
        }
    }

    #[test]
    fn step_cap_is_reported() {
        let g = build_torus(8, 8, &Weights::Uniform).unwrap();
        let mut w = Walker::new(&g.primal);
        w.step_cap = 1;
        let mut rng = sample_rng(3, 0);
        let none = vec![false; 64];
        let r = w.walk(&g.primal, 0, &none, &mut rng);
        assert!(matches!(r, Err(Error::StepCapExceeded { cap: 1 })));
    }

    #[test]
    fn crsf_invariants() {
        let g = build_annulus(5, 4, &Weights::Uniform).unwrap();
        for i in 0..100 {
            let mut rng = sample_rng(11, i);
            let t = sample_crsf(&g, &mut rng, None).unwrap();
            let n_out = t.out_edge.iter().filter(|o| o.is_some()).count();
            assert_eq!(n_out, g.interior_vertices().count());
            assert!(t.cycles.iter().all(|c| c.hom_class[0].abs() == 1));
            let json = t.to_json().unwrap();
            assert_eq!(OrientedCrsf::from_json(&g, &json).unwrap(), t);
        }
    }

    #[test]
    fn contractible_map_rejected() {
        let g = build_torus(2, 2, &Weights::Uniform).unwrap();
        // 0 -> 1 east and 1 -> 0 back along the same edge: contractible 2-cycle.
        let mut out = vec![None; 4];
        out[0] = Some(HalfEdge::new(0, false));
        out[1] = Some(HalfEdge::new(0, true));
        out[2] = Some(HalfEdge::new(1, true));
        out[3] = Some(HalfEdge::new(3, true));
        assert!(matches!(OrientedCrsf::from_out_edges(&g, out), Err(Error::ContractibleCycle { .. })));
    }
}
