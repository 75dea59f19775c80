//! The dual forest of a CRSF, orientation of its cycles, and the extended
//! Temperley bijection between Temperleyan pairs and perfect matchings of the
//! superposition graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{GKind, HalfEdge, SuperpositionGraph, SurfaceGraph};
use crate::wilson::{functional_structure, sample_crsf_with, CrsfCycle, OrientedCrsf, Walker};

/// Complement of a CRSF in the dual graph, with cycles found but not yet oriented.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualForest {
    /// Dual edge `e` is present iff primal edge `e` is unused by the CRSF.
    pub in_forest: Vec<bool>,
    pub components: Vec<usize>,
    /// Cycles in discovery order (by smallest vertex index), each in its
    /// reference orientation: leaving the smallest vertex through the cycle
    /// edge of smaller index.
    pub cycles: Vec<CrsfCycle>,
}

impl DualForest {
    pub fn k_dagger(&self) -> usize {
        self.cycles.len()
    }
}

/// Dual forest with every cycle oriented and every other edge pointing
/// towards its component's cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualOrientedForest {
    pub out_edge: Vec<HalfEdge>,
    /// One bit per cycle in discovery order; `true` reverses the reference orientation.
    pub bits: Vec<bool>,
    pub cycles: Vec<CrsfCycle>,
    #[serde(skip)]
    pub components: Vec<usize>,
}

impl DualOrientedForest {
    pub fn k_dagger(&self) -> usize {
        self.cycles.len()
    }
}

/// A CRSF together with an oriented dual forest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemperleyanPair {
    pub crsf: OrientedCrsf,
    pub dual: DualOrientedForest,
}

/// Perfect matching of the superposition graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DimerConfig {
    /// Black partner of each white vertex.
    pub white_to_black: Vec<usize>,
}

impl Serialize for DimerConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<(usize, usize)> = self.white_to_black.iter().copied().enumerate().collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DimerConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut pairs = Vec::<(usize, usize)>::deserialize(d)?;
        pairs.sort_unstable();
        if pairs.iter().enumerate().any(|(i, p)| p.0 != i) {
            return Err(serde::de::Error::custom("white ids must be 0..n, each listed once"));
        }
        Ok(DimerConfig { white_to_black: pairs.into_iter().map(|p| p.1).collect() })
    }
}

impl DimerConfig {
    /// Checks that every white is matched along an edge of `G` and every black
    /// is matched exactly once.
    pub fn validate(&self, s: &SuperpositionGraph) -> Result<()> {
        if self.white_to_black.len() != s.n_white() {
            return Err(Error::NotAPerfectMatching(format!(
                "{} whites listed, G has {}",
                self.white_to_black.len(),
                s.n_white()
            )));
        }
        let mut used = vec![false; s.n_vertices()];
        for (w, &b) in self.white_to_black.iter().enumerate() {
            if b >= s.n_vertices() || s.is_white(b) || s.edge_between(w, b).is_none() {
                return Err(Error::NotAPerfectMatching(format!("white {w} matched to non-neighbour {b}")));
            }
            if std::mem::replace(&mut used[b], true) {
                return Err(Error::NotAPerfectMatching(format!("black {b} matched twice")));
            }
        }
        Ok(())
    }

    /// Whether the `G` edge `e` carries a dimer.
    pub fn contains(&self, s: &SuperpositionGraph, e: usize) -> bool {
        let edge = &s.edges[e];
        self.white_to_black[edge.white] == edge.black
    }
}

/// The dual forest complementary to `crsf`.
pub fn dual_forest(g: &SurfaceGraph, crsf: &OrientedCrsf) -> Result<DualForest> {
    let dual = &g.dual;
    let mut in_forest = vec![true; dual.n_edges()];
    for h in crsf.out_edge.iter().flatten() {
        in_forest[h.edge()] = false;
    }
    let n = dual.n_vertices();
    let mut degree = vec![0usize; n];
    for (e, edge) in dual.edges.iter().enumerate() {
        if in_forest[e] {
            degree[edge.tail] += 1;
            degree[edge.head] += 1;
        }
    }

    // Components and their edge counts.
    let mut components = vec![usize::MAX; n];
    let mut n_comp = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if components[s] != usize::MAX {
            continue;
        }
        components[s] = n_comp;
        stack.push(s);
        while let Some(x) = stack.pop() {
            for &h in dual.out_edges(x) {
                let y = dual.head(h);
                if in_forest[h.edge()] && components[y] == usize::MAX {
                    components[y] = n_comp;
                    stack.push(y);
                }
            }
        }
        n_comp += 1;
    }
    let mut verts = vec![0usize; n_comp];
    let mut edges = vec![0usize; n_comp];
    for v in 0..n {
        verts[components[v]] += 1;
    }
    for (e, edge) in dual.edges.iter().enumerate() {
        if in_forest[e] {
            edges[components[edge.tail]] += 1;
        }
    }
    if let Some(c) = (0..n_comp).find(|&c| verts[c] != edges[c]) {
        return Err(Error::Inconsistent(format!(
            "dual component {c} has {} vertices and {} edges, so not exactly one cycle",
            verts[c], edges[c]
        )));
    }

    // Strip leaves; what remains are the cycles.
    let mut removed = vec![false; dual.n_edges()];
    let mut queue: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = queue.pop() {
        if degree[v] != 1 {
            continue;
        }
        for &h in dual.out_edges(v) {
            let e = h.edge();
            if in_forest[e] && !removed[e] {
                removed[e] = true;
                degree[v] -= 1;
                let u = dual.head(h);
                degree[u] -= 1;
                if degree[u] == 1 {
                    queue.push(u);
                }
                break;
            }
        }
    }
    let on_cycle = |e: usize| in_forest[e] && !removed[e];
    let mut seen_comp = vec![false; n_comp];
    let mut cycles = Vec::new();
    for s in 0..n {
        if degree[s] == 0 || seen_comp[components[s]] {
            continue;
        }
        seen_comp[components[s]] = true;
        let first = dual
            .out_edges(s)
            .iter()
            .copied()
            .filter(|h| on_cycle(h.edge()))
            .min_by_key(|h| (h.edge(), h.is_reversed()))
            .expect("cycle vertex has cycle edges");
        let mut vertices = vec![s];
        let mut cyc_edges = vec![first];
        let mut x = dual.head(first);
        let mut last = first;
        while x != s {
            let next = dual
                .out_edges(x)
                .iter()
                .copied()
                .find(|h| on_cycle(h.edge()) && h.edge() != last.edge())
                .ok_or_else(|| Error::Inconsistent("broken dual cycle".into()))?;
            vertices.push(x);
            cyc_edges.push(next);
            last = next;
            x = dual.head(next);
        }
        let hom_class = dual.hom_sum(&cyc_edges);
        if hom_class == [0, 0] {
            return Err(Error::Inconsistent(format!("contractible dual cycle through {s}")));
        }
        cycles.push(CrsfCycle { vertices, edges: cyc_edges, hom_class });
    }
    Ok(DualForest { in_forest, components, cycles })
}

/// Orients every dual cycle according to `bits` and the remaining dual edges
/// towards the cycles.
pub fn orient_dual(g: &SurfaceGraph, df: &DualForest, bits: &[bool]) -> Result<DualOrientedForest> {
    if bits.len() != df.cycles.len() {
        return Err(Error::Inconsistent(format!("{} bits for {} dual cycles", bits.len(), df.cycles.len())));
    }
    let dual = &g.dual;
    let n = dual.n_vertices();
    let mut out: Vec<Option<HalfEdge>> = vec![None; n];
    let mut frontier = Vec::new();
    for (c, &flip) in df.cycles.iter().zip(bits) {
        let m = c.vertices.len();
        for i in 0..m {
            if flip {
                out[c.vertices[(i + 1) % m]] = Some(c.edges[i].reverse());
            } else {
                out[c.vertices[i]] = Some(c.edges[i]);
            }
            frontier.push(c.vertices[i]);
        }
    }
    let mut reached = vec![false; n];
    for &v in &frontier {
        reached[v] = true;
    }
    let mut i = 0;
    while i < frontier.len() {
        let x = frontier[i];
        i += 1;
        for &h in dual.out_edges(x) {
            let y = dual.head(h);
            if df.in_forest[h.edge()] && !reached[y] {
                reached[y] = true;
                out[y] = Some(h.reverse());
                frontier.push(y);
            }
        }
    }
    let out_edge: Vec<HalfEdge> = out
        .into_iter()
        .enumerate()
        .map(|(v, o)| o.ok_or_else(|| Error::Inconsistent(format!("dual vertex {v} not reached from a cycle"))))
        .collect::<Result<_>>()?;
    let (cycles, components) = functional_structure(dual, &out_edge.iter().map(|&h| Some(h)).collect::<Vec<_>>())?;
    Ok(DualOrientedForest { out_edge, bits: bits.to_vec(), cycles, components })
}

/// Orients the dual cycles by independent fair coins.
pub fn orient_dual_random<R: Rng + ?Sized>(g: &SurfaceGraph, df: &DualForest, rng: &mut R) -> Result<DualOrientedForest> {
    let bits: Vec<bool> = (0..df.cycles.len()).map(|_| rng.random()).collect();
    orient_dual(g, df, &bits)
}

/// The bijection: each oriented edge of the forest or its dual matches its
/// tail black vertex to the white vertex at the crossing.
pub fn temperley_map(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    crsf: &OrientedCrsf,
    dual: &DualOrientedForest,
) -> Result<DimerConfig> {
    const FREE: usize = usize::MAX;
    let mut white_to_black = vec![FREE; s.n_white()];
    let mut claim = |w: usize, b: usize| -> Result<()> {
        if white_to_black[w] != FREE {
            return Err(Error::Inconsistent(format!("white {w} matched twice")));
        }
        white_to_black[w] = b;
        Ok(())
    };
    for v in g.interior_vertices() {
        let h = crsf.out_edge[v].ok_or_else(|| Error::Inconsistent(format!("vertex {v} lacks an out-edge")))?;
        claim(h.edge(), s.primal_black(v).expect("interior vertex is black"))?;
    }
    for (d, h) in dual.out_edge.iter().enumerate() {
        claim(h.edge(), s.dual_black(d))?;
    }
    if let Some(w) = white_to_black.iter().position(|&b| b == FREE) {
        return Err(Error::Inconsistent(format!("white {w} unmatched")));
    }
    let m = DimerConfig { white_to_black };
    m.validate(s).map_err(|e| Error::Inconsistent(e.to_string()))?;
    Ok(m)
}

/// Inverse of [`temperley_map`]: extends each dimer to the full primal or dual
/// edge through its white vertex.
pub fn temperley_inverse(
    g: &SurfaceGraph,
    s: &SuperpositionGraph,
    dimer: &DimerConfig,
) -> Result<(OrientedCrsf, DualOrientedForest)> {
    dimer.validate(s)?;
    let mut out_primal = vec![None; g.primal.n_vertices()];
    let mut out_dual = vec![None; g.dual.n_vertices()];
    for (w, &b) in dimer.white_to_black.iter().enumerate() {
        match s.kinds[b] {
            GKind::Primal { vertex } => {
                let reversed = g.primal.edges[w].tail != vertex;
                out_primal[vertex] = Some(HalfEdge::new(w, reversed));
            }
            GKind::Dual { vertex } => {
                let reversed = g.dual.edges[w].tail != vertex;
                out_dual[vertex] = Some(HalfEdge::new(w, reversed));
            }
            GKind::White { .. } => unreachable!("validated matching"),
        }
    }
    let crsf = OrientedCrsf::from_out_edges(g, out_primal)?;
    let (dual_cycles, _) = functional_structure(&g.dual, &out_dual)?;
    if let Some(c) = dual_cycles.iter().find(|c| c.hom_class == [0, 0]) {
        return Err(Error::ContractibleCycle { vertex: c.vertices[0] });
    }
    let df = dual_forest(g, &crsf)?;
    let bits: Vec<bool> = df.cycles.iter().map(|c| out_dual[c.vertices[0]] != Some(c.edges[0])).collect();
    let oriented = orient_dual(g, &df, &bits)?;
    if oriented.out_edge.iter().zip(&out_dual).any(|(a, b)| Some(*a) != *b) {
        return Err(Error::Inconsistent("dual out-edges do not form the complementary oriented forest".into()));
    }
    Ok((crsf, oriented))
}

/// Radon-Nikodym factor `2^{k†}` between the dimer law and the Wilson law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnWeight {
    pub k: usize,
    pub k_dagger: usize,
    /// `2^{k†}` when it fits in 62 bits.
    pub exact: Option<u64>,
    pub log2: f64,
}

impl RnWeight {
    pub fn value(&self) -> f64 {
        self.log2.exp2()
    }
}

pub fn rn_weight(g: &SurfaceGraph, k_dagger: usize) -> RnWeight {
    let k = (k_dagger as i64 + g.genus() as i64 - 1).max(0) as usize;
    let exact = (k_dagger <= 62).then(|| 1u64 << k_dagger);
    RnWeight { k, k_dagger, exact, log2: k_dagger as f64 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PairMode {
    /// Wilson CRSF with uniformly oriented dual cycles.
    WilsonUniform,
    /// As `WilsonUniform`, carrying importance weight `2^{k†}`.
    Importance,
    /// Accept with probability `2^{k† - k_cap}`; proposals with `k† > k_cap` are rejected.
    Rejection { k_cap: usize },
}

#[derive(Clone, Debug)]
pub struct WeightedPair {
    pub pair: TemperleyanPair,
    pub weight: f64,
    /// Proposals drawn, including the accepted one.
    pub proposals: usize,
    /// Proposals rejected because `k† > k_cap`.
    pub above_cap: usize,
}

/// Smallest tolerated acceptance rate of the rejection sampler.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Proposals without an acceptance after which the rejection sampler gives up,
/// ten times the expected wait at the smallest tolerated rate.
pub const STARVATION_WINDOW: usize = 100_000;

pub fn sample_temperleyan_pair<R: Rng + ?Sized>(
    g: &SurfaceGraph,
    walker: &mut Walker,
    rng: &mut R,
    mode: PairMode,
) -> Result<WeightedPair> {
    let mut proposals = 0;
    let mut above_cap = 0;
    loop {
        proposals += 1;
        let crsf = sample_crsf_with(g, walker, rng, None)?;
        let df = dual_forest(g, &crsf)?;
        let kd = df.k_dagger();
        let weight = match mode {
            PairMode::WilsonUniform => 1.0,
            PairMode::Importance => rn_weight(g, kd).value(),
            PairMode::Rejection { k_cap } => {
                let accept = kd <= k_cap && rng.random::<f64>() < (kd as f64 - k_cap as f64).exp2();
                if kd > k_cap {
                    above_cap += 1;
                }
                if !accept {
                    if proposals >= STARVATION_WINDOW {
                        return Err(Error::AcceptanceStarved { rate: 1.0 / proposals as f64, proposals });
                    }
                    continue;
                }
                1.0
            }
        };
        let dual = orient_dual_random(g, &df, rng)?;
        return Ok(WeightedPair { pair: TemperleyanPair { crsf, dual }, weight, proposals, above_cap });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_annulus, build_torus, Weights};
    use crate::wilson::{sample_crsf, sample_rng};

    #[test]
    fn cycle_relation_and_roundtrip() {
        for g in [
            build_torus(6, 5, &Weights::Uniform).unwrap(),
            build_annulus(6, 5, &Weights::Uniform).unwrap(),
        ] {
            let s = g.superpose().unwrap();
            for i in 0..200 {
                let mut rng = sample_rng(3, i);
                let t = sample_crsf(&g, &mut rng, None).unwrap();
                let df = dual_forest(&g, &t).unwrap();
                assert_eq!(t.k() as i64 - df.k_dagger() as i64, g.genus() as i64 - 1);
                let d = orient_dual_random(&g, &df, &mut rng).unwrap();
                let m = temperley_map(&g, &s, &t, &d).unwrap();
                let (t2, d2) = temperley_inverse(&g, &s, &m).unwrap();
                assert_eq!(t2, t);
                assert_eq!(d2.out_edge, d.out_edge);
                assert_eq!(d2.bits, d.bits);
            }
        }
    }

    #[test]
    fn flipping_a_bit_changes_only_that_cycle() {
        let g = build_torus(6, 6, &Weights::Uniform).unwrap();
        for i in 0..300 {
            let t = sample_crsf(&g, &mut sample_rng(5, i), None).unwrap();
            let df = dual_forest(&g, &t).unwrap();
            if df.k_dagger() < 2 {
                continue;
            }
            let base = orient_dual(&g, &df, &vec![false; df.k_dagger()]).unwrap();
            let mut bits = vec![false; df.k_dagger()];
            bits[1] = true;
            let flipped = orient_dual(&g, &df, &bits).unwrap();
            let changed: Vec<usize> =
                (0..base.out_edge.len()).filter(|&v| base.out_edge[v] != flipped.out_edge[v]).collect();
            let mut cyc = df.cycles[1].vertices.clone();
            cyc.sort_unstable();
            assert_eq!(changed, cyc);
            return;
        }
        panic!("no sample with two dual cycles");
    }

    #[test]
    fn weights() {
        let g = build_torus(2, 2, &Weights::Uniform).unwrap();
        assert_eq!(rn_weight(&g, 1).exact, Some(2));
        assert_eq!(rn_weight(&g, 2).exact, Some(4));
        assert_eq!(rn_weight(&g, 2).k, 2);
        assert_eq!(rn_weight(&g, 70).exact, None);
        let a = build_annulus(4, 3, &Weights::Uniform).unwrap();
        assert_eq!(rn_weight(&a, 1).k, 0);
    }

    #[test]
    fn dimer_json() {
        let m = DimerConfig { white_to_black: vec![3, 2] };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[0,3],[1,2]]");
        assert_eq!(serde_json::from_str::<DimerConfig>(&s).unwrap(), m);
    }
}
