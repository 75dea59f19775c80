use std::collections::BTreeMap;

use surface_dimers::oracle::{
    certify_bijection, enumerate_crsfs, enumerate_matchings, perfect_matchings, EnumerationReport, CRSF_VERTEX_CAP,
    MATCHING_WHITE_CAP,
};
use surface_dimers::surface::GKind;
use surface_dimers::{build_annulus, build_torus, SuperpositionGraph, SurfaceGraph, Weights};

/// Permanent of the white-black biadjacency matrix by Ryser's formula,
/// weighting each primal dimer by the weight of its half-edge.
fn permanent(g: &SurfaceGraph, s: &SuperpositionGraph) -> f64 {
    let n = s.n_white();
    let blacks: Vec<usize> = (0..s.n_vertices()).filter(|&b| !s.is_white(b)).collect();
    assert_eq!(blacks.len(), n);
    let mut m = vec![vec![0.0; n]; n];
    for (j, &b) in blacks.iter().enumerate() {
        for &e in s.vertex_edges(b) {
            let w = s.edges[e].white;
            m[w][j] = match s.kinds[b] {
                GKind::Primal { vertex } => {
                    let reversed = g.primal.edges[w].tail != vertex;
                    g.primal.weights[w][reversed as usize]
                }
                _ => 1.0,
            };
        }
    }
    let mut total = 0.0;
    for mask in 1u64..1 << n {
        let mut prod = 1.0;
        for row in &m {
            prod *= (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| row[j]).sum::<f64>();
        }
        let sign = if (n - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += sign * prod;
    }
    total
}

fn pinned(g: &SurfaceGraph, matchings: u64, crsfs: u64) -> EnumerationReport {
    let r = certify_bijection(g).unwrap();
    assert!(r.certified, "{:?}", r.counterexample);
    assert!(r.cycle_relation && r.injective && r.round_trip);
    assert_eq!((r.n_matchings, r.n_crsfs), (matchings, crsfs), "{:?}", g.topology);
    assert_eq!(r.pair_count, r.n_matchings);
    r
}

#[test]
fn pinned_counts() {
    let r = pinned(&build_torus(2, 2, &Weights::Uniform).unwrap(), 272, 128);
    let mut by_k: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for c in &r.crsfs {
        *by_k.entry((c.k, c.k_dagger)).or_default() += 1;
    }
    assert_eq!(by_k, BTreeMap::from([((1, 1), 120), ((2, 2), 8)]));
    pinned(&build_torus(3, 2, &Weights::Uniform).unwrap(), 3108, 1358);
    pinned(&build_annulus(4, 2, &Weights::Uniform).unwrap(), 2, 1);
    pinned(&build_annulus(4, 3, &Weights::Uniform).unwrap(), 392, 194);
}

#[test]
fn three_by_three_torus() {
    pinned(&build_torus(3, 3, &Weights::Uniform).unwrap(), 90176, 43264);
}

#[test]
fn matching_counts_equal_permanents() {
    for g in [
        build_torus(2, 2, &Weights::Uniform).unwrap(),
        build_torus(3, 2, &Weights::Uniform).unwrap(),
        build_annulus(4, 3, &Weights::Uniform).unwrap(),
        build_annulus(5, 3, &Weights::Uniform).unwrap(),
    ] {
        let s = g.superpose().unwrap();
        let n = enumerate_matchings(&s, MATCHING_WHITE_CAP).unwrap().len();
        assert_eq!(n as f64, permanent(&g, &s), "{:?}", g.topology);
    }
}

#[test]
fn single_quad_has_two_matchings() {
    let all = perfect_matchings(&[vec![0, 1], vec![0, 1]], 2);
    assert_eq!(all, vec![vec![0, 1], vec![1, 0]]);
    assert!(perfect_matchings(&[vec![0], vec![0]], 1).is_empty());
}

#[test]
fn relabelling_preserves_counts() {
    let options = vec![vec![0, 1, 3], vec![1, 2], vec![0, 2, 3], vec![2, 3, 0]];
    let base = perfect_matchings(&options, 4).len();
    let perm = [2, 0, 3, 1];
    let relabelled: Vec<Vec<usize>> = options.iter().map(|o| o.iter().map(|&b| perm[b]).collect()).collect();
    assert_eq!(perfect_matchings(&relabelled, 4).len(), base);
    let mut reversed = options.clone();
    reversed.reverse();
    assert_eq!(perfect_matchings(&reversed, 4).len(), base);

    let a = certify_bijection(&build_torus(3, 2, &Weights::Uniform).unwrap()).unwrap();
    let b = certify_bijection(&build_torus(2, 3, &Weights::Uniform).unwrap()).unwrap();
    assert_eq!((a.n_matchings, a.n_crsfs), (b.n_matchings, b.n_crsfs));
}

#[test]
fn cycle_relation_on_enumerations() {
    for (g, shift) in [
        (build_torus(2, 3, &Weights::Uniform).unwrap(), 0i64),
        (build_annulus(5, 3, &Weights::Uniform).unwrap(), 1),
        (build_annulus(3, 4, &Weights::Uniform).unwrap(), 1),
    ] {
        for t in enumerate_crsfs(&g, CRSF_VERTEX_CAP).unwrap() {
            assert_eq!(t.k_dagger as i64, t.k as i64 + shift);
        }
    }
}

#[test]
fn weighted_pairs_match_weighted_matchings() {
    for base in [build_torus(2, 2, &Weights::Uniform).unwrap(), build_annulus(4, 3, &Weights::Uniform).unwrap()] {
        let table: Vec<[f64; 2]> =
            base.primal.edges.iter().map(|e| if e.disp.x != 0 { [2.0, 2.0] } else { [1.0, 1.0] }).collect();
        let g = SurfaceGraph::build(base.topology, &Weights::Table(table)).unwrap();
        let s = g.superpose().unwrap();
        let r = certify_bijection(&g).unwrap();
        assert!(r.certified);
        let uniform = certify_bijection(&base).unwrap();
        assert_eq!(r.n_matchings, uniform.n_matchings);
        assert_eq!(r.weighted_pair_sum, permanent(&g, &s));
        assert!(r.weighted_pair_sum > uniform.weighted_pair_sum);
    }
}

#[test]
fn report_json_round_trip() {
    let r = certify_bijection(&build_annulus(4, 2, &Weights::Uniform).unwrap()).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!(!json.contains("chi_square"));
    let back: EnumerationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}

#[test]
fn caps_refuse_large_instances() {
    assert!(certify_bijection(&build_torus(4, 4, &Weights::Uniform).unwrap()).is_err());
    assert!(enumerate_crsfs(&build_torus(4, 4, &Weights::Uniform).unwrap(), CRSF_VERTEX_CAP).is_err());
}
