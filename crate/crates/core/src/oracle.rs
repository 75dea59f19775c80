//! Exhaustive ground truth on tiny instances: all perfect matchings of the
//! superposition graph, all CRSFs, certification of the Temperley bijection,
//! and chi-square validation of the CRSF sampler against the exact law.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::surface::{HalfEdge, SuperpositionGraph, SurfaceGraph, Topology};
use crate::temperley::{dual_forest, orient_dual, temperley_inverse, temperley_map, DimerConfig};
use crate::wilson::{sample_crsf, sample_rng, OrientedCrsf};

/// Default cap on the number of white vertices for matching enumeration.
pub const MATCHING_WHITE_CAP: usize = 24;
/// Default cap on the number of non-boundary primal vertices for CRSF enumeration.
pub const CRSF_VERTEX_CAP: usize = 12;
/// Cells with a smaller expected count are pooled in the chi-square test.
pub const MIN_EXPECTED: f64 = 5.0;

/// All perfect matchings of `G`, in lexicographic order of `white_to_black`.
pub fn enumerate_matchings(s: &SuperpositionGraph, white_cap: usize) -> Result<Vec<DimerConfig>> {
    let nw = s.n_white();
    if nw > white_cap {
        return Err(Error::SizeCap { what: "white vertex count", size: nw, cap: white_cap });
    }
    if nw != s.n_black() {
        return Ok(Vec::new());
    }
    let options: Vec<Vec<usize>> = (0..nw)
        .map(|w| {
            let mut b: Vec<usize> = s.vertex_edges(w).iter().map(|&e| s.edges[e].black).collect();
            b.sort_unstable();
            b.dedup();
            b
        })
        .collect();
    Ok(perfect_matchings(&options, s.n_vertices())
        .into_iter()
        .map(|white_to_black| DimerConfig { white_to_black })
        .collect())
}

/// All perfect matchings of a bipartite graph given as the black neighbours
/// (ids below `n_black`) of each white vertex, by backtracking over whites.
pub fn perfect_matchings(options: &[Vec<usize>], n_black: usize) -> Vec<Vec<usize>> {
    fn rec(options: &[Vec<usize>], used: &mut [bool], current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let w = current.len();
        if w == options.len() {
            out.push(current.clone());
            return;
        }
        for &b in &options[w] {
            if !used[b] {
                used[b] = true;
                current.push(b);
                rec(options, used, current, out);
                current.pop();
                used[b] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(options, &mut vec![false; n_black], &mut Vec::with_capacity(options.len()), &mut out);
    out
}

/// One CRSF from the enumeration with its cycle counts and weight `Π w(e)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedCrsf {
    pub crsf: OrientedCrsf,
    pub k: usize,
    pub k_dagger: usize,
    pub weight: f64,
}

/// All CRSFs of `g`: every choice of one out-edge per non-boundary vertex
/// whose cycles are all noncontractible, in lexicographic order of choices.
pub fn enumerate_crsfs(g: &SurfaceGraph, vertex_cap: usize) -> Result<Vec<EnumeratedCrsf>> {
    let free: Vec<usize> = (0..g.primal.n_vertices()).filter(|&v| !g.primal.wired[v]).collect();
    if free.len() > vertex_cap {
        return Err(Error::SizeCap { what: "non-boundary vertex count", size: free.len(), cap: vertex_cap });
    }
    let choices: Vec<&[HalfEdge]> = free.iter().map(|&v| g.primal.out_edges(v)).collect();
    if let Some(i) = choices.iter().position(|c| c.is_empty()) {
        return Err(Error::IsolatedVertex(free[i]));
    }
    // The first vertex's choice partitions the search; parts are merged in order.
    let first = choices.first().map_or(1, |c| c.len());
    let parts: Vec<Result<Vec<EnumeratedCrsf>>> = (0..first)
        .into_par_iter()
        .map(|c0| {
            let mut out = Vec::new();
            let mut digits = vec![0usize; free.len()];
            if let Some(d) = digits.first_mut() {
                *d = c0;
            }
            loop {
                let mut out_edge = vec![None; g.primal.n_vertices()];
                for (i, &v) in free.iter().enumerate() {
                    out_edge[v] = Some(choices[i][digits[i]]);
                }
                match OrientedCrsf::from_out_edges(g, out_edge) {
                    Ok(crsf) => {
                        let k_dagger = dual_forest(g, &crsf)?.k_dagger();
                        let weight = crsf.out_edge.iter().flatten().map(|&h| g.primal.weight(h)).product();
                        out.push(EnumeratedCrsf { k: crsf.k(), k_dagger, weight, crsf });
                    }
                    Err(Error::ContractibleCycle { .. }) => {}
                    Err(e) => return Err(e),
                }
                // Advance the mixed-radix counter over all vertices but the first.
                let mut i = free.len();
                loop {
                    if i <= 1 {
                        return Ok(out);
                    }
                    i -= 1;
                    digits[i] += 1;
                    if digits[i] < choices[i].len() {
                        break;
                    }
                    digits[i] = 0;
                }
            }
        })
        .collect();
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Per-CRSF entry of an [`EnumerationReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrsfRecord {
    pub k: usize,
    pub k_dagger: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub n_samples: usize,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
    /// Number of original cells merged into the pooled cell (0 if none).
    pub pooled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub topology: Topology,
    pub genus: i32,
    pub n_matchings: u64,
    pub n_crsfs: u64,
    pub crsfs: Vec<CrsfRecord>,
    /// `Σ_t 2^{k†(t)}`, the number of Temperleyan pairs.
    pub pair_count: u64,
    /// `Σ_t 2^{k†(t)} Π w(e)`.
    pub weighted_pair_sum: f64,
    /// `k - k† = g - 1` for every CRSF.
    pub cycle_relation: bool,
    /// Distinct pairs map to distinct matchings.
    pub injective: bool,
    /// Both compositions of the bijection and its inverse are the identity.
    pub round_trip: bool,
    pub certified: bool,
    /// First failure found, in enumeration order.
    pub counterexample: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<ChiSquareResult>,
}

/// Exhaustively checks the extended Temperley bijection on `g` with the default caps.
pub fn certify_bijection(g: &SurfaceGraph) -> Result<EnumerationReport> {
    certify_bijection_with(g, MATCHING_WHITE_CAP, CRSF_VERTEX_CAP)
}

pub fn certify_bijection_with(g: &SurfaceGraph, white_cap: usize, vertex_cap: usize) -> Result<EnumerationReport> {
    let s = g.superpose()?;
    let matchings = enumerate_matchings(&s, white_cap)?;
    let crsfs = enumerate_crsfs(g, vertex_cap)?;
    let genus = g.genus();
    let mut counterexample: Option<String> = None;
    let mut fail = |msg: String| {
        if counterexample.is_none() {
            counterexample = Some(msg);
        }
    };

    let mut cycle_relation = true;
    let mut injective = true;
    let mut round_trip = true;
    let mut pair_count = 0u64;
    let mut weighted_pair_sum = 0.0;
    let mut images: HashSet<DimerConfig> = HashSet::new();
    for (i, t) in crsfs.iter().enumerate() {
        if t.k as i64 - t.k_dagger as i64 != genus as i64 - 1 {
            cycle_relation = false;
            fail(format!("CRSF {i}: k = {}, k† = {}, genus {genus}", t.k, t.k_dagger));
        }
        let n_orient = 1u64 << t.k_dagger;
        pair_count += n_orient;
        weighted_pair_sum += n_orient as f64 * t.weight;
        let df = dual_forest(g, &t.crsf)?;
        for mask in 0..n_orient {
            let bits: Vec<bool> = (0..t.k_dagger).map(|j| mask >> j & 1 == 1).collect();
            let dual = orient_dual(g, &df, &bits)?;
            let m = match temperley_map(g, &s, &t.crsf, &dual) {
                Ok(m) => m,
                Err(e) => {
                    round_trip = false;
                    fail(format!("CRSF {i}, orientation {mask}: map failed: {e}"));
                    continue;
                }
            };
            match temperley_inverse(g, &s, &m) {
                Ok((c, d)) if c.out_edge == t.crsf.out_edge && d.out_edge == dual.out_edge => {}
                Ok(_) => {
                    round_trip = false;
                    fail(format!("CRSF {i}, orientation {mask}: inverse returns a different pair"));
                }
                Err(e) => {
                    round_trip = false;
                    fail(format!("CRSF {i}, orientation {mask}: inverse failed: {e}"));
                }
            }
            if !images.insert(m) {
                injective = false;
                fail(format!("CRSF {i}, orientation {mask}: matching already produced by another pair"));
            }
        }
    }
    for (j, m) in matchings.iter().enumerate() {
        let ok = temperley_inverse(g, &s, m)
            .and_then(|(c, d)| temperley_map(g, &s, &c, &d))
            .map(|back| &back == m);
        match ok {
            Ok(true) => {}
            Ok(false) => {
                round_trip = false;
                fail(format!("matching {j}: map of inverse differs"));
            }
            Err(e) => {
                round_trip = false;
                fail(format!("matching {j}: {e}"));
            }
        }
        if !images.contains(m) {
            round_trip = false;
            fail(format!("matching {j} is not the image of any pair"));
        }
    }
    if pair_count != matchings.len() as u64 {
        fail(format!("{} matchings but {pair_count} Temperleyan pairs", matchings.len()));
    }
    let certified = counterexample.is_none();
    Ok(EnumerationReport {
        topology: g.topology,
        genus,
        n_matchings: matchings.len() as u64,
        n_crsfs: crsfs.len() as u64,
        crsfs: crsfs.iter().map(|t| CrsfRecord { k: t.k, k_dagger: t.k_dagger, weight: t.weight }).collect(),
        pair_count,
        weighted_pair_sum,
        cycle_relation,
        injective,
        round_trip,
        certified,
        counterexample,
        chi_square: None,
    })
}

/// Pearson chi-square test of observed counts against expected probabilities.
/// Cells with expected count below [`MIN_EXPECTED`] are pooled into one cell;
/// if that cell is still too small it absorbs the smallest remaining cell.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::Config("counts and probabilities must be nonempty and of equal length".into()));
    }
    let n: u64 = counts.iter().sum();
    let total_p: f64 = probs.iter().sum();
    let mut cells: Vec<(f64, u64)> = probs.iter().zip(counts).map(|(&p, &c)| (n as f64 * p / total_p, c)).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let small = cells.iter().take_while(|c| c.0 < MIN_EXPECTED).count();
    let mut pooled = 0;
    if small > 0 {
        let mut take = small;
        let mut pool = cells[..take].iter().fold((0.0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
        while pool.0 < MIN_EXPECTED && take < cells.len() {
            pool = (pool.0 + cells[take].0, pool.1 + cells[take].1);
            take += 1;
        }
        pooled = take;
        cells.drain(..take);
        cells.push(pool);
    }
    let statistic: f64 = cells.iter().map(|&(e, o)| (o as f64 - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map_err(|e| Error::Config(e.to_string()))?.sf(statistic)
    };
    Ok(ChiSquareResult { n_samples: n as usize, statistic, degrees_of_freedom: dof, p_value, cells: cells.len(), pooled })
}

/// Samples `n_samples` CRSFs from `g` and tests them against the exact law `Π w(e) / Z`.
pub fn chi_square_sampler_test(g: &SurfaceGraph, n_samples: usize, seed: u64) -> Result<ChiSquareResult> {
    chi_square_against(g, g, n_samples, seed)
}

/// Samples from `sampler` and tests against the exact law of `law`; the two
/// graphs must differ at most in their weights.
pub fn chi_square_against(law: &SurfaceGraph, sampler: &SurfaceGraph, n_samples: usize, seed: u64) -> Result<ChiSquareResult> {
    if law.topology != sampler.topology {
        return Err(Error::Config("law and sampler graphs must share their topology".into()));
    }
    let crsfs = enumerate_crsfs(law, CRSF_VERTEX_CAP)?;
    let index: HashMap<&[Option<HalfEdge>], usize> =
        crsfs.iter().enumerate().map(|(i, t)| (t.crsf.out_edge.as_slice(), i)).collect();
    let counts = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let t = sample_crsf(sampler, &mut sample_rng(seed, i), None)?;
            index
                .get(t.out_edge.as_slice())
                .copied()
                .ok_or_else(|| Error::Inconsistent("sampled CRSF missing from the enumeration".into()))
        })
        .try_fold(
            || vec![0u64; crsfs.len()],
            |mut acc, i| {
                acc[i?] += 1;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; crsfs.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let probs: Vec<f64> = crsfs.iter().map(|t| t.weight).collect();
    chi_square(&counts, &probs)
}
