//! Config-driven Monte Carlo campaigns: loop-count tails, instanton
//! histograms and moments of the smoothed height, under the Wilson law or the
//! Temperleyan law (by importance weighting or rejection).
//!
//! Every sample `i` draws from its own stream `sample_rng(seed, i)` and the
//! per-sample records are reduced in index order, so a report depends only on
//! the configuration, never on the number of workers.

mod svg;

pub use svg::{render_svg, RenderItem, SVG_GRID_CAP};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::height::{height_field, height_one_form, reference_flow, HeightField, ReferenceFlow};
use crate::surface::{GraphSpec, LiftedFace, SuperpositionGraph, SurfaceGraph, Topology};
use crate::temperley::{sample_temperleyan_pair, temperley_map, PairMode};
use crate::wilson::{sample_rng, Walker};

/// Sampling law of the Temperleyan pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    /// Wilson CRSF law with uniformly random dual cycle orientations.
    Wilson,
    /// Dimer law, by weighting Wilson samples with `2^{k†}`.
    TemperleyanImportance,
    /// Dimer law, by accepting Wilson samples with probability `2^{k† - k_cap}`.
    TemperleyanRejection { k_cap: usize },
}

impl Law {
    pub fn mode(self) -> PairMode {
        match self {
            Law::Wilson => PairMode::WilsonUniform,
            Law::TemperleyanImportance => PairMode::Importance,
            Law::TemperleyanRejection { k_cap } => PairMode::Rejection { k_cap },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Number of primal cycles `K`.
    LoopCount,
    /// Instanton `(a, b)`: height gained along one period in x and y.
    Instanton,
    /// Moments 1 to 4 of the smoothed height.
    SmoothedHeight,
}

/// Raised-cosine bump `Π_axis (1 + cos(π d / r)) / 2` on `|d| < r` along each
/// axis, in fractional coordinates of the fundamental domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Bump {
    pub fn eval(&self, p: [f64; 2], periodic: [bool; 2]) -> f64 {
        let mut v = 1.0;
        for axis in 0..2 {
            let mut d = p[axis] - self.center[axis];
            if periodic[axis] {
                d -= d.round();
            }
            if d.abs() >= self.radius {
                return 0.0;
            }
            v *= (1.0 + (PI * d / self.radius).cos()) / 2.0;
        }
        v
    }
}

/// Mean-zero test function `f⁺ - f⁻`; each bump is normalised to unit mass
/// over the faces, so the discrete integral vanishes exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub plus: Bump,
    pub minus: Bump,
}

impl Default for TestFunction {
    fn default() -> Self {
        Self {
            plus: Bump { center: [0.25, 0.25], radius: 0.2 },
            minus: Bump { center: [0.75, 0.75], radius: 0.2 },
        }
    }
}

impl TestFunction {
    /// Checks that the supports are disjoint and inside the domain.
    pub fn validate(&self, topology: Topology) -> Result<()> {
        let periodic = periodic_axes(topology);
        for b in [self.plus, self.minus] {
            if !(b.radius > 0.0 && b.radius <= 0.5) {
                return Err(Error::Config(format!("bump radius {} must lie in (0, 0.5]", b.radius)));
            }
            for axis in 0..2 {
                if !periodic[axis] && (b.center[axis] - b.radius < 0.0 || b.center[axis] + b.radius > 1.0) {
                    return Err(Error::Config("bump leaves the fundamental domain".into()));
                }
            }
        }
        let sep = (0..2)
            .map(|axis| {
                let mut d = (self.plus.center[axis] - self.minus.center[axis]).abs();
                if periodic[axis] {
                    d = d.min(1.0 - d);
                }
                d
            })
            .fold(0.0, f64::max);
        if sep < self.plus.radius + self.minus.radius {
            return Err(Error::Config("bump supports overlap".into()));
        }
        Ok(())
    }

    /// Weight of every canonical face of `G`.
    pub fn face_weights(&self, s: &SuperpositionGraph) -> Result<Vec<f64>> {
        let periodic = periodic_axes(s.topology);
        let coords: Vec<[f64; 2]> = (0..s.faces.len()).map(|f| fractional(s, f)).collect();
        let plus: Vec<f64> = coords.iter().map(|&p| self.plus.eval(p, periodic)).collect();
        let minus: Vec<f64> = coords.iter().map(|&p| self.minus.eval(p, periodic)).collect();
        let (mp, mm) = (pairwise_sum(&plus), pairwise_sum(&minus));
        if mp <= 0.0 || mm <= 0.0 {
            return Err(Error::Config("a bump covers no face of G".into()));
        }
        Ok(plus.iter().zip(&minus).map(|(p, m)| p / mp - m / mm).collect())
    }
}

fn periodic_axes(t: Topology) -> [bool; 2] {
    let p = t.periods();
    [p[0].is_some(), p[1].is_some()]
}

/// Position of a face midpoint in fractional coordinates of the fundamental domain.
fn fractional(s: &SuperpositionGraph, f: usize) -> [f64; 2] {
    let m = s.face_mid(LiftedFace::new(f, [0, 0]));
    let (nx, ny) = s.topology.dims();
    let width = 4.0 * nx as f64;
    let height = match s.topology {
        Topology::Torus { .. } => 4.0 * ny as f64,
        Topology::Annulus { .. } => 4.0 * (ny as f64 - 1.0),
    };
    [m.x as f64 / width, m.y as f64 / height]
}

/// Sum by recursive halving, for accuracy and a fixed evaluation order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub law: Law,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub statistics: Vec<Statistic>,
    #[serde(default)]
    pub test_function: TestFunction,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.graph.topology().validate()?;
        self.test_function.validate(self.graph.topology())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

/// Estimate of an expectation with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// What one sample contributes to a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub k: usize,
    pub k_dagger: usize,
    /// Importance weight (1 except under importance weighting).
    pub weight: f64,
    /// Instanton in units of 1/8.
    pub instanton: Option<[i64; 2]>,
    /// `Σ_f f(m_f) h(f)` in height units.
    pub smoothed: Option<f64>,
    pub proposals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub n_samples: usize,
    /// Kish effective sample size of the weights.
    pub effective_samples: f64,
    /// Proposals per accepted sample under rejection sampling.
    pub proposals_per_sample: f64,
    /// Normalised (importance-weighted) distribution of `K`.
    pub k_histogram: BTreeMap<usize, f64>,
    pub k_mean: Estimate,
    /// Normalised distribution of the instanton `(a, b)` in units of 1/8.
    pub instanton_histogram: Vec<([i64; 2], f64)>,
    /// `E[X^p]` for `p = 1..=4`, `X` the smoothed height.
    pub smoothed_moments: Vec<Estimate>,
    pub runtime_seconds: f64,
}

/// Shared read-only state of a campaign.
pub struct Campaign {
    pub graph: SurfaceGraph,
    pub superposition: SuperpositionGraph,
    pub reference: ReferenceFlow,
    pub face_weights: Vec<f64>,
    pub config: ExperimentConfig,
}

impl Campaign {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let graph = config.graph.build()?;
        let superposition = graph.superpose()?;
        let reference = reference_flow(&superposition)?;
        let face_weights = config.test_function.face_weights(&superposition)?;
        Ok(Self { graph, superposition, reference, face_weights, config: config.clone() })
    }

    fn needs_height(&self) -> bool {
        self.config.statistics.iter().any(|s| matches!(s, Statistic::Instanton | Statistic::SmoothedHeight))
    }

    /// Draws sample `index` and the height field of its matching, if requested.
    pub fn sample(&self, walker: &mut Walker, index: u64) -> Result<(SampleRecord, Option<HeightField>)> {
        let mut rng = sample_rng(self.config.seed, index);
        let wp = sample_temperleyan_pair(&self.graph, walker, &mut rng, self.config.law.mode())?;
        let mut record = SampleRecord {
            k: wp.pair.crsf.k(),
            k_dagger: wp.pair.dual.k_dagger(),
            weight: wp.weight,
            instanton: None,
            smoothed: None,
            proposals: wp.proposals,
        };
        if !self.needs_height() {
            return Ok((record, None));
        }
        let s = &self.superposition;
        let m = temperley_map(&self.graph, s, &wp.pair.crsf, &wp.pair.dual)?;
        let form = height_one_form(s, &m, &self.reference)?;
        let hf = height_field(s, &form, 0)?;
        record.instanton = Some([hf.a, hf.b]);
        let terms: Vec<f64> = hf.heights.iter().zip(&self.face_weights).map(|(&h, &w)| w * h as f64).collect();
        record.smoothed = Some(pairwise_sum(&terms) / 8.0);
        Ok((record, Some(hf)))
    }

    /// All sample records, in index order.
    pub fn records(&self) -> Result<Vec<SampleRecord>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            (0..self.config.n_samples as u64)
                .into_par_iter()
                .map_init(|| Walker::new(&self.graph.primal), |w, i| self.sample(w, i).map(|r| r.0))
                .collect()
        })
    }
}

/// Runs a campaign and reduces its records into a report.
pub fn run_campaign(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let campaign = Campaign::new(config)?;
    let records = campaign.records()?;
    let mut report = summarize(config, &records);
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Self-normalised weighted mean with its delta-method standard error.
pub fn weighted_estimate(values: &[f64], weights: &[f64]) -> Estimate {
    let wsum = pairwise_sum(weights);
    let wv: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    let mean = pairwise_sum(&wv) / wsum;
    let dev: Vec<f64> = values.iter().zip(weights).map(|(v, w)| (w * (v - mean)).powi(2)).collect();
    let n = values.len() as f64;
    // Unbiased in the unweighted case.
    let correction = if n > 1.0 { n / (n - 1.0) } else { 0.0 };
    Estimate { value: mean, std_error: (pairwise_sum(&dev) * correction).sqrt() / wsum }
}

/// Reduces records (in index order) into a report with zero runtime.
pub fn summarize(config: &ExperimentConfig, records: &[SampleRecord]) -> ExperimentReport {
    let weights: Vec<f64> = records.iter().map(|r| r.weight).collect();
    let wsum = pairwise_sum(&weights);
    let w2: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let effective_samples = wsum * wsum / pairwise_sum(&w2);

    let mut k_lists: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        k_lists.entry(r.k).or_default().push(r.weight);
    }
    let k_histogram = k_lists.into_iter().map(|(k, ws)| (k, pairwise_sum(&ws) / wsum)).collect();
    let ks: Vec<f64> = records.iter().map(|r| r.k as f64).collect();
    let k_mean = weighted_estimate(&ks, &weights);

    let mut inst: BTreeMap<[i64; 2], Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(ab) = r.instanton {
            inst.entry(ab).or_default().push(r.weight);
        }
    }
    let instanton_histogram = inst.into_iter().map(|(ab, ws)| (ab, pairwise_sum(&ws) / wsum)).collect();

    let smoothed: Vec<(f64, f64)> = records.iter().filter_map(|r| r.smoothed.map(|x| (x, r.weight))).collect();
    let smoothed_moments = if smoothed.is_empty() {
        Vec::new()
    } else {
        let ws: Vec<f64> = smoothed.iter().map(|p| p.1).collect();
        (1..=4)
            .map(|p| {
                let xs: Vec<f64> = smoothed.iter().map(|q| q.0.powi(p)).collect();
                weighted_estimate(&xs, &ws)
            })
            .collect()
    };
    let proposals: usize = records.iter().map(|r| r.proposals).sum();
    ExperimentReport {
        config: config.clone(),
        n_samples: records.len(),
        effective_samples,
        proposals_per_sample: proposals as f64 / records.len().max(1) as f64,
        k_histogram,
        k_mean,
        instanton_histogram,
        smoothed_moments,
        runtime_seconds: 0.0,
    }
}

/// Total variation distance between two normalised histograms.
pub fn total_variation<K: Ord + Clone>(p: &[(K, f64)], q: &[(K, f64)]) -> f64 {
    let mut all: BTreeMap<K, (f64, f64)> = BTreeMap::new();
    for (k, v) in p {
        all.entry(k.clone()).or_default().0 += v;
    }
    for (k, v) in q {
        all.entry(k.clone()).or_default().1 += v;
    }
    all.values().map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// One row of the survival function of `K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub k: usize,
    /// Number of samples with `K >= k`.
    pub at_least: usize,
    pub probability: f64,
    /// 95% Wilson-score interval.
    pub lower: f64,
    pub upper: f64,
}

/// Minimum number of samples for a tail report.
pub const MIN_TAIL_SAMPLES: usize = 1000;

/// Empirical `P(K >= k)` for `k = 0..=max K`, with Wilson-score intervals.
pub fn loop_tail_report(ks: &[usize]) -> Result<Vec<TailRow>> {
    if ks.len() < MIN_TAIL_SAMPLES {
        return Err(Error::Config(format!("tail report needs at least {MIN_TAIL_SAMPLES} samples, got {}", ks.len())));
    }
    let z = Normal::standard().inverse_cdf(0.975);
    let n = ks.len() as f64;
    let max = ks.iter().copied().max().unwrap_or(0);
    Ok((0..=max + 1)
        .map(|k| {
            let at_least = ks.iter().filter(|&&x| x >= k).count();
            let p = at_least as f64 / n;
            let denom = 1.0 + z * z / n;
            let centre = (p + z * z / (2.0 * n)) / denom;
            let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
            TailRow { k, at_least, probability: p, lower: (centre - half).clamp(0.0, p), upper: (centre + half).clamp(p, 1.0) }
        })
        .collect())
}

/// Symmetric edge weights drawn uniformly from `[1 - amplitude, 1 + amplitude]`.
pub fn perturbed_weights(topology: Topology, amplitude: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::Config(format!("perturbation amplitude {amplitude} must lie in [0, 1)")));
    }
    let g = crate::surface::SurfaceGraph::build(topology, &crate::surface::Weights::Uniform)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..g.primal.n_edges())
        .map(|_| {
            let w = 1.0 + amplitude * (2.0 * rng.random::<f64>() - 1.0);
            [w, w]
        })
        .collect())
}
