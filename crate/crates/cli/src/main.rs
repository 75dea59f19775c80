//! Command-line front end: sampling, heights, Hodge decomposition, campaign
//! statistics, exhaustive certification, rendering, and conversion between
//! matchings and Temperleyan pairs.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use surface_dimers::experiments::{loop_tail_report, render_svg, Campaign, ExperimentConfig, RenderItem};
use surface_dimers::height::{height_field, height_one_form, hodge_decompose, reference_flow, HeightField, HodgeOptions, HodgeParts};
use surface_dimers::oracle::{certify_bijection, chi_square_sampler_test};
use surface_dimers::temperley::{dual_forest, orient_dual, sample_temperleyan_pair, temperley_inverse, temperley_map, WeightedPair};
use surface_dimers::wilson::Walker;
use surface_dimers::{sample_rng, DimerConfig, OrientedCrsf, SuperpositionGraph, SurfaceGraph};
use surface_dimers_cli::{read_input, write_output, RunArgs};

/// p-value below which a sampler chi-square test counts as a failure.
const CHI_SQUARE_ALPHA: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "surface-dimers", version, about = "Dimers, CRSFs and heights on the torus and the annulus")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one Temperleyan pair and its matching as JSON.
    Sample {
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Height field of one sampled matching as TSV.
    Height {
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long, default_value_t = 0)]
        base_face: usize,
    },
    /// Hodge decomposition of the height one-form of one sampled matching.
    Hodge {
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long, value_enum, default_value_t = HodgePart::Summary)]
        part: HodgePart,
    },
    /// Run a campaign and print its report as JSON.
    Stats {
        /// Include the loop-count tail table (needs at least 1000 samples).
        #[arg(long)]
        tail: bool,
    },
    /// Exhaustively certify the bijection on a small graph.
    Certify {
        /// Also run a chi-square test of the CRSF sampler with this many samples.
        #[arg(long)]
        chi_square: Option<usize>,
    },
    /// Render one sample, or the bare lattice, as SVG.
    Render {
        #[arg(long, value_enum, default_value_t = RenderArg::Dimers)]
        item: RenderArg,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Convert a pair (JSON with `crsf` and `dual_bits`) into its matching.
    ToDimers {
        /// Input JSON file, `-` for standard input.
        input: PathBuf,
    },
    /// Convert a matching (JSON list of `[white, black]`) into its pair.
    ToCrsf {
        /// Input JSON file, `-` for standard input.
        input: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HodgePart {
    Summary,
    Scalar,
    Harmonic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RenderArg {
    Lattice,
    Crsf,
    Dimers,
    Height,
}

struct Sampled {
    graph: SurfaceGraph,
    superposition: SuperpositionGraph,
    pair: WeightedPair,
    dimers: DimerConfig,
}

/// Draws sample `index` of the campaign described by `config` and checks the
/// matching and the inverse bijection.
fn draw(config: &ExperimentConfig, index: u64) -> Result<Sampled> {
    let graph = config.graph.build()?;
    let superposition = graph.superpose()?;
    let mut walker = Walker::new(&graph.primal);
    let pair = sample_temperleyan_pair(&graph, &mut walker, &mut sample_rng(config.seed, index), config.law.mode())?;
    let dimers = temperley_map(&graph, &superposition, &pair.pair.crsf, &pair.pair.dual)?;
    dimers.validate(&superposition)?;
    let (t, d) = temperley_inverse(&graph, &superposition, &dimers)?;
    ensure!(t == pair.pair.crsf && d == pair.pair.dual, "inverse bijection does not recover the sampled pair");
    Ok(Sampled { graph, superposition, pair, dimers })
}

fn heights(s: &Sampled, base_face: usize) -> Result<(surface_dimers::height::HeightOneForm, HeightField)> {
    let reference = reference_flow(&s.superposition)?;
    let form = height_one_form(&s.superposition, &s.dimers, &reference)?;
    form.check_closed(&s.superposition)?;
    let hf = height_field(&s.superposition, &form, base_face)?;
    Ok((form, hf))
}

fn pair_json(crsf: &OrientedCrsf, bits: &[bool], k_dagger: usize) -> Result<Value> {
    Ok(json!({
        "k": crsf.k(),
        "k_dagger": k_dagger,
        "crsf": serde_json::from_str::<Value>(&crsf.to_json()?)?,
        "dual_bits": bits,
    }))
}

fn hodge(s: &Sampled) -> Result<(HodgeParts, HeightField)> {
    let (form, hf) = heights(s, 0)?;
    let opts = HodgeOptions::default();
    let parts = hodge_decompose(&s.superposition, &form, &opts)?;
    ensure!(parts.residual <= opts.tolerance, "Hodge residual {:e} above tolerance {:e}", parts.residual, opts.tolerance);
    let expected = [hf.a as f64, hf.b as f64];
    for (got, want) in parts.instanton.iter().zip(expected) {
        ensure!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "harmonic instanton {:?} differs from {expected:?}", parts.instanton);
    }
    Ok((parts, hf))
}

fn run(cli: Cli) -> Result<String> {
    let config = || cli.run.experiment();
    Ok(match cli.command {
        Command::Sample { index } => {
            let s = draw(&config()?, index)?;
            let mut doc = pair_json(&s.pair.pair.crsf, &s.pair.pair.dual.bits, s.pair.pair.dual.k_dagger())?;
            doc["index"] = json!(index);
            doc["weight"] = json!(s.pair.weight);
            doc["proposals"] = json!(s.pair.proposals);
            doc["dimers"] = serde_json::to_value(&s.dimers)?;
            serde_json::to_string_pretty(&doc)?
        }
        Command::Height { index, base_face } => {
            let s = draw(&config()?, index)?;
            heights(&s, base_face)?.1.to_tsv(&s.superposition)
        }
        Command::Hodge { index, part } => {
            let s = draw(&config()?, index)?;
            let (parts, hf) = hodge(&s)?;
            match part {
                HodgePart::Scalar => parts.scalar_tsv(&s.superposition),
                HodgePart::Harmonic => parts.harmonic_tsv(&s.superposition),
                HodgePart::Summary => serde_json::to_string_pretty(&json!({
                    "index": index,
                    "residual": parts.residual,
                    "iterations": parts.iterations,
                    "divergence": parts.divergence,
                    "curl": parts.curl,
                    "instanton": parts.instanton,
                    "height_instanton": [hf.a, hf.b],
                }))?,
            }
        }
        Command::Stats { tail } => {
            let c = config()?;
            let start = std::time::Instant::now();
            let campaign = Campaign::new(&c)?;
            let records = campaign.records()?;
            let mut report = surface_dimers::experiments::summarize(&c, &records);
            report.runtime_seconds = start.elapsed().as_secs_f64();
            if tail {
                let ks: Vec<usize> = records.iter().map(|r| r.k).collect();
                serde_json::to_string_pretty(&json!({ "report": report, "loop_tail": loop_tail_report(&ks)? }))?
            } else {
                serde_json::to_string_pretty(&report)?
            }
        }
        Command::Certify { chi_square } => {
            let c = config()?;
            let g = c.graph.build()?;
            let mut report = certify_bijection(&g)?;
            if let Some(n) = chi_square {
                report.chi_square = Some(chi_square_sampler_test(&g, n, c.seed)?);
            }
            let text = serde_json::to_string_pretty(&report)?;
            write_output(cli.out.as_deref(), &text)?;
            if !report.certified {
                bail!("bijection not certified: {}", report.counterexample.unwrap_or_default());
            }
            if let Some(chi) = &report.chi_square {
                ensure!(chi.p_value >= CHI_SQUARE_ALPHA, "sampler chi-square p-value {:e} below {CHI_SQUARE_ALPHA:e}", chi.p_value);
            }
            return Ok(String::new());
        }
        Command::Render { item, index } => {
            let c = config()?;
            if item == RenderArg::Lattice {
                render_svg(&c.graph.build()?, &RenderItem::Lattice)?
            } else {
                let s = draw(&c, index)?;
                match item {
                    RenderArg::Crsf => render_svg(&s.graph, &RenderItem::Crsf(&s.pair.pair.crsf))?,
                    RenderArg::Dimers => render_svg(&s.graph, &RenderItem::Dimers(&s.superposition, &s.dimers))?,
                    _ => {
                        let values: Vec<f64> = heights(&s, 0)?.1.heights.iter().map(|&h| h as f64).collect();
                        render_svg(&s.graph, &RenderItem::HeightHeatmap(&s.superposition, &values))?
                    }
                }
            }
        }
        Command::ToDimers { ref input } => {
            let g = config()?.graph.build()?;
            let s = g.superpose()?;
            let doc: Value = serde_json::from_str(&read_input(input)?).context("parsing pair JSON")?;
            let crsf = OrientedCrsf::from_json(&g, &doc["crsf"].to_string())?;
            let bits: Vec<bool> = serde_json::from_value(doc["dual_bits"].clone()).context("reading dual_bits")?;
            let df = dual_forest(&g, &crsf)?;
            ensure!(bits.len() == df.k_dagger(), "{} dual bits given, the dual forest has {} cycles", bits.len(), df.k_dagger());
            let dual = orient_dual(&g, &df, &bits)?;
            let m = temperley_map(&g, &s, &crsf, &dual)?;
            m.validate(&s)?;
            serde_json::to_string(&m)?
        }
        Command::ToCrsf { ref input } => {
            let g = config()?.graph.build()?;
            let s = g.superpose()?;
            let doc: Value = serde_json::from_str(&read_input(input)?).context("parsing matching JSON")?;
            let list = if doc.is_object() { doc["dimers"].clone() } else { doc };
            let m: DimerConfig = serde_json::from_value(list).context("reading matching")?;
            m.validate(&s)?;
            let (t, d) = temperley_inverse(&g, &s, &m)?;
            ensure!(temperley_map(&g, &s, &t, &d)? == m, "forward bijection does not recover the matching");
            serde_json::to_string_pretty(&pair_json(&t, &d.bits, d.k_dagger())?)?
        }
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let text = run(cli)?;
    if !text.is_empty() {
        write_output(out.as_deref(), &text)?;
    }
    Ok(())
}
