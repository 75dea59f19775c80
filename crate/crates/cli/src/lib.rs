//! Argument handling shared by the `surface-dimers` and `oracle` binaries.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use surface_dimers::experiments::{ExperimentConfig, Law, Statistic, TestFunction};
use surface_dimers::surface::TopologyKind;
use surface_dimers::GraphSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Torus,
    Annulus,
}

impl From<TopologyArg> for TopologyKind {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Torus => TopologyKind::Torus,
            TopologyArg::Annulus => TopologyKind::Annulus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    /// CRSF law with uniformly oriented dual cycles.
    Wilson,
    /// Dimer law by importance weighting.
    TempIs,
    /// Dimer law by rejection.
    TempRej,
}

/// Graph selection; `--weights` reads a JSON table of `[w(e), w(-e)]` rows.
#[derive(Clone, Debug, Default, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum, global = true)]
    pub topology: Option<TopologyArg>,
    /// Grid size: NX NY on the torus, angular and radial counts on the annulus.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"], global = true)]
    pub dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
}

impl GraphArgs {
    /// Applies the given flags on top of `base`.
    pub fn apply(&self, base: &mut GraphSpec) -> Result<()> {
        if let Some(t) = self.topology {
            base.topology = t.into();
        }
        if let Some(d) = &self.dims {
            base.dims = [d[0], d[1]];
        }
        if let Some(p) = &self.weights {
            base.weights = Some(serde_json::from_str(&read_input(p)?).context("parsing weight table")?);
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<GraphSpec> {
        let mut spec = GraphSpec { topology: TopologyKind::Torus, dims: [2, 2], weights: None };
        self.apply(&mut spec)?;
        Ok(spec)
    }
}

/// Flags common to every sampling command; a `--config` file supplies the
/// starting values and explicit flags override them.
#[derive(Clone, Debug, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, global = true)]
    pub law: Option<LawArg>,
    /// Largest accepted `k†` under `--law temp-rej`.
    #[arg(long, global = true)]
    pub k_cap: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Experiment configuration as JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

pub const DEFAULT_K_CAP: usize = 8;

impl RunArgs {
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json(&read_input(p)?).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig {
                graph: GraphSpec { topology: TopologyKind::Torus, dims: [16, 16], weights: None },
                law: Law::Wilson,
                n_samples: 1000,
                seed: 0,
                workers: 1,
                statistics: vec![Statistic::LoopCount, Statistic::Instanton, Statistic::SmoothedHeight],
                test_function: TestFunction::default(),
            },
        };
        self.graph.apply(&mut c.graph)?;
        let k_cap = match (self.k_cap, c.law) {
            (Some(k), _) => k,
            (None, Law::TemperleyanRejection { k_cap }) => k_cap,
            (None, _) => DEFAULT_K_CAP,
        };
        c.law = match self.law {
            Some(LawArg::Wilson) => Law::Wilson,
            Some(LawArg::TempIs) => Law::TemperleyanImportance,
            Some(LawArg::TempRej) => Law::TemperleyanRejection { k_cap },
            None => match c.law {
                Law::TemperleyanRejection { .. } => Law::TemperleyanRejection { k_cap },
                other => other,
            },
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.samples {
            c.n_samples = n;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Reads a file, or standard input for `-`.
pub fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to `path`, or standard output when absent.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}
