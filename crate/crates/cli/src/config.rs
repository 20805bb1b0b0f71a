//! Experiment configuration: a TOML file whose fields mirror the command-line
//! flags. Flags given on the command line override the file.

use std::path::{Path, PathBuf};

use clap::Args;
use fusegraph::fusion::{FusionWeights, Iterations, NeighborCap, Normalization, Preset};
use fusegraph::pipeline::{Grid, RunConfig, Scenario};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Raw collection directory (also the source of ids and qrels).
    pub collection: Option<PathBuf>,
    /// Directory of precomputed scores and similarity matrices.
    pub scores: Option<PathBuf>,
    pub scenario: Option<String>,
    pub preset: Option<String>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub m_cap: Option<usize>,
    pub lexical_entailment: Option<bool>,
    /// `text`, `visual`, or a preset name.
    pub baseline: Option<String>,
    #[serde(default)]
    pub params: ParamTable,
    #[serde(default)]
    pub grid: GridTable,
}

/// Single values for a run; the sweep grid falls back to these.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamTable {
    pub k: Option<String>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub iterations: Option<String>,
    pub alpha: Option<String>,
    pub normalization: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTable {
    #[serde(default)]
    pub k: Vec<String>,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub iterations: Vec<String>,
    #[serde(default)]
    pub alpha: Vec<String>,
    #[serde(default)]
    pub normalization: Vec<String>,
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.collection, &mut cfg.scores, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Diffusion and fusion flags shared by every pipeline subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Starting point for all other parameters: cm-default, rw-classic, gd-default.
    #[arg(long)]
    pub preset: Option<String>,
    /// asymmetric (text-only queries) or symmetric.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Nearest neighbors kept by the K operator (integer or `l`).
    #[arg(long)]
    pub k: Option<String>,
    /// Prior weight.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Same-modality mixing weight.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of diffusion steps (integer or `inf`).
    #[arg(long)]
    pub iters: Option<String>,
    /// Late-fusion weights `t,v,tv,vt`.
    #[arg(long)]
    pub alpha: Option<String>,
    /// probability or minmax.
    #[arg(long)]
    pub norm: Option<String>,
    /// Maximum number of candidates kept by the semantic filter.
    #[arg(long)]
    pub m_cap: Option<usize>,
    /// Experiment config (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse<T: std::str::FromStr<Err = fusegraph::Error>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(CliError::from)
}

impl ParamArgs {
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        match &self.config {
            Some(p) => ExperimentConfig::load(p),
            None => Ok(ExperimentConfig::default()),
        }
    }

    /// Resolves preset, file values and flags into one run configuration.
    pub fn resolve(&self, exp: &ExperimentConfig) -> Result<RunConfig, CliError> {
        let scenario: Scenario = match self.scenario.as_deref().or(exp.scenario.as_deref()) {
            Some(s) => parse(s)?,
            None => Scenario::Asymmetric,
        };
        let preset: Preset = match self.preset.as_deref().or(exp.preset.as_deref()) {
            Some(s) => parse(s)?,
            None => Preset::CmDefault,
        };
        let mut cfg = RunConfig::preset(scenario, preset);
        let p = &exp.params;
        let d = &mut cfg.diffusion;
        if let Some(k) = self.k.as_deref().or(p.k.as_deref()) {
            d.k = parse(k)?;
        }
        if let Some(g) = self.gamma.or(p.gamma) {
            d.gamma = g;
        }
        if let Some(b) = self.beta.or(p.beta) {
            d.beta = b;
        }
        if let Some(i) = self.iters.as_deref().or(p.iterations.as_deref()) {
            d.iterations = parse(i)?;
        }
        if let Some(n) = self.norm.as_deref().or(p.normalization.as_deref()) {
            d.normalization = parse(n)?;
        }
        if let Some(a) = self.alpha.as_deref().or(p.alpha.as_deref()) {
            cfg.weights = parse(a)?;
        }
        if let Some(m) = self.m_cap.or(exp.m_cap) {
            cfg.m_cap = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Grid value lists given on the command line; comma-separated except
/// `--grid-alpha`, which is repeated.
#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Comma-separated k values (integers or `l`).
    #[arg(long, value_delimiter = ',')]
    pub grid_k: Vec<String>,
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',')]
    pub grid_gamma: Vec<f64>,
    /// Comma-separated beta values.
    #[arg(long, value_delimiter = ',')]
    pub grid_beta: Vec<f64>,
    /// Comma-separated iteration counts (integers or `inf`).
    #[arg(long, value_delimiter = ',')]
    pub grid_iters: Vec<String>,
    /// One weight vector `t,v,tv,vt` per occurrence.
    #[arg(long)]
    pub grid_alpha: Vec<String>,
    /// Comma-separated normalizations.
    #[arg(long, value_delimiter = ',')]
    pub grid_norm: Vec<String>,
}

fn pick<T: Clone>(flags: &[T], file: &[T]) -> Vec<T> {
    if flags.is_empty() {
        file.to_vec()
    } else {
        flags.to_vec()
    }
}

fn values<T, S: AsRef<str>>(raw: Vec<S>, fallback: T) -> Result<Vec<T>, CliError>
where
    T: std::str::FromStr<Err = fusegraph::Error>,
{
    if raw.is_empty() {
        return Ok(vec![fallback]);
    }
    raw.iter().map(|s| parse(s.as_ref())).collect()
}

impl GridArgs {
    /// Builds the grid; dimensions left empty take the base config's value.
    pub fn resolve(&self, exp: &ExperimentConfig, base: &RunConfig) -> Result<Grid, CliError> {
        let g = &exp.grid;
        let d = &base.diffusion;
        let or_base = |v: Vec<f64>, b: f64| if v.is_empty() { vec![b] } else { v };
        let grid = Grid {
            k: values::<NeighborCap, _>(pick(&self.grid_k, &g.k), d.k)?,
            gamma: or_base(pick(&self.grid_gamma, &g.gamma), d.gamma),
            beta: or_base(pick(&self.grid_beta, &g.beta), d.beta),
            iterations: values::<Iterations, _>(pick(&self.grid_iters, &g.iterations), d.iterations)?,
            alpha: values::<FusionWeights, _>(pick(&self.grid_alpha, &g.alpha), base.weights)?,
            normalization: values::<Normalization, _>(pick(&self.grid_norm, &g.normalization), d.normalization)?,
        };
        for cell in grid.cells(base) {
            cell.validate()?;
        }
        Ok(grid)
    }
}
