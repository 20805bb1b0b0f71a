use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use fusegraph::eval::{evaluate_against, evaluate as eval_run};
use fusegraph::fusion::{diffuse as run_diffusion, Direction, FusionWeights, Preset};
use fusegraph::pipeline::{
    build_contexts, run_contexts, run_sweep, scores_layout, Inputs, ModelOptions, RunConfig, Scenario,
};
use fusegraph::store::{trec, tsv, CollectionDir, Qrels, ScoreVector};
use fusegraph::synth::{make_synthetic, SynthSpec};
use fusegraph::visual::VisualParams;

use crate::config::{ExperimentConfig, GridArgs, ParamArgs};
use crate::CliError;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(fusegraph::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Where pipeline inputs come from.
#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// Collection directory (docs.tsv, queries.tsv, qrels.txt, descriptors).
    #[arg(long)]
    pub collection: Option<PathBuf>,
    /// Directory written by score-text/score-visual; skips raw scoring.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Seed of the visual vocabulary fit.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the lexical entailment text model instead of query likelihood.
    #[arg(long)]
    pub lexical_entailment: bool,
}

impl SourceArgs {
    fn collection(&self, exp: &ExperimentConfig) -> Result<PathBuf, CliError> {
        self.collection
            .clone()
            .or_else(|| exp.collection.clone())
            .ok_or_else(|| CliError::Config("no collection given (--collection or `collection` in config)".into()))
    }

    fn options(&self, exp: &ExperimentConfig) -> ModelOptions {
        ModelOptions {
            lexical_entailment: self.lexical_entailment || exp.lexical_entailment.unwrap_or(false),
            visual: VisualParams {
                seed: self.seed.or(exp.seed).unwrap_or(VisualParams::default().seed),
                ..VisualParams::default()
            },
            ..ModelOptions::default()
        }
    }

    fn load(&self, exp: &ExperimentConfig, scenario: Scenario) -> Result<Inputs, CliError> {
        let collection = self.collection(exp)?;
        let inputs = match self.scores.clone().or_else(|| exp.scores.clone()) {
            Some(scores) => Inputs::load_precomputed(&collection, &scores, scenario)?,
            None => {
                let dir = CollectionDir::load_with(&collection, scenario == Scenario::Symmetric)?;
                Inputs::from_collection(&dir, scenario, &self.options(exp))?
            }
        };
        Ok(inputs)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Collection directory.
    pub collection: PathBuf,
    /// Write the summary as TOML to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let dir = CollectionDir::load(&a.collection)?;
    let with_images = dir.queries.iter().filter(|q| !q.visual.is_empty()).count();
    let judged = dir.queries.iter().filter(|q| dir.qrels.relevant_count(&q.query_id) > 0).count();
    let descriptors: usize = dir
        .collection
        .docs()
        .iter()
        .flat_map(|d| d.visual.values())
        .map(Vec::len)
        .sum();
    let mut s = String::new();
    let _ = writeln!(s, "documents = {}", dir.collection.len());
    let _ = writeln!(s, "queries = {}", dir.queries.len());
    let _ = writeln!(s, "queries_with_images = {with_images}");
    let _ = writeln!(s, "judged_queries = {judged}");
    let _ = writeln!(s, "channels = {:?}", dir.collection.channels());
    let _ = writeln!(s, "document_descriptors = {descriptors}");
    let _ = writeln!(s, "stopwords = {}", dir.stopwords.len());
    print!("{s}");
    if let Some(out) = a.out {
        write_file(&out, &s)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreTextArgs {
    /// Collection directory.
    pub collection: PathBuf,
    /// Output directory for scores_t.tsv and sim_t.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lexical_entailment: bool,
    /// Dirichlet smoothing parameter.
    #[arg(long)]
    pub mu: Option<f64>,
}

pub fn score_text(a: ScoreTextArgs) -> Result<(), CliError> {
    let dir = CollectionDir::load_with(&a.collection, false)?;
    let mut opts = ModelOptions {
        lexical_entailment: a.lexical_entailment,
        ..ModelOptions::default()
    };
    if let Some(mu) = a.mu {
        opts.text.dirichlet_mu = mu;
    }
    opts.text.validate()?;
    let inputs = Inputs::from_collection(&dir, Scenario::Asymmetric, &opts)?;
    create_dir(&a.out)?;
    tsv::save_score_vectors(&a.out.join(scores_layout::SCORES_T), &inputs.s_t, &inputs.ids)?;
    let sim = inputs.sim_t.materialize(inputs.ids.len())?;
    tsv::save_sim_matrix(&a.out.join(scores_layout::SIM_T), &sim, &inputs.ids)?;
    eprintln!("wrote text scores for {} queries, {} similarity entries", inputs.s_t.len(), sim.nnz());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreVisualArgs {
    /// Collection directory.
    pub collection: PathBuf,
    /// Output directory for scores_v.tsv and sim_v.tsv.
    #[arg(long)]
    pub out: PathBuf,
    /// Gaussian components per channel.
    #[arg(long)]
    pub components: Option<usize>,
    /// Seed of the GMM fit.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only write document similarities (text-only queries).
    #[arg(long)]
    pub no_queries: bool,
}

pub fn score_visual(a: ScoreVisualArgs) -> Result<(), CliError> {
    let dir = CollectionDir::load_with(&a.collection, !a.no_queries)?;
    let defaults = VisualParams::default();
    let opts = ModelOptions {
        visual: VisualParams {
            components: a.components.unwrap_or(defaults.components),
            seed: a.seed.unwrap_or(defaults.seed),
            ..defaults
        },
        ..ModelOptions::default()
    };
    if opts.visual.components == 0 {
        return Err(CliError::Config("components must be >= 1".into()));
    }
    let scenario = if a.no_queries {
        Scenario::Asymmetric
    } else {
        Scenario::Symmetric
    };
    let inputs = Inputs::from_collection(&dir, scenario, &opts)?;
    create_dir(&a.out)?;
    if let Some(s_v) = &inputs.s_v {
        tsv::save_score_vectors(&a.out.join(scores_layout::SCORES_V), s_v, &inputs.ids)?;
    }
    let sim = inputs.sim_v.materialize(inputs.ids.len())?;
    tsv::save_sim_matrix(&a.out.join(scores_layout::SIM_V), &sim, &inputs.ids)?;
    eprintln!("wrote visual similarities, {} entries", sim.nnz());
    Ok(())
}

fn report_failures(failures: &BTreeMap<String, String>) {
    for (q, why) in failures {
        eprintln!("query {q}: {why}");
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output TSV: query_id, rank, doc_id, s_t, s_v.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn filter(a: FilterArgs) -> Result<(), CliError> {
    let exp = a.params.experiment()?;
    let cfg = a.params.resolve(&exp)?;
    let inputs = a.source.load(&exp, cfg.scenario)?;
    let mut out = String::new();
    let mut failures = BTreeMap::new();
    for (q, ctx) in build_contexts(&inputs, cfg.scenario, cfg.m_cap) {
        match ctx {
            Ok(ctx) => {
                for (rank, &g) in ctx.selected.iter().enumerate() {
                    let sv = ctx
                        .s_v
                        .as_ref()
                        .map_or("-".to_string(), |s| tsv::fmt_score(s.get(rank)));
                    let _ = writeln!(
                        out,
                        "{q}\t{}\t{}\t{}\t{sv}",
                        rank + 1,
                        inputs.ids.id(g),
                        tsv::fmt_score(ctx.s_t.get(rank))
                    );
                }
            }
            Err(e) => {
                failures.insert(q, e.to_string());
            }
        }
    }
    report_failures(&failures);
    write_file(&a.out, &out)
}

#[derive(Debug, Args)]
pub struct DiffuseArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// tv (text prior) or vt (visual prior).
    #[arg(long, default_value = "tv")]
    pub direction: String,
    /// Output score vectors (query_id, doc_id, score).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-query iteration trace: query_id, iterations, converged, last delta.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn diffuse(a: DiffuseArgs) -> Result<(), CliError> {
    let exp = a.params.experiment()?;
    let cfg = a.params.resolve(&exp)?;
    let direction: Direction = a.direction.parse()?;
    if direction == Direction::Vt && cfg.scenario == Scenario::Asymmetric {
        return Err(CliError::Config("the vt direction needs the symmetric scenario".into()));
    }
    let dcfg = cfg.diffusion.with_direction(direction);
    let inputs = a.source.load(&exp, cfg.scenario)?;
    let n = inputs.ids.len();
    let mut vectors: BTreeMap<String, ScoreVector> = BTreeMap::new();
    let mut trace = String::new();
    let mut failures = BTreeMap::new();
    for (q, ctx) in build_contexts(&inputs, cfg.scenario, cfg.m_cap) {
        match ctx.and_then(|c| run_diffusion(&c, &dcfg).map(|(x, t)| (c.to_global(&x, n), t))) {
            Ok((x, t)) => {
                let last = t.deltas.last().copied().unwrap_or(0.0);
                let _ = writeln!(trace, "{q}\t{}\t{}\t{last:e}", t.iterations, t.converged);
                vectors.insert(q, x);
            }
            Err(e) => {
                failures.insert(q, e.to_string());
            }
        }
    }
    report_failures(&failures);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    tsv::save_score_vectors(&a.out, &vectors, &inputs.ids)?;
    if let Some(path) = a.trace {
        write_file(&path, &trace)?;
    }
    Ok(())
}

fn run_tag(cfg: &ParamArgs, exp: &ExperimentConfig) -> String {
    cfg.preset
        .clone()
        .or_else(|| exp.preset.clone())
        .unwrap_or_else(|| Preset::CmDefault.name().to_string())
}

fn execute(source: &SourceArgs, params: &ParamArgs, out: Option<PathBuf>, tag: Option<String>) -> Result<(), CliError> {
    let exp = params.experiment()?;
    let cfg = params.resolve(&exp)?;
    let out = out
        .or_else(|| exp.output.as_ref().map(|d| d.join("run.txt")))
        .ok_or_else(|| CliError::Config("no output given (--out or `output` in config)".into()))?;
    let inputs = source.load(&exp, cfg.scenario)?;
    let result = run_contexts(&inputs, &build_contexts(&inputs, cfg.scenario, cfg.m_cap), &cfg)?;
    report_failures(&result.failures);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    trec::save_run(&out, &result.run, &tag.unwrap_or_else(|| run_tag(params, &exp)))?;
    println!(
        "MAP {:.4} over {} judged queries ({} without candidates)",
        result.report.map,
        result.report.per_query_ap.len(),
        result.failures.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output run file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run tag written in the last column.
    #[arg(long)]
    pub tag: Option<String>,
}

pub fn fuse(a: FuseArgs) -> Result<(), CliError> {
    let exp = a.params.experiment()?;
    if a.source.scores.is_none() && exp.scores.is_none() {
        return Err(CliError::Config("fuse needs precomputed --scores (use `run` for raw collections)".into()));
    }
    execute(&a.source, &a.params, a.out, a.tag)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output run file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run tag written in the last column; defaults to the preset name.
    #[arg(long)]
    pub tag: Option<String>,
}

pub fn run(a: RunArgs) -> Result<(), CliError> {
    execute(&a.source, &a.params, a.out, a.tag)
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run file in TREC format.
    pub run: PathBuf,
    /// Qrels in TREC format.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Baseline run for a paired t-test.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Print AP per query.
    #[arg(long)]
    pub per_query: bool,
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let qrels = Qrels::load(&a.qrels)?;
    let run = trec::load_run(&a.run)?;
    let report = match &a.baseline {
        Some(b) => evaluate_against(&run, &trec::load_run(b)?, &qrels)?,
        None => eval_run(&run, &qrels),
    };
    let mut out = std::io::stdout().lock();
    if a.per_query {
        for (q, ap) in &report.per_query_ap {
            let _ = writeln!(out, "ap\t{q}\t{ap:.4}");
        }
    }
    let _ = writeln!(out, "map\tall\t{:.4}", report.map);
    let _ = writeln!(out, "queries\tall\t{}", report.per_query_ap.len());
    if !report.skipped.is_empty() {
        let _ = writeln!(out, "skipped\tall\t{}", report.skipped.len());
    }
    if let Some(t) = report.ttest.as_ref().filter(|t| t.degenerate) {
        let _ = writeln!(out, "ttest\tall\tdegenerate (identical per-query differences) dof={}", t.dof);
    } else if let Some(t) = &report.ttest {
        let _ = writeln!(
            out,
            "ttest\tall\tt={:.3} dof={} p={:.4} {}",
            t.t,
            t.dof,
            t.p_value,
            if t.significant { "significant" } else { "not significant" }
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// text, visual, or a preset name.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Directory for sweep.tsv and sweep.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn baseline_config(name: &str, base: &RunConfig) -> Result<RunConfig, CliError> {
    let weights = match name {
        "text" => FusionWeights::text_only(),
        "visual" => FusionWeights::new(0.0, 1.0, 0.0, 0.0)?,
        preset => {
            let p: Preset = preset
                .parse()
                .map_err(|_| CliError::Config(format!("baseline must be text, visual or a preset, got {preset:?}")))?;
            return Ok(RunConfig {
                m_cap: base.m_cap,
                ..RunConfig::preset(base.scenario, p)
            });
        }
    };
    let cfg = RunConfig { weights, ..*base };
    cfg.validate()?;
    Ok(cfg)
}

pub fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let exp = a.params.experiment()?;
    let base = a.params.resolve(&exp)?;
    let grid = a.grid.resolve(&exp, &base)?;
    let name = a.baseline.clone().or_else(|| exp.baseline.clone()).unwrap_or_else(|| "text".into());
    let baseline = baseline_config(&name, &base)?;
    let inputs = a.source.load(&exp, base.scenario)?;
    let table = run_sweep(&inputs, &base, &grid, &name, &baseline)?;
    print!("{}", table.to_text());
    if let Some(dir) = a.out.or_else(|| exp.output.clone()) {
        write_file(&dir.join("sweep.tsv"), &table.to_tsv())?;
        write_file(&dir.join("sweep.txt"), &table.to_text())?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output collection directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// default or second-hop.
    #[arg(long, default_value = "default")]
    pub kind: String,
    /// TOML file overriding individual generator fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut spec = match a.kind.as_str() {
        "default" => SynthSpec::default(),
        "second-hop" => SynthSpec::noisy_second_hop(),
        other => return Err(CliError::Config(format!("kind must be default or second-hop, got {other:?}"))),
    };
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read spec {}: {e}", path.display())))?;
        let overrides: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut merged = toml::Table::try_from(&spec).map_err(|e| CliError::Config(e.to_string()))?;
        for (k, v) in overrides {
            if !merged.contains_key(&k) {
                return Err(CliError::Config(format!("unknown spec field {k:?}")));
            }
            merged.insert(k, v);
        }
        spec = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    }
    let s = make_synthetic(a.seed, &spec, &a.out)?;
    eprintln!(
        "wrote {} documents, {} queries to {}",
        s.docs.len(),
        s.queries.len(),
        a.out.display()
    );
    Ok(())
}
