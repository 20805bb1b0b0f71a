//! End-to-end runs: filter, diffuse, fuse, rank, evaluate; and grid sweeps.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, paired_ttest, EvalReport, TTest};
use crate::filter::{FilteredContext, Selection};
use crate::fusion::{
    diffuse, l1_normalize, late_fuse, minmax_normalize, DiffusionConfig, Direction, FusionWeights, Iterations,
    NeighborCap, Normalization,
};
use crate::store::{CollectionDir, DocIds, Qrels, RankedList, Run, ScoreVector, SimMatrix};
use crate::text::{estimate_entailment, TextIndex, TextModel, TextModelParams, TextScorer};
use crate::visual::{visual_similarity, FisherVector, VisualModel, VisualParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Text-only queries.
    Asymmetric,
    /// Queries with a text and an image part.
    Symmetric,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Asymmetric => "asymmetric",
            Scenario::Symmetric => "symmetric",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric" => Ok(Scenario::Asymmetric),
            "symmetric" => Ok(Scenario::Symmetric),
            _ => Err(Error::InvalidParameter(format!("scenario must be asymmetric or symmetric, got {s:?}"))),
        }
    }
}

/// Document-document similarity, either materialized or computed on demand
/// for the selected candidates only.
#[derive(Debug, Clone)]
pub enum Similarity {
    Matrix(Arc<SimMatrix>),
    Text(Arc<TextScorer>),
    Visual(Arc<Vec<FisherVector>>),
}

impl Similarity {
    pub fn restrict(&self, sel: &Selection) -> Result<SimMatrix> {
        match self {
            Similarity::Matrix(m) => Ok(sel.filter_matrix(m)),
            Similarity::Text(scorer) => {
                let rows = sel
                    .selected
                    .iter()
                    .map(|&a| ScoreVector::from_dense(&scorer.similarity_among(a, &sel.selected)))
                    .collect::<Result<Vec<_>>>()?;
                SimMatrix::from_rows(rows)
            }
            Similarity::Visual(sigs) => {
                sel.filter_with(|a, b| visual_similarity(&sigs[a], &sigs[b]).unwrap_or(0.0))
            }
        }
    }

    /// The full `n x n` matrix over documents `0..n`.
    pub fn materialize(&self, n: usize) -> Result<SimMatrix> {
        match self {
            Similarity::Matrix(m) => Ok((**m).clone()),
            _ => self.restrict(&Selection::from_selected("", (0..n).collect(), n)),
        }
    }
}

/// File names inside a directory of precomputed monomedia scores.
pub mod scores_layout {
    pub const SCORES_T: &str = "scores_t.tsv";
    pub const SCORES_V: &str = "scores_v.tsv";
    pub const SIM_T: &str = "sim_t.tsv";
    pub const SIM_V: &str = "sim_v.tsv";
}

/// Everything a run needs besides its parameters.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub ids: DocIds,
    /// Queries in run order.
    pub query_ids: Vec<String>,
    pub s_t: BTreeMap<String, ScoreVector>,
    /// Visual query scores; `None` for text-only queries.
    pub s_v: Option<BTreeMap<String, ScoreVector>>,
    pub sim_t: Similarity,
    pub sim_v: Similarity,
    pub qrels: Qrels,
}

/// Monomedia model settings used to derive [`Inputs`] from raw data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub text: TextModelParams,
    pub lexical_entailment: bool,
    pub visual: VisualParams,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            text: TextModelParams::default(),
            lexical_entailment: false,
            visual: VisualParams::default(),
        }
    }
}

impl Inputs {
    /// Reads document and query ids plus qrels from `collection` and the
    /// precomputed scores from `scores`. `scores_v.tsv` is only opened in
    /// the symmetric scenario.
    pub fn load_precomputed(collection: &Path, scores: &Path, scenario: Scenario) -> Result<Self> {
        use crate::store::{layout, tsv};
        use scores_layout::*;
        let ids = DocIds::new(tsv::load_texts(&collection.join(layout::DOCS))?.into_iter().map(|(id, _)| id))?;
        let query_ids = tsv::load_texts(&collection.join(layout::QUERIES))?
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        let qrels_path = collection.join(layout::QRELS);
        let qrels = if qrels_path.exists() {
            Qrels::load(&qrels_path)?
        } else {
            Qrels::default()
        };
        let s_v = match scenario {
            Scenario::Asymmetric => None,
            Scenario::Symmetric => Some(tsv::load_score_vectors(&scores.join(SCORES_V), &ids)?),
        };
        Ok(Self {
            s_t: tsv::load_score_vectors(&scores.join(SCORES_T), &ids)?,
            s_v,
            sim_t: Similarity::Matrix(Arc::new(tsv::load_sim_matrix(&scores.join(SIM_T), &ids)?)),
            sim_v: Similarity::Matrix(Arc::new(tsv::load_sim_matrix(&scores.join(SIM_V), &ids)?)),
            ids,
            query_ids,
            qrels,
        })
    }

    /// Scores a loaded collection. Visual query parts are only used in the
    /// symmetric scenario.
    pub fn from_collection(dir: &CollectionDir, scenario: Scenario, opts: &ModelOptions) -> Result<Self> {
        let docs = dir.collection.docs();
        let stop: HashSet<String> = dir.stopwords.iter().cloned().collect();
        let index = TextIndex::from_documents(docs, &stop)?;
        let model = if opts.lexical_entailment {
            TextModel::LexicalEntailment(estimate_entailment(&index, &opts.text)?)
        } else {
            TextModel::QueryLikelihood
        };
        let scorer = Arc::new(TextScorer::new(index, opts.text, model)?);
        let query_ids: Vec<String> = dir.queries.iter().map(|q| q.query_id.clone()).collect();
        let s_t: BTreeMap<String, ScoreVector> = dir
            .queries
            .par_iter()
            .map(|q| (q.query_id.clone(), scorer.score_query(&q.text_tokens)))
            .collect();

        let vm = VisualModel::fit(docs.iter().map(|d| &d.visual), &opts.visual)?;
        let sigs: Vec<FisherVector> = docs
            .par_iter()
            .map(|d| vm.signature(&d.visual))
            .collect::<Result<_>>()?;
        let s_v = match scenario {
            Scenario::Asymmetric => None,
            Scenario::Symmetric => {
                if dir.queries.iter().all(|q| q.visual.is_empty()) {
                    return Err(Error::InvalidParameter(
                        "symmetric scenario needs visual query descriptors".into(),
                    ));
                }
                let map = dir
                    .queries
                    .par_iter()
                    .map(|q| {
                        let sq = vm.signature(&q.visual)?;
                        let dense = sigs
                            .iter()
                            .map(|d| visual_similarity(&sq, d))
                            .collect::<Result<Vec<f64>>>()?;
                        Ok((q.query_id.clone(), ScoreVector::from_dense(&dense)?))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()?;
                Some(map)
            }
        };
        Ok(Self {
            ids: dir.collection.ids().clone(),
            query_ids,
            s_t,
            s_v,
            sim_t: Similarity::Text(scorer),
            sim_v: Similarity::Visual(Arc::new(sigs)),
            qrels: dir.qrels.clone(),
        })
    }
}

/// Parameters of a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Diffusion settings; the direction is set per fused component.
    pub diffusion: DiffusionConfig,
    pub weights: FusionWeights,
    pub m_cap: usize,
}

impl Scenario {
    /// Fusion weights used when none are given: text plus the tv diffusion
    /// for text-only queries, all four families equally otherwise.
    pub fn default_weights(self) -> FusionWeights {
        match self {
            Scenario::Asymmetric => FusionWeights::new(0.5, 0.0, 0.5, 0.0),
            Scenario::Symmetric => FusionWeights::new(0.25, 0.25, 0.25, 0.25),
        }
        .expect("valid weights")
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Scenario::Asymmetric, crate::fusion::Preset::CmDefault)
    }
}

impl RunConfig {
    pub fn preset(scenario: Scenario, preset: crate::fusion::Preset) -> Self {
        Self {
            scenario,
            diffusion: preset.config(),
            weights: scenario.default_weights(),
            m_cap: crate::filter::DEFAULT_M_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        self.weights.validate()?;
        if self.m_cap == 0 {
            return Err(Error::InvalidParameter("m_cap must be >= 1".into()));
        }
        if self.scenario == Scenario::Asymmetric && (self.weights.alpha_v > 0.0 || self.weights.alpha_vt > 0.0) {
            return Err(Error::InvalidParameter(
                "asymmetric scenario requires alpha_v = alpha_vt = 0".into(),
            ));
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &Inputs) -> Result<()> {
        self.validate()?;
        if self.scenario == Scenario::Symmetric && inputs.s_v.is_none() {
            return Err(Error::InvalidParameter(
                "symmetric scenario requires visual query scores".into(),
            ));
        }
        Ok(())
    }
}

/// Per-query contexts (or the reason a query has none), in run order.
pub type Contexts = Vec<(String, Result<FilteredContext>)>;

/// Filters every query. Visual query scores are read only in the symmetric
/// scenario.
pub fn build_contexts(inputs: &Inputs, scenario: Scenario, m_cap: usize) -> Contexts {
    inputs
        .query_ids
        .par_iter()
        .map(|q| {
            let ctx = (|| {
                let empty = ScoreVector::empty(inputs.ids.len());
                let s_t = inputs.s_t.get(q).unwrap_or(&empty);
                let sel = Selection::new(q, s_t, m_cap, &inputs.ids)?;
                let s_v = match scenario {
                    Scenario::Asymmetric => None,
                    Scenario::Symmetric => Some(
                        inputs
                            .s_v
                            .as_ref()
                            .and_then(|m| m.get(q))
                            .unwrap_or(&empty),
                    ),
                };
                let sim_t = inputs.sim_t.restrict(&sel)?;
                let sim_v = inputs.sim_v.restrict(&sel)?;
                sel.into_context(s_t, s_v, sim_t, sim_v)
            })();
            (q.clone(), ctx)
        })
        .collect()
}

fn normalize_input(s: &ScoreVector, norm: Normalization) -> ScoreVector {
    match norm {
        Normalization::Probability => l1_normalize(s).unwrap_or_else(|_| ScoreVector::empty(s.dim())),
        Normalization::Minmax => ScoreVector::from_dense(&minmax_normalize(&s.to_dense()).0)
            .expect("min-max output lies in [0, 1]"),
    }
}

/// Fused local scores of one filtered query.
pub fn score_context(ctx: &FilteredContext, cfg: &RunConfig) -> Result<ScoreVector> {
    let norm = cfg.diffusion.normalization;
    let w = &cfg.weights;
    let s_t = normalize_input(&ctx.s_t, norm);
    let s_v = ctx.s_v.as_ref().map(|s| normalize_input(s, norm));
    let tv = if w.alpha_tv > 0.0 {
        Some(diffuse(ctx, &cfg.diffusion.with_direction(Direction::Tv))?.0)
    } else {
        None
    };
    let vt = if w.alpha_vt > 0.0 {
        Some(diffuse(ctx, &cfg.diffusion.with_direction(Direction::Vt))?.0)
    } else {
        None
    };
    late_fuse(w, &s_t, s_v.as_ref(), tv.as_ref(), vt.as_ref())
}

/// Ranks all `l` candidates by fused score, ties by ascending doc id.
pub fn rank_candidates(ctx: &FilteredContext, fused: &ScoreVector, ids: &DocIds) -> RankedList {
    let dense = fused.to_dense();
    let mut list: RankedList = ctx
        .selected
        .iter()
        .enumerate()
        .map(|(l, &g)| (ids.id(g).to_string(), dense[l]))
        .collect();
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    list
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: Run,
    /// Queries without a ranking, with the reason.
    pub failures: BTreeMap<String, String>,
    pub report: EvalReport,
}

pub fn run_contexts(inputs: &Inputs, contexts: &Contexts, cfg: &RunConfig) -> Result<RunResult> {
    cfg.check_inputs(inputs)?;
    let scored: Vec<(String, std::result::Result<RankedList, String>)> = contexts
        .par_iter()
        .map(|(q, ctx)| {
            let ranked = match ctx {
                Ok(ctx) => score_context(ctx, cfg)
                    .map(|f| rank_candidates(ctx, &f, &inputs.ids))
                    .map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            (q.clone(), ranked)
        })
        .collect();
    let mut run = Run::new();
    let mut failures = BTreeMap::new();
    for (q, r) in scored {
        match r {
            Ok(list) => {
                run.insert(q, list);
            }
            Err(msg) => {
                failures.insert(q, msg);
            }
        }
    }
    let report = evaluate(&run, &inputs.qrels);
    Ok(RunResult { run, failures, report })
}

/// Runs one configuration over every query.
pub fn run_pipeline(inputs: &Inputs, cfg: &RunConfig) -> Result<RunResult> {
    cfg.check_inputs(inputs)?;
    let contexts = build_contexts(inputs, cfg.scenario, cfg.m_cap);
    run_contexts(inputs, &contexts, cfg)
}

/// Value lists whose cartesian product is swept.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub k: Vec<NeighborCap>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations: Vec<Iterations>,
    pub alpha: Vec<FusionWeights>,
    pub normalization: Vec<Normalization>,
}

impl Grid {
    /// A one-point grid at `cfg`.
    pub fn single(cfg: &RunConfig) -> Self {
        Self {
            k: vec![cfg.diffusion.k],
            gamma: vec![cfg.diffusion.gamma],
            beta: vec![cfg.diffusion.beta],
            iterations: vec![cfg.diffusion.iterations],
            alpha: vec![cfg.weights],
            normalization: vec![cfg.diffusion.normalization],
        }
    }

    pub fn len(&self) -> usize {
        self.k.len()
            * self.gamma.len()
            * self.beta.len()
            * self.iterations.len()
            * self.alpha.len()
            * self.normalization.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (k outermost, normalization innermost).
    pub fn cells(&self, base: &RunConfig) -> Vec<RunConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &k in &self.k {
            for &gamma in &self.gamma {
                for &beta in &self.beta {
                    for &iterations in &self.iterations {
                        for &weights in &self.alpha {
                            for &normalization in &self.normalization {
                                out.push(RunConfig {
                                    diffusion: DiffusionConfig {
                                        k,
                                        gamma,
                                        beta,
                                        iterations,
                                        normalization,
                                        ..base.diffusion
                                    },
                                    weights,
                                    ..*base
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: RunConfig,
    /// `None` when the cell failed as a whole.
    pub map: Option<f64>,
    pub per_query_ap: BTreeMap<String, f64>,
    pub failed_queries: usize,
    pub ttest: Option<TTest>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub baseline_name: String,
    pub baseline_map: f64,
    pub rows: Vec<SweepRow>,
}

/// Evaluates every grid point and tests each against `baseline`.
pub fn run_sweep(
    inputs: &Inputs,
    base: &RunConfig,
    grid: &Grid,
    baseline_name: &str,
    baseline: &RunConfig,
) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    base.validate()?;
    if baseline.scenario != base.scenario || baseline.m_cap != base.m_cap {
        return Err(Error::InvalidParameter(
            "baseline must share the sweep's scenario and m_cap".into(),
        ));
    }
    let contexts = build_contexts(inputs, base.scenario, base.m_cap);
    let base_run = run_contexts(inputs, &contexts, baseline)?;
    let rows = grid
        .cells(base)
        .into_par_iter()
        .map(|cfg| match run_contexts(inputs, &contexts, &cfg) {
            Ok(r) => {
                let ttest = paired_ttest(&r.report.per_query_ap, &base_run.report.per_query_ap).ok();
                SweepRow {
                    config: cfg,
                    map: Some(r.report.map),
                    per_query_ap: r.report.per_query_ap,
                    failed_queries: r.failures.len(),
                    ttest,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                config: cfg,
                map: None,
                per_query_ap: BTreeMap::new(),
                failed_queries: 0,
                ttest: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepTable {
        baseline_name: baseline_name.to_string(),
        baseline_map: base_run.report.map,
        rows,
    })
}

const HEADER: [&str; 11] = ["k", "gamma", "beta", "iters", "alpha", "norm", "map", "delta", "t", "sig", "status"];

impl SweepRow {
    fn fields(&self, baseline_map: f64) -> [String; 11] {
        let d = &self.config.diffusion;
        let (map, delta) = match self.map {
            Some(m) => (format!("{m:.4}"), format!("{:+.4}", m - baseline_map)),
            None => ("-".into(), "-".into()),
        };
        let (t, sig) = match &self.ttest {
            Some(t) if t.degenerate => ("degenerate".into(), String::new()),
            Some(t) => (format!("{:.3}", t.t), if t.significant { "*".into() } else { String::new() }),
            None => ("-".into(), String::new()),
        };
        let status = match (&self.error, self.failed_queries) {
            (Some(e), _) => format!("failed: {e}"),
            (None, 0) => "ok".into(),
            (None, n) => format!("ok ({n} queries unanswered)"),
        };
        [
            d.k.to_string(),
            d.gamma.to_string(),
            d.beta.to_string(),
            d.iterations.to_string(),
            self.config.weights.to_string(),
            d.normalization.to_string(),
            map,
            delta,
            t,
            sig,
            status,
        ]
    }
}

impl SweepTable {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# baseline\t{}\t{:.4}\n", self.baseline_name, self.baseline_map);
        out.push_str(&HEADER.join("\t"));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.fields(self.baseline_map).join("\t"));
            out.push('\n');
        }
        out
    }

    /// Space-aligned rendering for terminals.
    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 11]> = self.rows.iter().map(|r| r.fields(self.baseline_map)).collect();
        let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, f) in widths.iter_mut().zip(r) {
                *w = (*w).max(f.chars().count());
            }
        }
        let mut out = format!("baseline {} MAP {:.4}\n", self.baseline_name, self.baseline_map);
        let line = |fields: &[String], out: &mut String| {
            let cells: Vec<String> = fields
                .iter()
                .zip(&widths)
                .map(|(f, &w)| format!("{f:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        };
        line(&HEADER.map(String::from), &mut out);
        for r in &rows {
            line(r, &mut out);
        }
        out
    }
}
