//! The diffusion engine over a filtered document graph.
//!
//! One step of the generalized diffusion, for direction `tv`, is
//!
//! ```text
//! x_i ∝ K(x_{i-1}, k) · [ (1-γ) P + γ e·s ]
//! P   = D · ((1-β) S_v + β S_t),   x_0 = s = s_t (L1-normalized)
//! ```
//!
//! and direction `vt` swaps the roles of the text and visual inputs. With
//! `i = 1, γ = 0, β = 0` this is the cross-media similarity; with `k = l`
//! and `i → ∞` it is the random walk with a prior.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilteredContext;
use crate::store::{ScoreVector, SimMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Text prior, diffused mainly through visual similarities.
    Tv,
    /// Visual prior, diffused mainly through text similarities.
    Vt,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Tv => "tv",
            Direction::Vt => "vt",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(Direction::Tv),
            "vt" => Ok(Direction::Vt),
            _ => Err(Error::InvalidParameter(format!("direction must be tv or vt, got {s:?}"))),
        }
    }
}

/// Neighbor cap of the `K` operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeighborCap {
    Top(usize),
    /// `k = l`: no thresholding.
    All,
}

impl fmt::Display for NeighborCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborCap::Top(k) => write!(f, "{k}"),
            NeighborCap::All => f.write_str("l"),
        }
    }
}

impl FromStr for NeighborCap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l" | "all" => Ok(NeighborCap::All),
            _ => match s.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(NeighborCap::Top(k)),
                _ => Err(Error::InvalidParameter(format!("k must be a positive integer or `l`, got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Iterations {
    Fixed(usize),
    UntilConvergence,
}

impl fmt::Display for Iterations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Iterations::Fixed(i) => write!(f, "{i}"),
            Iterations::UntilConvergence => f.write_str("inf"),
        }
    }
}

impl FromStr for Iterations {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "∞" | "converge" => Ok(Iterations::UntilConvergence),
            _ => match s.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(Iterations::Fixed(i)),
                _ => Err(Error::InvalidParameter(format!("iterations must be >= 1 or `inf`, got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// L1 normalization of scores and similarity rows.
    Probability,
    /// `(s - min) / (max - min)` over the candidate set.
    Minmax,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Probability => "probability",
            Normalization::Minmax => "minmax",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probability" => Ok(Normalization::Probability),
            "minmax" => Ok(Normalization::Minmax),
            _ => Err(Error::InvalidParameter(format!("normalization must be probability or minmax, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub direction: Direction,
    pub k: NeighborCap,
    /// Prior (restart) weight.
    pub gamma: f64,
    /// Weight of the same-modality matrix in the mix.
    pub beta: f64,
    pub iterations: Iterations,
    /// L1 change below which the iteration has converged.
    pub epsilon: f64,
    pub max_iter: usize,
    pub normalization: Normalization,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Preset::CmDefault.config()
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("beta", self.beta)?;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        match (self.k, self.iterations) {
            (NeighborCap::Top(0), _) => Err(Error::InvalidParameter("k must be >= 1".into())),
            (_, Iterations::Fixed(0)) => Err(Error::InvalidParameter("iterations must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn with_direction(mut self, d: Direction) -> Self {
        self.direction = d;
        self
    }
}

/// Named parameter settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// k=10, γ=0.3, β=0, one step.
    CmDefault,
    /// k=l, γ=0.3, β=0, until convergence.
    RwClassic,
    /// k=10, γ=0.3, β=0, until convergence.
    GdDefault,
}

impl Preset {
    pub fn config(self) -> DiffusionConfig {
        let (k, iterations) = match self {
            Preset::CmDefault => (NeighborCap::Top(10), Iterations::Fixed(1)),
            Preset::RwClassic => (NeighborCap::All, Iterations::UntilConvergence),
            Preset::GdDefault => (NeighborCap::Top(10), Iterations::UntilConvergence),
        };
        DiffusionConfig {
            direction: Direction::Tv,
            k,
            gamma: 0.3,
            beta: 0.0,
            iterations,
            epsilon: 1e-9,
            max_iter: 1000,
            normalization: Normalization::Probability,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::CmDefault => "cm-default",
            Preset::RwClassic => "rw-classic",
            Preset::GdDefault => "gd-default",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cm-default" => Ok(Preset::CmDefault),
            "rw-classic" => Ok(Preset::RwClassic),
            "gd-default" => Ok(Preset::GdDefault),
            _ => Err(Error::InvalidParameter(format!("unknown preset {s:?}"))),
        }
    }
}

/// Zeroes entries strictly below the `k`-th highest value of a dense vector.
/// Ties at the threshold survive. A no-op when `k >= nnz`.
pub fn knn_threshold_dense(x: &mut [f64], k: NeighborCap) {
    let k = match k {
        NeighborCap::All => return,
        NeighborCap::Top(k) => k,
    };
    let mut positive: Vec<f64> = x.iter().copied().filter(|&v| v > 0.0).collect();
    if k >= positive.len() {
        return;
    }
    let (_, &mut kth, _) = positive.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    for v in x.iter_mut() {
        if *v < kth {
            *v = 0.0;
        }
    }
}

/// `K(v, k)` on a sparse vector.
pub fn knn_threshold(v: &ScoreVector, k: NeighborCap) -> ScoreVector {
    let NeighborCap::Top(k) = k else {
        return v.clone();
    };
    if k >= v.nnz() {
        return v.clone();
    }
    let mut vals: Vec<f64> = v.iter().map(|(_, s)| s).collect();
    let (_, &mut kth, _) = vals.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    ScoreVector::from_sorted_unchecked(v.dim(), v.iter().filter(|&(_, s)| s >= kth).collect())
}

/// Divides by the L1 norm.
pub fn l1_normalize(v: &ScoreVector) -> Result<ScoreVector> {
    let sum = v.sum();
    if !(sum > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(ScoreVector::from_sorted_unchecked(
        v.dim(),
        v.iter().map(|(i, s)| (i, s / sum)).filter(|&(_, s)| s > 0.0).collect(),
    ))
}

fn l1_normalize_dense(x: &mut [f64]) -> Result<f64> {
    let sum: f64 = x.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::ZeroMass);
    }
    x.iter_mut().for_each(|v| *v /= sum);
    Ok(sum)
}

/// `(v - min) / (max - min)` over all `v.len()` candidates, zeros included.
/// A constant vector maps to zeros and is flagged (`true`).
pub fn minmax_normalize(v: &[f64]) -> (Vec<f64>, bool) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() || !(max > min) {
        return (vec![0.0; v.len()], true);
    }
    let range = max - min;
    (v.iter().map(|&x| (x - min) / range).collect(), false)
}

/// Row-wise min-max over the `dim` columns of each row. Returns the rows
/// that were constant.
pub fn minmax_rows(m: &SimMatrix) -> (SimMatrix, Vec<usize>) {
    let dim = m.dim();
    let mut flagged = Vec::new();
    let rows = (0..dim)
        .map(|r| {
            let (out, constant) = minmax_normalize(&m.row_vector(r).to_dense());
            if constant {
                flagged.push(r);
            }
            ScoreVector::from_dense_nonneg(&out)
        })
        .collect();
    (SimMatrix::from_rows(rows).expect("rows have the matrix dimension"), flagged)
}

/// Entrywise `(1-β) a + β b`. The endpoints return an input unchanged.
pub fn mix_matrices(a: &SimMatrix, b: &SimMatrix, beta: f64) -> Result<SimMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must be in [0, 1], got {beta}")));
    }
    if beta == 0.0 {
        return Ok(a.clone());
    }
    if beta == 1.0 {
        return Ok(b.clone());
    }
    let rows = (0..a.dim())
        .map(|r| {
            let (ac, av) = a.row(r);
            let (bc, bv) = b.row(r);
            let (mut i, mut j) = (0, 0);
            let mut out = Vec::with_capacity(ac.len() + bc.len());
            while i < ac.len() || j < bc.len() {
                let ca = ac.get(i).copied().unwrap_or(usize::MAX);
                let cb = bc.get(j).copied().unwrap_or(usize::MAX);
                let (c, v) = match ca.cmp(&cb) {
                    std::cmp::Ordering::Less => {
                        i += 1;
                        (ca, (1.0 - beta) * av[i - 1])
                    }
                    std::cmp::Ordering::Greater => {
                        j += 1;
                        (cb, beta * bv[j - 1])
                    }
                    std::cmp::Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (ca, (1.0 - beta) * av[i - 1] + beta * bv[j - 1])
                    }
                };
                if v > 0.0 {
                    out.push((c, v));
                }
            }
            ScoreVector::from_sorted_unchecked(a.dim(), out)
        })
        .collect();
    SimMatrix::from_rows(rows)
}

/// A row-normalized matrix plus its all-zero ("dangling") rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub matrix: SimMatrix,
    pub dangling: Vec<usize>,
}

/// `P = D · C` with `D(i,i) = 1 / sum_j C(i,j)`; zero rows stay zero.
pub fn row_stochastic(c: &SimMatrix) -> Transition {
    let mut dangling = Vec::new();
    let matrix = c.map_rows(|r, _, vals| {
        let s: f64 = vals.iter().sum();
        if s > 0.0 {
            vals.iter().map(|v| v / s).collect()
        } else {
            dangling.push(r);
            vals.to_vec()
        }
    });
    Transition { matrix, dangling }
}

/// The same-modality and cross-modality matrices for a direction.
fn oriented<'a>(ctx: &'a FilteredContext, dir: Direction) -> (&'a SimMatrix, &'a SimMatrix) {
    match dir {
        Direction::Tv => (&ctx.sim_t, &ctx.sim_v),
        Direction::Vt => (&ctx.sim_v, &ctx.sim_t),
    }
}

fn prior_scores(ctx: &FilteredContext, dir: Direction) -> Result<&ScoreVector> {
    match dir {
        Direction::Tv => Ok(&ctx.s_t),
        Direction::Vt => ctx
            .s_v
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("direction vt requires visual query scores".into())),
    }
}

/// The mixed transition matrix used by [`diffuse`]:
/// `row_stochastic((1-β) S_cross + β S_same)` for probability normalization,
/// or the mix of min-max normalized rows for min-max normalization.
pub fn transition_matrix(ctx: &FilteredContext, cfg: &DiffusionConfig) -> Result<Transition> {
    let (same, cross) = oriented(ctx, cfg.direction);
    match cfg.normalization {
        Normalization::Probability => Ok(row_stochastic(&mix_matrices(cross, same, cfg.beta)?)),
        Normalization::Minmax => {
            let (c, _) = minmax_rows(cross);
            let (s, _) = minmax_rows(same);
            let matrix = mix_matrices(&c, &s, cfg.beta)?;
            let dangling = (0..matrix.dim()).filter(|&r| matrix.row(r).0.is_empty()).collect();
            Ok(Transition { matrix, dangling })
        }
    }
}

fn normalized_prior(s: &ScoreVector, norm: Normalization) -> Result<Vec<f64>> {
    let mut x = s.to_dense();
    match norm {
        Normalization::Probability => {
            l1_normalize_dense(&mut x)?;
        }
        Normalization::Minmax => {
            let (out, constant) = minmax_normalize(&x);
            x = if constant {
                // all candidates tie: use a flat prior rather than nothing
                if x.iter().any(|&v| v > 0.0) {
                    vec![1.0; x.len()]
                } else {
                    return Err(Error::ZeroMass);
                }
            } else {
                out
            };
        }
    }
    Ok(x)
}

/// Per-run record of a diffusion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffusionTrace {
    /// L1 distance between successive (normalized) iterates.
    pub deltas: Vec<f64>,
    /// Mass of each iterate before renormalization.
    pub raw_masses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `(1-γ) x·P + γ (x·e) s`: one step in the additive form.
pub fn step_additive(x: &[f64], p: &SimMatrix, prior: &[f64], gamma: f64) -> Vec<f64> {
    let mass: f64 = x.iter().sum();
    let mut y = p.left_mul_dense(x);
    for (yj, &sj) in y.iter_mut().zip(prior) {
        *yj = (1.0 - gamma) * *yj + gamma * mass * sj;
    }
    y
}

/// `Q = (1-γ) P + γ e·s` as a dense matrix.
pub fn prior_matrix(p: &SimMatrix, prior: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let mut q = p.to_dense();
    for row in q.iter_mut() {
        for (v, &s) in row.iter_mut().zip(prior) {
            *v = (1.0 - gamma) * *v + gamma * s;
        }
    }
    q
}

/// `x·Q` for a dense `Q`: one step in the factored form.
pub fn step_factored(x: &[f64], q: &[Vec<f64>]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (xr, row) in x.iter().zip(q) {
        for (yj, v) in y.iter_mut().zip(row) {
            *yj += xr * v;
        }
    }
    y
}

fn renormalize(y: &mut [f64], norm: Normalization) -> Result<f64> {
    match norm {
        Normalization::Probability => l1_normalize_dense(y),
        Normalization::Minmax => {
            let max = y.iter().copied().fold(0.0, f64::max);
            if !(max > 0.0 && max.is_finite()) {
                return Err(Error::ZeroMass);
            }
            y.iter_mut().for_each(|v| *v /= max);
            Ok(y.iter().sum::<f64>() * max)
        }
    }
}

/// Runs the generalized diffusion on a filtered context.
///
/// For `Iterations::Fixed(n)` exactly `n` steps are taken. For
/// `UntilConvergence` the loop stops once the L1 change drops below
/// `epsilon`, or after `max_iter` steps with `converged = false`.
pub fn diffuse(ctx: &FilteredContext, cfg: &DiffusionConfig) -> Result<(ScoreVector, DiffusionTrace)> {
    cfg.validate()?;
    let prior = normalized_prior(prior_scores(ctx, cfg.direction)?, cfg.normalization)?;
    let p = transition_matrix(ctx, cfg)?.matrix;
    let steps = match cfg.iterations {
        Iterations::Fixed(n) => n,
        Iterations::UntilConvergence => cfg.max_iter,
    };
    let mut x = prior.clone();
    let mut trace = DiffusionTrace::default();
    for _ in 0..steps {
        let mut kx = x.clone();
        knn_threshold_dense(&mut kx, cfg.k);
        let mut y = step_additive(&kx, &p, &prior, cfg.gamma);
        let mass = renormalize(&mut y, cfg.normalization)?;
        let delta: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        trace.raw_masses.push(mass);
        trace.deltas.push(delta);
        trace.iterations += 1;
        x = y;
        trace.converged = delta < cfg.epsilon;
        if trace.converged && cfg.iterations == Iterations::UntilConvergence {
            break;
        }
    }
    if cfg.normalization == Normalization::Minmax {
        let (out, _) = minmax_normalize(&x);
        x = out;
    }
    Ok((ScoreVector::from_dense_nonneg(&x), trace))
}

/// One-step transmedia propagation `K(s, k) · P_cross`, L1-normalized, with
/// `s` the L1-normalized prior scores of the direction.
pub fn cross_media(ctx: &FilteredContext, k: NeighborCap, direction: Direction) -> Result<ScoreVector> {
    let s = l1_normalize(prior_scores(ctx, direction)?)?;
    let seeds = knn_threshold(&s, k);
    let (_, cross) = oriented(ctx, direction);
    let p = row_stochastic(cross).matrix;
    let mut y = vec![0.0; ctx.len()];
    for (r, w) in seeds.iter() {
        let (cols, vals) = p.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            y[c] += w * v;
        }
    }
    l1_normalize_dense(&mut y)?;
    Ok(ScoreVector::from_dense_nonneg(&y))
}

/// Stationary distribution of the walk with prior (`k = l`, run to
/// convergence). Errors with `NotConverged` after `max_iter` steps.
pub fn random_walk(ctx: &FilteredContext, cfg: &DiffusionConfig) -> Result<ScoreVector> {
    let cfg = DiffusionConfig {
        k: NeighborCap::All,
        iterations: Iterations::UntilConvergence,
        ..*cfg
    };
    let (x, trace) = diffuse(ctx, &cfg)?;
    if !trace.converged {
        return Err(Error::NotConverged {
            iterations: trace.iterations,
            last_delta: trace.deltas.last().copied().unwrap_or(f64::INFINITY),
        });
    }
    Ok(x)
}

/// Late-fusion weights over the four score families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha_t: f64,
    pub alpha_v: f64,
    pub alpha_tv: f64,
    pub alpha_vt: f64,
}

impl FusionWeights {
    pub fn new(alpha_t: f64, alpha_v: f64, alpha_tv: f64, alpha_vt: f64) -> Result<Self> {
        let w = Self {
            alpha_t,
            alpha_v,
            alpha_tv,
            alpha_vt,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_t, self.alpha_v, self.alpha_tv, self.alpha_vt];
        if all.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("fusion weights must be non-negative".into()));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "fusion weights must sum to 1, got {}",
                all.iter().sum::<f64>()
            )));
        }
        Ok(())
    }

    pub fn text_only() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0).expect("valid")
    }
}

impl fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.alpha_t, self.alpha_v, self.alpha_tv, self.alpha_vt)
    }
}

impl FromStr for FusionWeights {
    type Err = Error;
    /// Parses `t,v,tv,vt`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("bad weights {s:?}")))?;
        match parts[..] {
            [t, v, tv, vt] => Self::new(t, v, tv, vt),
            _ => Err(Error::InvalidParameter(format!("expected 4 weights t,v,tv,vt, got {s:?}"))),
        }
    }
}

/// Elementwise `α_t s_t + α_v s_v + α_tv tv + α_vt vt`. Absent components
/// must carry zero weight.
pub fn late_fuse(
    weights: &FusionWeights,
    s_t: &ScoreVector,
    s_v: Option<&ScoreVector>,
    tv: Option<&ScoreVector>,
    vt: Option<&ScoreVector>,
) -> Result<ScoreVector> {
    weights.validate()?;
    let l = s_t.dim();
    let parts: [(&'static str, f64, Option<&ScoreVector>); 4] = [
        ("s_t", weights.alpha_t, Some(s_t)),
        ("s_v", weights.alpha_v, s_v),
        ("tv", weights.alpha_tv, tv),
        ("vt", weights.alpha_vt, vt),
    ];
    let mut acc = vec![0.0; l];
    for (name, w, v) in parts {
        if w == 0.0 {
            continue;
        }
        let v = v.ok_or(Error::AbsentComponent(name))?;
        if v.dim() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: v.dim(),
            });
        }
        for (i, s) in v.iter() {
            acc[i] += w * s;
        }
    }
    Ok(ScoreVector::from_dense_nonneg(&acc))
}
