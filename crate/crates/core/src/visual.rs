//! Image signatures: a diagonal GMM visual vocabulary, soft bag-of-visual-words,
//! Fisher Vectors with power and L2 normalization, a 1x1 + 1x3 + 2x2
//! spatial pyramid, and the linear kernel between normalized vectors.
//!
//! Gradient layout for a model with `N` components in dimension `D`:
//! `[alpha_1..alpha_N | mu_1 (D) .. mu_N (D) | sigma_1 (D) .. sigma_N (D)]`,
//! where the weights are the soft-max of `alpha` and `sigma` is the standard
//! deviation. Total length `N * (2D + 1)`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::store::{Channels, LocatedDescriptor};

pub const VARIANCE_FLOOR: f64 = 1e-6;
const WEIGHT_FLOOR: f64 = 1e-12;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl GmmModel {
    /// Validates shapes, normalizes nothing: weights must already sum to one.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || means.len() != n || variances.len() != n {
            return Err(Error::InvalidParameter("component count mismatch".into()));
        }
        let d = means[0].len();
        if d == 0 || means.iter().chain(&variances).any(|v| v.len() != d) {
            return Err(Error::InvalidParameter("descriptor dimension mismatch".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("weights must be a positive simplex".into()));
        }
        if variances.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("variances must be positive".into()));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("means must be finite".into()));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    /// Length of one region's gradient, `N (2D + 1)`.
    pub fn gradient_len(&self) -> usize {
        self.components() * (2 * self.dim() + 1)
    }

    fn log_component(&self, i: usize, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&x, &m), &v) in u.iter().zip(&self.means[i]).zip(&self.variances[i]) {
            let z = x - m;
            acc += LN_2PI + v.ln() + z * z / v;
        }
        self.weights[i].ln() - 0.5 * acc
    }

    /// Log joint `ln(w_i N(u|i))` for every component and the log density.
    fn log_terms(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let terms: Vec<f64> = (0..self.components()).map(|i| self.log_component(i, u)).collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        (terms, lse)
    }

    pub fn log_density(&self, u: &[f64]) -> f64 {
        self.log_terms(u).1
    }

    /// Mean log-likelihood of a descriptor set.
    pub fn mean_log_likelihood(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|u| self.log_density(u)).sum::<f64>() / data.len() as f64
    }

    /// Draws `count` descriptors from the mixture.
    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        use rand_distr::{Distribution, Normal, WeightedIndex};
        let pick = WeightedIndex::new(&self.weights).expect("weights are positive");
        (0..count)
            .map(|_| {
                let i = pick.sample(rng);
                self.means[i]
                    .iter()
                    .zip(&self.variances[i])
                    .map(|(&m, &v)| Normal::new(m, v.sqrt()).expect("positive variance").sample(rng))
                    .collect()
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|&x| crate::store::tsv::fmt_score(x))
                .collect::<Vec<_>>()
                .join(",")
        };
        let io = |e| Error::io("<gmm>", e);
        for i in 0..self.components() {
            writeln!(w, "weight\t{i}\t{}", crate::store::tsv::fmt_score(self.weights[i])).map_err(io)?;
            writeln!(w, "mean\t{i}\t{}", fmt(&self.means[i])).map_err(io)?;
            writeln!(w, "variance\t{i}\t{}", fmt(&self.variances[i])).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
        let mut means: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut vars: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (no, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<gmm>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::Malformed {
                line: no + 1,
                reason: reason.to_string(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(bad("expected label, component, values"));
            }
            let i: usize = f[1].parse().map_err(|_| bad("bad component index"))?;
            let vals = f[2]
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad number")))
                .collect::<Result<Vec<f64>>>()?;
            match f[0] {
                "weight" if vals.len() == 1 => {
                    weights.insert(i, vals[0]);
                }
                "mean" => {
                    means.insert(i, vals);
                }
                "variance" => {
                    vars.insert(i, vals);
                }
                _ => return Err(bad("unknown label")),
            }
        }
        Self::new(
            weights.into_values().collect(),
            means.into_values().collect(),
            vars.into_values().collect(),
        )
    }
}

/// Per-iteration record of an EM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Mean log-likelihood before each M-step (and after the last one).
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tolerance: 1e-6,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ style seeding: first center uniform, then proportional to
/// squared distance to the nearest chosen center.
fn seed_centers(data: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![data[rng.gen_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|u| sq_dist(u, &centers[0])).collect();
    while centers.len() < n {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.gen_range(0..data.len())
        };
        centers.push(data[pick].clone());
        for (i, u) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(u, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn distinct_count(data: &[Vec<f64>], cap: usize) -> usize {
    let mut seen: Vec<&[f64]> = Vec::new();
    for u in data {
        if !seen.iter().any(|s| *s == u.as_slice()) {
            seen.push(u);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// Fits an `n`-component diagonal GMM by EM. Deterministic given `seed`.
pub fn fit_gmm(data: &[Vec<f64>], n: usize, seed: u64) -> Result<GmmModel> {
    fit_gmm_traced(data, n, seed, EmConfig::default()).map(|(m, _)| m)
}

pub fn fit_gmm_traced(data: &[Vec<f64>], n: usize, seed: u64, cfg: EmConfig) -> Result<(GmmModel, FitTrace)> {
    if n == 0 {
        return Err(Error::InvalidParameter("component count must be >= 1".into()));
    }
    let distinct = distinct_count(data, n);
    if distinct < n {
        return Err(Error::TooFewDescriptors { needed: n, got: distinct });
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|u| u.len() != d) {
        return Err(Error::InvalidParameter("descriptors must share a positive dimension".into()));
    }
    let t = data.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|u| u[j]).sum::<f64>() / t).collect();
    let global_var: Vec<f64> = (0..d)
        .map(|j| {
            (data.iter().map(|u| (u[j] - mean[j]).powi(2)).sum::<f64>() / t).max(VARIANCE_FLOOR)
        })
        .collect();
    let mut model = GmmModel {
        weights: vec![1.0 / n as f64; n],
        means: seed_centers(data, n, &mut rng),
        variances: vec![global_var; n],
    };

    let mut trace = FitTrace {
        log_likelihoods: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut resp = vec![0.0; n];
    for _ in 0..cfg.max_iter {
        // E-step with sufficient statistics
        let mut s0 = vec![0.0; n];
        let mut s1 = vec![vec![0.0; d]; n];
        let mut s2 = vec![vec![0.0; d]; n];
        let mut ll = 0.0;
        for u in data {
            let (terms, lse) = model.log_terms(u);
            ll += lse;
            for i in 0..n {
                resp[i] = (terms[i] - lse).exp();
                s0[i] += resp[i];
                for j in 0..d {
                    s1[i][j] += resp[i] * u[j];
                    s2[i][j] += resp[i] * u[j] * u[j];
                }
            }
        }
        let ll = ll / t;
        if let Some(&prev) = trace.log_likelihoods.last() {
            if ll - prev < cfg.tolerance {
                trace.log_likelihoods.push(ll);
                trace.converged = true;
                break;
            }
        }
        trace.log_likelihoods.push(ll);
        trace.iterations += 1;
        // M-step
        for i in 0..n {
            if s0[i] > 1e-10 {
                for j in 0..d {
                    let m = s1[i][j] / s0[i];
                    model.means[i][j] = m;
                    model.variances[i][j] = (s2[i][j] / s0[i] - m * m).max(VARIANCE_FLOOR);
                }
            }
            model.weights[i] = (s0[i] / t).max(WEIGHT_FLOOR);
        }
        let ws: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= ws);
    }
    if !trace.converged {
        trace.log_likelihoods.push(model.mean_log_likelihood(data));
    }
    Ok((model, trace))
}

/// Component posteriors `gamma_i(u)`.
pub fn posterior(gmm: &GmmModel, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != gmm.dim() {
        return Err(Error::DimensionMismatch {
            expected: gmm.dim(),
            actual: u.len(),
        });
    }
    let (terms, lse) = gmm.log_terms(u);
    Ok(terms.into_iter().map(|t| (t - lse).exp()).collect())
}

/// Soft bag of visual words: per component, the summed posteriors.
pub fn bov_vector(gmm: &GmmModel, descriptors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::EmptyDescriptors);
    }
    let mut out = vec![0.0; gmm.components()];
    for u in descriptors {
        for (o, g) in out.iter_mut().zip(posterior(gmm, u)?) {
            *o += g;
        }
    }
    Ok(out)
}

/// Per-descriptor gradient of `ln p(u|lambda)`, accumulated into `out`.
fn accumulate_gradient(gmm: &GmmModel, u: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
    let (n, d) = (gmm.components(), gmm.dim());
    let g = posterior(gmm, u)?;
    for i in 0..n {
        out[i] += scale * (g[i] - gmm.weights[i]);
        for j in 0..d {
            let var = gmm.variances[i][j];
            let sigma = var.sqrt();
            let z = u[j] - gmm.means[i][j];
            out[n + i * d + j] += scale * g[i] * z / var;
            out[n + n * d + i * d + j] += scale * g[i] * (z * z / (var * sigma) - 1.0 / sigma);
        }
    }
    Ok(())
}

/// `G = (1/T) sum_t grad ln p(u_t|lambda)` in the soft-max / standard
/// deviation parameterization.
pub fn fisher_gradient(gmm: &GmmModel, descriptors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::EmptyDescriptors);
    }
    let mut out = vec![0.0; gmm.gradient_len()];
    let scale = 1.0 / descriptors.len() as f64;
    for u in descriptors {
        accumulate_gradient(gmm, u, scale, &mut out)?;
    }
    Ok(out)
}

/// Closed-form diagonal approximation of the Fisher information:
/// `w_i` for `alpha_i`, `w_i / sigma^2` for the means and `2 w_i / sigma^2`
/// for the standard deviations.
pub fn fisher_diag(gmm: &GmmModel) -> Vec<f64> {
    let (n, d) = (gmm.components(), gmm.dim());
    let mut out = vec![0.0; gmm.gradient_len()];
    for i in 0..n {
        let w = gmm.weights[i];
        out[i] = w;
        for j in 0..d {
            let var = gmm.variances[i][j];
            out[n + i * d + j] = w / var;
            out[n + n * d + i * d + j] = 2.0 * w / var;
        }
    }
    out
}

/// Empirical diagonal Fisher information: mean squared per-sample gradient.
pub fn empirical_fisher_diag(gmm: &GmmModel, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyDescriptors);
    }
    let mut out = vec![0.0; gmm.gradient_len()];
    let mut g = vec![0.0; gmm.gradient_len()];
    for u in samples {
        g.iter_mut().for_each(|x| *x = 0.0);
        accumulate_gradient(gmm, u, 1.0, &mut g)?;
        for (o, x) in out.iter_mut().zip(&g) {
            *o += x * x;
        }
    }
    let t = samples.len() as f64;
    out.iter_mut().for_each(|x| *x /= t);
    Ok(out)
}

/// A normalized image signature made of one or more equally weighted blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    values: Vec<f64>,
    /// Block boundaries as `(label, start, len, empty)`.
    blocks: Vec<Block>,
    zero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub start: usize,
    pub len: usize,
    /// True when the block had no input (zero gradient).
    pub empty: bool,
}

impl FisherVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when there was nothing to normalize; `values` are then all zero.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// The unit-norm contents of one block (zero for empty blocks).
    pub fn block_values(&self, b: usize) -> Vec<f64> {
        let blk = &self.blocks[b];
        let v = &self.values[blk.start..blk.start + blk.len];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if blk.empty || norm == 0.0 {
            return vec![0.0; blk.len];
        }
        v.iter().map(|x| x / norm).collect()
    }

    /// Concatenates signatures, giving each non-empty part equal weight and
    /// unit overall norm.
    pub fn concat(parts: Vec<(String, FisherVector)>) -> FisherVector {
        let live = parts.iter().filter(|(_, p)| !p.zero).count();
        let scale = if live > 0 { 1.0 / (live as f64).sqrt() } else { 0.0 };
        let mut values = Vec::new();
        let mut blocks = Vec::new();
        for (label, p) in parts {
            let offset = values.len();
            let pscale = if p.zero { 0.0 } else { scale / p.norm() };
            values.extend(p.values.iter().map(|x| x * pscale));
            for b in p.blocks {
                blocks.push(Block {
                    label: if b.label.is_empty() {
                        label.clone()
                    } else {
                        format!("{label}/{}", b.label)
                    },
                    start: b.start + offset,
                    len: b.len,
                    empty: b.empty || p.zero,
                });
            }
        }
        FisherVector {
            values,
            blocks,
            zero: live == 0,
        }
    }
}

/// Whitening by `1/sqrt(fisher_diag)`, signed square root, then L2
/// normalization. An all-zero result is returned as a flagged zero vector.
pub fn normalize_fv(gradient: &[f64], fisher_diag: &[f64]) -> Result<FisherVector> {
    if gradient.len() != fisher_diag.len() {
        return Err(Error::DimensionMismatch {
            expected: fisher_diag.len(),
            actual: gradient.len(),
        });
    }
    if fisher_diag.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidParameter("fisher_diag must be strictly positive".into()));
    }
    let mut values: Vec<f64> = gradient
        .iter()
        .zip(fisher_diag)
        .map(|(&g, &f)| {
            let x = g / f.sqrt();
            x.signum() * x.abs().sqrt()
        })
        .collect();
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let zero = norm == 0.0 || !norm.is_finite();
    if zero {
        values.iter_mut().for_each(|x| *x = 0.0);
    } else {
        values.iter_mut().for_each(|x| *x /= norm);
    }
    let len = values.len();
    Ok(FisherVector {
        values,
        blocks: vec![Block {
            label: String::new(),
            start: 0,
            len,
            empty: zero,
        }],
        zero,
    })
}

/// Pyramid cells: whole image, three horizontal bands (top to bottom), four
/// quadrants (row-major, top-left first).
pub const PYRAMID_REGIONS: [&str; 8] = ["1x1", "1x3:0", "1x3:1", "1x3:2", "2x2:0", "2x2:1", "2x2:2", "2x2:3"];

/// Region indices (into [`PYRAMID_REGIONS`]) containing the point `(x, y)`.
/// Coordinates are clamped into `[0, 1]`; cell intervals are half-open
/// except at the far edge.
pub fn pyramid_cells(x: f64, y: f64) -> [usize; 3] {
    let (x, y) = (x.clamp(0.0, 1.0), y.clamp(0.0, 1.0));
    let band = ((y * 3.0).floor() as usize).min(2);
    let col = ((x * 2.0).floor() as usize).min(1);
    let row = ((y * 2.0).floor() as usize).min(1);
    [0, 1 + band, 4 + row * 2 + col]
}

/// Spatial-pyramid Fisher Vector for one channel: eight region blocks, each
/// normalized by [`normalize_fv`], concatenated with equal weight. Empty
/// regions contribute flagged zero blocks.
pub fn spatial_pyramid_fv(gmm: &GmmModel, fisher_diag: &[f64], descriptors: &[LocatedDescriptor]) -> Result<FisherVector> {
    let mut regions: Vec<Vec<Vec<f64>>> = vec![Vec::new(); PYRAMID_REGIONS.len()];
    for (i, u) in descriptors.iter().enumerate() {
        let (x, y) = u.location.ok_or(Error::MissingLocation(i))?;
        for c in pyramid_cells(x, y) {
            regions[c].push(u.values.clone());
        }
    }
    let mut parts = Vec::with_capacity(regions.len());
    for (label, descs) in PYRAMID_REGIONS.iter().zip(regions) {
        let fv = if descs.is_empty() {
            normalize_fv(&vec![0.0; gmm.gradient_len()], fisher_diag)?
        } else {
            normalize_fv(&fisher_gradient(gmm, &descs)?, fisher_diag)?
        };
        parts.push((label.to_string(), fv));
    }
    Ok(FisherVector::concat(parts))
}

/// Linear kernel between two normalized signatures.
pub fn fisher_kernel(a: &FisherVector, b: &FisherVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

/// Fitted vocabularies for every descriptor channel of a collection.
#[derive(Debug, Clone)]
pub struct VisualModel {
    channels: BTreeMap<String, (GmmModel, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualParams {
    pub components: usize,
    /// Descriptors sampled per channel for EM.
    pub max_training: usize,
    pub seed: u64,
}

impl Default for VisualParams {
    fn default() -> Self {
        Self {
            components: 8,
            max_training: 20_000,
            seed: 7,
        }
    }
}

impl VisualModel {
    pub fn from_gmms(gmms: BTreeMap<String, GmmModel>) -> Self {
        Self {
            channels: gmms
                .into_iter()
                .map(|(k, g)| {
                    let f = fisher_diag(&g);
                    (k, (g, f))
                })
                .collect(),
        }
    }

    /// Fits one GMM per channel on (a seeded subsample of) the pooled descriptors.
    pub fn fit<'a>(sets: impl IntoIterator<Item = &'a Channels>, params: &VisualParams) -> Result<Self> {
        use rand::seq::SliceRandom;
        let mut pooled: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        for ch in sets {
            for (name, descs) in ch {
                pooled
                    .entry(name.clone())
                    .or_default()
                    .extend(descs.iter().map(|u| u.values.clone()));
            }
        }
        let mut gmms = BTreeMap::new();
        for (k, (name, mut data)) in pooled.into_iter().enumerate() {
            let seed = params.seed.wrapping_add(k as u64);
            if data.len() > params.max_training {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                data.shuffle(&mut rng);
                data.truncate(params.max_training);
            }
            gmms.insert(name, fit_gmm(&data, params.components, seed)?);
        }
        Ok(Self::from_gmms(gmms))
    }

    pub fn gmm(&self, channel: &str) -> Option<&GmmModel> {
        self.channels.get(channel).map(|(g, _)| g)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    /// Pyramid signature concatenated over all model channels; missing
    /// channels give zero blocks.
    pub fn signature(&self, visual: &Channels) -> Result<FisherVector> {
        let mut parts = Vec::new();
        for (name, (gmm, diag)) in &self.channels {
            let fv = match visual.get(name) {
                Some(descs) if !descs.is_empty() => spatial_pyramid_fv(gmm, diag, descs)?,
                _ => spatial_pyramid_fv(gmm, diag, &[])?,
            };
            parts.push((name.clone(), fv));
        }
        Ok(FisherVector::concat(parts))
    }
}

/// Non-negative visual similarity: the kernel clipped at zero.
pub fn visual_similarity(a: &FisherVector, b: &FisherVector) -> Result<f64> {
    Ok(fisher_kernel(a, b)?.max(0.0))
}
