//! Browser bindings for three interactive views: a diffusion trace
//! explorer, MAP as a function of one parameter, and the posterior / Fisher
//! score field of a two-dimensional GMM.
//!
//! Every export returns a JSON string; the plain-Rust functions behind them
//! are public so they can be tested natively.

use fusegraph::fusion::{diffuse, DiffusionConfig, Direction, FusionWeights, Iterations, NeighborCap, Preset};
use fusegraph::pipeline::{build_contexts, run_contexts, Contexts, Inputs, ModelOptions, RunConfig, Scenario};
use fusegraph::synth::{generate, SynthSpec};
use fusegraph::visual::{fisher_diag, fisher_gradient, fit_gmm, posterior, GmmModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub type Result<T> = std::result::Result<T, fusegraph::Error>;

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Diffusion settings as passed from the page. `k == 0` means `k = l`.
#[derive(Debug, Clone, Copy)]
pub struct Knobs {
    pub k: usize,
    pub gamma: f64,
    pub beta: f64,
    /// 0 means until convergence.
    pub iterations: usize,
}

impl Knobs {
    fn config(self) -> DiffusionConfig {
        DiffusionConfig {
            k: if self.k == 0 { NeighborCap::All } else { NeighborCap::Top(self.k) },
            gamma: self.gamma,
            beta: self.beta,
            iterations: if self.iterations == 0 {
                Iterations::UntilConvergence
            } else {
                Iterations::Fixed(self.iterations)
            },
            ..Preset::CmDefault.config()
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub docs: Vec<String>,
    pub relevant: Vec<bool>,
    /// One score vector per step, over the filtered candidates.
    pub iterates: Vec<Vec<f64>>,
    pub deltas: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub parameter: String,
    pub labels: Vec<String>,
    pub map: Vec<Option<f64>>,
    pub text_map: f64,
    pub visual_map: f64,
}

/// A small synthetic collection with its filtered contexts, kept in memory.
#[wasm_bindgen]
pub struct Explorer {
    inputs: Inputs,
    contexts: Contexts,
    m_cap: usize,
}

const MAX_TRACE_STEPS: usize = 60;

impl Explorer {
    pub fn build(seed: u64, second_hop: bool) -> Result<Self> {
        let base = if second_hop { SynthSpec::noisy_second_hop() } else { SynthSpec::default() };
        let spec = SynthSpec {
            clusters: 6,
            docs_per_cluster: 12,
            queries_per_cluster: 2,
            hubs: if second_hop { 16 } else { 0 },
            ..base
        };
        let dir = generate(seed, &spec)?.into_collection_dir()?;
        let opts = ModelOptions {
            visual: fusegraph::visual::VisualParams {
                components: 4,
                ..Default::default()
            },
            ..ModelOptions::default()
        };
        let inputs = Inputs::from_collection(&dir, Scenario::Symmetric, &opts)?;
        let m_cap = 40;
        let contexts = build_contexts(&inputs, Scenario::Symmetric, m_cap);
        Ok(Self { inputs, contexts, m_cap })
    }

    pub fn queries(&self) -> Vec<String> {
        self.inputs.query_ids.clone()
    }

    /// Iterates of one diffusion, recomputed for each prefix length so every
    /// step shows exactly what a run with that many iterations returns.
    pub fn trace_of(&self, query: usize, knobs: Knobs, direction: Direction) -> Result<Trace> {
        let (qid, ctx) = self
            .contexts
            .get(query)
            .ok_or_else(|| fusegraph::Error::InvalidParameter(format!("no query {query}")))?;
        let ctx = ctx.as_ref().map_err(|e| fusegraph::Error::InvalidParameter(e.to_string()))?;
        let cfg = knobs.config().with_direction(direction);
        let (_, full) = diffuse(ctx, &cfg)?;
        let steps = full.iterations.clamp(1, MAX_TRACE_STEPS);
        let iterates = (1..=steps)
            .map(|i| {
                let step = DiffusionConfig {
                    iterations: Iterations::Fixed(i),
                    ..cfg
                };
                diffuse(ctx, &step).map(|(x, _)| x.to_dense())
            })
            .collect::<Result<Vec<_>>>()?;
        let docs: Vec<String> = ctx.selected.iter().map(|&g| self.inputs.ids.id(g).to_string()).collect();
        Ok(Trace {
            relevant: docs.iter().map(|d| self.inputs.qrels.is_relevant(qid, d)).collect(),
            docs,
            iterates,
            deltas: full.deltas,
            converged: full.converged,
        })
    }

    fn map_for(&self, cfg: &RunConfig) -> Option<f64> {
        run_contexts(&self.inputs, &self.contexts, cfg).ok().map(|r| r.report.map)
    }

    /// MAP while one of `k`, `gamma`, `beta`, `iters` varies over a fixed
    /// range and the others stay at `knobs`.
    pub fn curve(&self, parameter: &str, knobs: Knobs, weights: FusionWeights) -> Result<Curve> {
        let variants: Vec<(String, Knobs)> = match parameter {
            "k" => [1, 2, 3, 5, 10, 20, 0]
                .iter()
                .map(|&k| (if k == 0 { "l".into() } else { k.to_string() }, Knobs { k, ..knobs }))
                .collect(),
            "gamma" | "beta" => (0..=10)
                .map(|i| {
                    let v = i as f64 / 10.0;
                    let kn = if parameter == "gamma" { Knobs { gamma: v, ..knobs } } else { Knobs { beta: v, ..knobs } };
                    (format!("{v:.1}"), kn)
                })
                .collect(),
            "iters" => [1, 2, 3, 5, 10, 0]
                .iter()
                .map(|&i| (if i == 0 { "inf".into() } else { i.to_string() }, Knobs { iterations: i, ..knobs }))
                .collect(),
            other => return Err(fusegraph::Error::InvalidParameter(format!("unknown parameter {other:?}"))),
        };
        let run = |diffusion: DiffusionConfig, weights: FusionWeights| RunConfig {
            scenario: Scenario::Symmetric,
            diffusion,
            weights,
            m_cap: self.m_cap,
        };
        weights.validate()?;
        let map = variants.iter().map(|(_, kn)| self.map_for(&run(kn.config(), weights))).collect();
        let base = knobs.config();
        Ok(Curve {
            parameter: parameter.to_string(),
            labels: variants.into_iter().map(|(l, _)| l).collect(),
            map,
            text_map: self.map_for(&run(base, FusionWeights::text_only())).unwrap_or(0.0),
            visual_map: self.map_for(&run(base, FusionWeights::new(0.0, 1.0, 0.0, 0.0)?)).unwrap_or(0.0),
        })
    }
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, second_hop: bool) -> std::result::Result<Explorer, JsError> {
        Self::build(seed as u64, second_hop).map_err(|e| JsError::new(&e.to_string()))
    }

    /// JSON array of query ids.
    #[wasm_bindgen(js_name = queryIds)]
    pub fn query_ids(&self) -> std::result::Result<String, JsError> {
        to_js(Ok(self.queries()))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn trace(
        &self,
        query: usize,
        k: usize,
        gamma: f64,
        beta: f64,
        iterations: usize,
        direction: &str,
    ) -> std::result::Result<String, JsError> {
        let dir = direction.parse().map_err(|e: fusegraph::Error| JsError::new(&e.to_string()))?;
        to_js(self.trace_of(query, Knobs { k, gamma, beta, iterations }, dir))
    }

    #[wasm_bindgen(js_name = mapCurve)]
    #[allow(clippy::too_many_arguments)]
    pub fn map_curve(
        &self,
        parameter: &str,
        k: usize,
        gamma: f64,
        beta: f64,
        iterations: usize,
        weights: &str,
    ) -> std::result::Result<String, JsError> {
        let w = weights.parse().map_err(|e: fusegraph::Error| JsError::new(&e.to_string()))?;
        to_js(self.curve(parameter, Knobs { k, gamma, beta, iterations }, w))
    }
}

#[derive(Debug, Serialize)]
pub struct Field {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Bounding box `[x0, y0, x1, y1]` of the grid.
    pub bounds: [f64; 4],
    pub resolution: usize,
    /// Row-major, `resolution^2` cells.
    pub argmax: Vec<usize>,
    pub max_posterior: Vec<f64>,
    /// Norm of the whitened single-descriptor score.
    pub fisher_norm: Vec<f64>,
}

/// Samples points from a random 2-D mixture, fits a GMM with `components`
/// Gaussians and evaluates posteriors and score norms on a grid.
pub fn gmm_field_of(seed: u64, components: usize, samples: usize, resolution: usize) -> Result<Field> {
    if resolution == 0 || resolution > 200 {
        return Err(fusegraph::Error::InvalidParameter("resolution must be in [1, 200]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth_n = rng.gen_range(2..=5);
    let truth = GmmModel::new(
        vec![1.0 / truth_n as f64; truth_n],
        (0..truth_n).map(|_| vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]).collect(),
        (0..truth_n).map(|_| vec![rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5)]).collect(),
    )?;
    let data = truth.sample(samples, &mut rng);
    let gmm = fit_gmm(&data, components, seed)?;
    let fdiag = fisher_diag(&gmm);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &data {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (pad_x, pad_y) = (0.1 * (x1 - x0).max(1e-9), 0.1 * (y1 - y0).max(1e-9));
    let bounds = [x0 - pad_x, y0 - pad_y, x1 + pad_x, y1 + pad_y];
    let cells = resolution * resolution;
    let (mut argmax, mut max_posterior, mut fisher_norm) =
        (Vec::with_capacity(cells), Vec::with_capacity(cells), Vec::with_capacity(cells));
    for r in 0..resolution {
        for c in 0..resolution {
            let u = vec![
                bounds[0] + (c as f64 + 0.5) / resolution as f64 * (bounds[2] - bounds[0]),
                bounds[1] + (r as f64 + 0.5) / resolution as f64 * (bounds[3] - bounds[1]),
            ];
            let post = posterior(&gmm, &u)?;
            let (best, p) = post
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc });
            argmax.push(best);
            max_posterior.push(p);
            let g = fisher_gradient(&gmm, &[u])?;
            let norm = g
                .iter()
                .zip(&fdiag)
                .map(|(gi, fi)| if *fi > 0.0 { gi * gi / fi } else { 0.0 })
                .sum::<f64>()
                .sqrt();
            fisher_norm.push(norm);
        }
    }
    Ok(Field {
        points: data.iter().map(|p| [p[0], p[1]]).collect(),
        weights: gmm.weights().to_vec(),
        means: gmm.means().to_vec(),
        variances: gmm.variances().to_vec(),
        bounds,
        resolution,
        argmax,
        max_posterior,
        fisher_norm,
    })
}

#[wasm_bindgen(js_name = gmmField)]
pub fn gmm_field(seed: u32, components: usize, samples: usize, resolution: usize) -> std::result::Result<String, JsError> {
    to_js(gmm_field_of(seed as u64, components, samples, resolution))
}
