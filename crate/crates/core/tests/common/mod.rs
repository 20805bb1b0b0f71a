#![allow(dead_code)]

use fusegraph::filter::FilteredContext;
use fusegraph::store::{ScoreVector, SimMatrix};
use rand::Rng;

/// Positive scores on every one of `l` entries.
pub fn positive_vector(rng: &mut impl Rng, l: usize) -> ScoreVector {
    let v: Vec<f64> = (0..l).map(|_| rng.gen_range(0.01..1.0)).collect();
    ScoreVector::from_dense(&v).unwrap()
}

/// Non-negative scores with roughly `density` of the entries nonzero.
pub fn sparse_vector(rng: &mut impl Rng, l: usize, density: f64) -> ScoreVector {
    let v: Vec<f64> = (0..l)
        .map(|_| if rng.gen::<f64>() < density { rng.gen_range(0.01..1.0) } else { 0.0 })
        .collect();
    ScoreVector::from_dense(&v).unwrap()
}

pub fn sparse_matrix(rng: &mut impl Rng, l: usize, density: f64) -> SimMatrix {
    let rows: Vec<Vec<f64>> = (0..l)
        .map(|r| {
            (0..l)
                .map(|c| {
                    if r == c || rng.gen::<f64>() < density {
                        rng.gen_range(0.01..1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    SimMatrix::from_dense(&rows).unwrap()
}

pub fn random_context(rng: &mut impl Rng, l: usize) -> FilteredContext {
    let s_t = positive_vector(rng, l);
    let s_v = sparse_vector(rng, l, 0.7);
    let sim_t = sparse_matrix(rng, l, 0.2);
    let sim_v = sparse_matrix(rng, l, 0.3);
    FilteredContext::from_local("q", s_t, Some(s_v), sim_t, sim_v).unwrap()
}

/// Solves the stationary system `x (I - (1-γ) P) = γ s` with a dense LU.
pub fn stationary(p: &SimMatrix, prior: &[f64], gamma: f64) -> Vec<f64> {
    let l = prior.len();
    let pd = p.to_dense();
    // transpose: (I - (1-γ) P)^T x^T = γ s^T
    let a = nalgebra::DMatrix::from_fn(l, l, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - (1.0 - gamma) * pd[c][r]
    });
    let b = nalgebra::DVector::from_iterator(l, prior.iter().map(|s| gamma * s));
    a.lu().solve(&b).expect("non-singular").iter().copied().collect()
}
