use fusegraph::store::LocatedDescriptor;
use fusegraph::visual::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_gmm(rng: &mut ChaCha8Rng, n: usize, d: usize) -> GmmModel {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    GmmModel::new(
        raw.iter().map(|w| w / s).collect(),
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect(),
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.3..2.0)).collect()).collect(),
    )
    .unwrap()
}

/// Parameters in gradient layout: soft-max logits, means, standard deviations.
fn to_params(g: &GmmModel) -> Vec<f64> {
    let mut p: Vec<f64> = g.weights().iter().map(|w| w.ln()).collect();
    p.extend(g.means().iter().flatten());
    p.extend(g.variances().iter().flatten().map(|v| v.sqrt()));
    p
}

/// Mean log-likelihood computed from scratch for a parameter vector.
fn mean_ll(p: &[f64], n: usize, d: usize, data: &[Vec<f64>]) -> f64 {
    let alpha = &p[..n];
    let amax = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = alpha.iter().map(|a| (a - amax).exp()).sum();
    let w: Vec<f64> = alpha.iter().map(|a| (a - amax).exp() / z).collect();
    let mut total = 0.0;
    for u in data {
        let mut dens = 0.0;
        for i in 0..n {
            let mut log_pdf = 0.0;
            for j in 0..d {
                let mu = p[n + i * d + j];
                let sd = p[n + n * d + i * d + j];
                let z = (u[j] - mu) / sd;
                log_pdf += -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
            dens += w[i] * log_pdf.exp();
        }
        total += dens.ln();
    }
    total / data.len() as f64
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=8);
        let g = random_gmm(&mut rng, n, d);
        let t = rng.gen_range(1..40);
        let data: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
        let analytic = fisher_gradient(&g, &data).unwrap();
        let p = to_params(&g);
        for k in 0..p.len() {
            let h = 1e-5 * p[k].abs().max(1.0);
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (mean_ll(&up, n, d, &data) - mean_ll(&dn, n, d, &data)) / (2.0 * h);
            let rel = (analytic[k] - fd).abs() / fd.abs().max(1e-4);
            assert!(rel < 1e-4, "coord {k}: analytic {} fd {fd}", analytic[k]);
        }
    }
}

#[test]
fn mean_gradient_vanishes_at_the_mean() {
    let g = GmmModel::new(vec![1.0], vec![vec![0.5, -1.0, 2.0]], vec![vec![1.0, 2.0, 0.5]]).unwrap();
    let grad = fisher_gradient(&g, &[vec![0.5, -1.0, 2.0]]).unwrap();
    assert_eq!(&grad[1..4], &[0.0, 0.0, 0.0]);
}

#[test]
fn score_has_zero_expectation_on_model_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_gmm(&mut rng, 3, 4);
    let on = g.sample(50_000, &mut rng);
    let off: Vec<Vec<f64>> = on.iter().map(|u| u.iter().map(|x| 0.5 * x + 1.5).collect()).collect();
    let norm = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (a, b) = (norm(fisher_gradient(&g, &on).unwrap()), norm(fisher_gradient(&g, &off).unwrap()));
    assert!(a < 0.05 * b, "on {a} off {b}");
}

#[test]
fn closed_form_fisher_close_to_empirical_when_separated() {
    let g = GmmModel::new(
        vec![0.3, 0.7],
        vec![vec![-20.0, 0.0], vec![20.0, 5.0]],
        vec![vec![1.0, 2.0], vec![0.5, 1.0]],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = g.sample(100_000, &mut rng);
    let emp = empirical_fisher_diag(&g, &samples).unwrap();
    let closed = fisher_diag(&g);
    // alpha entries are w(1-w) empirically vs w in closed form; compare the rest
    for k in 2..closed.len() {
        assert!((emp[k] - closed[k]).abs() < 0.05 * closed[k], "coord {k}: {} vs {}", emp[k], closed[k]);
    }
}

#[test]
fn single_gaussian_fit_is_sample_mle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dist = Normal::new(2.0, 1.5).unwrap();
    let data: Vec<Vec<f64>> = (0..2000).map(|_| vec![dist.sample(&mut rng), -dist.sample(&mut rng)]).collect();
    let g = fit_gmm(&data, 1, 9).unwrap();
    for j in 0..2 {
        let mean = data.iter().map(|u| u[j]).sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|u| (u[j] - mean).powi(2)).sum::<f64>() / data.len() as f64;
        let se = (var / data.len() as f64).sqrt();
        assert!((g.means()[0][j] - mean).abs() < 3.0 * se);
        assert!((g.variances()[0][j] - var).abs() < 1e-6 * var);
    }
}

/// Lloyd's algorithm with two centers started at the extremes.
fn kmeans2(data: &[Vec<f64>]) -> Vec<usize> {
    let key = |u: &Vec<f64>| u.iter().sum::<f64>();
    let lo = data.iter().min_by(|a, b| key(a).total_cmp(&key(b))).unwrap().clone();
    let hi = data.iter().max_by(|a, b| key(a).total_cmp(&key(b))).unwrap().clone();
    let mut centers = [lo, hi];
    let mut assign = vec![0; data.len()];
    for _ in 0..50 {
        for (a, u) in assign.iter_mut().zip(data) {
            let d = |c: &Vec<f64>| u.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            *a = if d(&centers[0]) <= d(&centers[1]) { 0 } else { 1 };
        }
        for k in 0..2 {
            let members: Vec<&Vec<f64>> = data.iter().zip(&assign).filter(|(_, &a)| a == k).map(|(u, _)| u).collect();
            centers[k] = (0..data[0].len())
                .map(|j| members.iter().map(|u| u[j]).sum::<f64>() / members.len() as f64)
                .collect();
        }
    }
    assign
}

#[test]
fn two_clusters_partitioned_like_kmeans() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = GmmModel::new(vec![0.4, 0.6], vec![vec![-6.0, 0.0, 1.0], vec![6.0, 2.0, -1.0]], vec![vec![1.0; 3]; 2]).unwrap();
    let data = truth.sample(1500, &mut rng);
    let g = fit_gmm(&data, 2, 3).unwrap();
    let km = kmeans2(&data);
    let post: Vec<Vec<f64>> = data.iter().map(|u| posterior(&g, u).unwrap()).collect();
    // match components to k-means labels through the first point
    let comp_of = |k: usize| if post[km.iter().position(|&a| a == k).unwrap()][0] > 0.5 { 0 } else { 1 };
    let (c0, c1) = (comp_of(0), comp_of(1));
    assert_ne!(c0, c1);
    for k in 0..2 {
        let c = if k == 0 { c0 } else { c1 };
        let members: Vec<usize> = (0..data.len()).filter(|&i| km[i] == k).collect();
        let mass: f64 = members.iter().map(|&i| post[i][c]).sum::<f64>() / members.len() as f64;
        assert!(mass > 0.99, "cluster {k}: {mass}");
    }
}

#[test]
fn fit_is_deterministic_and_em_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let truth = random_gmm(&mut rng, 4, 3);
    let data = truth.sample(3000, &mut rng);
    let a = fit_gmm(&data, 4, 77).unwrap();
    let b = fit_gmm(&data, 4, 77).unwrap();
    assert_eq!(a, b);
    let (_, trace) = fit_gmm_traced(&data, 4, 77, EmConfig::default()).unwrap();
    for w in trace.log_likelihoods.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn too_few_descriptors_rejected() {
    let data = vec![vec![0.0], vec![1.0]];
    assert!(fit_gmm(&data, 3, 1).is_err());
}

#[test]
fn posterior_and_bov() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = random_gmm(&mut rng, 4, 3);
    let descs: Vec<Vec<f64>> = (0..25).map(|_| (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    let mut acc = vec![0.0; 4];
    for u in &descs {
        let p = posterior(&g, u).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, x) in acc.iter_mut().zip(&p) {
            *a += x;
        }
    }
    let bov = bov_vector(&g, &descs).unwrap();
    for (a, b) in acc.iter().zip(&bov) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((bov.iter().sum::<f64>() - 25.0).abs() < 1e-10);
    assert_eq!(bov_vector(&g, &descs[..1]).unwrap(), posterior(&g, &descs[0]).unwrap());
}

#[test]
fn normalization_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = random_gmm(&mut rng, 3, 2);
    let diag = fisher_diag(&g);
    let zero = normalize_fv(&vec![0.0; diag.len()], &diag).unwrap();
    assert!(zero.is_zero());
    let v: Vec<f64> = (0..diag.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v2: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
    let (a, b) = (normalize_fv(&v, &diag).unwrap(), normalize_fv(&v2, &diag).unwrap());
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-15);
    }
    assert!((a.norm() - 1.0).abs() < 1e-12);
    assert!((fisher_kernel(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    let c = normalize_fv(&(0..diag.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(), &diag).unwrap();
    let explicit: f64 = a.values().iter().zip(c.values()).map(|(x, y)| x * y).sum();
    assert_eq!(fisher_kernel(&a, &c).unwrap(), explicit);
}

#[test]
fn pyramid_cells_match_rectangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rects: [(f64, f64, f64, f64); 8] = [
        (0.0, 1.0, 0.0, 1.0),
        (0.0, 1.0, 0.0, 1.0 / 3.0),
        (0.0, 1.0, 1.0 / 3.0, 2.0 / 3.0),
        (0.0, 1.0, 2.0 / 3.0, 1.0),
        (0.0, 0.5, 0.0, 0.5),
        (0.5, 1.0, 0.0, 0.5),
        (0.0, 0.5, 0.5, 1.0),
        (0.5, 1.0, 0.5, 1.0),
    ];
    for _ in 0..1000 {
        let (x, y): (f64, f64) = (rng.gen(), rng.gen());
        let inside: Vec<usize> = rects
            .iter()
            .enumerate()
            .filter(|(_, &(x0, x1, y0, y1))| x >= x0 && x < x1 && y >= y0 && y < y1)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(pyramid_cells(x, y).to_vec(), inside, "({x}, {y})");
    }
}

#[test]
fn pyramid_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = random_gmm(&mut rng, 2, 3);
    let diag = fisher_diag(&g);
    let top: Vec<LocatedDescriptor> = (0..30)
        .map(|_| LocatedDescriptor::new(rng.gen(), rng.gen_range(0.0..0.33), (0..3).map(|_| rng.gen()).collect()))
        .collect();
    let fv = spatial_pyramid_fv(&g, &diag, &top).unwrap();
    assert_eq!(fv.blocks().len(), 8);
    assert!(!fv.blocks()[1].empty);
    assert!(fv.blocks()[2].empty && fv.blocks()[3].empty);
    assert!((fv.norm() - 1.0).abs() < 1e-12);
    let pooled: Vec<Vec<f64>> = top.iter().map(|u| u.values.clone()).collect();
    let whole = normalize_fv(&fisher_gradient(&g, &pooled).unwrap(), &diag).unwrap();
    for (a, b) in fv.block_values(0).iter().zip(whole.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    let missing = vec![LocatedDescriptor {
        location: None,
        values: vec![0.0; 3],
    }];
    assert!(spatial_pyramid_fv(&g, &diag, &missing).is_err());
}

#[test]
fn gmm_text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_gmm(&mut rng, 3, 5);
    let mut buf = Vec::new();
    g.write(&mut buf).unwrap();
    assert_eq!(GmmModel::read(buf.as_slice()).unwrap(), g);
}
