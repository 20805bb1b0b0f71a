use std::collections::BTreeMap;

use fusegraph::eval::{average_precision, evaluate, paired_ttest};
use fusegraph::filter::{select_top_l, Selection};
use fusegraph::store::{trec, tsv, DocIds, Qrels, Run, ScoreVector, SimMatrix};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(n: usize) -> DocIds {
    DocIds::new((0..n).map(|i| format!("d{i:05}"))).unwrap()
}

#[test]
fn ten_thousand_triplets_round_trip_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 400;
    let mut seen = std::collections::HashSet::new();
    let mut triplets = Vec::new();
    while triplets.len() < 10_000 {
        let (r, c) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if seen.insert((r, c)) {
            // span many magnitudes to exercise both decimal and exponent forms
            let v = rng.gen::<f64>() * 10f64.powi(rng.gen_range(-12..8));
            triplets.push((r, c, v));
        }
    }
    let m = SimMatrix::from_triplets(n, triplets).unwrap();
    let ids = ids(n);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    tsv::save_sim_matrix(&a, &m, &ids).unwrap();
    let back = tsv::load_sim_matrix(&a, &ids).unwrap();
    assert_eq!(back, m);
    tsv::save_sim_matrix(&b, &back, &ids).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn asymmetric_triplets_kept() {
    let ids = DocIds::new(["a", "b"]).unwrap();
    let m = tsv::read_sim_matrix("a\tb\t0.5\nb\ta\t0.2\n".as_bytes(), &ids).unwrap();
    assert_eq!(m.get(0, 1), 0.5);
    assert_eq!(m.get(1, 0), 0.2);
}

#[test]
fn score_vectors_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ids = ids(50);
    let mut vs = BTreeMap::new();
    for q in 0..5 {
        let v: Vec<f64> = (0..50).map(|_| if rng.gen_bool(0.4) { rng.gen() } else { 0.0 }).collect();
        vs.insert(format!("q{q}"), ScoreVector::from_dense(&v).unwrap());
    }
    let mut buf = Vec::new();
    tsv::write_score_vectors(&mut buf, &vs, &ids).unwrap();
    assert_eq!(tsv::read_score_vectors(buf.as_slice(), &ids).unwrap(), vs);
}

#[test]
fn run_format_and_ties() {
    let mut run = Run::new();
    run.insert("q1".into(), vec![("d2".into(), 0.3), ("d1".into(), 0.9)]);
    run.insert("q2".into(), vec![("d2".into(), 0.5), ("d1".into(), 0.5)]);
    run.insert("q3".into(), vec![]);
    let mut buf = Vec::new();
    trec::write_run(&mut buf, &run, "fusegraph").unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        vec![
            "q1 Q0 d1 1 0.9 fusegraph",
            "q1 Q0 d2 2 0.3 fusegraph",
            "q2 Q0 d1 1 0.5 fusegraph",
            "q2 Q0 d2 2 0.5 fusegraph",
        ]
    );
    let back = trec::read_run(text.as_bytes()).unwrap();
    assert_eq!(back["q2"][0].0, "d1");

    run.insert("q4".into(), vec![("d1".into(), f64::NAN)]);
    assert!(trec::write_run(Vec::new(), &run, "x").is_err());
}

#[test]
fn top_l_of_five_thousand() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 8000;
    let dense: Vec<f64> = (0..n).map(|i| if i % 8 < 5 { rng.gen_range(0.001..1.0) } else { 0.0 }).collect();
    let s = ScoreVector::from_dense(&dense).unwrap();
    assert_eq!(s.nnz(), 5000);
    let sel = select_top_l("q", &s, 1000, &ids(n)).unwrap();
    assert_eq!(sel.len(), 1000);
    let mut sorted: Vec<f64> = dense.iter().copied().filter(|&v| v > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cut = sorted[1000];
    assert!(sel.iter().all(|&i| dense[i] >= cut));
}

#[test]
fn filters_match_mask_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 300;
    let ids = ids(n);
    for _ in 0..10 {
        let s_t = ScoreVector::from_dense(&(0..n).map(|_| if rng.gen_bool(0.3) { rng.gen() } else { 0.0 }).collect::<Vec<_>>()).unwrap();
        let s_v = ScoreVector::from_dense(&(0..n).map(|_| if rng.gen_bool(0.5) { rng.gen() } else { 0.0 }).collect::<Vec<_>>()).unwrap();
        let trip: Vec<(usize, usize, f64)> = (0..3000).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen::<f64>() + 0.01)).collect();
        let m = SimMatrix::from_triplets(n, dedup(trip)).unwrap();
        let sel = Selection::new("q", &s_t, 40, &ids).unwrap();
        let fv = sel.filter_vector(&s_v).to_dense();
        let fm = sel.filter_matrix(&m).to_dense();
        for (l, &g) in sel.selected.iter().enumerate() {
            assert_eq!(fv[l].to_bits(), s_v.get(g).to_bits());
            for (l2, &g2) in sel.selected.iter().enumerate() {
                assert_eq!(fm[l][l2].to_bits(), m.get(g, g2).to_bits());
            }
        }
        // self-filter is the dense top-l score list
        let ft = sel.filter_vector(&s_t);
        assert_eq!(ft.nnz(), sel.len());
    }
}

fn dedup(t: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    let mut m = BTreeMap::new();
    for (r, c, v) in t {
        m.entry((r, c)).or_insert(v);
    }
    m.into_iter().map(|((r, c), v)| (r, c, v)).collect()
}

/// AP as an exact fraction.
fn ap_oracle(ranked: &[String], relevant: &[String], total_relevant: usize) -> Ratio<i128> {
    let mut hits = 0i128;
    let mut sum = Ratio::from_integer(0i128);
    for (i, d) in ranked.iter().enumerate() {
        if relevant.contains(d) {
            hits += 1;
            sum += Ratio::new(hits, i as i128 + 1);
        }
    }
    sum / Ratio::from_integer(total_relevant as i128)
}

#[test]
fn average_precision_matches_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let n = rng.gen_range(1..30);
        let mut docs: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        docs.shuffle(&mut rng);
        let ranked_len = rng.gen_range(0..=n);
        let relevant: Vec<String> = docs.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
        let mut qrels = Qrels::default();
        for d in &docs {
            qrels.insert("q", d.clone(), relevant.contains(d));
        }
        let ranked = &docs[..ranked_len];
        let got = average_precision(ranked, &qrels, "q");
        if relevant.is_empty() {
            assert_eq!(got, None);
            continue;
        }
        let exact = ap_oracle(ranked, &relevant, relevant.len());
        let expect = *exact.numer() as f64 / *exact.denom() as f64;
        assert!((got.unwrap() - expect).abs() <= 4.0 * f64::EPSILON * expect.max(f64::MIN_POSITIVE));
    }
}

#[test]
fn ap_ignores_nonrelevant_labels() {
    let mut q = Qrels::default();
    q.insert("q", "r1", true);
    q.insert("q", "r2", true);
    let a = average_precision(&["n1", "r1", "n2", "r2"], &q, "q");
    let b = average_precision(&["x9", "r1", "zz", "r2"], &q, "q");
    assert_eq!(a, b);
}

#[test]
fn ttest_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a: BTreeMap<String, f64> = (0..30).map(|i| (format!("q{i:02}"), rng.gen())).collect();
    let b: BTreeMap<String, f64> = (0..30).map(|i| (format!("q{i:02}"), rng.gen())).collect();
    let d: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let got = paired_ttest(&a, &b).unwrap();
    assert!((got.t - t).abs() < 1e-10);
    assert_eq!(got.dof, 29);
    assert!((paired_ttest(&b, &a).unwrap().t + got.t).abs() < 1e-12);
}

#[test]
fn map_excludes_unjudged_and_counts_missing() {
    let mut qrels = Qrels::default();
    qrels.insert("q1", "a", true);
    qrels.insert("q2", "b", true);
    qrels.insert("q3", "c", false);
    let mut run = Run::new();
    run.insert("q1".into(), vec![("a".into(), 1.0)]);
    run.insert("q3".into(), vec![("c".into(), 1.0)]);
    let r = evaluate(&run, &qrels);
    assert_eq!(r.per_query_ap.len(), 2);
    assert_eq!(r.map, 0.5);
    assert_eq!(r.skipped, vec!["q3".to_string()]);
}
