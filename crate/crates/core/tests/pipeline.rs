use std::path::Path;

use fusegraph::fusion::{FusionWeights, Iterations, NeighborCap, Preset};
use fusegraph::pipeline::*;
use fusegraph::store::{rank_scores, trec, CollectionDir};
use fusegraph::synth::{generate, make_synthetic, SynthSpec};

fn small() -> SynthSpec {
    SynthSpec {
        clusters: 6,
        docs_per_cluster: 12,
        ..SynthSpec::default()
    }
}

fn inputs(spec: &SynthSpec, seed: u64, scenario: Scenario) -> Inputs {
    let dir = generate(seed, spec).unwrap().into_collection_dir().unwrap();
    Inputs::from_collection(&dir, scenario, &ModelOptions::default()).unwrap()
}

#[test]
fn text_only_weights_reproduce_text_ranking() {
    let inp = inputs(&small(), 1, Scenario::Asymmetric);
    let cfg = RunConfig {
        weights: FusionWeights::text_only(),
        m_cap: 20,
        ..RunConfig::default()
    };
    let r = run_pipeline(&inp, &cfg).unwrap();
    for (q, list) in &r.run {
        let baseline = rank_scores(&inp.s_t[q], &inp.ids, Some(20));
        let a: Vec<&str> = list.iter().map(|(d, _)| d.as_str()).collect();
        let b: Vec<&str> = baseline.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(a, b, "{q}");
    }
}

#[test]
fn separable_collection_is_perfect_for_text() {
    let spec = SynthSpec {
        clusters: 2,
        docs_per_cluster: 15,
        text_noise: 0.0,
        text_overlap: 0.0,
        visual_noise: 0.0,
        ..SynthSpec::default()
    };
    let inp = inputs(&spec, 2, Scenario::Asymmetric);
    let cfg = RunConfig {
        weights: FusionWeights::text_only(),
        ..RunConfig::default()
    };
    assert_eq!(run_pipeline(&inp, &cfg).unwrap().report.map, 1.0);
}

#[test]
fn clean_images_rescue_noisy_text() {
    let spec = SynthSpec {
        text_noise: 1.0,
        visual_noise: 0.0,
        descriptors_per_query: 24,
        ..small()
    };
    let inp = inputs(&spec, 3, Scenario::Symmetric);
    let base = RunConfig {
        scenario: Scenario::Symmetric,
        m_cap: 100_000,
        ..RunConfig::default()
    };
    let text = run_pipeline(&inp, &RunConfig { weights: FusionWeights::text_only(), ..base }).unwrap();
    let visual = run_pipeline(&inp, &RunConfig { weights: FusionWeights::new(0.0, 1.0, 0.0, 0.0).unwrap(), ..base }).unwrap();
    assert!(visual.report.map > text.report.map, "visual {} text {}", visual.report.map, text.report.map);
}

#[test]
fn asymmetric_guard() {
    let inp = inputs(&small(), 4, Scenario::Asymmetric);
    assert!(inp.s_v.is_none());
    let cfg = RunConfig {
        weights: FusionWeights::new(0.5, 0.0, 0.25, 0.25).unwrap(),
        ..RunConfig::default()
    };
    assert!(matches!(run_pipeline(&inp, &cfg), Err(fusegraph::Error::InvalidParameter(_))));
    let sym = RunConfig {
        scenario: Scenario::Symmetric,
        ..cfg
    };
    assert!(run_pipeline(&inp, &sym).is_err());
}

fn corrupt_query_images(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.file_name().unwrap().to_string_lossy().starts_with("query_descriptors.") {
            std::fs::write(&p, "garbage without tabs\n").unwrap();
        }
    }
}

#[test]
fn asymmetric_runs_never_read_query_images() {
    let tmp = tempfile::tempdir().unwrap();
    make_synthetic(5, &small(), tmp.path()).unwrap();
    corrupt_query_images(tmp.path());
    assert!(CollectionDir::load(tmp.path()).is_err());
    let dir = CollectionDir::load_with(tmp.path(), false).unwrap();
    let inp = Inputs::from_collection(&dir, Scenario::Asymmetric, &ModelOptions::default()).unwrap();
    run_pipeline(&inp, &RunConfig::default()).unwrap();
}

#[test]
fn synthetic_output_is_byte_identical_per_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    make_synthetic(6, &small(), a.path()).unwrap();
    make_synthetic(6, &small(), b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap());
    }
    let loaded = CollectionDir::load(a.path()).unwrap();
    let direct = generate(6, &small()).unwrap();
    assert_eq!(loaded.collection.docs(), direct.docs.as_slice());
}

#[test]
fn sweep_grid_and_cells() {
    let inp = inputs(&small(), 7, Scenario::Asymmetric);
    let base = RunConfig::default();
    let grid = Grid {
        k: vec![NeighborCap::Top(10), NeighborCap::All],
        gamma: vec![0.0, 0.3],
        iterations: vec![Iterations::Fixed(1), Iterations::UntilConvergence],
        ..Grid::single(&base)
    };
    let baseline = RunConfig {
        weights: FusionWeights::text_only(),
        ..base
    };
    let table = run_sweep(&inp, &base, &grid, "text", &baseline).unwrap();
    assert_eq!(table.rows.len(), 8);
    for row in &table.rows {
        assert!(row.error.is_none());
        assert!(row.ttest.is_some());
        let alone = run_pipeline(&inp, &row.config).unwrap();
        assert_eq!(alone.report.map, row.map.unwrap());
    }
    let twice = Grid {
        gamma: vec![0.3, 0.3],
        ..Grid::single(&base)
    };
    let t2 = run_sweep(&inp, &base, &twice, "text", &baseline).unwrap();
    assert_eq!(t2.rows[0].map, t2.rows[1].map);
    let tsv = table.to_tsv();
    assert_eq!(tsv.lines().count(), 10);
    assert!(tsv.lines().nth(1).unwrap().starts_with("k\tgamma"));
}

#[test]
fn presets_write_identical_runs() {
    let inp = inputs(&small(), 8, Scenario::Asymmetric);
    for preset in [Preset::CmDefault, Preset::RwClassic, Preset::GdDefault] {
        let cfg = RunConfig::preset(Scenario::Asymmetric, preset);
        let mut a = Vec::new();
        let mut b = Vec::new();
        trec::write_run(&mut a, &run_pipeline(&inp, &cfg).unwrap().run, preset.name()).unwrap();
        let again = inputs(&small(), 8, Scenario::Asymmetric);
        trec::write_run(&mut b, &run_pipeline(&again, &cfg).unwrap().run, preset.name()).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{}", preset.name());
    }
}
