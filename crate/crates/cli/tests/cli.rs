use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fusegraph"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    bin().args(args).output().expect("spawn").status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a small synthetic collection and returns its directory.
fn small_collection(root: &Path, seed: u64) -> PathBuf {
    let spec = root.join("spec.toml");
    std::fs::write(&spec, "clusters = 4\ndocs_per_cluster = 10\nqueries_per_cluster = 2\n").unwrap();
    let col = root.join(format!("col{seed}"));
    run_ok(&["synth", "--out", s(&col), "--seed", &seed.to_string(), "--spec", s(&spec)]);
    col
}

fn read_run(path: &Path) -> BTreeMap<String, Vec<String>> {
    let mut run: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in std::fs::read_to_string(path).unwrap().lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        run.entry(f[0].to_string()).or_default().push(f[2].to_string());
    }
    run
}

#[test]
fn presets_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_collection(tmp.path(), 3);
    let b = tmp.path().join("again");
    let spec = tmp.path().join("spec.toml");
    run_ok(&["synth", "--out", s(&b), "--seed", "3", "--spec", s(&spec)]);
    for preset in ["cm-default", "rw-classic", "gd-default"] {
        for scenario in ["asymmetric", "symmetric"] {
            let mut files = vec![];
            for (i, col) in [&a, &b].iter().enumerate() {
                let out = tmp.path().join(format!("{preset}-{scenario}-{i}.run"));
                run_ok(&["run", "--collection", s(col), "--preset", preset, "--scenario", scenario, "--out", s(&out)]);
                files.push(std::fs::read(&out).unwrap());
            }
            assert!(!files[0].is_empty());
            assert_eq!(files[0], files[1], "{preset} {scenario}");
        }
    }
}

#[test]
fn precomputed_scores_reproduce_raw_run() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 4);
    let sc = tmp.path().join("scores");
    run_ok(&["score-text", s(&col), "--out", s(&sc)]);
    run_ok(&["score-visual", s(&col), "--out", s(&sc)]);
    let (raw, pre) = (tmp.path().join("raw.run"), tmp.path().join("pre.run"));
    let common = ["--scenario", "symmetric", "--alpha", "0.25,0.25,0.25,0.25"];
    let mut args = vec!["run", "--collection", s(&col), "--out", s(&raw)];
    args.extend(common);
    run_ok(&args);
    let mut args = vec!["fuse", "--collection", s(&col), "--scores", s(&sc), "--out", s(&pre)];
    args.extend(common);
    run_ok(&args);
    assert_eq!(std::fs::read(&raw).unwrap(), std::fs::read(&pre).unwrap());
}

#[test]
fn text_only_weights_rank_by_text_score() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 5);
    let sc = tmp.path().join("scores");
    run_ok(&["score-text", s(&col), "--out", s(&sc)]);
    let out = tmp.path().join("t.run");
    run_ok(&["run", "--collection", s(&col), "--alpha", "1,0,0,0", "--m-cap", "15", "--out", s(&out)]);
    let mut expected: BTreeMap<String, Vec<(f64, String)>> = BTreeMap::new();
    for line in std::fs::read_to_string(sc.join("scores_t.tsv")).unwrap().lines() {
        let f: Vec<&str> = line.split('\t').collect();
        expected.entry(f[0].into()).or_default().push((f[2].parse().unwrap(), f[1].into()));
    }
    let run = read_run(&out);
    assert_eq!(run.len(), expected.len());
    for (q, mut list) in expected {
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let ids: Vec<String> = list.into_iter().take(15).map(|(_, d)| d).collect();
        assert_eq!(run[&q], ids, "query {q}");
    }
}

#[test]
fn asymmetric_run_ignores_query_images() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 6);
    let before = tmp.path().join("before.run");
    run_ok(&["run", "--collection", s(&col), "--out", s(&before)]);
    for entry in std::fs::read_dir(&col).unwrap() {
        let p = entry.unwrap().path();
        if p.file_name().unwrap().to_str().unwrap().starts_with("query_descriptors.") {
            std::fs::write(&p, "garbage without tabs\n").unwrap();
        }
    }
    let after = tmp.path().join("after.run");
    run_ok(&["run", "--collection", s(&col), "--out", s(&after)]);
    assert_eq!(std::fs::read(&before).unwrap(), std::fs::read(&after).unwrap());
    assert_eq!(code(&["run", "--collection", s(&col), "--scenario", "symmetric", "--out", s(&after)]), 2);
}

#[test]
fn sweep_writes_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 7);
    let out = tmp.path().join("sweep");
    let cfg = tmp.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "collection = {:?}\nscenario = \"symmetric\"\noutput = \"sweep\"\n[params]\nalpha = \"0.25,0.25,0.25,0.25\"\n[grid]\nk = [\"10\", \"l\"]\ngamma = [0.0, 0.3]\niterations = [\"1\", \"inf\"]\n",
            s(&col)
        ),
    )
    .unwrap();
    run_ok(&["sweep", "--config", s(&cfg)]);
    let tsv = std::fs::read_to_string(out.join("sweep.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert!(lines[0].starts_with("# baseline\ttext\t"));
    assert_eq!(lines.len(), 2 + 8);
    assert!(lines[2..].iter().all(|l| l.ends_with("\tok")));

    // repeated values give repeated cells
    run_ok(&[
        "sweep", "--config", s(&cfg), "--grid-k", "10,10", "--grid-gamma", "0.3", "--grid-iters", "1",
        "--out", s(&tmp.path().join("dup")),
    ]);
    let dup = std::fs::read_to_string(tmp.path().join("dup/sweep.tsv")).unwrap();
    let rows: Vec<&str> = dup.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn evaluate_reports_map() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 8);
    let out = tmp.path().join("r.run");
    let printed = String::from_utf8(run_ok(&["run", "--collection", s(&col), "--out", s(&out)]).stdout).unwrap();
    let map: String = printed.split_whitespace().nth(1).unwrap().to_string();
    let qrels = col.join("qrels.txt");
    let ev = String::from_utf8(run_ok(&["evaluate", s(&out), "--qrels", s(&qrels), "--per-query"]).stdout).unwrap();
    assert!(ev.lines().any(|l| l == format!("map\tall\t{map}")), "{ev}");
    assert_eq!(ev.lines().filter(|l| l.starts_with("ap\t")).count(), 8);
    let vs = String::from_utf8(run_ok(&["evaluate", s(&out), "--qrels", s(&qrels), "--baseline", s(&out)]).stdout).unwrap();
    assert!(vs.contains("degenerate"));
}

#[test]
fn filter_and_diffuse_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 9);
    let f = tmp.path().join("cand.tsv");
    run_ok(&["filter", "--collection", s(&col), "--m-cap", "5", "--out", s(&f)]);
    let cand = std::fs::read_to_string(&f).unwrap();
    assert_eq!(cand.lines().count(), 8 * 5);
    assert!(cand.lines().all(|l| l.ends_with("\t-")));
    let d = tmp.path().join("tv.tsv");
    let t = tmp.path().join("trace.tsv");
    run_ok(&[
        "diffuse", "--collection", s(&col), "--k", "l", "--iters", "inf", "--out", s(&d), "--trace", s(&t),
    ]);
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    for line in std::fs::read_to_string(&d).unwrap().lines() {
        let f: Vec<&str> = line.split('\t').collect();
        *mass.entry(f[0].into()).or_default() += f[2].parse::<f64>().unwrap();
    }
    assert_eq!(mass.len(), 8);
    assert!(mass.values().all(|m| (m - 1.0).abs() < 1e-10));
    let trace = std::fs::read_to_string(&t).unwrap();
    assert!(trace.lines().all(|l| l.split('\t').nth(2) == Some("true")));
    assert_eq!(code(&["diffuse", "--collection", s(&col), "--direction", "vt", "--out", s(&d)]), 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let col = small_collection(tmp.path(), 10);
    let out = tmp.path().join("x.run");
    let o = s(&out);
    assert_eq!(code(&["run", "--collection", s(&col), "--alpha", "0.5,0.5,0,0", "--out", o]), 1);
    assert_eq!(code(&["run", "--collection", s(&col), "--gamma", "1.5", "--out", o]), 1);
    assert_eq!(code(&["run", "--collection", s(&col), "--preset", "nope", "--out", o]), 1);
    assert_eq!(code(&["run", "--collection", s(&col), "--bogus"]), 1);
    assert_eq!(code(&["run", "--config", s(&tmp.path().join("missing.toml")), "--out", o]), 1);
    assert_eq!(code(&["run", "--collection", s(&tmp.path().join("absent")), "--out", o]), 2);
    std::fs::write(col.join("qrels.txt"), "q 0 d\n").unwrap();
    assert_eq!(code(&["run", "--collection", s(&col), "--out", o]), 2);
    assert_eq!(code(&["synth", "--out", s(&tmp.path().join("z")), "--kind", "odd"]), 1);
    assert_eq!(code(&["--help"]), 0);
}
