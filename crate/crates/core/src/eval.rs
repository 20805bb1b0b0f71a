//! Average precision, MAP and the paired t-test.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::store::{Qrels, Run};

/// Average precision of a ranked list, or `None` when the query has no
/// relevant document in the judgments.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], qrels: &Qrels, query_id: &str) -> Option<f64> {
    let r = qrels.relevant_count(query_id);
    if r == 0 {
        return None;
    }
    let relevant = qrels.relevant_docs(query_id);
    let mut seen: HashSet<&str> = HashSet::new();
    let mut hits = 0usize;
    let mut sum = 0.0;
    let mut rank = 0usize;
    for d in ranked {
        let d = d.as_ref();
        if !seen.insert(d) {
            continue;
        }
        rank += 1;
        if relevant.contains(d) {
            hits += 1;
            sum += hits as f64 / rank as f64;
        }
    }
    Some(sum / r as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub dof: usize,
    pub mean_diff: f64,
    /// Two-sided p-value (1 for the degenerate case).
    pub p_value: f64,
    /// Zero variance of the differences.
    pub degenerate: bool,
    pub significant: bool,
}

/// Two-sided critical value of Student's t at level `alpha` for `dof` degrees of freedom.
pub fn t_critical(dof: usize, alpha: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive degrees of freedom");
    dist.inverse_cdf(1.0 - alpha / 2.0)
}

/// Two-sided paired t-test on per-query AP at 95% confidence.
pub fn paired_ttest(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<TTest> {
    paired_ttest_at(a, b, 0.05)
}

pub fn paired_ttest_at(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>, alpha: f64) -> Result<TTest> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::MismatchedQueries);
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewQueries(n));
    }
    let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let dof = n - 1;
    // relative to the differences' magnitude, so rounding noise reads as zero
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if var <= (1e-12 * scale).powi(2) {
        return Ok(TTest {
            t: 0.0,
            dof,
            mean_diff: mean,
            p_value: 1.0,
            degenerate: true,
            significant: false,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
    let p_value = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest {
        t,
        dof,
        mean_diff: mean,
        p_value,
        degenerate: false,
        significant: t.abs() > t_critical(dof, alpha),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_query_ap: BTreeMap<String, f64>,
    pub map: f64,
    /// Queries in the run with no relevant judgment, excluded from MAP.
    pub skipped: Vec<String>,
    pub ttest: Option<TTest>,
}

/// Scores every judged query. Judged queries missing from the run get AP 0.
pub fn evaluate(run: &Run, qrels: &Qrels) -> EvalReport {
    let mut per_query_ap = BTreeMap::new();
    let mut skipped = Vec::new();
    let empty = Vec::new();
    let mut queries: Vec<&str> = qrels.queries().collect();
    queries.extend(run.keys().map(String::as_str));
    queries.sort_unstable();
    queries.dedup();
    for q in queries {
        let list = run.get(q).unwrap_or(&empty);
        let ids: Vec<&str> = list.iter().map(|(d, _)| d.as_str()).collect();
        match average_precision(&ids, qrels, q) {
            Some(ap) => {
                per_query_ap.insert(q.to_string(), ap);
            }
            None => skipped.push(q.to_string()),
        }
    }
    let map = mean(per_query_ap.values().copied());
    EvalReport {
        per_query_ap,
        map,
        skipped,
        ttest: None,
    }
}

/// Evaluates `run` and tests it against `baseline` on the shared queries.
pub fn evaluate_against(run: &Run, baseline: &Run, qrels: &Qrels) -> Result<EvalReport> {
    let mut report = evaluate(run, qrels);
    let base = evaluate(baseline, qrels);
    report.ttest = Some(paired_ttest(&report.per_query_ap, &base.per_query_ap)?);
    Ok(report)
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
