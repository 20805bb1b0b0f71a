//! TREC qrels (`query_id 0 doc_id rel`) and run (`query_id Q0 doc_id rank score tag`) files.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::tsv::fmt_score;
use super::{DocIds, ScoreVector};
use crate::error::{Error, Result};

/// Binary relevance judgments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, bool>>,
}

impl Qrels {
    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, relevant: bool) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), relevant);
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.judgments
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(false)
    }

    /// Number of documents judged relevant for the query.
    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map(|m| m.values().filter(|&&r| r).count())
            .unwrap_or(0)
    }

    pub fn relevant_docs(&self, query_id: &str) -> BTreeSet<&str> {
        self.judgments
            .get(query_id)
            .map(|m| m.iter().filter(|(_, &r)| r).map(|(d, _)| d.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut q = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<qrels>", e))?;
            let no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Malformed {
                    line: no,
                    reason: "expected `query_id 0 doc_id rel`".into(),
                });
            }
            let rel = match f[3] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Malformed {
                        line: no,
                        reason: format!("relevance must be 0 or 1, got {other:?}"),
                    })
                }
            };
            q.insert(f[0], f[2], rel);
        }
        Ok(q)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (q, docs) in &self.judgments {
            for (d, &r) in docs {
                writeln!(w, "{q} 0 {d} {}", u8::from(r)).map_err(|e| Error::io("<qrels>", e))?;
            }
        }
        w.flush().map_err(|e| Error::io("<qrels>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(f))
    }
}

/// Ranked `(doc_id, score)` pairs for one query.
pub type RankedList = Vec<(String, f64)>;

/// Ranked lists keyed by query id.
pub type Run = BTreeMap<String, RankedList>;

/// Descending score, then ascending doc id.
fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Ranks a score vector's nonzero entries, optionally truncated to `cap`.
pub fn rank_scores(scores: &ScoreVector, ids: &DocIds, cap: Option<usize>) -> RankedList {
    let mut list: RankedList = scores.iter().map(|(i, s)| (ids.id(i).to_string(), s)).collect();
    list.sort_by(rank_order);
    if let Some(cap) = cap {
        list.truncate(cap);
    }
    list
}

/// Writes a run in TREC format. Each list is re-sorted by descending score
/// with ascending doc id as tiebreak; NaN scores are rejected.
pub fn write_run<W: Write>(mut w: W, run: &Run, tag: &str) -> Result<()> {
    for (q, list) in run {
        if list.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::NanScore(q.clone()));
        }
        let mut sorted = list.clone();
        sorted.sort_by(rank_order);
        for (rank, (d, s)) in sorted.iter().enumerate() {
            writeln!(w, "{q} Q0 {d} {} {} {tag}", rank + 1, fmt_score(*s))
                .map_err(|e| Error::io("<run>", e))?;
        }
    }
    w.flush().map_err(|e| Error::io("<run>", e))
}

pub fn save_run(path: &Path, run: &Run, tag: &str) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_run(BufWriter::new(f), run, tag)
}

/// Reads a TREC run; lists come back in rank order.
pub fn read_run<R: BufRead>(reader: R) -> Result<Run> {
    let mut raw: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<run>", e))?;
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(Error::Malformed {
                line: no,
                reason: "expected `query_id Q0 doc_id rank score tag`".into(),
            });
        }
        let rank: usize = f[3].parse().map_err(|_| Error::Malformed {
            line: no,
            reason: format!("bad rank {:?}", f[3]),
        })?;
        let score: f64 = f[4].parse().map_err(|_| Error::Malformed {
            line: no,
            reason: format!("bad score {:?}", f[4]),
        })?;
        raw.entry(f[0].to_string())
            .or_default()
            .push((rank, f[2].to_string(), score));
    }
    Ok(raw
        .into_iter()
        .map(|(q, mut v)| {
            v.sort_by_key(|(r, _, _)| *r);
            (q, v.into_iter().map(|(_, d, s)| (d, s)).collect())
        })
        .collect())
}

pub fn load_run(path: &Path) -> Result<Run> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_run(BufReader::new(f))
}
