//! Tab-separated text formats.
//!
//! * score vectors: `query_id<TAB>doc_id<TAB>score`
//! * similarity matrices: `doc_id<TAB>doc_id<TAB>score`
//! * texts: `id<TAB>free text`
//! * descriptors: `id<TAB>x<TAB>y<TAB>v1,...,vD` (one line per descriptor)
//! * stopwords: one term per line
//!
//! Scores are written with the shortest representation that parses back to
//! the same `f64`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DocIds, LocatedDescriptor, ScoreVector, SimMatrix};
use crate::error::{Error, Result};

/// Formats a score so that `s.parse::<f64>()` returns the same bits.
pub fn fmt_score(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Yields `(1-based line number, line)` for non-blank lines.
fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|r| r.as_ref().map(|(_, l)| !l.trim().is_empty()).unwrap_or(true))
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<reader>", e)
}

fn parse_score(line: usize, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Malformed {
        line,
        reason: format!("bad score {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteScore { line });
    }
    if v < 0.0 {
        return Err(Error::NegativeScore { line, value: v });
    }
    Ok(v)
}

fn split3(line_no: usize, line: &str) -> Result<(&str, &str, &str)> {
    let mut it = line.split('\t');
    match (it.next(), it.next(), it.next(), it.next()) {
        (Some(a), Some(b), Some(c), None) => Ok((a, b, c)),
        _ => Err(Error::Malformed {
            line: line_no,
            reason: "expected 3 tab-separated fields".into(),
        }),
    }
}

/// Reads score vectors keyed by query id. Zero scores are treated as absent.
pub fn read_score_vectors<R: BufRead>(reader: R, ids: &DocIds) -> Result<BTreeMap<String, ScoreVector>> {
    let mut raw: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    let mut seen: HashMap<(String, usize), ()> = HashMap::new();
    for item in lines(reader) {
        let (no, line) = item.map_err(io_err)?;
        let (q, d, s) = split3(no, &line)?;
        let score = parse_score(no, s)?;
        let idx = ids.index_of(d).ok_or_else(|| Error::UnknownDocument {
            line: no,
            doc_id: d.to_string(),
        })?;
        if seen.insert((q.to_string(), idx), ()).is_some() {
            return Err(Error::DuplicateEntry {
                line: no,
                row: q.to_string(),
                col: d.to_string(),
            });
        }
        let entry = raw.entry(q.to_string()).or_default();
        if score > 0.0 {
            entry.push((idx, score));
        }
    }
    raw.into_iter()
        .map(|(q, e)| Ok((q, ScoreVector::from_entries(ids.len(), e)?)))
        .collect()
}

pub fn load_score_vectors(path: &Path, ids: &DocIds) -> Result<BTreeMap<String, ScoreVector>> {
    read_score_vectors(open(path)?, ids)
}

/// Writes score vectors in query-id order, entries in document-index order.
pub fn write_score_vectors<W: Write>(
    mut w: W,
    vectors: &BTreeMap<String, ScoreVector>,
    ids: &DocIds,
) -> Result<()> {
    for (q, v) in vectors {
        for (i, s) in v.iter() {
            writeln!(w, "{q}\t{}\t{}", ids.id(i), fmt_score(s)).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn save_score_vectors(path: &Path, vectors: &BTreeMap<String, ScoreVector>, ids: &DocIds) -> Result<()> {
    write_score_vectors(create(path)?, vectors, ids)
}

/// Reads a sparse similarity matrix over the documents of `ids`.
pub fn read_sim_matrix<R: BufRead>(reader: R, ids: &DocIds) -> Result<SimMatrix> {
    let mut triplets = Vec::new();
    let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
    for item in lines(reader) {
        let (no, line) = item.map_err(io_err)?;
        let (a, b, s) = split3(no, &line)?;
        let score = parse_score(no, s)?;
        let lookup = |id: &str| {
            ids.index_of(id).ok_or_else(|| Error::UnknownDocument {
                line: no,
                doc_id: id.to_string(),
            })
        };
        let (r, c) = (lookup(a)?, lookup(b)?);
        if seen.insert((r, c), ()).is_some() {
            return Err(Error::DuplicateEntry {
                line: no,
                row: a.to_string(),
                col: b.to_string(),
            });
        }
        triplets.push((r, c, score));
    }
    SimMatrix::from_triplets(ids.len(), triplets)
}

pub fn load_sim_matrix(path: &Path, ids: &DocIds) -> Result<SimMatrix> {
    read_sim_matrix(open(path)?, ids)
}

pub fn write_sim_matrix<W: Write>(mut w: W, m: &SimMatrix, ids: &DocIds) -> Result<()> {
    if m.dim() != ids.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            actual: m.dim(),
        });
    }
    for (r, c, v) in m.triplets() {
        writeln!(w, "{}\t{}\t{}", ids.id(r), ids.id(c), fmt_score(v)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn save_sim_matrix(path: &Path, m: &SimMatrix, ids: &DocIds) -> Result<()> {
    write_sim_matrix(create(path)?, m, ids)
}

/// Reads `id<TAB>text` lines. A line without a tab is an id with empty text.
pub fn read_texts<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for item in lines(reader) {
        let (_, line) = item.map_err(io_err)?;
        let (id, text) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        out.push((id.trim().to_string(), text.to_string()));
    }
    Ok(out)
}

pub fn load_texts(path: &Path) -> Result<Vec<(String, String)>> {
    read_texts(open(path)?)
}

pub fn write_texts<W: Write>(mut w: W, texts: &[(String, String)]) -> Result<()> {
    for (id, t) in texts {
        writeln!(w, "{id}\t{t}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn parse_coord(no: usize, s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s == "-" {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::Malformed {
        line: no,
        reason: format!("bad coordinate {s:?}"),
    })?;
    Ok(v.is_finite().then_some(v))
}

/// Reads descriptor lines grouped by id, in first-appearance order.
pub fn read_descriptors<R: BufRead>(reader: R) -> Result<Vec<(String, Vec<LocatedDescriptor>)>> {
    let mut out: Vec<(String, Vec<LocatedDescriptor>)> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for item in lines(reader) {
        let (no, line) = item.map_err(io_err)?;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::Malformed {
                line: no,
                reason: "expected id, x, y, values".into(),
            });
        }
        let (x, y) = (parse_coord(no, f[1])?, parse_coord(no, f[2])?);
        let values = f[3]
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Malformed {
                        line: no,
                        reason: format!("bad descriptor value {v:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let location = x.zip(y);
        let id = f[0].to_string();
        let slot = *pos.entry(id.clone()).or_insert_with(|| {
            out.push((id, Vec::new()));
            out.len() - 1
        });
        out[slot].1.push(LocatedDescriptor { location, values });
    }
    Ok(out)
}

pub fn load_descriptors(path: &Path) -> Result<Vec<(String, Vec<LocatedDescriptor>)>> {
    read_descriptors(open(path)?)
}

pub fn write_descriptors<W: Write>(mut w: W, sets: &[(String, Vec<LocatedDescriptor>)]) -> Result<()> {
    for (id, descs) in sets {
        for u in descs {
            let (x, y) = match u.location {
                Some((x, y)) => (fmt_score(x), fmt_score(y)),
                None => ("-".into(), "-".into()),
            };
            let vals: Vec<String> = u.values.iter().map(|&v| fmt_score(v)).collect();
            writeln!(w, "{id}\t{x}\t{y}\t{}", vals.join(",")).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_stopwords<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for item in lines(reader) {
        let (_, line) = item.map_err(io_err)?;
        out.push(line.trim().to_lowercase());
    }
    Ok(out)
}

pub fn load_stopwords(path: &Path) -> Result<Vec<String>> {
    read_stopwords(open(path)?)
}
