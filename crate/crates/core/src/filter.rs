//! Text-query semantic filtering.
//!
//! The top `l = min(nnz(s_t), m_cap)` documents by text score define a
//! per-query candidate set. Every score vector and similarity matrix is then
//! restricted to that set and reindexed into a dense local space `[0, l)`,
//! where local index `i` is the `i`-th ranked candidate.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::store::{DocIds, ScoreVector, SimMatrix};

pub const DEFAULT_M_CAP: usize = 1000;

/// Candidate documents by descending score, ties broken by ascending doc id.
pub fn select_top_l(query_id: &str, s_t: &ScoreVector, m_cap: usize, ids: &DocIds) -> Result<Vec<usize>> {
    if s_t.is_empty() {
        return Err(Error::EmptyTextResult(query_id.to_string()));
    }
    if m_cap == 0 {
        return Err(Error::InvalidParameter("m_cap must be >= 1".into()));
    }
    let mut ranked: Vec<(usize, f64)> = s_t.iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids.id(a.0).cmp(ids.id(b.0)))
    });
    ranked.truncate(m_cap);
    Ok(ranked.into_iter().map(|(i, _)| i).collect())
}

/// Per-query workspace restricted to the selected candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredContext {
    pub query_id: String,
    /// Global document indices, best text score first.
    pub selected: Vec<usize>,
    index_map: HashMap<usize, usize>,
    pub s_t: ScoreVector,
    /// Absent in the text-only scenario.
    pub s_v: Option<ScoreVector>,
    pub sim_t: SimMatrix,
    pub sim_v: SimMatrix,
    pub m_cap: usize,
}

/// Candidate selection for one query, before any matrix is restricted.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub query_id: String,
    pub selected: Vec<usize>,
    index_map: HashMap<usize, usize>,
    pub m_cap: usize,
}

impl Selection {
    pub fn new(query_id: &str, s_t: &ScoreVector, m_cap: usize, ids: &DocIds) -> Result<Self> {
        let selected = select_top_l(query_id, s_t, m_cap, ids)?;
        Ok(Self::from_selected(query_id, selected, m_cap))
    }

    pub fn from_selected(query_id: &str, selected: Vec<usize>, m_cap: usize) -> Self {
        let index_map = selected.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        Self {
            query_id: query_id.to_string(),
            selected,
            index_map,
            m_cap,
        }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        self.index_map.get(&global).copied()
    }

    /// Keeps entries of `s` on selected documents, reindexed locally.
    pub fn filter_vector(&self, s: &ScoreVector) -> ScoreVector {
        let mut entries: Vec<(usize, f64)> = s
            .iter()
            .filter_map(|(g, v)| self.local(g).map(|l| (l, v)))
            .collect();
        entries.sort_by_key(|&(l, _)| l);
        ScoreVector::from_sorted_unchecked(self.len(), entries)
    }

    /// The `l x l` submatrix of `m` on selected rows and columns.
    pub fn filter_matrix(&self, m: &SimMatrix) -> SimMatrix {
        let rows = self
            .selected
            .iter()
            .map(|&g| {
                let (cols, vals) = m.row(g);
                let mut entries: Vec<(usize, f64)> = cols
                    .iter()
                    .zip(vals)
                    .filter_map(|(&c, &v)| self.local(c).map(|l| (l, v)))
                    .collect();
                entries.sort_by_key(|&(l, _)| l);
                ScoreVector::from_sorted_unchecked(self.len(), entries)
            })
            .collect();
        SimMatrix::from_rows(rows).expect("rows have dimension l")
    }

    /// Builds the `l x l` matrix directly from a pairwise similarity over
    /// global indices, without materializing the full matrix.
    pub fn filter_with(&self, sim: impl Fn(usize, usize) -> f64) -> Result<SimMatrix> {
        let l = self.len();
        let rows = self
            .selected
            .iter()
            .map(|&a| ScoreVector::from_entries(l, self.selected.iter().enumerate().map(|(j, &b)| (j, sim(a, b)))))
            .collect::<Result<Vec<_>>>()?;
        SimMatrix::from_rows(rows)
    }

    pub fn into_context(self, s_t: &ScoreVector, s_v: Option<&ScoreVector>, sim_t: SimMatrix, sim_v: SimMatrix) -> Result<FilteredContext> {
        let l = self.len();
        for m in [&sim_t, &sim_v] {
            if m.dim() != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    actual: m.dim(),
                });
            }
        }
        let s_t = self.filter_vector(s_t);
        let s_v = s_v.map(|s| self.filter_vector(s));
        Ok(FilteredContext {
            query_id: self.query_id,
            selected: self.selected,
            index_map: self.index_map,
            s_t,
            s_v,
            sim_t,
            sim_v,
            m_cap: self.m_cap,
        })
    }
}

impl FilteredContext {
    /// Selects candidates from `s_t` and restricts all inputs to them.
    pub fn build(
        query_id: &str,
        s_t: &ScoreVector,
        s_v: Option<&ScoreVector>,
        sim_t: &SimMatrix,
        sim_v: &SimMatrix,
        m_cap: usize,
        ids: &DocIds,
    ) -> Result<Self> {
        let sel = Selection::new(query_id, s_t, m_cap, ids)?;
        let (ft, fv) = (sel.filter_matrix(sim_t), sel.filter_matrix(sim_v));
        sel.into_context(s_t, s_v, ft, fv)
    }

    /// Assembles a context from already-local parts (dimension `l`), with
    /// the identity as selection.
    pub fn from_local(
        query_id: &str,
        s_t: ScoreVector,
        s_v: Option<ScoreVector>,
        sim_t: SimMatrix,
        sim_v: SimMatrix,
    ) -> Result<Self> {
        let l = s_t.dim();
        if s_t.nnz() != l {
            return Err(Error::InvalidScores("local s_t must be nonzero on every candidate".into()));
        }
        for d in [sim_t.dim(), sim_v.dim(), s_v.as_ref().map_or(l, |s| s.dim())] {
            if d != l {
                return Err(Error::DimensionMismatch { expected: l, actual: d });
            }
        }
        Ok(Self {
            query_id: query_id.to_string(),
            selected: (0..l).collect(),
            index_map: (0..l).map(|i| (i, i)).collect(),
            s_t,
            s_v,
            sim_t,
            sim_v,
            m_cap: l,
        })
    }

    /// Number of candidates `l`.
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        self.index_map.get(&global).copied()
    }

    pub fn selection(&self) -> Selection {
        Selection::from_selected(&self.query_id, self.selected.clone(), self.m_cap)
    }

    pub fn filter_vector(&self, s: &ScoreVector) -> ScoreVector {
        self.selection().filter_vector(s)
    }

    pub fn filter_matrix(&self, m: &SimMatrix) -> SimMatrix {
        self.selection().filter_matrix(m)
    }

    /// Maps a local score vector back to global document indices.
    pub fn to_global(&self, local: &ScoreVector, dim: usize) -> ScoreVector {
        let mut entries: Vec<(usize, f64)> = local.iter().map(|(l, v)| (self.selected[l], v)).collect();
        entries.sort_by_key(|&(g, _)| g);
        ScoreVector::from_sorted_unchecked(dim, entries)
    }
}
