//! Text relevance: Dirichlet-smoothed query likelihood and the lexical
//! entailment (translation) model built on top of it.
//!
//! Scores are products of per-term probabilities, accumulated in log space
//! and exported with `exp`. Query terms missing from the collection
//! vocabulary (including stopwords) are skipped: they would contribute the
//! same factor to every document.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{DocIds, Document, ScoreVector, SimMatrix};

pub type TermId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextModelParams {
    pub dirichlet_mu: f64,
    /// Maximum support of an entailment row.
    pub k_le: usize,
}

impl Default for TextModelParams {
    fn default() -> Self {
        Self {
            dirichlet_mu: 1000.0,
            k_le: 10,
        }
    }
}

impl TextModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dirichlet_mu > 0.0 && self.dirichlet_mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dirichlet_mu must be > 0, got {}",
                self.dirichlet_mu
            )));
        }
        if self.k_le == 0 {
            return Err(Error::InvalidParameter("k_le must be >= 1".into()));
        }
        Ok(())
    }
}

/// Term statistics of a tokenized corpus.
#[derive(Debug, Clone)]
pub struct TextIndex {
    terms: Vec<String>,
    vocabulary: HashMap<String, TermId>,
    /// Per document, `(term, count)` sorted by term id.
    doc_term_counts: Vec<Vec<(TermId, u32)>>,
    doc_lengths: Vec<u64>,
    collection_term_counts: Vec<u64>,
    doc_freq: Vec<u32>,
    /// Per term, documents containing it (ascending).
    postings: Vec<Vec<u32>>,
    total_tokens: u64,
}

impl TextIndex {
    /// Indexes token bags. Tokens are expected to be lowercased already.
    pub fn build<'a, I, S>(docs: I, stopwords: &HashSet<String>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut idx = Self {
            terms: Vec::new(),
            vocabulary: HashMap::new(),
            doc_term_counts: Vec::new(),
            doc_lengths: Vec::new(),
            collection_term_counts: Vec::new(),
            doc_freq: Vec::new(),
            postings: Vec::new(),
            total_tokens: 0,
        };
        for tokens in docs {
            let doc_no = idx.doc_lengths.len() as u32;
            let mut counts: HashMap<TermId, u32> = HashMap::new();
            let mut len = 0u64;
            for tok in tokens {
                let tok = tok.as_ref();
                if stopwords.contains(tok) {
                    continue;
                }
                let id = match idx.vocabulary.get(tok) {
                    Some(&id) => id,
                    None => {
                        let id = idx.terms.len() as TermId;
                        idx.terms.push(tok.to_string());
                        idx.vocabulary.insert(tok.to_string(), id);
                        idx.collection_term_counts.push(0);
                        idx.doc_freq.push(0);
                        idx.postings.push(Vec::new());
                        id
                    }
                };
                *counts.entry(id).or_insert(0) += 1;
                len += 1;
            }
            let mut counts: Vec<(TermId, u32)> = counts.into_iter().collect();
            counts.sort_unstable();
            for &(t, c) in &counts {
                idx.collection_term_counts[t as usize] += u64::from(c);
                idx.doc_freq[t as usize] += 1;
                idx.postings[t as usize].push(doc_no);
            }
            idx.doc_term_counts.push(counts);
            idx.doc_lengths.push(len);
            idx.total_tokens += len;
        }
        if idx.total_tokens == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(idx)
    }

    pub fn from_documents(docs: &[Document], stopwords: &HashSet<String>) -> Result<Self> {
        Self::build(docs.iter().map(|d| d.text_tokens.as_slice()), stopwords)
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.vocabulary.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_length(&self, doc: usize) -> u64 {
        self.doc_lengths[doc]
    }

    pub fn doc_terms(&self, doc: usize) -> &[(TermId, u32)] {
        &self.doc_term_counts[doc]
    }

    pub fn term_frequency(&self, term: TermId, doc: usize) -> u32 {
        let row = &self.doc_term_counts[doc];
        match row.binary_search_by_key(&term, |&(t, _)| t) {
            Ok(p) => row[p].1,
            Err(_) => 0,
        }
    }

    pub fn collection_count(&self, term: TermId) -> u64 {
        self.collection_term_counts[term as usize]
    }

    pub fn doc_freq(&self, term: TermId) -> u32 {
        self.doc_freq[term as usize]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn postings(&self, term: TermId) -> &[u32] {
        &self.postings[term as usize]
    }

    /// Background probability `p(v|C)`.
    pub fn collection_prob(&self, term: TermId) -> f64 {
        self.collection_term_counts[term as usize] as f64 / self.total_tokens as f64
    }

    /// Dirichlet-smoothed `p_mu(v|d) = (tf + mu p(v|C)) / (|d| + mu)`.
    pub fn smoothed_prob(&self, term: TermId, doc: usize, mu: f64) -> f64 {
        let tf = f64::from(self.term_frequency(term, doc));
        (tf + mu * self.collection_prob(term)) / (self.doc_lengths[doc] as f64 + mu)
    }

    /// Maps query tokens to in-vocabulary term ids, dropping the rest.
    pub fn query_terms<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TermId> {
        tokens.iter().filter_map(|t| self.term_id(t.as_ref())).collect()
    }

    fn check_doc(&self, doc: usize) -> Result<()> {
        if doc >= self.num_docs() {
            Err(Error::UnknownDocIndex(doc))
        } else {
            Ok(())
        }
    }
}

fn sum_log<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs.into_iter().map(f64::ln).sum()
}

/// Log query likelihood under the smoothed document model.
pub fn lm_log_score<S: AsRef<str>>(index: &TextIndex, params: &TextModelParams, query: &[S], doc: usize) -> Result<f64> {
    index.check_doc(doc)?;
    let mu = params.dirichlet_mu;
    Ok(sum_log(
        index
            .query_terms(query)
            .into_iter()
            .map(|v| index.smoothed_prob(v, doc, mu)),
    ))
}

/// Query likelihood `prod_v p_mu(v|d)`.
pub fn lm_score<S: AsRef<str>>(index: &TextIndex, params: &TextModelParams, query: &[S], doc: usize) -> Result<f64> {
    Ok(lm_log_score(index, params, query, doc)?.exp().max(0.0))
}

/// Sparse translation probabilities `p(v|u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntailmentTable {
    /// Row `u`: `(v, p(v|u))` sorted by `v`.
    rows: Vec<Vec<(TermId, f64)>>,
    /// Column `v`: `(u, p(v|u))` sorted by `u`.
    cols: Vec<Vec<(TermId, f64)>>,
    k_le: usize,
}

impl EntailmentTable {
    fn from_rows(rows: Vec<Vec<(TermId, f64)>>, k_le: usize) -> Self {
        let mut cols = vec![Vec::new(); rows.len()];
        for (u, row) in rows.iter().enumerate() {
            for &(v, p) in row {
                cols[v as usize].push((u as TermId, p));
            }
        }
        Self { rows, cols, k_le }
    }

    /// `p(v|u) = 1` iff `u == v`.
    pub fn identity(num_terms: usize) -> Self {
        Self::from_rows((0..num_terms as TermId).map(|u| vec![(u, 1.0)]).collect(), 1)
    }

    pub fn num_terms(&self) -> usize {
        self.rows.len()
    }

    pub fn k_le(&self) -> usize {
        self.k_le
    }

    pub fn row(&self, u: TermId) -> &[(TermId, f64)] {
        &self.rows[u as usize]
    }

    /// All `(u, p(v|u))` with nonzero probability for target term `v`.
    pub fn column(&self, v: TermId) -> &[(TermId, f64)] {
        &self.cols[v as usize]
    }

    pub fn prob(&self, v: TermId, u: TermId) -> f64 {
        let row = &self.rows[u as usize];
        match row.binary_search_by_key(&v, |&(t, _)| t) {
            Ok(p) => row[p].1,
            Err(_) => 0.0,
        }
    }

    /// Row `u`, column `v`, value `p(v|u)`, over term ids.
    pub fn to_sim_matrix(&self) -> SimMatrix {
        let t = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(u, r)| r.iter().map(move |&(v, p)| (u, v as usize, p)));
        SimMatrix::from_triplets(self.rows.len(), t).expect("probabilities are valid matrix entries")
    }

    /// Rebuilds a table from its matrix form (rows renormalized are not
    /// checked here beyond non-negativity).
    pub fn from_sim_matrix(m: &SimMatrix, k_le: usize) -> Self {
        let rows = (0..m.dim())
            .map(|u| {
                let (c, v) = m.row(u);
                c.iter().zip(v).map(|(&c, &p)| (c as TermId, p)).collect()
            })
            .collect();
        Self::from_rows(rows, k_le)
    }

    /// The vocabulary of `index` as a registry, for persisting the table.
    pub fn term_ids(index: &TextIndex) -> DocIds {
        DocIds::new(index.terms().iter().cloned()).expect("vocabulary terms are unique")
    }
}

fn xlogy(joint: f64, ratio: f64) -> f64 {
    if joint > 0.0 {
        joint * ratio.ln()
    } else {
        0.0
    }
}

/// Expected mutual information between the presence indicators of two terms,
/// from document counts: `n` documents, `df_a`, `df_b` document frequencies
/// and `n11` co-occurrences.
pub fn expected_mutual_information(n: u64, df_a: u64, df_b: u64, n11: u64) -> f64 {
    let n = n as f64;
    let (a, b, c11) = (df_a as f64, df_b as f64, n11 as f64);
    let cells = [
        (c11, a, b),
        (a - c11, a, n - b),
        (b - c11, n - a, b),
        (n - a - b + c11, n - a, n - b),
    ];
    cells
        .iter()
        .map(|&(joint, ma, mb)| {
            let pj = joint / n;
            if pj <= 0.0 {
                0.0
            } else {
                xlogy(pj, pj / ((ma / n) * (mb / n)))
            }
        })
        .sum::<f64>()
        .max(0.0)
}

/// Builds the entailment table: for each term `u`, the `k_le - 1` positively
/// associated co-occurring terms with the highest expected mutual
/// information, plus `u` itself weighted by its own presence entropy
/// (the mutual information of the indicator with itself). Weights are
/// normalized into `p(.|u)`. Rows with no usable weight become identity rows.
pub fn estimate_entailment(index: &TextIndex, params: &TextModelParams) -> Result<EntailmentTable> {
    params.validate()?;
    let n = index.num_docs() as u64;
    let k = params.k_le;
    let rows: Vec<Vec<(TermId, f64)>> = (0..index.num_terms() as TermId)
        .map(|u| {
            let df_u = u64::from(index.doc_freq(u));
            let mut co: HashMap<TermId, u64> = HashMap::new();
            for &d in index.postings(u) {
                for &(v, _) in index.doc_terms(d as usize) {
                    if v != u {
                        *co.entry(v).or_insert(0) += 1;
                    }
                }
            }
            let mut cands: Vec<(TermId, f64)> = co
                .into_iter()
                .filter(|&(v, n11)| {
                    let df_v = u64::from(index.doc_freq(v));
                    u128::from(n11) * u128::from(n) > u128::from(df_u) * u128::from(df_v)
                })
                .map(|(v, n11)| {
                    let df_v = u64::from(index.doc_freq(v));
                    (v, expected_mutual_information(n, df_u, df_v, n11))
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            cands.truncate(k.saturating_sub(1));
            let self_w = expected_mutual_information(n, df_u, df_u, df_u);
            if self_w <= 0.0 {
                return vec![(u, 1.0)];
            }
            cands.push((u, self_w));
            let total: f64 = cands.iter().map(|&(_, w)| w).sum();
            let mut row: Vec<(TermId, f64)> = cands.into_iter().map(|(v, w)| (v, w / total)).collect();
            row.sort_by_key(|&(v, _)| v);
            row
        })
        .collect();
    Ok(EntailmentTable::from_rows(rows, k))
}

/// Lexical entailment score `prod_v sum_u p(v|u) p_mu(u|d)`, in log space.
pub fn le_log_score<S: AsRef<str>>(
    index: &TextIndex,
    table: &EntailmentTable,
    params: &TextModelParams,
    query: &[S],
    doc: usize,
) -> Result<f64> {
    index.check_doc(doc)?;
    if table.num_terms() != index.num_terms() {
        return Err(Error::DimensionMismatch {
            expected: index.num_terms(),
            actual: table.num_terms(),
        });
    }
    let mu = params.dirichlet_mu;
    Ok(sum_log(index.query_terms(query).into_iter().map(|v| {
        let mut acc = 0.0;
        for &(u, p) in table.column(v) {
            acc += p * index.smoothed_prob(u, doc, mu);
        }
        acc
    })))
}

pub fn le_score<S: AsRef<str>>(
    index: &TextIndex,
    table: &EntailmentTable,
    params: &TextModelParams,
    query: &[S],
    doc: usize,
) -> Result<f64> {
    Ok(le_log_score(index, table, params, query, doc)?.exp().max(0.0))
}

/// Which text model to score with.
#[derive(Debug, Clone)]
pub enum TextModel {
    QueryLikelihood,
    LexicalEntailment(EntailmentTable),
}

/// A text index bundled with a model, scoring whole collections.
#[derive(Debug, Clone)]
pub struct TextScorer {
    pub index: TextIndex,
    pub params: TextModelParams,
    pub model: TextModel,
}

impl TextScorer {
    pub fn new(index: TextIndex, params: TextModelParams, model: TextModel) -> Result<Self> {
        params.validate()?;
        Ok(Self { index, params, model })
    }

    /// Terms whose presence in a document makes it a candidate for `terms`.
    fn trigger_terms(&self, terms: &[TermId]) -> Vec<TermId> {
        let mut out: Vec<TermId> = match &self.model {
            TextModel::QueryLikelihood => terms.to_vec(),
            TextModel::LexicalEntailment(t) => terms
                .iter()
                .flat_map(|&v| t.column(v).iter().map(|&(u, _)| u))
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    fn candidates(&self, terms: &[TermId]) -> Vec<usize> {
        let mut docs: Vec<usize> = self
            .trigger_terms(terms)
            .into_iter()
            .flat_map(|u| self.index.postings(u).iter().map(|&d| d as usize))
            .collect();
        docs.sort_unstable();
        docs.dedup();
        docs
    }

    fn log_score_terms(&self, terms: &[TermId], doc: usize) -> f64 {
        let mu = self.params.dirichlet_mu;
        match &self.model {
            TextModel::QueryLikelihood => sum_log(terms.iter().map(|&v| self.index.smoothed_prob(v, doc, mu))),
            TextModel::LexicalEntailment(t) => sum_log(terms.iter().map(|&v| {
                let mut acc = 0.0;
                for &(u, p) in t.column(v) {
                    acc += p * self.index.smoothed_prob(u, doc, mu);
                }
                acc
            })),
        }
    }

    /// Scores every document that matches at least one query term (through
    /// the entailment table for the LE model); other documents score zero.
    pub fn score_query<S: AsRef<str>>(&self, query: &[S]) -> ScoreVector {
        let terms = self.index.query_terms(query);
        let entries = self
            .candidates(&terms)
            .into_iter()
            .map(|d| (d, self.log_score_terms(&terms, d).exp()))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        ScoreVector::from_sorted_unchecked(self.index.num_docs(), entries)
    }

    /// Document-to-document text similarity: the per-token geometric mean
    /// `exp(mean_v ln p(v|d'))` of document `d`'s tokens under `d'`'s model,
    /// restricted to pairs sharing a matching term.
    pub fn similarity_row(&self, doc: usize) -> ScoreVector {
        let terms: Vec<TermId> = self
            .index
            .doc_terms(doc)
            .iter()
            .flat_map(|&(t, c)| std::iter::repeat(t).take(c as usize))
            .collect();
        if terms.is_empty() {
            return ScoreVector::empty(self.index.num_docs());
        }
        let len = terms.len() as f64;
        let entries = self
            .candidates(&terms)
            .into_iter()
            .map(|d| (d, (self.log_score_terms(&terms, d) / len).exp()))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        ScoreVector::from_sorted_unchecked(self.index.num_docs(), entries)
    }

    /// [`similarity_row`](Self::similarity_row) evaluated only on `others`.
    pub fn similarity_among(&self, doc: usize, others: &[usize]) -> Vec<f64> {
        let terms: Vec<TermId> = self
            .index
            .doc_terms(doc)
            .iter()
            .flat_map(|&(t, c)| std::iter::repeat(t).take(c as usize))
            .collect();
        if terms.is_empty() {
            return vec![0.0; others.len()];
        }
        let triggers = self.trigger_terms(&terms);
        let len = terms.len() as f64;
        others
            .iter()
            .map(|&d| {
                let matched = self
                    .index
                    .doc_terms(d)
                    .iter()
                    .any(|(t, _)| triggers.binary_search(t).is_ok());
                if matched {
                    (self.log_score_terms(&terms, d) / len).exp()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Full document-document text similarity matrix.
    pub fn similarity_matrix(&self) -> SimMatrix {
        use rayon::prelude::*;
        let rows: Vec<ScoreVector> = (0..self.index.num_docs())
            .into_par_iter()
            .map(|d| self.similarity_row(d))
            .collect();
        SimMatrix::from_rows(rows).expect("rows share the document count")
    }

    /// Similarity of document `a` to document `b` (same definition as
    /// [`similarity_row`](Self::similarity_row)), zero when they share no
    /// matching term.
    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        self.similarity_row(a).get(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn index(docs: &[&str], stop: &[&str]) -> TextIndex {
        let docs: Vec<Vec<String>> = docs.iter().map(|d| toks(d)).collect();
        let stop: HashSet<String> = stop.iter().map(|s| s.to_string()).collect();
        TextIndex::build(docs.iter().map(|d| d.as_slice()), &stop).unwrap()
    }

    #[test]
    fn counts_red_car_bus() {
        let idx = index(&["red car", "red bus"], &[]);
        assert_eq!(idx.num_terms(), 3);
        let red = idx.term_id("red").unwrap();
        assert_eq!(idx.collection_count(red), 2);
        assert_eq!(idx.collection_count(idx.term_id("car").unwrap()), 1);
        assert_eq!(idx.collection_count(idx.term_id("bus").unwrap()), 1);
    }

    #[test]
    fn stopwords_removed() {
        let idx = index(&["red car", "red bus"], &["red"]);
        assert!(idx.term_id("red").is_none());
        assert_eq!(idx.num_terms(), 2);
        assert_eq!(idx.doc_length(0), 1);
    }

    #[test]
    fn empty_corpus_is_error() {
        let docs: Vec<Vec<String>> = vec![vec![], toks("the")];
        let stop: HashSet<String> = ["the".to_string()].into();
        assert!(matches!(
            TextIndex::build(docs.iter().map(|d| d.as_slice()), &stop),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn empty_query_scores_one() {
        let idx = index(&["a b"], &[]);
        let p = TextModelParams::default();
        let q: Vec<String> = vec![];
        assert_eq!(lm_score(&idx, &p, &q, 0).unwrap(), 1.0);
        let t = EntailmentTable::identity(idx.num_terms());
        assert_eq!(le_score(&idx, &t, &p, &q, 0).unwrap(), 1.0);
    }

    #[test]
    fn vanishing_mu_gives_max_likelihood() {
        let idx = index(&["a a b c", "b c c d"], &[]);
        let p = TextModelParams {
            dirichlet_mu: 1e-12,
            k_le: 10,
        };
        let s = lm_score(&idx, &p, &toks("a a b c"), 0).unwrap();
        let ml = 0.5 * 0.5 * 0.25 * 0.25;
        assert!((s - ml).abs() < 1e-9);
    }

    #[test]
    fn unknown_doc_is_error() {
        let idx = index(&["a"], &[]);
        assert!(lm_score(&idx, &TextModelParams::default(), &toks("a"), 3).is_err());
    }

    #[test]
    fn single_term_vocabulary_is_identity() {
        let idx = index(&["a a", "a"], &[]);
        let t = estimate_entailment(&idx, &TextModelParams::default()).unwrap();
        assert_eq!(t.row(0), &[(0, 1.0)]);
    }

    #[test]
    fn never_cooccurring_terms_stay_identity() {
        let idx = index(&["a", "b", "a", "b"], &[]);
        let t = estimate_entailment(&idx, &TextModelParams::default()).unwrap();
        let (a, b) = (idx.term_id("a").unwrap(), idx.term_id("b").unwrap());
        assert_eq!(t.row(a), &[(a, 1.0)]);
        assert_eq!(t.row(b), &[(b, 1.0)]);
    }

    #[test]
    fn le_matches_only_through_table() {
        let idx = index(&["a b", "a b", "b", "c d"], &[]);
        let p = TextModelParams::default();
        let lm = TextScorer::new(idx.clone(), p, TextModel::QueryLikelihood).unwrap();
        let table = estimate_entailment(&idx, &p).unwrap();
        let le = TextScorer::new(idx, p, TextModel::LexicalEntailment(table)).unwrap();
        let q = toks("a");
        assert_eq!(lm.score_query(&q).nnz(), 2);
        // document 2 only contains the associated term b
        let s = le.score_query(&q);
        assert_eq!(s.nnz(), 3);
        assert!(s.get(2) > 0.0);
        assert_eq!(s.get(3), 0.0);
    }

    #[test]
    fn emi_is_symmetric_and_nonnegative() {
        let a = expected_mutual_information(100, 20, 30, 10);
        let b = expected_mutual_information(100, 30, 20, 10);
        assert!((a - b).abs() < 1e-15);
        assert!(a > 0.0);
        assert_eq!(expected_mutual_information(100, 10, 10, 1), expected_mutual_information(100, 10, 10, 1));
        // independence
        assert!(expected_mutual_information(100, 50, 50, 25).abs() < 1e-15);
    }
}
