//! Collections, score vectors, similarity matrices and relevance judgments,
//! with their on-disk text formats.

mod sparse;
pub mod trec;
pub mod tsv;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

pub use sparse::{ScoreVector, SimMatrix};
pub use trec::{rank_scores, Qrels, RankedList, Run};

use crate::error::{Error, Result};

/// One local descriptor with its normalized image location.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedDescriptor {
    /// `(x, y)` in `[0, 1]²`, `None` when the source had no location.
    pub location: Option<(f64, f64)>,
    pub values: Vec<f64>,
}

impl LocatedDescriptor {
    pub fn new(x: f64, y: f64, values: Vec<f64>) -> Self {
        Self {
            location: Some((x, y)),
            values,
        }
    }
}

/// Named set of descriptors from one low-level feature type.
pub type Channels = BTreeMap<String, Vec<LocatedDescriptor>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub doc_id: String,
    pub text_tokens: Vec<String>,
    /// Descriptor sets keyed by channel name; empty when the document has no image.
    pub visual: Channels,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Query {
    pub query_id: String,
    pub text_tokens: Vec<String>,
    /// Empty in the text-only scenario.
    pub visual: Channels,
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Bidirectional map between document ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocIds {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl DocIds {
    pub fn new(ids: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let mut out = Self::default();
        for id in ids {
            let id = id.into();
            if out.index.contains_key(&id) {
                return Err(Error::DuplicateDocId(id));
            }
            out.index.insert(id.clone(), out.ids.len());
            out.ids.push(id);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// An immutable multimedia collection.
#[derive(Debug, Clone, Default)]
pub struct Collection {
    docs: Vec<Document>,
    ids: DocIds,
}

impl Collection {
    /// Validates unique ids and a consistent descriptor dimension per channel.
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let ids = DocIds::new(docs.iter().map(|d| d.doc_id.clone()))?;
        let mut dims: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            for (ch, descs) in &d.visual {
                for u in descs {
                    let expected = *dims.entry(ch.as_str()).or_insert(u.values.len());
                    if u.values.len() != expected {
                        return Err(Error::DimensionMismatch {
                            expected,
                            actual: u.values.len(),
                        });
                    }
                }
            }
        }
        Ok(Self { docs, ids })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn ids(&self) -> &DocIds {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Channel names present anywhere in the collection.
    pub fn channels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .docs
            .iter()
            .flat_map(|d| d.visual.keys().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// File names used by a collection directory.
pub mod layout {
    pub const DOCS: &str = "docs.tsv";
    pub const QUERIES: &str = "queries.tsv";
    pub const QRELS: &str = "qrels.txt";
    pub const STOPWORDS: &str = "stopwords.txt";
    pub const DOC_DESCRIPTORS_PREFIX: &str = "doc_descriptors.";
    pub const QUERY_DESCRIPTORS_PREFIX: &str = "query_descriptors.";
}

/// A collection directory loaded into memory.
#[derive(Debug, Clone)]
pub struct CollectionDir {
    pub collection: Collection,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub stopwords: Vec<String>,
}

fn channel_files(dir: &Path, prefix: &str) -> Result<Vec<(String, std::path::PathBuf)>> {
    let mut out = Vec::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix(prefix) {
            if let Some(channel) = rest.strip_suffix(".tsv") {
                out.push((channel.to_string(), entry.path()));
            }
        }
    }
    out.sort();
    Ok(out)
}

impl CollectionDir {
    /// Loads `docs.tsv`, `queries.tsv`, `qrels.txt`, optional `stopwords.txt`
    /// and every `{doc,query}_descriptors.<channel>.tsv`.
    pub fn load(dir: &Path) -> Result<Self> {
        Self::load_with(dir, true)
    }

    /// Like [`load`](Self::load); with `query_visual == false` the query
    /// descriptor files are never opened.
    pub fn load_with(dir: &Path, query_visual: bool) -> Result<Self> {
        let texts = tsv::load_texts(&dir.join(layout::DOCS))?;
        let mut docs: Vec<Document> = texts
            .into_iter()
            .map(|(doc_id, text)| Document {
                doc_id,
                text_tokens: tokenize(&text),
                visual: Channels::new(),
            })
            .collect();
        let ids = DocIds::new(docs.iter().map(|d| d.doc_id.clone()))?;
        for (channel, path) in channel_files(dir, layout::DOC_DESCRIPTORS_PREFIX)? {
            for (id, descs) in tsv::load_descriptors(&path)? {
                let idx = ids.index_of(&id).ok_or(Error::UnknownDocument {
                    line: 0,
                    doc_id: id.clone(),
                })?;
                docs[idx].visual.insert(channel.clone(), descs);
            }
        }
        let collection = Collection::new(docs)?;

        let mut queries: Vec<Query> = tsv::load_texts(&dir.join(layout::QUERIES))?
            .into_iter()
            .map(|(query_id, text)| Query {
                query_id,
                text_tokens: tokenize(&text),
                visual: Channels::new(),
            })
            .collect();
        let qpos: HashMap<String, usize> = queries
            .iter()
            .enumerate()
            .map(|(i, q)| (q.query_id.clone(), i))
            .collect();
        let query_files = if query_visual {
            channel_files(dir, layout::QUERY_DESCRIPTORS_PREFIX)?
        } else {
            Vec::new()
        };
        for (channel, path) in query_files {
            for (id, descs) in tsv::load_descriptors(&path)? {
                let &i = qpos.get(&id).ok_or(Error::UnknownDocument {
                    line: 0,
                    doc_id: id.clone(),
                })?;
                queries[i].visual.insert(channel.clone(), descs);
            }
        }
        let qrels_path = dir.join(layout::QRELS);
        let qrels = if qrels_path.exists() {
            Qrels::load(&qrels_path)?
        } else {
            Qrels::default()
        };
        let sw_path = dir.join(layout::STOPWORDS);
        let stopwords = if sw_path.exists() {
            tsv::load_stopwords(&sw_path)?
        } else {
            Vec::new()
        };
        Ok(Self {
            collection,
            queries,
            qrels,
            stopwords,
        })
    }
}
