//! Seeded synthetic multimedia collections.
//!
//! Documents belong to clusters. A cluster owns a topic vocabulary and, per
//! descriptor channel, a visual center. Relevance is cluster membership.
//! Queries are made of a cluster's first topic words (its anchors) plus an
//! image drawn like one of its documents, usually with fewer descriptors.
//!
//! Noise knobs:
//! * `text_noise`: probability that a topic token comes from a uniformly random cluster.
//! * `text_overlap`: fraction of cluster `c + 1`'s vocabulary borrowed from cluster `c`.
//! * `visual_noise`: probability that a descriptor comes from a uniformly random cluster.
//! * `visual_overlap`: probability that a descriptor comes from cluster `c + 1`.
//! * `hubs`: non-relevant documents mixing several clusters.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{layout, tsv, Channels, Collection, CollectionDir, Document, LocatedDescriptor, Qrels, Query};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub clusters: usize,
    pub docs_per_cluster: usize,
    pub queries_per_cluster: usize,
    pub vocab_per_cluster: usize,
    pub background_vocab: usize,
    /// Topic words per query; every document's first topic token is one of them.
    pub query_len: usize,
    pub doc_topic_tokens: usize,
    pub doc_background_tokens: usize,
    pub text_noise: f64,
    pub text_overlap: f64,
    pub channels: usize,
    pub descriptor_dim: usize,
    pub descriptors_per_doc: usize,
    /// Descriptors per query image.
    pub descriptors_per_query: usize,
    /// Standard deviation of cluster centers around the origin.
    pub center_spread: f64,
    /// Standard deviation of descriptors around their center.
    pub descriptor_spread: f64,
    pub visual_noise: f64,
    pub visual_overlap: f64,
    /// Non-relevant collage documents, each mixing the words and images of
    /// `hub_span` clusters.
    pub hubs: usize,
    pub hub_span: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            clusters: 16,
            docs_per_cluster: 24,
            queries_per_cluster: 2,
            vocab_per_cluster: 8,
            background_vocab: 40,
            query_len: 3,
            doc_topic_tokens: 6,
            doc_background_tokens: 6,
            text_noise: 0.45,
            text_overlap: 0.25,
            channels: 2,
            descriptor_dim: 4,
            descriptors_per_doc: 24,
            descriptors_per_query: 6,
            center_spread: 2.0,
            descriptor_spread: 1.0,
            visual_noise: 0.45,
            visual_overlap: 0.0,
            hubs: 0,
            hub_span: 4,
        }
    }
}

impl SynthSpec {
    /// Adds hub documents: collages of several clusters that are close to
    /// many relevant documents yet relevant to none. One propagation step
    /// mostly reaches true neighbors; longer walks pile mass onto hubs.
    pub fn noisy_second_hop() -> Self {
        Self {
            text_noise: 0.3,
            text_overlap: 0.25,
            visual_noise: 0.35,
            descriptors_per_query: 24,
            queries_per_cluster: 1,
            hubs: 64,
            hub_span: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clusters", self.clusters),
            ("docs_per_cluster", self.docs_per_cluster),
            ("queries_per_cluster", self.queries_per_cluster),
            ("vocab_per_cluster", self.vocab_per_cluster),
            ("query_len", self.query_len),
            ("doc_topic_tokens", self.doc_topic_tokens),
            ("descriptor_dim", self.descriptor_dim),
            ("descriptors_per_doc", self.descriptors_per_doc),
            ("descriptors_per_query", self.descriptors_per_query),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.query_len > self.vocab_per_cluster {
            return Err(Error::InvalidParameter("query_len exceeds vocab_per_cluster".into()));
        }
        for (name, v) in [
            ("text_noise", self.text_noise),
            ("text_overlap", self.text_overlap),
            ("visual_noise", self.visual_noise),
            ("visual_overlap", self.visual_overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.hubs > 0 && !(1..=self.clusters).contains(&self.hub_span) {
            return Err(Error::InvalidParameter("hub_span must be in [1, clusters]".into()));
        }
        if self.visual_noise + self.visual_overlap > 1.0 {
            return Err(Error::InvalidParameter("visual_noise + visual_overlap exceeds 1".into()));
        }
        if !(self.center_spread > 0.0 && self.descriptor_spread > 0.0) {
            return Err(Error::InvalidParameter("spreads must be positive".into()));
        }
        Ok(())
    }
}

pub const STOPWORDS: [&str; 4] = ["the", "a", "of", "with"];

/// In-memory synthetic collection.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub docs: Vec<Document>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub stopwords: Vec<String>,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn generate(seed: u64, spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_n = spec.clusters;

    // topic vocabularies; cluster c+1 borrows its tail words from cluster c
    let borrowed = ((spec.vocab_per_cluster - spec.query_len) as f64 * spec.text_overlap).round() as usize;
    let own: Vec<Vec<String>> = (0..c_n)
        .map(|c| (0..spec.vocab_per_cluster).map(|j| format!("t{c}w{j}")).collect())
        .collect();
    let vocab: Vec<Vec<String>> = (0..c_n)
        .map(|c| {
            let mut v = own[c].clone();
            if c_n > 1 {
                let prev = &own[(c + c_n - 1) % c_n];
                for j in 0..borrowed {
                    let slot = spec.vocab_per_cluster - 1 - j;
                    v[slot] = prev[spec.query_len + j].clone();
                }
            }
            v
        })
        .collect();
    let background: Vec<String> = (0..spec.background_vocab).map(|j| format!("bg{j}")).collect();

    let center_dist = Normal::new(0.0, spec.center_spread).expect("positive spread");
    let centers: Vec<Vec<Vec<f64>>> = (0..spec.channels)
        .map(|_| {
            (0..c_n)
                .map(|_| (0..spec.descriptor_dim).map(|_| center_dist.sample(&mut rng)).collect())
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, spec.descriptor_spread).expect("positive spread");

    let topic_token = |rng: &mut ChaCha8Rng, c: usize, anchor: bool| -> String {
        let src = if rng.gen::<f64>() < spec.text_noise {
            rng.gen_range(0..c_n)
        } else {
            c
        };
        let j = if anchor {
            rng.gen_range(0..spec.query_len)
        } else {
            rng.gen_range(0..spec.vocab_per_cluster)
        };
        vocab[src][j].clone()
    };

    let image = |rng: &mut ChaCha8Rng, c: usize, count: usize| -> Channels {
        let mut out = Channels::new();
        for (ch, ch_centers) in centers.iter().enumerate() {
            let descs = (0..count)
                .map(|_| {
                    let r = rng.gen::<f64>();
                    let src = if r < spec.visual_noise {
                        rng.gen_range(0..c_n)
                    } else if r < spec.visual_noise + spec.visual_overlap {
                        (c + 1) % c_n
                    } else {
                        c
                    };
                    let values = ch_centers[src]
                        .iter()
                        .map(|&m| round6(m + noise.sample(rng)))
                        .collect();
                    LocatedDescriptor::new(round6(rng.gen()), round6(rng.gen()), values)
                })
                .collect();
            out.insert(format!("ch{ch}"), descs);
        }
        out
    };

    let mut docs = Vec::with_capacity(c_n * spec.docs_per_cluster);
    let mut qrels = Qrels::default();
    for c in 0..c_n {
        for i in 0..spec.docs_per_cluster {
            let doc_id = format!("c{c:02}d{i:03}");
            let mut tokens = Vec::new();
            for t in 0..spec.doc_topic_tokens {
                tokens.push(topic_token(&mut rng, c, t == 0));
            }
            for _ in 0..spec.doc_background_tokens {
                if !background.is_empty() {
                    tokens.push(background[rng.gen_range(0..background.len())].clone());
                }
            }
            tokens.shuffle(&mut rng);
            tokens.insert(0, STOPWORDS[rng.gen_range(0..STOPWORDS.len())].to_string());
            let visual = image(&mut rng, c, spec.descriptors_per_doc);
            for q in 0..spec.queries_per_cluster {
                qrels.insert(format!("q{c:02}_{q}"), doc_id.clone(), true);
            }
            docs.push(Document {
                doc_id,
                text_tokens: tokens,
                visual,
            });
        }
    }
    for h in 0..spec.hubs {
        let span: Vec<usize> = rand::seq::index::sample(&mut rng, c_n, spec.hub_span).into_vec();
        let mut tokens = Vec::new();
        for &c in &span {
            tokens.push(vocab[c][rng.gen_range(0..spec.query_len)].clone());
        }
        for _ in 0..spec.doc_background_tokens {
            if !background.is_empty() {
                tokens.push(background[rng.gen_range(0..background.len())].clone());
            }
        }
        tokens.shuffle(&mut rng);
        let mut visual = Channels::new();
        for (ch, ch_centers) in centers.iter().enumerate() {
            let descs = (0..spec.descriptors_per_doc)
                .map(|_| {
                    let src = span[rng.gen_range(0..span.len())];
                    let values = ch_centers[src]
                        .iter()
                        .map(|&m| round6(m + noise.sample(&mut rng)))
                        .collect();
                    LocatedDescriptor::new(round6(rng.gen()), round6(rng.gen()), values)
                })
                .collect();
            visual.insert(format!("ch{ch}"), descs);
        }
        docs.push(Document {
            doc_id: format!("hub{h:03}"),
            text_tokens: tokens,
            visual,
        });
    }
    let mut queries = Vec::new();
    for c in 0..c_n {
        for q in 0..spec.queries_per_cluster {
            let mut anchors: Vec<String> = vocab[c][..spec.query_len].to_vec();
            anchors.insert(0, "the".to_string());
            queries.push(Query {
                query_id: format!("q{c:02}_{q}"),
                text_tokens: anchors,
                visual: image(&mut rng, c, spec.descriptors_per_query),
            });
        }
    }
    Ok(Synthetic {
        docs,
        queries,
        qrels,
        stopwords: STOPWORDS.iter().map(|s| s.to_string()).collect(),
    })
}

impl Synthetic {
    pub fn into_collection_dir(self) -> Result<CollectionDir> {
        Ok(CollectionDir {
            collection: Collection::new(self.docs)?,
            queries: self.queries,
            qrels: self.qrels,
            stopwords: self.stopwords,
        })
    }

    /// Writes the collection in the directory layout read by
    /// [`CollectionDir::load`].
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        let texts: Vec<(String, String)> = self
            .docs
            .iter()
            .map(|d| (d.doc_id.clone(), d.text_tokens.join(" ")))
            .collect();
        tsv::write_texts(create(layout::DOCS)?, &texts)?;
        let qtexts: Vec<(String, String)> = self
            .queries
            .iter()
            .map(|q| (q.query_id.clone(), q.text_tokens.join(" ")))
            .collect();
        tsv::write_texts(create(layout::QUERIES)?, &qtexts)?;
        self.qrels.write(create(layout::QRELS)?)?;
        let mut sw = create(layout::STOPWORDS)?;
        for s in &self.stopwords {
            use std::io::Write;
            writeln!(sw, "{s}").map_err(|e| Error::io(dir, e))?;
        }
        drop(sw);
        let channels: Vec<String> = {
            let mut c: Vec<String> = self.docs.iter().flat_map(|d| d.visual.keys().cloned()).collect();
            c.sort();
            c.dedup();
            c
        };
        for ch in channels {
            let sets: Vec<(String, Vec<LocatedDescriptor>)> = self
                .docs
                .iter()
                .filter_map(|d| d.visual.get(&ch).map(|v| (d.doc_id.clone(), v.clone())))
                .collect();
            tsv::write_descriptors(create(&format!("{}{ch}.tsv", layout::DOC_DESCRIPTORS_PREFIX))?, &sets)?;
            let qsets: Vec<(String, Vec<LocatedDescriptor>)> = self
                .queries
                .iter()
                .filter_map(|q| q.visual.get(&ch).map(|v| (q.query_id.clone(), v.clone())))
                .collect();
            tsv::write_descriptors(create(&format!("{}{ch}.tsv", layout::QUERY_DESCRIPTORS_PREFIX))?, &qsets)?;
        }
        Ok(())
    }
}

/// Generates and writes a collection.
pub fn make_synthetic(seed: u64, spec: &SynthSpec, dir: &Path) -> Result<Synthetic> {
    let s = generate(seed, spec)?;
    s.write(dir)?;
    Ok(s)
}
