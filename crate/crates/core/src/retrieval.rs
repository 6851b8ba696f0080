//! Exact cosine-similarity vector index over a knowledge base.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{cosine, Embedder};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("the index holds no documents")]
    EmptyIndex,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error("knowledge base line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a knowledge-base ingestion file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeDocument {
    pub doc_id: String,
    pub text: String,
    pub tags: BTreeSet<String>,
    pub embedding: Vec<f64>,
}

/// A retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub doc_id: String,
    pub text: String,
    pub score: f64,
}

/// Evidence accumulated over retrieval hops: every document retrieved so far
/// followed by every intermediate answer, both in hop order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HopContext {
    pub documents: Vec<(String, String)>,
    pub answers: Vec<String>,
}

impl HopContext {
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty() && self.answers.is_empty()
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.documents.iter().any(|(id, _)| id == doc_id)
    }

    pub fn doc_ids(&self) -> Vec<&str> {
        self.documents.iter().map(|(id, _)| id.as_str()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, text) in &self.documents {
            out.push_str(&format!("[{id}] {text}\n"));
        }
        for (i, a) in self.answers.iter().enumerate() {
            out.push_str(&format!("(answer {}) {a}\n", i + 1));
        }
        out
    }
}

pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, top_k: usize) -> Result<Vec<Retrieved>, RetrievalError>;

    /// Retrieval against `query` extended with the accumulated context.
    /// Documents already in `context` are never returned again.
    fn retrieve_with_context(
        &self,
        query: &str,
        context: &HopContext,
        top_k: usize,
    ) -> Result<Vec<Retrieved>, RetrievalError>;
}

impl<R: Retriever + ?Sized> Retriever for &R {
    fn retrieve(&self, query: &str, top_k: usize) -> Result<Vec<Retrieved>, RetrievalError> {
        (**self).retrieve(query, top_k)
    }

    fn retrieve_with_context(
        &self,
        query: &str,
        context: &HopContext,
        top_k: usize,
    ) -> Result<Vec<Retrieved>, RetrievalError> {
        (**self).retrieve_with_context(query, context, top_k)
    }
}

pub struct IndexBuilder {
    embedder: Arc<dyn Embedder>,
    documents: Vec<KnowledgeDocument>,
    ids: HashSet<String>,
}

impl IndexBuilder {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self { embedder, documents: Vec::new(), ids: HashSet::new() }
    }

    pub fn add(&mut self, record: KnowledgeRecord) -> Result<&mut Self, RetrievalError> {
        if record.text.trim().is_empty() {
            return Err(RetrievalError::EmptyText(record.doc_id));
        }
        if !self.ids.insert(record.doc_id.clone()) {
            return Err(RetrievalError::DuplicateId(record.doc_id));
        }
        let embedding = self.embedder.embed(&record.text);
        self.documents.push(KnowledgeDocument {
            doc_id: record.doc_id,
            text: record.text,
            tags: record.tags.into_iter().collect(),
            embedding,
        });
        Ok(self)
    }

    pub fn extend<I: IntoIterator<Item = KnowledgeRecord>>(mut self, records: I) -> Result<Self, RetrievalError> {
        for r in records {
            self.add(r)?;
        }
        Ok(self)
    }

    pub fn seal(self) -> VectorIndex {
        VectorIndex {
            dimension: self.embedder.dimension(),
            embedder: self.embedder,
            documents: self.documents,
            calls: AtomicUsize::new(0),
        }
    }
}

/// Sealed, immutable index. Queries are a brute-force scan.
pub struct VectorIndex {
    dimension: usize,
    embedder: Arc<dyn Embedder>,
    documents: Vec<KnowledgeDocument>,
    calls: AtomicUsize,
}

impl VectorIndex {
    pub fn builder(embedder: Arc<dyn Embedder>) -> IndexBuilder {
        IndexBuilder::new(embedder)
    }

    pub fn from_records<I>(embedder: Arc<dyn Embedder>, records: I) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = KnowledgeRecord>,
    {
        Ok(IndexBuilder::new(embedder).extend(records)?.seal())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[KnowledgeDocument] {
        &self.documents
    }

    pub fn get(&self, doc_id: &str) -> Option<&KnowledgeDocument> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Number of retrieval calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn ranked(
        &self,
        text: &str,
        top_k: usize,
        exclude: impl Fn(&str) -> bool,
    ) -> Result<Vec<Retrieved>, RetrievalError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if top_k == 0 {
            return Err(RetrievalError::InvalidTopK);
        }
        if self.documents.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let q = self.embedder.embed(text);
        let mut scored: Vec<(&KnowledgeDocument, f64)> = self
            .documents
            .iter()
            .filter(|d| !exclude(&d.doc_id))
            .map(|d| (d, cosine(&q, &d.embedding)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.doc_id.cmp(&b.0.doc_id)));
        Ok(scored
            .into_iter()
            .take(top_k)
            .map(|(d, score)| Retrieved { doc_id: d.doc_id.clone(), text: d.text.clone(), score })
            .collect())
    }
}

impl Retriever for VectorIndex {
    fn retrieve(&self, query: &str, top_k: usize) -> Result<Vec<Retrieved>, RetrievalError> {
        self.ranked(query, top_k, |_| false)
    }

    fn retrieve_with_context(
        &self,
        query: &str,
        context: &HopContext,
        top_k: usize,
    ) -> Result<Vec<Retrieved>, RetrievalError> {
        if context.is_empty() {
            return self.retrieve(query, top_k);
        }
        let text = format!("{query}\n\n{}", context.render());
        self.ranked(&text, top_k, |id| context.contains_doc(id))
    }
}

/// Reads line-delimited JSON knowledge records; blank lines are skipped.
pub fn read_knowledge_jsonl<R: BufRead>(reader: R) -> Result<Vec<KnowledgeRecord>, RetrievalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: KnowledgeRecord = serde_json::from_str(&line)
            .map_err(|e| RetrievalError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_knowledge_jsonl(records: &[KnowledgeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::HashingEmbedder;

    fn rec(id: &str, text: &str) -> KnowledgeRecord {
        KnowledgeRecord { doc_id: id.into(), text: text.into(), tags: vec![] }
    }

    fn index(records: Vec<KnowledgeRecord>) -> VectorIndex {
        VectorIndex::from_records(Arc::new(HashingEmbedder::default()), records).unwrap()
    }

    #[test]
    fn verbatim_document_ranks_first() {
        let idx = index(vec![
            rec("a", "doppler spectrum of sea clutter"),
            rec("b", "short time fourier transform windows"),
            rec("c", "entropy coding with huffman tables"),
        ]);
        let hits = idx.retrieve("short time fourier transform windows", 1).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "b");
        assert!((hits[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn top_k_larger_than_index_returns_everything_sorted() {
        let idx = index(vec![rec("a", "alpha beta"), rec("b", "beta gamma"), rec("c", "delta")]);
        let hits = idx.retrieve("beta", 10).unwrap();
        assert_eq!(hits.len(), 3);
        assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = index(vec![rec("z", "same words"), rec("m", "same words"), rec("a", "same words")]);
        let ids: Vec<_> = idx.retrieve("same words", 3).unwrap().into_iter().map(|h| h.doc_id).collect();
        assert_eq!(ids, ["a", "m", "z"]);
    }

    #[test]
    fn empty_index_and_bad_top_k() {
        let idx = index(vec![]);
        assert!(matches!(idx.retrieve("x", 1), Err(RetrievalError::EmptyIndex)));
        let idx = index(vec![rec("a", "x")]);
        assert!(matches!(idx.retrieve("x", 0), Err(RetrievalError::InvalidTopK)));
    }

    #[test]
    fn builder_rejects_duplicates_and_empty_text() {
        let mut b = IndexBuilder::new(Arc::new(HashingEmbedder::default()));
        b.add(rec("a", "x")).unwrap();
        assert!(matches!(b.add(rec("a", "y")), Err(RetrievalError::DuplicateId(_))));
        assert!(matches!(b.add(rec("b", "  ")), Err(RetrievalError::EmptyText(_))));
    }

    #[test]
    fn empty_context_matches_plain_retrieval() {
        let idx = index(vec![rec("a", "alpha beta"), rec("b", "beta gamma"), rec("c", "delta")]);
        assert_eq!(
            idx.retrieve("beta", 2).unwrap(),
            idx.retrieve_with_context("beta", &HopContext::default(), 2).unwrap()
        );
    }

    #[test]
    fn context_holding_every_doc_yields_nothing() {
        let idx = index(vec![rec("a", "alpha"), rec("b", "beta")]);
        let ctx = HopContext {
            documents: vec![("a".into(), "alpha".into()), ("b".into(), "beta".into())],
            answers: vec![],
        };
        assert!(idx.retrieve_with_context("alpha", &ctx, 5).unwrap().is_empty());
    }

    #[test]
    fn calls_are_counted() {
        let idx = index(vec![rec("a", "alpha")]);
        idx.retrieve("alpha", 1).unwrap();
        idx.retrieve_with_context("alpha", &HopContext::default(), 1).unwrap();
        assert_eq!(idx.calls(), 2);
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![
            KnowledgeRecord { doc_id: "d1".into(), text: "stft basics".into(), tags: vec!["dsp".into()] },
            rec("d2", "radar"),
        ];
        let text = write_knowledge_jsonl(&recs);
        let back = read_knowledge_jsonl(std::io::Cursor::new(format!("{text}\n"))).unwrap();
        assert_eq!(back, recs);
        let err = read_knowledge_jsonl(std::io::Cursor::new("{oops")).unwrap_err();
        assert!(matches!(err, RetrievalError::Parse { line: 1, .. }));
    }
}
