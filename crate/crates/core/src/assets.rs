//! Bundled fixtures: a public-domain English text for predictor training and
//! codec experiments, and a small signal-processing knowledge base.

use crate::retrieval::{read_knowledge_jsonl, KnowledgeRecord};

pub const CORPUS: &str = include_str!("../assets/corpus.txt");
pub const KNOWLEDGE_JSONL: &str = include_str!("../assets/knowledge.jsonl");

pub fn knowledge_records() -> Vec<KnowledgeRecord> {
    read_knowledge_jsonl(KNOWLEDGE_JSONL.as_bytes()).expect("bundled knowledge base parses")
}

/// Byte offset splitting the corpus into a training prefix of roughly
/// `train_frac` and an evaluation suffix, at a line boundary.
pub fn corpus_split(train_frac: f64) -> (&'static str, &'static str) {
    crate::codec::corpus::split_at_line(CORPUS, train_frac)
}
