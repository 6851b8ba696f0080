//! Independent oracles and toy models shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use spagent_core::provider::{Embedder, TokenId, TokenPredictor, Vocabulary, BOS};
use spagent_core::retrieval::{KnowledgeRecord, VectorIndex};

pub const WORDS: [&str; 5] = ["radar", "clutter", "doppler", "filter", "noise"];

/// Word counts over a fixed five-word vocabulary.
pub struct CountEmbedder;

pub fn counts(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; WORDS.len()];
    for w in text.split(|c: char| !c.is_alphanumeric()) {
        if let Some(i) = WORDS.iter().position(|x| x.eq_ignore_ascii_case(w)) {
            v[i] += 1.0;
        }
    }
    v
}

impl Embedder for CountEmbedder {
    fn dimension(&self) -> usize {
        WORDS.len()
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let v = counts(text);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect()
    }
}

pub const DOCS: [(&str, &str); 5] = [
    ("d1", "radar radar clutter"),
    ("d2", "doppler filter"),
    ("d3", "radar doppler"),
    ("d4", "noise"),
    ("d5", "clutter noise noise"),
];

pub fn index() -> VectorIndex {
    VectorIndex::from_records(
        Arc::new(CountEmbedder),
        DOCS.iter().map(|(id, t)| KnowledgeRecord { doc_id: id.to_string(), text: t.to_string(), tags: vec![] }),
    )
    .unwrap()
}

/// Brute-force cosine ranking straight from raw counts, ties by id.
pub fn oracle(query: &str, exclude: &[&str]) -> Vec<(String, f64)> {
    let q = counts(query);
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = DOCS
        .iter()
        .filter(|(id, _)| !exclude.contains(id))
        .map(|(id, t)| {
            let d = counts(t);
            let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
            (id.to_string(), dot / (qn * dn))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Byte-level toy model: the next byte is expected to continue the
/// arithmetic progression of the last two, with probability falling off
/// with distance from that guess.
pub struct Progression {
    vocab: Vocabulary,
    id: String,
}

impl Progression {
    pub fn new() -> Self {
        Self { vocab: Vocabulary::bytes_only(), id: hex_id(b"progression") }
    }

    pub fn guess(context: &[TokenId]) -> i64 {
        match context {
            [.., BOS, BOS] | [BOS] | [] => 97,
            [.., BOS, b] | [b] => i64::from(*b) + 1,
            [.., a, b] => 2 * i64::from(*b) - i64::from(*a),
        }
    }
}

pub fn hex_id(seed: &[u8]) -> String {
    Sha256::digest(seed).iter().map(|b| format!("{b:02x}")).collect()
}

impl TokenPredictor for Progression {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn context_window(&self) -> usize {
        2
    }

    fn model_id(&self) -> &str {
        &self.id
    }

    fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let g = Self::guess(context);
        let w: Vec<f64> = (0..256i64).map(|t| 1.0 / (1.0 + (t - g).abs() as f64)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// DE/rand/1/bin written from the textbook definition: elite by score
/// (ties to the earlier entry), three distinct parents, a base vector,
/// a forced crossover coordinate, then one crossover draw per coordinate.
pub fn oracle_de_step(pool: &[(Vec<f64>, f64)], lo: &[f64], hi: &[f64], f: f64, cr: f64, seed: u64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[b].1.partial_cmp(&pool[a].1).unwrap().then(a.cmp(&b)));
    let elite_len = std::cmp::min(pool.len(), std::cmp::max(8, (pool.len() + 3) / 4));
    let unit = |x: &[f64]| -> Vec<f64> { (0..x.len()).map(|j| (x[j] - lo[j]) / (hi[j] - lo[j])).collect() };
    let elite: Vec<Vec<f64>> = order[..elite_len].iter().map(|&i| unit(&pool[i].0)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents: Vec<usize> = Vec::new();
    while parents.len() < 3 {
        let c = rng.gen_range(0..elite_len);
        if !parents.contains(&c) {
            parents.push(c);
        }
    }
    let base = rng.gen_range(0..elite_len);
    let d = lo.len();
    let j_rand = rng.gen_range(0..d);
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let u: f64 = rng.gen();
        let v = if u < cr || j == j_rand {
            let m = elite[parents[0]][j] + f * (elite[parents[1]][j] - elite[parents[2]][j]);
            m.max(0.0).min(1.0)
        } else {
            elite[base][j]
        };
        out.push(lo[j] + v * (hi[j] - lo[j]));
    }
    out
}
