//! Next-token predictors and the probability-ordered vocabulary they induce.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::ngram::NgramModel;
use super::ProviderError;

pub type TokenId = u32;

/// Reserved begin-of-stream symbol used to pad short contexts. It never
/// appears in a vocabulary and therefore never receives a rank.
pub const BOS: TokenId = u32::MAX;

/// Longest token a vocabulary may hold, in bytes.
pub const MAX_TOKEN_LEN: usize = 32;

/// Ordered token table. Ids `0..256` are always the single bytes, so every
/// byte string has a tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, TokenId>,
    max_len: usize,
}

impl Vocabulary {
    pub fn bytes_only() -> Self {
        Self::with_tokens(std::iter::empty::<Vec<u8>>())
    }

    /// Byte tokens followed by `extra` in the given order. Duplicates,
    /// single bytes and over-long entries are dropped.
    pub fn with_tokens<I, T>(extra: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let mut lookup: HashMap<Vec<u8>, TokenId> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        for t in extra {
            let t = t.as_ref();
            if t.len() < 2 || t.len() > MAX_TOKEN_LEN || lookup.contains_key(t) {
                continue;
            }
            lookup.insert(t.to_vec(), tokens.len() as TokenId);
            tokens.push(t.to_vec());
        }
        let max_len = tokens.iter().map(Vec::len).max().unwrap_or(1);
        Self { tokens, lookup, max_len }
    }

    /// Learns `merges` multi-byte tokens from `corpus` by repeatedly fusing
    /// the most frequent adjacent pair (ties go to the smallest pair of ids).
    pub fn learn(corpus: &[u8], merges: usize) -> Self {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let mut seq: Vec<TokenId> = corpus.iter().map(|&b| TokenId::from(b)).collect();
        for _ in 0..merges {
            let mut counts: HashMap<(TokenId, TokenId), usize> = HashMap::new();
            for w in seq.windows(2) {
                let merged = tokens[w[0] as usize].len() + tokens[w[1] as usize].len();
                if merged <= MAX_TOKEN_LEN {
                    *counts.entry((w[0], w[1])).or_default() += 1;
                }
            }
            let best = counts
                .into_iter()
                .filter(|(_, c)| *c >= 2)
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
            let Some(((a, b), _)) = best else { break };
            let mut joined = tokens[a as usize].clone();
            joined.extend_from_slice(&tokens[b as usize]);
            let new_id = tokens.len() as TokenId;
            tokens.push(joined);
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == a && seq[i + 1] == b {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(seq[i]);
                    i += 1;
                }
            }
            seq = out;
        }
        Self::with_tokens(tokens.into_iter().skip(256))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    pub fn id_of(&self, bytes: &[u8]) -> Option<TokenId> {
        self.lookup.get(bytes).copied()
    }

    pub fn max_token_len(&self) -> usize {
        self.max_len
    }

    pub fn tokens(&self) -> impl Iterator<Item = &[u8]> {
        self.tokens.iter().map(Vec::as_slice)
    }
}

/// Vocabulary ids sorted from most to least probable; ties go to the lower id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedVocabulary {
    pub ranks: Vec<TokenId>,
}

impl RankedVocabulary {
    pub fn from_distribution(probs: &[f64]) -> Self {
        let mut ranks: Vec<TokenId> = (0..probs.len() as TokenId).collect();
        ranks.sort_by(|&a, &b| rank_order(probs, a, b));
        Self { ranks }
    }

    pub fn token_at(&self, rank: usize) -> Option<TokenId> {
        self.ranks.get(rank).copied()
    }

    pub fn position(&self, token: TokenId) -> Option<usize> {
        self.ranks.iter().position(|&t| t == token)
    }
}

fn rank_order(probs: &[f64], a: TokenId, b: TokenId) -> Ordering {
    probs[b as usize].total_cmp(&probs[a as usize]).then(a.cmp(&b))
}

/// Integer key sorting like [`rank_order`]: probability descending, then
/// id ascending. Probabilities are finite and non-negative, so their bit
/// patterns order like the values.
pub(crate) fn rank_key(p: f64, id: TokenId) -> u128 {
    let p = if p == 0.0 { 0.0 } else { p };
    (u128::from(u64::MAX - p.to_bits()) << 32) | u128::from(id)
}

/// A model that assigns a probability to every vocabulary entry given the
/// preceding tokens.
pub trait TokenPredictor: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Longest context the predictor looks at.
    fn context_window(&self) -> usize;

    /// Hex SHA-256 identifying the exact predictor state.
    fn model_id(&self) -> &str;

    /// Probabilities for every vocabulary id. `context` may contain [`BOS`].
    fn distribution(&self, context: &[TokenId]) -> Vec<f64>;

    fn ranking(&self, context: &[TokenId]) -> RankedVocabulary {
        RankedVocabulary::from_distribution(&self.distribution(context))
    }

    /// Position of `token` in [`TokenPredictor::ranking`] without sorting.
    fn rank_of(&self, context: &[TokenId], token: TokenId) -> usize {
        let probs = self.distribution(context);
        let p = probs[token as usize];
        probs
            .iter()
            .enumerate()
            .filter(|&(i, q)| *q > p || (*q == p && (i as TokenId) < token))
            .count()
    }

    /// Inverse of [`TokenPredictor::rank_of`].
    fn token_at_rank(&self, context: &[TokenId], rank: usize) -> Option<TokenId> {
        let probs = self.distribution(context);
        if rank >= probs.len() {
            return None;
        }
        let mut keys: Vec<u128> = probs.iter().enumerate().map(|(i, p)| rank_key(*p, i as TokenId)).collect();
        let (_, nth, _) = keys.select_nth_unstable(rank);
        Some(*nth as u32)
    }
}

/// Ranks the vocabulary after truncating `context` to the predictor's window.
pub fn next_token_ranking(context: &[TokenId], predictor: &dyn TokenPredictor) -> RankedVocabulary {
    let window = predictor.context_window();
    let start = context.len().saturating_sub(window);
    predictor.ranking(&context[start..])
}

/// Assigns equal probability to every token.
#[derive(Debug, Clone)]
pub struct UniformPredictor {
    vocab: Vocabulary,
    model_id: String,
}

impl UniformPredictor {
    pub fn new(vocab: Vocabulary) -> Self {
        let mut h = Sha256::new();
        h.update(b"uniform");
        for t in vocab.tokens() {
            h.update((t.len() as u16).to_le_bytes());
            h.update(t);
        }
        let model_id = hex::encode(h.finalize());
        Self { vocab, model_id }
    }
}

impl TokenPredictor for UniformPredictor {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn context_window(&self) -> usize {
        1
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn distribution(&self, _context: &[TokenId]) -> Vec<f64> {
        let n = self.vocab.len();
        vec![1.0 / n as f64; n]
    }

    fn rank_of(&self, _context: &[TokenId], token: TokenId) -> usize {
        token as usize
    }

    fn token_at_rank(&self, _context: &[TokenId], rank: usize) -> Option<TokenId> {
        (rank < self.vocab.len()).then_some(rank as TokenId)
    }
}

/// Predictors addressable by model id, as needed by the decoder.
#[derive(Clone, Default)]
pub struct PredictorRegistry {
    models: BTreeMap<String, Arc<dyn TokenPredictor>>,
}

impl PredictorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, predictor: Arc<dyn TokenPredictor>) {
        self.models.insert(predictor.model_id().to_owned(), predictor);
    }

    pub fn get(&self, model_id: &str) -> Option<Arc<dyn TokenPredictor>> {
        self.models.get(model_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Loads every `*.slpm` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ProviderError> {
        let mut registry = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "slpm"))
            .collect();
        paths.sort();
        for path in paths {
            let model = NgramModel::load(&path)?;
            registry.insert(Arc::new(model));
        }
        Ok(registry)
    }
}

impl std::fmt::Debug for PredictorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PredictorRegistry").field("models", &self.models.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_contains_all_bytes() {
        let v = Vocabulary::with_tokens(["th", "the", "x"]);
        for b in 0..=255u8 {
            assert_eq!(v.id_of(&[b]), Some(TokenId::from(b)));
        }
        assert_eq!(v.len(), 258);
        assert_eq!(v.max_token_len(), 3);
    }

    #[test]
    fn uniform_ranks_by_ascending_index() {
        let p = UniformPredictor::new(Vocabulary::bytes_only());
        let r = next_token_ranking(&[], &p);
        assert_eq!(r.ranks, (0..256).collect::<Vec<_>>());
        let generic = RankedVocabulary::from_distribution(&p.distribution(&[]));
        assert_eq!(generic, r);
    }

    #[test]
    fn ties_break_by_lower_index() {
        let r = RankedVocabulary::from_distribution(&[0.2, 0.3, 0.2, 0.3]);
        assert_eq!(r.ranks, vec![1, 3, 0, 2]);
    }

    #[test]
    fn learned_vocabulary_picks_frequent_pairs() {
        let v = Vocabulary::learn(b"abababab cdcd", 1);
        assert_eq!(v.len(), 257);
        assert_eq!(v.token(256), Some(&b"ab"[..]));
    }
}
