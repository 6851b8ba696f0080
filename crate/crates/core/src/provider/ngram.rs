//! Back-off n-gram predictor with additive smoothing.
//!
//! Every order shares one recursion: the unigram level is Laplace smoothed,
//! and a seen context of length `m` mixes its own counts with the order
//! `m - 1` distribution as a prior of total mass `smoothing * |V|`:
//!
//! ```text
//! P0(t)     = (c(t) + λ) / (N + λ|V|)
//! Pm(t | h) = (c(h, t) + λ|V| · Pm-1(t | h')) / (c(h) + λ|V|)     if c(h) > 0
//!           = Pm-1(t | h')                                          otherwise
//! ```
//!
//! so an unseen context backs off to exactly the shorter-context distribution,
//! and each level sums to one.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::predictor::{rank_key, TokenId, TokenPredictor, Vocabulary, BOS};
use super::ProviderError;

pub const MAGIC: &[u8; 4] = b"SLPM";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ContextCounts {
    total: u64,
    /// Sorted by token id.
    next: Vec<(TokenId, u32)>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    vocab: Vocabulary,
    order: usize,
    smoothing: f64,
    unigram: Vec<u64>,
    /// `contexts[m - 1]` holds contexts of length `m`.
    contexts: Vec<HashMap<Vec<TokenId>, ContextCounts>>,
    base: Vec<f64>,
    /// Ids by descending `base`, ties by id: the ranking when no context
    /// matches.
    base_order: Vec<TokenId>,
    /// `base_order` cut into runs of equal `base`.
    base_groups: Vec<(f64, Vec<TokenId>)>,
    group_of: Vec<u32>,
    model_id: String,
}

/// Trains on a single token sequence. See [`NgramModel::train`].
pub fn train_ngram(
    corpus: &[TokenId],
    order: usize,
    smoothing: f64,
    vocab: Vocabulary,
) -> Result<NgramModel, ProviderError> {
    NgramModel::train(std::slice::from_ref(&corpus.to_vec()), order, smoothing, vocab)
}

impl NgramModel {
    /// Counts every sequence independently, each left-padded with `order - 1`
    /// [`BOS`] symbols so that stream-initial contexts are learned too.
    pub fn train(
        sequences: &[Vec<TokenId>],
        order: usize,
        smoothing: f64,
        vocab: Vocabulary,
    ) -> Result<Self, ProviderError> {
        if order == 0 {
            return Err(ProviderError::InvalidModel("order must be at least 1".into()));
        }
        if !(smoothing > 0.0) || !smoothing.is_finite() {
            return Err(ProviderError::InvalidModel("smoothing must be positive".into()));
        }
        if sequences.iter().all(Vec::is_empty) {
            return Err(ProviderError::InvalidModel("training corpus is empty".into()));
        }
        let v = vocab.len();
        let mut unigram = vec![0u64; v];
        let mut raw: Vec<HashMap<Vec<TokenId>, HashMap<TokenId, u32>>> = vec![HashMap::new(); order - 1];
        for seq in sequences {
            let mut padded = vec![BOS; order - 1];
            padded.extend_from_slice(seq);
            for pos in (order - 1)..padded.len() {
                let tok = padded[pos];
                if tok as usize >= v {
                    return Err(ProviderError::InvalidModel(format!("token {tok} outside vocabulary")));
                }
                unigram[tok as usize] += 1;
                for m in 1..order {
                    let ctx = padded[pos - m..pos].to_vec();
                    *raw[m - 1].entry(ctx).or_default().entry(tok).or_default() += 1;
                }
            }
        }
        let contexts = raw
            .into_iter()
            .map(|level| {
                level
                    .into_iter()
                    .map(|(ctx, next)| {
                        let mut next: Vec<(TokenId, u32)> = next.into_iter().collect();
                        next.sort_unstable();
                        let total = next.iter().map(|(_, c)| u64::from(*c)).sum();
                        (ctx, ContextCounts { total, next })
                    })
                    .collect()
            })
            .collect();
        Ok(Self::assemble(vocab, order, smoothing, unigram, contexts))
    }

    fn assemble(
        vocab: Vocabulary,
        order: usize,
        smoothing: f64,
        unigram: Vec<u64>,
        contexts: Vec<HashMap<Vec<TokenId>, ContextCounts>>,
    ) -> Self {
        let v = vocab.len() as f64;
        let n: u64 = unigram.iter().sum();
        let denom = n as f64 + smoothing * v;
        let base: Vec<f64> = unigram.iter().map(|&c| (c as f64 + smoothing) / denom).collect();
        let mut base_order: Vec<TokenId> = (0..base.len() as TokenId).collect();
        base_order.sort_by_key(|&t| rank_key(base[t as usize], t));
        let mut base_groups: Vec<(f64, Vec<TokenId>)> = Vec::new();
        for &t in &base_order {
            let p = base[t as usize];
            match base_groups.last_mut() {
                Some((q, ids)) if *q == p => ids.push(t),
                _ => base_groups.push((p, vec![t])),
            }
        }
        let mut group_of = vec![0u32; base.len()];
        for (g, (_, ids)) in base_groups.iter().enumerate() {
            for &t in ids {
                group_of[t as usize] = g as u32;
            }
        }
        let mut model = Self {
            vocab,
            order,
            smoothing,
            unigram,
            contexts,
            base,
            base_order,
            base_groups,
            group_of,
            model_id: String::new(),
        };
        let body = model.body_bytes();
        model.model_id = hex::encode(Sha256::digest(&body));
        model
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Full container: magic, version, then the hashed body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.body_bytes());
        out
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.order as u32).to_le_bytes());
        out.extend_from_slice(&self.smoothing.to_le_bytes());
        out.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        for t in self.vocab.tokens() {
            out.extend_from_slice(&(t.len() as u16).to_le_bytes());
            out.extend_from_slice(t);
        }
        for &c in &self.unigram {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for level in &self.contexts {
            let mut keys: Vec<&Vec<TokenId>> = level.keys().collect();
            keys.sort_unstable();
            out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
            for key in keys {
                let counts = &level[key];
                for &t in key {
                    out.extend_from_slice(&t.to_le_bytes());
                }
                out.extend_from_slice(&(counts.next.len() as u32).to_le_bytes());
                for &(t, c) in &counts.next {
                    out.extend_from_slice(&t.to_le_bytes());
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProviderError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ProviderError::InvalidModel("bad magic".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(ProviderError::InvalidModel(format!("unsupported version {version}")));
        }
        let order = r.u32()? as usize;
        let smoothing = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        if order == 0 || !(smoothing > 0.0) {
            return Err(ProviderError::InvalidModel("invalid order or smoothing".into()));
        }
        let v = r.u32()? as usize;
        let mut tokens = Vec::with_capacity(v);
        for _ in 0..v {
            let len = r.u16()? as usize;
            tokens.push(r.take(len)?.to_vec());
        }
        let vocab = Vocabulary::with_tokens(tokens.iter().skip(256));
        if vocab.len() != v || tokens.iter().take(256).enumerate().any(|(i, t)| t != &[i as u8]) {
            return Err(ProviderError::InvalidModel("malformed vocabulary table".into()));
        }
        let mut unigram = Vec::with_capacity(v);
        for _ in 0..v {
            unigram.push(r.u64()?);
        }
        let mut contexts = Vec::with_capacity(order - 1);
        for m in 1..order {
            let n_ctx = r.u64()? as usize;
            let mut level = HashMap::with_capacity(n_ctx);
            for _ in 0..n_ctx {
                let mut key = Vec::with_capacity(m);
                for _ in 0..m {
                    key.push(r.u32()?);
                }
                let n_next = r.u32()? as usize;
                let mut next = Vec::with_capacity(n_next);
                for _ in 0..n_next {
                    let t = r.u32()?;
                    if t as usize >= v {
                        return Err(ProviderError::InvalidModel("count table token out of range".into()));
                    }
                    next.push((t, r.u32()?));
                }
                let total = next.iter().map(|(_, c)| u64::from(*c)).sum();
                level.insert(key, ContextCounts { total, next });
            }
            contexts.push(level);
        }
        if r.pos != bytes.len() {
            return Err(ProviderError::InvalidModel("trailing bytes".into()));
        }
        Ok(Self::assemble(vocab, order, smoothing, unigram, contexts))
    }

    pub fn save(&self, path: &Path) -> Result<(), ProviderError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

impl TokenPredictor for NgramModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn context_window(&self) -> usize {
        (self.order - 1).max(1)
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let mut probs = self.base.clone();
        let prior_mass = self.smoothing * self.vocab.len() as f64;
        let usable = context.len().min(self.order - 1);
        for m in 1..=usable {
            let key = &context[context.len() - m..];
            let Some(counts) = self.contexts[m - 1].get(key) else {
                // longer contexts containing an unseen suffix are unseen as well
                break;
            };
            let denom = counts.total as f64 + prior_mass;
            let scale = prior_mass / denom;
            probs.iter_mut().for_each(|p| *p *= scale);
            for &(t, c) in &counts.next {
                probs[t as usize] += f64::from(c) / denom;
            }
        }
        probs
    }

    /// Same order as ranking [`TokenPredictor::distribution`], without
    /// building it. Tokens the context never saw keep their relative base
    /// order, so only the seen ones need sorting.
    fn token_at_rank(&self, context: &[TokenId], rank: usize) -> Option<TokenId> {
        if rank >= self.base.len() {
            return None;
        }
        let prior_mass = self.smoothing * self.vocab.len() as f64;
        let usable = context.len().min(self.order - 1);
        let mut scales: Vec<f64> = Vec::with_capacity(usable);
        // NaN marks tokens no matched context has seen.
        let mut seen = vec![f64::NAN; self.base.len()];
        let mut touched: Vec<TokenId> = Vec::new();
        for m in 1..=usable {
            let key = &context[context.len() - m..];
            let Some(counts) = self.contexts[m - 1].get(key) else { break };
            let denom = counts.total as f64 + prior_mass;
            let scale = prior_mass / denom;
            touched.iter().for_each(|&t| seen[t as usize] *= scale);
            scales.push(scale);
            for &(t, c) in &counts.next {
                let p = &mut seen[t as usize];
                if p.is_nan() {
                    *p = scales.iter().fold(self.base[t as usize], |p, s| p * s);
                    touched.push(t);
                }
                *p += f64::from(c) / denom;
            }
        }
        if touched.is_empty() {
            return Some(self.base_order[rank]);
        }
        let is_seen = |t: &TokenId| !seen[*t as usize].is_nan();
        let mut seen_groups: Vec<usize> = touched.iter().map(|&t| self.group_of[t as usize] as usize).collect();
        seen_groups.sort_unstable();
        let mut seen_groups = seen_groups.into_iter().peekable();
        let scaled = |p: f64| scales.iter().fold(p, |p, s| p * s);
        let mut seen_sorted: Vec<(f64, TokenId)> = touched.iter().map(|&t| (seen[t as usize], t)).collect();
        seen_sorted.sort_unstable_by_key(|&(p, t)| rank_key(p, t));
        let mut seen_iter = seen_sorted.into_iter().peekable();
        let mut remaining = rank;

        // Unseen tokens keep their base order under the common scaling.
        // Rounding can map distinct base values to one scaled value, so
        // adjacent groups with equal scaled probability form one block.
        let mut g = 0;
        while g < self.base_groups.len() {
            let p = scaled(self.base_groups[g].0);
            let mut end = g + 1;
            while end < self.base_groups.len() && scaled(self.base_groups[end].0) == p {
                end += 1;
            }
            while let Some(&(q, t)) = seen_iter.peek() {
                if q <= p {
                    break;
                }
                if remaining == 0 {
                    return Some(t);
                }
                remaining -= 1;
                seen_iter.next();
            }
            let block = &self.base_groups[g..end];
            let mut unseen_len: usize = self.base_groups[g..end].iter().map(|(_, ids)| ids.len()).sum();
            while seen_groups.next_if(|&i| i < end).is_some() {
                unseen_len -= 1;
            }
            let mut ties: Vec<TokenId> = Vec::new();
            while let Some(&(q, t)) = seen_iter.peek() {
                if q != p {
                    break;
                }
                ties.push(t);
                seen_iter.next();
            }
            if remaining < unseen_len + ties.len() {
                let mut ids: Vec<TokenId> =
                    block.iter().flat_map(|(_, ids)| ids.iter().copied()).filter(|t| !is_seen(t)).collect();
                ids.extend(ties);
                ids.sort_unstable();
                return Some(ids[remaining]);
            }
            remaining -= unseen_len + ties.len();
            g = end;
        }
        seen_iter.nth(remaining).map(|(_, t)| t)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProviderError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ProviderError::InvalidModel("truncated model file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ProviderError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProviderError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ProviderError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
