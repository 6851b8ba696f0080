//! Lossless source coding with a next-token predictor.
//!
//! Each token is replaced by its rank in the predictor's probability-ordered
//! vocabulary for the preceding `K` tokens (rank 0 = most probable). A good
//! predictor makes the rank stream heavily skewed towards 0, which a static
//! canonical prefix code then packs into few bits. Decoding replays the
//! predictor left to right and picks the token at each transmitted rank.

pub mod container;
pub mod corpus;
pub mod entropy;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

pub use container::{CodecHeader, CompressedBlob};
pub use corpus::{sentence_blocks, split_at_line, split_sentences, train_text_predictor, PredictorRecipe};
pub use entropy::huffman_baseline_size;

use crate::provider::{PredictorRegistry, TokenId, TokenPredictor, Vocabulary, BOS};
use entropy::{
    code_lengths, rank_to_symbol, symbol_base, BitReader, BitWriter, CanonicalCode, MAX_CODE_LEN,
};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("context length must be between 1 and 65535, got {0}")]
    InvalidContextLength(usize),
    #[error("no predictor with model id {0} is available")]
    PredictorMissing(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("compressed size must be positive")]
    EmptyCompressed,
}

impl CodecError {
    /// True for errors caused by damaged or mismatched input data.
    pub fn is_integrity(&self) -> bool {
        matches!(self, Self::CorruptHeader(_) | Self::CorruptPayload(_) | Self::PredictorMissing(_))
    }
}

/// Greedy longest-match tokenization. Single bytes are always in the
/// vocabulary, so this never fails and the token bytes concatenate back to
/// `text`.
pub fn tokenize(text: &[u8], vocab: &Vocabulary) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(text.len());
    let max = vocab.max_token_len();
    let mut i = 0;
    while i < text.len() {
        let longest = (1..=max.min(text.len() - i)).rev();
        for len in longest {
            if let Some(id) = vocab.id_of(&text[i..i + len]) {
                out.push(id);
                i += len;
                break;
            }
        }
    }
    out
}

pub fn detokenize(tokens: &[TokenId], vocab: &Vocabulary) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    for &t in tokens {
        out.extend_from_slice(vocab.token(t)?);
    }
    Some(out)
}

/// The `k` tokens preceding position `i`, left-padded with [`BOS`].
pub fn context_at(tokens: &[TokenId], i: usize, k: usize) -> Vec<TokenId> {
    let start = i.saturating_sub(k);
    let mut ctx = vec![BOS; k - (i - start)];
    ctx.extend_from_slice(&tokens[start..i]);
    ctx
}

/// Rank of every token under `predictor` with a `k`-token context.
pub fn rank_stream(tokens: &[TokenId], k: usize, predictor: &dyn TokenPredictor) -> Vec<u32> {
    (0..tokens.len())
        .into_par_iter()
        .map(|i| predictor.rank_of(&context_at(tokens, i, k), tokens[i]) as u32)
        .collect()
}

fn check_k(k: usize) -> Result<u16, CodecError> {
    u16::try_from(k).ok().filter(|&k| k >= 1).ok_or(CodecError::InvalidContextLength(k))
}

fn model_id_bytes(predictor: &dyn TokenPredictor) -> [u8; 32] {
    let mut id = [0u8; 32];
    if let Ok(bytes) = hex::decode(predictor.model_id()) {
        let n = bytes.len().min(32);
        id[..n].copy_from_slice(&bytes[..n]);
    }
    id
}

pub fn encode(text: &[u8], k: usize, predictor: &dyn TokenPredictor) -> Result<CompressedBlob, CodecError> {
    let context_len = check_k(k)?;
    let tokens = tokenize(text, predictor.vocabulary());
    let ranks = rank_stream(&tokens, k, predictor);
    Ok(pack(&ranks, context_len, model_id_bytes(predictor), text))
}

/// Entropy-codes a rank stream into a container; `text` is the original,
/// needed for the checksum.
pub fn pack(ranks: &[u32], context_len: u16, model_id: [u8; 32], text: &[u8]) -> CompressedBlob {
    let mut freqs: BTreeMap<u32, u64> = BTreeMap::new();
    for &r in ranks {
        *freqs.entry(rank_to_symbol(r).0).or_default() += 1;
    }
    let lengths = code_lengths(&freqs, MAX_CODE_LEN);
    let code = CanonicalCode::from_lengths(&lengths).expect("huffman lengths form a prefix code");
    let mut w = BitWriter::new();
    for &r in ranks {
        let (sym, nbits, extra) = rank_to_symbol(r);
        code.write(sym, &mut w);
        w.write(extra, nbits);
    }
    let mut header = container::CodecHeader {
        version: container::FORMAT_VERSION,
        model_id,
        context_len,
        token_count: ranks.len() as u64,
        code_lengths: lengths,
        payload_bits: w.bit_len(),
        checksum: 0,
    };
    header.checksum = header.compute_checksum(text);
    CompressedBlob { header, payload: w.finish() }
}

/// Recovers the rank stream from a container.
pub fn unpack(blob: &CompressedBlob) -> Result<Vec<u32>, CodecError> {
    let h = &blob.header;
    if (blob.payload.len() as u64) < h.payload_bits.div_ceil(8) {
        return Err(CodecError::CorruptPayload("payload shorter than declared".into()));
    }
    if h.token_count > h.payload_bits {
        // every symbol costs at least one bit
        return Err(CodecError::CorruptPayload("token count exceeds payload bits".into()));
    }
    if h.token_count == 0 {
        return if h.payload_bits == 0 {
            Ok(Vec::new())
        } else {
            Err(CodecError::CorruptPayload("payload present for zero tokens".into()))
        };
    }
    let code = CanonicalCode::from_lengths(&h.code_lengths)
        .ok_or_else(|| CodecError::CorruptPayload("invalid code-length table".into()))?;
    let mut r = BitReader::new(&blob.payload, h.payload_bits);
    let mut ranks = Vec::with_capacity(h.token_count as usize);
    for _ in 0..h.token_count {
        let sym = code
            .read(&mut r)
            .ok_or_else(|| CodecError::CorruptPayload("undecodable symbol".into()))?;
        let (base, nbits) =
            symbol_base(sym).ok_or_else(|| CodecError::CorruptPayload("unknown rank symbol".into()))?;
        let extra = r
            .read(nbits)
            .ok_or_else(|| CodecError::CorruptPayload("payload ended inside a symbol".into()))?;
        let rank = base
            .checked_add(extra)
            .ok_or_else(|| CodecError::CorruptPayload("rank overflow".into()))?;
        ranks.push(rank);
    }
    if r.position() != h.payload_bits {
        return Err(CodecError::CorruptPayload(format!(
            "decoded {} symbols in {} bits, header declares {}",
            h.token_count,
            r.position(),
            h.payload_bits
        )));
    }
    let tail_bits = blob.payload.len() as u64 * 8 - h.payload_bits;
    if let Some(&last) = blob.payload.last() {
        if tail_bits > 0 && last & ((1u8 << tail_bits) - 1) != 0 {
            return Err(CodecError::CorruptPayload("nonzero padding bits".into()));
        }
    }
    Ok(ranks)
}

/// Sequential reconstruction: every token depends on all earlier ones.
pub fn decode_with(blob: &CompressedBlob, predictor: &dyn TokenPredictor) -> Result<Vec<u8>, CodecError> {
    if blob.header.model_id != model_id_bytes(predictor) {
        return Err(CodecError::PredictorMissing(blob.header.model_id_hex()));
    }
    let ranks = unpack(blob)?;
    let k = usize::from(blob.header.context_len);
    let vocab = predictor.vocabulary();
    let mut tokens: Vec<TokenId> = Vec::with_capacity(ranks.len());
    for (i, &rank) in ranks.iter().enumerate() {
        if rank as usize >= vocab.len() {
            return Err(CodecError::CorruptPayload(format!("rank {rank} outside vocabulary")));
        }
        let ctx = context_at(&tokens, i, k);
        let tok = predictor
            .token_at_rank(&ctx, rank as usize)
            .ok_or_else(|| CodecError::CorruptPayload(format!("rank {rank} outside vocabulary")))?;
        tokens.push(tok);
    }
    let text = detokenize(&tokens, vocab).expect("decoded ids come from the vocabulary");
    if blob.header.compute_checksum(&text) != blob.header.checksum {
        return Err(CodecError::CorruptPayload("checksum mismatch".into()));
    }
    Ok(text)
}

pub fn decode(blob: &CompressedBlob, registry: &PredictorRegistry) -> Result<Vec<u8>, CodecError> {
    let id = blob.header.model_id_hex();
    let predictor = registry.get(&id).ok_or(CodecError::PredictorMissing(id))?;
    decode_with(blob, predictor.as_ref())
}

/// Original size over compressed size.
pub fn compression_efficiency(original_len: usize, compressed_len: usize) -> Result<f64, CodecError> {
    if compressed_len == 0 {
        return Err(CodecError::EmptyCompressed);
    }
    Ok(original_len as f64 / compressed_len as f64)
}
