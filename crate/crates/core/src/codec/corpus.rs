//! Sentence splitting and fixed-size sentence blocks for corpus experiments.

use crate::provider::{train_ngram, NgramModel, ProviderError, Vocabulary};

/// Sentences per independently coded block.
pub const SENTENCES_PER_BLOCK: usize = 15;

/// Splits `text` after sentence-final punctuation (`.`, `?`, `!`) followed by
/// whitespace, and at line breaks. Each sentence keeps its trailing
/// whitespace so the pieces concatenate back to `text`.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let boundary = b == b'\n'
            || (matches!(b, b'.' | b'?' | b'!') && bytes.get(i + 1).is_some_and(u8::is_ascii_whitespace));
        if boundary {
            let mut end = i + 1;
            while end < bytes.len() && bytes[end].is_ascii_whitespace() {
                end += 1;
            }
            out.push(&text[start..end]);
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    if start < bytes.len() {
        out.push(&text[start..]);
    }
    out
}

/// Contiguous slices of `text` holding `per_block` sentences each (the last
/// block may hold fewer).
pub fn sentence_blocks(text: &str, per_block: usize) -> Vec<&str> {
    assert!(per_block > 0, "blocks need at least one sentence");
    let sentences = split_sentences(text);
    let mut out = Vec::new();
    let mut offset = 0;
    for chunk in sentences.chunks(per_block) {
        let len: usize = chunk.iter().map(|s| s.len()).sum();
        out.push(&text[offset..offset + len]);
        offset += len;
    }
    out
}

/// Splits `text` into a prefix of roughly `frac` of its bytes and the rest,
/// cutting after the next line break.
pub fn split_at_line(text: &str, frac: f64) -> (&str, &str) {
    let mut target = (text.len() as f64 * frac.clamp(0.0, 1.0)) as usize;
    while !text.is_char_boundary(target) {
        target += 1;
    }
    let cut = text[target..].find('\n').map_or(text.len(), |i| target + i + 1);
    text.split_at(cut)
}

/// Settings for training a text predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorRecipe {
    pub merges: usize,
    /// Leading bytes of the training text used to learn the vocabulary.
    pub vocab_sample_bytes: usize,
    pub order: usize,
    pub smoothing: f64,
}

impl Default for PredictorRecipe {
    fn default() -> Self {
        Self { merges: 256, vocab_sample_bytes: 100_000, order: 2, smoothing: 0.01 }
    }
}

/// Learns a vocabulary on a prefix of `train` and fits an n-gram model on all of it.
pub fn train_text_predictor(train: &str, recipe: &PredictorRecipe) -> Result<NgramModel, ProviderError> {
    let sample = &train.as_bytes()[..recipe.vocab_sample_bytes.min(train.len())];
    let vocab = Vocabulary::learn(sample, recipe.merges);
    let tokens = super::tokenize(train.as_bytes(), &vocab);
    train_ngram(&tokens, recipe.order, recipe.smoothing, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_reassembles() {
        let text = "One. Two? Three!\nFour e.g.x five. ";
        let s = split_sentences(text);
        assert_eq!(s, vec!["One. ", "Two? ", "Three!\n", "Four e.g.x five. "]);
        assert_eq!(s.concat(), text);
    }

    #[test]
    fn blocks_cover_text() {
        let text: String = (0..40).map(|i| format!("Sentence {i}. ")).collect();
        let blocks = sentence_blocks(&text, 15);
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks.concat(), text);
        assert_eq!(split_sentences(blocks[0]).len(), 15);
        assert_eq!(split_sentences(blocks[2]).len(), 10);
    }

    #[test]
    fn empty_text_has_no_blocks() {
        assert!(sentence_blocks("", 15).is_empty());
    }
}
