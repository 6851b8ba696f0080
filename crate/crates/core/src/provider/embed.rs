use serde::{Deserialize, Serialize};

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Unit-norm embedding of `text`.
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Signed feature hashing of lowercase word tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashingEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dimension: 512, seed: 0x5eed }
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, seed }
    }

    /// Bucket index and sign a single feature hashes to.
    pub fn bucket(&self, feature: &str) -> (usize, f64) {
        let h = fnv1a(self.seed, feature.as_bytes());
        let idx = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (idx, sign)
    }
}

/// Lowercased alphanumeric runs; the features the hashing embedder sees.
pub fn word_features(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // final avalanche so the sign bit depends on every input byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        let mut features = word_features(text);
        if features.is_empty() {
            features.push(text.trim().to_owned());
        }
        for f in &features {
            let (idx, sign) = self.bucket(f);
            v[idx] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // every feature cancelled out; fall back to the unsigned first bucket
            let (idx, _) = self.bucket(&features[0]);
            v[idx] = 1.0;
            return v;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashingEmbedder::default();
        let a = e.embed("radar clutter");
        assert_eq!(a, e.embed("radar clutter"));
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_is_bounded() {
        let e = HashingEmbedder::default();
        let texts = ["sea clutter", "doppler entropy of targets", "!!!", "a a a b", "x"];
        for s in texts {
            for t in texts {
                let c = cosine(&e.embed(s), &e.embed(t));
                assert!((-1.0..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn punctuation_only_text_still_embeds() {
        let e = HashingEmbedder::new(16, 1);
        let v = e.embed("?!");
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn case_and_punctuation_do_not_matter() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed("Radar, Clutter!"), e.embed("radar clutter"));
    }
}
