//! Deterministic stand-in for a chat model answering parameter-proposal
//! prompts. It reads the evaluated pool and bounds back out of the prompt,
//! fits a separable quadratic `c + sum a_j u_j + b_j u_j^2` to the listed
//! entries in unit coordinates, and replies with the fitted maximizer plus a
//! small seeded Gaussian perturbation.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;

use super::{Dimension, ParamKind, ParamSpace, Scale, POOL_HEADING, PROPOSAL_TASK};
use crate::prompt::{section, task_line};
use crate::provider::{ChatProvider, ChatRequest, ProviderError};

#[derive(Debug)]
pub struct SurrogateProposer {
    seed: u64,
    /// Perturbation standard deviation in unit coordinates.
    pub jitter: f64,
    calls: AtomicU64,
}

impl SurrogateProposer {
    pub fn new(seed: u64) -> Self {
        Self { seed, jitter: 0.01, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

fn entry_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^- \[([^\]]*)\] -> (\S+)$").unwrap())
}

fn bound_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\S+) in \[(\S+), (\S+)\] \((linear|log), (continuous|integer)\)$").unwrap())
}

/// Pool entries and search space recovered from a rendered proposal prompt.
pub fn parse_proposal_prompt(text: &str) -> Option<(Vec<(Vec<f64>, f64)>, ParamSpace)> {
    let mut dims = Vec::new();
    for line in section(text, "Question")?.lines() {
        if let Some(c) = bound_re().captures(line.trim()) {
            dims.push(Dimension {
                name: c[1].to_owned(),
                lower: c[2].parse().ok()?,
                upper: c[3].parse().ok()?,
                scale: if &c[4] == "log" { Scale::Log } else { Scale::Linear },
                kind: if &c[5] == "integer" { ParamKind::Integer } else { ParamKind::Continuous },
            });
        }
    }
    let space = ParamSpace::new(dims).ok()?;
    let mut entries = Vec::new();
    for line in section(text, POOL_HEADING)?.lines() {
        let c = entry_re().captures(line.trim())?;
        let theta: Vec<f64> = c[1].split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().ok()?;
        let score: f64 = c[2].parse().ok()?;
        if theta.len() != space.len() {
            return None;
        }
        entries.push((theta, score));
    }
    (!entries.is_empty()).then_some((entries, space))
}

/// Per-dimension maximizer of a separable quadratic least-squares fit.
/// Dimensions with a non-concave fit keep the best listed point's value.
pub fn quadratic_argmax(points: &[Vec<f64>], scores: &[f64]) -> Vec<f64> {
    let d = points[0].len();
    let best = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite() && **s > f64::MIN)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let usable: Vec<usize> = (0..points.len()).filter(|&i| scores[i].is_finite() && scores[i] > f64::MIN).collect();
    if usable.len() < 2 * d + 1 {
        return points[best].clone();
    }
    let x = DMatrix::from_fn(usable.len(), 2 * d + 1, |r, c| {
        let p = &points[usable[r]];
        match c {
            0 => 1.0,
            c if c <= d => p[c - 1],
            c => p[c - 1 - d].powi(2),
        }
    });
    let y = DVector::from_iterator(usable.len(), usable.iter().map(|&i| scores[i]));
    let Ok(beta) = x.svd(true, true).solve(&y, 1e-12) else {
        return points[best].clone();
    };
    (0..d)
        .map(|j| {
            let (a, b) = (beta[1 + j], beta[1 + d + j]);
            if b < -1e-12 {
                (-a / (2.0 * b)).clamp(0.0, 1.0)
            } else {
                points[best][j]
            }
        })
        .collect()
}

impl ChatProvider for SurrogateProposer {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let text = request.full_text();
        if !text.contains(&task_line(PROPOSAL_TASK)) {
            return Err(ProviderError::InvalidRequest("surrogate only answers parameter proposals".into()));
        }
        let (entries, space) = parse_proposal_prompt(&text)
            .ok_or_else(|| ProviderError::InvalidRequest("could not read pool or bounds from prompt".into()))?;
        let units: Vec<Vec<f64>> = entries.iter().map(|(t, _)| space.to_unit(t)).collect();
        let scores: Vec<f64> = entries.iter().map(|(_, s)| *s).collect();
        let mut u = quadratic_argmax(&units, &scores);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ call.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let normal = Normal::new(0.0, self.jitter).expect("jitter must be positive");
        for v in &mut u {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
        let theta = space.from_unit(&u);
        Ok(theta.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{init_pool, propose_llm, ProposalPrompt, Sphere};

    #[test]
    fn fit_recovers_separable_optimum() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0, ((i * 7) % 10) as f64 / 9.0]).collect();
        let scores: Vec<f64> = pts.iter().map(|p| -(p[0] - 0.3).powi(2) - 2.0 * (p[1] - 0.6).powi(2)).collect();
        let u = quadratic_argmax(&pts, &scores);
        assert!((u[0] - 0.3).abs() < 1e-9 && (u[1] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn proposes_near_sphere_optimum() {
        let space = ParamSpace::cube(3, -5.12, 5.12).unwrap();
        let pool = init_pool(&Sphere, &space, 10, 3).unwrap();
        let s = SurrogateProposer::new(1);
        let v = propose_llm(&pool, &space, &s, &ProposalPrompt::default()).unwrap();
        assert!(v.iter().all(|x| x.abs() < 0.5), "{v:?}");
        let again = propose_llm(&pool, &space, &SurrogateProposer::new(1), &ProposalPrompt::default()).unwrap();
        assert_eq!(v, again);
    }
}
