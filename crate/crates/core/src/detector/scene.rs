//! Synthetic sea-clutter scenes: compound-Gaussian clutter with a gamma
//! texture (K-distributed envelope) and correlated speckle, with a Doppler
//! tone added to target frames.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DetectorError, Label, LabeledFrame};
use crate::dsp::SignalFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_frames: usize,
    pub frame_len: usize,
    pub sample_rate: f64,
    /// Target power over mean clutter power, in dB.
    pub scr_db: f64,
    /// Gamma shape of the texture; rounded to a multiple of 0.5.
    pub shape: f64,
    /// Sample-to-sample correlation of the texture process.
    pub texture_corr: f64,
    /// Sample-to-sample correlation of the speckle.
    pub speckle_corr: f64,
    /// Receiver noise power relative to clutter, in dB.
    pub thermal_db: f64,
    /// Target Doppler range as fractions of the sample rate.
    pub doppler_range: (f64, f64),
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 200,
            frame_len: 1024,
            sample_rate: 1000.0,
            scr_db: 10.0,
            shape: 1.5,
            texture_corr: 0.995,
            speckle_corr: 0.3,
            thermal_db: -20.0,
            doppler_range: (0.15, 0.35),
        }
    }
}

fn complex_normal(rng: &mut impl Rng, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Frame `index` of the scene; even indices carry the target.
pub fn synth_frame(cfg: &SceneConfig, index: usize) -> Result<LabeledFrame, DetectorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let label = if index % 2 == 0 { Label::Target } else { Label::Clutter };
    let n = cfg.frame_len;
    // Gamma(k/2) texture with unit mean: average of k squared unit Gaussians,
    // each an AR(1) process so the texture varies slowly.
    let k = ((2.0 * cfg.shape).round() as usize).max(1);
    let rho_t = cfg.texture_corr;
    let innov_t = (1.0 - rho_t * rho_t).sqrt();
    let mut g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let rho_s = cfg.speckle_corr;
    let innov_s = (1.0 - rho_s * rho_s).sqrt();
    let mut speckle = complex_normal(&mut rng, 1.0);
    let thermal = 10f64.powf(cfg.thermal_db / 10.0);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            for gi in &mut g {
                let e: f64 = StandardNormal.sample(&mut rng);
                *gi = rho_t * *gi + innov_t * e;
            }
            speckle = speckle * rho_s + complex_normal(&mut rng, 1.0) * innov_s;
        }
        let texture = g.iter().map(|x| x * x).sum::<f64>() / k as f64;
        samples.push(speckle * texture.sqrt() + complex_normal(&mut rng, thermal));
    }
    // Drawn for every frame so clutter is identical in structure across labels.
    let doppler = rng.gen_range(cfg.doppler_range.0..=cfg.doppler_range.1);
    let phase = rng.gen_range(0.0..2.0 * PI);
    if label == Label::Target {
        let amp = 10f64.powf(cfg.scr_db / 20.0);
        for (i, s) in samples.iter_mut().enumerate() {
            *s += Complex64::from_polar(amp, 2.0 * PI * doppler * i as f64 + phase);
        }
    }
    Ok(LabeledFrame { frame: SignalFrame::new(samples, cfg.sample_rate)?, label })
}

/// Balanced scene of `n_frames` frames, alternating target and clutter.
pub fn synth_scene(cfg: &SceneConfig) -> Result<Vec<LabeledFrame>, DetectorError> {
    if cfg.n_frames == 0 || cfg.n_frames % 2 != 0 {
        return Err(DetectorError::InvalidArgument(format!("n_frames must be even and positive, got {}", cfg.n_frames)));
    }
    if cfg.frame_len < 2 || cfg.sample_rate <= 0.0 || !(0.0..1.0).contains(&cfg.texture_corr) || !(0.0..1.0).contains(&cfg.speckle_corr) {
        return Err(DetectorError::InvalidArgument("invalid scene parameters".into()));
    }
    if cfg.shape <= 0.0 || !(cfg.doppler_range.0 < cfg.doppler_range.1) || cfg.doppler_range.1.abs() > 0.5 {
        return Err(DetectorError::InvalidArgument("invalid shape or Doppler range".into()));
    }
    (0..cfg.n_frames).into_par_iter().map(|i| synth_frame(cfg, i)).collect()
}

/// Per-class shuffled split; `train_frac` of each class goes to training.
pub fn stratified_split<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> Label,
    train_frac: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [Label::Target, Label::Clutter] {
        let mut idx: Vec<usize> = (0..items.len()).filter(|&i| label(&items[i]) == class).collect();
        idx.shuffle(&mut rng);
        let cut = (idx.len() as f64 * train_frac).round() as usize;
        train.extend(idx[..cut].iter().map(|&i| items[i].clone()));
        test.extend(idx[cut..].iter().map(|&i| items[i].clone()));
    }
    (train, test)
}
