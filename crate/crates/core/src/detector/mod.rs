//! Target-vs-clutter detection from handcrafted features.
//!
//! The tunable features are FPAR over the band `[theta1 * fs/2, fs/2]`, the
//! STFT peak-neighborhood mean with ratio `theta2`, and the envelope
//! histogram entropy with `theta3` intervals. A least-squares fit on 0/1
//! labels over standardized features, thresholded at 0.5, is the classifier.

pub mod dataset;
pub mod fewshot;
pub mod plot;
pub mod scene;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_manifest, write_scene, DatasetManifest, ManifestEntry};
pub use fewshot::{build_fewshot_prompt, parse_label, run_fewshot, FewShotExemplars, MultimodalPrompt};
pub use scene::{stratified_split, synth_scene, SceneConfig};

use crate::dsp::{DspError, FeatureVector, PowerSpectrum, SignalFrame, Spectrogram};
use crate::optimizer::{score_detection, Dimension, Objective, ObjectiveError, ParamSpace};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("training data holds a single class")]
    SingleClass,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature vectors disagree in length")]
    FeatureMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("provider: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Target,
    Clutter,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Target => "target",
            Label::Clutter => "clutter",
        }
    }

    fn value(self) -> f64 {
        match self {
            Label::Target => 1.0,
            Label::Clutter => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: SignalFrame,
    pub label: Label,
}

/// STFT geometry shared by feature extraction.
pub const STFT_WINDOW: usize = 128;
pub const STFT_HOP: usize = 64;

/// `(theta1, theta2, theta3)`: band start as a fraction of Nyquist,
/// neighborhood ratio, histogram interval count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub band_start: f64,
    pub neighborhood: f64,
    pub intervals: usize,
}

impl Theta {
    pub fn from_slice(theta: &[f64]) -> Result<Self, DetectorError> {
        let [band_start, neighborhood, intervals] = theta else {
            return Err(DetectorError::InvalidArgument(format!("expected 3 parameters, got {}", theta.len())));
        };
        let t = Self { band_start: *band_start, neighborhood: *neighborhood, intervals: intervals.round() as usize };
        if !(0.0..=0.9).contains(&t.band_start) || !(t.neighborhood > 0.0 && t.neighborhood <= 1.0) || t.intervals < 2 {
            return Err(DetectorError::InvalidArgument(format!("parameters {theta:?} out of range")));
        }
        Ok(t)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.band_start, self.neighborhood, self.intervals as f64]
    }
}

impl Default for Theta {
    fn default() -> Self {
        Self { band_start: 0.2, neighborhood: 0.1, intervals: 16 }
    }
}

/// Search space for `(theta1, theta2, theta3)`.
pub fn detection_space() -> ParamSpace {
    ParamSpace::new(vec![
        Dimension::linear("theta1_band_start", 0.0, 0.9),
        Dimension::linear("theta2_neighborhood", 0.01, 1.0),
        Dimension::integer("theta3_intervals", 2.0, 64.0),
    ])
    .expect("static space is valid")
}

pub const FEATURE_NAMES: [&str; 3] = ["fpar", "stftm", "tie"];

/// Parameter-independent spectra of one frame, so that re-extracting
/// features under a new `Theta` costs no FFTs.
#[derive(Debug, Clone)]
pub struct FramePrecompute {
    power: PowerSpectrum,
    spectrogram: Spectrogram,
    envelope: Vec<f64>,
}

impl FramePrecompute {
    pub fn new(frame: &SignalFrame) -> Result<Self, DetectorError> {
        Ok(Self {
            power: PowerSpectrum::of(frame),
            spectrogram: crate::dsp::stft(frame, STFT_WINDOW.min(frame.len()), STFT_HOP)?,
            envelope: frame.envelope(),
        })
    }

    pub fn features(&self, theta: &Theta) -> Result<FeatureVector, DetectorError> {
        let nyq = self.power.sample_rate / 2.0;
        let fpar = self.power.fpar(theta.band_start * nyq, nyq)?;
        let stftm = self.spectrogram.neighborhood_mean(theta.neighborhood)?;
        let tie = crate::dsp::tie_from_envelope(&self.envelope, theta.intervals)?;
        Ok(FeatureVector::new(FEATURE_NAMES.into_iter().zip([fpar, stftm, tie])))
    }
}

pub fn extract_features(frame: &SignalFrame, theta: &Theta) -> Result<FeatureVector, DetectorError> {
    FramePrecompute::new(frame)?.features(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

pub const RIDGE: f64 = 1e-6;

/// Least squares on 0/1 labels over standardized features, with a
/// `RIDGE * n` penalty on the weights only.
pub fn train_linear(samples: &[(FeatureVector, Label)]) -> Result<LinearModel, DetectorError> {
    if samples.len() < 2 {
        return Err(DetectorError::TooFewSamples(samples.len()));
    }
    if samples.iter().all(|s| s.1 == samples[0].1) {
        return Err(DetectorError::SingleClass);
    }
    let d = samples[0].0.len();
    if samples.iter().any(|s| s.0.len() != d) {
        return Err(DetectorError::FeatureMismatch);
    }
    let n = samples.len() as f64;
    let means: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s.0.values[j]).sum::<f64>() / n).collect();
    // Constant features get scale 1 and contribute a zero column.
    let sds: Vec<Option<f64>> = (0..d)
        .map(|j| {
            let var = samples.iter().map(|s| (s.0.values[j] - means[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            (sd > 1e-12 * (1.0 + means[j].abs())).then_some(sd)
        })
        .collect();
    let scales: Vec<f64> = sds.iter().map(|s| s.unwrap_or(1.0)).collect();
    let x = DMatrix::from_fn(samples.len(), d, |i, j| match sds[j] {
        Some(sd) => (samples[i].0.values[j] - means[j]) / sd,
        None => 0.0,
    });
    let y_mean = samples.iter().map(|s| s.1.value()).sum::<f64>() / n;
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1.value() - y_mean));
    let gram = x.transpose() * &x + DMatrix::identity(d, d) * (RIDGE * n);
    let rhs = x.transpose() * y;
    let w = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| DetectorError::InvalidArgument("normal equations not positive definite".into()))?;
    Ok(LinearModel {
        feature_names: samples[0].0.names.clone(),
        means,
        scales,
        weights: w.iter().copied().collect(),
        bias: y_mean,
        threshold: 0.5,
    })
}

impl LinearModel {
    pub fn output(&self, features: &FeatureVector) -> f64 {
        self.bias
            + features
                .values
                .iter()
                .zip(&self.means)
                .zip(&self.scales)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn classify(&self, features: &FeatureVector) -> Label {
        if self.output(features) >= self.threshold {
            Label::Target
        } else {
            Label::Clutter
        }
    }
}

/// Confusion counts with target as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Confusion::default();
        for (truth, predicted) in pairs {
            match (truth, predicted) {
                (Label::Target, Label::Target) => c.tp += 1,
                (Label::Clutter, Label::Target) => c.fp += 1,
                (Label::Clutter, Label::Clutter) => c.tn += 1,
                (Label::Target, Label::Clutter) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let pd = ratio(self.tp, self.tp + self.fn_);
        let f1 = if self.tp == 0 { 0.0 } else { 2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64 };
        Metrics {
            confusion: *self,
            acc: ratio(self.tp + self.tn, self.total()),
            f1,
            precision,
            pd,
            pfa: ratio(self.fp, self.fp + self.tn),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub acc: f64,
    pub f1: f64,
    pub precision: f64,
    pub pd: f64,
    pub pfa: f64,
}

pub fn evaluate(model: &LinearModel, test: &[(FeatureVector, Label)]) -> Metrics {
    Confusion::from_pairs(test.iter().map(|(f, l)| (*l, model.classify(f)))).metrics()
}

/// `theta -> Pd + alpha (1 - Pfa)` of a detector trained on `train` and
/// scored on `validation`.
pub struct DetectionObjective {
    train: Vec<(FramePrecompute, Label)>,
    validation: Vec<(FramePrecompute, Label)>,
    pub alpha: f64,
}

fn precompute(frames: &[LabeledFrame]) -> Result<Vec<(FramePrecompute, Label)>, DetectorError> {
    use rayon::prelude::*;
    frames.par_iter().map(|f| Ok((FramePrecompute::new(&f.frame)?, f.label))).collect()
}

fn has_both(frames: &[LabeledFrame]) -> bool {
    frames.iter().any(|f| f.label == Label::Target) && frames.iter().any(|f| f.label == Label::Clutter)
}

impl DetectionObjective {
    pub fn new(train: &[LabeledFrame], validation: &[LabeledFrame], alpha: f64) -> Result<Self, DetectorError> {
        if !has_both(train) || !has_both(validation) {
            return Err(DetectorError::SingleClass);
        }
        Ok(Self { train: precompute(train)?, validation: precompute(validation)?, alpha })
    }

    pub fn metrics(&self, theta: &Theta) -> Result<Metrics, DetectorError> {
        let feats = |set: &[(FramePrecompute, Label)]| -> Result<Vec<(FeatureVector, Label)>, DetectorError> {
            set.iter().map(|(p, l)| Ok((p.features(theta)?, *l))).collect()
        };
        let model = train_linear(&feats(&self.train)?)?;
        Ok(evaluate(&model, &feats(&self.validation)?))
    }
}

impl Objective for DetectionObjective {
    fn evaluate(&self, theta: &[f64]) -> Result<f64, ObjectiveError> {
        let theta = Theta::from_slice(theta).map_err(|e| ObjectiveError::Soft(e.to_string()))?;
        let m = self.metrics(&theta).map_err(|e| ObjectiveError::Soft(e.to_string()))?;
        score_detection(m.pd, m.pfa, self.alpha).map_err(|e| ObjectiveError::Hard(e.to_string()))
    }
}

/// Features of every frame under one `Theta`.
pub fn feature_set(frames: &[LabeledFrame], theta: &Theta) -> Result<Vec<(FeatureVector, Label)>, DetectorError> {
    use rayon::prelude::*;
    frames.par_iter().map(|f| Ok((extract_features(&f.frame, theta)?, f.label))).collect()
}
