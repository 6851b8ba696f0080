//! Few-shot labeling by a multimodal chat model: one rendered exemplar per
//! class plus the frame in question.

use serde::{Deserialize, Serialize};

use super::plot::{encode_png, feature_chart};
use super::{Confusion, DetectorError, Label, LabeledFrame, Metrics};
use crate::dsp::{angle_stat, doppler_spectral_entropy, stft, stft_marginal_spectrum, SignalFrame};
use crate::prompt::{task_line, SYSTEM_PREAMBLE};
use crate::provider::{Attachment, ChatMessage, ChatProvider, ChatRequest};

pub const FEWSHOT_TASK: &str = "fewshot-label";

/// Features shown to the model for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotFeatures {
    pub angle: f64,
    pub doppler_entropy: f64,
    pub marginal: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FewShotConfig {
    pub fft_len: usize,
    pub stft_window: usize,
    pub stft_hop: usize,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self { fft_len: 256, stft_window: 128, stft_hop: 64 }
    }
}

impl FewShotFeatures {
    pub fn of(frame: &SignalFrame, cfg: &FewShotConfig) -> Result<Self, DetectorError> {
        Ok(Self {
            angle: angle_stat(frame),
            doppler_entropy: doppler_spectral_entropy(frame, cfg.fft_len.min(frame.len()))?,
            marginal: stft_marginal_spectrum(&stft(frame, cfg.stft_window.min(frame.len()), cfg.stft_hop)?),
        })
    }

    fn chart(&self, cfg: &FewShotConfig) -> Vec<u8> {
        let max_angle = (2.0 * (self.marginal.len().max(2) as f64).ln()).sqrt().max(1.0);
        let max_entropy = (cfg.fft_len as f64).ln();
        encode_png(&feature_chart(&self.marginal, &[(self.angle, max_angle), (self.doppler_entropy, max_entropy)]))
    }

    fn table_row(&self, name: &str) -> String {
        let peak = self.marginal.iter().cloned().fold(0.0, f64::max);
        let mean = self.marginal.iter().sum::<f64>() / self.marginal.len().max(1) as f64;
        let ratio = if mean > 0.0 { peak / mean } else { 0.0 };
        format!("| {name} | {:.4} | {:.4} | {:.2} |", self.angle, self.doppler_entropy, ratio)
    }
}

pub struct FewShotExemplars {
    pub target: SignalFrame,
    pub clutter: SignalFrame,
}

/// Four sections: visualization, instruction, question, response format.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalPrompt {
    pub visualization: Vec<Attachment>,
    pub visualization_text: String,
    pub instruction: String,
    pub question: String,
    pub response_format: String,
}

impl MultimodalPrompt {
    pub fn sections(&self) -> [(&'static str, &str); 4] {
        [
            ("Visualization of Features", self.visualization_text.as_str()),
            ("Instruction", self.instruction.as_str()),
            ("Question", self.question.as_str()),
            ("Response Format", self.response_format.as_str()),
        ]
    }

    pub fn render(&self) -> String {
        let mut out = task_line(FEWSHOT_TASK);
        for (heading, body) in self.sections() {
            out.push_str(&format!("\n\n### {heading}\n{body}"));
        }
        out
    }

    pub fn to_request(&self) -> ChatRequest {
        ChatRequest::new(vec![
            ChatMessage::system(SYSTEM_PREAMBLE),
            ChatMessage::user(self.render()).with_attachments(self.visualization.clone()),
        ])
    }
}

pub fn build_fewshot_prompt(
    exemplars: &FewShotExemplars,
    question: &SignalFrame,
    knowledge: &[String],
    cfg: &FewShotConfig,
) -> Result<MultimodalPrompt, DetectorError> {
    let frames = [("Figure 1 (target exemplar)", &exemplars.target), ("Figure 2 (clutter exemplar)", &exemplars.clutter), ("Figure 3 (question)", question)];
    let mut rows = vec!["| frame | angle | doppler entropy | marginal peak/mean |".to_owned(), "|---|---|---|---|".to_owned()];
    let mut visualization = Vec::new();
    for (name, frame) in frames {
        let f = FewShotFeatures::of(frame, cfg)?;
        rows.push(f.table_row(name));
        visualization.push(Attachment { media_type: "image/png".into(), bytes: f.chart(cfg) });
    }
    let visualization_text = format!(
        "Each figure shows the STFT marginal spectrum in dB with 0 Hz centered (top) and bars for the angle \
         statistic and the Doppler spectral entropy (bottom).\n{}",
        rows.join("\n")
    );
    let mut instruction = String::from(
        "You are given radar returns from a single range cell. Decide whether the question frame contains a \
         target or only sea clutter by comparing its features with the two labeled exemplars.",
    );
    if !knowledge.is_empty() {
        instruction.push_str("\nExpert knowledge:");
        for k in knowledge {
            instruction.push_str(&format!("\n- {k}"));
        }
    }
    Ok(MultimodalPrompt {
        visualization,
        visualization_text,
        instruction,
        question: "Is the frame in Figure 3 a target or clutter?".into(),
        response_format: "Exactly one word: target or clutter.".into(),
    })
}

/// First word of the reply that names a label.
pub fn parse_label(reply: &str) -> Option<Label> {
    reply
        .split(|c: char| !c.is_ascii_alphabetic())
        .find_map(|w| match w.to_ascii_lowercase().as_str() {
            "target" => Some(Label::Target),
            "clutter" => Some(Label::Clutter),
            _ => None,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotOutcome {
    pub metrics: Metrics,
    pub predictions: Vec<Option<Label>>,
    /// Replies naming neither label; scored as clutter.
    pub unparsed: usize,
}

pub fn run_fewshot(
    provider: &dyn ChatProvider,
    exemplars: &FewShotExemplars,
    questions: &[LabeledFrame],
    knowledge: &[String],
    cfg: &FewShotConfig,
) -> Result<FewShotOutcome, DetectorError> {
    let mut predictions = Vec::with_capacity(questions.len());
    for q in questions {
        let prompt = build_fewshot_prompt(exemplars, &q.frame, knowledge, cfg)?;
        let reply = provider.chat(&prompt.to_request()).map_err(|e| DetectorError::Provider(e.to_string()))?;
        predictions.push(parse_label(&reply));
    }
    let unparsed = predictions.iter().filter(|p| p.is_none()).count();
    let metrics = Confusion::from_pairs(
        questions.iter().zip(&predictions).map(|(q, p)| (q.label, p.unwrap_or(Label::Clutter))),
    )
    .metrics();
    Ok(FewShotOutcome { metrics, predictions, unparsed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{synth_scene, SceneConfig};
    use crate::provider::{ExhaustionPolicy, ScriptedProvider};

    fn scene() -> Vec<LabeledFrame> {
        synth_scene(&SceneConfig { n_frames: 6, frame_len: 512, ..Default::default() }).unwrap()
    }

    #[test]
    fn prompt_structure_and_determinism() {
        let s = scene();
        let ex = FewShotExemplars { target: s[0].frame.clone(), clutter: s[1].frame.clone() };
        let a = build_fewshot_prompt(&ex, &s[2].frame, &["targets are coherent".into()], &FewShotConfig::default()).unwrap();
        assert_eq!(a.sections().len(), 4);
        assert!(a.sections().iter().all(|(_, b)| !b.is_empty()));
        assert!(a.visualization.len() >= 3);
        let b = build_fewshot_prompt(&ex, &s[2].frame, &["targets are coherent".into()], &FewShotConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.render().starts_with("Task: fewshot-label"));
    }

    #[test]
    fn labels_parse() {
        assert_eq!(parse_label("target"), Some(Label::Target));
        assert_eq!(parse_label("Answer: Clutter."), Some(Label::Clutter));
        assert_eq!(parse_label("targets"), None);
        assert_eq!(parse_label("unsure"), None);
    }

    #[test]
    fn always_target_gives_full_detection_and_false_alarms() {
        let s = scene();
        let ex = FewShotExemplars { target: s[0].frame.clone(), clutter: s[1].frame.clone() };
        let p = ScriptedProvider::sequence(["target"], ExhaustionPolicy::RepeatLast);
        let out = run_fewshot(&p, &ex, &s[2..], &[], &FewShotConfig::default()).unwrap();
        assert_eq!((out.metrics.pd, out.metrics.pfa), (1.0, 1.0));
        assert!((out.metrics.f1 - 2.0 / 3.0).abs() < 1e-12);
    }
}
