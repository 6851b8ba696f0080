//! Rule-based chat responder for fully offline runs.
//!
//! Prompts built by this crate start with a `Task: <name>` line; the
//! responder dispatches on it and answers in the format each task asks for.
//! Replies depend only on the request text, so runs are reproducible.

use std::sync::OnceLock;

use regex::Regex;

use super::{ChatProvider, ChatRequest, ProviderError};
use crate::optimizer::{SurrogateProposer, PROPOSAL_TASK};
use crate::planner::{tasks, FINAL_MARKER};
use crate::prompt::section;

#[derive(Debug)]
pub struct OfflineResponder {
    proposer: SurrogateProposer,
}

impl OfflineResponder {
    pub fn new(seed: u64) -> Self {
        Self { proposer: SurrogateProposer::new(seed) }
    }
}

impl Default for OfflineResponder {
    fn default() -> Self {
        Self::new(0)
    }
}

fn task_of(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix("Task: ")).map(str::trim)
}

fn contains_any(text: &str, words: &[&str]) -> bool {
    let lower = text.to_lowercase();
    words.iter().any(|w| lower.contains(w))
}

fn first_sentence(text: &str) -> &str {
    let t = text.trim_start_matches("- ").trim();
    match t.find(". ") {
        Some(i) => &t[..=i],
        None => t,
    }
}

fn decompose(goal: &str) -> String {
    let steps: &[&str] = if contains_any(goal, &["detect", "radar", "clutter", "target"]) {
        &[
            "load the radar frames and their labels",
            "extract spectral and envelope features from each frame",
            "fit a detector on the training frames",
            "evaluate detection and false alarm rates on held-out frames",
        ]
    } else if contains_any(goal, &["compress", "coding", "encode"]) {
        &[
            "tokenize the input text",
            "rank each token under the next-token predictor",
            "entropy code the rank stream",
        ]
    } else if contains_any(goal, &["optimi", "tune", "hyperparameter"]) {
        &[
            "define the parameter search space",
            "evaluate an initial design",
            "iterate proposals against the objective within the budget",
        ]
    } else {
        &["clarify the signal model and inputs", "select a processing method", "apply the method and check the result"]
    };
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let deps = if i == 0 { "none".to_owned() } else { i.to_string() };
            format!("{}. {s} (depends: {deps})", i + 1)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn rate(question: &str) -> &'static str {
    if contains_any(question, &["fit", "train", "optimi", "tune", "detector"]) {
        "3"
    } else if question.split_whitespace().count() > 6 {
        "2"
    } else {
        "1"
    }
}

fn paradigm(question: &str) -> &'static str {
    if contains_any(question, &["compress", "rank", "entropy code"]) {
        "LlmModeling: the model's next-token distribution serves as the source model"
    } else if contains_any(question, &["optimi", "tune", "search space", "budget"]) {
        "LlmOptimizer: proposals from the evaluated pool suit a small evaluation budget"
    } else if contains_any(question, &["few-shot", "plot", "image", "visual"]) {
        "CrossModalReasoning: rendered features let exemplars be compared directly"
    } else {
        "PromptReasoning: the step is well served by structured reasoning"
    }
}

fn table_row_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\| Figure (\d)[^|]*\| ([-0-9.]+) \| ([-0-9.]+) \| ([-0-9.]+) \|$").unwrap())
}

/// Nearest exemplar in the feature table, with features scaled by the
/// exemplar spread.
fn fewshot_label(text: &str) -> Option<&'static str> {
    let mut rows = [None; 3];
    for line in text.lines() {
        if let Some(c) = table_row_re().captures(line.trim()) {
            let idx: usize = c[1].parse().ok()?;
            let v: [f64; 3] = [c[2].parse().ok()?, c[3].parse().ok()?, c[4].parse().ok()?];
            if (1..=3).contains(&idx) {
                rows[idx - 1] = Some(v);
            }
        }
    }
    let [Some(t), Some(c), Some(q)] = rows else { return None };
    let dist = |a: [f64; 3]| -> f64 {
        (0..3)
            .map(|j| {
                let scale = (t[j] - c[j]).abs().max(1e-9);
                ((a[j] - q[j]) / scale).powi(2)
            })
            .sum()
    };
    Some(if dist(t) <= dist(c) { "target" } else { "clutter" })
}

impl ChatProvider for OfflineResponder {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let text = request.full_text();
        let task = task_of(&text).ok_or_else(|| ProviderError::InvalidRequest("prompt has no Task line".into()))?;
        let question = section(&text, "Question").unwrap_or("");
        let reply = match task {
            tasks::DECOMPOSE => decompose(question),
            tasks::RATE => rate(question).to_owned(),
            tasks::PLAN => match section(&text, "Retrieved Context") {
                Some(ctx) => format!("{} Following that, {}.", first_sentence(ctx.lines().next().unwrap_or("")), question.trim_end_matches('.')),
                None => format!("Apply a standard procedure to {}.", question.trim_end_matches('.')),
            },
            tasks::HOP => {
                let has_context = section(&text, "Retrieved Context").is_some_and(|c| c.contains("Accumulated context:"));
                if has_context {
                    format!("{FINAL_MARKER} {} using the retrieved evidence.", question.trim_end_matches('.'))
                } else {
                    format!("Gather background on {}.", question.trim_end_matches('.'))
                }
            }
            tasks::REFINE => paradigm(question).to_owned(),
            t if t == PROPOSAL_TASK => return self.proposer.chat(request),
            crate::detector::fewshot::FEWSHOT_TASK => fewshot_label(&text).unwrap_or("clutter").to_owned(),
            other => return Err(ProviderError::InvalidRequest(format!("no offline answer for task {other:?}"))),
        };
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::parse::{parse_decomposition, parse_paradigm_choice, parse_rating};
    use crate::prompt::StructuredPrompt;

    fn ask(p: StructuredPrompt) -> String {
        OfflineResponder::default().chat(&p.to_request()).unwrap()
    }

    #[test]
    fn answers_follow_planner_grammars() {
        let d = ask(StructuredPrompt::new(tasks::DECOMPOSE).question("detect targets in sea clutter"));
        assert_eq!(parse_decomposition(&d).unwrap().len(), 4);
        let r = ask(StructuredPrompt::new(tasks::RATE).question("fit a detector"));
        assert_eq!(parse_rating(&r), Some(3));
        let p = ask(StructuredPrompt::new(tasks::REFINE).question("tune the band edge"));
        assert!(parse_paradigm_choice(&p).is_some());
    }

    #[test]
    fn unknown_task_is_an_error() {
        assert!(OfflineResponder::default().chat(&StructuredPrompt::new("dance").to_request()).is_err());
        assert!(OfflineResponder::default().chat(&ChatRequest::single("s", "no task")).is_err());
    }

    #[test]
    fn fewshot_nearest_exemplar() {
        let text = "| Figure 1 (target exemplar) | 0.5000 | 2.0000 | 30.00 |\n\
                    | Figure 2 (clutter exemplar) | 2.0000 | 5.0000 | 3.00 |\n\
                    | Figure 3 (question) | 0.6000 | 2.5000 | 25.00 |";
        assert_eq!(fewshot_label(text), Some("target"));
    }
}
