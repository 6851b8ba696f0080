use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::types::ParadigmKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionParadigm {
    pub kind: ParadigmKind,
    pub strengths: String,
    pub limitations: String,
    pub applicability_tags: BTreeSet<String>,
}

/// Static catalog of solution paradigms consulted during refinement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    paradigms: BTreeMap<ParadigmKind, SolutionParadigm>,
}

fn tags(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl AgentMemory {
    pub fn seeded() -> Self {
        let entries = [
            (
                ParadigmKind::PromptReasoning,
                "Needs no training data or tooling; a structured prompt with domain knowledge and worked examples is enough, which suits zero- and few-shot problems.",
                "Numerical precision is weak and answers depend on how well the prompt captures the task; long computations are unreliable.",
                &["few_shot", "zero_shot", "classification", "text"][..],
            ),
            (
                ParadigmKind::CodeGeneration,
                "Delegates exact computation to an external interpreter, so heavy numerical pipelines are reproduced faithfully.",
                "Requires a sandboxed executor and mostly re-implements classical algorithms; brittle when data is scarce or the task is under-specified.",
                &["compute_heavy", "numerical"][..],
            ),
            (
                ParadigmKind::CrossModalReasoning,
                "Combines rendered feature plots with text so the model can compare signal visualizations directly; effective with a handful of labeled exemplars.",
                "Depends on a multimodal model and on choosing features whose plots are informative; rendering adds cost per query.",
                &["few_shot", "iq_signal", "image", "detection"][..],
            ),
            (
                ParadigmKind::LlmModeling,
                "Uses the language model's own next-token distribution as the signal model, e.g. as the probability source for source coding.",
                "Only applies where the signal can be tokenized; compute per symbol is high and the model must be identical at both ends.",
                &["text", "compression", "coding"][..],
            ),
            (
                ParadigmKind::LlmOptimizer,
                "Proposes parameter settings from the history of evaluated settings; alternating with differential evolution keeps progress steady under small evaluation budgets.",
                "Each proposal costs a model call; replies can be malformed or erratic and need a numerical fallback.",
                &["hyperparameter", "optimization", "budget"][..],
            ),
            (
                ParadigmKind::ParameterTransfer,
                "Initializes a task model from pretrained weights, improving generalization when some labeled data is available.",
                "Needs pretrained checkpoints, training infrastructure and a fine-tuning budget.",
                &["training", "classification"][..],
            ),
        ];
        let paradigms = entries
            .into_iter()
            .map(|(kind, strengths, limitations, t)| {
                (
                    kind,
                    SolutionParadigm {
                        kind,
                        strengths: strengths.to_owned(),
                        limitations: limitations.to_owned(),
                        applicability_tags: tags(t),
                    },
                )
            })
            .collect();
        Self { paradigms }
    }

    pub fn get(&self, kind: ParadigmKind) -> Option<&SolutionParadigm> {
        self.paradigms.get(&kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SolutionParadigm> {
        self.paradigms.values()
    }

    pub fn len(&self) -> usize {
        self.paradigms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paradigms.is_empty()
    }
}

impl Default for AgentMemory {
    fn default() -> Self {
        Self::seeded()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_with_all_six_kinds() {
        let m = AgentMemory::seeded();
        assert_eq!(m.len(), 6);
        for k in ParadigmKind::ALL {
            let p = m.get(k).unwrap();
            assert!(!p.strengths.is_empty() && !p.limitations.is_empty());
        }
    }
}
