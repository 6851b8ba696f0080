use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::retrieval::HopContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    IqSignal,
    Imu,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "value", rename_all = "snake_case")]
pub enum Constraint {
    DataBudget(String),
    ComputeBudget(String),
    Modality(Modality),
}

impl Constraint {
    pub fn tag(&self) -> &'static str {
        match self {
            Constraint::DataBudget(_) => "data_budget",
            Constraint::ComputeBudget(_) => "compute_budget",
            Constraint::Modality(_) => "modality",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Constraint::DataBudget(v) | Constraint::ComputeBudget(v) => format!("{}: {v}", self.tag()),
            Constraint::Modality(m) => {
                format!("modality: {}", serde_json::to_value(m).unwrap().as_str().unwrap_or("?"))
            }
        }
    }
}

/// A signal-processing task stated in natural language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpRequest {
    pub goal: String,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub artifacts: Vec<String>,
}

impl SpRequest {
    pub fn new(goal: impl Into<String>) -> Self {
        Self { goal: goal.into(), constraints: Vec::new(), artifacts: Vec::new() }
    }

    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.goal.trim().is_empty() {
            return Err(PlannerError::InvalidRequest("goal is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.constraints {
            if !seen.insert(c.tag()) {
                return Err(PlannerError::InvalidRequest(format!("constraint {} given twice", c.tag())));
            }
        }
        Ok(())
    }

    pub fn constraint_lines(&self) -> Vec<String> {
        self.constraints.iter().map(Constraint::describe).collect()
    }
}

/// Complexity tier; the ordering drives the max-of-signals rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Simple,
    Moderate,
    Complex,
}

impl Tier {
    pub fn from_rating(rating: i64) -> Tier {
        match rating.clamp(1, 3) {
            1 => Tier::Simple,
            2 => Tier::Moderate,
            _ => Tier::Complex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParadigmKind {
    PromptReasoning,
    CodeGeneration,
    CrossModalReasoning,
    LlmModeling,
    LlmOptimizer,
    ParameterTransfer,
}

impl ParadigmKind {
    pub const ALL: [ParadigmKind; 6] = [
        ParadigmKind::PromptReasoning,
        ParadigmKind::CodeGeneration,
        ParadigmKind::CrossModalReasoning,
        ParadigmKind::LlmModeling,
        ParadigmKind::LlmOptimizer,
        ParadigmKind::ParameterTransfer,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParadigmKind::PromptReasoning => "PromptReasoning",
            ParadigmKind::CodeGeneration => "CodeGeneration",
            ParadigmKind::CrossModalReasoning => "CrossModalReasoning",
            ParadigmKind::LlmModeling => "LlmModeling",
            ParadigmKind::LlmOptimizer => "LlmOptimizer",
            ParadigmKind::ParameterTransfer => "ParameterTransfer",
        }
    }

    /// Case-, space- and underscore-insensitive name lookup.
    pub fn parse(text: &str) -> Option<ParadigmKind> {
        let norm: String = text.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        Self::ALL.into_iter().find(|k| k.name().to_lowercase() == norm)
    }

    /// Paradigms that need a code sandbox or training infrastructure.
    pub fn is_out_of_scope(&self) -> bool {
        matches!(self, ParadigmKind::CodeGeneration | ParadigmKind::ParameterTransfer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    /// Retrieval was unavailable and the record was planned without it.
    Degraded,
    /// Multi-hop planning hit its hop limit without a final answer.
    Unconverged,
    /// Refinement got no usable paradigm choice.
    Unrefined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub doc_id: String,
    pub hop: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub subtask_id: String,
    pub tier: Tier,
    pub paradigm: ParadigmKind,
    pub plan_text: String,
    pub evidence: Vec<Evidence>,
    pub hops_used: usize,
    pub retrieval_calls: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RecordFlag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Context handed to each hop of multi-hop planning, hop 1 first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hop_contexts: Vec<HopContext>,
}

impl SolutionRecord {
    pub fn new(subtask_id: impl Into<String>, tier: Tier, plan_text: impl Into<String>) -> Self {
        Self {
            subtask_id: subtask_id.into(),
            tier,
            paradigm: ParadigmKind::PromptReasoning,
            plan_text: plan_text.into(),
            evidence: Vec::new(),
            hops_used: 0,
            retrieval_calls: 0,
            flags: Vec::new(),
            notes: Vec::new(),
            hop_contexts: Vec::new(),
        }
    }

    pub fn has_flag(&self, flag: RecordFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn flag(&mut self, flag: RecordFlag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
            self.flags.sort();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: String,
    pub description: String,
    pub depends_on: BTreeSet<String>,
    #[serde(default)]
    pub complexity: Option<Tier>,
    #[serde(default)]
    pub solution: Option<SolutionRecord>,
}

impl Subtask {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            depends_on: BTreeSet::new(),
            complexity: None,
            solution: None,
        }
    }
}

/// Subtasks in an order where every dependency comes first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SubtaskChain {
    pub subtasks: Vec<Subtask>,
}

impl SubtaskChain {
    /// Orders `subtasks` topologically, keeping the given order among
    /// subtasks that are ready at the same time.
    pub fn from_unordered(subtasks: Vec<Subtask>) -> Result<Self, PlannerError> {
        let ids: BTreeMap<&str, usize> = subtasks.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        if ids.len() != subtasks.len() {
            return Err(PlannerError::DecompositionParse("duplicate subtask ids".into()));
        }
        for s in &subtasks {
            if let Some(missing) = s.depends_on.iter().find(|d| !ids.contains_key(d.as_str())) {
                return Err(PlannerError::DecompositionParse(format!(
                    "subtask {} depends on unknown subtask {missing}",
                    s.id
                )));
            }
        }
        let mut placed = vec![false; subtasks.len()];
        let mut order = Vec::with_capacity(subtasks.len());
        while order.len() < subtasks.len() {
            let ready = (0..subtasks.len()).find(|&i| {
                !placed[i] && subtasks[i].depends_on.iter().all(|d| placed[ids[d.as_str()]])
            });
            match ready {
                Some(i) => {
                    placed[i] = true;
                    order.push(i);
                }
                None => {
                    let stuck = (0..subtasks.len())
                        .filter(|&i| !placed[i])
                        .map(|i| subtasks[i].id.clone())
                        .collect();
                    return Err(PlannerError::CyclicPlan(stuck));
                }
            }
        }
        let mut slots: Vec<Option<Subtask>> = subtasks.into_iter().map(Some).collect();
        Ok(Self { subtasks: order.into_iter().map(|i| slots[i].take().unwrap()).collect() })
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.subtasks.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.subtasks.iter().filter_map(|s| s.solution.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(id: &str, deps: &[&str]) -> Subtask {
        let mut s = Subtask::new(id, format!("step {id}"));
        s.depends_on = deps.iter().map(|d| d.to_string()).collect();
        s
    }

    #[test]
    fn reorders_forward_references() {
        let chain = SubtaskChain::from_unordered(vec![st("1", &["2"]), st("2", &[]), st("3", &["1"])]).unwrap();
        assert_eq!(chain.ids(), ["2", "1", "3"]);
    }

    #[test]
    fn detects_cycles_and_self_loops() {
        assert!(matches!(
            SubtaskChain::from_unordered(vec![st("1", &[]), st("2", &["3"]), st("3", &["2"])]),
            Err(PlannerError::CyclicPlan(ids)) if ids == ["2", "3"]
        ));
        assert!(matches!(SubtaskChain::from_unordered(vec![st("1", &["1"])]), Err(PlannerError::CyclicPlan(_))));
    }

    #[test]
    fn unknown_dependency_is_a_parse_error() {
        assert!(matches!(
            SubtaskChain::from_unordered(vec![st("1", &["9"])]),
            Err(PlannerError::DecompositionParse(_))
        ));
    }

    #[test]
    fn request_validation() {
        assert!(SpRequest::new("  ").validate().is_err());
        let dup = SpRequest::new("x")
            .with_constraint(Constraint::DataBudget("2 samples".into()))
            .with_constraint(Constraint::DataBudget("3 samples".into()));
        assert!(dup.validate().is_err());
        assert!(SpRequest::new("x").with_constraint(Constraint::Modality(Modality::IqSignal)).validate().is_ok());
    }

    #[test]
    fn paradigm_names_parse_loosely() {
        assert_eq!(ParadigmKind::parse("llm_optimizer"), Some(ParadigmKind::LlmOptimizer));
        assert_eq!(ParadigmKind::parse("Cross Modal Reasoning"), Some(ParadigmKind::CrossModalReasoning));
        assert_eq!(ParadigmKind::parse("banana"), None);
    }

    #[test]
    fn tier_from_rating_clamps() {
        assert_eq!(Tier::from_rating(0), Tier::Simple);
        assert_eq!(Tier::from_rating(2), Tier::Moderate);
        assert_eq!(Tier::from_rating(7), Tier::Complex);
    }
}
