//! Stage-one planning: decompose a request into a subtask chain, plan each
//! subtask with retrieval matched to its complexity tier, then refine the
//! chosen solution paradigm against the agent memory.
//!
//! Tier dispatch:
//!
//! * `Simple`: one chat call, no retrieval.
//! * `Moderate`: one retrieval, retrieved text prepended to the plan prompt.
//! * `Complex`: multi-hop. Hop `i` retrieves with the accumulated context
//!   `c_i`, asks for an intermediate answer `a_i`, and extends the context to
//!   `c_{i+1} = (d_1..d_i, a_1..a_i)`, documents first, then answers. It stops
//!   on a `FINAL:` reply, when a hop brings no new documents, or at `max_hops`.

pub mod memory;
pub mod parse;
pub mod types;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

pub use memory::{AgentMemory, SolutionParadigm};
pub use types::{
    Constraint, Evidence, Modality, ParadigmKind, RecordFlag, SolutionRecord, SpRequest, Subtask,
    SubtaskChain, Tier,
};

use crate::prompt::StructuredPrompt;
use crate::provider::{ChatMessage, ChatProvider, ChatRequest, ProviderError};
use crate::retrieval::{HopContext, RetrievalError, Retrieved, Retriever};

pub const FINAL_MARKER: &str = "FINAL:";

pub mod tasks {
    pub const DECOMPOSE: &str = "decompose";
    pub const RATE: &str = "rate-complexity";
    pub const PLAN: &str = "plan-subtask";
    pub const HOP: &str = "plan-hop";
    pub const REFINE: &str = "refine-paradigm";
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("could not parse decomposition: {0}")]
    DecompositionParse(String),
    #[error("dependency cycle among subtasks {0:?}")]
    CyclicPlan(Vec<String>),
    #[error("max_hops must be at least 1")]
    InvalidMaxHops,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Documents retrieved per planning call.
    pub top_k: usize,
    pub max_hops: usize,
    /// Top-1 cosine at or above which the retrieval signal says `Simple`.
    pub simple_threshold: f64,
    /// Top-1 cosine at or above which the retrieval signal says `Moderate`.
    pub moderate_threshold: f64,
    /// Domain documents prepended to the decomposition prompt.
    pub decomposition_docs: usize,
    /// Extra attempts after an unusable reply.
    pub max_reprompts: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            top_k: 3,
            max_hops: 3,
            simple_threshold: 0.6,
            moderate_threshold: 0.3,
            decomposition_docs: 3,
            max_reprompts: 2,
        }
    }
}

/// Counts of provider and retrieval calls, keyed `<kind>.<operation>`.
#[derive(Debug, Default)]
pub struct CallLedger {
    counts: Mutex<BTreeMap<String, usize>>,
}

impl CallLedger {
    pub fn record(&self, key: &str) {
        *self.counts.lock().expect("ledger poisoned").entry(key.to_owned()).or_default() += 1;
    }

    pub fn get(&self, key: &str) -> usize {
        self.counts.lock().expect("ledger poisoned").get(key).copied().unwrap_or(0)
    }

    pub fn snapshot(&self) -> BTreeMap<String, usize> {
        self.counts.lock().expect("ledger poisoned").clone()
    }
}

pub struct Planner<'a> {
    pub config: PlannerConfig,
    provider: &'a dyn ChatProvider,
    retriever: &'a dyn Retriever,
    ledger: CallLedger,
}

impl<'a> Planner<'a> {
    pub fn new(config: PlannerConfig, provider: &'a dyn ChatProvider, retriever: &'a dyn Retriever) -> Self {
        Self { config, provider, retriever, ledger: CallLedger::default() }
    }

    pub fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    fn chat(&self, op: &str, request: &ChatRequest) -> Result<String, ProviderError> {
        self.ledger.record(&format!("chat.{op}"));
        self.provider.chat(request)
    }

    fn retrieve(&self, op: &str, query: &str, top_k: usize) -> Result<Vec<Retrieved>, RetrievalError> {
        self.ledger.record(&format!("retrieve.{op}"));
        self.retriever.retrieve(query, top_k)
    }

    fn retrieve_with_context(
        &self,
        op: &str,
        query: &str,
        context: &HopContext,
        top_k: usize,
    ) -> Result<Vec<Retrieved>, RetrievalError> {
        self.ledger.record(&format!("retrieve.{op}"));
        self.retriever.retrieve_with_context(query, context, top_k)
    }

    /// Asks for a reply, re-prompting with a correction up to
    /// `max_reprompts` times while `parse` rejects it.
    fn chat_parsed<T>(
        &self,
        op: &str,
        request: ChatRequest,
        correction: &str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<Result<T, String>, ProviderError> {
        let mut request = request;
        let mut last = String::new();
        for attempt in 0..=self.config.max_reprompts {
            let reply = self.chat(op, &request)?;
            if let Some(v) = parse(&reply) {
                return Ok(Ok(v));
            }
            debug!(op, attempt, "unparseable reply");
            request.messages.push(ChatMessage::assistant(reply.clone()));
            request.messages.push(ChatMessage::user(correction.to_owned()));
            last = reply;
        }
        Ok(Err(last))
    }

    pub fn decompose(&self, request: &SpRequest) -> Result<SubtaskChain, PlannerError> {
        request.validate()?;
        let knowledge = match self.retrieve(tasks::DECOMPOSE, &request.goal, self.config.decomposition_docs) {
            Ok(hits) => hits.into_iter().map(|h| h.text).collect(),
            Err(RetrievalError::EmptyIndex) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut question = request.goal.clone();
        for c in request.constraint_lines() {
            question.push_str(&format!("\nConstraint: {c}"));
        }
        let prompt = StructuredPrompt::new(tasks::DECOMPOSE)
            .instruction(
                "Break the signal processing request into concrete subtasks in execution order. \
                 State for every subtask which earlier subtasks it needs.",
            )
            .knowledge("SP Domain Knowledge", knowledge)
            .example(
                "Request: estimate the carrier frequency of a recorded tone\n\
                 1. load the recording (depends: none)\n\
                 2. compute the power spectrum (depends: 1)\n\
                 3. locate the spectral peak (depends: 2)",
            )
            .question(question)
            .response_format(
                "A numbered list, one subtask per item: `<n>. <description> (depends: none)` or \
                 `<n>. <description> (depends: <n>, <n>)`.",
            );
        let correction = "That reply did not follow the response format. Answer again with only the numbered list, \
                          each item ending in (depends: ...).";
        match self.chat_parsed(tasks::DECOMPOSE, prompt.to_request(), correction, parse::parse_decomposition)? {
            Ok(items) => SubtaskChain::from_unordered(items),
            Err(last) => Err(PlannerError::DecompositionParse(format!(
                "no usable list after {} attempts; last reply: {last:?}",
                self.config.max_reprompts + 1
            ))),
        }
    }

    /// Top-1 cosine of the subtask against the knowledge base, if any.
    fn retrieval_signal(&self, subtask: &Subtask) -> Result<Option<(Tier, f64)>, PlannerError> {
        match self.retrieve(tasks::RATE, &subtask.description, 1) {
            Ok(hits) => {
                let score = hits.first().map_or(0.0, |h| h.score);
                let tier = if score >= self.config.simple_threshold {
                    Tier::Simple
                } else if score >= self.config.moderate_threshold {
                    Tier::Moderate
                } else {
                    Tier::Complex
                };
                Ok(Some((tier, score)))
            }
            Err(RetrievalError::EmptyIndex) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// The larger of the retrieval signal and the model's own 1-3 rating.
    pub fn assess_complexity(&self, subtask: &Subtask) -> Result<Tier, PlannerError> {
        if subtask.description.trim().is_empty() {
            return Err(PlannerError::InvalidRequest("subtask description is empty".into()));
        }
        let retrieval = self.retrieval_signal(subtask)?;
        let prompt = StructuredPrompt::new(tasks::RATE)
            .instruction(
                "Rate how hard this signal processing subtask is to solve from general knowledge alone. \
                 1 = routine and well defined, 2 = needs some domain background, 3 = specialized or ambiguous.",
            )
            .question(subtask.description.clone())
            .response_format("A single integer: 1, 2 or 3.");
        let reply = self.chat(tasks::RATE, &prompt.to_request())?;
        let rating = parse::parse_rating(&reply).map(Tier::from_rating);
        if rating.is_none() {
            warn!(subtask = %subtask.id, "unparseable self-rating; using retrieval signal only");
        }
        let tier = match (retrieval, rating) {
            (Some((r, _)), Some(s)) => r.max(s),
            (Some((r, _)), None) => r,
            (None, Some(s)) => s,
            (None, None) => Tier::Simple,
        };
        Ok(tier)
    }

    fn plan_prompt(&self, subtask: &Subtask, retrieved: &[Retrieved]) -> StructuredPrompt {
        let mut p = StructuredPrompt::new(tasks::PLAN)
            .instruction("Write a concrete, step-by-step solution plan for this signal processing subtask.")
            .question(subtask.description.clone())
            .response_format("A short plan as plain text.");
        if !retrieved.is_empty() {
            p = p.knowledge("Retrieved Context", retrieved.iter().map(|r| format!("[{}] {}", r.doc_id, r.text)));
        }
        p
    }

    pub fn plan_simple(&self, subtask: &Subtask) -> Result<SolutionRecord, PlannerError> {
        let reply = self.chat(tasks::PLAN, &self.plan_prompt(subtask, &[]).to_request())?;
        Ok(SolutionRecord::new(&subtask.id, Tier::Simple, reply.trim()))
    }

    pub fn plan_single_hop(&self, subtask: &Subtask) -> Result<SolutionRecord, PlannerError> {
        let hits = match self.retrieve(tasks::PLAN, &subtask.description, self.config.top_k) {
            Ok(hits) => hits,
            Err(RetrievalError::EmptyIndex) => {
                warn!(subtask = %subtask.id, "empty index; planning without retrieval");
                let mut record = self.plan_simple(subtask)?;
                record.tier = Tier::Moderate;
                record.retrieval_calls = 1;
                record.flag(RecordFlag::Degraded);
                record.notes.push("knowledge index empty; planned without retrieval".into());
                return Ok(record);
            }
            Err(e) => return Err(e.into()),
        };
        let reply = self.chat(tasks::PLAN, &self.plan_prompt(subtask, &hits).to_request())?;
        let mut record = SolutionRecord::new(&subtask.id, Tier::Moderate, reply.trim());
        record.evidence = hits.into_iter().map(|h| Evidence { doc_id: h.doc_id, hop: 1 }).collect();
        record.hops_used = 1;
        record.retrieval_calls = 1;
        Ok(record)
    }

    fn hop_prompt(&self, subtask: &Subtask, context: &HopContext, retrieved: &[Retrieved], hop: usize) -> StructuredPrompt {
        let mut p = StructuredPrompt::new(tasks::HOP)
            .instruction(format!(
                "Work towards a solution plan for the subtask using the accumulated context and the newly \
                 retrieved evidence. This is step {hop} of at most {}.",
                self.config.max_hops
            ))
            .question(subtask.description.clone())
            .response_format(format!(
                "An intermediate answer as plain text. Once the plan is complete and grounded in the evidence, \
                 begin the reply with {FINAL_MARKER}"
            ));
        let mut knowledge = Vec::new();
        if !context.is_empty() {
            knowledge.push(format!("Accumulated context:\n{}", context.render().trim_end()));
        }
        knowledge.extend(retrieved.iter().map(|r| format!("[{}] {}", r.doc_id, r.text)));
        if !knowledge.is_empty() {
            p = p.knowledge("Retrieved Context", knowledge);
        }
        p
    }

    pub fn plan_multi_hop(&self, subtask: &Subtask) -> Result<SolutionRecord, PlannerError> {
        if self.config.max_hops == 0 {
            return Err(PlannerError::InvalidMaxHops);
        }
        let mut docs: Vec<(String, String)> = Vec::new();
        let mut answers: Vec<String> = Vec::new();
        let mut evidence = Vec::new();
        let mut contexts = Vec::new();
        let mut previous: Option<BTreeSet<String>> = None;
        let mut calls = 0;
        let mut converged = false;
        let mut hop = 0;
        while hop < self.config.max_hops {
            hop += 1;
            let context = HopContext { documents: docs.clone(), answers: answers.clone() };
            calls += 1;
            let hits = match self.retrieve_with_context(tasks::PLAN, &subtask.description, &context, self.config.top_k) {
                Ok(hits) => hits,
                Err(RetrievalError::EmptyIndex) if hop == 1 => {
                    warn!(subtask = %subtask.id, "empty index; planning without retrieval");
                    let mut record = self.plan_simple(subtask)?;
                    record.tier = Tier::Complex;
                    record.retrieval_calls = 1;
                    record.flag(RecordFlag::Degraded);
                    record.notes.push("knowledge index empty; planned without retrieval".into());
                    return Ok(record);
                }
                Err(e) => return Err(e.into()),
            };
            let reply = self.chat(tasks::HOP, &self.hop_prompt(subtask, &context, &hits, hop).to_request())?;
            contexts.push(context);
            let ids: BTreeSet<String> = hits.iter().map(|h| h.doc_id.clone()).collect();
            let nothing_new = hits.iter().all(|h| docs.iter().any(|(id, _)| id == &h.doc_id));
            let stable = hop > 1 && (previous.as_ref() == Some(&ids) || nothing_new);
            for h in hits {
                if !docs.iter().any(|(id, _)| id == &h.doc_id) {
                    evidence.push(Evidence { doc_id: h.doc_id.clone(), hop });
                    docs.push((h.doc_id, h.text));
                }
            }
            let is_final = parse::final_answer(&reply).is_some();
            answers.push(reply);
            if is_final || stable {
                converged = true;
                break;
            }
            previous = Some(ids);
        }
        let last = answers.last().expect("at least one hop ran");
        let plan_text = parse::final_answer(last).unwrap_or(last.trim()).to_owned();
        let mut record = SolutionRecord::new(&subtask.id, Tier::Complex, plan_text);
        record.evidence = evidence;
        record.hops_used = hop;
        record.retrieval_calls = calls;
        record.hop_contexts = contexts;
        if !converged {
            record.flag(RecordFlag::Unconverged);
        }
        Ok(record)
    }

    pub fn plan(&self, subtask: &Subtask, tier: Tier) -> Result<SolutionRecord, PlannerError> {
        match tier {
            Tier::Simple => self.plan_simple(subtask),
            Tier::Moderate => self.plan_single_hop(subtask),
            Tier::Complex => self.plan_multi_hop(subtask),
        }
    }

    /// Asks the model to pick the best paradigm for the plan. Paradigms that
    /// need a code sandbox or training infrastructure are downgraded to
    /// `PromptReasoning`.
    pub fn refine(
        &self,
        record: &SolutionRecord,
        memory: &AgentMemory,
        constraints: &[Constraint],
    ) -> Result<SolutionRecord, PlannerError> {
        let mut out = record.clone();
        let catalog = memory.iter().map(|p| {
            format!("{}: strengths: {} limitations: {}", p.kind.name(), p.strengths, p.limitations)
        });
        let mut question = format!("Current solution ({}):\n{}", record.paradigm.name(), record.plan_text);
        for c in constraints {
            question.push_str(&format!("\nConstraint: {}", c.describe()));
        }
        let prompt = StructuredPrompt::new(tasks::REFINE)
            .instruction(
                "Compare the current solution against the available solution paradigms and pick the one \
                 best suited to the task and its constraints.",
            )
            .knowledge("Solution Paradigms", catalog)
            .question(question)
            .response_format(format!(
                "One line: `<Paradigm>: <one-line justification>` where <Paradigm> is one of {}.",
                ParadigmKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
            ));
        let correction = format!(
            "Unrecognized paradigm. Reply with exactly one of {} followed by a colon and a justification.",
            ParadigmKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
        );
        match self.chat_parsed(tasks::REFINE, prompt.to_request(), &correction, parse::parse_paradigm_choice)? {
            Ok((kind, why)) => {
                if kind.is_out_of_scope() {
                    out.paradigm = ParadigmKind::PromptReasoning;
                    out.notes.push(format!(
                        "{} selected but not executable here (no code sandbox or training infrastructure); \
                         using PromptReasoning",
                        kind.name()
                    ));
                } else {
                    out.paradigm = kind;
                    if !why.is_empty() {
                        out.notes.push(format!("refined to {}: {why}", kind.name()));
                    }
                }
            }
            Err(_) => out.flag(RecordFlag::Unrefined),
        }
        Ok(out)
    }

    /// Full stage-one pipeline. Errors after decomposition leave the
    /// report with `outcome = Aborted` and whatever records were finished.
    pub fn run_pipeline(&self, request: &SpRequest, memory: &AgentMemory) -> Result<RunReport, PlannerError> {
        request.validate()?;
        let mut report = RunReport {
            request: request.clone(),
            config: self.config.clone(),
            chain: SubtaskChain::default(),
            outcome: Outcome::Completed,
            ledger: BTreeMap::new(),
        };
        match self.decompose(request) {
            Ok(chain) => report.chain = chain,
            Err(e) => {
                report.outcome = Outcome::Aborted { stage: "decompose".into(), message: e.to_string() };
                report.ledger = self.ledger.snapshot();
                return Ok(report);
            }
        }
        for i in 0..report.chain.subtasks.len() {
            let subtask = report.chain.subtasks[i].clone();
            let step = self
                .assess_complexity(&subtask)
                .and_then(|tier| {
                    report.chain.subtasks[i].complexity = Some(tier);
                    self.plan(&subtask, tier)
                })
                .and_then(|record| self.refine(&record, memory, &request.constraints));
            match step {
                Ok(record) => report.chain.subtasks[i].solution = Some(record),
                Err(e) => {
                    report.outcome = Outcome::Aborted { stage: format!("subtask {}", subtask.id), message: e.to_string() };
                    break;
                }
            }
        }
        report.ledger = self.ledger.snapshot();
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted { stage: String, message: String },
}

/// Machine-readable result of a planning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub request: SpRequest,
    pub config: PlannerConfig,
    pub chain: SubtaskChain,
    pub outcome: Outcome,
    /// Provider and retrieval call counts per operation.
    pub ledger: BTreeMap<String, usize>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn is_complete(&self) -> bool {
        self.outcome == Outcome::Completed
    }
}
