//! Sectioned prompts: instruction, expert knowledge, reasoning examples,
//! question and response format, rendered as markdown headings.

use crate::provider::{Attachment, ChatMessage, ChatRequest};

pub const SYSTEM_PREAMBLE: &str =
    "You are an assistant for signal processing engineering. Follow the response format exactly.";

/// Header line every rendered prompt starts with; offline responders use it
/// to tell prompt kinds apart.
pub fn task_line(task: &str) -> String {
    format!("Task: {task}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructuredPrompt {
    pub task: String,
    pub instruction: String,
    pub knowledge_heading: Option<String>,
    pub expert_knowledge: Vec<String>,
    pub examples: Vec<String>,
    pub question: String,
    pub response_format: String,
}

impl StructuredPrompt {
    pub fn new(task: impl Into<String>) -> Self {
        Self { task: task.into(), ..Default::default() }
    }

    pub fn instruction(mut self, text: impl Into<String>) -> Self {
        self.instruction = text.into();
        self
    }

    pub fn knowledge<I, S>(mut self, heading: impl Into<String>, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.knowledge_heading = Some(heading.into());
        self.expert_knowledge = items.into_iter().map(Into::into).collect();
        self
    }

    pub fn example(mut self, text: impl Into<String>) -> Self {
        self.examples.push(text.into());
        self
    }

    pub fn question(mut self, text: impl Into<String>) -> Self {
        self.question = text.into();
        self
    }

    pub fn response_format(mut self, text: impl Into<String>) -> Self {
        self.response_format = text.into();
        self
    }

    pub fn render(&self) -> String {
        let mut out = task_line(&self.task);
        push_section(&mut out, "Instruction", &self.instruction);
        if !self.expert_knowledge.is_empty() {
            let heading = self.knowledge_heading.as_deref().unwrap_or("Expert Knowledge");
            let body = self
                .expert_knowledge
                .iter()
                .map(|k| format!("- {k}"))
                .collect::<Vec<_>>()
                .join("\n");
            push_section(&mut out, heading, &body);
        }
        if !self.examples.is_empty() {
            push_section(&mut out, "Reasoning Examples", &self.examples.join("\n\n"));
        }
        push_section(&mut out, "Question", &self.question);
        push_section(&mut out, "Response Format", &self.response_format);
        out
    }

    pub fn to_request(&self) -> ChatRequest {
        ChatRequest::single(SYSTEM_PREAMBLE, self.render())
    }

    pub fn to_request_with_attachments(&self, attachments: Vec<Attachment>) -> ChatRequest {
        ChatRequest::new(vec![
            ChatMessage::system(SYSTEM_PREAMBLE),
            ChatMessage::user(self.render()).with_attachments(attachments),
        ])
    }
}

fn push_section(out: &mut String, heading: &str, body: &str) {
    if body.is_empty() {
        return;
    }
    out.push_str("\n\n### ");
    out.push_str(heading);
    out.push('\n');
    out.push_str(body);
}

/// Body of the `### heading` section in a rendered prompt, if present.
pub fn section<'a>(rendered: &'a str, heading: &str) -> Option<&'a str> {
    let marker = format!("### {heading}\n");
    let start = rendered.find(&marker)? + marker.len();
    let rest = &rendered[start..];
    let end = rest.find("\n\n### ").unwrap_or(rest.len());
    Some(&rest[..end])
}
