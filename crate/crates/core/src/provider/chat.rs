//! Chat-completion requests and the scripted offline provider.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::ProviderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// Opaque binary payload (usually a rendered plot) attached to a user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub media_type: String,
    #[serde(with = "b64")]
    pub bytes: Vec<u8>,
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<Attachment>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, text: text.into(), attachments: Vec::new() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into(), attachments: Vec::new() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into(), attachments: Vec::new() }
    }

    pub fn with_attachments(mut self, attachments: Vec<Attachment>) -> Self {
        self.attachments = attachments;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, temperature: 0.0, max_tokens: 1024 }
    }

    /// Single-turn request: a system instruction followed by one user prompt.
    pub fn single(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self::new(vec![ChatMessage::system(system), ChatMessage::user(user)])
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| ProviderError::InvalidRequest("message list is empty".into()))?;
        if first.role == Role::Assistant {
            return Err(ProviderError::InvalidRequest(
                "first message must be system or user".into(),
            ));
        }
        if self.messages.iter().any(|m| m.role != Role::User && !m.attachments.is_empty()) {
            return Err(ProviderError::InvalidRequest(
                "attachments are only allowed on user messages".into(),
            ));
        }
        if !(self.temperature >= 0.0) {
            return Err(ProviderError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// All message texts joined by newlines; what scripted matchers look at.
    pub fn full_text(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&m.text);
        }
        out
    }

    pub fn last_user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.text.as_str())
            .unwrap_or("")
    }
}

/// Anything that can answer a chat request.
pub trait ChatProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (**self).chat(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (**self).chat(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        (**self).chat(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Matches any request.
    Any,
    /// Matches when the request text contains the needle (case-sensitive).
    Contains(String),
}

impl Matcher {
    pub fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Contains(needle) => text.contains(needle.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustionPolicy {
    #[default]
    Error,
    RepeatLast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response: String,
}

/// Serializable description of a scripted provider.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptedProviderFixture {
    pub entries: Vec<ScriptEntry>,
    #[serde(default)]
    pub exhaustion: ExhaustionPolicy,
}

#[derive(Debug, Default)]
struct ScriptState {
    consumed: Vec<bool>,
    last_response: Option<String>,
    calls: usize,
}

/// Replays canned responses.
///
/// Each entry answers at most one call. A call takes the first unconsumed
/// entry whose matcher accepts the request text; when none is left the
/// exhaustion policy decides between an error and repeating the most
/// recent response.
#[derive(Debug)]
pub struct ScriptedProvider {
    fixture: ScriptedProviderFixture,
    state: Mutex<ScriptState>,
}

impl ScriptedProvider {
    pub fn new(fixture: ScriptedProviderFixture) -> Self {
        let state = ScriptState { consumed: vec![false; fixture.entries.len()], ..Default::default() };
        Self { fixture, state: Mutex::new(state) }
    }

    /// Responses consumed strictly in order by any request.
    pub fn sequence<I, S>(responses: I, exhaustion: ExhaustionPolicy) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries = responses
            .into_iter()
            .map(|r| ScriptEntry { matcher: Matcher::Any, response: r.into() })
            .collect();
        Self::new(ScriptedProviderFixture { entries, exhaustion })
    }

    pub fn calls(&self) -> usize {
        self.state.lock().expect("scripted provider poisoned").calls
    }

    pub fn remaining(&self) -> usize {
        let state = self.state.lock().expect("scripted provider poisoned");
        state.consumed.iter().filter(|c| !**c).count()
    }
}

impl ChatProvider for ScriptedProvider {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let text = request.full_text();
        let mut state = self.state.lock().expect("scripted provider poisoned");
        state.calls += 1;
        let hit = self
            .fixture
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| !state.consumed[*i] && e.matcher.matches(&text))
            .map(|(i, e)| (i, e.response.clone()));
        match hit {
            Some((i, response)) => {
                state.consumed[i] = true;
                state.last_response = Some(response.clone());
                Ok(response)
            }
            None => match (self.fixture.exhaustion, state.last_response.clone()) {
                (ExhaustionPolicy::RepeatLast, Some(last)) => Ok(last),
                _ => Err(ProviderError::FixtureExhausted { calls: state.calls }),
            },
        }
    }
}
