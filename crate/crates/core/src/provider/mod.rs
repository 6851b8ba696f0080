//! Model access: chat completion, next-token prediction and text embedding.
//!
//! Every model the toolkit consults goes through one of three traits:
//! [`ChatProvider`], [`TokenPredictor`] and [`Embedder`]. Offline
//! implementations ([`ScriptedProvider`], [`OfflineResponder`], [`NgramModel`],
//! [`HashingEmbedder`]) are fully deterministic; [`RemoteProvider`] talks to a
//! chat-completions HTTP endpoint.

pub mod chat;
pub mod embed;
pub mod ngram;
pub mod offline;
pub mod predictor;
pub mod remote;

pub use chat::{
    Attachment, ChatMessage, ChatProvider, ChatRequest, ExhaustionPolicy, Matcher, Role,
    ScriptEntry, ScriptedProvider, ScriptedProviderFixture,
};
pub use embed::{cosine, Embedder, HashingEmbedder};
pub use ngram::{train_ngram, NgramModel};
pub use offline::OfflineResponder;
pub use predictor::{
    next_token_ranking, PredictorRegistry, RankedVocabulary, TokenId, TokenPredictor,
    UniformPredictor, Vocabulary, BOS,
};
pub use remote::{RemoteConfig, RemoteProvider};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("remote provider unavailable after {attempts} attempts: {last_error}")]
    RemoteUnavailable { attempts: u32, last_error: String },
    #[error("remote provider rejected the request with HTTP {0}")]
    RemoteRejected(u16),
    #[error("malformed provider reply: {0}")]
    MalformedReply(String),
    #[error("scripted fixture exhausted at call {calls}")]
    FixtureExhausted { calls: usize },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("invalid predictor: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
