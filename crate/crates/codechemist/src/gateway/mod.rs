//! Uniform interface to text-generation backends.
//!
//! Two backends exist: an OpenAI-style chat-completion HTTP client and a
//! script-driven deterministic mock. Everything above them speaks
//! [`Backend`], so the whole pipeline replays byte-identically on the mock.

mod extract;
mod http;
mod mock;
mod templates;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_code, Extraction, ExtractionMethod};
pub use http::HttpChatBackend;
pub use mock::{MockBackend, MockEntry, MockScript, TrialScopedBackend};
pub use templates::{
    render_prompt, PromptLibrary, PromptTemplate, TemplateId, LCB_CODEGEN_BODY, LCB_TESTGEN_BODY,
    MULTIPL_CODEGEN_BODY, MULTIPL_TESTGEN_BODY,
};

use crate::model::{CandidateProgram, LanguageId, Origin, ProblemSpec, Temperature};
use crate::pool::WorkerPool;

pub const DEFAULT_TOP_P: f64 = 0.95;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;
pub const DEFAULT_AUTH_ENV: &str = "CODECHEMIST_API_KEY";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("template `{0}` has no question placeholder")]
    TemplateMissingPlaceholder(String),
    #[error("template `{0}` has more than one question placeholder")]
    TemplateAmbiguousPlaceholder(String),
    #[error("credential environment variable `{0}` is not set")]
    AuthMissing(String),
    #[error("transport exhausted after {attempts} attempts: {detail}")]
    TransportExhausted { attempts: u32, detail: String },
    #[error("backend returned an empty completion")]
    BackendRefusal,
    #[error("extracted code is empty")]
    EmptyExtraction,
    #[error("mock script has no entry for {0}")]
    MockEntryMissing(String),
    #[error("backend descriptor is invalid: {0}")]
    InvalidDescriptor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifies a request for script lookup and replay logging. The HTTP
/// backend ignores it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestTag {
    pub template: TemplateId,
    pub problem_id: String,
    pub language: LanguageId,
    pub sample_index: u32,
    /// Benchmark trial number; stamped on by a [`TrialScopedBackend`].
    pub trial: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: Temperature,
    pub top_p: f64,
    pub max_tokens: u32,
    /// Determinism seed, honored by the mock backend only.
    pub seed: Option<u64>,
    pub tag: Option<RequestTag>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, temperature: Temperature) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature,
            top_p: DEFAULT_TOP_P,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
            tag: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpChat,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API credential.
    /// `None` sends no auth header.
    #[serde(default = "default_auth_env")]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_secs")]
    pub retry_initial_backoff_secs: f64,
    /// Bound on simultaneous in-flight requests (http backend).
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: u32,
}

fn default_max_in_flight() -> u32 {
    8
}

fn default_auth_env() -> Option<String> {
    Some(DEFAULT_AUTH_ENV.to_string())
}

fn default_timeout_secs() -> f64 {
    60.0
}

fn default_max_retries() -> u32 {
    3
}

fn default_backoff_secs() -> f64 {
    1.0
}

impl BackendDescriptor {
    pub fn mock(model_name: impl Into<String>) -> Self {
        BackendDescriptor {
            kind: BackendKind::Mock,
            model_name: model_name.into(),
            endpoint: None,
            auth_env: None,
            request_timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            retry_initial_backoff_secs: default_backoff_secs(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn http_chat(model_name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        BackendDescriptor {
            kind: BackendKind::HttpChat,
            model_name: model_name.into(),
            endpoint: Some(endpoint.into()),
            auth_env: default_auth_env(),
            request_timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            retry_initial_backoff_secs: default_backoff_secs(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }

    pub fn retry_initial_backoff(&self) -> Duration {
        Duration::from_secs_f64(self.retry_initial_backoff_secs)
    }
}

/// A text-generation backend. Handles are shareable across worker threads.
pub trait Backend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    /// Returns the assistant message text for one request.
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

/// Everything needed to draw one batch of candidates at a single temperature.
#[derive(Debug, Clone)]
pub struct SampleRequest<'a> {
    pub problem: &'a ProblemSpec,
    pub template: &'a PromptTemplate,
    /// Language the batch is generated in (target for hedged candidates,
    /// source for references).
    pub language: LanguageId,
    /// Question text inserted into the template.
    pub question: &'a str,
    pub temperature: Temperature,
    pub count: u32,
    /// Origin for non-greedy samples. The (temperature 0, index 0) sample of
    /// a hedged batch is tagged greedy automatically.
    pub origin: Origin,
    /// Keep whatever samples succeeded instead of failing the whole batch.
    pub permit_partial: bool,
    /// First sample index; lets retries continue the numbering.
    pub index_base: u32,
}

/// Draws `count` candidates at one temperature, fanned out over the pool.
/// Results are ordered by sample index regardless of scheduling.
pub fn sample_batch(
    backend: &dyn Backend,
    pool: &WorkerPool,
    req: &SampleRequest<'_>,
) -> Result<Vec<CandidateProgram>, GatewayError> {
    let (candidates, first_error) = sample_batch_partial(backend, pool, req)?;
    match first_error {
        Some(err) if !req.permit_partial => Err(err),
        _ => Ok(candidates),
    }
}

/// Like [`sample_batch`] but always keeps the successful subset, returning
/// the first per-sample error alongside it so callers can surface the cause
/// of a shortfall.
pub fn sample_batch_partial(
    backend: &dyn Backend,
    pool: &WorkerPool,
    req: &SampleRequest<'_>,
) -> Result<(Vec<CandidateProgram>, Option<GatewayError>), GatewayError> {
    debug_assert!(req.count >= 1, "sample count must be >= 1");
    let prompt = req.template.render(req.question, &req.language)?;
    let indices: Vec<u32> = (req.index_base..req.index_base + req.count).collect();
    let results = pool.map(indices, |index| {
        let request = CompletionRequest {
            seed: Some(u64::from(index)),
            tag: Some(RequestTag {
                template: req.template.id,
                problem_id: req.problem.id.clone(),
                language: req.language.clone(),
                sample_index: index,
                trial: None,
            }),
            ..CompletionRequest::new(prompt.clone(), req.temperature.clone())
        };
        let completion = backend.complete(&request)?;
        let extraction = extract_code(&completion, &req.language)?;
        let origin = if req.origin != Origin::Reference
            && req.temperature.is_zero()
            && index == 0
        {
            Origin::Greedy
        } else {
            req.origin
        };
        Ok(CandidateProgram {
            source: extraction.source,
            language: req.language.clone(),
            temperature: req.temperature.clone(),
            sample_index: index,
            origin,
        })
    });

    let mut candidates = Vec::with_capacity(results.len());
    let mut first_error = None;
    for result in results {
        match result {
            Ok(candidate) => candidates.push(candidate),
            Err(err) => {
                if first_error.is_none() {
                    first_error = Some(err);
                }
            }
        }
    }
    Ok((candidates, first_error))
}
