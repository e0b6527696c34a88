//! Deterministic mock backend.
//!
//! The mock is script-driven: a mapping from (template, problem, language,
//! temperature, sample index, trial) to fixture completions. Unscripted
//! requests fall back to a completion synthesized from a hash of
//! (prompt, temperature, seed), so the determinism contract holds with or
//! without a script.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{LanguageId, Temperature};

use super::{Backend, BackendDescriptor, CompletionRequest, GatewayError, RequestTag, TemplateId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub template: TemplateId,
    pub problem: String,
    pub language: LanguageId,
    pub temperature: Temperature,
    pub sample: u32,
    /// `None` matches any trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    pub completion: String,
}

/// A serializable completion script for replayable runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
    /// Served when no entry matches. With `strict` set, misses are errors
    /// instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_completion: Option<String>,
    #[serde(default)]
    pub strict: bool,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            GatewayError::InvalidDescriptor(format!("mock script {}: {e}", path.display()))
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let mut text = serde_json::to_string(self)
            .map_err(|e| GatewayError::InvalidDescriptor(format!("mock script: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn push(&mut self, entry: MockEntry) {
        self.entries.push(entry);
    }
}

type ScriptKey = (TemplateId, String, LanguageId, String, u32, Option<u32>);

pub struct MockBackend {
    descriptor: BackendDescriptor,
    lookup: HashMap<ScriptKey, String>,
    default_completion: Option<String>,
    strict: bool,
}

impl MockBackend {
    pub fn new(model_name: impl Into<String>, script: MockScript) -> Self {
        let mut lookup = HashMap::with_capacity(script.entries.len());
        for entry in script.entries {
            lookup.insert(
                (
                    entry.template,
                    entry.problem,
                    entry.language,
                    entry.temperature.as_str().to_string(),
                    entry.sample,
                    entry.trial,
                ),
                entry.completion,
            );
        }
        MockBackend {
            descriptor: BackendDescriptor::mock(model_name),
            lookup,
            default_completion: script.default_completion,
            strict: script.strict,
        }
    }

    /// A mock with no script at all; every completion is hash-synthesized.
    pub fn unscripted(model_name: impl Into<String>) -> Self {
        MockBackend::new(model_name, MockScript::default())
    }

    pub fn from_script_file(
        model_name: impl Into<String>,
        path: &Path,
    ) -> Result<Self, GatewayError> {
        Ok(MockBackend::new(model_name, MockScript::load(path)?))
    }

    fn lookup_tagged(&self, tag: &RequestTag, temperature: &Temperature) -> Option<&str> {
        let exact = (
            tag.template,
            tag.problem_id.clone(),
            tag.language.clone(),
            temperature.as_str().to_string(),
            tag.sample_index,
            tag.trial,
        );
        if let Some(text) = self.lookup.get(&exact) {
            return Some(text);
        }
        let wildcard = (exact.0, exact.1, exact.2, exact.3, exact.4, None);
        self.lookup.get(&wildcard).map(String::as_str)
    }
}

impl Backend for MockBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        if let Some(tag) = &request.tag {
            if let Some(text) = self.lookup_tagged(tag, &request.temperature) {
                if text.trim().is_empty() {
                    return Err(GatewayError::BackendRefusal);
                }
                return Ok(text.to_string());
            }
            if self.strict {
                return Err(GatewayError::MockEntryMissing(format!(
                    "{} problem={} language={} temperature={} sample={} trial={:?}",
                    tag.template,
                    tag.problem_id,
                    tag.language,
                    request.temperature,
                    tag.sample_index,
                    tag.trial
                )));
            }
        } else if self.strict {
            return Err(GatewayError::MockEntryMissing("untagged request".to_string()));
        }
        if let Some(text) = &self.default_completion {
            return Ok(text.clone());
        }
        Ok(synthesize(request))
    }
}

/// Deterministic function of (prompt, temperature, seed) only.
fn synthesize(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.prompt.as_bytes());
    hasher.update(b"\x00");
    hasher.update(request.temperature.as_str().as_bytes());
    hasher.update(b"\x00");
    hasher.update(request.seed.unwrap_or(0).to_le_bytes());
    let digest = hex::encode(hasher.finalize());
    format!("```\n-- synthetic completion {}\n```\n", &digest[..16])
}

/// Wraps a backend so every tagged request carries a benchmark trial number.
/// The seed is mixed with the trial so unscripted fallbacks differ per trial.
pub struct TrialScopedBackend<'a> {
    inner: &'a dyn Backend,
    trial: u32,
}

impl<'a> TrialScopedBackend<'a> {
    pub fn new(inner: &'a dyn Backend, trial: u32) -> Self {
        TrialScopedBackend { inner, trial }
    }
}

impl Backend for TrialScopedBackend<'_> {
    fn descriptor(&self) -> &BackendDescriptor {
        self.inner.descriptor()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut scoped = request.clone();
        if let Some(tag) = scoped.tag.as_mut() {
            tag.trial = Some(self.trial);
        }
        let base = scoped.seed.unwrap_or(0);
        scoped.seed = Some(
            base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(u64::from(self.trial) + 1),
        );
        self.inner.complete(&scoped)
    }
}
