//! Code extraction from model completions.

use serde::{Deserialize, Serialize};

use crate::model::LanguageId;

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMethod {
    /// First fenced block whose info string names the requested language.
    LanguageFence,
    /// No language match; first fenced block of any kind.
    AnyFence,
    /// No fence at all; the whole completion, trimmed.
    WholeCompletion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub source: String,
    pub method: ExtractionMethod,
}

struct FencedBlock {
    info: String,
    content: String,
}

/// Pulls program source out of a completion.
///
/// Preference order: first fence matching the language's info string, then
/// the first fence of any kind, then the whole completion trimmed. A
/// whitespace-only result is an error.
pub fn extract_code(completion: &str, language: &LanguageId) -> Result<Extraction, GatewayError> {
    let blocks = fenced_blocks(completion);
    let picked = blocks
        .iter()
        .find(|b| language.matches_fence_info(&b.info))
        .map(|b| (b.content.clone(), ExtractionMethod::LanguageFence))
        .or_else(|| {
            blocks
                .first()
                .map(|b| (b.content.clone(), ExtractionMethod::AnyFence))
        })
        .unwrap_or_else(|| (completion.trim().to_string(), ExtractionMethod::WholeCompletion));
    let (source, method) = picked;
    if source.trim().is_empty() {
        return Err(GatewayError::EmptyExtraction);
    }
    Ok(Extraction { source, method })
}

fn fenced_blocks(completion: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in completion.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match current.take() {
                Some((info, lines)) => blocks.push(FencedBlock {
                    info,
                    content: lines.join("\n"),
                }),
                None => current = Some((rest.trim().to_string(), Vec::new())),
            }
            continue;
        }
        if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    // Truncated completions often lose the closing fence; keep the content.
    if let Some((info, lines)) = current {
        blocks.push(FencedBlock {
            info,
            content: lines.join("\n"),
        });
    }
    blocks
}
