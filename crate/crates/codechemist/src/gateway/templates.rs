//! Prompt templates and rendering.
//!
//! The four built-in template bodies live as fixture files under the crate's
//! `prompts/` directory and are embedded at compile time. A checksum test
//! pins them; any edit must be deliberate.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{IoMode, LanguageId, ProblemSpec};

use super::GatewayError;

pub const MULTIPL_CODEGEN_BODY: &str = include_str!("../../prompts/multipl-codegen.txt");
pub const MULTIPL_TESTGEN_BODY: &str = include_str!("../../prompts/multipl-testgen.txt");
pub const LCB_CODEGEN_BODY: &str = include_str!("../../prompts/lcb-codegen.txt");
pub const LCB_TESTGEN_BODY: &str = include_str!("../../prompts/lcb-testgen.txt");

/// The question slot. Exactly one occurrence is required per template.
const QUESTION_PLACEHOLDER: &str = "{}";
/// Optional slot for the language being generated (lcb-codegen only).
const LANGUAGE_PLACEHOLDER: &str = "{language}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    MultiplCodegen,
    MultiplTestgen,
    LcbCodegen,
    LcbTestgen,
}

impl TemplateId {
    pub fn all() -> [TemplateId; 4] {
        [
            TemplateId::MultiplCodegen,
            TemplateId::MultiplTestgen,
            TemplateId::LcbCodegen,
            TemplateId::LcbTestgen,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::MultiplCodegen => "multipl-codegen",
            TemplateId::MultiplTestgen => "multipl-testgen",
            TemplateId::LcbCodegen => "lcb-codegen",
            TemplateId::LcbTestgen => "lcb-testgen",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(id: TemplateId) -> Self {
        let body = match id {
            TemplateId::MultiplCodegen => MULTIPL_CODEGEN_BODY,
            TemplateId::MultiplTestgen => MULTIPL_TESTGEN_BODY,
            TemplateId::LcbCodegen => LCB_CODEGEN_BODY,
            TemplateId::LcbTestgen => LCB_TESTGEN_BODY,
        };
        PromptTemplate { id, body: body.to_string() }
    }

    pub fn from_body(id: TemplateId, body: impl Into<String>) -> Result<Self, GatewayError> {
        let template = PromptTemplate { id, body: body.into() };
        template.validate()?;
        Ok(template)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.body.matches(QUESTION_PLACEHOLDER).count() {
            0 => Err(GatewayError::TemplateMissingPlaceholder(self.id.to_string())),
            1 => Ok(()),
            _ => Err(GatewayError::TemplateAmbiguousPlaceholder(self.id.to_string())),
        }
    }

    /// Substitutes the question slot (and the language slot where the
    /// template has one), leaving every other byte untouched.
    pub fn render(&self, question: &str, language: &LanguageId) -> Result<String, GatewayError> {
        self.validate()?;
        let rendered = self.body.replacen(QUESTION_PLACEHOLDER, question, 1);
        Ok(rendered.replace(LANGUAGE_PLACEHOLDER, language.as_str()))
    }

    /// SHA-256 of the template body, hex-encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.body.as_bytes()))
    }
}

/// Renders the template with the problem's task text as the question.
pub fn render_prompt(
    template: &PromptTemplate,
    problem: &ProblemSpec,
) -> Result<String, GatewayError> {
    template.render(&problem.prompt, &problem.target_language)
}

/// The resolved set of templates used by a run. Defaults to the built-in
/// bodies; individual templates can be overridden from a prompts directory
/// holding `<template-id>.txt` files.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    codegen_fn: PromptTemplate,
    testgen_fn: PromptTemplate,
    codegen_stdin: PromptTemplate,
    testgen_stdin: PromptTemplate,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        PromptLibrary {
            codegen_fn: PromptTemplate::builtin(TemplateId::MultiplCodegen),
            testgen_fn: PromptTemplate::builtin(TemplateId::MultiplTestgen),
            codegen_stdin: PromptTemplate::builtin(TemplateId::LcbCodegen),
            testgen_stdin: PromptTemplate::builtin(TemplateId::LcbTestgen),
        }
    }
}

impl PromptLibrary {
    /// Loads overrides from `<dir>/<template-id>.txt`; missing files keep the
    /// built-in body.
    pub fn from_dir(dir: &Path) -> Result<Self, GatewayError> {
        let mut library = PromptLibrary::default();
        for id in TemplateId::all() {
            let path = dir.join(format!("{id}.txt"));
            if path.is_file() {
                let body = std::fs::read_to_string(&path)?;
                let template = PromptTemplate::from_body(id, body)?;
                match id {
                    TemplateId::MultiplCodegen => library.codegen_fn = template,
                    TemplateId::MultiplTestgen => library.testgen_fn = template,
                    TemplateId::LcbCodegen => library.codegen_stdin = template,
                    TemplateId::LcbTestgen => library.testgen_stdin = template,
                }
            }
        }
        Ok(library)
    }

    /// Function-call problems use the MultiPL-style templates, stdin problems
    /// the LiveCodeBench-style ones.
    pub fn codegen_for(&self, problem: &ProblemSpec) -> &PromptTemplate {
        match problem.io_mode {
            IoMode::FunctionCall => &self.codegen_fn,
            IoMode::StdinProgram => &self.codegen_stdin,
        }
    }

    pub fn testgen_for(&self, problem: &ProblemSpec) -> &PromptTemplate {
        match problem.io_mode {
            IoMode::FunctionCall => &self.testgen_fn,
            IoMode::StdinProgram => &self.testgen_stdin,
        }
    }
}
