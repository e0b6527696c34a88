//! Shared fixtures for the integration tests: a fast python sandbox and a
//! script builder for fully controlled mock runs.
#![allow(dead_code)]

use codechemist::forge::ForgeConfig;
use codechemist::gateway::{MockBackend, MockEntry, MockScript, TemplateId};
use codechemist::model::{IoMode, LanguageId, ProblemSpec, Temperature};
use codechemist::sandbox::{default_python, RunnerConfig, RunnerRegistry, Sandbox};

/// Python with site imports disabled; startup drops from ~45ms to ~12ms.
pub fn fast_python() -> RunnerConfig {
    RunnerConfig {
        run_command: vec!["python3".into(), "-S".into(), "{file}".into()],
        run_timeout_secs: 10.0,
        ..default_python()
    }
}

pub fn fast_sandbox(jobs: usize) -> Sandbox {
    let mut registry = RunnerRegistry::default();
    registry.insert(fast_python());
    Sandbox::new(registry, jobs)
}

pub fn python_problem(id: &str, entry: &str) -> ProblemSpec {
    ProblemSpec {
        id: id.to_string(),
        prompt: format!("def {entry}(a, b):\n    \"\"\"Add a and b.\"\"\"\n"),
        source_prompt: None,
        target_language: LanguageId::python(),
        source_language: LanguageId::python(),
        entry_point: Some(entry.to_string()),
        io_mode: IoMode::FunctionCall,
        float_tolerance: None,
        reference_tests: None,
    }
}

/// Builder for mock scripts keyed the way the pipeline issues requests.
pub struct ScriptBuilder {
    script: MockScript,
    problem: String,
    language: LanguageId,
    ref_temperature: Temperature,
    codegen: TemplateId,
    testgen: TemplateId,
}

impl ScriptBuilder {
    pub fn for_problem(problem: &ProblemSpec, forge: &ForgeConfig) -> Self {
        let (codegen, testgen) = match problem.io_mode {
            IoMode::FunctionCall => (TemplateId::MultiplCodegen, TemplateId::MultiplTestgen),
            IoMode::StdinProgram => (TemplateId::LcbCodegen, TemplateId::LcbTestgen),
        };
        ScriptBuilder {
            script: MockScript::default(),
            problem: problem.id.clone(),
            language: problem.source_language.clone(),
            ref_temperature: forge.initial_temperature.clone(),
            codegen,
            testgen,
        }
    }

    /// Registers `sources` as the reference completions (samples 0..len).
    pub fn references(mut self, sources: &[&str]) -> Self {
        for (i, source) in sources.iter().enumerate() {
            self.script.push(MockEntry {
                template: self.codegen,
                problem: self.problem.clone(),
                language: self.language.clone(),
                temperature: self.ref_temperature.clone(),
                sample: i as u32,
                trial: None,
                completion: format!("```python\n{source}\n```"),
            });
        }
        self
    }

    /// Registers the test-input completion for one forge attempt.
    pub fn inputs(mut self, attempt: u32, lines: &[&str]) -> Self {
        self.script.push(MockEntry {
            template: self.testgen,
            problem: self.problem.clone(),
            language: self.language.clone(),
            temperature: attempt_temperature(&self.ref_temperature, attempt),
            sample: attempt,
            trial: None,
            completion: format!("```\n{}\n```", lines.join("\n")),
        });
        self
    }

    /// Registers one target-language candidate completion.
    pub fn candidate(mut self, temperature: &str, sample: u32, source: &str) -> Self {
        self.script.push(MockEntry {
            template: self.codegen,
            problem: self.problem.clone(),
            language: self.language.clone(),
            temperature: Temperature::parse(temperature).unwrap(),
            sample,
            trial: None,
            completion: format!("```python\n{source}\n```"),
        });
        self
    }

    pub fn build(self) -> MockScript {
        self.script
    }

    pub fn backend(self) -> MockBackend {
        MockBackend::new("mock-test-model", self.build())
    }
}

/// Temperature the forge uses for attempt `n` under the default +1/cap-2
/// escalation.
pub fn attempt_temperature(initial: &Temperature, attempt: u32) -> Temperature {
    let step = Temperature::parse("1").unwrap();
    let cap = Temperature::parse("2").unwrap();
    let mut temp = initial.clone();
    for _ in 0..attempt {
        temp = temp.escalate(&step, &cap);
    }
    temp
}
