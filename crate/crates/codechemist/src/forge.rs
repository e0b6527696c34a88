//! Oracle forging: synthesize a consensus test suite from high-resource
//! reference executions.
//!
//! References are generated once; inputs are generated per attempt at an
//! escalating temperature until enough consensus cases are held or the
//! attempt budget runs out. Voting is a deterministic fold over canonical
//! outputs keyed by input, so the executor's scheduling never changes an
//! oracle.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    extract_code, sample_batch_partial, Backend, GatewayError, PromptLibrary, RequestTag,
    SampleRequest,
};
use crate::model::{
    CandidateProgram, IoMode, Origin, ProblemSpec, Temperature, TestCase, TestInput,
    TestSuite,
};
use crate::sandbox::{classify, wrap_entry_call, Sandbox, SandboxError};
use crate::sandbox::{parse_argument_tuple, ArgValue};

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("forge config invalid: {0}")]
    ConfigInvalid(String),
    #[error("reference generation for `{problem}` failed: {detail}")]
    ReferenceGenerationFailed {
        problem: String,
        detail: String,
        #[source]
        source: Option<GatewayError>,
    },
    #[error("test-input generation for `{problem}` parsed zero inputs")]
    ParseYieldedZeroInputs { problem: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Knobs for the forging stage.
///
/// `reference_count` is the paper's `h`, `target_cases` its `n`. The
/// escalation step reads the temperature bump literally as +1.0, clamped at
/// the cap; both are configurable since real APIs rarely accept 2.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForgeConfig {
    pub reference_count: u32,
    pub target_cases: u32,
    pub initial_temperature: Temperature,
    pub max_attempts: u32,
    pub escalation_step: Temperature,
    pub temperature_cap: Temperature,
    /// Extra completions requested when a reference extraction comes back
    /// empty.
    pub reference_retry_limit: u32,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            reference_count: 10,
            target_cases: 10,
            initial_temperature: Temperature::parse("0.5").expect("static literal"),
            max_attempts: 3,
            escalation_step: Temperature::parse("1").expect("static literal"),
            temperature_cap: Temperature::parse("2").expect("static literal"),
            reference_retry_limit: 2,
        }
    }
}

impl ForgeConfig {
    pub fn validate(&self) -> Result<(), ForgeError> {
        if self.reference_count < 1 {
            return Err(ForgeError::ConfigInvalid("reference_count must be >= 1".into()));
        }
        if self.target_cases < 1 {
            return Err(ForgeError::ConfigInvalid("target_cases must be >= 1".into()));
        }
        if self.max_attempts < 1 {
            return Err(ForgeError::ConfigInvalid("max_attempts must be >= 1".into()));
        }
        if self.temperature_cap < self.initial_temperature {
            return Err(ForgeError::ConfigInvalid(
                "temperature_cap must be >= initial_temperature".into(),
            ));
        }
        Ok(())
    }
}

/// Generates `h` reference candidates in the problem's source language.
/// Empty extractions are dropped and re-requested up to the retry limit.
pub fn generate_reference_set(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    problem: &ProblemSpec,
    library: &PromptLibrary,
    config: &ForgeConfig,
) -> Result<Vec<CandidateProgram>, ForgeError> {
    config.validate()?;
    sandbox.runner(&problem.source_language)?;
    let template = library.codegen_for(problem);
    let want = config.reference_count;
    let mut references = Vec::with_capacity(want as usize);
    let mut next_index = 0;
    let mut budget = want + config.reference_retry_limit;
    let mut last_error = None;
    while (references.len() as u32) < want && budget > 0 {
        let count = (want - references.len() as u32).min(budget);
        let request = SampleRequest {
            problem,
            template,
            language: problem.source_language.clone(),
            question: problem.source_question(),
            temperature: config.initial_temperature.clone(),
            count,
            origin: Origin::Reference,
            permit_partial: true,
            index_base: next_index,
        };
        let (batch, error) = sample_batch_partial(backend, sandbox.pool(), &request)?;
        next_index += count;
        budget -= count;
        references.extend(batch);
        if let Some(error) = error {
            last_error = Some(error);
        }
    }
    if (references.len() as u32) < want {
        return Err(ForgeError::ReferenceGenerationFailed {
            problem: problem.id.clone(),
            detail: format!(
                "got {}/{} non-empty reference completions",
                references.len(),
                want
            ),
            source: last_error,
        });
    }
    Ok(references)
}

/// Parses a test-generation completion into at most `n` distinct inputs.
///
/// Function-call problems expect one argument tuple per line; stdin problems
/// expect blocks separated by blank lines. Duplicates (after canonical
/// normalization) collapse; lines that fail to parse are skipped.
pub fn generate_inputs(
    backend: &dyn Backend,
    problem: &ProblemSpec,
    library: &PromptLibrary,
    n: u32,
    temperature: &Temperature,
    attempt: u32,
) -> Result<Vec<TestInput>, ForgeError> {
    let template = library.testgen_for(problem);
    let prompt = template.render(problem.source_question(), &problem.target_language)?;
    let mut request =
        crate::gateway::CompletionRequest::new(prompt, temperature.clone());
    // The attempt number keys the request so retries can draw fresh inputs.
    request.seed = Some(u64::from(attempt));
    request.tag = Some(RequestTag {
        template: template.id,
        problem_id: problem.id.clone(),
        language: problem.source_language.clone(),
        sample_index: attempt,
        trial: None,
    });
    let completion = backend.complete(&request)?;
    let block = match extract_code(&completion, &problem.source_language) {
        Ok(extraction) => extraction.source,
        Err(GatewayError::EmptyExtraction) => {
            return Err(ForgeError::ParseYieldedZeroInputs {
                problem: problem.id.clone(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let inputs = parse_inputs(&block, problem.io_mode, n);
    if inputs.is_empty() {
        return Err(ForgeError::ParseYieldedZeroInputs {
            problem: problem.id.clone(),
        });
    }
    Ok(inputs)
}

fn parse_inputs(block: &str, io_mode: IoMode, n: u32) -> Vec<TestInput> {
    let mut seen = HashSet::new();
    let mut inputs = Vec::new();
    let mut push = |payload: String| {
        if inputs.len() < n as usize && seen.insert(payload.clone()) {
            inputs.push(TestInput {
                payload,
                index: inputs.len() as u32,
            });
        }
    };
    match io_mode {
        IoMode::FunctionCall => {
            for line in block.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
                    continue;
                }
                if let Ok(args) = parse_argument_tuple(line) {
                    push(ArgValue::Tuple(args).literal());
                }
            }
        }
        IoMode::StdinProgram => {
            for chunk in block.split("\n\n") {
                let trimmed = chunk.trim();
                if !trimmed.is_empty() {
                    push(trimmed.to_string());
                }
            }
        }
    }
    inputs
}

/// Majority-vote decision over the valid canonical outputs for one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoteDecision {
    /// Strictly unique most frequent output.
    Consensus(String),
    /// The maximum count is shared; the pair is discarded.
    Tie,
    /// No valid execution at all.
    AllInvalid,
}

/// Counts votes and decides. `None` entries are invalid executions.
pub fn tally_votes<'a, I>(outputs: I) -> (BTreeMap<String, u32>, VoteDecision)
where
    I: IntoIterator<Item = Option<&'a str>>,
{
    let mut votes: BTreeMap<String, u32> = BTreeMap::new();
    for output in outputs.into_iter().flatten() {
        *votes.entry(output.to_string()).or_insert(0) += 1;
    }
    let decision = match votes.iter().max_by_key(|(_, count)| **count) {
        None => VoteDecision::AllInvalid,
        Some((winner, max_count)) => {
            let contenders = votes.values().filter(|c| *c == max_count).count();
            if contenders == 1 {
                VoteDecision::Consensus(winner.clone())
            } else {
                VoteDecision::Tie
            }
        }
    };
    (votes, decision)
}

/// Executes every reference on every input and folds the outputs into test
/// cases by majority vote.
pub fn build_oracles(
    sandbox: &Sandbox,
    references: &[CandidateProgram],
    inputs: &[TestInput],
    problem: &ProblemSpec,
) -> Result<Vec<TestCase>, ForgeError> {
    debug_assert!(!references.is_empty() && !inputs.is_empty());
    let runner = sandbox.runner(&problem.source_language)?;

    // Pre-wrap sequentially so input parse failures surface deterministically.
    let mut jobs: Vec<(usize, usize, String, Option<String>)> = Vec::new();
    let mut unrunnable: HashSet<usize> = HashSet::new();
    for (input_idx, input) in inputs.iter().enumerate() {
        for (ref_idx, reference) in references.iter().enumerate() {
            match problem.io_mode {
                IoMode::FunctionCall => {
                    let entry = problem.entry_point.as_deref().unwrap_or_default();
                    match wrap_entry_call(reference, entry, input) {
                        Ok(source) => jobs.push((input_idx, ref_idx, source, None)),
                        Err(SandboxError::InputParseFailure { .. })
                        | Err(SandboxError::NoWrapperTemplate(_)) => {
                            // The input cannot be executed in this language at
                            // all; the whole column is invalid.
                            unrunnable.insert(input_idx);
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                IoMode::StdinProgram => jobs.push((
                    input_idx,
                    ref_idx,
                    reference.source.clone(),
                    Some(input.payload.clone()),
                )),
            }
        }
    }

    let outcomes = sandbox.pool().map(jobs, |(input_idx, ref_idx, source, stdin)| {
        let result = sandbox.execute(runner, &source, stdin.as_deref());
        (input_idx, ref_idx, result)
    });

    // Fold by input ordinal; reference order within an input is irrelevant to
    // the vote but kept stable anyway.
    let mut per_input: Vec<Vec<Option<String>>> = vec![Vec::new(); inputs.len()];
    for (input_idx, _ref_idx, result) in outcomes {
        let outcome = result.map_err(fatal_only)?;
        let mark = classify(&outcome);
        per_input[input_idx].push(if mark.valid {
            outcome.canonical_output
        } else {
            None
        });
    }

    let mut cases = Vec::with_capacity(inputs.len());
    for (input_idx, input) in inputs.iter().enumerate() {
        if unrunnable.contains(&input_idx) {
            cases.push(TestCase::all_invalid(input.clone()));
            continue;
        }
        let outputs = per_input[input_idx].iter().map(Option::as_deref);
        let (votes, decision) = tally_votes(outputs);
        cases.push(match decision {
            VoteDecision::Consensus(output) => TestCase::consensus(input.clone(), output, votes),
            VoteDecision::Tie => TestCase::discarded_tie(input.clone(), votes),
            VoteDecision::AllInvalid => TestCase::all_invalid(input.clone()),
        });
    }
    Ok(cases)
}

fn fatal_only(err: SandboxError) -> ForgeError {
    // Toolchain absence aborts the forge; anything else already surfaced as a
    // classified outcome.
    ForgeError::Sandbox(err)
}

/// Runs the whole forging loop: generate inputs, build oracles, accumulate
/// consensus cases, escalate the temperature between attempts.
///
/// A suite with zero consensus cases is returned, not an error; the selector
/// falls back to the greedy candidate for it.
pub fn forge_test_suite(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    problem: &ProblemSpec,
    library: &PromptLibrary,
    config: &ForgeConfig,
) -> Result<TestSuite, ForgeError> {
    config.validate()?;
    problem
        .validate()
        .map_err(|e| ForgeError::ConfigInvalid(e.to_string()))?;
    let references = generate_reference_set(backend, sandbox, problem, library, config)?;

    let mut temperature = config.initial_temperature.clone();
    let mut cases: Vec<TestCase> = Vec::new();
    let mut seen_payloads: HashSet<String> = HashSet::new();
    let mut attempts_used = 0;
    let mut final_temperature = temperature.clone();

    for attempt in 0..config.max_attempts {
        attempts_used = attempt + 1;
        final_temperature = temperature.clone();
        let usable = cases.iter().filter(|c| c.is_usable()).count() as u32;
        let wanted = config.target_cases - usable;
        match generate_inputs(backend, problem, library, config.target_cases, &temperature, attempt)
        {
            Ok(inputs) => {
                let fresh: Vec<TestInput> = inputs
                    .into_iter()
                    .filter(|i| seen_payloads.insert(i.payload.clone()))
                    .enumerate()
                    .map(|(offset, mut input)| {
                        input.index = cases.len() as u32 + offset as u32;
                        input
                    })
                    .collect();
                if !fresh.is_empty() {
                    let mut new_cases = build_oracles(sandbox, &references, &fresh, problem)?;
                    // Cap consensus accumulation at the target.
                    let mut room = wanted;
                    new_cases.retain(|case| {
                        if case.is_usable() {
                            if room == 0 {
                                return false;
                            }
                            room -= 1;
                        }
                        true
                    });
                    cases.extend(new_cases);
                }
            }
            Err(ForgeError::ParseYieldedZeroInputs { .. }) => {
                log::debug!(
                    "attempt {} for `{}` parsed zero inputs; escalating",
                    attempt + 1,
                    problem.id
                );
            }
            Err(fatal) => return Err(fatal),
        }
        let usable = cases.iter().filter(|c| c.is_usable()).count() as u32;
        if usable >= config.target_cases {
            break;
        }
        temperature = temperature.escalate(&config.escalation_step, &config.temperature_cap);
    }

    let suite = TestSuite {
        problem_id: problem.id.clone(),
        cases,
        attempts_used,
        final_temperature,
    };
    if suite.usable_len() == 0 {
        log::warn!(
            "suite for `{}` has zero consensus cases after {} attempts",
            problem.id,
            suite.attempts_used
        );
    }
    Ok(suite)
}
