//! Shared domain types and pure value logic.
//!
//! Everything here is immutable after construction and free of I/O, so the
//! types can be shared and sent across worker threads without ceremony.

mod temperature;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use temperature::Temperature;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid temperature literal `{0}`")]
    InvalidTemperature(String),
    #[error("problem `{id}`: {reason}")]
    InvalidProblem { id: String, reason: String },
    #[error("candidate program is invalid: {0}")]
    InvalidCandidate(String),
}

/// Identifier of a programming language, lowercase-normalized.
///
/// The set is open-ended: any name with a registered runner config is valid
/// at execution time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(name: impl AsRef<str>) -> Self {
        LanguageId(name.as_ref().trim().to_ascii_lowercase())
    }

    pub fn python() -> Self {
        LanguageId::new("python")
    }

    pub fn lua() -> Self {
        LanguageId::new("lua")
    }

    pub fn cpp() -> Self {
        LanguageId::new("cpp")
    }

    pub fn java() -> Self {
        LanguageId::new("java")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Whether a code-fence info string (e.g. `py`, `c++`) names this language.
    pub fn matches_fence_info(&self, info: &str) -> bool {
        let token = info
            .split_whitespace()
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        if token == self.0 {
            return true;
        }
        match self.0.as_str() {
            "python" => matches!(token.as_str(), "py" | "python3"),
            "cpp" => matches!(token.as_str(), "c++" | "cxx" | "cc"),
            _ => false,
        }
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LanguageId {
    fn from(name: &str) -> Self {
        LanguageId::new(name)
    }
}

impl<'de> Deserialize<'de> for LanguageId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(LanguageId::new(raw))
    }
}

/// How a program consumes its test input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IoMode {
    /// The input is an argument tuple passed to a named entry function.
    FunctionCall,
    /// The input is raw text fed to the program on stdin.
    StdinProgram,
}

/// Ground-truth test used only for benchmark grading, never shown to the
/// selection pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceTest {
    /// Input/expected-output pair, compared after canonical normalization.
    Io { input: String, expected_output: String },
    /// Assertion script appended to the candidate; passes iff it exits 0.
    Assert { script: String },
}

/// One programming task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: String,
    /// The task text shown to the model when generating target-language code.
    pub prompt: String,
    /// Optional task text for the high-resource (source) side. Falls back to
    /// `prompt` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_prompt: Option<String>,
    pub target_language: LanguageId,
    #[serde(default = "LanguageId::python")]
    pub source_language: LanguageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_point: Option<String>,
    pub io_mode: IoMode,
    /// Optional absolute tolerance for float output comparison. Off by
    /// default: equality is exact bytes after canonical normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub float_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tests: Option<Vec<ReferenceTest>>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: &str| {
            Err(ModelError::InvalidProblem {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.trim().is_empty() {
            return fail("id must be non-empty");
        }
        if self.prompt.trim().is_empty() {
            return fail("prompt must be non-empty");
        }
        if self.io_mode == IoMode::FunctionCall && self.entry_point.is_none() {
            return fail("function-call io mode requires an entry_point");
        }
        Ok(())
    }

    /// Question text for source-language (reference) generation.
    pub fn source_question(&self) -> &str {
        self.source_prompt.as_deref().unwrap_or(&self.prompt)
    }
}

/// Provenance of a generated program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Greedy,
    Hedged,
    Reference,
}

/// A generated program plus its sampling provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateProgram {
    pub source: String,
    pub language: LanguageId,
    pub temperature: Temperature,
    pub sample_index: u32,
    pub origin: Origin,
}

impl CandidateProgram {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.source.trim().is_empty() {
            return Err(ModelError::InvalidCandidate(
                "source is empty after extraction".to_string(),
            ));
        }
        if self.origin == Origin::Greedy && !(self.temperature.is_zero() && self.sample_index == 0)
        {
            return Err(ModelError::InvalidCandidate(format!(
                "greedy origin requires temperature 0 and index 0, got {}#{}",
                self.temperature, self.sample_index
            )));
        }
        Ok(())
    }

    /// Stable artifact file stem, e.g. `0.7-2`.
    pub fn file_stem(&self) -> String {
        format!("{}-{}", self.temperature, self.sample_index)
    }
}

/// One generated test input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInput {
    /// Canonical text: an argument tuple literal in function-call mode, raw
    /// stdin text in stdin-program mode.
    pub payload: String,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStatus {
    Consensus,
    DiscardedTie,
    AllInvalid,
}

/// One input/output oracle pair, the language-agnostic transfer medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: TestInput,
    pub expected_output: Option<String>,
    /// Canonical output -> number of valid reference runs that produced it.
    pub vote_detail: BTreeMap<String, u32>,
    pub status: CaseStatus,
}

impl TestCase {
    pub fn consensus(input: TestInput, output: String, votes: BTreeMap<String, u32>) -> Self {
        TestCase {
            input,
            expected_output: Some(output),
            vote_detail: votes,
            status: CaseStatus::Consensus,
        }
    }

    pub fn discarded_tie(input: TestInput, votes: BTreeMap<String, u32>) -> Self {
        TestCase {
            input,
            expected_output: None,
            vote_detail: votes,
            status: CaseStatus::DiscardedTie,
        }
    }

    pub fn all_invalid(input: TestInput) -> Self {
        TestCase {
            input,
            expected_output: None,
            vote_detail: BTreeMap::new(),
            status: CaseStatus::AllInvalid,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.status == CaseStatus::Consensus
    }
}

/// The forged oracle suite for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub problem_id: String,
    pub cases: Vec<TestCase>,
    pub attempts_used: u32,
    pub final_temperature: Temperature,
}

impl TestSuite {
    /// Only consensus cases count toward the utility denominator `m`.
    pub fn usable_cases(&self) -> impl Iterator<Item = &TestCase> {
        self.cases.iter().filter(|c| c.is_usable())
    }

    pub fn usable_len(&self) -> usize {
        self.usable_cases().count()
    }
}

/// Pass rate of a candidate over the usable oracle cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityScore {
    pub passed: u32,
    pub valid: u32,
    pub value: f64,
}

impl UtilityScore {
    pub fn compute(passed: u32, valid: u32) -> Self {
        debug_assert!(passed <= valid, "passed {passed} exceeds valid {valid}");
        let value = if valid > 0 {
            f64::from(passed) / f64::from(valid)
        } else {
            0.0
        };
        UtilityScore { passed, valid, value }
    }

    pub fn zero() -> Self {
        UtilityScore::compute(0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionReason {
    MaxScore,
    TieLowerTemperature,
    AllZeroGreedyFallback,
    EmptySuiteGreedyFallback,
}

/// A candidate paired with its utility score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: CandidateProgram,
    pub score: UtilityScore,
}

/// Outcome of execution-based selection over a candidate pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: CandidateProgram,
    pub score: UtilityScore,
    pub reason: SelectionReason,
    /// Full scored pool, sorted by (value desc, temperature asc, index asc).
    pub ranking: Vec<ScoredCandidate>,
}

/// Exact byte equality of two canonical outputs.
pub fn canonical_compare(a: &str, b: &str) -> bool {
    a == b
}

/// Byte equality, optionally relaxed to an absolute float tolerance when both
/// sides parse as a single float.
pub fn canonical_compare_with_tolerance(a: &str, b: &str, tolerance: Option<f64>) -> bool {
    if canonical_compare(a, b) {
        return true;
    }
    match tolerance {
        Some(tol) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(y)) => (x - y).abs() <= tol,
            _ => false,
        },
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_compare_is_exact() {
        assert!(canonical_compare("42", "42"));
        assert!(!canonical_compare("42", "43"));
        // Distinct spellings of the same list never compare equal; the
        // canonical serializer always emits ", " so only one form can arise.
        assert!(!canonical_compare("[1, 2]", "[1,2]"));
    }

    #[test]
    fn tolerance_compare_only_bends_floats() {
        assert!(canonical_compare_with_tolerance("0.1", "0.10000001", Some(1e-6)));
        assert!(!canonical_compare_with_tolerance("0.1", "0.2", Some(1e-6)));
        assert!(!canonical_compare_with_tolerance("a", "b", Some(1e-6)));
        assert!(!canonical_compare_with_tolerance("0.1", "0.10000001", None));
    }

    #[test]
    fn greedy_candidate_invariant() {
        let ok = CandidateProgram {
            source: "return 1".to_string(),
            language: LanguageId::lua(),
            temperature: Temperature::zero(),
            sample_index: 0,
            origin: Origin::Greedy,
        };
        assert!(ok.validate().is_ok());

        let bad = CandidateProgram {
            temperature: Temperature::parse("0.7").unwrap(),
            ..ok.clone()
        };
        assert!(bad.validate().is_err());

        let empty = CandidateProgram {
            source: "  \n".to_string(),
            ..ok
        };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn function_call_requires_entry_point() {
        let mut problem = ProblemSpec {
            id: "p1".to_string(),
            prompt: "add two numbers".to_string(),
            source_prompt: None,
            target_language: LanguageId::lua(),
            source_language: LanguageId::python(),
            entry_point: None,
            io_mode: IoMode::FunctionCall,
            float_tolerance: None,
            reference_tests: None,
        };
        assert!(problem.validate().is_err());
        problem.entry_point = Some("add".to_string());
        assert!(problem.validate().is_ok());
        problem.io_mode = IoMode::StdinProgram;
        problem.entry_point = None;
        assert!(problem.validate().is_ok());
    }

    #[test]
    fn suite_usable_cases_filters_consensus() {
        let input = |i| TestInput {
            payload: format!("({i},)"),
            index: i,
        };
        let mut votes = BTreeMap::new();
        votes.insert("5".to_string(), 2);
        votes.insert("7".to_string(), 1);
        let suite = TestSuite {
            problem_id: "p".to_string(),
            cases: vec![
                TestCase::consensus(input(0), "5".to_string(), votes.clone()),
                TestCase::discarded_tie(input(1), votes),
                TestCase::all_invalid(input(2)),
            ],
            attempts_used: 1,
            final_temperature: Temperature::parse("0.5").unwrap(),
        };
        assert_eq!(suite.usable_len(), 1);
        assert!(suite.cases[1].expected_output.is_none());
        assert!(suite.cases[2].vote_detail.is_empty());
    }

    #[test]
    fn fence_info_aliases() {
        assert!(LanguageId::python().matches_fence_info("py"));
        assert!(LanguageId::python().matches_fence_info("Python3"));
        assert!(LanguageId::cpp().matches_fence_info("c++"));
        assert!(!LanguageId::lua().matches_fence_info("python"));
    }

    proptest! {
        // Adding one passing case never decreases the utility value.
        #[test]
        fn utility_value_is_monotone(passed in 0u32..200, extra in 0u32..200) {
            let valid = passed + extra;
            let before = UtilityScore::compute(passed, valid);
            let after = UtilityScore::compute(passed + 1, valid + 1);
            prop_assert!(after.value >= before.value - 1e-15);
            prop_assert!(before.value >= 0.0 && before.value <= 1.0);
        }

        #[test]
        fn utility_integer_identity(passed in 0u32..100, extra in 0u32..100) {
            let valid = passed + extra;
            let score = UtilityScore::compute(passed, valid);
            if valid > 0 {
                prop_assert!((score.value * f64::from(valid) - f64::from(passed)).abs() < 1e-9);
            } else {
                prop_assert_eq!(score.value, 0.0);
            }
        }
    }
}
