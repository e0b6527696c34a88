//! Hedged sampling and execution-based selection.
//!
//! A candidate pool is drawn at several temperatures, always including the
//! greedy anchor. Each candidate's utility is its pass rate over the usable
//! oracle cases; the argmax wins, ties go to the lower temperature, and an
//! all-zero or empty-suite pool falls back to the greedy candidate.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forge::{forge_test_suite, ForgeConfig, ForgeError};
use crate::gateway::{sample_batch, Backend, GatewayError, PromptLibrary, SampleRequest};
use crate::model::{
    canonical_compare_with_tolerance, CandidateProgram, IoMode, Origin, ProblemSpec,
    ScoredCandidate, Selection, SelectionReason, Temperature, TestSuite, UtilityScore,
};
use crate::sandbox::{wrap_entry_call, ExecStatus, Sandbox, SandboxError};

#[derive(Debug, Error)]
pub enum HedgeError {
    #[error("temperature plan invalid: {0}")]
    PlanInvalid(String),
    #[error("candidate pool for `{0}` is missing its greedy anchor")]
    MissingGreedyAnchor(String),
    #[error("pool has {pool} candidates but {scores} scores")]
    PoolScoreLengthMismatch { pool: usize, scores: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBucket {
    pub temperature: Temperature,
    pub count: u32,
}

/// Ordered temperature buckets. Exactly one bucket must sit at temperature
/// zero: the hedge anchor that guarantees a fallback candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PlanBucket>", into = "Vec<PlanBucket>")]
pub struct TemperaturePlan {
    buckets: Vec<PlanBucket>,
}

impl TemperaturePlan {
    pub fn new(buckets: Vec<PlanBucket>) -> Result<Self, HedgeError> {
        if buckets.is_empty() {
            return Err(HedgeError::PlanInvalid("plan has no buckets".into()));
        }
        if buckets.iter().any(|b| b.count == 0) {
            return Err(HedgeError::PlanInvalid("bucket counts must be >= 1".into()));
        }
        let zero_buckets = buckets.iter().filter(|b| b.temperature.is_zero()).count();
        if zero_buckets != 1 {
            return Err(HedgeError::PlanInvalid(format!(
                "exactly one temperature-0 bucket required, found {zero_buckets}"
            )));
        }
        for pair in buckets.windows(2) {
            if pair[0].temperature == pair[1].temperature {
                return Err(HedgeError::PlanInvalid(format!(
                    "duplicate bucket temperature {}",
                    pair[0].temperature
                )));
            }
        }
        Ok(TemperaturePlan { buckets })
    }

    /// Temperatures 0, 0.7, 0.9, 1.1 with 1, 3, 3, 3 samples.
    pub fn default_paper() -> Self {
        let bucket = |t: &str, count| PlanBucket {
            temperature: Temperature::parse(t).expect("static literal"),
            count,
        };
        TemperaturePlan::new(vec![
            bucket("0", 1),
            bucket("0.7", 3),
            bucket("0.9", 3),
            bucket("1.1", 3),
        ])
        .expect("default plan is valid")
    }

    /// Parses `"0:1,0.7:3,0.9:3,1.1:3"`.
    pub fn parse(text: &str) -> Result<Self, HedgeError> {
        let mut buckets = Vec::new();
        for part in text.split(',') {
            let (temp, count) = part
                .split_once(':')
                .ok_or_else(|| HedgeError::PlanInvalid(format!("bucket `{part}` is not T:N")))?;
            buckets.push(PlanBucket {
                temperature: Temperature::parse(temp.trim())
                    .map_err(|e| HedgeError::PlanInvalid(e.to_string()))?,
                count: count
                    .trim()
                    .parse()
                    .map_err(|_| HedgeError::PlanInvalid(format!("bad count in `{part}`")))?,
            });
        }
        TemperaturePlan::new(buckets)
    }

    pub fn buckets(&self) -> &[PlanBucket] {
        &self.buckets
    }

    pub fn total(&self) -> u32 {
        self.buckets.iter().map(|b| b.count).sum()
    }
}

impl Default for TemperaturePlan {
    fn default() -> Self {
        TemperaturePlan::default_paper()
    }
}

impl TryFrom<Vec<PlanBucket>> for TemperaturePlan {
    type Error = String;

    fn try_from(buckets: Vec<PlanBucket>) -> Result<Self, String> {
        TemperaturePlan::new(buckets).map_err(|e| e.to_string())
    }
}

impl From<TemperaturePlan> for Vec<PlanBucket> {
    fn from(plan: TemperaturePlan) -> Self {
        plan.buckets
    }
}

/// The target-language candidates drawn for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub candidates: Vec<CandidateProgram>,
    pub plan: TemperaturePlan,
    pub problem_id: String,
}

impl CandidatePool {
    pub fn validate(&self) -> Result<(), HedgeError> {
        for bucket in self.plan.buckets() {
            let have = self
                .candidates
                .iter()
                .filter(|c| c.temperature == bucket.temperature)
                .count() as u32;
            if have != bucket.count {
                return Err(HedgeError::PlanInvalid(format!(
                    "bucket {} expects {} candidates, pool has {have}",
                    bucket.temperature, bucket.count
                )));
            }
        }
        if self.candidates.len() as u32 != self.plan.total() {
            return Err(HedgeError::PlanInvalid(format!(
                "pool size {} does not match plan total {}",
                self.candidates.len(),
                self.plan.total()
            )));
        }
        self.greedy()?;
        Ok(())
    }

    pub fn greedy(&self) -> Result<&CandidateProgram, HedgeError> {
        self.candidates
            .iter()
            .find(|c| c.origin == Origin::Greedy)
            .ok_or_else(|| HedgeError::MissingGreedyAnchor(self.problem_id.clone()))
    }
}

/// Draws one batch per plan bucket in the target language.
pub fn hedged_sample(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    problem: &ProblemSpec,
    plan: &TemperaturePlan,
    library: &PromptLibrary,
) -> Result<CandidatePool, HedgeError> {
    let template = library.codegen_for(problem);
    let mut candidates = Vec::with_capacity(plan.total() as usize);
    for bucket in plan.buckets() {
        let request = SampleRequest {
            problem,
            template,
            language: problem.target_language.clone(),
            question: &problem.prompt,
            temperature: bucket.temperature.clone(),
            count: bucket.count,
            origin: Origin::Hedged,
            permit_partial: false,
            index_base: 0,
        };
        candidates.extend(sample_batch(backend, sandbox.pool(), &request)?);
    }
    let pool = CandidatePool {
        candidates,
        plan: plan.clone(),
        problem_id: problem.id.clone(),
    };
    pool.validate()?;
    Ok(pool)
}

/// Pass rate of one candidate over the suite's usable cases.
///
/// For compiled languages the first case is probed alone: a compile failure
/// short-circuits the rest, everything fails anyway.
pub fn score_candidate(
    sandbox: &Sandbox,
    candidate: &CandidateProgram,
    suite: &TestSuite,
    problem: &ProblemSpec,
) -> Result<UtilityScore, HedgeError> {
    let usable: Vec<_> = suite.usable_cases().collect();
    let m = usable.len() as u32;
    if m == 0 {
        return Ok(UtilityScore::zero());
    }
    let runner = sandbox.runner(&candidate.language)?;

    let mut sources = Vec::with_capacity(usable.len());
    for case in &usable {
        match problem.io_mode {
            IoMode::FunctionCall => {
                let entry = problem.entry_point.as_deref().unwrap_or_default();
                match wrap_entry_call(candidate, entry, &case.input) {
                    Ok(wrapped) => sources.push(Some((wrapped, None))),
                    // An oracle input the target language cannot express is a
                    // failed case, not a fatal error.
                    Err(SandboxError::InputParseFailure { .. })
                    | Err(SandboxError::NoWrapperTemplate(_)) => sources.push(None),
                    Err(e) => return Err(e.into()),
                }
            }
            IoMode::StdinProgram => {
                sources.push(Some((candidate.source.clone(), Some(case.input.payload.clone()))))
            }
        }
    }

    let mut outcomes: Vec<Option<crate::sandbox::ExecutionOutcome>> = vec![None; usable.len()];
    let mut start = 0;
    if runner.compile_command.is_some() {
        if let Some(first) = sources.iter().position(Option::is_some) {
            let (source, stdin) = sources[first].as_ref().expect("position found Some");
            let outcome = sandbox.execute(runner, source, stdin.as_deref())?;
            let compile_failed = outcome.status == ExecStatus::CompileFail;
            outcomes[first] = Some(outcome);
            start = first + 1;
            if compile_failed {
                return Ok(UtilityScore::compute(0, m));
            }
        }
    }

    let jobs: Vec<(usize, String, Option<String>)> = sources
        .into_iter()
        .enumerate()
        .skip(start)
        .filter_map(|(i, s)| s.map(|(source, stdin)| (i, source, stdin)))
        .collect();
    for (i, result) in sandbox
        .pool()
        .map(jobs, |(i, source, stdin)| {
            (i, sandbox.execute(runner, &source, stdin.as_deref()))
        })
        .into_iter()
        .map(|(i, r)| (i, r))
    {
        outcomes[i] = Some(result?);
    }

    let mut passed = 0;
    for (case, outcome) in usable.iter().zip(outcomes.iter()) {
        let Some(outcome) = outcome else { continue };
        if outcome.status != ExecStatus::Ok {
            continue;
        }
        let expected = case.expected_output.as_deref().expect("usable case");
        let actual = outcome.canonical_output.as_deref().unwrap_or_default();
        if canonical_compare_with_tolerance(actual, expected, problem.float_tolerance) {
            passed += 1;
        }
    }
    Ok(UtilityScore::compute(passed, m))
}

/// Picks the best candidate from scored pool members.
///
/// Ranking order is (value desc, temperature asc, sample index asc). The
/// reason records why: a strict argmax, a tie resolved by temperature, or one
/// of the two greedy fallbacks.
pub fn select_best(pool: &CandidatePool, scores: &[UtilityScore]) -> Result<Selection, HedgeError> {
    if scores.len() != pool.candidates.len() {
        return Err(HedgeError::PoolScoreLengthMismatch {
            pool: pool.candidates.len(),
            scores: scores.len(),
        });
    }
    let greedy = pool.greedy()?.clone();

    let mut ranking: Vec<ScoredCandidate> = pool
        .candidates
        .iter()
        .zip(scores.iter())
        .map(|(candidate, score)| ScoredCandidate {
            candidate: candidate.clone(),
            score: *score,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.score
            .value
            .total_cmp(&a.score.value)
            .then_with(|| a.candidate.temperature.cmp(&b.candidate.temperature))
            .then_with(|| a.candidate.sample_index.cmp(&b.candidate.sample_index))
    });

    // An all-invalid suite leaves every score with valid = 0.
    if scores.iter().all(|s| s.valid == 0) {
        let score = scores[pool
            .candidates
            .iter()
            .position(|c| c.origin == Origin::Greedy)
            .expect("greedy exists")];
        return Ok(Selection {
            chosen: greedy,
            score,
            reason: SelectionReason::EmptySuiteGreedyFallback,
            ranking,
        });
    }
    if scores.iter().all(|s| s.value == 0.0) {
        let score = scores[pool
            .candidates
            .iter()
            .position(|c| c.origin == Origin::Greedy)
            .expect("greedy exists")];
        return Ok(Selection {
            chosen: greedy,
            score,
            reason: SelectionReason::AllZeroGreedyFallback,
            ranking,
        });
    }

    let top = ranking[0].clone();
    let strict = ranking
        .get(1)
        .map(|second| top.score.value > second.score.value)
        .unwrap_or(true);
    Ok(Selection {
        chosen: top.candidate,
        score: top.score,
        reason: if strict {
            SelectionReason::MaxScore
        } else {
            SelectionReason::TieLowerTemperature
        },
        ranking,
    })
}

/// Options for a full pipeline run.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Persist candidates, suite, scores and selection under this directory.
    pub artifact_dir: Option<PathBuf>,
    /// Reuse a previously forged suite instead of forging again. The file is
    /// written after forging when it does not exist yet.
    pub suite_cache: Option<PathBuf>,
    /// Stop scoring once a candidate passes every case. Off by default so
    /// rankings stay complete; when it fires, unscored candidates are absent
    /// from the ranking.
    pub short_circuit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub selection: Selection,
    pub suite: TestSuite,
    pub pool: CandidatePool,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("forge stage failed for `{problem}`: {source}")]
    Forge {
        problem: String,
        #[source]
        source: ForgeError,
    },
    #[error("sampling stage failed for `{problem}`: {source}")]
    Sample {
        problem: String,
        #[source]
        source: HedgeError,
    },
    #[error("scoring stage failed for `{problem}`: {source}")]
    Score {
        problem: String,
        #[source]
        source: HedgeError,
    },
    #[error("artifact persistence failed for `{problem}`: {source}")]
    Persist {
        problem: String,
        #[source]
        source: std::io::Error,
    },
}

/// Forge, sample, score, select: Algorithm 1 end to end for one problem.
pub fn solve(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    problem: &ProblemSpec,
    forge_config: &ForgeConfig,
    plan: &TemperaturePlan,
    library: &PromptLibrary,
    options: &SolveOptions,
) -> Result<SolveOutput, SolveError> {
    let problem_id = problem.id.clone();
    let forge_err = |source| SolveError::Forge {
        problem: problem_id.clone(),
        source,
    };

    let suite = match &options.suite_cache {
        Some(path) if path.is_file() => load_suite(path).map_err(forge_err)?,
        cache => {
            let suite = forge_test_suite(backend, sandbox, problem, library, forge_config)
                .map_err(forge_err)?;
            if let Some(path) = cache {
                save_json(path, &suite).map_err(|source| SolveError::Persist {
                    problem: problem_id.clone(),
                    source,
                })?;
            }
            suite
        }
    };

    let pool = hedged_sample(backend, sandbox, problem, plan, library).map_err(|source| {
        SolveError::Sample {
            problem: problem_id.clone(),
            source,
        }
    })?;

    let mut scored: Vec<UtilityScore> = Vec::with_capacity(pool.candidates.len());
    let mut cut_at = None;
    for (idx, candidate) in pool.candidates.iter().enumerate() {
        let score = score_candidate(sandbox, candidate, &suite, problem).map_err(|source| {
            SolveError::Score {
                problem: problem_id.clone(),
                source,
            }
        })?;
        scored.push(score);
        if options.short_circuit && score.valid > 0 && score.passed == score.valid {
            cut_at = Some(idx + 1);
            break;
        }
    }
    let (pool_for_selection, scores) = match cut_at {
        Some(end) => {
            let truncated = CandidatePool {
                candidates: pool.candidates[..end].to_vec(),
                plan: pool.plan.clone(),
                problem_id: pool.problem_id.clone(),
            };
            (truncated, scored)
        }
        None => (pool.clone(), scored),
    };
    let selection = select_best(&pool_for_selection, &scores).map_err(|source| SolveError::Score {
        problem: problem_id.clone(),
        source,
    })?;

    let output = SolveOutput { selection, suite, pool };
    if let Some(dir) = &options.artifact_dir {
        persist_artifacts(sandbox, dir, &output).map_err(|source| SolveError::Persist {
            problem: problem_id,
            source,
        })?;
    }
    Ok(output)
}

fn load_suite(path: &Path) -> Result<TestSuite, ForgeError> {
    let text = std::fs::read_to_string(path).map_err(SandboxError::Io)?;
    serde_json::from_str(&text).map_err(|e| ForgeError::ConfigInvalid(format!(
        "suite cache {}: {e}",
        path.display()
    )))
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable artifact");
    text.push('\n');
    std::fs::write(path, text)
}

/// Layout: `candidates/<temp>-<index>.<ext>`, `suite.json`, `scores.json`,
/// `selection.json`.
fn persist_artifacts(sandbox: &Sandbox, dir: &Path, output: &SolveOutput) -> std::io::Result<()> {
    let candidates_dir = dir.join("candidates");
    std::fs::create_dir_all(&candidates_dir)?;
    let extension = sandbox
        .runner(&output.pool.candidates[0].language)
        .map(|r| r.file_extension.clone())
        .unwrap_or_else(|_| "txt".to_string());
    for candidate in &output.pool.candidates {
        let path = candidates_dir.join(format!("{}.{extension}", candidate.file_stem()));
        std::fs::write(path, &candidate.source)?;
    }
    save_json(&dir.join("suite.json"), &output.suite)?;
    let scores: Vec<ScoreRecord> = output
        .selection
        .ranking
        .iter()
        .map(|entry| ScoreRecord {
            temperature: entry.candidate.temperature.clone(),
            sample_index: entry.candidate.sample_index,
            origin: entry.candidate.origin,
            score: entry.score,
        })
        .collect();
    save_json(&dir.join("scores.json"), &scores)?;
    save_json(&dir.join("selection.json"), &output.selection)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScoreRecord {
    temperature: Temperature,
    sample_index: u32,
    origin: Origin,
    score: UtilityScore,
}
