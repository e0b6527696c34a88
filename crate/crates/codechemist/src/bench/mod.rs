//! Benchmark harness: problem sets, method runners, baselines, grading.
//!
//! Grading uses the problem's bundled reference tests, which stay invisible
//! to every selection method: the forging and selection stages only ever see
//! the [`ProblemSpec`] prompt fields, never `reference_tests`.

mod passk;
mod report;
pub mod simulation;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use passk::pass_at_k;
pub use report::{emit_report, render_report, ReportFormat};
pub use stats::{regularized_incomplete_beta, welch_t_test, WelchTest};

use crate::forge::{forge_test_suite, ForgeConfig, ForgeError};
use crate::gateway::{Backend, GatewayError, PromptLibrary, TrialScopedBackend};
use crate::hedge::{
    hedged_sample, score_candidate, select_best, CandidatePool, HedgeError, PlanBucket,
    TemperaturePlan,
};
use crate::model::{
    canonical_compare_with_tolerance, CandidateProgram, IoMode, Origin, ProblemSpec,
    ReferenceTest, ScoredCandidate, Selection, SelectionReason, Temperature, TestInput, TestSuite,
    UtilityScore,
};
use crate::sandbox::{normalize_output, wrap_entry_call, ExecStatus, Sandbox, SandboxError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("malformed record on line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error("duplicate problem id `{id}` on line {line}")]
    DuplicateId { line: usize, id: String },
    #[error("problem set `{0}` is empty")]
    EmptySet(String),
    #[error("report has no results to emit")]
    ReportEmpty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Hedge(#[from] HedgeError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vanilla,
    MajorityVoting,
    Codechemist,
}

impl Method {
    pub fn all() -> [Method; 3] {
        [Method::Vanilla, Method::MajorityVoting, Method::Codechemist]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::MajorityVoting => "majority-voting",
            Method::Codechemist => "codechemist",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "vanilla" => Ok(Method::Vanilla),
            "majority-voting" | "maj-voting" => Ok(Method::MajorityVoting),
            "codechemist" => Ok(Method::Codechemist),
            other => Err(BenchError::DomainViolation(format!(
                "unknown method `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetStyle {
    MultiplE,
    LcbX,
    Custom,
}

impl FromStr for SetStyle {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "multipl-e" => Ok(SetStyle::MultiplE),
            "lcb-x" => Ok(SetStyle::LcbX),
            "custom" => Ok(SetStyle::Custom),
            other => Err(BenchError::DomainViolation(format!("unknown style `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSet {
    pub name: String,
    pub style: SetStyle,
    pub problems: Vec<ProblemSpec>,
}

/// Loads a line-delimited JSON problem set (one problem object per line).
pub fn load_problems(path: &Path, style: SetStyle) -> Result<ProblemSet, BenchError> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problems".to_string());
    let mut problems = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let problem: ProblemSpec =
            serde_json::from_str(line).map_err(|e| BenchError::MalformedRecord {
                line: line_no,
                detail: e.to_string(),
            })?;
        problem.validate().map_err(|e| BenchError::MalformedRecord {
            line: line_no,
            detail: e.to_string(),
        })?;
        if seen.insert(problem.id.clone(), line_no).is_some() {
            return Err(BenchError::DuplicateId {
                line: line_no,
                id: problem.id,
            });
        }
        problems.push(problem);
    }
    if problems.is_empty() {
        return Err(BenchError::EmptySet(name));
    }
    Ok(ProblemSet { name, style, problems })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTally {
    pub n: u32,
    pub c: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedError {
    pub problem_id: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// problem id -> (trials run, correct answers).
    pub per_problem: BTreeMap<String, TrialTally>,
    /// Mean unbiased pass@1 over graded problems.
    pub pass_at_1: f64,
    /// Absent in deterministic (replay) mode so reports stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
    /// Problems excluded because their grading harness failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub graded_errors: Vec<GradedError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub set_name: String,
    pub results: Vec<MethodResult>,
    /// method name -> pass@1 difference against the vanilla arm (fractions).
    pub deltas_vs_vanilla: BTreeMap<String, f64>,
    /// "a-vs-b" -> two-sided Welch p-value over per-problem pass fractions.
    pub significance: BTreeMap<String, f64>,
    pub config_snapshot: serde_json::Value,
}

impl EvaluationReport {
    pub fn has_graded_errors(&self) -> bool {
        self.results.iter().any(|r| !r.graded_errors.is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub methods: Vec<Method>,
    /// Independent trials per problem (the paper's n = 10).
    pub trials: u32,
    pub forge: ForgeConfig,
    pub plan: TemperaturePlan,
    /// Omit wall-clock times from results so replays are byte-identical.
    pub deterministic: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            methods: Method::all().to_vec(),
            trials: 10,
            forge: ForgeConfig::default(),
            plan: TemperaturePlan::default_paper(),
            deterministic: false,
        }
    }
}

/// Runs one method over the set. See [`run_methods`] for the sharing rules.
pub fn run_method(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    set: &ProblemSet,
    method: Method,
    library: &PromptLibrary,
    options: &EvalOptions,
) -> Result<MethodResult, BenchError> {
    let scoped = EvalOptions {
        methods: vec![method],
        ..options.clone()
    };
    let mut results = run_methods(backend, sandbox, set, library, &scoped)?;
    Ok(results.remove(0))
}

/// Runs every requested method over the set.
///
/// Methods share one candidate pool per (problem, trial) and one forged
/// suite per problem, so comparisons isolate the selection mechanism. The
/// suite is forged with trial-independent requests, hence identical for
/// every trial; forging it once per problem is behavior-preserving.
pub fn run_methods(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    set: &ProblemSet,
    library: &PromptLibrary,
    options: &EvalOptions,
) -> Result<Vec<MethodResult>, BenchError> {
    if options.methods.is_empty() {
        return Err(BenchError::DomainViolation("no methods requested".into()));
    }
    if options.trials == 0 {
        return Err(BenchError::DomainViolation("trials must be >= 1".into()));
    }
    let needs_pipeline = options
        .methods
        .iter()
        .any(|m| *m != Method::Vanilla);

    struct Acc {
        per_problem: BTreeMap<String, TrialTally>,
        graded_errors: Vec<GradedError>,
        wall: f64,
    }
    let mut accs: Vec<Acc> = options
        .methods
        .iter()
        .map(|_| Acc {
            per_problem: BTreeMap::new(),
            graded_errors: Vec::new(),
            wall: 0.0,
        })
        .collect();

    let greedy_only_plan = TemperaturePlan::new(vec![PlanBucket {
        temperature: Temperature::zero(),
        count: 1,
    }])
    .expect("greedy-only plan is valid");

    for problem in &set.problems {
        log::info!("evaluating `{}`", problem.id);
        let suite = if needs_pipeline {
            Some(forge_test_suite(backend, sandbox, problem, library, &options.forge)?)
        } else {
            None
        };
        let mut failed: Vec<Option<String>> = vec![None; options.methods.len()];
        let mut correct = vec![0u32; options.methods.len()];

        for trial in 0..options.trials {
            let scoped = TrialScopedBackend::new(backend, trial);
            let plan = if needs_pipeline {
                &options.plan
            } else {
                &greedy_only_plan
            };
            let pool = hedged_sample(&scoped, sandbox, problem, plan, library)?;

            for (mi, method) in options.methods.iter().enumerate() {
                if failed[mi].is_some() {
                    continue;
                }
                let started = Instant::now();
                let answer = match method {
                    Method::Vanilla => pool.greedy()?.source.clone(),
                    Method::MajorityVoting => {
                        let suite = suite.as_ref().expect("pipeline methods forge a suite");
                        let probes = probe_inputs(suite);
                        majority_vote_baseline(sandbox, &pool, &probes, problem)?
                            .chosen
                            .source
                    }
                    Method::Codechemist => {
                        let suite = suite.as_ref().expect("pipeline methods forge a suite");
                        let mut scores = Vec::with_capacity(pool.candidates.len());
                        for candidate in &pool.candidates {
                            scores.push(score_candidate(sandbox, candidate, suite, problem)?);
                        }
                        select_best(&pool, &scores)?.chosen.source
                    }
                };
                match grade_candidate(sandbox, problem, &answer) {
                    Ok(true) => correct[mi] += 1,
                    Ok(false) => {}
                    Err(detail) => failed[mi] = Some(detail),
                }
                accs[mi].wall += started.elapsed().as_secs_f64();
            }
        }

        for (mi, acc) in accs.iter_mut().enumerate() {
            match failed[mi].take() {
                Some(detail) => acc.graded_errors.push(GradedError {
                    problem_id: problem.id.clone(),
                    detail,
                }),
                None => {
                    acc.per_problem.insert(
                        problem.id.clone(),
                        TrialTally {
                            n: options.trials,
                            c: correct[mi],
                        },
                    );
                }
            }
        }
    }

    let mut results = Vec::with_capacity(options.methods.len());
    for (method, acc) in options.methods.iter().zip(accs) {
        let pass_at_1 = aggregate_pass_at_1(&acc.per_problem)?;
        results.push(MethodResult {
            method: *method,
            per_problem: acc.per_problem,
            pass_at_1,
            wall_time_secs: (!options.deterministic).then_some(acc.wall),
            graded_errors: acc.graded_errors,
        });
    }
    Ok(results)
}

fn aggregate_pass_at_1(per_problem: &BTreeMap<String, TrialTally>) -> Result<f64, BenchError> {
    if per_problem.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for tally in per_problem.values() {
        total += pass_at_k(u64::from(tally.n), u64::from(tally.c), 1)?;
    }
    Ok(total / per_problem.len() as f64)
}

/// Runs the methods and assembles the full comparison report.
pub fn evaluate(
    backend: &dyn Backend,
    sandbox: &Sandbox,
    set: &ProblemSet,
    library: &PromptLibrary,
    options: &EvalOptions,
    config_snapshot: serde_json::Value,
) -> Result<EvaluationReport, BenchError> {
    let results = run_methods(backend, sandbox, set, library, options)?;

    let vanilla = results
        .iter()
        .find(|r| r.method == Method::Vanilla)
        .map(|r| r.pass_at_1);
    let mut deltas_vs_vanilla = BTreeMap::new();
    if let Some(base) = vanilla {
        for result in &results {
            if result.method != Method::Vanilla {
                deltas_vs_vanilla.insert(result.method.to_string(), result.pass_at_1 - base);
            }
        }
    }

    // Significance over per-problem pass fractions, for problems graded by
    // both methods of a pair.
    let mut significance = BTreeMap::new();
    for (i, a) in results.iter().enumerate() {
        for b in results.iter().skip(i + 1) {
            let shared: Vec<&String> = a
                .per_problem
                .keys()
                .filter(|id| b.per_problem.contains_key(*id))
                .collect();
            let fractions = |r: &MethodResult| -> Vec<f64> {
                shared
                    .iter()
                    .map(|id| {
                        let tally = r.per_problem[*id];
                        f64::from(tally.c) / f64::from(tally.n)
                    })
                    .collect()
            };
            if let Ok(test) = welch_t_test(&fractions(a), &fractions(b)) {
                significance.insert(format!("{}-vs-{}", a.method, b.method), test.p_value);
            }
        }
    }

    Ok(EvaluationReport {
        set_name: set.name.clone(),
        results,
        deltas_vs_vanilla,
        significance,
        config_snapshot,
    })
}

/// Inputs the majority-vote baseline probes with: the forged suite's inputs,
/// expected outputs ignored. Consensus-case inputs first; if there are none,
/// any recorded input.
pub fn probe_inputs(suite: &TestSuite) -> Vec<TestInput> {
    let usable: Vec<TestInput> = suite.usable_cases().map(|c| c.input.clone()).collect();
    if !usable.is_empty() {
        return usable;
    }
    suite.cases.iter().map(|c| c.input.clone()).collect()
}

/// Self-consistency baseline: cluster candidates by their full output vector
/// over the probe inputs and pick the lowest-temperature member of the
/// largest cluster.
pub fn majority_vote_baseline(
    sandbox: &Sandbox,
    pool: &CandidatePool,
    probe_inputs: &[TestInput],
    problem: &ProblemSpec,
) -> Result<Selection, BenchError> {
    let greedy = pool.greedy()?.clone();
    if probe_inputs.is_empty() {
        return Ok(greedy_fallback(pool, greedy));
    }
    let runner = sandbox.runner(&problem.target_language)?;

    // Output vector per candidate; None marks an invalid execution.
    let mut jobs = Vec::new();
    for (ci, candidate) in pool.candidates.iter().enumerate() {
        for input in probe_inputs {
            let prepared = match problem.io_mode {
                IoMode::FunctionCall => {
                    let entry = problem.entry_point.as_deref().unwrap_or_default();
                    match wrap_entry_call(candidate, entry, input) {
                        Ok(source) => Some((source, None)),
                        Err(SandboxError::InputParseFailure { .. })
                        | Err(SandboxError::NoWrapperTemplate(_)) => None,
                        Err(e) => return Err(e.into()),
                    }
                }
                IoMode::StdinProgram => {
                    Some((candidate.source.clone(), Some(input.payload.clone())))
                }
            };
            jobs.push((ci, prepared));
        }
    }
    let outcomes = sandbox.pool().map(jobs, |(ci, prepared)| match prepared {
        Some((source, stdin)) => (ci, Some(sandbox.execute(runner, &source, stdin.as_deref()))),
        None => (ci, None),
    });

    let mut vectors: Vec<Vec<Option<String>>> = vec![Vec::new(); pool.candidates.len()];
    for (ci, outcome) in outcomes {
        let entry = match outcome {
            None => None,
            Some(result) => {
                let outcome = result?;
                (outcome.status == ExecStatus::Ok)
                    .then_some(outcome.canonical_output)
                    .flatten()
            }
        };
        vectors[ci].push(entry);
    }

    // Candidates whose vector is entirely invalid do not vote.
    let mut clusters: HashMap<&[Option<String>], Vec<usize>> = HashMap::new();
    for (ci, vector) in vectors.iter().enumerate() {
        if vector.iter().all(Option::is_none) {
            continue;
        }
        clusters.entry(vector.as_slice()).or_default().push(ci);
    }
    if clusters.is_empty() {
        return Ok(greedy_fallback(pool, greedy));
    }

    let pool_size = pool.candidates.len() as u32;
    let cluster_size: Vec<u32> = vectors
        .iter()
        .map(|v| clusters.get(v.as_slice()).map_or(0, |m| m.len() as u32))
        .collect();
    let mut ranking: Vec<ScoredCandidate> = pool
        .candidates
        .iter()
        .zip(cluster_size.iter())
        .map(|(candidate, size)| ScoredCandidate {
            candidate: candidate.clone(),
            score: UtilityScore::compute(*size, pool_size),
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.score
            .value
            .total_cmp(&a.score.value)
            .then_with(|| a.candidate.temperature.cmp(&b.candidate.temperature))
            .then_with(|| a.candidate.sample_index.cmp(&b.candidate.sample_index))
    });
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

fn greedy_fallback(pool: &CandidatePool, greedy: CandidateProgram) -> Selection {
    let ranking: Vec<ScoredCandidate> = pool
        .candidates
        .iter()
        .map(|candidate| ScoredCandidate {
            candidate: candidate.clone(),
            score: UtilityScore::zero(),
        })
        .collect();
    Selection {
        chosen: greedy,
        score: UtilityScore::zero(),
        reason: SelectionReason::AllZeroGreedyFallback,
        ranking,
    }
}

/// Grades a final answer against the problem's reference tests. `Err` means
/// the grading harness itself failed (a graded-error, not a wrong answer).
pub fn grade_candidate(
    sandbox: &Sandbox,
    problem: &ProblemSpec,
    source: &str,
) -> Result<bool, String> {
    let tests = match &problem.reference_tests {
        Some(tests) if !tests.is_empty() => tests,
        _ => return Err("problem has no reference tests".to_string()),
    };
    let runner = sandbox
        .runner(&problem.target_language)
        .map_err(|e| e.to_string())?;
    let as_candidate = CandidateProgram {
        source: source.to_string(),
        language: problem.target_language.clone(),
        temperature: Temperature::zero(),
        sample_index: 0,
        origin: Origin::Greedy,
    };
    for test in tests {
        let passed = match test {
            ReferenceTest::Assert { script } => {
                let combined = format!("{source}\n\n{script}");
                let outcome = sandbox
                    .execute(runner, &combined, None)
                    .map_err(|e| e.to_string())?;
                outcome.status == ExecStatus::Ok
            }
            ReferenceTest::Io { input, expected_output } => {
                let (wrapped, stdin) = match problem.io_mode {
                    IoMode::FunctionCall => {
                        let entry = problem.entry_point.as_deref().unwrap_or_default();
                        let test_input = TestInput {
                            payload: input.clone(),
                            index: 0,
                        };
                        match wrap_entry_call(&as_candidate, entry, &test_input) {
                            Ok(wrapped) => (wrapped, None),
                            // A reference input the wrapper rejects is a
                            // harness defect, not a candidate failure.
                            Err(e) => return Err(e.to_string()),
                        }
                    }
                    IoMode::StdinProgram => (source.to_string(), Some(input.clone())),
                };
                let outcome = sandbox
                    .execute(runner, &wrapped, stdin.as_deref())
                    .map_err(|e| e.to_string())?;
                outcome.status == ExecStatus::Ok
                    && canonical_compare_with_tolerance(
                        outcome.canonical_output.as_deref().unwrap_or_default(),
                        &normalize_output(expected_output),
                        problem.float_tolerance,
                    )
            }
        };
        if !passed {
            return Ok(false);
        }
    }
    Ok(true)
}
