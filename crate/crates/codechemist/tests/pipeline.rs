//! End-to-end pipeline tests on the scripted mock backend with real python
//! executions underneath.

mod common;

use codechemist::forge::{forge_test_suite, ForgeConfig};
use codechemist::gateway::PromptLibrary;
use codechemist::hedge::{
    hedged_sample, score_candidate, select_best, solve, PlanBucket, SolveOptions, TemperaturePlan,
};
use codechemist::model::{
    CaseStatus, Origin, ReferenceTest, SelectionReason, Temperature,
};

use common::{fast_sandbox, python_problem, ScriptBuilder};

const ADD_OK: &str = "def add(a, b):\n    return a + b";
const ADD_SHIFTED: &str = "def add(a, b):\n    return a + b + 1";
const ADD_BROKEN: &str = "def add(a, b:\n    syntax error here";

fn small_plan() -> TemperaturePlan {
    TemperaturePlan::new(vec![
        PlanBucket {
            temperature: Temperature::zero(),
            count: 1,
        },
        PlanBucket {
            temperature: Temperature::parse("0.9").unwrap(),
            count: 3,
        },
    ])
    .unwrap()
}

fn forge_config(n: u32, h: u32) -> ForgeConfig {
    ForgeConfig {
        reference_count: h,
        target_cases: n,
        max_attempts: 2,
        ..ForgeConfig::default()
    }
}

#[test]
fn forge_produces_consensus_suite() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("forge-basic", "add");
    let config = forge_config(3, 3);
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK, ADD_SHIFTED])
        .inputs(0, &["(2, 3)", "(0, 0)", "(-1, 5)"])
        .backend();

    let suite =
        forge_test_suite(&backend, &sandbox, &problem, &PromptLibrary::default(), &config).unwrap();
    assert_eq!(suite.attempts_used, 1);
    assert_eq!(suite.final_temperature.as_str(), "0.5");
    assert_eq!(suite.usable_len(), 3);
    let case = &suite.cases[0];
    assert_eq!(case.input.payload, "(2, 3)");
    assert_eq!(case.expected_output.as_deref(), Some("5"));
    assert_eq!(case.vote_detail.get("5"), Some(&2));
    assert_eq!(case.vote_detail.get("6"), Some(&1));
}

#[test]
fn forge_accumulates_across_attempts_and_escalates() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("forge-retry", "add");
    let config = forge_config(4, 2);
    // Attempt 0 parses two inputs (one duplicated), attempt 1 brings two more.
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK])
        .inputs(0, &["(1, 1)", "(1,1)", "(2, 2)"])
        .inputs(1, &["(3, 3)", "(1, 1)", "(4, 4)"])
        .backend();

    let suite =
        forge_test_suite(&backend, &sandbox, &problem, &PromptLibrary::default(), &config).unwrap();
    assert_eq!(suite.attempts_used, 2);
    // 0.5 escalated once by the default +1 step.
    assert_eq!(suite.final_temperature.as_str(), "1.5");
    assert_eq!(suite.usable_len(), 4);
    let payloads: Vec<&str> = suite.cases.iter().map(|c| c.input.payload.as_str()).collect();
    assert_eq!(payloads, ["(1, 1)", "(2, 2)", "(3, 3)", "(4, 4)"]);
}

#[test]
fn tie_heavy_forge_returns_unusable_suite_and_selector_falls_back() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("forge-ties", "add");
    let config = forge_config(2, 2);
    // One correct and one shifted reference: every vote is a 1-1 tie.
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_SHIFTED])
        .inputs(0, &["(1, 2)", "(2, 2)"])
        .inputs(1, &["(5, 5)"])
        .candidate("0", 0, ADD_OK)
        .candidate("0.9", 0, ADD_OK)
        .candidate("0.9", 1, ADD_SHIFTED)
        .candidate("0.9", 2, ADD_OK)
        .backend();

    let library = PromptLibrary::default();
    let suite = forge_test_suite(&backend, &sandbox, &problem, &library, &config).unwrap();
    assert_eq!(suite.usable_len(), 0);
    assert!(suite
        .cases
        .iter()
        .all(|c| c.status == CaseStatus::DiscardedTie));

    let pool = hedged_sample(&backend, &sandbox, &problem, &small_plan(), &library).unwrap();
    let scores: Vec<_> = pool
        .candidates
        .iter()
        .map(|c| score_candidate(&sandbox, c, &suite, &problem).unwrap())
        .collect();
    let selection = select_best(&pool, &scores).unwrap();
    assert_eq!(selection.reason, SelectionReason::EmptySuiteGreedyFallback);
    assert_eq!(selection.chosen.origin, Origin::Greedy);
}

#[test]
fn solve_selects_the_only_fully_passing_candidate() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("solve-argmax", "add");
    let config = forge_config(3, 3);
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK, ADD_OK])
        .inputs(0, &["(2, 3)", "(0, 0)", "(10, 1)"])
        .candidate("0", 0, ADD_SHIFTED)
        .candidate("0.9", 0, ADD_BROKEN)
        .candidate("0.9", 1, ADD_SHIFTED)
        .candidate("0.9", 2, ADD_OK)
        .backend();

    let output = solve(
        &backend,
        &sandbox,
        &problem,
        &config,
        &small_plan(),
        &PromptLibrary::default(),
        &SolveOptions::default(),
    )
    .unwrap();
    let selection = &output.selection;
    assert_eq!(selection.reason, SelectionReason::MaxScore);
    assert_eq!(selection.chosen.temperature.as_str(), "0.9");
    assert_eq!(selection.chosen.sample_index, 2);
    assert_eq!(selection.score.value, 1.0);
    assert_eq!(selection.ranking.len(), 4);
}

#[test]
fn solve_prefers_greedy_on_strict_maximum() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("solve-greedy-max", "add");
    let config = forge_config(3, 2);
    // Greedy passes 3/3; the hedged candidates pass 2/3 at best (shifted
    // fails everything, so use a candidate wrong on exactly one input).
    let one_off = "def add(a, b):\n    return a + b if a != 0 else 99";
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK])
        .inputs(0, &["(2, 3)", "(0, 0)", "(7, 7)"])
        .candidate("0", 0, ADD_OK)
        .candidate("0.9", 0, one_off)
        .candidate("0.9", 1, one_off)
        .candidate("0.9", 2, ADD_SHIFTED)
        .backend();

    let output = solve(
        &backend,
        &sandbox,
        &problem,
        &config,
        &small_plan(),
        &PromptLibrary::default(),
        &SolveOptions::default(),
    )
    .unwrap();
    assert_eq!(output.selection.reason, SelectionReason::MaxScore);
    assert_eq!(output.selection.chosen.origin, Origin::Greedy);
}

#[test]
fn solve_falls_back_to_greedy_when_nothing_runs() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("solve-fallback", "add");
    let config = forge_config(2, 2);
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK])
        .inputs(0, &["(2, 3)", "(0, 0)"])
        .candidate("0", 0, ADD_BROKEN)
        .candidate("0.9", 0, ADD_BROKEN)
        .candidate("0.9", 1, ADD_BROKEN)
        .candidate("0.9", 2, ADD_BROKEN)
        .backend();

    let output = solve(
        &backend,
        &sandbox,
        &problem,
        &config,
        &small_plan(),
        &PromptLibrary::default(),
        &SolveOptions::default(),
    )
    .unwrap();
    assert_eq!(
        output.selection.reason,
        SelectionReason::AllZeroGreedyFallback
    );
    assert_eq!(output.selection.chosen.origin, Origin::Greedy);
    assert_eq!(output.selection.score.value, 0.0);
}

#[test]
fn solve_replay_is_byte_identical_and_artifacts_complete() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("solve-replay", "add");
    let config = forge_config(2, 2);
    let build_backend = || {
        ScriptBuilder::for_problem(&problem, &config)
            .references(&[ADD_OK, ADD_OK])
            .inputs(0, &["(2, 3)", "(0, 0)"])
            .candidate("0", 0, ADD_OK)
            .candidate("0.9", 0, ADD_SHIFTED)
            .candidate("0.9", 1, ADD_OK)
            .candidate("0.9", 2, ADD_BROKEN)
            .backend()
    };

    let run = |dir: &std::path::Path| {
        let options = SolveOptions {
            artifact_dir: Some(dir.to_path_buf()),
            ..SolveOptions::default()
        };
        solve(
            &build_backend(),
            &sandbox,
            &problem,
            &config,
            &small_plan(),
            &PromptLibrary::default(),
            &options,
        )
        .unwrap()
    };

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run(dir_a.path());
    run(dir_b.path());

    for file in ["suite.json", "scores.json", "selection.json"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
        assert!(!a.is_empty());
    }
    for stem in ["0-0", "0.9-0", "0.9-1", "0.9-2"] {
        let path = dir_a.path().join("candidates").join(format!("{stem}.py"));
        assert!(path.is_file(), "missing candidate artifact {stem}.py");
    }
}

#[test]
fn suite_cache_skips_forging() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("solve-cache", "add");
    let config = forge_config(2, 2);
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("suite.json");

    let first = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK])
        .inputs(0, &["(2, 3)", "(0, 0)"])
        .candidate("0", 0, ADD_OK)
        .candidate("0.9", 0, ADD_OK)
        .candidate("0.9", 1, ADD_OK)
        .candidate("0.9", 2, ADD_OK)
        .backend();
    let options = SolveOptions {
        suite_cache: Some(cache.clone()),
        ..SolveOptions::default()
    };
    let plan = small_plan();
    let library = PromptLibrary::default();
    let output = solve(&first, &sandbox, &problem, &config, &plan, &library, &options).unwrap();
    assert!(cache.is_file());

    // Second run's script has no reference or testgen entries at all: if the
    // cache were ignored, forging would produce an unusable suite.
    let second = ScriptBuilder::for_problem(&problem, &config)
        .candidate("0", 0, ADD_OK)
        .candidate("0.9", 0, ADD_OK)
        .candidate("0.9", 1, ADD_OK)
        .candidate("0.9", 2, ADD_OK)
        .backend();
    let cached = solve(&second, &sandbox, &problem, &config, &plan, &library, &options).unwrap();
    assert_eq!(cached.suite, output.suite);
    assert_eq!(cached.selection.score.value, 1.0);
}

#[test]
fn selection_never_reads_reference_tests() {
    let sandbox = fast_sandbox(2);
    let mut problem = python_problem("solve-blind", "add");
    problem.reference_tests = Some(vec![ReferenceTest::Io {
        input: "(2, 3)".to_string(),
        expected_output: "5".to_string(),
    }]);
    let config = forge_config(2, 2);
    let build_backend = |p: &codechemist::model::ProblemSpec| {
        ScriptBuilder::for_problem(p, &config)
            .references(&[ADD_OK, ADD_OK])
            .inputs(0, &["(2, 3)", "(1, 1)"])
            .candidate("0", 0, ADD_SHIFTED)
            .candidate("0.9", 0, ADD_OK)
            .candidate("0.9", 1, ADD_SHIFTED)
            .candidate("0.9", 2, ADD_BROKEN)
            .backend()
    };
    let plan = small_plan();
    let library = PromptLibrary::default();
    let options = SolveOptions::default();

    let baseline = solve(
        &build_backend(&problem),
        &sandbox,
        &problem,
        &config,
        &plan,
        &library,
        &options,
    )
    .unwrap();

    // Corrupt the ground truth; the selection must not move.
    let mut corrupted = problem.clone();
    corrupted.reference_tests = Some(vec![ReferenceTest::Io {
        input: "(2, 3)".to_string(),
        expected_output: "totally wrong".to_string(),
    }]);
    let tampered = solve(
        &build_backend(&corrupted),
        &sandbox,
        &corrupted,
        &config,
        &plan,
        &library,
        &options,
    )
    .unwrap();

    assert_eq!(baseline.selection, tampered.selection);
}

#[test]
fn short_circuit_stops_after_perfect_score() {
    let sandbox = fast_sandbox(2);
    let problem = python_problem("solve-short", "add");
    let config = forge_config(2, 2);
    let backend = ScriptBuilder::for_problem(&problem, &config)
        .references(&[ADD_OK, ADD_OK])
        .inputs(0, &["(2, 3)", "(0, 0)"])
        .candidate("0", 0, ADD_OK)
        .candidate("0.9", 0, ADD_SHIFTED)
        .candidate("0.9", 1, ADD_SHIFTED)
        .candidate("0.9", 2, ADD_SHIFTED)
        .backend();
    let options = SolveOptions {
        short_circuit: true,
        ..SolveOptions::default()
    };
    let output = solve(
        &backend,
        &sandbox,
        &problem,
        &config,
        &small_plan(),
        &PromptLibrary::default(),
        &options,
    )
    .unwrap();
    // Greedy scores 1.0 first; the rest were never scored.
    assert_eq!(output.selection.ranking.len(), 1);
    assert_eq!(output.selection.chosen.origin, Origin::Greedy);
    assert_eq!(output.selection.score.value, 1.0);
}
