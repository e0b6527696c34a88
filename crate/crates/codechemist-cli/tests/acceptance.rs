//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 5-7 run the real pipeline: scripted mock completions, real
//! python subprocess executions, fixed seeds.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use codechemist::bench::simulation::{build_simulation, write_bundle, SimulationSpec};
use codechemist::bench::{pass_at_k, run_methods, welch_t_test, EvalOptions, Method};
use codechemist::forge::{tally_votes, VoteDecision};
use codechemist::gateway::{render_prompt, MockBackend, PromptLibrary, PromptTemplate, TemplateId};
use codechemist::hedge::{select_best, CandidatePool, PlanBucket, TemperaturePlan};
use codechemist::model::{
    CandidateProgram, IoMode, LanguageId, Origin, ProblemSpec, SelectionReason, Temperature,
    UtilityScore,
};
use codechemist::sandbox::{
    default_python, ExecStatus, RunnerConfig, RunnerRegistry, Sandbox,
};

fn fast_python() -> RunnerConfig {
    RunnerConfig {
        run_command: vec!["python3".into(), "-S".into(), "{file}".into()],
        ..default_python()
    }
}

fn fast_sandbox(jobs: usize) -> Sandbox {
    let mut registry = RunnerRegistry::default();
    registry.insert(fast_python());
    Sandbox::new(registry, jobs)
}

// ---------------------------------------------------------------------
// 1. Oracle-vote oracle equivalence.
// ---------------------------------------------------------------------
#[test]
fn criterion_1_oracle_vote_equivalence() {
    let labels = ["a", "b", "c", "d", "e"];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0001);
    let started = Instant::now();
    for iteration in 0..10_000u32 {
        let len = rng.random_range(0..=10usize);
        let outputs: Vec<Option<&str>> = (0..len)
            .map(|_| {
                if rng.random_bool(0.2) {
                    None
                } else {
                    Some(labels[rng.random_range(0..labels.len())])
                }
            })
            .collect();
        let (votes, decision) = tally_votes(outputs.iter().copied());

        // Independent mode counter: scan counts, find the maximum, check
        // uniqueness by a second scan.
        let valid: Vec<&str> = outputs.iter().copied().flatten().collect();
        assert_eq!(votes.values().sum::<u32>() as usize, valid.len());
        let expected = if valid.is_empty() {
            VoteDecision::AllInvalid
        } else {
            let count_of = |label: &str| valid.iter().filter(|v| **v == label).count();
            let max = labels.iter().map(|l| count_of(l)).max().unwrap();
            let winners: Vec<&str> = labels
                .iter()
                .copied()
                .filter(|l| count_of(l) == max && max > 0)
                .collect();
            if winners.len() == 1 {
                VoteDecision::Consensus(winners[0].to_string())
            } else {
                VoteDecision::Tie
            }
        };
        assert_eq!(decision, expected, "iteration {iteration}: {outputs:?}");
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "10k vote checks took {elapsed:?}"
    );
    println!("acceptance criterion 1 (oracle-vote equivalence, 10000 multisets in {elapsed:?}): PASS");
}

// ---------------------------------------------------------------------
// 2. pass@k correctness against subset enumeration.
// ---------------------------------------------------------------------
fn pass_at_k_enumerated(n: u64, c: u64, k: u64) -> f64 {
    let mut with_correct = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1u32 << n) {
        if u64::from(mask.count_ones()) != k {
            continue;
        }
        total += 1;
        if (mask & ((1u32 << c) - 1)) != 0 {
            with_correct += 1;
        }
    }
    with_correct as f64 / total as f64
}

#[test]
fn criterion_2_pass_at_k_matches_enumeration() {
    for n in 1..=12u64 {
        for c in 0..=n {
            for k in 1..=n {
                let fast = pass_at_k(n, c, k).unwrap();
                let slow = pass_at_k_enumerated(n, c, k);
                assert!(
                    (fast - slow).abs() < 1e-12,
                    "n={n} c={c} k={k}: {fast} vs {slow}"
                );
            }
        }
    }
    assert_eq!(pass_at_k(10, 3, 1).unwrap(), 0.3);
    let expected = 1.0 - 21.0 / 45.0;
    assert!((pass_at_k(10, 3, 2).unwrap() - expected).abs() < 1e-15);
    println!("acceptance criterion 2 (pass@k vs enumeration, n <= 12 grid): PASS");
}

// ---------------------------------------------------------------------
// 3. Selection invariants over random pools.
// ---------------------------------------------------------------------
#[test]
fn criterion_3_selection_invariants() {
    let temps = ["0", "0.7", "0.9", "1.1"];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0003);
    for iteration in 0..10_000u32 {
        // Pool with a guaranteed greedy anchor plus 0..11 random members.
        let extra = rng.random_range(0..=11usize);
        let mut counters = [0u32; 4];
        counters[0] = 1;
        let mut members: Vec<(usize, u32)> = vec![(0, 0)];
        for _ in 0..extra {
            let t = rng.random_range(0..temps.len());
            members.push((t, counters[t]));
            counters[t] += 1;
        }
        let candidates: Vec<CandidateProgram> = members
            .iter()
            .map(|&(t, index)| CandidateProgram {
                source: format!("-- {t}#{index}"),
                language: LanguageId::lua(),
                temperature: Temperature::parse(temps[t]).unwrap(),
                sample_index: index,
                origin: if t == 0 && index == 0 {
                    Origin::Greedy
                } else {
                    Origin::Hedged
                },
            })
            .collect();
        let plan = TemperaturePlan::new(
            temps
                .iter()
                .zip(counters.iter())
                .filter(|(_, count)| **count > 0)
                .map(|(t, count)| PlanBucket {
                    temperature: Temperature::parse(t).unwrap(),
                    count: *count,
                })
                .collect(),
        )
        .unwrap();
        let pool = CandidatePool {
            candidates: candidates.clone(),
            plan,
            problem_id: format!("iter-{iteration}"),
        };

        // Quantized scores force frequent ties; m = 0 models an empty suite.
        let m = rng.random_range(0..=4u32);
        let scores: Vec<UtilityScore> = candidates
            .iter()
            .map(|_| {
                if m == 0 {
                    UtilityScore::zero()
                } else {
                    UtilityScore::compute(rng.random_range(0..=m), m)
                }
            })
            .collect();
        let selection = select_best(&pool, &scores).unwrap();

        if m == 0 {
            assert_eq!(selection.reason, SelectionReason::EmptySuiteGreedyFallback);
            assert_eq!(selection.chosen.origin, Origin::Greedy);
            continue;
        }
        if scores.iter().all(|s| s.value == 0.0) {
            assert_eq!(selection.reason, SelectionReason::AllZeroGreedyFallback);
            assert_eq!(selection.chosen.origin, Origin::Greedy);
            continue;
        }
        // Independent argmax with the documented tie order.
        let best = scores.iter().map(|s| s.value).fold(f64::MIN, f64::max);
        let mut winners: Vec<&CandidateProgram> = candidates
            .iter()
            .zip(scores.iter())
            .filter(|(_, s)| s.value == best)
            .map(|(c, _)| c)
            .collect();
        winners.sort_by(|a, b| {
            a.temperature
                .cmp(&b.temperature)
                .then_with(|| a.sample_index.cmp(&b.sample_index))
        });
        assert_eq!(&selection.chosen, winners[0], "iteration {iteration}");
        let expected_reason = if winners.len() == 1 {
            SelectionReason::MaxScore
        } else {
            SelectionReason::TieLowerTemperature
        };
        assert_eq!(selection.reason, expected_reason, "iteration {iteration}");
        assert_eq!(selection.ranking.len(), candidates.len());
    }
    println!("acceptance criterion 3 (selection invariants, 10000 pools): PASS");
}

// ---------------------------------------------------------------------
// 4. Sandbox classification fixture matrix.
// ---------------------------------------------------------------------
struct Fixture {
    label: &'static str,
    source: &'static str,
    expected: ExecStatus,
}

fn fixtures_for(language: &str) -> Vec<Fixture> {
    // Interpreted languages have no compile phase, so their syntax-error
    // fixture classifies as a runtime crash.
    match language {
        "python" => vec![
            Fixture { label: "ok", source: "print(7)", expected: ExecStatus::Ok },
            Fixture {
                label: "syntax-error",
                source: "def f(:\n    pass",
                expected: ExecStatus::RuntimeCrash,
            },
            Fixture {
                label: "runtime-crash",
                source: "raise RuntimeError('boom')",
                expected: ExecStatus::RuntimeCrash,
            },
            Fixture {
                label: "timeout",
                source: "while True:\n    pass",
                expected: ExecStatus::Timeout,
            },
            Fixture {
                label: "output-overflow",
                source: "import sys\nfor _ in range(100000):\n    sys.stdout.write('x' * 64)",
                expected: ExecStatus::OutputOverflow,
            },
        ],
        "lua" => vec![
            Fixture { label: "ok", source: "print(7)", expected: ExecStatus::Ok },
            Fixture {
                label: "syntax-error",
                source: "function f( end",
                expected: ExecStatus::RuntimeCrash,
            },
            Fixture {
                label: "runtime-crash",
                source: "error('boom')",
                expected: ExecStatus::RuntimeCrash,
            },
            Fixture {
                label: "timeout",
                source: "while true do end",
                expected: ExecStatus::Timeout,
            },
            Fixture {
                label: "output-overflow",
                source: "for i = 1, 100000 do io.write(string.rep('x', 64)) end",
                expected: ExecStatus::OutputOverflow,
            },
        ],
        "cpp" => vec![
            Fixture {
                label: "ok",
                source: "#include <cstdio>\nint main() { std::puts(\"7\"); return 0; }",
                expected: ExecStatus::Ok,
            },
            Fixture {
                label: "compile-fail",
                source: "int main( {",
                expected: ExecStatus::CompileFail,
            },
            Fixture {
                label: "runtime-crash",
                source: "#include <cstdlib>\nint main() { std::abort(); }",
                expected: ExecStatus::RuntimeCrash,
            },
            Fixture {
                label: "timeout",
                source: "int main() { for (volatile long i = 0;; ++i) {} return 0; }",
                expected: ExecStatus::Timeout,
            },
            Fixture {
                label: "output-overflow",
                source: "#include <cstdio>\nint main() { for (int i = 0; i < 100000; ++i) std::printf(\"xxxxxxxxxxxxxxxx\"); return 0; }",
                expected: ExecStatus::OutputOverflow,
            },
        ],
        "java" => vec![
            Fixture {
                label: "ok",
                source: "public class Main { public static void main(String[] a) { System.out.println(7); } }",
                expected: ExecStatus::Ok,
            },
            Fixture {
                label: "compile-fail",
                source: "public class Main { public static void main(String[] a) {",
                expected: ExecStatus::CompileFail,
            },
            Fixture {
                label: "runtime-crash",
                source: "public class Main { public static void main(String[] a) { throw new RuntimeException(\"boom\"); } }",
                expected: ExecStatus::RuntimeCrash,
            },
            Fixture {
                label: "timeout",
                source: "public class Main { public static void main(String[] a) { while (true) {} } }",
                expected: ExecStatus::Timeout,
            },
            Fixture {
                label: "output-overflow",
                source: "public class Main { public static void main(String[] a) { for (int i = 0; i < 100000; i++) System.out.print(\"xxxxxxxxxxxxxxxx\"); } }",
                expected: ExecStatus::OutputOverflow,
            },
        ],
        other => panic!("no fixtures for {other}"),
    }
}

#[test]
fn criterion_4_sandbox_classification_matrix() {
    const RUN_TIMEOUT_SECS: f64 = 1.5;
    let registry = RunnerRegistry::default();
    let sandbox = Sandbox::new(registry, 1);
    let mut ran = Vec::new();
    let mut skipped = Vec::new();

    for language in ["python", "lua", "cpp", "java"] {
        let id = LanguageId::new(language);
        let probe = sandbox.probe(&id);
        if !probe.available {
            eprintln!("criterion 4: skipping `{language}` ({})", probe.detail);
            skipped.push(language);
            continue;
        }
        let base = sandbox.runner(&id).unwrap().clone();
        let config = RunnerConfig {
            run_timeout_secs: RUN_TIMEOUT_SECS,
            max_output_bytes: 4096,
            compile_command: base.compile_command.clone().map(|mut cmd| {
                // Cheap compiles keep the matrix quick.
                for part in &mut cmd {
                    if part == "-O1" || part == "-O2" {
                        *part = "-O0".to_string();
                    }
                }
                cmd
            }),
            run_command: if language == "python" {
                vec!["python3".into(), "-S".into(), "{file}".into()]
            } else {
                base.run_command.clone()
            },
            ..base
        };
        for fixture in fixtures_for(language) {
            let outcome = sandbox.execute(&config, fixture.source, None).unwrap();
            assert_eq!(
                outcome.status, fixture.expected,
                "{language}/{}: stderr {}",
                fixture.label, outcome.stderr
            );
            if fixture.expected == ExecStatus::Timeout {
                // Compile time is excluded from the bound; these fixtures
                // compile in well under the slack anyway.
                assert!(
                    outcome.duration_secs <= RUN_TIMEOUT_SECS + 2.0,
                    "{language} timeout took {}s",
                    outcome.duration_secs
                );
            }
        }
        ran.push(language);
    }

    eprintln!("criterion 4: classified in {ran:?}, skipped {skipped:?}");
    assert!(ran.contains(&"python"), "python toolchain required");
    assert!(
        ran.contains(&"cpp") || ran.contains(&"java"),
        "at least one compiled language required"
    );
    println!(
        "acceptance criterion 4 (sandbox classification matrix; ran {ran:?}, skipped {skipped:?}): PASS"
    );
}

// ---------------------------------------------------------------------
// 5 + 6. Simulated directional reproduction and the h ablation.
// ---------------------------------------------------------------------
#[test]
fn criterion_5_and_6_simulated_gap_and_ablation() {
    let spec = SimulationSpec::default();
    assert_eq!((spec.problems, spec.trials), (20, 10));
    assert_eq!(spec.greedy_correct_prob, 0.34);
    assert_eq!(spec.hedged_correct_prob, 0.5);
    let bundle = build_simulation(&spec);
    let backend = MockBackend::new("sim", bundle.script.clone());
    let sandbox = fast_sandbox(2);
    let library = PromptLibrary::default();

    // Criterion 5: vanilla vs codechemist under the h = 10 default.
    let started = Instant::now();
    let options = EvalOptions {
        methods: vec![Method::Vanilla, Method::Codechemist],
        trials: spec.trials,
        forge: bundle.forge.clone(),
        plan: bundle.plan.clone(),
        deterministic: true,
    };
    let results = run_methods(&backend, &sandbox, &bundle.set, &library, &options).unwrap();
    let elapsed = started.elapsed();
    let vanilla = results[0].pass_at_1;
    let codechemist_h10 = results[1].pass_at_1;
    eprintln!(
        "criterion 5: vanilla {:.3}, codechemist {:.3} ({} problems x {} trials in {elapsed:?})",
        vanilla, codechemist_h10, spec.problems, spec.trials
    );
    assert!(
        codechemist_h10 - vanilla >= 0.15,
        "gap {:.3} below 15 points (vanilla {vanilla:.3}, codechemist {codechemist_h10:.3})",
        codechemist_h10 - vanilla
    );
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "criterion 5 run took {elapsed:?}, budget is 5 minutes"
    );
    println!(
        "acceptance criterion 5 (simulated gap: vanilla {:.1} -> codechemist {:.1}, +{:.1} points in {elapsed:?}): PASS",
        vanilla * 100.0,
        codechemist_h10 * 100.0,
        (codechemist_h10 - vanilla) * 100.0
    );

    // Criterion 6: the same setup with a single reference candidate.
    let h1_options = EvalOptions {
        methods: vec![Method::Codechemist],
        forge: codechemist::forge::ForgeConfig {
            reference_count: 1,
            ..bundle.forge.clone()
        },
        ..options
    };
    let h1_results = run_methods(&backend, &sandbox, &bundle.set, &library, &h1_options).unwrap();
    let codechemist_h1 = h1_results[0].pass_at_1;
    eprintln!("criterion 6: h=1 {codechemist_h1:.3} vs h=10 {codechemist_h10:.3}");
    assert!(
        codechemist_h10 >= codechemist_h1,
        "voting over ten references ({codechemist_h10:.3}) should not lose to one ({codechemist_h1:.3})"
    );
    println!(
        "acceptance criterion 6 (ablation: h=1 {:.1} <= h=10 {:.1}): PASS",
        codechemist_h1 * 100.0,
        codechemist_h10 * 100.0
    );
}

// ---------------------------------------------------------------------
// 7. Replay determinism through the CLI.
// ---------------------------------------------------------------------
#[test]
fn criterion_7_cmd_eval_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SimulationSpec {
        problems: 3,
        trials: 2,
        case_target: 2,
        reference_count: 3,
        seed: 11,
        ..SimulationSpec::default()
    };
    let bundle = build_simulation(&spec);
    let (problems, script) = write_bundle(&bundle, dir.path()).unwrap();
    let runners = dir.path().join("runners.toml");
    std::fs::write(
        &runners,
        "[runners.python]\nrun_command = [\"python3\", \"-S\", \"{file}\"]\nfile_extension = \"py\"\n",
    )
    .unwrap();
    let artifacts = dir.path().join("out");

    let run_eval = || {
        let output = Command::new(env!("CARGO_BIN_EXE_codechemist"))
            .args([
                "eval",
                "--problems",
                problems.to_str().unwrap(),
                "--backend",
                "mock",
                "--mock-script",
                script.to_str().unwrap(),
                "--runners",
                runners.to_str().unwrap(),
                "--artifacts",
                artifacts.to_str().unwrap(),
                "--jobs",
                "2",
                "--h",
                "3",
                "--n",
                "2",
                "--k",
                "2",
                "--methods",
                "vanilla,majority-voting,codechemist",
            ])
            .output()
            .expect("eval run spawns");
        assert!(
            output.status.success(),
            "eval failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        std::fs::read(artifacts.join("report.json")).unwrap()
    };

    let first = run_eval();
    let second = run_eval();
    assert!(!first.is_empty());
    assert_eq!(first, second, "report.json differs between identical runs");
    println!(
        "acceptance criterion 7 (cmd_eval replay determinism, {} byte report): PASS",
        first.len()
    );
}

// ---------------------------------------------------------------------
// 8. Welch t-test against an independent reference implementation.
// ---------------------------------------------------------------------
fn reference_welch(a: &[f64], b: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64], m: f64| {
        s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s.len() as f64 - 1.0)
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se = va / na + vb / nb;
    let t = (ma - mb) / se.sqrt();
    let df = se * se / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}

#[test]
fn criterion_8_welch_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0008);
    for pair in 0..50u32 {
        let na = rng.random_range(3..=12usize);
        let nb = rng.random_range(3..=12usize);
        let shift: f64 = rng.random_range(-1.0..1.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        let ours = welch_t_test(&a, &b).unwrap();
        let reference = reference_welch(&a, &b);
        assert!(
            (ours.p_value - reference).abs() < 1e-9,
            "pair {pair}: {} vs {reference}",
            ours.p_value
        );
        assert!(!ours.degenerate);
    }
    let identical = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(identical.p_value, 1.0);
    println!("acceptance criterion 8 (welch t-test vs reference, 50 pairs at 1e-9): PASS");
}

// ---------------------------------------------------------------------
// 9. Prompt fidelity.
// ---------------------------------------------------------------------
#[test]
fn criterion_9_prompt_fidelity() {
    // Template bodies are pinned by checksum; any edit must be deliberate.
    let frozen = [
        (TemplateId::MultiplCodegen, "1a3505b55da1b701c03081d7aa793b87d7e80377355484555c6a72fd54b3b3d8"),
        (TemplateId::MultiplTestgen, "12bd4df9120462f1ec8fe719e23dc0f79fd77b6b828ed10b641440ad403c0b5e"),
        (TemplateId::LcbCodegen, "6f616b51816e9b3dd9d34f9a92f80659440848bc452b0a90f5ae7debbc57d249"),
        (TemplateId::LcbTestgen, "cbc9654878c54d56fbc3c2b68a277a422f3f8a2eb9cac03a9900188d0a1fac41"),
    ];
    for (id, checksum) in frozen {
        assert_eq!(
            PromptTemplate::builtin(id).checksum(),
            checksum,
            "template {id} body changed"
        );
    }

    let problem = ProblemSpec {
        id: "fixture".to_string(),
        prompt: "--lua\nlocal function add(a,b)".to_string(),
        source_prompt: None,
        target_language: LanguageId::lua(),
        source_language: LanguageId::python(),
        entry_point: Some("add".to_string()),
        io_mode: IoMode::FunctionCall,
        float_tolerance: None,
        reference_tests: None,
    };
    let codegen = render_prompt(&PromptTemplate::builtin(TemplateId::MultiplCodegen), &problem)
        .unwrap();
    let testgen = render_prompt(&PromptTemplate::builtin(TemplateId::MultiplTestgen), &problem)
        .unwrap();
    assert!(codegen.contains("Please continue to complete the function"));
    assert!(testgen.contains("10 diverse and meaningful test case inputs"));
    assert_eq!(
        codegen,
        include_str!("fixtures/rendered-multipl-codegen.txt"),
        "rendered codegen prompt drifted from the pinned fixture"
    );
    assert_eq!(
        testgen,
        include_str!("fixtures/rendered-multipl-testgen.txt"),
        "rendered testgen prompt drifted from the pinned fixture"
    );
    println!("acceptance criterion 9 (prompt fidelity, byte-pinned fixtures): PASS");
}
