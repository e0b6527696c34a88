//! Synthetic benchmark bundles for deterministic end-to-end runs.
//!
//! A bundle is a mini problem set plus a mock completion script. Each
//! problem is a tiny arithmetic function with bundled reference tests
//! computed from the true implementation. The script controls, per seeded
//! coin flip, whether each generated program is correct:
//!
//!   - reference programs are correct with `ref_correct_prob` (per problem
//!     and reference slot, shared by every trial),
//!   - the greedy target candidate is correct with `greedy_correct_prob`
//!     per trial,
//!   - each hedged candidate is correct with `hedged_correct_prob`,
//!     independently.
//!
//! Incorrect programs either return a shifted value or raise, so wrong
//! references produce consistent wrong oracles and wrong candidates match
//! them — the failure mode that majority voting over references suppresses.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forge::ForgeConfig;
use crate::gateway::{MockEntry, MockScript, TemplateId};
use crate::hedge::TemperaturePlan;
use crate::model::{IoMode, LanguageId, ProblemSpec, ReferenceTest};

use super::{ProblemSet, SetStyle};

/// Reference slots scripted per problem regardless of the configured `h`, so
/// the random stream is identical across ablation arms.
const REFERENCE_SLOTS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub problems: u32,
    pub trials: u32,
    pub greedy_correct_prob: f64,
    pub hedged_correct_prob: f64,
    pub ref_correct_prob: f64,
    pub reference_count: u32,
    pub case_target: u32,
    pub seed: u64,
    pub language: LanguageId,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            problems: 20,
            trials: 10,
            greedy_correct_prob: 0.34,
            hedged_correct_prob: 0.5,
            ref_correct_prob: 0.8,
            reference_count: 10,
            case_target: 3,
            seed: 7,
            language: LanguageId::python(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationBundle {
    pub set: ProblemSet,
    pub script: MockScript,
    pub forge: ForgeConfig,
    pub plan: TemperaturePlan,
}

struct MiniProblem {
    id: String,
    entry: String,
    mul: i64,
    add: i64,
}

impl MiniProblem {
    fn new(index: u32) -> Self {
        MiniProblem {
            id: format!("p{index:02}"),
            entry: format!("f{index}"),
            mul: i64::from(index % 3) + 2,
            add: i64::from(index),
        }
    }

    fn apply(&self, a: i64, b: i64) -> i64 {
        a * self.mul + b + self.add
    }

    fn correct_source(&self, label: &str) -> String {
        format!(
            "# {label}\ndef {}(a, b):\n    return a * {} + b + {}\n",
            self.entry, self.mul, self.add
        )
    }

    fn shifted_source(&self, label: &str) -> String {
        format!(
            "# {label}\ndef {}(a, b):\n    return a * {} + b + {}\n",
            self.entry,
            self.mul,
            self.add + 1
        )
    }

    fn crashing_source(&self, label: &str) -> String {
        format!(
            "# {label}\ndef {}(a, b):\n    raise ValueError(\"sampled a broken path\")\n",
            self.entry
        )
    }

    fn test_inputs(&self, index: u32, count: u32) -> Vec<(i64, i64)> {
        (0..count)
            .map(|j| {
                let j = i64::from(j);
                (j + i64::from(index % 3), 2 * j + 1)
            })
            .collect()
    }

    fn spec(&self, index: u32, language: &LanguageId) -> ProblemSpec {
        let grading = [(i64::from(index) + 10, 3), (1, 1)];
        ProblemSpec {
            id: self.id.clone(),
            prompt: format!(
                "def {}(a, b):\n    \"\"\"Return a * {} + b + {}.\"\"\"\n",
                self.entry, self.mul, self.add
            ),
            source_prompt: None,
            target_language: language.clone(),
            source_language: language.clone(),
            entry_point: Some(self.entry.clone()),
            io_mode: IoMode::FunctionCall,
            float_tolerance: None,
            reference_tests: Some(
                grading
                    .iter()
                    .map(|&(a, b)| ReferenceTest::Io {
                        input: format!("({a}, {b})"),
                        expected_output: self.apply(a, b).to_string(),
                    })
                    .collect(),
            ),
        }
    }
}

fn fenced(source: &str) -> String {
    format!("```python\n{source}```\n")
}

/// Builds the problem set and mock script for `spec`, fully determined by
/// `spec.seed`.
pub fn build_simulation(spec: &SimulationSpec) -> SimulationBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let forge = ForgeConfig {
        reference_count: spec.reference_count,
        target_cases: spec.case_target,
        max_attempts: 2,
        ..ForgeConfig::default()
    };
    let plan = TemperaturePlan::default_paper();
    let initial_temp = forge.initial_temperature.clone();

    let mut problems = Vec::with_capacity(spec.problems as usize);
    let mut script = MockScript::default();

    for index in 0..spec.problems {
        let mini = MiniProblem::new(index);
        problems.push(mini.spec(index, &spec.language));

        // Reference completions: one coin per slot, shared by all trials.
        for slot in 0..REFERENCE_SLOTS.max(spec.reference_count) {
            let correct = rng.random_bool(spec.ref_correct_prob);
            let label = format!("reference {slot}");
            let source = if correct {
                mini.correct_source(&label)
            } else {
                mini.shifted_source(&label)
            };
            script.push(MockEntry {
                template: TemplateId::MultiplCodegen,
                problem: mini.id.clone(),
                language: spec.language.clone(),
                temperature: initial_temp.clone(),
                sample: slot,
                trial: None,
                completion: fenced(&source),
            });
        }

        // Test-input generation: one scripted attempt with exactly the
        // target number of distinct tuples.
        let tuples: Vec<String> = mini
            .test_inputs(index, spec.case_target)
            .iter()
            .map(|(a, b)| format!("({a}, {b})"))
            .collect();
        script.push(MockEntry {
            template: TemplateId::MultiplTestgen,
            problem: mini.id.clone(),
            language: spec.language.clone(),
            temperature: initial_temp.clone(),
            sample: 0,
            trial: None,
            completion: format!("```\n{}\n```\n", tuples.join("\n")),
        });

        // Target-language candidates, one coin per (trial, bucket, sample).
        for trial in 0..spec.trials {
            for bucket in plan.buckets() {
                for sample in 0..bucket.count {
                    let p = if bucket.temperature.is_zero() {
                        spec.greedy_correct_prob
                    } else {
                        spec.hedged_correct_prob
                    };
                    let correct = rng.random_bool(p);
                    let crashes = !correct && rng.random_bool(0.3);
                    let label = format!(
                        "candidate t{} #{sample} trial {trial}",
                        bucket.temperature
                    );
                    let source = if correct {
                        mini.correct_source(&label)
                    } else if crashes {
                        mini.crashing_source(&label)
                    } else {
                        mini.shifted_source(&label)
                    };
                    script.push(MockEntry {
                        template: TemplateId::MultiplCodegen,
                        problem: mini.id.clone(),
                        language: spec.language.clone(),
                        temperature: bucket.temperature.clone(),
                        sample,
                        trial: Some(trial),
                        completion: fenced(&source),
                    });
                }
            }
        }
    }

    SimulationBundle {
        set: ProblemSet {
            name: format!("simulated-{}-problems-seed-{}", spec.problems, spec.seed),
            style: SetStyle::MultiplE,
            problems,
        },
        script,
        forge,
        plan,
    }
}

/// Writes `problems.jsonl` and `mock-script.json` into `dir`.
pub fn write_bundle(bundle: &SimulationBundle, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let problems_path = dir.join("problems.jsonl");
    let mut lines = String::new();
    for problem in &bundle.set.problems {
        lines.push_str(&serde_json::to_string(problem).expect("problem serializes"));
        lines.push('\n');
    }
    std::fs::write(&problems_path, lines)?;
    let script_path = dir.join("mock-script.json");
    bundle
        .script
        .save(&script_path)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok((problems_path, script_path))
}
