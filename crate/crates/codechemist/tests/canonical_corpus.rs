//! Golden corpus pinning the canonical output serializer across languages.
//!
//! Twenty values are pushed through an identity entry point in every
//! language with an installed toolchain; each wrapped execution must print
//! the frozen canonical string, which doubles as the Rust-side rendering of
//! the same value. Languages without a toolchain are skipped with a visible
//! note; python plus at least one compiled language must be present.

mod common;

use codechemist::model::{CandidateProgram, LanguageId, Origin, Temperature, TestInput};
use codechemist::sandbox::{
    parse_argument_tuple, wrap_entry_call, ExecStatus, RunnerRegistry, Sandbox,
};

use common::fast_python;

struct CorpusEntry {
    /// Argument tuple wrapping the single value.
    payload: &'static str,
    /// Frozen canonical output, identical in every language.
    expected: &'static str,
    /// Candidate source per language: a typed identity function `echo`.
    cpp: &'static str,
}

const CPP_INT: &str = "long long echo(long long x) { return x; }";
const CPP_DOUBLE: &str = "double echo(double x) { return x; }";
const CPP_BOOL: &str = "bool echo(bool x) { return x; }";
const CPP_STRING: &str = "#include <string>\nstd::string echo(std::string x) { return x; }";
const CPP_VEC_INT: &str = "#include <vector>\nstd::vector<int> echo(std::vector<int> x) { return x; }";
const CPP_VEC_VEC: &str =
    "#include <vector>\nstd::vector<std::vector<int>> echo(std::vector<std::vector<int>> x) { return x; }";
const CPP_VEC_DOUBLE: &str =
    "#include <vector>\nstd::vector<double> echo(std::vector<double> x) { return x; }";
const CPP_VEC_STRING: &str =
    "#include <string>\n#include <vector>\nstd::vector<std::string> echo(std::vector<std::string> x) { return x; }";
const CPP_MAP: &str =
    "#include <map>\n#include <string>\nstd::map<std::string, int> echo(std::map<std::string, int> x) { return x; }";

fn corpus() -> Vec<CorpusEntry> {
    vec![
        CorpusEntry { payload: "(0,)", expected: "0", cpp: CPP_INT },
        CorpusEntry { payload: "(7,)", expected: "7", cpp: CPP_INT },
        CorpusEntry { payload: "(-3,)", expected: "-3", cpp: CPP_INT },
        CorpusEntry { payload: "(123456789,)", expected: "123456789", cpp: CPP_INT },
        CorpusEntry { payload: "(2.5,)", expected: "2.5", cpp: CPP_DOUBLE },
        CorpusEntry { payload: "(0.1,)", expected: "0.1", cpp: CPP_DOUBLE },
        CorpusEntry { payload: "(-0.75,)", expected: "-0.75", cpp: CPP_DOUBLE },
        CorpusEntry { payload: "(2.0,)", expected: "2.0", cpp: CPP_DOUBLE },
        CorpusEntry { payload: "(1e16,)", expected: "1e+16", cpp: CPP_DOUBLE },
        CorpusEntry { payload: "(True,)", expected: "true", cpp: CPP_BOOL },
        CorpusEntry { payload: "(False,)", expected: "false", cpp: CPP_BOOL },
        CorpusEntry { payload: "('hello',)", expected: "hello", cpp: CPP_STRING },
        CorpusEntry { payload: "('',)", expected: "", cpp: CPP_STRING },
        CorpusEntry { payload: "('a b  c',)", expected: "a b  c", cpp: CPP_STRING },
        CorpusEntry { payload: "([1, 2, 3],)", expected: "[1, 2, 3]", cpp: CPP_VEC_INT },
        CorpusEntry { payload: "([],)", expected: "[]", cpp: CPP_VEC_INT },
        CorpusEntry { payload: "([[1], [2, 3]],)", expected: "[[1], [2, 3]]", cpp: CPP_VEC_VEC },
        CorpusEntry { payload: "([0.5, 1.5],)", expected: "[0.5, 1.5]", cpp: CPP_VEC_DOUBLE },
        CorpusEntry {
            payload: "(['a', 'b'],)",
            expected: "[\"a\", \"b\"]",
            cpp: CPP_VEC_STRING,
        },
        CorpusEntry {
            payload: "({'b': 2, 'a': 1},)",
            expected: "{\"a\": 1, \"b\": 2}",
            cpp: CPP_MAP,
        },
    ]
}

fn candidate_for(language: &LanguageId, entry: &CorpusEntry) -> String {
    match language.as_str() {
        "python" => "def echo(x):\n    return x".to_string(),
        "lua" => "local function echo(x) return x end".to_string(),
        "cpp" => entry.cpp.to_string(),
        "java" => "class Problem {\n    static Object echo(Object x) { return x; }\n}".to_string(),
        other => panic!("no corpus candidate for {other}"),
    }
}

#[test]
fn canonical_serializer_agrees_across_languages() {
    let mut registry = RunnerRegistry::default();
    registry.insert(fast_python());
    let sandbox = Sandbox::new(registry, 2);

    // The Rust-side renderer is the reference: frozen strings must match it.
    for entry in corpus() {
        let args = parse_argument_tuple(entry.payload).unwrap();
        assert_eq!(
            args[0].canonical(),
            entry.expected,
            "frozen string for {} drifted from the reference renderer",
            entry.payload
        );
    }

    let languages = [
        LanguageId::python(),
        LanguageId::lua(),
        LanguageId::cpp(),
        LanguageId::java(),
    ];
    let mut ran = Vec::new();
    let mut skipped = Vec::new();
    for language in languages {
        let probe = sandbox.probe(&language);
        if !probe.available {
            eprintln!("corpus: skipping `{language}` ({})", probe.detail);
            skipped.push(language);
            continue;
        }
        for entry in corpus() {
            let candidate = CandidateProgram {
                source: candidate_for(&language, &entry),
                language: language.clone(),
                temperature: Temperature::zero(),
                sample_index: 0,
                origin: Origin::Reference,
            };
            let input = TestInput {
                payload: entry.payload.to_string(),
                index: 0,
            };
            let wrapped = wrap_entry_call(&candidate, "echo", &input).unwrap();
            let runner = sandbox.runner(&language).unwrap();
            let outcome = sandbox.execute(runner, &wrapped, None).unwrap();
            assert_eq!(
                outcome.status,
                ExecStatus::Ok,
                "`{language}` {}: {}",
                entry.payload,
                outcome.stderr
            );
            assert_eq!(
                outcome.canonical_output.as_deref(),
                Some(entry.expected),
                "`{language}` disagrees on {}",
                entry.payload
            );
        }
        ran.push(language);
    }

    eprintln!("corpus: executed in {ran:?}, skipped {skipped:?}");
    assert!(
        ran.contains(&LanguageId::python()),
        "python toolchain is required for the corpus"
    );
    assert!(
        ran.iter().any(|l| matches!(l.as_str(), "cpp" | "java")),
        "at least one compiled language is required for the corpus"
    );
}
