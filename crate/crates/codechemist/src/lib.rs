//! Test-time scaling for code generation in low-resource languages.
//!
//! The pipeline has three stages:
//!
//! 1. **Oracle forging** ([`forge`]): generate reference programs in a
//!    high-resource language, generate test inputs, execute everything, and
//!    keep the input/output pairs whose outputs win a strict majority vote.
//! 2. **Hedged sampling** ([`hedge`]): draw target-language candidates at
//!    several temperatures, always including the greedy (temperature 0)
//!    sample as a reliable fallback.
//! 3. **Execution-based selection** ([`hedge`]): run every candidate against
//!    the forged oracles and pick the one with the highest pass rate, with
//!    ties broken toward lower temperature.
//!
//! [`bench`] adds problem-set loading, baselines, unbiased pass@k scoring and
//! significance tests; [`gateway`] and [`sandbox`] supply the model backends
//! and the polyglot execution engine underneath.

pub mod bench;
pub mod forge;
pub mod gateway;
pub mod hedge;
pub mod model;
pub mod pool;
pub mod sandbox;

pub use model::{
    canonical_compare, canonical_compare_with_tolerance, CandidateProgram, CaseStatus, IoMode,
    LanguageId, Origin, ProblemSpec, ReferenceTest, ScoredCandidate, Selection, SelectionReason,
    Temperature, TestCase, TestInput, TestSuite, UtilityScore,
};
