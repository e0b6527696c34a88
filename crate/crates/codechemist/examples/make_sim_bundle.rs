//! Writes a simulated benchmark bundle (problems.jsonl + mock-script.json)
//! into a directory, ready for `codechemist eval --backend mock`.
//!
//! Usage: cargo run --example make_sim_bundle -- <out-dir> [problems] [trials] [seed]

use codechemist::bench::simulation::{build_simulation, write_bundle, SimulationSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let out_dir = args.next().unwrap_or_else(|| "sim-bundle".to_string());
    let mut spec = SimulationSpec::default();
    if let Some(problems) = args.next() {
        spec.problems = problems.parse().expect("problems must be an integer");
    }
    if let Some(trials) = args.next() {
        spec.trials = trials.parse().expect("trials must be an integer");
    }
    if let Some(seed) = args.next() {
        spec.seed = seed.parse().expect("seed must be an integer");
    }

    let bundle = build_simulation(&spec);
    let (problems, script) = write_bundle(&bundle, std::path::Path::new(&out_dir)).unwrap();
    println!("{}", problems.display());
    println!("{}", script.display());
    eprintln!(
        "wrote {} problems, {} script entries (seed {})",
        bundle.set.problems.len(),
        bundle.script.entries.len(),
        spec.seed
    );
    eprintln!(
        "suggested run: codechemist eval --problems {} --backend mock --mock-script {} --n {} --k {}",
        problems.display(),
        script.display(),
        bundle.forge.target_cases,
        spec.trials
    );
}
