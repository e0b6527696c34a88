//! Command-line entry point for the codechemist pipeline.
//!
//! Subcommands: `solve` (full pipeline), `gen-tests` (forge a suite only),
//! `eval` (method comparison over a problem set), `probe-toolchains`.
//! Logs go to stderr; stdout carries only the selected program or report
//! path so the binary composes in shell pipelines.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use codechemist::bench::{
    emit_report, evaluate, load_problems, EvalOptions, ProblemSet, SetStyle,
};
use codechemist::forge::forge_test_suite;
use codechemist::gateway::{
    Backend, BackendKind, GatewayError, HttpChatBackend, MockBackend, PromptLibrary,
};
use codechemist::hedge::{solve, SolveOptions};
use codechemist::model::{LanguageId, ProblemSpec};
use codechemist::sandbox::{RunnerRegistry, Sandbox, SandboxError};

use config::{env_overrides, AppConfig, ConfigError, FileConfig, Overrides};

const EXIT_GRADED_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TOOLCHAIN: u8 = 3;
const EXIT_BACKEND: u8 = 4;

#[derive(Parser)]
#[command(name = "codechemist", version, about = "Test-time scaling for low-resource language code generation")]
struct Cli {
    /// TOML config file (defaults to ./codechemist.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Backend kind: mock or http-chat.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Model name sent to the backend.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Chat-completion endpoint URL (http-chat backend).
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Completion script for the mock backend.
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,
    /// Runner registry TOML overriding the built-in language configs.
    #[arg(long, global = true)]
    runners: Option<PathBuf>,
    /// Directory with prompt template overrides.
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
    /// Sandbox worker count; 0 means one per CPU.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Root directory for run artifacts.
    #[arg(long, global = true)]
    artifacts: Option<PathBuf>,
    /// Keep per-execution temp workdirs for debugging.
    #[arg(long, global = true)]
    keep_artifacts: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ForgeFlags {
    /// Reference candidates per problem (the voting pool size).
    #[arg(long)]
    h: Option<u32>,
    /// Target number of consensus test cases.
    #[arg(long)]
    n: Option<u32>,
    /// Retry budget for test-input generation.
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Temperature added after each failed attempt.
    #[arg(long)]
    escalation_step: Option<String>,
    /// Sampling plan as temperature:count pairs, e.g. 0:1,0.7:3,0.9:3,1.1:3.
    #[arg(long)]
    plan: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and print/store the selected program(s).
    Solve {
        /// Problem file: a JSON object, or a .jsonl set.
        #[arg(long)]
        problem: PathBuf,
        /// Override every problem's target language.
        #[arg(long)]
        target: Option<String>,
        /// Override every problem's source language.
        #[arg(long)]
        source: Option<String>,
        /// Reuse a cached suite.json instead of forging (bare flag uses the
        /// problem's artifact directory).
        #[arg(long, num_args = 0..=1, default_missing_value = "auto")]
        suite_cache: Option<PathBuf>,
        /// Stop scoring a pool once a candidate passes every case.
        #[arg(long)]
        short_circuit: bool,
        #[command(flatten)]
        forge: ForgeFlags,
    },
    /// Forge and persist a consensus test suite without selecting.
    GenTests {
        /// Problem file: a JSON object, or a .jsonl set.
        #[arg(long)]
        problem: PathBuf,
        /// Output path for suite.json (single-problem input only).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        forge: ForgeFlags,
    },
    /// Compare methods over a problem set and emit a report file.
    Eval {
        /// Line-delimited JSON problem set.
        #[arg(long)]
        problems: PathBuf,
        /// Record style: multipl-e, lcb-x or custom.
        #[arg(long)]
        style: Option<String>,
        /// Comma-separated subset of vanilla,majority-voting,codechemist.
        #[arg(long)]
        methods: Option<String>,
        /// Independent trials per problem.
        #[arg(long)]
        k: Option<u32>,
        /// Report format: json, csv or markdown-table.
        #[arg(long)]
        report: Option<String>,
        #[command(flatten)]
        forge: ForgeFlags,
    },
    /// Report which registered language toolchains are installed.
    ProbeToolchains,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(sandbox) = cause.downcast_ref::<SandboxError>() {
            if matches!(
                sandbox,
                SandboxError::ToolchainMissing { .. } | SandboxError::RunnerMissing(_)
            ) {
                return EXIT_TOOLCHAIN;
            }
        }
        if cause.is::<GatewayError>() {
            return EXIT_BACKEND;
        }
    }
    1
}

struct Ctx {
    config: AppConfig,
    backend: Box<dyn Backend>,
    sandbox: Sandbox,
    library: PromptLibrary,
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let file = match &cli.config {
        Some(path) => Some(FileConfig::load(path)?),
        None => {
            let default_path = Path::new("codechemist.toml");
            if default_path.is_file() {
                Some(FileConfig::load(default_path)?)
            } else {
                None
            }
        }
    };
    let env: BTreeMap<String, String> = std::env::vars().collect();
    let env_layer = env_overrides(&env)?;

    let mut flags = Overrides {
        backend_kind: cli.backend.clone(),
        model: cli.model.clone(),
        endpoint: cli.endpoint.clone(),
        mock_script: cli.mock_script.clone(),
        runners: cli.runners.clone(),
        prompts: cli.prompts.clone(),
        jobs: cli.jobs,
        artifacts: cli.artifacts.clone(),
        keep_artifacts: cli.keep_artifacts.then_some(true),
        ..Overrides::default()
    };
    match &cli.command {
        Command::Solve { forge, .. } | Command::GenTests { forge, .. } => {
            merge_forge_flags(&mut flags, forge);
        }
        Command::Eval {
            forge,
            methods,
            k,
            report,
            ..
        } => {
            merge_forge_flags(&mut flags, forge);
            flags.methods = methods.clone();
            flags.trials = *k;
            flags.report = report.clone();
        }
        Command::ProbeToolchains => {}
    }

    let config = config::resolve(file, &[&env_layer, &flags])?;
    let ctx = build_ctx(config)?;

    match cli.command {
        Command::Solve {
            problem,
            target,
            source,
            suite_cache,
            short_circuit,
            ..
        } => cmd_solve(&ctx, &problem, target, source, suite_cache, short_circuit),
        Command::GenTests { problem, out, .. } => cmd_gen_tests(&ctx, &problem, out),
        Command::Eval {
            problems, style, ..
        } => cmd_eval(&ctx, &problems, style),
        Command::ProbeToolchains => cmd_probe_toolchains(&ctx),
    }
}

fn merge_forge_flags(flags: &mut Overrides, forge: &ForgeFlags) {
    flags.forge_h = forge.h;
    flags.forge_n = forge.n;
    flags.max_attempts = forge.max_attempts;
    flags.escalation_step = forge.escalation_step.clone();
    flags.plan = forge.plan.clone();
}

fn build_ctx(config: AppConfig) -> anyhow::Result<Ctx> {
    let backend: Box<dyn Backend> = match config.backend.kind {
        BackendKind::Mock => match &config.mock_script {
            Some(path) => Box::new(
                MockBackend::from_script_file(config.backend.model_name.clone(), path)
                    .with_context(|| format!("loading mock script {}", path.display()))?,
            ),
            None => Box::new(MockBackend::unscripted(config.backend.model_name.clone())),
        },
        BackendKind::HttpChat => Box::new(HttpChatBackend::new(config.backend.clone())?),
    };
    let registry = match &config.runners_file {
        Some(path) => RunnerRegistry::load(path)?,
        None => RunnerRegistry::default(),
    };
    let mut sandbox =
        Sandbox::new(registry, config.jobs).with_keep_artifacts(config.keep_artifacts);
    if let Some(root) = &config.workdir_root {
        sandbox = sandbox.with_workdir_root(root.clone());
    }
    let library = match &config.prompts_dir {
        Some(dir) => PromptLibrary::from_dir(dir)?,
        None => PromptLibrary::default(),
    };
    Ok(Ctx {
        config,
        backend,
        sandbox,
        library,
    })
}

/// Loads either a single-problem JSON file or a .jsonl set.
fn load_problem_input(
    path: &Path,
    target: Option<String>,
    source: Option<String>,
) -> anyhow::Result<ProblemSet> {
    let mut set = if path.extension().is_some_and(|e| e == "jsonl") {
        load_problems(path, SetStyle::Custom)?
    } else {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let problem: ProblemSpec = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        ProblemSet {
            name: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "problem".to_string()),
            style: SetStyle::Custom,
            problems: vec![problem],
        }
    };
    for problem in &mut set.problems {
        if let Some(target) = &target {
            problem.target_language = LanguageId::new(target);
        }
        if let Some(source) = &source {
            problem.source_language = LanguageId::new(source);
        }
        problem
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    Ok(set)
}

/// Every language the run will execute must have a working toolchain.
fn require_toolchains(ctx: &Ctx, set: &ProblemSet, include_source: bool) -> anyhow::Result<()> {
    let mut languages: Vec<LanguageId> = Vec::new();
    for problem in &set.problems {
        if !languages.contains(&problem.target_language) {
            languages.push(problem.target_language.clone());
        }
        if include_source && !languages.contains(&problem.source_language) {
            languages.push(problem.source_language.clone());
        }
    }
    for language in languages {
        let report = ctx.sandbox.probe(&language);
        if !report.available {
            log::error!("toolchain probe for `{language}` failed: {}", report.detail);
            return Err(SandboxError::ToolchainMissing {
                language,
                program: report.detail,
            }
            .into());
        }
    }
    Ok(())
}

fn write_snapshot(ctx: &Ctx, command: serde_json::Value) -> anyhow::Result<serde_json::Value> {
    let snapshot = serde_json::json!({
        "config": &ctx.config,
        "command": command,
    });
    let path = ctx.config.artifact_root.join("config_snapshot.json");
    std::fs::create_dir_all(&ctx.config.artifact_root)?;
    let mut text = serde_json::to_string_pretty(&snapshot)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(snapshot)
}

fn cmd_solve(
    ctx: &Ctx,
    problem_path: &Path,
    target: Option<String>,
    source: Option<String>,
    suite_cache: Option<PathBuf>,
    short_circuit: bool,
) -> anyhow::Result<u8> {
    let set = load_problem_input(problem_path, target, source)?;
    require_toolchains(ctx, &set, true)?;
    write_snapshot(
        ctx,
        serde_json::json!({
            "subcommand": "solve",
            "problem": problem_path,
            "suite_cache": suite_cache,
            "short_circuit": short_circuit,
        }),
    )?;

    let single = set.problems.len() == 1;
    for problem in &set.problems {
        let artifact_dir = ctx.config.artifact_root.join(&problem.id);
        let cache = suite_cache.as_ref().map(|path| {
            if path.as_os_str() == "auto" {
                artifact_dir.join("suite.json")
            } else {
                path.clone()
            }
        });
        let options = SolveOptions {
            artifact_dir: Some(artifact_dir.clone()),
            suite_cache: cache,
            short_circuit,
        };
        let output = solve(
            ctx.backend.as_ref(),
            &ctx.sandbox,
            problem,
            &ctx.config.forge,
            &ctx.config.plan,
            &ctx.library,
            &options,
        )?;
        log::info!(
            "`{}`: {} (score {}/{}, reason {:?})",
            problem.id,
            output.selection.chosen.file_stem(),
            output.selection.score.passed,
            output.selection.score.valid,
            output.selection.reason,
        );
        if single {
            println!("{}", output.selection.chosen.source);
        } else {
            println!("{}\t{}", problem.id, artifact_dir.display());
        }
    }
    Ok(0)
}

fn cmd_gen_tests(ctx: &Ctx, problem_path: &Path, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let set = load_problem_input(problem_path, None, None)?;
    if out.is_some() && set.problems.len() > 1 {
        bail!(ConfigError::Invalid(
            "--out requires a single-problem input".to_string()
        ));
    }
    require_toolchains(ctx, &set, true)?;
    write_snapshot(
        ctx,
        serde_json::json!({ "subcommand": "gen-tests", "problem": problem_path }),
    )?;

    for problem in &set.problems {
        let suite = forge_test_suite(
            ctx.backend.as_ref(),
            &ctx.sandbox,
            problem,
            &ctx.library,
            &ctx.config.forge,
        )?;
        let path = out
            .clone()
            .unwrap_or_else(|| ctx.config.artifact_root.join(&problem.id).join("suite.json"));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(&suite)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        let usable = suite.usable_len();
        log::info!(
            "suite for `{}`: {usable} consensus cases of {} recorded, attempts {}, final temperature {}",
            problem.id,
            suite.cases.len(),
            suite.attempts_used,
            suite.final_temperature,
        );
        if usable == 0 {
            log::warn!(
                "suite for `{}` has no usable cases; selection will fall back to greedy",
                problem.id
            );
        }
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_eval(ctx: &Ctx, problems_path: &Path, style: Option<String>) -> anyhow::Result<u8> {
    let style = match style {
        Some(text) => text.parse::<SetStyle>()?,
        None => SetStyle::Custom,
    };
    let set = load_problems(problems_path, style)?;
    require_toolchains(ctx, &set, true)?;

    let snapshot = write_snapshot(
        ctx,
        serde_json::json!({
            "subcommand": "eval",
            "problems": problems_path,
            "style": style,
        }),
    )?;
    let options = EvalOptions {
        methods: ctx.config.methods.clone(),
        trials: ctx.config.trials,
        forge: ctx.config.forge.clone(),
        plan: ctx.config.plan.clone(),
        // Mock runs replay byte-identically; wall times would break that.
        deterministic: ctx.config.backend.kind == BackendKind::Mock,
    };
    let report = evaluate(
        ctx.backend.as_ref(),
        &ctx.sandbox,
        &set,
        &ctx.library,
        &options,
        snapshot,
    )?;

    let path = ctx
        .config
        .artifact_root
        .join(format!("report.{}", ctx.config.report_format.extension()));
    emit_report(&report, ctx.config.report_format, &path)?;
    println!("{}", path.display());

    if report.has_graded_errors() {
        for result in &report.results {
            for err in &result.graded_errors {
                log::error!(
                    "graded-error [{}] `{}`: {}",
                    result.method,
                    err.problem_id,
                    err.detail
                );
            }
        }
        return Ok(EXIT_GRADED_ERROR);
    }
    Ok(0)
}

fn cmd_probe_toolchains(ctx: &Ctx) -> anyhow::Result<u8> {
    for report in ctx.sandbox.probe_all() {
        let status = if report.available { "ok" } else { "missing" };
        println!("{}: {} ({})", report.language, status, report.detail);
    }
    Ok(0)
}
