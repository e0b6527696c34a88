//! Compile and run candidate programs under resource limits.
//!
//! Isolation level is subprocess + fresh temp workdir + wall-clock timeout +
//! output cap. Each execution gets its own directory, the full process group
//! is killed on timeout, and captured stdout is normalized to canonical form
//! for comparison.

mod literal;
mod runner;
mod wrap;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use literal::{canonical_float, parse_argument_tuple, parse_value, ArgValue};
pub use runner::{
    default_cpp, default_java, default_lua, default_python, RunnerConfig, RunnerRegistry,
    DEFAULT_MAX_OUTPUT_BYTES,
};
pub use wrap::{wrap_entry_call, wrapped_languages};

use crate::model::LanguageId;
use crate::pool::WorkerPool;

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("no runner registered for language `{0}`")]
    RunnerMissing(LanguageId),
    #[error("toolchain for `{language}` is not installed: `{program}` not found")]
    ToolchainMissing { language: LanguageId, program: String },
    #[error("runner config for `{language}` is invalid: {reason}")]
    InvalidRunner { language: LanguageId, reason: String },
    #[error("no entry-call wrapper template for language `{0}`")]
    NoWrapperTemplate(LanguageId),
    #[error("cannot parse argument tuple `{payload}`: {reason}")]
    InputParseFailure { payload: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecStatus {
    Ok,
    CompileFail,
    RuntimeCrash,
    Timeout,
    OutputOverflow,
}

/// Classified result of one compile-and-run of a program on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    pub duration_secs: f64,
    /// Present iff status is `ok`.
    pub canonical_output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityMark {
    pub valid: bool,
    pub cause: ExecStatus,
}

/// An execution is valid iff it finished cleanly.
pub fn classify(outcome: &ExecutionOutcome) -> ValidityMark {
    ValidityMark {
        valid: outcome.status == ExecStatus::Ok,
        cause: outcome.status,
    }
}

/// CRLF to LF, trailing whitespace stripped per line, trailing blank lines
/// dropped. Interior content is untouched.
pub fn normalize_output(raw: &str) -> String {
    let unified = raw.replace("\r\n", "\n");
    let mut lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    while lines.last() == Some(&"") {
        lines.pop();
    }
    lines.join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub language: LanguageId,
    pub available: bool,
    pub detail: String,
}

/// Shared execution engine. Safe to call from many worker threads; the
/// embedded pool bounds simultaneous subprocesses.
#[derive(Debug)]
pub struct Sandbox {
    registry: RunnerRegistry,
    pool: WorkerPool,
    keep_artifacts: bool,
    workdir_root: Option<PathBuf>,
}

impl Sandbox {
    pub fn new(registry: RunnerRegistry, jobs: usize) -> Self {
        Sandbox {
            registry,
            pool: WorkerPool::new(jobs),
            keep_artifacts: false,
            workdir_root: None,
        }
    }

    pub fn with_keep_artifacts(mut self, keep: bool) -> Self {
        self.keep_artifacts = keep;
        self
    }

    pub fn with_workdir_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.workdir_root = Some(root.into());
        self
    }

    pub fn registry(&self) -> &RunnerRegistry {
        &self.registry
    }

    pub fn runner(&self, language: &LanguageId) -> Result<&RunnerConfig, SandboxError> {
        self.registry.get(language)
    }

    pub fn pool(&self) -> &WorkerPool {
        &self.pool
    }

    /// Writes `source` into a fresh workdir, compiles if the language needs
    /// it, runs with `stdin` attached, and classifies the outcome.
    pub fn execute(
        &self,
        config: &RunnerConfig,
        source: &str,
        stdin: Option<&str>,
    ) -> Result<ExecutionOutcome, SandboxError> {
        let workdir = match &self.workdir_root {
            Some(root) => {
                std::fs::create_dir_all(root)?;
                tempfile::Builder::new().prefix("codechemist-").tempdir_in(root)?
            }
            None => tempfile::Builder::new().prefix("codechemist-").tempdir()?,
        };
        let dir = workdir.path().to_path_buf();
        let file = dir.join(config.source_file_name());
        std::fs::write(&file, source)?;
        let exe = dir.join("prog");

        let outcome = self.execute_in(config, &dir, &file, &exe, stdin)?;

        if self.keep_artifacts {
            let kept = workdir.keep();
            log::info!("keeping execution artifacts in {}", kept.display());
        }
        Ok(outcome)
    }

    fn execute_in(
        &self,
        config: &RunnerConfig,
        dir: &Path,
        file: &Path,
        exe: &Path,
        stdin: Option<&str>,
    ) -> Result<ExecutionOutcome, SandboxError> {
        let started = Instant::now();
        if let Some(compile) = &config.compile_command {
            let argv = substitute(compile, dir, file, exe);
            let raw = run_limited(
                &argv,
                dir,
                None,
                config.compile_timeout(),
                config.max_output_bytes,
            )
            .map_err(|e| annotate_spawn(e, &config.language, &argv[0]))?;
            if raw.timed_out || !raw.exit_ok {
                let mut stderr = raw.stderr;
                if raw.timed_out {
                    stderr.push_str("\n[compile timed out]");
                }
                return Ok(ExecutionOutcome {
                    status: ExecStatus::CompileFail,
                    stdout: raw.stdout,
                    stderr,
                    duration_secs: started.elapsed().as_secs_f64(),
                    canonical_output: None,
                });
            }
        }

        let argv = substitute(&config.run_command, dir, file, exe);
        let raw = run_limited(&argv, dir, stdin, config.run_timeout(), config.max_output_bytes)
            .map_err(|e| annotate_spawn(e, &config.language, &argv[0]))?;
        let status = if raw.timed_out {
            ExecStatus::Timeout
        } else if raw.overflowed {
            ExecStatus::OutputOverflow
        } else if raw.exit_ok {
            ExecStatus::Ok
        } else {
            ExecStatus::RuntimeCrash
        };
        let canonical_output =
            (status == ExecStatus::Ok).then(|| normalize_output(&raw.stdout));
        Ok(ExecutionOutcome {
            status,
            stdout: raw.stdout,
            stderr: raw.stderr,
            duration_secs: started.elapsed().as_secs_f64(),
            canonical_output,
        })
    }

    /// Runs a tiny known-good program per language to verify the toolchain
    /// end to end.
    pub fn probe(&self, language: &LanguageId) -> ProbeReport {
        let config = match self.registry.get(language) {
            Ok(c) => c,
            Err(e) => {
                return ProbeReport {
                    language: language.clone(),
                    available: false,
                    detail: e.to_string(),
                }
            }
        };
        match hello_source(language) {
            Some(hello) => match self.execute(config, hello, None) {
                Ok(outcome) if outcome.status == ExecStatus::Ok => ProbeReport {
                    language: language.clone(),
                    available: outcome.canonical_output.as_deref() == Some("ok"),
                    detail: "ok".to_string(),
                },
                Ok(outcome) => ProbeReport {
                    language: language.clone(),
                    available: false,
                    detail: format!("probe program failed: {:?}: {}", outcome.status, outcome.stderr),
                },
                Err(e) => ProbeReport {
                    language: language.clone(),
                    available: false,
                    detail: e.to_string(),
                },
            },
            None => {
                let program = &config.run_command[0];
                let found = program_on_path(program);
                ProbeReport {
                    language: language.clone(),
                    available: found,
                    detail: if found {
                        format!("`{program}` found (no probe program for this language)")
                    } else {
                        format!("`{program}` not found on PATH")
                    },
                }
            }
        }
    }

    pub fn probe_all(&self) -> Vec<ProbeReport> {
        self.registry
            .languages()
            .cloned()
            .collect::<Vec<_>>()
            .into_iter()
            .map(|lang| self.probe(&lang))
            .collect()
    }
}

fn hello_source(language: &LanguageId) -> Option<&'static str> {
    match language.as_str() {
        "python" => Some("print(\"ok\")\n"),
        "lua" => Some("print(\"ok\")\n"),
        "cpp" => Some("#include <cstdio>\nint main() { std::puts(\"ok\"); return 0; }\n"),
        "java" => Some(
            "public class Main { public static void main(String[] args) { System.out.println(\"ok\"); } }\n",
        ),
        _ => None,
    }
}

fn program_on_path(program: &str) -> bool {
    if program.contains(std::path::MAIN_SEPARATOR) || program.starts_with('{') {
        return true;
    }
    std::env::var_os("PATH")
        .map(|paths| {
            std::env::split_paths(&paths).any(|p| {
                let candidate = p.join(program);
                candidate.is_file()
            })
        })
        .unwrap_or(false)
}

fn annotate_spawn(err: SandboxError, language: &LanguageId, program: &str) -> SandboxError {
    match err {
        SandboxError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            SandboxError::ToolchainMissing {
                language: language.clone(),
                program: program.to_string(),
            }
        }
        other => other,
    }
}

fn substitute(template: &[String], dir: &Path, file: &Path, exe: &Path) -> Vec<String> {
    template
        .iter()
        .map(|part| {
            part.replace("{file}", &file.to_string_lossy())
                .replace("{dir}", &dir.to_string_lossy())
                .replace("{exe}", &exe.to_string_lossy())
        })
        .collect()
}

struct RawRun {
    exit_ok: bool,
    stdout: String,
    stderr: String,
    timed_out: bool,
    overflowed: bool,
}

/// Poll interval for child status; timeout precision lands well inside the
/// documented +2s scheduling slack.
const POLL_INTERVAL: Duration = Duration::from_millis(5);

fn run_limited(
    argv: &[String],
    cwd: &Path,
    stdin_text: Option<&str>,
    timeout: Duration,
    max_output_bytes: u64,
) -> Result<RawRun, SandboxError> {
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(cwd)
        .stdin(if stdin_text.is_some() {
            Stdio::piped()
        } else {
            Stdio::null()
        })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }
    let mut child = command.spawn()?;

    if let Some(text) = stdin_text {
        let mut pipe = child.stdin.take().expect("stdin was piped");
        let bytes = text.as_bytes().to_vec();
        thread::spawn(move || {
            use std::io::Write;
            let _ = pipe.write_all(&bytes);
        });
    }

    let overflow = Arc::new(AtomicBool::new(false));
    let stdout_pipe = child.stdout.take().expect("stdout was piped");
    let stderr_pipe = child.stderr.take().expect("stderr was piped");
    let stdout_reader = spawn_capped_reader(stdout_pipe, max_output_bytes, Arc::clone(&overflow));
    // stderr is captured under the same cap but never triggers an overflow
    // kill; diagnostics just get truncated.
    let stderr_reader = spawn_capped_reader(stderr_pipe, max_output_bytes, Arc::new(AtomicBool::new(false)));

    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let mut overflowed = false;
    let exit_status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if overflow.load(Ordering::Relaxed) {
            overflowed = true;
            kill_tree(&mut child);
            break None;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            kill_tree(&mut child);
            break None;
        }
        thread::sleep(POLL_INTERVAL);
    };
    let exit_status = match exit_status {
        Some(status) => status,
        None => child.wait()?,
    };

    let stdout = stdout_reader.join().unwrap_or_default();
    let stderr = stderr_reader.join().unwrap_or_default();
    Ok(RawRun {
        exit_ok: exit_status.success() && !timed_out && !overflowed,
        stdout,
        stderr,
        timed_out,
        overflowed: overflowed || overflow.load(Ordering::Relaxed),
    })
}

fn spawn_capped_reader<R: Read + Send + 'static>(
    mut pipe: R,
    cap: u64,
    overflow: Arc<AtomicBool>,
) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut collected: Vec<u8> = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = (cap as usize).saturating_sub(collected.len());
                    if n > room {
                        collected.extend_from_slice(&buf[..room]);
                        overflow.store(true, Ordering::Relaxed);
                        // Keep draining so the child is not blocked on a full
                        // pipe while the supervisor decides to kill it.
                    } else {
                        collected.extend_from_slice(&buf[..n]);
                    }
                }
            }
        }
        String::from_utf8_lossy(&collected).into_owned()
    })
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        let pgid = child.id() as i32;
        // The child is its own process group leader (process_group(0)).
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}
