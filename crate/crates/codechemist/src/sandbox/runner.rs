//! Runner configuration: how to compile and run each language.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::LanguageId;

use super::SandboxError;

pub const DEFAULT_COMPILE_TIMEOUT_SECS: f64 = 30.0;
pub const DEFAULT_RUN_TIMEOUT_SECS: f64 = 10.0;
pub const DEFAULT_MAX_OUTPUT_BYTES: u64 = 1024 * 1024;

/// Command templates substitute `{file}` (source path), `{dir}` (workdir)
/// and `{exe}` (compiled binary path).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerConfig {
    pub language: LanguageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_command: Option<Vec<String>>,
    pub run_command: Vec<String>,
    pub file_extension: String,
    /// Fixed source file name when the toolchain demands one (`Main.java`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_file_name: Option<String>,
    #[serde(default = "default_compile_timeout")]
    pub compile_timeout_secs: f64,
    #[serde(default = "default_run_timeout")]
    pub run_timeout_secs: f64,
    #[serde(default = "default_max_output")]
    pub max_output_bytes: u64,
}

fn default_compile_timeout() -> f64 {
    DEFAULT_COMPILE_TIMEOUT_SECS
}

fn default_run_timeout() -> f64 {
    DEFAULT_RUN_TIMEOUT_SECS
}

fn default_max_output() -> u64 {
    DEFAULT_MAX_OUTPUT_BYTES
}

impl RunnerConfig {
    pub fn compile_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.compile_timeout_secs)
    }

    pub fn run_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.run_timeout_secs)
    }

    pub fn source_file_name(&self) -> String {
        self.source_file_name
            .clone()
            .unwrap_or_else(|| format!("prog.{}", self.file_extension))
    }

    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.run_command.is_empty() {
            return Err(SandboxError::InvalidRunner {
                language: self.language.clone(),
                reason: "run_command is empty".to_string(),
            });
        }
        if matches!(&self.compile_command, Some(cmd) if cmd.is_empty()) {
            return Err(SandboxError::InvalidRunner {
                language: self.language.clone(),
                reason: "compile_command is present but empty".to_string(),
            });
        }
        // Known compiled languages must compile; known interpreted ones must not.
        let name = self.language.as_str();
        let compiled = matches!(name, "cpp" | "java");
        let interpreted = matches!(name, "python" | "lua");
        if compiled && self.compile_command.is_none() {
            return Err(SandboxError::InvalidRunner {
                language: self.language.clone(),
                reason: "compiled language requires a compile_command".to_string(),
            });
        }
        if interpreted && self.compile_command.is_some() {
            return Err(SandboxError::InvalidRunner {
                language: self.language.clone(),
                reason: "interpreted language must not have a compile_command".to_string(),
            });
        }
        Ok(())
    }
}

fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

pub fn default_python() -> RunnerConfig {
    RunnerConfig {
        language: LanguageId::python(),
        compile_command: None,
        run_command: argv(&["python3", "{file}"]),
        file_extension: "py".to_string(),
        source_file_name: None,
        compile_timeout_secs: DEFAULT_COMPILE_TIMEOUT_SECS,
        run_timeout_secs: DEFAULT_RUN_TIMEOUT_SECS,
        max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
    }
}

pub fn default_lua() -> RunnerConfig {
    RunnerConfig {
        language: LanguageId::lua(),
        compile_command: None,
        run_command: argv(&["lua", "{file}"]),
        file_extension: "lua".to_string(),
        source_file_name: None,
        compile_timeout_secs: DEFAULT_COMPILE_TIMEOUT_SECS,
        run_timeout_secs: DEFAULT_RUN_TIMEOUT_SECS,
        max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
    }
}

pub fn default_cpp() -> RunnerConfig {
    RunnerConfig {
        language: LanguageId::cpp(),
        compile_command: Some(argv(&["g++", "-O1", "-std=c++17", "{file}", "-o", "{exe}"])),
        run_command: argv(&["{exe}"]),
        file_extension: "cpp".to_string(),
        source_file_name: None,
        compile_timeout_secs: DEFAULT_COMPILE_TIMEOUT_SECS,
        run_timeout_secs: DEFAULT_RUN_TIMEOUT_SECS,
        max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
    }
}

pub fn default_java() -> RunnerConfig {
    RunnerConfig {
        language: LanguageId::java(),
        compile_command: Some(argv(&["javac", "{file}"])),
        run_command: argv(&["java", "-cp", "{dir}", "Main"]),
        file_extension: "java".to_string(),
        source_file_name: Some("Main.java".to_string()),
        compile_timeout_secs: DEFAULT_COMPILE_TIMEOUT_SECS,
        run_timeout_secs: DEFAULT_RUN_TIMEOUT_SECS,
        max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
    }
}

/// Registry mapping language identifiers to runner configs. Defaults cover
/// python, lua, cpp and java; a TOML file can override or extend them.
#[derive(Debug, Clone)]
pub struct RunnerRegistry {
    runners: BTreeMap<LanguageId, RunnerConfig>,
}

#[derive(Deserialize)]
struct RegistryFile {
    #[serde(default)]
    runners: BTreeMap<String, RunnerFileEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunnerFileEntry {
    #[serde(default)]
    compile_command: Option<Vec<String>>,
    run_command: Vec<String>,
    file_extension: String,
    #[serde(default)]
    source_file_name: Option<String>,
    #[serde(default = "default_compile_timeout")]
    compile_timeout_secs: f64,
    #[serde(default = "default_run_timeout")]
    run_timeout_secs: f64,
    #[serde(default = "default_max_output")]
    max_output_bytes: u64,
}

impl Default for RunnerRegistry {
    fn default() -> Self {
        let mut runners = BTreeMap::new();
        for config in [default_python(), default_lua(), default_cpp(), default_java()] {
            runners.insert(config.language.clone(), config);
        }
        RunnerRegistry { runners }
    }
}

impl RunnerRegistry {
    /// Defaults plus overrides/additions from a registry file.
    pub fn load(path: &Path) -> Result<Self, SandboxError> {
        let text = std::fs::read_to_string(path)?;
        let parsed: RegistryFile = toml::from_str(&text).map_err(|e| SandboxError::InvalidRunner {
            language: LanguageId::new("registry"),
            reason: format!("{}: {e}", path.display()),
        })?;
        let mut registry = RunnerRegistry::default();
        for (name, entry) in parsed.runners {
            let language = LanguageId::new(&name);
            let config = RunnerConfig {
                language: language.clone(),
                compile_command: entry.compile_command,
                run_command: entry.run_command,
                file_extension: entry.file_extension,
                source_file_name: entry.source_file_name,
                compile_timeout_secs: entry.compile_timeout_secs,
                run_timeout_secs: entry.run_timeout_secs,
                max_output_bytes: entry.max_output_bytes,
            };
            config.validate()?;
            registry.runners.insert(language, config);
        }
        Ok(registry)
    }

    pub fn get(&self, language: &LanguageId) -> Result<&RunnerConfig, SandboxError> {
        self.runners
            .get(language)
            .ok_or_else(|| SandboxError::RunnerMissing(language.clone()))
    }

    pub fn insert(&mut self, config: RunnerConfig) {
        self.runners.insert(config.language.clone(), config);
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.runners.keys()
    }
}
