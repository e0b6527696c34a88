//! Configuration resolution: flags > environment > config file > defaults.
//!
//! Resolution is a pure function over the three override layers so the
//! precedence contract is testable without touching the process environment.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use codechemist::bench::{Method, ReportFormat};
use codechemist::forge::ForgeConfig;
use codechemist::gateway::{BackendDescriptor, BackendKind};
use codechemist::hedge::TemperaturePlan;
use codechemist::model::Temperature;

pub const ENV_PREFIX: &str = "CODECHEMIST_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {detail}")]
    File { path: String, detail: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fully resolved application configuration.
#[derive(Debug, Clone, Serialize)]
pub struct AppConfig {
    pub backend: BackendDescriptor,
    pub mock_script: Option<PathBuf>,
    pub runners_file: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub forge: ForgeConfig,
    pub plan: TemperaturePlan,
    pub jobs: usize,
    pub artifact_root: PathBuf,
    pub report_format: ReportFormat,
    pub keep_artifacts: bool,
    /// Root for per-execution temp workdirs; system temp when unset.
    pub workdir_root: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub trials: u32,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            backend: BackendDescriptor::mock("mock-model"),
            mock_script: None,
            runners_file: None,
            prompts_dir: None,
            forge: ForgeConfig::default(),
            plan: TemperaturePlan::default_paper(),
            jobs: 0,
            artifact_root: PathBuf::from("codechemist-out"),
            report_format: ReportFormat::Json,
            keep_artifacts: false,
            workdir_root: None,
            methods: Method::all().to_vec(),
            trials: 10,
        }
    }
}

/// On-disk TOML shape. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub backend: Option<FileBackend>,
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
    #[serde(default)]
    pub runners: Option<PathBuf>,
    #[serde(default)]
    pub prompts: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub artifacts: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub keep_artifacts: Option<bool>,
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    #[serde(default)]
    pub methods: Option<String>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub plan: Option<String>,
    #[serde(default)]
    pub forge: Option<FileForge>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileBackend {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub request_timeout_secs: Option<f64>,
    #[serde(default)]
    pub max_retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileForge {
    #[serde(default)]
    pub h: Option<u32>,
    #[serde(default)]
    pub n: Option<u32>,
    #[serde(default)]
    pub initial_temperature: Option<String>,
    #[serde(default)]
    pub max_attempts: Option<u32>,
    #[serde(default)]
    pub escalation_step: Option<String>,
    #[serde(default)]
    pub temperature_cap: Option<String>,
}

/// One override layer; flags and environment both produce this shape.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub backend_kind: Option<String>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub runners: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub artifacts: Option<PathBuf>,
    pub report: Option<String>,
    pub keep_artifacts: Option<bool>,
    pub workdir: Option<PathBuf>,
    pub methods: Option<String>,
    pub trials: Option<u32>,
    pub plan: Option<String>,
    pub forge_h: Option<u32>,
    pub forge_n: Option<u32>,
    pub max_attempts: Option<u32>,
    pub escalation_step: Option<String>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }
}

/// Builds an override layer from `CODECHEMIST_*` environment variables.
pub fn env_overrides(env: &BTreeMap<String, String>) -> Result<Overrides, ConfigError> {
    let get = |key: &str| env.get(&format!("{ENV_PREFIX}{key}")).cloned();
    let mut overrides = Overrides {
        backend_kind: get("BACKEND"),
        model: get("MODEL"),
        endpoint: get("ENDPOINT"),
        mock_script: get("MOCK_SCRIPT").map(PathBuf::from),
        runners: get("RUNNERS").map(PathBuf::from),
        prompts: get("PROMPTS").map(PathBuf::from),
        artifacts: get("ARTIFACTS").map(PathBuf::from),
        workdir: get("WORKDIR").map(PathBuf::from),
        report: get("REPORT"),
        methods: get("METHODS"),
        plan: get("PLAN"),
        ..Overrides::default()
    };
    if let Some(jobs) = get("JOBS") {
        overrides.jobs = Some(jobs.parse().map_err(|_| {
            ConfigError::Invalid(format!("{ENV_PREFIX}JOBS must be an integer, got `{jobs}`"))
        })?);
    }
    if let Some(k) = get("K") {
        overrides.trials = Some(k.parse().map_err(|_| {
            ConfigError::Invalid(format!("{ENV_PREFIX}K must be an integer, got `{k}`"))
        })?);
    }
    Ok(overrides)
}

fn parse_methods(text: &str) -> Result<Vec<Method>, ConfigError> {
    let methods: Result<Vec<Method>, _> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Method::from_str)
        .collect();
    let methods = methods.map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if methods.is_empty() {
        return Err(ConfigError::Invalid("methods list is empty".to_string()));
    }
    Ok(methods)
}

fn parse_temp(field: &str, text: &str) -> Result<Temperature, ConfigError> {
    Temperature::parse(text)
        .map_err(|e| ConfigError::Invalid(format!("{field}: {e}")))
}

/// Applies the file layer, then each override layer in order (later wins).
pub fn resolve(
    file: Option<FileConfig>,
    layers: &[&Overrides],
) -> Result<AppConfig, ConfigError> {
    let mut config = AppConfig::default();

    if let Some(file) = file {
        if let Some(backend) = file.backend {
            if let Some(kind) = backend.kind {
                apply_backend_kind(&mut config, &kind)?;
            }
            if let Some(model) = backend.model {
                config.backend.model_name = model;
            }
            if let Some(endpoint) = backend.endpoint {
                config.backend.endpoint = Some(endpoint);
            }
            if let Some(auth_env) = backend.auth_env {
                config.backend.auth_env = (!auth_env.is_empty()).then_some(auth_env);
            }
            if let Some(timeout) = backend.request_timeout_secs {
                config.backend.request_timeout_secs = timeout;
            }
            if let Some(retries) = backend.max_retries {
                config.backend.max_retries = retries;
            }
        }
        config.mock_script = file.mock_script.or(config.mock_script);
        config.runners_file = file.runners.or(config.runners_file);
        config.prompts_dir = file.prompts.or(config.prompts_dir);
        if let Some(jobs) = file.jobs {
            config.jobs = jobs;
        }
        if let Some(artifacts) = file.artifacts {
            config.artifact_root = artifacts;
        }
        if let Some(report) = file.report {
            config.report_format = report
                .parse()
                .map_err(|e: codechemist::bench::BenchError| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(keep) = file.keep_artifacts {
            config.keep_artifacts = keep;
        }
        if let Some(workdir) = file.workdir {
            config.workdir_root = Some(workdir);
        }
        if let Some(methods) = file.methods {
            config.methods = parse_methods(&methods)?;
        }
        if let Some(k) = file.k {
            config.trials = k;
        }
        if let Some(plan) = file.plan {
            config.plan = TemperaturePlan::parse(&plan)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(forge) = file.forge {
            if let Some(h) = forge.h {
                config.forge.reference_count = h;
            }
            if let Some(n) = forge.n {
                config.forge.target_cases = n;
            }
            if let Some(t) = forge.initial_temperature {
                config.forge.initial_temperature = parse_temp("forge.initial_temperature", &t)?;
            }
            if let Some(a) = forge.max_attempts {
                config.forge.max_attempts = a;
            }
            if let Some(s) = forge.escalation_step {
                config.forge.escalation_step = parse_temp("forge.escalation_step", &s)?;
            }
            if let Some(c) = forge.temperature_cap {
                config.forge.temperature_cap = parse_temp("forge.temperature_cap", &c)?;
            }
        }
    }

    for layer in layers {
        apply_overrides(&mut config, layer)?;
    }

    config.forge.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if config.backend.kind == BackendKind::HttpChat && config.backend.endpoint.is_none() {
        return Err(ConfigError::Invalid(
            "http-chat backend requires an endpoint".to_string(),
        ));
    }
    Ok(config)
}

fn apply_backend_kind(config: &mut AppConfig, kind: &str) -> Result<(), ConfigError> {
    config.backend.kind = match kind.trim() {
        "mock" => BackendKind::Mock,
        "http-chat" | "http" => BackendKind::HttpChat,
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown backend kind `{other}` (expected mock or http-chat)"
            )))
        }
    };
    // Switching to http restores the credential default; an explicit empty
    // auth_env in the file opts into anonymous access.
    if config.backend.kind == BackendKind::HttpChat && config.backend.auth_env.is_none() {
        config.backend.auth_env = Some(codechemist::gateway::DEFAULT_AUTH_ENV.to_string());
    }
    Ok(())
}

fn apply_overrides(config: &mut AppConfig, layer: &Overrides) -> Result<(), ConfigError> {
    if let Some(kind) = &layer.backend_kind {
        apply_backend_kind(config, kind)?;
    }
    if let Some(model) = &layer.model {
        config.backend.model_name = model.clone();
    }
    if let Some(endpoint) = &layer.endpoint {
        config.backend.endpoint = Some(endpoint.clone());
    }
    if let Some(path) = &layer.mock_script {
        config.mock_script = Some(path.clone());
    }
    if let Some(path) = &layer.runners {
        config.runners_file = Some(path.clone());
    }
    if let Some(path) = &layer.prompts {
        config.prompts_dir = Some(path.clone());
    }
    if let Some(jobs) = layer.jobs {
        config.jobs = jobs;
    }
    if let Some(path) = &layer.artifacts {
        config.artifact_root = path.clone();
    }
    if let Some(report) = &layer.report {
        config.report_format = report
            .parse()
            .map_err(|e: codechemist::bench::BenchError| ConfigError::Invalid(e.to_string()))?;
    }
    if let Some(keep) = layer.keep_artifacts {
        config.keep_artifacts = keep;
    }
    if let Some(workdir) = &layer.workdir {
        config.workdir_root = Some(workdir.clone());
    }
    if let Some(methods) = &layer.methods {
        config.methods = parse_methods(methods)?;
    }
    if let Some(trials) = layer.trials {
        config.trials = trials;
    }
    if let Some(plan) = &layer.plan {
        config.plan =
            TemperaturePlan::parse(plan).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    if let Some(h) = layer.forge_h {
        config.forge.reference_count = h;
    }
    if let Some(n) = layer.forge_n {
        config.forge.target_cases = n;
    }
    if let Some(a) = layer.max_attempts {
        config.forge.max_attempts = a;
    }
    if let Some(step) = &layer.escalation_step {
        config.forge.escalation_step = parse_temp("escalation-step", step)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with_model(model: &str) -> FileConfig {
        FileConfig {
            backend: Some(FileBackend {
                model: Some(model.to_string()),
                ..FileBackend::default()
            }),
            ..FileConfig::default()
        }
    }

    #[test]
    fn defaults_resolve_alone() {
        let config = resolve(None, &[]).unwrap();
        assert_eq!(config.backend.kind, BackendKind::Mock);
        assert_eq!(config.trials, 10);
        assert_eq!(config.plan, TemperaturePlan::default_paper());
    }

    // Precedence: flags > env > file > defaults, checked over every
    // combination of layers that set the same key.
    #[test]
    fn precedence_over_all_layer_combinations() {
        for mask in 0u8..8 {
            let file_sets = mask & 1 != 0;
            let env_sets = mask & 2 != 0;
            let flag_sets = mask & 4 != 0;

            let file = file_sets.then(|| file_with_model("from-file"));
            let mut env = BTreeMap::new();
            if env_sets {
                env.insert("CODECHEMIST_MODEL".to_string(), "from-env".to_string());
            }
            let env_layer = env_overrides(&env).unwrap();
            let flag_layer = Overrides {
                model: flag_sets.then(|| "from-flag".to_string()),
                ..Overrides::default()
            };

            let config = resolve(file, &[&env_layer, &flag_layer]).unwrap();
            let expected = if flag_sets {
                "from-flag"
            } else if env_sets {
                "from-env"
            } else if file_sets {
                "from-file"
            } else {
                "mock-model"
            };
            assert_eq!(config.backend.model_name, expected, "mask {mask:03b}");
        }
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let parsed: Result<FileConfig, _> = toml::from_str("surprise = 1");
        assert!(parsed.is_err());
        let parsed: Result<FileConfig, _> = toml::from_str("[backend]\nflavor = \"x\"");
        assert!(parsed.is_err());
    }

    #[test]
    fn env_layer_parses_numbers() {
        let mut env = BTreeMap::new();
        env.insert("CODECHEMIST_JOBS".to_string(), "4".to_string());
        env.insert("CODECHEMIST_K".to_string(), "3".to_string());
        let layer = env_overrides(&env).unwrap();
        assert_eq!(layer.jobs, Some(4));
        assert_eq!(layer.trials, Some(3));

        env.insert("CODECHEMIST_JOBS".to_string(), "many".to_string());
        assert!(env_overrides(&env).is_err());
    }

    #[test]
    fn http_without_endpoint_is_invalid() {
        let flags = Overrides {
            backend_kind: Some("http-chat".to_string()),
            ..Overrides::default()
        };
        assert!(resolve(None, &[&flags]).is_err());
        let flags = Overrides {
            backend_kind: Some("http-chat".to_string()),
            endpoint: Some("http://localhost:1234/v1/chat/completions".to_string()),
            ..Overrides::default()
        };
        assert!(resolve(None, &[&flags]).is_ok());
    }

    #[test]
    fn forge_knobs_flow_through() {
        let flags = Overrides {
            forge_h: Some(1),
            forge_n: Some(4),
            max_attempts: Some(2),
            escalation_step: Some("0.25".to_string()),
            plan: Some("0:1,0.9:2".to_string()),
            methods: Some("vanilla,codechemist".to_string()),
            ..Overrides::default()
        };
        let config = resolve(None, &[&flags]).unwrap();
        assert_eq!(config.forge.reference_count, 1);
        assert_eq!(config.forge.target_cases, 4);
        assert_eq!(config.forge.escalation_step.as_str(), "0.25");
        assert_eq!(config.plan.total(), 3);
        assert_eq!(config.methods, vec![Method::Vanilla, Method::Codechemist]);
    }
}
