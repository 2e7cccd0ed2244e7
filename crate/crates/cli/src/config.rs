//! Run configuration: flags override the JSON config file, which overrides
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fup_core::Limits;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const THREADS_ENV: &str = "FUP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub limits: Option<Limits>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Flag values that may also come from a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub n_cap: Option<u64>,
    pub enumeration_cap: Option<u64>,
    pub permutation_cap: Option<u64>,
    pub dense_cap: Option<usize>,
    pub oqm_dense_cap: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub args: serde_json::Value,
    pub master_seed: u64,
    /// Left out of the echoed header so output does not depend on it.
    #[serde(skip)]
    pub threads: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub limits: Limits,
}

fn env_threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        }),
        _ => Ok(None),
    }
}

impl RunConfig {
    pub fn resolve(
        command: &str,
        args: serde_json::Value,
        flags: Overrides,
        file: Option<FileConfig>,
    ) -> Result<Self, CliError> {
        let file = file.unwrap_or_default();
        let base = file.limits.unwrap_or_default();
        let limits = Limits {
            n_cap: flags.n_cap.unwrap_or(base.n_cap),
            enumeration_cap: flags.enumeration_cap.unwrap_or(base.enumeration_cap),
            permutation_cap: flags.permutation_cap.unwrap_or(base.permutation_cap),
            dense_cap: flags.dense_cap.unwrap_or(base.dense_cap),
            oqm_dense_cap: flags.oqm_dense_cap.unwrap_or(base.oqm_dense_cap),
        };
        let threads = match flags.threads.or(file.threads) {
            Some(t) => t,
            None => env_threads()?
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        };
        if threads == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        Ok(Self {
            command: command.into(),
            args,
            master_seed: flags.seed.or(file.seed).unwrap_or(0),
            threads,
            format: flags.format.or(file.format).unwrap_or_default(),
            output: flags.output.or(file.output),
            limits,
        })
    }

    pub fn header_line(&self) -> String {
        format!(
            "# config: {}",
            serde_json::to_string(self).expect("config serialises")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig =
            serde_json::from_str(r#"{"seed": 5, "format": "json", "limits": {"dense_cap": 7}}"#)
                .unwrap();
        let flags = Overrides {
            seed: Some(9),
            threads: Some(1),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve("beta", serde_json::Value::Null, flags, Some(file)).unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.limits.dense_cap, 7);
        assert_eq!(cfg.limits.n_cap, Limits::default().n_cap);
        assert!(!cfg.header_line().contains("threads"));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"sede": 1}"#).is_err());
    }
}
