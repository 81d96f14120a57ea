//! Tool-wide settings.
//!
//! Read from the file named by `--config` or `BISECTFL_CONFIG` (TOML, unknown
//! keys rejected). The environment variables `BISECTFL_CACHE`,
//! `BISECTFL_TOOLCHAIN_TIMEOUT_S` and `BISECTFL_RUN_TIMEOUT_S` override the
//! file.
//!
//! ```toml
//! cache = "verdicts.txt"
//! toolchain_timeout_s = 3600
//! run_timeout_s = 10
//! output_dir = "out"
//!
//! [presets]
//! mycc = '^src/[a-z_]+\.c$'
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::oracle::{Limits, ENV_CACHE, ENV_RUN_TIMEOUT, ENV_TOOLCHAIN_TIMEOUT};

pub const ENV_CONFIG: &str = "BISECTFL_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("invalid setting: {0}")]
    Setting(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    cache: Option<PathBuf>,
    toolchain_timeout_s: Option<f64>,
    run_timeout_s: Option<f64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    presets: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalConfig {
    pub cache: Option<PathBuf>,
    pub toolchain_timeout: Duration,
    pub run_timeout: Duration,
    pub output_dir: PathBuf,
    pub presets: BTreeMap<String, String>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        let limits = Limits::default();
        GlobalConfig {
            cache: None,
            toolchain_timeout: limits.toolchain,
            run_timeout: limits.run,
            output_dir: PathBuf::from("."),
            presets: BTreeMap::new(),
        }
    }
}

fn seconds(name: &str, v: f64) -> Result<Duration, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(Duration::from_secs_f64(v))
    } else {
        Err(ConfigError::Setting(format!("{name} must be a positive number of seconds")))
    }
}

impl GlobalConfig {
    /// Loads `path` (if any) and applies environment overrides. Relative
    /// paths in the file resolve against its directory.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = GlobalConfig::default();
        if let Some(path) = path {
            let invalid = |message: String| ConfigError::Invalid {
                path: path.to_path_buf(),
                message,
            };
            let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
            let raw: RawConfig = toml::from_str(&text).map_err(|e| invalid(e.to_string()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            let rel = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
            cfg.cache = raw.cache.map(rel);
            if let Some(dir) = raw.output_dir {
                cfg.output_dir = rel(dir);
            }
            if let Some(s) = raw.toolchain_timeout_s {
                cfg.toolchain_timeout = seconds("toolchain_timeout_s", s)?;
            }
            if let Some(s) = raw.run_timeout_s {
                cfg.run_timeout = seconds("run_timeout_s", s)?;
            }
            for (name, pattern) in &raw.presets {
                regex::Regex::new(pattern)
                    .map_err(|e| invalid(format!("preset `{name}`: {e}")))?;
            }
            cfg.presets = raw.presets;
        }
        cfg.apply_env()?;
        Ok(cfg)
    }

    fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Some(p) = std::env::var_os(ENV_CACHE).filter(|v| !v.is_empty()) {
            self.cache = Some(PathBuf::from(p));
        }
        for (name, slot) in [
            (ENV_TOOLCHAIN_TIMEOUT, &mut self.toolchain_timeout),
            (ENV_RUN_TIMEOUT, &mut self.run_timeout),
        ] {
            if let Ok(v) = std::env::var(name) {
                let s: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::Setting(format!("{name}={v} is not a number")))?;
                *slot = seconds(name, s)?;
            }
        }
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        Limits {
            toolchain: self.toolchain_timeout,
            run: self.run_timeout,
        }
    }
}
