//! Layered configuration: CLI flags override the optional JSON config file,
//! which overrides environment variables, which override built-in defaults.

use anyhow::{Context, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub seed: Option<u64>,
    pub precision: Option<u32>,
    pub samples: Option<usize>,
    pub format: Option<String>,
    pub order: Option<String>,
    pub mode: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn resolve_seed(&self, cli: Option<u64>) -> u64 {
        cli.or(self.seed).unwrap_or(0)
    }

    pub fn resolve_precision(&self, cli: Option<u32>) -> u32 {
        cli.or(self.precision).unwrap_or(2)
    }

    pub fn resolve_samples(&self, cli: Option<usize>) -> usize {
        cli.or(self.samples).unwrap_or(50)
    }

    pub fn resolve_format(&self, cli: Option<&str>) -> Option<String> {
        cli.map(str::to_string).or_else(|| self.format.clone())
    }

    pub fn resolve_order(&self, cli: Option<&str>) -> Option<String> {
        cli.map(str::to_string).or_else(|| self.order.clone())
    }

    pub fn resolve_mode(&self, cli: Option<&str>) -> Option<String> {
        cli.map(str::to_string).or_else(|| self.mode.clone())
    }

    /// Backend spec: flag, then config file, then `LLMP_BACKEND_URL`.
    pub fn resolve_backend(&self, cli: Option<&str>) -> Result<String> {
        if let Some(b) = cli {
            return Ok(b.to_string());
        }
        if let Some(b) = &self.backend {
            return Ok(b.clone());
        }
        std::env::var(llmp::backend::ENV_URL).context(
            "no backend: pass --backend, set it in the config file, or export LLMP_BACKEND_URL",
        )
    }
}
