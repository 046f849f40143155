//! Endpoint set files (TOML or JSON).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use chronoeval::gateway::{EndpointConfig, Gateway, HttpTransport, Mode, ResponseCache};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    #[serde(default)]
    pub proposer: Option<String>,
    #[serde(default)]
    pub verifiers: Vec<String>,
    #[serde(default)]
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSet {
    /// Relative to the config file.
    pub cache_dir: PathBuf,
    pub endpoints: Vec<EndpointConfig>,
    #[serde(default)]
    pub roles: Roles,
}

impl EndpointSet {
    pub fn load(path: &Path) -> Result<EndpointSet> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut set: EndpointSet = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        if set.cache_dir.is_relative() {
            set.cache_dir = path.parent().unwrap_or(Path::new(".")).join(&set.cache_dir);
        }
        for id in set.roles.proposer.iter().chain(&set.roles.verifiers).chain(&set.roles.baseline) {
            if !set.endpoints.iter().any(|e| &e.endpoint_id == id) {
                bail!("{}: role refers to unknown endpoint {id:?}", path.display());
            }
        }
        Ok(set)
    }

    pub fn gateway(&self, mode: Mode) -> Result<Gateway> {
        let cache = ResponseCache::new(&self.cache_dir);
        let gateway = match mode {
            Mode::Replay => Gateway::replay(self.endpoints.clone(), cache),
            Mode::Record => Gateway::new(self.endpoints.clone(), cache, mode, Arc::new(HttpTransport)),
        };
        gateway.map_err(|e| anyhow!("endpoint configuration: {e}"))
    }

    pub fn proposer(&self, flag: Option<&str>) -> Result<String> {
        flag.map(str::to_string)
            .or_else(|| self.roles.proposer.clone())
            .ok_or_else(|| anyhow!("no proposer endpoint: set roles.proposer or pass --endpoint"))
    }

    pub fn verifiers(&self) -> Result<Vec<String>> {
        if self.roles.verifiers.is_empty() {
            bail!("no verifier endpoints: set roles.verifiers");
        }
        Ok(self.roles.verifiers.clone())
    }

    pub fn baseline(&self, flag: Option<&str>) -> Result<String> {
        flag.map(str::to_string)
            .or_else(|| self.roles.baseline.clone())
            .ok_or_else(|| anyhow!("no baseline endpoint: set roles.baseline or pass --endpoint"))
    }
}
