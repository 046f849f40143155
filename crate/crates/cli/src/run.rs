//! Run directory: a state file, a lock, and every command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chronoeval::corpus::{ingest_corpus, Corpus, SidecarKind};
use chronoeval::manifest::{build_manifest, Manifest, ManifestSource};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const STATE_FILE: &str = "run.json";
pub const LOCK_FILE: &str = "run.lock";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorpusState {
    pub root: PathBuf,
    pub images: usize,
    /// Images per `model/period`.
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarState {
    /// Copy inside the run directory.
    pub file: String,
    pub source: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusState>,
    #[serde(default)]
    pub sidecars: BTreeMap<SidecarKind, SidecarState>,
    /// Output file of each completed step, relative to the run directory.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

impl Default for RunState {
    fn default() -> Self {
        RunState {
            version: 1,
            manifest: None,
            corpus: None,
            sidecars: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }
}

/// An open, locked run directory. The lock is released on drop.
pub struct Run {
    pub dir: PathBuf,
    pub state: RunState,
}

impl Run {
    pub fn open(dir: &Path) -> Result<Run> {
        fs::create_dir_all(dir).with_context(|| format!("creating run directory {}", dir.display()))?;
        let lock = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "run directory {} is in use by another process (remove {} if it is stale)",
                dir.display(),
                lock.display()
            ),
            Err(e) => return Err(e).with_context(|| format!("creating {}", lock.display())),
        }
        // The lock is owned by `run` from here on, so errors still release it.
        let mut run = Run {
            dir: dir.to_path_buf(),
            state: RunState::default(),
        };
        let state_path = dir.join(STATE_FILE);
        if state_path.is_file() {
            run.state = read_json(&state_path)?;
        }
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn save(&self) -> Result<()> {
        write_json(&self.path(STATE_FILE), &self.state)
    }

    pub fn record_output(&mut self, step: &str, file: &str) -> Result<()> {
        self.state.outputs.insert(step.to_string(), file.to_string());
        self.save()
    }

    pub fn manifest(&self) -> Result<Manifest> {
        match &self.state.manifest {
            None => Ok(build_manifest(ManifestSource::Bundled)?),
            Some(file) => Ok(build_manifest(ManifestSource::File(&self.path(file)))?),
        }
    }

    /// The ingested corpus, re-verified against the recorded digests, with
    /// every attached sidecar.
    pub fn corpus(&self, manifest: &Manifest) -> Result<Corpus> {
        let mut corpus = self.bare_corpus(manifest)?;
        for (kind, sidecar) in &self.state.sidecars {
            corpus = corpus.attach_sidecar(*kind, &self.path(&sidecar.file))?;
        }
        Ok(corpus)
    }

    pub fn bare_corpus(&self, manifest: &Manifest) -> Result<Corpus> {
        let Some(state) = &self.state.corpus else {
            bail!("no corpus in {}; run `ingest` first", self.dir.display());
        };
        Ok(ingest_corpus(&state.root, Some(&self.path(CORPUS_FILE)), manifest)?)
    }

    pub fn require_output(&self, step: &str, hint: &str) -> Result<PathBuf> {
        match self.state.outputs.get(step) {
            Some(file) => Ok(self.path(file)),
            None => bail!("`{step}` has not been run in {}; run `{hint}` first", self.dir.display()),
        }
    }
}

impl Drop for Run {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_FILE));
    }
}

/// Writes through a temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(chronoeval::corpus::read_jsonl(path)?.into_iter().map(|(_, row)| row).collect())
}
