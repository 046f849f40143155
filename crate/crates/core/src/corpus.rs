//! Generated-image corpora and the sidecar observation files attached to them.
//!
//! Every downstream metric addresses images through the key
//! `(model_id, activity, period, replicate)`; `image_id` is the stable string
//! form used by sidecars.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anachronism::AnnotationRecord;
use crate::demographics::FaceObservation;
use crate::error::{Error, Result};
use crate::manifest::{ActivityId, Manifest, PeriodId};
use crate::style::{StyleLabel, StyleObservation};

pub const INDEX_FILE: &str = "index.jsonl";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub model_id: String,
    pub activity: ActivityId,
    pub period: PeriodId,
    pub replicate: u32,
    pub path: PathBuf,
    pub sha256: String,
}

impl ImageRecord {
    pub fn key(&self) -> (&str, &str, &str, u32) {
        (&self.model_id, &self.activity, &self.period, self.replicate)
    }

    /// Reads the encoded file bytes.
    pub fn read_bytes(&self) -> Result<Vec<u8>> {
        fs::read(&self.path).map_err(|e| Error::io(&self.path, e))
    }

    pub fn media_type(&self) -> &'static str {
        match self
            .path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("jpg") | Some("jpeg") => "image/jpeg",
            _ => "image/png",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidecarKind {
    Styles,
    Embeddings,
    Faces,
    Annotations,
}

impl SidecarKind {
    pub const ALL: [SidecarKind; 4] = [
        SidecarKind::Styles,
        SidecarKind::Embeddings,
        SidecarKind::Faces,
        SidecarKind::Annotations,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SidecarKind::Styles => "styles",
            SidecarKind::Embeddings => "embeddings",
            SidecarKind::Faces => "faces",
            SidecarKind::Annotations => "annotations",
        }
    }
}

impl std::str::FromStr for SidecarKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SidecarKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown sidecar kind {s:?}")))
    }
}

impl std::fmt::Display for SidecarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SidecarSet {
    pub styles: Option<BTreeMap<String, StyleObservation>>,
    pub embeddings: Option<BTreeMap<String, Vec<f64>>>,
    pub faces: Option<BTreeMap<String, Vec<FaceObservation>>>,
    pub annotations: Option<Vec<AnnotationRecord>>,
}

/// A validated, immutable image corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<ImageRecord>,
    by_id: HashMap<String, usize>,
    sidecars: SidecarSet,
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    image_id: String,
    model_id: String,
    activity: String,
    period: String,
    replicate: u32,
    path: PathBuf,
    #[serde(default)]
    sha256: Option<String>,
}

struct Candidate {
    image_id: String,
    model_id: String,
    activity: String,
    period: String,
    replicate: u32,
    path: PathBuf,
    declared_sha256: Option<String>,
    origin: String,
}

/// Ingests a corpus from `root`.
///
/// Uses `index` when given, else `root/index.jsonl` when present, else the
/// canonical layout `root/{model_id}/{period_id}/{activity_id}/{replicate}.png`.
pub fn ingest_corpus(root: &Path, index: Option<&Path>, manifest: &Manifest) -> Result<Corpus> {
    let default_index = root.join(INDEX_FILE);
    let candidates = match index {
        Some(path) => read_index(path)?,
        None if default_index.is_file() => read_index(&default_index)?,
        None => walk_layout(root)?,
    };

    for c in &candidates {
        if manifest.activity(&c.activity).is_none() {
            return Err(Error::Corpus(format!("{}: unknown activity id {:?}", c.origin, c.activity)));
        }
        if manifest.period(&c.period).is_none() {
            return Err(Error::Corpus(format!("{}: unknown period id {:?}", c.origin, c.period)));
        }
        if !c.path.is_file() {
            return Err(Error::Corpus(format!("{}: missing file {}", c.origin, c.path.display())));
        }
    }

    let digests: Vec<Result<String>> = candidates
        .par_iter()
        .map(|c| fs::read(&c.path).map(|b| sha256_hex(&b)).map_err(|e| Error::io(&c.path, e)))
        .collect();

    let mut records = Vec::with_capacity(candidates.len());
    for (c, digest) in candidates.into_iter().zip(digests) {
        let digest = digest?;
        if let Some(declared) = &c.declared_sha256 {
            if !declared.eq_ignore_ascii_case(&digest) {
                return Err(Error::Corpus(format!(
                    "{}: digest mismatch for {} (declared {declared}, actual {digest})",
                    c.origin,
                    c.path.display()
                )));
            }
        }
        records.push(ImageRecord {
            image_id: c.image_id,
            model_id: c.model_id,
            activity: c.activity,
            period: c.period,
            replicate: c.replicate,
            path: c.path,
            sha256: digest,
        });
    }
    Corpus::from_records(records)
}

fn read_index(path: &Path) -> Result<Vec<Candidate>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rows: Vec<(usize, IndexRow)> = read_jsonl(path)?;
    Ok(rows
        .into_iter()
        .map(|(line, row)| Candidate {
            path: if row.path.is_absolute() { row.path } else { base.join(row.path) },
            image_id: row.image_id,
            model_id: row.model_id,
            activity: row.activity,
            period: row.period,
            replicate: row.replicate,
            declared_sha256: row.sha256,
            origin: format!("{}:{line}", path.display()),
        })
        .collect())
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        entries.push((name, entry.path()));
    }
    entries.sort();
    Ok(entries)
}

fn walk_layout(root: &Path) -> Result<Vec<Candidate>> {
    if !root.is_dir() {
        return Err(Error::Corpus(format!("corpus root {} is not a directory", root.display())));
    }
    let mut out = Vec::new();
    for (model, model_dir) in sorted_entries(root)? {
        if !model_dir.is_dir() {
            continue;
        }
        for (period, period_dir) in sorted_entries(&model_dir)? {
            if !period_dir.is_dir() {
                return Err(Error::Corpus(format!("unexpected file {}", period_dir.display())));
            }
            for (activity, activity_dir) in sorted_entries(&period_dir)? {
                if !activity_dir.is_dir() {
                    return Err(Error::Corpus(format!("unexpected file {}", activity_dir.display())));
                }
                for (file, path) in sorted_entries(&activity_dir)? {
                    let (stem, ext) = file.rsplit_once('.').unwrap_or((file.as_str(), ""));
                    if !IMAGE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
                        return Err(Error::Corpus(format!("not an image file: {}", path.display())));
                    }
                    let replicate: u32 = stem.parse().map_err(|_| {
                        Error::Corpus(format!("file name is not a replicate number: {}", path.display()))
                    })?;
                    out.push(Candidate {
                        image_id: format!("{model}/{period}/{activity}/{replicate}"),
                        model_id: model.clone(),
                        activity: activity.clone(),
                        period: period.clone(),
                        replicate,
                        origin: path.display().to_string(),
                        path,
                        declared_sha256: None,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Reads a JSON-lines file, skipping blank lines. Rows carry their 1-based
/// line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::row(path, i + 1, e.to_string()))?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct StyleRow {
    image_id: String,
    label: StyleLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<BTreeMap<StyleLabel, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRow {
    image_id: String,
    vector: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FacesRow {
    image_id: String,
    faces: Vec<FaceObservation>,
}

impl Corpus {
    /// Builds a corpus from records, validating key uniqueness. Records are
    /// stored in key order so the result does not depend on input order.
    pub fn from_records(mut records: Vec<ImageRecord>) -> Result<Corpus> {
        records.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.image_id.cmp(&b.image_id)));
        for pair in records.windows(2) {
            if pair[0].key() == pair[1].key() {
                return Err(Error::Corpus(format!(
                    "duplicate key (model {}, activity {}, period {}, replicate {}): {} and {}",
                    pair[0].model_id,
                    pair[0].activity,
                    pair[0].period,
                    pair[0].replicate,
                    pair[0].path.display(),
                    pair[1].path.display()
                )));
            }
        }
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.image_id.is_empty() {
                return Err(Error::Corpus("record with empty image_id".into()));
            }
            if by_id.insert(r.image_id.clone(), i).is_some() {
                return Err(Error::Corpus(format!("duplicate image_id {:?}", r.image_id)));
            }
        }
        Ok(Corpus {
            records,
            by_id,
            sidecars: SidecarSet::default(),
        })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.by_id.get(image_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.by_id.contains_key(image_id)
    }

    pub fn sidecars(&self) -> &SidecarSet {
        &self.sidecars
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.model_id.as_str()).collect()
    }

    /// Images of one model in one period (`N_t^m` is the length).
    pub fn select<'a>(&'a self, model_id: &'a str, period: &'a str) -> impl Iterator<Item = &'a ImageRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.model_id == model_id && r.period == period)
    }

    pub fn count(&self, model_id: &str, period: &str) -> usize {
        self.select(model_id, period).count()
    }

    /// Image counts per `(model_id, period)`.
    pub fn counts(&self) -> BTreeMap<(String, String), usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry((r.model_id.clone(), r.period.clone())).or_insert(0) += 1;
        }
        out
    }

    /// Replicate counts per `(activity, period)` for one model.
    pub fn replicate_counts(&self, model_id: &str) -> BTreeMap<(String, String), usize> {
        let mut out = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.model_id == model_id) {
            *out.entry((r.activity.clone(), r.period.clone())).or_insert(0) += 1;
        }
        out
    }

    /// Parses and validates a sidecar file, replacing any previous sidecar
    /// of the same kind.
    pub fn attach_sidecar(mut self, kind: SidecarKind, path: &Path) -> Result<Corpus> {
        match kind {
            SidecarKind::Styles => {
                let mut out = BTreeMap::new();
                for (line, row) in read_jsonl::<StyleRow>(path)? {
                    self.check_id(path, line, &row.image_id)?;
                    let obs = StyleObservation {
                        image_id: row.image_id.clone(),
                        label: row.label,
                        probs: row.probs,
                    };
                    obs.validate().map_err(|m| Error::row(path, line, m))?;
                    if out.insert(row.image_id.clone(), obs).is_some() {
                        return Err(Error::row(path, line, format!("duplicate image_id {:?}", row.image_id)));
                    }
                }
                self.sidecars.styles = Some(out);
            }
            SidecarKind::Embeddings => {
                let mut out = BTreeMap::new();
                let mut dim = None;
                for (line, row) in read_jsonl::<EmbeddingRow>(path)? {
                    self.check_id(path, line, &row.image_id)?;
                    if row.vector.is_empty() || row.vector.iter().any(|v| !v.is_finite()) {
                        return Err(Error::row(path, line, "vector must be non-empty and finite"));
                    }
                    match dim {
                        None => dim = Some(row.vector.len()),
                        Some(d) if d != row.vector.len() => {
                            return Err(Error::row(
                                path,
                                line,
                                format!("vector dimension {} differs from {d}", row.vector.len()),
                            ))
                        }
                        _ => {}
                    }
                    if out.insert(row.image_id.clone(), row.vector).is_some() {
                        return Err(Error::row(path, line, format!("duplicate image_id {:?}", row.image_id)));
                    }
                }
                self.sidecars.embeddings = Some(out);
            }
            SidecarKind::Faces => {
                let mut out = BTreeMap::new();
                for (line, row) in read_jsonl::<FacesRow>(path)? {
                    self.check_id(path, line, &row.image_id)?;
                    for face in &row.faces {
                        face.validate().map_err(|m| Error::row(path, line, m))?;
                    }
                    if out.insert(row.image_id.clone(), row.faces).is_some() {
                        return Err(Error::row(path, line, format!("duplicate image_id {:?}", row.image_id)));
                    }
                }
                self.sidecars.faces = Some(out);
            }
            SidecarKind::Annotations => {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for (line, row) in read_jsonl::<AnnotationRecord>(path)? {
                    self.check_id(path, line, &row.image_id)?;
                    let key = (row.image_id.clone(), row.question_id.clone(), row.annotator_id.clone());
                    if !seen.insert(key) {
                        return Err(Error::row(
                            path,
                            line,
                            format!(
                                "annotator {:?} answered question {:?} on {:?} twice",
                                row.annotator_id, row.question_id, row.image_id
                            ),
                        ));
                    }
                    out.push(row);
                }
                self.sidecars.annotations = Some(out);
            }
        }
        Ok(self)
    }

    fn check_id(&self, path: &Path, line: usize, image_id: &str) -> Result<()> {
        if self.contains(image_id) {
            Ok(())
        } else {
            Err(Error::row(path, line, format!("unknown image_id {image_id:?}")))
        }
    }
}
