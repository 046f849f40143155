use std::path::Path;

use anyhow::Result;
use chronoeval::manifest::{build_manifest, Manifest, ManifestSource};

use crate::run::{write_atomic, Run, MANIFEST_FILE};

fn load(from: Option<&Path>) -> Result<Manifest> {
    Ok(match from {
        Some(path) => build_manifest(ManifestSource::File(path))?,
        None => build_manifest(ManifestSource::Bundled)?,
    })
}

fn summary(m: &Manifest) -> String {
    format!(
        "{} categories, {} activities, {} periods, {} prompts",
        m.categories().len(),
        m.activities().count(),
        m.periods().len(),
        m.len()
    )
}

pub fn build(run: &mut Run, from: Option<&Path>) -> Result<()> {
    let manifest = load(from)?;
    write_atomic(&run.path(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    run.state.manifest = Some(MANIFEST_FILE.to_string());
    run.save()?;
    println!("manifest: {}", summary(&manifest));
    Ok(())
}

pub fn build_to(from: Option<&Path>, out: &Path) -> Result<()> {
    let manifest = load(from)?;
    write_atomic(out, manifest.to_json().as_bytes())?;
    println!("manifest: {}", summary(&manifest));
    Ok(())
}

pub fn validate(file: Option<&Path>, run_dir: Option<&Path>) -> Result<()> {
    let manifest = match (file, run_dir) {
        (Some(path), _) => load(Some(path))?,
        (None, Some(dir)) if dir.join(MANIFEST_FILE).is_file() => load(Some(&dir.join(MANIFEST_FILE)))?,
        _ => load(None)?,
    };
    println!("valid: {}", summary(&manifest));
    Ok(())
}
