use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use chronoeval::corpus::{ingest_corpus, sha256_hex, SidecarKind};

use crate::run::{write_jsonl, CorpusState, Run, SidecarState, CORPUS_FILE};

pub fn ingest(run: &mut Run, root: &Path, index: Option<&Path>) -> Result<()> {
    let manifest = run.manifest()?;
    let root = root
        .canonicalize()
        .with_context(|| format!("corpus root {}", root.display()))?;
    let index = index
        .map(|p| p.canonicalize().with_context(|| format!("index {}", p.display())))
        .transpose()?;
    let corpus = ingest_corpus(&root, index.as_deref(), &manifest)?;
    let records: Vec<_> = corpus
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.path.is_relative() {
                r.path = root.join(&r.path);
            }
            r
        })
        .collect();
    write_jsonl(&run.path(CORPUS_FILE), &records)?;

    let counts: BTreeMap<String, usize> = corpus
        .counts()
        .into_iter()
        .map(|((m, p), n)| (format!("{m}/{p}"), n))
        .collect();
    for (cell, n) in &counts {
        println!("{cell}: {n} images");
    }
    println!("{} images", corpus.len());
    run.state.corpus = Some(CorpusState {
        root,
        images: corpus.len(),
        counts,
    });
    run.save()
}

pub fn attach(run: &mut Run, kind: SidecarKind, file: &Path) -> Result<()> {
    let manifest = run.manifest()?;
    let corpus = run.bare_corpus(&manifest)?.attach_sidecar(kind, file)?;
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let target = format!("sidecars/{kind}.jsonl");
    crate::run::write_atomic(&run.path(&target), &bytes)?;
    let s = corpus.sidecars();
    let rows = match kind {
        SidecarKind::Styles => s.styles.as_ref().map_or(0, |m| m.len()),
        SidecarKind::Embeddings => s.embeddings.as_ref().map_or(0, |m| m.len()),
        SidecarKind::Faces => s.faces.as_ref().map_or(0, |m| m.len()),
        SidecarKind::Annotations => s.annotations.as_ref().map_or(0, |m| m.len()),
    };
    println!("{kind}: {rows} rows over {} images", corpus.len());
    run.state.sidecars.insert(
        kind,
        SidecarState {
            file: target,
            source: file.canonicalize().unwrap_or_else(|_| file.to_path_buf()),
            sha256: sha256_hex(&bytes),
        },
    );
    run.save()
}
