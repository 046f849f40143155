use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chronoeval::corpus::Corpus;
use chronoeval::style::{
    bootstrap_vsd, colorfulness_of_file, period_labels, relabel_with, train_linear_probe, BootstrapConfig,
    PrecisionProfile, ProbeConfig, ProbeMetrics, StyleLabel, StyleObservation, VsdResult,
    DEFAULT_MONOCHROME_THRESHOLD,
};
use chronoeval::Error;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::run::{read_json, read_jsonl, write_json, Run};

pub const OUTPUT: &str = "style.json";

#[derive(Debug, Clone, Args)]
pub struct StyleArgs {
    /// Train a linear probe on EMB (embeddings JSONL) with LABELS (style
    /// JSONL) and classify the corpus from its embeddings sidecar.
    #[arg(long, num_args = 2, value_names = ["EMB", "LABELS"])]
    probe_train: Option<Vec<PathBuf>>,
    /// Photographs with colorfulness strictly below this become monochrome.
    #[arg(long, default_value_t = DEFAULT_MONOCHROME_THRESHOLD)]
    threshold: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 5000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Classifier precision profile (JSON); labels are treated as exact
    /// when omitted.
    #[arg(long, value_name = "FILE")]
    precision: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub train: ProbeMetrics,
    pub validation: Option<ProbeMetrics>,
    pub epochs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StyleOutput {
    pub threshold: f64,
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSummary>,
    pub precision: PrecisionProfile,
    /// Photographs relabeled monochrome.
    pub relabeled: usize,
    /// Final label per image.
    pub labels: BTreeMap<String, StyleLabel>,
    pub results: Vec<VsdResult>,
}

#[derive(Deserialize)]
struct LabelRow {
    image_id: String,
    label: StyleLabel,
}

#[derive(Deserialize)]
struct VectorRow {
    image_id: String,
    vector: Vec<f64>,
}

fn probe_labels(run: &Run, corpus: &Corpus, emb: &Path, labels: &Path) -> Result<(BTreeMap<String, StyleObservation>, ProbeSummary)> {
    let Some(embeddings) = &corpus.sidecars().embeddings else {
        return Err(Error::MissingSidecar("embeddings (needed to classify the corpus with --probe-train)".into()).into());
    };
    let vectors: BTreeMap<String, Vec<f64>> = read_jsonl::<VectorRow>(emb)?
        .into_iter()
        .map(|r| (r.image_id, r.vector))
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in read_jsonl::<LabelRow>(labels)? {
        let v = vectors
            .get(&row.image_id)
            .with_context(|| format!("{}: no embedding for training item {:?}", emb.display(), row.image_id))?;
        xs.push(v.clone());
        ys.push(row.label);
    }
    let config = ProbeConfig::default();
    let trained = train_linear_probe(&xs, &ys, &config)?;
    write_json(&run.path("probe.json"), &trained.probe)?;

    let mut missing = Vec::new();
    let mut out = BTreeMap::new();
    for record in corpus.records() {
        match embeddings.get(&record.image_id) {
            Some(v) => {
                out.insert(record.image_id.clone(), trained.probe.classify(&record.image_id, v)?);
            }
            None => missing.push(record.image_id.as_str()),
        }
    }
    if !missing.is_empty() {
        bail!("{} image(s) have no embedding: {}", missing.len(), missing.join(", "));
    }
    let summary = ProbeSummary {
        train: trained.train,
        validation: trained.validation,
        epochs: config.epochs,
    };
    Ok((out, summary))
}

pub fn run(run: &mut Run, args: &StyleArgs) -> Result<()> {
    let manifest = run.manifest()?;
    let corpus = run.corpus(&manifest)?;

    let (observations, source, probe) = match &args.probe_train {
        Some(paths) => {
            let (obs, summary) = probe_labels(run, &corpus, &paths[0], &paths[1])?;
            (obs, "linear probe", Some(summary))
        }
        None => match &corpus.sidecars().styles {
            Some(styles) => (styles.clone(), "styles sidecar", None),
            None if corpus.sidecars().embeddings.is_some() => {
                return Err(Error::MissingSidecar(
                    "styles (an embeddings sidecar is attached; pass --probe-train EMB LABELS to classify it)".into(),
                )
                .into())
            }
            None => return Err(Error::MissingSidecar("styles or embeddings".into()).into()),
        },
    };

    let precision = match &args.precision {
        Some(path) => {
            let p: PrecisionProfile = read_json(path)?;
            p.validate()?;
            p
        }
        None => PrecisionProfile::exact(),
    };

    let relabeled: Vec<(String, StyleObservation)> = corpus
        .records()
        .par_iter()
        .filter_map(|r| observations.get(&r.image_id).map(|o| (r, o)))
        .map(|(r, o)| {
            let obs = relabel_with(o, args.threshold, || colorfulness_of_file(&r.path))?;
            Ok((r.image_id.clone(), obs))
        })
        .collect::<chronoeval::Result<_>>()?;
    let changed = relabeled
        .iter()
        .filter(|(id, o)| observations[id].label != o.label)
        .count();
    let labels: BTreeMap<String, StyleObservation> = relabeled.into_iter().collect();

    let config = BootstrapConfig {
        replicates: args.bootstrap,
        level: args.level,
        seed: args.seed,
    };
    let mut results = Vec::new();
    for model in corpus.models() {
        for period in manifest.periods() {
            if corpus.count(model, &period.id) == 0 {
                continue;
            }
            let observed = period_labels(&corpus, &labels, model, &period.id)?;
            results.push(bootstrap_vsd(model, &period.id, &observed, &precision, &config)?);
        }
    }
    for r in &results {
        println!(
            "{}/{}: VSD {:.2} {}{}",
            r.model_id,
            r.period,
            r.score,
            r.dominant,
            if r.significant { "" } else { " (not significant)" }
        );
    }

    let output = StyleOutput {
        threshold: args.threshold,
        replicates: args.bootstrap,
        seed: args.seed,
        level: args.level,
        source: source.to_string(),
        probe,
        precision,
        relabeled: changed,
        labels: labels.into_iter().map(|(id, o)| (id, o.label)).collect(),
        results,
    };
    write_json(&run.path(OUTPUT), &output)?;
    run.record_output("style", OUTPUT)
}
