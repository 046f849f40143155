use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use chronoeval::corpus::SidecarKind;
use chronoeval::demographics::{
    cross_classifier_agreement, mae_validation, merge_asian, read_share_csv, BaselineEstimate, ShareTable,
};
use chronoeval::report::ValidationReport;
use chronoeval::Error;

use crate::run::{read_json, read_jsonl, write_json, Run};

pub const OUTPUT: &str = "validation.json";

fn load(run: &Run) -> Result<ValidationReport> {
    let path = run.path(OUTPUT);
    if path.is_file() {
        read_json(&path)
    } else {
        Ok(ValidationReport::default())
    }
}

/// Baseline shares averaged over activities, in percentage points.
fn estimates_from_baselines(baselines: &[BaselineEstimate]) -> ShareTable {
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for b in baselines {
        for dist in [&b.gender, &b.other] {
            for (group, share) in &dist.shares {
                let e = sums.entry((b.period.clone(), group.clone())).or_default();
                e.0 += share * 100.0;
                e.1 += 1;
            }
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

pub fn mae(run: &mut Run, reference: &Path, estimates: Option<&Path>) -> Result<()> {
    let reference = read_share_csv(reference)?;
    let estimates = match estimates {
        Some(path) => read_share_csv(path)?,
        None => {
            let path = run.require_output("demographics", "demographics run")?;
            let dir = path.parent().expect("output inside run directory");
            let baselines: Vec<BaselineEstimate> = read_jsonl(&dir.join("baselines.jsonl"))?;
            estimates_from_baselines(&baselines)
        }
    };
    let report = mae_validation(&estimates, &reference)?;
    for (group, v) in &report.per_group {
        println!("{group}: {v:.2}");
    }
    println!("aggregate MAE {:.2} over {} cells", report.aggregate, report.cells);
    let mut v = load(run)?;
    v.mae = Some(report);
    write_json(&run.path(OUTPUT), &v)?;
    run.record_output("validate", OUTPUT)
}

pub fn agreement(run: &mut Run, other: &Path) -> Result<()> {
    let manifest = run.manifest()?;
    let corpus = run.corpus(&manifest)?;
    let Some(ours) = &corpus.sidecars().faces else {
        return Err(Error::MissingSidecar("faces".into()).into());
    };
    let theirs = run.bare_corpus(&manifest)?.attach_sidecar(SidecarKind::Faces, other)?;
    let theirs = theirs.sidecars().faces.as_ref().expect("just attached");

    let mut gender = Vec::new();
    let mut race = Vec::new();
    let mut unpaired = 0usize;
    for (image, faces) in ours {
        let Some(other_faces) = theirs.get(image) else {
            unpaired += faces.len();
            continue;
        };
        unpaired += faces.len().abs_diff(other_faces.len());
        // Faces are paired by position within each image.
        for (a, b) in faces.iter().zip(other_faces) {
            gender.push((a.gender.as_str().to_string(), b.gender.as_str().to_string()));
            race.push((a.race.as_str().to_string(), b.race.as_str().to_string()));
        }
    }
    if gender.is_empty() {
        bail!("no face is observed by both classifiers");
    }
    let g = cross_classifier_agreement(&gender, &BTreeMap::new())?;
    let r = cross_classifier_agreement(&race, &merge_asian())?;
    for (axis, a) in [("gender", &g), ("race", &r)] {
        println!(
            "{axis}: {:.1}% agreement over {} faces, kappa {}",
            a.percent * 100.0,
            a.n,
            a.cohen_kappa.map_or("undefined".into(), |k| format!("{k:.2}"))
        );
    }
    if unpaired > 0 {
        println!("{unpaired} face(s) without a counterpart were skipped");
    }
    let mut v = load(run)?;
    v.agreement.insert("gender".into(), g);
    v.agreement.insert("race".into(), r);
    write_json(&run.path(OUTPUT), &v)?;
    run.record_output("validate", OUTPUT)
}
