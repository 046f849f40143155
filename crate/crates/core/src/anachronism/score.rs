use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::ElementIndex;
use super::proposal::AnachronismProposal;
use super::verify::AnachronismVerdict;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::ratio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnachronismScore {
    pub canonical_id: String,
    pub period: String,
    pub model_id: String,
    pub n_detected: usize,
    pub n_proposed: usize,
    #[serde(rename = "N")]
    pub n_images: usize,
    pub frequency: f64,
    /// Detected images per proposing prompt. Exceeds 1 only when a prompt
    /// contributes more than one detected replicate.
    pub severity: f64,
}

/// `(n_detected / N, n_detected / n_proposed)`, each zero on a zero
/// denominator.
pub fn frequency_severity(n_detected: usize, n_proposed: usize, n_images: usize) -> (f64, f64) {
    (ratio(n_detected, n_images), ratio(n_detected, n_proposed))
}

fn canonical<'a>(index: &'a ElementIndex, proposal: &AnachronismProposal) -> Result<&'a str> {
    index.canonical_of(&proposal.element).ok_or_else(|| {
        Error::Invalid(format!(
            "proposal {:?} for {}/{} has no canonical element",
            proposal.element, proposal.activity, proposal.period
        ))
    })
}

/// Frequency and severity of every element proposed for, or detected in,
/// one (model, period). Rows are ordered by canonical id.
pub fn score(
    verdicts: &[AnachronismVerdict],
    proposals: &[AnachronismProposal],
    index: &ElementIndex,
    corpus: &Corpus,
    model_id: &str,
    period: &str,
) -> Result<Vec<AnachronismScore>> {
    let n_images = corpus.count(model_id, period);
    if n_images == 0 {
        return Err(Error::Invalid(format!("no images for {model_id}/{period}")));
    }
    let activities: BTreeSet<&str> = corpus.select(model_id, period).map(|r| r.activity.as_str()).collect();

    let mut proposed: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in proposals.iter().filter(|p| p.period == period) {
        let id = canonical(index, p)?;
        let prompts = proposed.entry(id).or_default();
        if activities.contains(p.activity.as_str()) {
            prompts.insert(p.activity.as_str());
        }
    }

    let mut detected: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for v in verdicts.iter().filter(|v| v.detected()) {
        let Some(record) = corpus.get(&v.image_id) else { continue };
        if record.model_id == model_id && record.period == period {
            detected.entry(v.canonical_id.as_str()).or_default().insert(v.image_id.as_str());
        }
    }

    let ids: BTreeSet<&str> = proposed.keys().chain(detected.keys()).copied().collect();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let n_proposed = proposed.get(id).map_or(0, BTreeSet::len);
        let n_detected = detected.get(id).map_or(0, BTreeSet::len);
        if n_proposed == 0 && n_detected > 0 {
            return Err(Error::Invalid(format!(
                "{id} detected in {n_detected} image(s) of {model_id}/{period} but never proposed there"
            )));
        }
        let (frequency, severity) = frequency_severity(n_detected, n_proposed, n_images);
        out.push(AnachronismScore {
            canonical_id: id.to_string(),
            period: period.to_string(),
            model_id: model_id.to_string(),
            n_detected,
            n_proposed,
            n_images,
            frequency,
            severity,
        });
    }
    Ok(out)
}

/// [`score`] over several periods, concatenated in the given order.
pub fn score_periods(
    verdicts: &[AnachronismVerdict],
    proposals: &[AnachronismProposal],
    index: &ElementIndex,
    corpus: &Corpus,
    model_id: &str,
    periods: &[&str],
) -> Result<Vec<AnachronismScore>> {
    let mut out = Vec::new();
    for period in periods {
        out.extend(score(verdicts, proposals, index, corpus, model_id, period)?);
    }
    Ok(out)
}

/// Share of the (model, period) images with at least one detected element.
pub fn overall_rate(verdicts: &[AnachronismVerdict], corpus: &Corpus, model_id: &str, period: &str) -> Result<f64> {
    let n_images = corpus.count(model_id, period);
    if n_images == 0 {
        return Err(Error::Invalid(format!("no images for {model_id}/{period}")));
    }
    let hit: BTreeSet<&str> = verdicts
        .iter()
        .filter(|v| v.detected())
        .filter(|v| {
            corpus
                .get(&v.image_id)
                .is_some_and(|r| r.model_id == model_id && r.period == period)
        })
        .map(|v| v.image_id.as_str())
        .collect();
    Ok(ratio(hit.len(), n_images))
}
