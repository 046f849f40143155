use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anachronism::{AnachronismScore, HumanAgreement};
use crate::scalar::ratio;

pub const DEFAULT_TOP_K: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub model_id: String,
    pub period: String,
    pub overall_rate: f64,
}

/// One element pooled over every scored period of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedElement {
    pub canonical_id: String,
    pub n_detected: usize,
    pub n_proposed: usize,
    #[serde(rename = "N")]
    pub n_images: usize,
    pub frequency: f64,
    pub severity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnachronismReport {
    pub scores: Vec<AnachronismScore>,
    pub rates: Vec<RateRow>,
    /// Per model, the top elements by pooled frequency.
    pub top_frequency: BTreeMap<String, Vec<RankedElement>>,
    /// Per model, the top elements by pooled severity.
    pub top_severity: BTreeMap<String, Vec<RankedElement>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_agreement: Option<HumanAgreement>,
}

/// Pools each model's rows per element: detections over images, detections
/// over proposing prompts.
pub fn pool_by_model(scores: &[AnachronismScore]) -> BTreeMap<String, Vec<RankedElement>> {
    let mut sums: BTreeMap<&str, BTreeMap<&str, (usize, usize, usize)>> = BTreeMap::new();
    for s in scores {
        let e = sums
            .entry(s.model_id.as_str())
            .or_default()
            .entry(s.canonical_id.as_str())
            .or_default();
        e.0 += s.n_detected;
        e.1 += s.n_proposed;
        e.2 += s.n_images;
    }
    sums.into_iter()
        .map(|(model, elements)| {
            let pooled = elements
                .into_iter()
                .map(|(id, (d, p, n))| RankedElement {
                    canonical_id: id.to_string(),
                    n_detected: d,
                    n_proposed: p,
                    n_images: n,
                    frequency: ratio(d, n),
                    severity: ratio(d, p),
                })
                .collect();
            (model.to_string(), pooled)
        })
        .collect()
}

/// Highest `key` first, ties by canonical id.
fn top_k(mut elements: Vec<RankedElement>, k: usize, key: fn(&RankedElement) -> f64) -> Vec<RankedElement> {
    elements.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.canonical_id.cmp(&b.canonical_id)));
    elements.truncate(k);
    elements
}

pub fn render_anachronism_report(scores: &[AnachronismScore], rates: &[RateRow], k: usize) -> AnachronismReport {
    let pooled = pool_by_model(scores);
    let rank = |key: fn(&RankedElement) -> f64| {
        pooled
            .iter()
            .map(|(m, els)| (m.clone(), top_k(els.clone(), k, key)))
            .collect()
    };
    AnachronismReport {
        scores: scores.to_vec(),
        rates: rates.to_vec(),
        top_frequency: rank(|e| e.frequency),
        top_severity: rank(|e| e.severity),
        human_agreement: None,
    }
}

pub fn anachronism_markdown(report: &AnachronismReport) -> String {
    let mut out = String::new();
    if !report.rates.is_empty() {
        out.push_str("| Model | Period | Overall rate |\n|---|---|---|\n");
        for r in &report.rates {
            out.push_str(&format!("| {} | {} | {:.2} |\n", r.model_id, r.period, r.overall_rate));
        }
        out.push('\n');
    }
    for (title, ranking) in [("frequency", &report.top_frequency), ("severity", &report.top_severity)] {
        for (model, elements) in ranking {
            out.push_str(&format!("Top elements by {title} for {model}:\n\n"));
            out.push_str("| # | Element | Frequency | Severity | Detected | Proposed |\n|---|---|---|---|---|---|\n");
            for (i, e) in elements.iter().enumerate() {
                out.push_str(&format!(
                    "| {} | {} | {:.3} | {:.2} | {} | {} |\n",
                    i + 1,
                    e.canonical_id,
                    e.frequency,
                    e.severity,
                    e.n_detected,
                    e.n_proposed
                ));
            }
            out.push('\n');
        }
    }
    if let Some(h) = &report.human_agreement {
        out.push_str(&format!(
            "Human agreement: {:.1}% over {} items; Fleiss' kappa {}\n",
            h.percent_agreement * 100.0,
            h.n_items,
            h.fleiss_kappa.map_or("undefined (degenerate)".to_string(), |k| format!("{k:.2}"))
        ));
    }
    out
}
