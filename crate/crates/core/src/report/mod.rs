//! Machine-readable results and the text renderings derived from them.
//!
//! [`Report`] is the single source of truth; markdown and CSV are pure
//! functions of it, so identical inputs give byte-identical files.

mod anachronism;
mod demographics;
mod vsd;

use serde::{Deserialize, Serialize};

pub use anachronism::{
    anachronism_markdown, pool_by_model, render_anachronism_report, AnachronismReport, RankedElement, RateRow,
    DEFAULT_TOP_K,
};
pub use demographics::{
    deviation_columns, deviation_table_markdown, group_abbrev, mae_markdown, ModelDemographics, ValidationReport,
};
pub use vsd::{render_vsd_table, vsd_cell_text, vsd_table_markdown, ScoreChange, VsdCell, VsdTable, STYLE_CHANGED};

use crate::style::VsdResult;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSection {
    pub threshold: f64,
    pub replicates: usize,
    pub seed: u64,
    pub results: Vec<VsdResult>,
    pub table: VsdTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub other_run: String,
    pub table: VsdTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<StyleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anachronism: Option<AnachronismReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demographics: Vec<ModelDemographics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

impl Default for Report {
    fn default() -> Self {
        Report {
            version: REPORT_VERSION,
            style: None,
            anachronism: None,
            demographics: Vec::new(),
            validation: None,
            comparison: None,
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn render_markdown(report: &Report) -> String {
    let mut out = String::from("# Historical representation report\n\n");
    if let Some(style) = &report.style {
        out.push_str("## Visual style dominance\n\n");
        out.push_str(&vsd_table_markdown(&style.table));
        out.push_str(&format!(
            "\n`*` dominance not significant ({} bootstrap replicates, seed {}).\n\n",
            style.replicates, style.seed
        ));
    }
    if let Some(cmp) = &report.comparison {
        out.push_str(&format!("## Comparison with {}\n\n", cmp.other_run));
        out.push_str(&vsd_table_markdown(&cmp.table));
        out.push_str(&format!(
            "\n↑/↓/↔ score increase/decrease/unchanged; {STYLE_CHANGED} dominant style changed.\n\n"
        ));
    }
    if let Some(a) = &report.anachronism {
        out.push_str("## Anachronisms\n\n");
        out.push_str(&anachronism_markdown(a));
        out.push('\n');
    }
    for d in &report.demographics {
        out.push_str(&format!(
            "## Demographic deviations for {} (baseline: {})\n\n",
            d.model_id, d.baseline
        ));
        out.push_str(&format!(
            "{} of {} images excluded at confidence {}. Values in percentage points.\n\n",
            d.excluded_images, d.images, d.confidence
        ));
        out.push_str(&deviation_table_markdown(&d.categories));
        out.push('\n');
    }
    if let Some(v) = &report.validation {
        out.push_str("## Validation\n\n");
        if let Some(mae) = &v.mae {
            out.push_str(&mae_markdown(mae));
            out.push('\n');
        }
        for (axis, a) in &v.agreement {
            out.push_str(&format!(
                "Cross-classifier agreement ({axis}): {:.1}% over {} faces, Cohen's kappa {}\n\n",
                a.percent * 100.0,
                a.n,
                a.cohen_kappa.map_or("undefined".to_string(), |k| format!("{k:.2}"))
            ));
            out.push_str("| Class | Agreement (%) | Kappa |\n|---|---|---|\n");
            for (class, c) in &a.per_class {
                out.push_str(&format!(
                    "| {class} | {:.1} | {} |\n",
                    c.percent * 100.0,
                    c.cohen_kappa.map_or("–".to_string(), |k| format!("{k:.2}"))
                ));
            }
            out.push('\n');
        }
    }
    out
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// CSV files derived from the report, as `(file name, contents)`.
pub fn render_csvs(report: &Report) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if let Some(style) = &report.style {
        out.push((
            "vsd.csv",
            csv_string(
                &[
                    "model", "period", "score", "dominant", "second", "second_share", "ci_dominant_lo", "ci_dominant_hi",
                    "ci_second_lo", "ci_second_hi", "significant", "replicates", "n",
                ],
                style.results.iter().map(|r| {
                    vec![
                        r.model_id.clone(),
                        r.period.clone(),
                        r.score.to_string(),
                        r.dominant.to_string(),
                        r.second.to_string(),
                        r.second_share.to_string(),
                        r.ci_dominant.0.to_string(),
                        r.ci_dominant.1.to_string(),
                        r.ci_second.0.to_string(),
                        r.ci_second.1.to_string(),
                        r.significant.to_string(),
                        r.replicates.to_string(),
                        r.n.to_string(),
                    ]
                }),
            ),
        ));
    }
    if let Some(a) = &report.anachronism {
        out.push((
            "anachronism_scores.csv",
            csv_string(
                &["canonical_id", "period", "model", "n_detected", "n_proposed", "N", "frequency", "severity"],
                a.scores.iter().map(|s| {
                    vec![
                        s.canonical_id.clone(),
                        s.period.clone(),
                        s.model_id.clone(),
                        s.n_detected.to_string(),
                        s.n_proposed.to_string(),
                        s.n_images.to_string(),
                        s.frequency.to_string(),
                        s.severity.to_string(),
                    ]
                }),
            ),
        ));
        let ranking_rows = |kind: &'static str, ranking: &std::collections::BTreeMap<String, Vec<RankedElement>>| {
            ranking
                .iter()
                .flat_map(move |(m, els)| {
                    els.iter().enumerate().map(move |(i, e)| {
                        vec![
                            kind.to_string(),
                            m.clone(),
                            (i + 1).to_string(),
                            e.canonical_id.clone(),
                            e.frequency.to_string(),
                            e.severity.to_string(),
                        ]
                    })
                })
                .collect::<Vec<_>>()
        };
        let mut rows = ranking_rows("frequency", &a.top_frequency);
        rows.extend(ranking_rows("severity", &a.top_severity));
        out.push((
            "anachronism_rankings.csv",
            csv_string(&["ranking", "model", "rank", "canonical_id", "frequency", "severity"], rows),
        ));
    }
    if !report.demographics.is_empty() {
        out.push((
            "deviations.csv",
            csv_string(
                &["model", "activity", "period", "axis", "group", "under", "over"],
                report.demographics.iter().flat_map(|d| {
                    d.deviations.iter().map(|r| {
                        vec![
                            d.model_id.clone(),
                            r.activity.clone(),
                            r.period.clone(),
                            r.axis.as_str().to_string(),
                            r.group.clone(),
                            r.under.to_string(),
                            r.over.to_string(),
                        ]
                    })
                }),
            ),
        ));
    }
    out
}
