use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::style::VsdResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreChange {
    Up,
    Down,
    Same,
}

impl ScoreChange {
    pub fn arrow(self) -> &'static str {
        match self {
            ScoreChange::Up => "↑",
            ScoreChange::Down => "↓",
            ScoreChange::Same => "↔",
        }
    }
}

/// Marker placed after a cell whose dominant style changed.
pub const STYLE_CHANGED: &str = "⇄";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsdCell {
    pub model_id: String,
    pub period: String,
    pub text: String,
    pub significant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change: Option<ScoreChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_changed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsdTable {
    pub models: Vec<String>,
    /// `(period, cells in model order)`; a model without a result for the
    /// period has `None`.
    pub rows: Vec<(String, Vec<Option<VsdCell>>)>,
}

fn round2(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

/// `"0.88 & painting"`, with a trailing `*` when dominance is not
/// significant.
pub fn vsd_cell_text(result: &VsdResult) -> String {
    format!(
        "{:.2} & {}{}",
        result.score,
        result.dominant,
        if result.significant { "" } else { "*" }
    )
}

/// Rows follow `period_order`, then any remaining periods alphabetically;
/// columns are models in lexicographic order. With a mitigated run, cells
/// show the mitigated result with its score direction (at display
/// precision) and a style-change marker.
pub fn render_vsd_table(results: &[VsdResult], mitigated: Option<&[VsdResult]>, period_order: &[String]) -> Result<VsdTable> {
    if results.is_empty() {
        return Err(Error::Invalid("no VSD results to tabulate".into()));
    }
    let index = |rs: &[VsdResult]| -> Result<BTreeMap<(String, String), VsdResult>> {
        let mut m = BTreeMap::new();
        for r in rs {
            if m.insert((r.model_id.clone(), r.period.clone()), r.clone()).is_some() {
                return Err(Error::Invalid(format!("duplicate VSD result for {}/{}", r.model_id, r.period)));
            }
        }
        Ok(m)
    };
    let base = index(results)?;
    let after = mitigated.map(index).transpose()?;
    if let Some(after) = &after {
        let periods = |m: &BTreeMap<(String, String), VsdResult>| m.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>();
        let (pb, pa) = (periods(&base), periods(after));
        if pb != pa {
            return Err(Error::Invalid(format!(
                "base and mitigated runs cover different periods: {pb:?} vs {pa:?}"
            )));
        }
    }
    let models: Vec<String> = base.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let present: BTreeSet<String> = base.keys().map(|k| k.1.clone()).collect();
    let mut periods: Vec<String> = period_order.iter().filter(|p| present.contains(*p)).cloned().collect();
    periods.extend(present.iter().filter(|p| !period_order.contains(p)).cloned());

    let rows = periods
        .into_iter()
        .map(|period| {
            let cells = models
                .iter()
                .map(|model| {
                    let key = (model.clone(), period.clone());
                    let b = base.get(&key)?;
                    let cell = match after.as_ref().and_then(|a| a.get(&key)) {
                        None => VsdCell {
                            model_id: model.clone(),
                            period: period.clone(),
                            text: vsd_cell_text(b),
                            significant: b.significant,
                            change: None,
                            style_changed: None,
                        },
                        Some(m) => {
                            let change = match round2(m.score).cmp(&round2(b.score)) {
                                std::cmp::Ordering::Greater => ScoreChange::Up,
                                std::cmp::Ordering::Less => ScoreChange::Down,
                                std::cmp::Ordering::Equal => ScoreChange::Same,
                            };
                            let changed = m.dominant != b.dominant;
                            VsdCell {
                                model_id: model.clone(),
                                period: period.clone(),
                                text: format!(
                                    "{} {}{}",
                                    vsd_cell_text(m),
                                    change.arrow(),
                                    if changed { STYLE_CHANGED } else { "" }
                                ),
                                significant: m.significant,
                                change: Some(change),
                                style_changed: Some(changed),
                            }
                        }
                    };
                    Some(cell)
                })
                .collect();
            (period, cells)
        })
        .collect();
    Ok(VsdTable { models, rows })
}

pub fn vsd_table_markdown(table: &VsdTable) -> String {
    let mut out = format!("| Period | {} |\n", table.models.join(" | "));
    out.push_str(&format!("|---|{}\n", "---|".repeat(table.models.len())));
    for (period, cells) in &table.rows {
        let texts: Vec<&str> = cells.iter().map(|c| c.as_ref().map_or("–", |c| c.text.as_str())).collect();
        out.push_str(&format!("| {period} | {} |\n", texts.join(" | ")));
    }
    out
}
