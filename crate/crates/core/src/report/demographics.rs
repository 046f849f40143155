use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::demographics::{
    Axis, CategorySummary, ClassifierAgreement, DeviationRecord, Direction, FaceAggregate, Gender, MaeReport, Race,
};

/// Column header abbreviation of a group.
pub fn group_abbrev(group: &str) -> &str {
    match group {
        "male" => "M",
        "female" => "F",
        "White" => "W",
        "Black" => "B",
        "Latino" => "Lat",
        "EastAsian" => "EAs",
        "SoutheastAsian" => "SEAs",
        "Indian" => "Ind",
        "MiddleEastern" => "ME",
        other => other,
    }
}

/// The fixed deviation-table columns: under then over, genders then races.
pub fn deviation_columns() -> Vec<(Direction, Axis, &'static str)> {
    let groups: Vec<(Axis, &'static str)> = Gender::ALL
        .iter()
        .map(|g| (Axis::Gender, g.as_str()))
        .chain(Race::ALL.iter().map(|r| (Axis::Race, r.as_str())))
        .collect();
    [Direction::Under, Direction::Over]
        .into_iter()
        .flat_map(|d| groups.iter().map(move |&(a, g)| (d, a, g)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDemographics {
    pub model_id: String,
    /// Marks the reference as a language-model estimate.
    pub baseline: String,
    pub include_latino: bool,
    pub confidence: f64,
    pub images: usize,
    pub excluded_images: usize,
    pub deviations: Vec<DeviationRecord>,
    pub categories: Vec<CategorySummary>,
}

impl ModelDemographics {
    /// Totals across the per-cell face aggregates.
    pub fn count_images(aggregates: &[FaceAggregate]) -> (usize, usize) {
        aggregates
            .iter()
            .fold((0, 0), |(i, e), a| (i + a.images, e + a.excluded_images))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae: Option<MaeReport>,
    /// Per axis ("gender", "race").
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub agreement: BTreeMap<String, ClassifierAgreement>,
}

fn pp(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Wide table: one row per category, deviations in percentage
/// points, average bolded last. Columns for groups outside the scored set
/// show a dash.
pub fn deviation_table_markdown(categories: &[CategorySummary]) -> String {
    let columns = deviation_columns();
    let header: Vec<String> = columns
        .iter()
        .map(|(d, _, g)| format!("{}-{}", if *d == Direction::Under { "U" } else { "O" }, group_abbrev(g)))
        .collect();
    let mut out = format!("| Category | {} | Avg |\n", header.join(" | "));
    out.push_str(&format!("|---|{}---|\n", "---|".repeat(columns.len())));
    for row in categories {
        let cells: Vec<String> = columns
            .iter()
            .map(|(d, a, g)| {
                row.cells
                    .iter()
                    .find(|(cd, ca, cg, _)| cd == d && ca == a && cg == g)
                    .map_or("–".to_string(), |c| pp(c.3))
            })
            .collect();
        out.push_str(&format!("| {} | {} | **{}** |\n", row.label, cells.join(" | "), pp(row.avg)));
    }
    out
}

pub fn mae_markdown(mae: &MaeReport) -> String {
    let groups: Vec<&String> = mae.per_group.keys().collect();
    let mut out = format!("| {} | MAE |\n", groups.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(" | "));
    out.push_str(&format!("|{}---|\n", "---|".repeat(groups.len())));
    let values: Vec<String> = mae.per_group.values().map(|v| format!("{v:.2}")).collect();
    out.push_str(&format!("| {} | {:.2} |\n\n", values.join(" | "), mae.aggregate));
    out.push_str("| Period | MAE |\n|---|---|\n");
    for (p, v) in &mae.per_period {
        out.push_str(&format!("| {p} | {v:.2} |\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_order() {
        let header: Vec<String> = deviation_columns()
            .iter()
            .map(|(d, _, g)| format!("{}-{}", if *d == Direction::Under { "U" } else { "O" }, group_abbrev(g)))
            .collect();
        assert_eq!(
            header.join(" "),
            "U-M U-F U-W U-B U-Lat U-EAs U-SEAs U-Ind U-ME O-M O-F O-W O-B O-Lat O-EAs O-SEAs O-Ind O-ME"
        );
    }

    #[test]
    fn zero_table() {
        let row = CategorySummary {
            category: "art".into(),
            label: "Art".into(),
            cells: vec![(Direction::Under, Axis::Gender, "male".into(), 0.0), (Direction::Over, Axis::Gender, "male".into(), 0.0)],
            avg: 0.0,
        };
        let md = deviation_table_markdown(&[row]);
        let last = md.lines().last().unwrap();
        assert!(last.starts_with("| Art | 0.00 | – |"), "{last}");
        assert!(last.ends_with("| **0.00** |"));
    }
}
