use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, Real};

/// Percentage-point shares keyed by (period, group).
pub type ShareTable = BTreeMap<(String, String), f64>;

#[derive(Deserialize)]
struct ShareRow {
    period: String,
    group: String,
    share_percent: f64,
}

/// Reads a `period,group,share_percent` CSV.
pub fn read_share_csv(path: &Path) -> Result<ShareTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let mut table = ShareTable::new();
    for (i, row) in reader.deserialize::<ShareRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::row(path, line, e.to_string()))?;
        if !row.share_percent.is_finite() || !(0.0..=100.0).contains(&row.share_percent) {
            return Err(Error::row(path, line, format!("share_percent {} outside [0, 100]", row.share_percent)));
        }
        if table.insert((row.period.clone(), row.group.clone()), row.share_percent).is_some() {
            return Err(Error::row(path, line, format!("duplicate cell ({}, {})", row.period, row.group)));
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub per_group: BTreeMap<String, f64>,
    pub per_period: BTreeMap<String, f64>,
    /// Mean over every (period, group) cell.
    pub aggregate: f64,
    pub cells: usize,
}

fn mean_abs<T: Real>(diffs: impl IntoIterator<Item = T>) -> T {
    mean(diffs.into_iter().map(|d| d.abs())).unwrap_or_else(T::zero)
}

/// Mean absolute error, in percentage points, of estimates against reference
/// shares; both tables must cover exactly the same cells.
pub fn mae_validation(estimates: &ShareTable, reference: &ShareTable) -> Result<MaeReport> {
    let est: BTreeSet<&(String, String)> = estimates.keys().collect();
    let refs: BTreeSet<&(String, String)> = reference.keys().collect();
    if est != refs {
        let show = |s: Vec<&&(String, String)>| s.iter().map(|(p, g)| format!("{p}/{g}")).collect::<Vec<_>>().join(", ");
        let only_est = show(est.difference(&refs).collect());
        let only_ref = show(refs.difference(&est).collect());
        return Err(Error::Invalid(format!(
            "estimate and reference cells differ; missing from reference: [{only_est}]; missing from estimates: [{only_ref}]"
        )));
    }
    if est.is_empty() {
        return Err(Error::Invalid("no cells to compare".into()));
    }
    let diff = |k: &(String, String)| estimates[k] - reference[k];
    let mut by_group: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut by_period: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for key in reference.keys() {
        by_period.entry(key.0.as_str()).or_default().push(diff(key));
        by_group.entry(key.1.as_str()).or_default().push(diff(key));
    }
    Ok(MaeReport {
        per_group: by_group.into_iter().map(|(g, d)| (g.to_string(), mean_abs(d))).collect(),
        per_period: by_period.into_iter().map(|(p, d)| (p.to_string(), mean_abs(d))).collect(),
        aggregate: mean_abs(reference.keys().map(diff)),
        cells: reference.len(),
    })
}
