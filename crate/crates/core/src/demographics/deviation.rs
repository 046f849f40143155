use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{axis_groups, Axis, DemographicDistribution};
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Under,
    Over,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub activity: String,
    pub period: String,
    pub axis: Axis,
    pub group: String,
    pub under: f64,
    pub over: f64,
}

/// `(Under, Over)` of an observed share against a baseline share.
pub fn under_over<T: Real>(observed: T, baseline: T) -> (T, T) {
    if observed < baseline {
        (baseline - observed, T::zero())
    } else if observed > baseline {
        (T::zero(), observed - baseline)
    } else {
        (T::zero(), T::zero())
    }
}

/// Position of a group in display order; unknown groups sort after known
/// ones, alphabetically.
fn group_rank(axis: Axis, group: &str) -> (usize, String) {
    let order = axis_groups(axis);
    (order.iter().position(|g| *g == group).unwrap_or(order.len()), group.to_string())
}

/// Per-group under/over-representation; a group missing on one side has
/// share zero there.
pub fn deviation(
    activity: &str,
    period: &str,
    observed: &DemographicDistribution,
    baseline: &DemographicDistribution,
) -> Result<Vec<DeviationRecord>> {
    if observed.axis != baseline.axis {
        return Err(Error::Invalid(format!(
            "cannot compare a {} distribution with a {} baseline",
            observed.axis.as_str(),
            baseline.axis.as_str()
        )));
    }
    let axis = observed.axis;
    let mut groups: Vec<&String> = observed.shares.keys().chain(baseline.shares.keys()).collect();
    groups.sort_by_key(|g| group_rank(axis, g));
    groups.dedup();
    Ok(groups
        .into_iter()
        .map(|group| {
            let (under, over) = under_over(observed.share(group), baseline.share(group));
            DeviationRecord {
                activity: activity.to_string(),
                period: period.to_string(),
                axis,
                group: group.clone(),
                under,
                over,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDeviation {
    pub category: String,
    pub period: String,
    pub axis: Axis,
    pub group: String,
    pub under: f64,
    pub over: f64,
    /// Activity cells averaged.
    pub n: usize,
}

fn sorted_records(records: &[DeviationRecord]) -> Vec<&DeviationRecord> {
    let mut sorted: Vec<&DeviationRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.activity, &a.period, a.axis, &a.group)
            .cmp(&(&b.activity, &b.period, b.axis, &b.group))
            .then(a.under.total_cmp(&b.under))
            .then(a.over.total_cmp(&b.over))
    });
    sorted
}

/// Unweighted mean of under/over over the activities of each category, per
/// (period, axis, group). Rows follow manifest order.
pub fn aggregate_by_category(records: &[DeviationRecord], manifest: &Manifest) -> Result<Vec<CategoryDeviation>> {
    type Key = (usize, usize, Axis, (usize, String));
    let mut sums: BTreeMap<Key, (f64, f64, usize)> = BTreeMap::new();
    let category_pos: BTreeMap<&str, usize> = manifest
        .categories()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    for r in sorted_records(records) {
        let category = manifest
            .category_of(&r.activity)
            .ok_or_else(|| Error::Invalid(format!("activity {:?} is not in the manifest", r.activity)))?;
        let period = manifest
            .period_position(&r.period)
            .ok_or_else(|| Error::Invalid(format!("period {:?} is not in the manifest", r.period)))?;
        let key = (category_pos[category.id.as_str()], period, r.axis, group_rank(r.axis, &r.group));
        let s = sums.entry(key).or_default();
        s.0 += r.under;
        s.1 += r.over;
        s.2 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|((c, p, axis, (_, group)), (u, o, n))| CategoryDeviation {
            category: manifest.categories()[c].id.clone(),
            period: manifest.periods()[p].id.clone(),
            axis,
            group,
            under: u / n as f64,
            over: o / n as f64,
            n,
        })
        .collect())
}

/// One row of the per-category table: mean deviations over every
/// (activity, period) cell of the category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: String,
    pub label: String,
    /// `(direction, axis, group, mean)` in column order: every under column,
    /// then every over column.
    pub cells: Vec<(Direction, Axis, String, f64)>,
    /// Mean of all cells.
    pub avg: f64,
}

pub fn category_summary(records: &[DeviationRecord], manifest: &Manifest) -> Result<Vec<CategorySummary>> {
    let mut per_category: BTreeMap<usize, BTreeMap<(Axis, (usize, String)), (f64, f64, usize)>> = BTreeMap::new();
    for r in sorted_records(records) {
        let category = manifest
            .category_of(&r.activity)
            .ok_or_else(|| Error::Invalid(format!("activity {:?} is not in the manifest", r.activity)))?;
        let pos = manifest
            .categories()
            .iter()
            .position(|c| c.id == category.id)
            .expect("category from manifest");
        let s = per_category
            .entry(pos)
            .or_default()
            .entry((r.axis, group_rank(r.axis, &r.group)))
            .or_default();
        s.0 += r.under;
        s.1 += r.over;
        s.2 += 1;
    }
    Ok(per_category
        .into_iter()
        .map(|(pos, groups)| {
            let mut cells = Vec::with_capacity(groups.len() * 2);
            for direction in [Direction::Under, Direction::Over] {
                for ((axis, (_, group)), (u, o, n)) in &groups {
                    let v = if direction == Direction::Under { u } else { o };
                    cells.push((direction, *axis, group.clone(), v / *n as f64));
                }
            }
            let avg = cells.iter().map(|c| c.3).sum::<f64>() / cells.len() as f64;
            let category = &manifest.categories()[pos];
            CategorySummary {
                category: category.id.clone(),
                label: category.label.clone(),
                cells,
                avg,
            }
        })
        .collect())
}
