use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cohen's kappa of paired labels; `None` when chance agreement is total
/// (both raters constant on the same label) or there are no pairs.
pub fn cohen_kappa<T: Real, L: Ord>(pairs: &[(L, L)]) -> Option<T> {
    if pairs.is_empty() {
        return None;
    }
    let n = T::of_count(pairs.len());
    let mut a: BTreeMap<&L, usize> = BTreeMap::new();
    let mut b: BTreeMap<&L, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in pairs {
        *a.entry(x).or_default() += 1;
        *b.entry(y).or_default() += 1;
        agree += usize::from(x == y);
    }
    let p_o = T::of_count(agree) / n;
    let p_e: T = a
        .iter()
        .map(|(label, &ca)| T::of_count(ca) * T::of_count(b.get(label).copied().unwrap_or(0)) / (n * n))
        .sum();
    let denom = T::one() - p_e;
    if denom.abs() <= T::epsilon() {
        return None;
    }
    Some((p_o - p_e) / denom)
}

/// Label mapping that folds East and Southeast Asian into one Asian class.
pub fn merge_asian() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("EastAsian".to_string(), "Asian".to_string()),
        ("SoutheastAsian".to_string(), "Asian".to_string()),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAgreement {
    pub percent: f64,
    pub cohen_kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierAgreement {
    pub n: usize,
    pub percent: f64,
    pub cohen_kappa: Option<f64>,
    /// One-vs-rest agreement per class.
    pub per_class: BTreeMap<String, ClassAgreement>,
}

/// Agreement between two classifiers on paired labels, after mapping both
/// sides through `mapping` (labels absent from it pass through).
pub fn cross_classifier_agreement(
    pairs: &[(String, String)],
    mapping: &BTreeMap<String, String>,
) -> Result<ClassifierAgreement> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no paired observations".into()));
    }
    let map = |l: &String| mapping.get(l).cloned().unwrap_or_else(|| l.clone());
    let mapped: Vec<(String, String)> = pairs.iter().map(|(a, b)| (map(a), map(b))).collect();
    let n = mapped.len();
    let percent = mapped.iter().filter(|(a, b)| a == b).count() as f64 / n as f64;
    let classes: BTreeSet<&String> = mapped.iter().flat_map(|(a, b)| [a, b]).collect();
    let per_class = classes
        .into_iter()
        .map(|class| {
            let binary: Vec<(bool, bool)> = mapped.iter().map(|(a, b)| (a == class, b == class)).collect();
            let agree = binary.iter().filter(|(a, b)| a == b).count();
            (
                class.clone(),
                ClassAgreement {
                    percent: agree as f64 / n as f64,
                    cohen_kappa: cohen_kappa(&binary),
                },
            )
        })
        .collect();
    Ok(ClassifierAgreement {
        n,
        percent,
        cohen_kappa: cohen_kappa(&mapped),
        per_class,
    })
}
