use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::verify::{AnachronismVerdict, Majority};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HumanAnswer {
    Yes,
    No,
}

/// One annotator's answer to one identification question on one image.
/// `question_id` is the canonical element id the question belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub question_id: String,
    pub annotator_id: String,
    pub answer: HumanAnswer,
}

/// Fleiss' kappa of an item × category count matrix. Items may have
/// different rater counts; items with fewer than two raters are skipped.
/// `None` when no item qualifies or chance agreement is total.
pub fn fleiss_kappa<T: Real>(counts: &[Vec<usize>]) -> Option<T> {
    let rows: Vec<&Vec<usize>> = counts.iter().filter(|r| r.iter().sum::<usize>() >= 2).collect();
    if rows.is_empty() {
        return None;
    }
    let categories = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut category_totals = vec![0usize; categories];
    let mut ratings = 0usize;
    let mut p_bar = T::zero();
    for row in &rows {
        let n: usize = row.iter().sum();
        ratings += n;
        let agreeing: usize = row.iter().map(|&c| c * c).sum::<usize>() - n;
        p_bar += T::of_count(agreeing) / T::of_count(n * (n - 1));
        for (total, &c) in category_totals.iter_mut().zip(row.iter()) {
            *total += c;
        }
    }
    p_bar /= T::of_count(rows.len());
    let p_e: T = category_totals
        .iter()
        .map(|&c| {
            let p = T::of_count(c) / T::of_count(ratings);
            p * p
        })
        .sum();
    let denom = T::one() - p_e;
    if denom.abs() <= T::epsilon() {
        return None;
    }
    Some((p_bar - p_e) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAgreement {
    /// (image, question) pairs judged by both the pipeline and humans.
    pub n_items: usize,
    pub percent_agreement: f64,
    pub fleiss_kappa: Option<f64>,
    /// True when kappa is undefined because every rating fell in one category.
    pub kappa_degenerate: bool,
    pub n_annotated_items: usize,
}

/// Compares pipeline majorities with human majorities and measures
/// inter-annotator agreement. A human tie counts as not detected.
pub fn human_agreement(verdicts: &[AnachronismVerdict], annotations: &[AnnotationRecord]) -> Result<HumanAgreement> {
    let mut tallies: BTreeMap<(&str, &str), [usize; 2]> = BTreeMap::new();
    for a in annotations {
        let t = tallies.entry((a.image_id.as_str(), a.question_id.as_str())).or_default();
        match a.answer {
            HumanAnswer::Yes => t[0] += 1,
            HumanAnswer::No => t[1] += 1,
        }
    }
    let pipeline: BTreeMap<(&str, &str), Majority> = verdicts
        .iter()
        .map(|v| ((v.image_id.as_str(), v.canonical_id.as_str()), v.majority))
        .collect();

    let mut overlap = 0usize;
    let mut agree = 0usize;
    for (key, [yes, no]) in &tallies {
        let Some(&machine) = pipeline.get(key) else { continue };
        let human = if yes > no { Majority::Detected } else { Majority::NotDetected };
        overlap += 1;
        agree += usize::from(human == machine);
    }
    if overlap == 0 {
        return Err(Error::Invalid(
            "no (image, question) pair is covered by both verdicts and annotations".into(),
        ));
    }
    let matrix: Vec<Vec<usize>> = tallies.values().map(|t| t.to_vec()).collect();
    let rated = matrix.iter().filter(|r| r.iter().sum::<usize>() >= 2).count();
    let kappa = fleiss_kappa::<f64>(&matrix);
    Ok(HumanAgreement {
        n_items: overlap,
        percent_agreement: agree as f64 / overlap as f64,
        fleiss_kappa: kappa,
        kappa_degenerate: kappa.is_none() && rated > 0,
        n_annotated_items: tallies.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanimous_yes_is_degenerate() {
        assert_eq!(fleiss_kappa::<f64>(&[vec![3, 0], vec![3, 0]]), None);
        assert_eq!(fleiss_kappa::<f64>(&[vec![1, 0]]), None);
    }

    #[test]
    fn perfect_split_agreement_is_one() {
        let k: f64 = fleiss_kappa(&[vec![3, 0], vec![0, 3], vec![3, 0]]).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_value() {
        // Two raters, 2 categories: items (2,0),(0,2),(1,1),(1,1)
        // P_bar = (1+1+0+0)/4 = 0.5, p = (0.5, 0.5), P_e = 0.5, kappa = 0.
        let k: f64 = fleiss_kappa(&[vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]]).unwrap();
        assert!(k.abs() < 1e-15);
    }
}
