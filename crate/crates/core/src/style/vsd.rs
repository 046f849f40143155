use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

use super::{StyleLabel, StyleObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleDistribution {
    pub model_id: String,
    pub period: String,
    /// Counts over all six post-relabel classes, zeros included.
    pub counts: BTreeMap<StyleLabel, usize>,
    pub proportions: BTreeMap<StyleLabel, f64>,
}

impl StyleDistribution {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Builds a distribution directly from a list of labels.
pub fn distribution_from_labels(model_id: &str, period: &str, labels: &[StyleLabel]) -> StyleDistribution {
    let mut counts: BTreeMap<StyleLabel, usize> = StyleLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for &label in labels {
        *counts.entry(label).or_default() += 1;
    }
    let total = labels.len();
    let proportions = counts
        .iter()
        .map(|(&l, &c)| (l, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect();
    StyleDistribution {
        model_id: model_id.to_string(),
        period: period.to_string(),
        counts,
        proportions,
    }
}

/// Labels of every image of one (model, period), in corpus order.
pub fn period_labels(
    corpus: &Corpus,
    labels: &BTreeMap<String, StyleObservation>,
    model_id: &str,
    period: &str,
) -> Result<Vec<StyleLabel>> {
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for record in corpus.select(model_id, period) {
        match labels.get(&record.image_id) {
            Some(obs) => out.push(obs.label),
            None => missing.push(record.image_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Invalid(format!(
            "{} image(s) of {model_id}/{period} have no style label: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok(out)
}

pub fn style_distribution(
    corpus: &Corpus,
    labels: &BTreeMap<String, StyleObservation>,
    model_id: &str,
    period: &str,
) -> Result<StyleDistribution> {
    let observed = period_labels(corpus, labels, model_id, period)?;
    Ok(distribution_from_labels(model_id, period, &observed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VsdScore {
    pub score: f64,
    pub dominant: StyleLabel,
    pub second: StyleLabel,
    pub second_share: f64,
}

/// Largest and second-largest class by count; ties go to the earlier class.
fn top_two(counts: &BTreeMap<StyleLabel, usize>) -> (StyleLabel, StyleLabel) {
    let count = |l: StyleLabel| counts.get(&l).copied().unwrap_or(0);
    let mut dominant = StyleLabel::ALL[0];
    for &l in &StyleLabel::ALL[1..] {
        if count(l) > count(dominant) {
            dominant = l;
        }
    }
    let mut second: Option<StyleLabel> = None;
    for &l in StyleLabel::ALL.iter().filter(|&&l| l != dominant) {
        if second.is_none_or(|s| count(l) > count(s)) {
            second = Some(l);
        }
    }
    (dominant, second.expect("six classes"))
}

pub fn vsd(dist: &StyleDistribution) -> Result<VsdScore> {
    let total = dist.total();
    if total == 0 {
        return Err(Error::Invalid(format!(
            "empty style distribution for {}/{}",
            dist.model_id, dist.period
        )));
    }
    let (dominant, second) = top_two(&dist.counts);
    let share = |l| dist.counts.get(&l).copied().unwrap_or(0) as f64 / total as f64;
    Ok(VsdScore {
        score: share(dominant),
        dominant,
        second,
        second_share: share(second),
    })
}

/// Per-class precision of the style classifier, with an optional confusion
/// matrix indexed `[predicted][true]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionProfile {
    #[serde(default)]
    pub precision: BTreeMap<StyleLabel, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<BTreeMap<StyleLabel, BTreeMap<StyleLabel, f64>>>,
}

impl PrecisionProfile {
    /// Every class kept with probability one.
    pub fn exact() -> Self {
        PrecisionProfile::default()
    }

    pub fn uniform(precision: f64) -> Self {
        PrecisionProfile {
            precision: StyleLabel::PREDICTED.iter().map(|&l| (l, precision)).collect(),
            confusion: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (label, &p) in &self.precision {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("precision of {label} is {p}, outside [0, 1]")));
            }
        }
        if let Some(confusion) = &self.confusion {
            for (predicted, row) in confusion {
                if let Some((l, v)) = row.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::Invalid(format!("confusion[{predicted}][{l}] = {v}, outside [0, 1]")));
                }
                let sum: f64 = row.values().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(Error::Invalid(format!("confusion row {predicted} sums to {sum}")));
                }
                let diagonal = row.get(predicted).copied().unwrap_or(0.0);
                if let Some(&p) = self.precision.get(predicted) {
                    if (p - diagonal).abs() > 1e-6 {
                        return Err(Error::Invalid(format!(
                            "precision of {predicted} is {p} but the confusion diagonal is {diagonal}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability that a predicted label is kept. Monochrome falls back to
    /// photography; unknown classes count as exact.
    pub fn precision_of(&self, label: StyleLabel) -> f64 {
        if let Some(&p) = self.precision.get(&label) {
            return p;
        }
        if let Some(p) = self
            .confusion
            .as_ref()
            .and_then(|c| c.get(&label))
            .and_then(|row| row.get(&label))
        {
            return *p;
        }
        if label == StyleLabel::Monochrome {
            return self.precision_of(StyleLabel::Photography);
        }
        1.0
    }

    /// Distribution a rejected label is redrawn from.
    fn reassignment(&self, label: StyleLabel) -> Vec<(StyleLabel, f64)> {
        if let Some(row) = self.confusion.as_ref().and_then(|c| c.get(&label)) {
            let off: Vec<(StyleLabel, f64)> = row
                .iter()
                .filter(|(&l, &v)| l != label && v > 0.0)
                .map(|(&l, &v)| (l, v))
                .collect();
            let total: f64 = off.iter().map(|(_, v)| v).sum();
            if total > 0.0 {
                return off.into_iter().map(|(l, v)| (l, v / total)).collect();
            }
        }
        let others: Vec<StyleLabel> = StyleLabel::PREDICTED
            .iter()
            .copied()
            .filter(|&l| l != label && !(label == StyleLabel::Monochrome && l == StyleLabel::Photography))
            .collect();
        let w = 1.0 / others.len() as f64;
        others.into_iter().map(|l| (l, w)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 5000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsdResult {
    pub model_id: String,
    pub period: String,
    pub score: f64,
    pub dominant: StyleLabel,
    pub second: StyleLabel,
    pub second_share: f64,
    pub ci_dominant: (f64, f64),
    pub ci_second: (f64, f64),
    pub significant: bool,
    pub replicates: usize,
    pub n: usize,
}

/// Percentile of sorted data by linear interpolation between order
/// statistics (`(n-1)·q` positioning).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn draw(rng: &mut ChaCha8Rng, weights: &[(StyleLabel, f64)]) -> StyleLabel {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(label, w) in weights {
        acc += w;
        if u < acc {
            return label;
        }
    }
    weights.last().expect("non-empty reassignment").0
}

/// Dominant and second shares of one perturbed resample.
fn replicate(
    labels: &[StyleLabel],
    keep: &BTreeMap<StyleLabel, f64>,
    redraw: &BTreeMap<StyleLabel, Vec<(StyleLabel, f64)>>,
    dominant: StyleLabel,
    second: StyleLabel,
    seed: u64,
    stream: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let n = labels.len();
    let (mut d, mut s) = (0usize, 0usize);
    for _ in 0..n {
        let mut label = labels[rng.random_range(0..n)];
        if rng.random::<f64>() >= keep[&label] {
            label = draw(&mut rng, &redraw[&label]);
        }
        if label == dominant {
            d += 1;
        } else if label == second {
            s += 1;
        }
    }
    (d as f64 / n as f64, s as f64 / n as f64)
}

/// VSD with percentile intervals from a resampling bootstrap in which each
/// resampled label is kept with its class precision or otherwise redrawn.
///
/// Replicate `r` draws from the ChaCha stream `r` of `seed`, so results do not
/// depend on thread scheduling.
pub fn bootstrap_vsd(
    model_id: &str,
    period: &str,
    labels: &[StyleLabel],
    profile: &PrecisionProfile,
    config: &BootstrapConfig,
) -> Result<VsdResult> {
    if config.replicates < 1 {
        return Err(Error::Invalid("bootstrap needs at least one replicate".into()));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::Invalid(format!("confidence level {} outside (0, 1)", config.level)));
    }
    profile.validate()?;
    let dist = distribution_from_labels(model_id, period, labels);
    let point = vsd(&dist)?;

    let keep: BTreeMap<StyleLabel, f64> = StyleLabel::ALL.iter().map(|&l| (l, profile.precision_of(l))).collect();
    let redraw: BTreeMap<StyleLabel, Vec<(StyleLabel, f64)>> =
        StyleLabel::ALL.iter().map(|&l| (l, profile.reassignment(l))).collect();

    let shares: Vec<(f64, f64)> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| replicate(labels, &keep, &redraw, point.dominant, point.second, config.seed, r))
        .collect();
    let mut dom: Vec<f64> = shares.iter().map(|s| s.0).collect();
    let mut sec: Vec<f64> = shares.iter().map(|s| s.1).collect();
    dom.sort_by(f64::total_cmp);
    sec.sort_by(f64::total_cmp);
    let alpha = 1.0 - config.level;
    let ci = |v: &[f64]| (percentile(v, alpha / 2.0), percentile(v, 1.0 - alpha / 2.0));
    let ci_dominant = ci(&dom);
    let ci_second = ci(&sec);

    Ok(VsdResult {
        model_id: model_id.to_string(),
        period: period.to_string(),
        score: point.score,
        dominant: point.dominant,
        second: point.second,
        second_share: point.second_share,
        ci_dominant,
        ci_second,
        significant: ci_dominant.0 > ci_second.1,
        replicates: config.replicates,
        n: labels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use StyleLabel::*;

    fn labels(spec: &[(StyleLabel, usize)]) -> Vec<StyleLabel> {
        spec.iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect()
    }

    #[test]
    fn engraving_share_is_exact() {
        let ls = labels(&[(Engraving, 947), (Painting, 40), (Drawing, 13)]);
        let dist = distribution_from_labels("sdxl", "17th-century", &ls);
        assert_eq!(dist.proportions[&Engraving], 0.947);
        let v = vsd(&dist).unwrap();
        assert_eq!((v.score, v.dominant, v.second), (0.947, Engraving, Painting));
    }

    #[test]
    fn uniform_tie_goes_to_first_class() {
        let ls = labels(&StyleLabel::ALL.map(|l| (l, 3)));
        let v = vsd(&distribution_from_labels("m", "p", &ls)).unwrap();
        assert_eq!(v.dominant, Drawing);
        assert_eq!(v.second, Engraving);
        assert_eq!(v.score, 1.0 / 6.0);
    }

    #[test]
    fn single_image_scores_one() {
        let v = vsd(&distribution_from_labels("m", "p", &[Photography])).unwrap();
        assert_eq!(v.score, 1.0);
        assert_eq!(v.second, Drawing);
        assert_eq!(v.second_share, 0.0);
    }

    #[test]
    fn empty_distribution_is_error() {
        assert!(vsd(&distribution_from_labels("m", "p", &[])).is_err());
    }

    #[test]
    fn proportions_sum_to_one() {
        let ls = labels(&[(Drawing, 3), (Monochrome, 7), (Illustration, 11)]);
        let dist = distribution_from_labels("m", "p", &ls);
        assert!((dist.proportions.values().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(dist.counts.len(), 6);
    }

    #[test]
    fn exact_profile_on_constant_labels_is_degenerate() {
        let ls = vec![Painting; 50];
        let r = bootstrap_vsd("m", "p", &ls, &PrecisionProfile::exact(), &BootstrapConfig::default()).unwrap();
        assert_eq!(r.ci_dominant, (1.0, 1.0));
        assert_eq!(r.ci_second, (0.0, 0.0));
        assert!(r.significant);
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let ls = labels(&[(Painting, 60), (Photography, 40)]);
        let cfg = BootstrapConfig {
            replicates: 500,
            ..BootstrapConfig::default()
        };
        let p = PrecisionProfile::uniform(0.8);
        let a = bootstrap_vsd("m", "p", &ls, &p, &cfg).unwrap();
        let b = bootstrap_vsd("m", "p", &ls, &p, &cfg).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_vsd("m", "p", &ls, &p, &BootstrapConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.ci_dominant, c.ci_dominant);
    }

    #[test]
    fn bad_config_is_error() {
        let ls = vec![Painting; 5];
        let p = PrecisionProfile::exact();
        let zero = BootstrapConfig {
            replicates: 0,
            ..BootstrapConfig::default()
        };
        assert!(bootstrap_vsd("m", "p", &ls, &p, &zero).is_err());
        let level = BootstrapConfig {
            level: 1.0,
            ..BootstrapConfig::default()
        };
        assert!(bootstrap_vsd("m", "p", &ls, &p, &level).is_err());
        assert!(bootstrap_vsd("m", "p", &ls, &PrecisionProfile::uniform(1.5), &BootstrapConfig::default()).is_err());
    }

    #[test]
    fn confusion_drives_reassignment() {
        // A painting that is rejected always becomes drawing.
        let mut confusion = BTreeMap::new();
        confusion.insert(Painting, BTreeMap::from([(Painting, 0.0), (Drawing, 1.0)]));
        let profile = PrecisionProfile {
            precision: BTreeMap::new(),
            confusion: Some(confusion),
        };
        profile.validate().unwrap();
        assert_eq!(profile.precision_of(Painting), 0.0);
        let r = bootstrap_vsd("m", "p", &vec![Painting; 20], &profile, &BootstrapConfig {
            replicates: 50,
            ..BootstrapConfig::default()
        })
        .unwrap();
        // Second class is drawing by tie order; every replicate moves all mass there.
        assert_eq!(r.second, Drawing);
        assert_eq!(r.ci_second, (1.0, 1.0));
        assert_eq!(r.ci_dominant, (0.0, 0.0));
        assert!(!r.significant);
    }

    #[test]
    fn inconsistent_confusion_is_error() {
        let mut confusion = BTreeMap::new();
        confusion.insert(Painting, BTreeMap::from([(Painting, 0.9), (Drawing, 0.2)]));
        let p = PrecisionProfile {
            precision: BTreeMap::new(),
            confusion: Some(confusion),
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn monochrome_inherits_photography_precision() {
        let p = PrecisionProfile {
            precision: BTreeMap::from([(Photography, 0.7)]),
            confusion: None,
        };
        assert_eq!(p.precision_of(Monochrome), 0.7);
        assert_eq!(p.precision_of(Painting), 1.0);
        let targets: Vec<StyleLabel> = p.reassignment(Monochrome).into_iter().map(|t| t.0).collect();
        assert_eq!(targets, vec![Drawing, Engraving, Illustration, Painting]);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert!((percentile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((percentile(&v, 0.025) - 1.075).abs() < 1e-12);
    }
}
