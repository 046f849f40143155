//! Stylistic associations: monochrome relabeling, the linear probe over
//! frozen embeddings, per-period style distributions and Visual Style
//! Dominance with classifier-noise-aware bootstrap intervals.

mod colorfulness;
mod probe;
mod vsd;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use colorfulness::{colorfulness, colorfulness_of_file, load_rgb, relabel_monochrome, relabel_with, DEFAULT_MONOCHROME_THRESHOLD};
pub use probe::{
    train_linear_probe, Gradient, LinearProbe, Optimizer, ProbeConfig, ProbeMetrics, TrainedProbe,
};
pub use vsd::{
    bootstrap_vsd, distribution_from_labels, percentile, period_labels, style_distribution, vsd, BootstrapConfig,
    PrecisionProfile, StyleDistribution, VsdResult, VsdScore,
};

/// Style classes in canonical order. All tie-breaking follows this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleLabel {
    Drawing,
    Engraving,
    Illustration,
    Painting,
    Photography,
    /// Post-processing label for low-colorfulness photographs.
    Monochrome,
}

impl StyleLabel {
    pub const ALL: [StyleLabel; 6] = [
        StyleLabel::Drawing,
        StyleLabel::Engraving,
        StyleLabel::Illustration,
        StyleLabel::Painting,
        StyleLabel::Photography,
        StyleLabel::Monochrome,
    ];

    /// Classes a style classifier predicts, before relabeling.
    pub const PREDICTED: [StyleLabel; 5] = [
        StyleLabel::Drawing,
        StyleLabel::Engraving,
        StyleLabel::Illustration,
        StyleLabel::Painting,
        StyleLabel::Photography,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StyleLabel::Drawing => "drawing",
            StyleLabel::Engraving => "engraving",
            StyleLabel::Illustration => "illustration",
            StyleLabel::Painting => "painting",
            StyleLabel::Photography => "photography",
            StyleLabel::Monochrome => "monochrome",
        }
    }
}

impl fmt::Display for StyleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StyleLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        StyleLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown style label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleObservation {
    pub image_id: String,
    pub label: StyleLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<BTreeMap<StyleLabel, f64>>,
}

impl StyleObservation {
    pub fn new(image_id: impl Into<String>, label: StyleLabel) -> Self {
        StyleObservation {
            image_id: image_id.into(),
            label,
            probs: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let Some(probs) = &self.probs else {
            return Ok(());
        };
        if probs.contains_key(&StyleLabel::Monochrome) {
            return Err("probs must not contain the monochrome label".into());
        }
        if probs.values().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("probs must lie in [0, 1]".into());
        }
        let sum: f64 = probs.values().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("probs sum to {sum}, expected 1"));
        }
        Ok(())
    }
}
