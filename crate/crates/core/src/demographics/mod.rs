//! Demographic representation: face-observation aggregation, language-model
//! baseline estimates, under/over-representation, category aggregation and
//! the validation statistics (cross-classifier agreement, MAE against
//! reference data).

mod agreement;
mod baseline;
mod deviation;
mod faces;
mod mae;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use agreement::{cohen_kappa, cross_classifier_agreement, merge_asian, ClassAgreement, ClassifierAgreement};
pub use baseline::{
    baseline_messages, llm_baseline, parse_baseline, BaselineEstimate, BaselineVariant, CONTINENT_INSTRUCTIONS,
    RACE_INSTRUCTIONS,
};
pub use deviation::{
    aggregate_by_category, category_summary, deviation, under_over, CategoryDeviation, CategorySummary, DeviationRecord,
    Direction,
};
pub use faces::{aggregate_face_lists, aggregate_faces, FaceAggregate, DEFAULT_CONFIDENCE};
pub use mae::{mae_validation, read_share_csv, MaeReport, ShareTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Race {
    White,
    Black,
    #[serde(alias = "Latino_Hispanic", alias = "Latino Hispanic", alias = "Latino/Hispanic")]
    Latino,
    #[serde(alias = "East Asian")]
    EastAsian,
    #[serde(alias = "Southeast Asian")]
    SoutheastAsian,
    Indian,
    #[serde(alias = "Middle Eastern")]
    MiddleEastern,
}

impl Race {
    /// Report order.
    pub const ALL: [Race; 7] = [
        Race::White,
        Race::Black,
        Race::Latino,
        Race::EastAsian,
        Race::SoutheastAsian,
        Race::Indian,
        Race::MiddleEastern,
    ];

    /// Groups scored by default; Latino is opt-in.
    pub const DEFAULT_METRIC: [Race; 6] = [
        Race::White,
        Race::Black,
        Race::EastAsian,
        Race::SoutheastAsian,
        Race::Indian,
        Race::MiddleEastern,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "White",
            Race::Black => "Black",
            Race::Latino => "Latino",
            Race::EastAsian => "EastAsian",
            Race::SoutheastAsian => "SoutheastAsian",
            Race::Indian => "Indian",
            Race::MiddleEastern => "MiddleEastern",
        }
    }

    pub fn metric_groups(include_latino: bool) -> Vec<Race> {
        if include_latino {
            Race::ALL.to_vec()
        } else {
            Race::DEFAULT_METRIC.to_vec()
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Race {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Race::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown race group {s:?}"))
    }
}

pub const CONTINENTS: [&str; 6] = ["Europe", "Africa", "NorthAmerica", "SouthAmerica", "Asia", "Oceania"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub gender: Gender,
    pub race: Race,
    pub conf_gender: f64,
    pub conf_race: f64,
}

impl FaceObservation {
    pub fn validate(&self) -> Result<(), String> {
        for (name, c) in [("conf_gender", self.conf_gender), ("conf_race", self.conf_race)] {
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("{name} = {c} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Gender,
    Race,
    Continent,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Gender => "gender",
            Axis::Race => "race",
            Axis::Continent => "continent",
        }
    }
}

/// Normalized group shares on one axis. Group names are the `as_str` forms of
/// [`Gender`] and [`Race`], or entries of [`CONTINENTS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicDistribution {
    pub axis: Axis,
    pub shares: BTreeMap<String, f64>,
}

impl DemographicDistribution {
    /// Normalizes non-negative weights; `None` when they sum to zero.
    pub fn from_weights(axis: Axis, weights: BTreeMap<String, f64>) -> Option<Self> {
        let total: f64 = weights.values().sum();
        if !(total > 0.0) {
            return None;
        }
        Some(DemographicDistribution {
            axis,
            shares: weights.into_iter().map(|(g, w)| (g, w / total)).collect(),
        })
    }

    pub fn share(&self, group: &str) -> f64 {
        self.shares.get(group).copied().unwrap_or(0.0)
    }
}

/// Display order of the groups on an axis.
pub fn axis_groups(axis: Axis) -> Vec<&'static str> {
    match axis {
        Axis::Gender => Gender::ALL.iter().map(|g| g.as_str()).collect(),
        Axis::Race => Race::ALL.iter().map(|r| r.as_str()).collect(),
        Axis::Continent => CONTINENTS.to_vec(),
    }
}
