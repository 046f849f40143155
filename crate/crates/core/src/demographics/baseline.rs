use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Axis, DemographicDistribution, Race};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, Message};
use crate::manifest::PromptSpec;

pub const RACE_INSTRUCTIONS: &str = include_str!("../../data/prompts/demographics_race.txt");
pub const CONTINENT_INSTRUCTIONS: &str = include_str!("../../data/prompts/demographics_continent.txt");

/// Which second axis the baseline request asks for next to gender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineVariant {
    Race,
    Continent,
}

impl BaselineVariant {
    pub fn axis(self) -> Axis {
        match self {
            BaselineVariant::Race => Axis::Race,
            BaselineVariant::Continent => Axis::Continent,
        }
    }

    fn instructions(self) -> &'static str {
        match self {
            BaselineVariant::Race => RACE_INSTRUCTIONS,
            BaselineVariant::Continent => CONTINENT_INSTRUCTIONS,
        }
    }
}

/// A language-model estimate, not ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    pub activity: String,
    pub period: String,
    pub endpoint_id: String,
    pub gender: DemographicDistribution,
    pub other: DemographicDistribution,
}

const SUM_TOLERANCE: f64 = 2.0;

/// Alias table: normalized label → (axis, group). Generic "asian" is split
/// over the two Asian groups in [`parse_baseline`].
fn aliases(variant: BaselineVariant) -> Vec<(&'static str, Axis, &'static str)> {
    let mut out = vec![
        ("male", Axis::Gender, "male"),
        ("men", Axis::Gender, "male"),
        ("female", Axis::Gender, "female"),
        ("women", Axis::Gender, "female"),
    ];
    match variant {
        BaselineVariant::Race => out.extend([
            ("white", Axis::Race, "White"),
            ("black", Axis::Race, "Black"),
            ("asian", Axis::Race, "Asian"),
            ("east asian", Axis::Race, "EastAsian"),
            ("southeast asian", Axis::Race, "SoutheastAsian"),
            ("south east asian", Axis::Race, "SoutheastAsian"),
            ("south eastern asian", Axis::Race, "SoutheastAsian"),
            ("indian", Axis::Race, "Indian"),
            ("south asian", Axis::Race, "Indian"),
            ("middle eastern", Axis::Race, "MiddleEastern"),
            ("latino", Axis::Race, "Latino"),
            ("hispanic", Axis::Race, "Latino"),
            ("latino hispanic", Axis::Race, "Latino"),
        ]),
        BaselineVariant::Continent => out.extend([
            ("europe", Axis::Continent, "Europe"),
            ("africa", Axis::Continent, "Africa"),
            ("asia", Axis::Continent, "Asia"),
            ("north america", Axis::Continent, "NorthAmerica"),
            ("n america", Axis::Continent, "NorthAmerica"),
            ("south america", Axis::Continent, "SouthAmerica"),
            ("latin america", Axis::Continent, "SouthAmerica"),
            ("s america", Axis::Continent, "SouthAmerica"),
            ("oceania", Axis::Continent, "Oceania"),
        ]),
    }
    out
}

fn normalize_label(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_alphabetic() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Longest alias that ends the label on a word boundary.
fn match_alias(label: &str, table: &[(&'static str, Axis, &'static str)]) -> Option<(Axis, &'static str)> {
    table
        .iter()
        .filter(|(alias, _, _)| label == *alias || label.ends_with(&format!(" {alias}")))
        .max_by_key(|(alias, _, _)| alias.len())
        .map(|&(_, axis, group)| (axis, group))
}

/// `(label, percent)` pairs: every number followed by `%`, labeled by the
/// text since the previous delimiter.
fn percent_pairs(reply: &str) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut segment_start = 0usize;
    let bytes = reply.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let mut j = i;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'%' {
                if let Ok(value) = reply[start..i].trim_end_matches('.').parse::<f64>() {
                    out.push((normalize_label(&reply[segment_start..start]), value));
                }
                i = j + 1;
                segment_start = i;
            }
            continue;
        }
        if matches!(c, '\n' | ',' | ';' | '|') {
            segment_start = i + 1;
        }
        i += 1;
    }
    out
}

/// Parses a free-text percentage reply into a gender distribution and a
/// race or continent distribution. Each axis must sum to 100 ± 2 before
/// renormalization. Race mass outside `race_groups` is dropped and the rest
/// renormalized; a generic Asian share is split evenly between East and
/// Southeast Asian.
pub fn parse_baseline(
    reply: &str,
    variant: BaselineVariant,
    race_groups: &[Race],
) -> std::result::Result<(DemographicDistribution, DemographicDistribution), String> {
    let table = aliases(variant);
    let mut gender: BTreeMap<String, f64> = BTreeMap::new();
    let mut other: BTreeMap<String, f64> = BTreeMap::new();
    for (label, value) in percent_pairs(reply) {
        let Some((axis, group)) = match_alias(&label, &table) else { continue };
        let target = if axis == Axis::Gender { &mut gender } else { &mut other };
        target.entry(group.to_string()).or_insert(value);
    }
    let check = |name: &str, m: &BTreeMap<String, f64>| {
        let sum: f64 = m.values().sum();
        if m.is_empty() {
            Err(format!("no {name} percentages found"))
        } else if (sum - 100.0).abs() > SUM_TOLERANCE {
            Err(format!("{name} percentages sum to {sum}, not 100"))
        } else {
            Ok(())
        }
    };
    check("gender", &gender)?;
    check(variant.axis().as_str(), &other)?;

    if variant == BaselineVariant::Race {
        if let Some(asian) = other.remove("Asian") {
            *other.entry("EastAsian".into()).or_default() += asian / 2.0;
            *other.entry("SoutheastAsian".into()).or_default() += asian / 2.0;
        }
        other.retain(|g, _| race_groups.iter().any(|r| r.as_str() == g));
    }
    let gender = DemographicDistribution::from_weights(Axis::Gender, gender).ok_or("gender percentages are all zero")?;
    let other = DemographicDistribution::from_weights(variant.axis(), other)
        .ok_or_else(|| format!("no {} mass inside the configured groups", variant.axis().as_str()))?;
    Ok((gender, other))
}

pub fn baseline_messages(prompt: &PromptSpec, variant: BaselineVariant) -> Vec<Message> {
    vec![
        Message::system(variant.instructions().trim_end()),
        Message::user(format!(
            "Prompt: \"{}\"\nGive one line per group in the form \"Group: NN%\".",
            prompt.text
        )),
    ]
}

/// Requests a baseline for one prompt, retrying once with the parse problem
/// spelled out.
pub fn llm_baseline(
    gateway: &Gateway,
    endpoint_id: &str,
    prompt: &PromptSpec,
    variant: BaselineVariant,
    race_groups: &[Race],
) -> Result<BaselineEstimate> {
    let mut messages = baseline_messages(prompt, variant);
    let first = gateway.complete(endpoint_id, &messages)?;
    let parsed = match parse_baseline(&first, variant, race_groups) {
        Ok(p) => p,
        Err(problem) => {
            messages.push(Message::assistant(first));
            messages.push(Message::user(format!(
                "That reply could not be used: {problem}. Answer again with percentages for every group; \
                 each list must sum to 100%."
            )));
            let second = gateway.complete(endpoint_id, &messages)?;
            parse_baseline(&second, variant, race_groups).map_err(|message| Error::Reply {
                endpoint: endpoint_id.to_string(),
                message: format!("{}: {message}", prompt.text),
            })?
        }
    };
    Ok(BaselineEstimate {
        activity: prompt.activity.clone(),
        period: prompt.period.clone(),
        endpoint_id: endpoint_id.to_string(),
        gender: parsed.0,
        other: parsed.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GROUPS: [Race; 6] = Race::DEFAULT_METRIC;

    #[test]
    fn inline_reply() {
        let reply = "male 80%, female 20%; White 100%";
        let (g, r) = parse_baseline(reply, BaselineVariant::Race, &GROUPS).unwrap();
        assert_eq!(g.share("male"), 0.8);
        assert_eq!(g.share("female"), 0.2);
        assert_eq!(r.share("White"), 1.0);
    }

    #[test]
    fn list_reply_with_headers() {
        let reply = "**Gender (%):**\n- Male: 60%\n- Female: 40%\n\n**Race (%):**\n- White: 50%\n- Black: 10%\n\
                     - East Asian: 15%\n- Southeast Asian: 5%\n- Indian: 10%\n- Middle Eastern: 10%\n";
        let (g, r) = parse_baseline(reply, BaselineVariant::Race, &GROUPS).unwrap();
        assert_eq!(g.share("female"), 0.4);
        assert_eq!(r.share("EastAsian"), 0.15);
        assert_eq!(r.share("SoutheastAsian"), 0.05);
        assert!((r.shares.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_hundred_is_renormalized() {
        let reply = "Male: 59%\nFemale: 40%\nWhite: 99%";
        let (g, _) = parse_baseline(reply, BaselineVariant::Race, &GROUPS).unwrap();
        assert!((g.shares.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(g.share("male"), 59.0 / 99.0);
    }

    #[test]
    fn far_from_hundred_is_rejected() {
        let err = parse_baseline("Male: 40%\nFemale: 20%\nWhite: 100%", BaselineVariant::Race, &GROUPS).unwrap_err();
        assert!(err.contains("60"), "{err}");
        assert!(parse_baseline("no numbers", BaselineVariant::Race, &GROUPS).is_err());
    }

    #[test]
    fn generic_asian_is_split() {
        let reply = "Male 50%, Female 50%, White 60%, Asian 40%";
        let (_, r) = parse_baseline(reply, BaselineVariant::Race, &GROUPS).unwrap();
        assert_eq!(r.share("EastAsian"), 0.2);
        assert_eq!(r.share("SoutheastAsian"), 0.2);
    }

    #[test]
    fn continent_reply() {
        let reply = "Gender: Male 70%, Female 30%\nContinent: Africa 10%, Asia 50%, Europe 20%, North America 10%, South America 5%, Oceania 5%";
        let (g, c) = parse_baseline(reply, BaselineVariant::Continent, &GROUPS).unwrap();
        assert_eq!(g.share("male"), 0.7);
        assert_eq!(c.axis, Axis::Continent);
        assert_eq!(c.share("NorthAmerica"), 0.1);
        assert_eq!(c.share("Asia"), 0.5);
    }

    #[test]
    fn suffix_matching_respects_word_boundaries() {
        let table = aliases(BaselineVariant::Race);
        assert_eq!(match_alias("female", &table), Some((Axis::Gender, "female")));
        assert_eq!(match_alias("gender male", &table), Some((Axis::Gender, "male")));
        assert_eq!(match_alias("southeast asian", &table), Some((Axis::Race, "SoutheastAsian")));
        assert_eq!(match_alias("unknown", &table), None);
    }
}
