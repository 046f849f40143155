//! The prompt grid: activity categories crossed with historical periods.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../data/manifest.json");

/// Placeholder tokens understood by [`render_template`].
const ACTIVITY_VAR: &str = "{activity}";
const PERIOD_VAR: &str = "{period}";

/// Template every prompt is rendered from.
pub const PROMPT_TEMPLATE: &str = "A person {activity} in the {period}";

pub type CategoryId = String;
pub type ActivityId = String;
pub type PeriodId = String;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub id: ActivityId,
    pub text: String,
    #[serde(skip)]
    pub category: CategoryId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub label: String,
    pub activities: Vec<Activity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodKind {
    Century,
    Decade,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub id: PeriodId,
    pub label: String,
    pub kind: PeriodKind,
    /// Whether anachronisms can be meaningfully defined for this period.
    pub anachronism_eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub activity: ActivityId,
    pub period: PeriodId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ManifestFile {
    categories: Vec<Category>,
    periods: Vec<Period>,
}

/// Validated prompt grid. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    categories: Vec<Category>,
    periods: Vec<Period>,
    prompts: Vec<PromptSpec>,
    activity_index: BTreeMap<ActivityId, (usize, usize)>,
    period_index: BTreeMap<PeriodId, usize>,
}

/// Where a manifest comes from.
#[derive(Debug, Clone)]
pub enum ManifestSource<'a> {
    Bundled,
    File(&'a Path),
    Json(&'a str),
}

/// Loads and validates a manifest, rendering the full prompt grid.
pub fn build_manifest(source: ManifestSource<'_>) -> Result<Manifest> {
    match source {
        ManifestSource::Bundled => Manifest::from_json(BUNDLED),
        ManifestSource::Json(text) => Manifest::from_json(text),
        ManifestSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Manifest::from_json(&text)
        }
    }
}

/// Renders the prompt for one grid cell.
pub fn render_prompt(activity: &Activity, period: &Period) -> String {
    render_template(PROMPT_TEMPLATE, &activity.text, &period.label)
        .expect("built-in template is well formed")
}

/// Substitutes `{activity}` and `{period}` in `template`; any other `{...}`
/// variable is rejected.
pub fn render_template(template: &str, activity: &str, period: &str) -> Result<String> {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| Error::Manifest(format!("unterminated variable in template {template:?}")))?;
        let var = &rest[open..=close];
        if var != ACTIVITY_VAR && var != PERIOD_VAR {
            return Err(Error::Manifest(format!("unknown template variable {var}")));
        }
        rest = &rest[close + 1..];
    }
    Ok(template.replace(ACTIVITY_VAR, activity).replace(PERIOD_VAR, period))
}

impl Manifest {
    pub fn bundled() -> Manifest {
        Manifest::from_json(BUNDLED).expect("bundled manifest is valid")
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Manifest::from_parts(Vec::new(), Vec::new());
        }
        let file: ManifestFile =
            serde_json::from_str(trimmed).map_err(|e| Error::Manifest(format!("parse error: {e}")))?;
        Manifest::from_parts(file.categories, file.periods)
    }

    pub fn from_parts(mut categories: Vec<Category>, periods: Vec<Period>) -> Result<Manifest> {
        let mut seen_categories = HashSet::new();
        let mut activity_index = BTreeMap::new();
        for (ci, category) in categories.iter_mut().enumerate() {
            if category.id.is_empty() {
                return Err(Error::Manifest("category with empty id".into()));
            }
            if !seen_categories.insert(category.id.clone()) {
                return Err(Error::Manifest(format!("duplicate category id {:?}", category.id)));
            }
            if category.activities.is_empty() {
                return Err(Error::Manifest(format!("category {:?} has no activities", category.id)));
            }
            for (ai, activity) in category.activities.iter_mut().enumerate() {
                if activity.id.is_empty() || activity.text.trim().is_empty() {
                    return Err(Error::Manifest(format!(
                        "activity in category {:?} has an empty id or text",
                        category.id
                    )));
                }
                if activity.text.contains('{') || activity.text.contains('}') {
                    return Err(Error::Manifest(format!(
                        "activity {:?} contains a template variable",
                        activity.id
                    )));
                }
                activity.category = category.id.clone();
                if activity_index.insert(activity.id.clone(), (ci, ai)).is_some() {
                    return Err(Error::Manifest(format!("duplicate activity id {:?}", activity.id)));
                }
            }
        }

        let mut period_index = BTreeMap::new();
        for (pi, period) in periods.iter().enumerate() {
            if period.id.is_empty() || period.label.trim().is_empty() {
                return Err(Error::Manifest("period with empty id or label".into()));
            }
            if period.label.contains('{') || period.label.contains('}') {
                return Err(Error::Manifest(format!("period {:?} contains a template variable", period.id)));
            }
            if period_index.insert(period.id.clone(), pi).is_some() {
                return Err(Error::Manifest(format!("duplicate period id {:?}", period.id)));
            }
        }

        let prompts = categories
            .iter()
            .flat_map(|c| c.activities.iter())
            .flat_map(|a| {
                periods.iter().map(move |p| PromptSpec {
                    activity: a.id.clone(),
                    period: p.id.clone(),
                    text: render_prompt(a, p),
                })
            })
            .collect();

        Ok(Manifest {
            categories,
            periods,
            prompts,
            activity_index,
            period_index,
        })
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    /// All prompts, activity-major in manifest order.
    pub fn prompts(&self) -> &[PromptSpec] {
        &self.prompts
    }

    pub fn activities(&self) -> impl Iterator<Item = &Activity> {
        self.categories.iter().flat_map(|c| c.activities.iter())
    }

    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.activity_index
            .get(id)
            .map(|&(c, a)| &self.categories[c].activities[a])
    }

    pub fn period(&self, id: &str) -> Option<&Period> {
        self.period_index.get(id).map(|&i| &self.periods[i])
    }

    /// Position of a period in manifest order, used for stable sorting.
    pub fn period_position(&self, id: &str) -> Option<usize> {
        self.period_index.get(id).copied()
    }

    pub fn category_of(&self, activity: &str) -> Option<&Category> {
        self.activity_index.get(activity).map(|&(c, _)| &self.categories[c])
    }

    pub fn prompt(&self, activity: &str, period: &str) -> Option<&PromptSpec> {
        let (c, a) = *self.activity_index.get(activity)?;
        let p = *self.period_index.get(period)?;
        let activity_rank: usize = self.categories[..c].iter().map(|c| c.activities.len()).sum::<usize>() + a;
        self.prompts.get(activity_rank * self.periods.len() + p)
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    /// Serializes to the manifest file schema.
    pub fn to_json(&self) -> String {
        let file = ManifestFile {
            categories: self.categories.clone(),
            periods: self.periods.clone(),
        };
        serde_json::to_string_pretty(&file).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn period(id: &str, label: &str, kind: PeriodKind) -> Period {
        Period {
            id: id.into(),
            label: label.into(),
            kind,
            anachronism_eligible: true,
        }
    }

    #[test]
    fn bundled_grid_has_expected_shape() {
        let m = Manifest::bundled();
        assert_eq!(m.categories().len(), 20);
        assert!(m.categories().iter().all(|c| c.activities.len() == 5));
        assert_eq!(m.periods().len(), 10);
        assert_eq!(m.len(), 1000);
        let centuries = m.periods().iter().filter(|p| p.kind == PeriodKind::Century).count();
        assert_eq!(centuries, 5);
        let decades: Vec<_> = m
            .periods()
            .iter()
            .filter(|p| p.kind == PeriodKind::Decade)
            .map(|p| p.label.as_str())
            .collect();
        assert_eq!(decades, ["1910s", "1930s", "1950s", "1970s", "1990s"]);
        let ineligible: Vec<_> = m
            .periods()
            .iter()
            .filter(|p| !p.anachronism_eligible)
            .map(|p| p.label.as_str())
            .collect();
        assert_eq!(ineligible, ["21st century"]);
    }

    #[test]
    fn bundled_prompts_follow_template() {
        let m = Manifest::bundled();
        let re = regex::Regex::new(r"^A person .+ in the .+$").unwrap();
        assert!(m.prompts().iter().all(|p| re.is_match(&p.text)));
        assert_eq!(
            m.prompt("listening-to-music", "17th-century").unwrap().text,
            "A person listening to music in the 17th century"
        );
        assert_eq!(m.prompt("praying", "1930s").unwrap().text, "A person praying in the 1930s");
        assert_eq!(
            m.prompt("working", "21st-century").unwrap().text,
            "A person working in the 21st century"
        );
    }

    #[test]
    fn prompt_lookup_matches_linear_scan() {
        let m = Manifest::bundled();
        for p in m.prompts().iter().step_by(37) {
            let found = m.prompt(&p.activity, &p.period).unwrap();
            assert_eq!(found, p);
        }
    }

    #[test]
    fn render_is_deterministic() {
        let a = Activity {
            id: "praying".into(),
            text: "praying".into(),
            category: String::new(),
        };
        let p = period("1930s", "1930s", PeriodKind::Decade);
        assert_eq!(render_prompt(&a, &p), "A person praying in the 1930s");
        assert_eq!(render_prompt(&a, &p), render_prompt(&a, &p));
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = Manifest::from_json(r#"{"categories":[],"periods":[]}"#).unwrap();
        assert!(m.is_empty());
        assert!(Manifest::from_json("").unwrap().is_empty());
    }

    #[test]
    fn round_trip_preserves_structure() {
        let m = Manifest::bundled();
        let reloaded = Manifest::from_json(&m.to_json()).unwrap();
        assert_eq!(m, reloaded);
    }

    #[test]
    fn rejects_duplicates_and_empty_categories() {
        let dup_activity = r#"{"categories":[{"id":"a","label":"A","activities":[{"id":"x","text":"x"}]},
            {"id":"b","label":"B","activities":[{"id":"x","text":"y"}]}],"periods":[]}"#;
        assert!(matches!(Manifest::from_json(dup_activity), Err(Error::Manifest(m)) if m.contains("duplicate activity")));

        let dup_period = r#"{"categories":[],"periods":[
            {"id":"p","label":"1910s","kind":"decade","anachronism_eligible":true},
            {"id":"p","label":"1930s","kind":"decade","anachronism_eligible":true}]}"#;
        assert!(Manifest::from_json(dup_period).is_err());

        let empty_cat = r#"{"categories":[{"id":"a","label":"A","activities":[]}],"periods":[]}"#;
        assert!(matches!(Manifest::from_json(empty_cat), Err(Error::Manifest(m)) if m.contains("no activities")));
    }

    #[test]
    fn rejects_malformed_template_variables() {
        assert!(render_template("A person {activity} in the {era}", "x", "y").is_err());
        assert!(render_template("A person {activity", "x", "y").is_err());
        let bad = r#"{"categories":[{"id":"a","label":"A","activities":[{"id":"x","text":"doing {thing}"}]}],"periods":[]}"#;
        assert!(Manifest::from_json(bad).is_err());
    }

    #[test]
    fn size_is_product_of_axes() {
        let json = r#"{"categories":[{"id":"a","label":"A","activities":[{"id":"x","text":"x-ing"},{"id":"y","text":"y-ing"}]}],
            "periods":[{"id":"p1","label":"1910s","kind":"decade","anachronism_eligible":true},
                       {"id":"p2","label":"18th century","kind":"century","anachronism_eligible":true},
                       {"id":"p3","label":"1950s","kind":"decade","anachronism_eligible":true}]}"#;
        let m = Manifest::from_json(json).unwrap();
        assert_eq!(m.len(), 6);
        assert_eq!(m.category_of("y").unwrap().id, "a");
    }
}
