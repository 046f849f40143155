use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Axis, DemographicDistribution, FaceObservation, Race};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_CONFIDENCE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceAggregate {
    pub gender: DemographicDistribution,
    pub race: DemographicDistribution,
    pub images: usize,
    /// Images left without any face passing both confidence checks.
    pub excluded_images: usize,
    pub retained_faces: usize,
    /// Images contributing to the race average; smaller than the retained
    /// image count when every retained face falls outside the race groups.
    pub race_images: usize,
}

/// Averages per-image group proportions over the images that keep at least
/// one face. A face is kept when both confidences reach `threshold`.
pub fn aggregate_face_lists(images: &[&[FaceObservation]], threshold: f64, race_groups: &[Race]) -> Result<FaceAggregate> {
    let mut gender_sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut race_sum: BTreeMap<String, f64> = BTreeMap::new();
    let (mut kept_images, mut race_images, mut retained) = (0usize, 0usize, 0usize);
    for faces in images {
        let kept: Vec<&FaceObservation> = faces
            .iter()
            .filter(|f| f.conf_gender >= threshold && f.conf_race >= threshold)
            .collect();
        if kept.is_empty() {
            continue;
        }
        kept_images += 1;
        retained += kept.len();
        let n = kept.len() as f64;
        for f in &kept {
            *gender_sum.entry(f.gender.as_str().to_string()).or_default() += 1.0 / n;
        }
        let in_set: Vec<&&FaceObservation> = kept.iter().filter(|f| race_groups.contains(&f.race)).collect();
        if !in_set.is_empty() {
            race_images += 1;
            let m = in_set.len() as f64;
            for f in in_set {
                *race_sum.entry(f.race.as_str().to_string()).or_default() += 1.0 / m;
            }
        }
    }
    if kept_images == 0 {
        return Err(Error::Invalid(format!(
            "no image keeps a face at confidence {threshold}; the distribution is undefined"
        )));
    }
    let average = |axis, sums: BTreeMap<String, f64>, count: usize| {
        DemographicDistribution::from_weights(axis, sums.into_iter().map(|(g, s)| (g, s / count as f64)).collect())
    };
    let gender = average(Axis::Gender, gender_sum, kept_images).expect("kept images carry gender");
    let race = average(Axis::Race, race_sum, race_images).ok_or_else(|| {
        Error::Invalid("no retained face belongs to the configured race groups".into())
    })?;
    Ok(FaceAggregate {
        gender,
        race,
        images: images.len(),
        excluded_images: images.len() - kept_images,
        retained_faces: retained,
        race_images,
    })
}

/// [`aggregate_face_lists`] over the images of one (model, activity, period).
pub fn aggregate_faces(
    corpus: &Corpus,
    model_id: &str,
    activity: &str,
    period: &str,
    threshold: f64,
    race_groups: &[Race],
) -> Result<FaceAggregate> {
    let faces = corpus
        .sidecars()
        .faces
        .as_ref()
        .ok_or_else(|| Error::MissingSidecar("faces".into()))?;
    let mut lists = Vec::new();
    let mut missing = Vec::new();
    for record in corpus.select(model_id, period).filter(|r| r.activity == activity) {
        match faces.get(&record.image_id) {
            Some(list) => lists.push(list.as_slice()),
            None => missing.push(record.image_id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Invalid(format!("no faces row for {}", missing.join(", "))));
    }
    if lists.is_empty() {
        return Err(Error::Invalid(format!("no images for {model_id}/{activity}/{period}")));
    }
    aggregate_face_lists(&lists, threshold, race_groups).map_err(|e| match e {
        Error::Invalid(m) => Error::Invalid(format!("{model_id}/{activity}/{period}: {m}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demographics::Gender;

    fn face(gender: Gender, race: Race, conf: f64) -> FaceObservation {
        FaceObservation {
            gender,
            race,
            conf_gender: conf,
            conf_race: conf,
        }
    }

    #[test]
    fn uniform_images() {
        let one = [face(Gender::Male, Race::White, 0.9)];
        let lists: Vec<&[FaceObservation]> = vec![&one; 10];
        let agg = aggregate_face_lists(&lists, 0.7, &Race::DEFAULT_METRIC).unwrap();
        assert_eq!(agg.gender.share("male"), 1.0);
        assert_eq!(agg.race.share("White"), 1.0);
        assert_eq!(agg.excluded_images, 0);
    }

    #[test]
    fn image_level_averaging() {
        let mixed = [face(Gender::Male, Race::White, 0.9), face(Gender::Female, Race::White, 0.9)];
        let men = [face(Gender::Male, Race::Black, 0.9)];
        let agg = aggregate_face_lists(&[&mixed, &men], 0.7, &Race::DEFAULT_METRIC).unwrap();
        assert_eq!(agg.gender.share("male"), 0.75);
        assert_eq!(agg.gender.share("female"), 0.25);
        assert_eq!(agg.race.share("White"), 0.5);
    }

    #[test]
    fn low_confidence_is_excluded_and_counted() {
        let good = [face(Gender::Female, Race::Indian, 0.8)];
        let mut half = face(Gender::Male, Race::White, 0.95);
        half.conf_race = 0.69;
        let bad = [half];
        let empty: [FaceObservation; 0] = [];
        let agg = aggregate_face_lists(&[&good, &bad, &empty], 0.7, &Race::DEFAULT_METRIC).unwrap();
        assert_eq!(agg.excluded_images, 2);
        assert_eq!(agg.gender.share("female"), 1.0);
        // Exactly at the threshold is kept.
        let edge = [face(Gender::Male, Race::White, 0.7)];
        assert_eq!(aggregate_face_lists(&[&edge], 0.7, &Race::DEFAULT_METRIC).unwrap().retained_faces, 1);
    }

    #[test]
    fn nothing_retained_is_error() {
        let bad = [face(Gender::Male, Race::White, 0.2)];
        assert!(aggregate_face_lists(&[&bad], 0.7, &Race::DEFAULT_METRIC).is_err());
    }

    #[test]
    fn latino_is_dropped_unless_requested() {
        let faces = [face(Gender::Male, Race::Latino, 0.9), face(Gender::Male, Race::White, 0.9)];
        let default = aggregate_face_lists(&[&faces], 0.7, &Race::DEFAULT_METRIC).unwrap();
        assert_eq!(default.race.share("White"), 1.0);
        let with = aggregate_face_lists(&[&faces], 0.7, &Race::ALL).unwrap();
        assert_eq!(with.race.share("Latino"), 0.5);
    }
}
