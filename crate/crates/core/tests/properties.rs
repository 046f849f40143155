use std::collections::BTreeMap;
use std::path::PathBuf;

use chronoeval::anachronism::{
    majority, normalize, score, AnachronismProposal, AnachronismVerdict, Answer, ElementIndex,
};
use chronoeval::corpus::{Corpus, ImageRecord};
use chronoeval::demographics::{
    aggregate_by_category, aggregate_face_lists, category_summary, cohen_kappa, deviation, under_over, Axis,
    DemographicDistribution, DeviationRecord, FaceObservation, Gender, Race,
};
use chronoeval::manifest::Manifest;
use chronoeval::style::{distribution_from_labels, vsd, StyleLabel};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = StyleLabel> {
    prop::sample::select(StyleLabel::ALL.to_vec())
}

fn answer() -> impl Strategy<Value = Answer> {
    prop::sample::select(vec![Answer::Yes, Answer::No, Answer::Abstain])
}

fn shares(groups: &'static [&'static str]) -> impl Strategy<Value = BTreeMap<String, f64>> {
    prop::collection::vec(0.0f64..1.0, groups.len()).prop_map(move |w| {
        groups.iter().zip(w).map(|(g, v)| (g.to_string(), v)).collect()
    })
}

const RACES: [&str; 6] = ["White", "Black", "EastAsian", "SoutheastAsian", "Indian", "MiddleEastern"];

fn race_dist() -> impl Strategy<Value = DemographicDistribution> {
    shares(&RACES).prop_filter_map("all-zero weights", |w| DemographicDistribution::from_weights(Axis::Race, w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vsd_is_count_scale_invariant(labels in prop::collection::vec(label(), 1..200), k in 2usize..5) {
        let base = vsd(&distribution_from_labels("m", "p", &labels)).unwrap();
        let scaled: Vec<StyleLabel> = labels.iter().flat_map(|&l| std::iter::repeat_n(l, k)).collect();
        let s = vsd(&distribution_from_labels("m", "p", &scaled)).unwrap();
        prop_assert!((s.score - base.score).abs() < 1e-12);
        prop_assert_eq!(s.dominant, base.dominant);
    }

    #[test]
    fn adding_dominant_label_never_lowers_vsd(labels in prop::collection::vec(label(), 1..200)) {
        let base = vsd(&distribution_from_labels("m", "p", &labels)).unwrap();
        let mut more = labels.clone();
        more.push(base.dominant);
        let s = vsd(&distribution_from_labels("m", "p", &more)).unwrap();
        prop_assert!(s.score >= base.score);
        prop_assert!(base.score >= 1.0 / 6.0 - 1e-12 && base.score <= 1.0);
        prop_assert!(base.second_share <= base.score);
    }

    #[test]
    fn under_over_identities(observed in race_dist(), baseline in race_dist()) {
        for r in deviation("a", "p", &observed, &baseline).unwrap() {
            let delta = observed.share(&r.group) - baseline.share(&r.group);
            prop_assert_eq!(r.under * r.over, 0.0);
            prop_assert!((r.under + r.over - delta.abs()).abs() < 1e-15);
            prop_assert!(r.under >= 0.0 && r.over >= 0.0);
        }
    }

    #[test]
    fn under_over_is_antisymmetric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (u, o) = under_over(a, b);
        let (u2, o2) = under_over(b, a);
        prop_assert_eq!((u, o), (o2, u2));
        let (uf, of) = under_over(a as f32, b as f32);
        prop_assert_eq!(uf * of, 0.0);
    }

    #[test]
    fn category_aggregation_ignores_order(
        records in prop::collection::vec(
            (0usize..10, 0usize..3, prop::sample::select(RACES.to_vec()), 0.0f64..1.0, 0.0f64..1.0),
            1..60,
        ),
        seed in any::<u64>(),
    ) {
        let manifest = Manifest::bundled();
        let activities: Vec<String> = manifest.activities().take(10).map(|a| a.id.clone()).collect();
        let periods: Vec<String> = manifest.periods().iter().take(3).map(|p| p.id.clone()).collect();
        let recs: Vec<DeviationRecord> = records
            .iter()
            .map(|&(a, p, g, u, o)| DeviationRecord {
                activity: activities[a].clone(),
                period: periods[p].clone(),
                axis: Axis::Race,
                group: g.to_string(),
                under: u,
                over: o,
            })
            .collect();
        let mut shuffled = recs.clone();
        let n = shuffled.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let a = aggregate_by_category(&recs, &manifest).unwrap();
        prop_assert_eq!(&a, &aggregate_by_category(&shuffled, &manifest).unwrap());
        prop_assert_eq!(category_summary(&recs, &manifest).unwrap(), category_summary(&shuffled, &manifest).unwrap());

        // Independent mean per (category, period, group).
        for row in &a {
            let members: Vec<&DeviationRecord> = recs
                .iter()
                .filter(|r| {
                    manifest.category_of(&r.activity).unwrap().id == row.category
                        && r.period == row.period
                        && r.group == row.group
                })
                .collect();
            let mean_u = members.iter().map(|r| r.under).sum::<f64>() / members.len() as f64;
            prop_assert_eq!(members.len(), row.n);
            prop_assert!((mean_u - row.under).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_idempotent_and_order_free(
        forms in prop::collection::vec("[a-c]{1,3}( [a-c]{1,4}){0,2}", 1..25),
    ) {
        let once = normalize(forms.iter().map(String::as_str), 0.8);
        let mut reversed = forms.clone();
        reversed.reverse();
        prop_assert_eq!(&once, &normalize(reversed.iter().map(String::as_str), 0.8));
        let reps = normalize(once.iter().map(|e| e.canonical_id.as_str()), 0.8);
        prop_assert_eq!(reps.len(), once.len());
        for (a, b) in reps.iter().zip(&once) {
            prop_assert_eq!(&a.canonical_id, &b.canonical_id);
        }
        let index = ElementIndex::new(&once);
        for f in &forms {
            prop_assert!(index.canonical_of(f).is_some());
        }
    }

    #[test]
    fn majority_ignores_panel_order(answers in prop::collection::vec(answer(), 0..7)) {
        let mut rev = answers.clone();
        rev.reverse();
        prop_assert_eq!(majority(answers.clone()), majority(rev));
    }

    #[test]
    fn score_ignores_verdict_order(
        detections in prop::collection::vec((0u32..6, 0usize..3, prop::collection::vec(answer(), 3)), 0..30),
    ) {
        let elements = ["radio", "smartphone", "television"];
        let records: Vec<ImageRecord> = (0..6)
            .map(|r| ImageRecord {
                image_id: format!("img{r}"),
                model_id: "m".into(),
                activity: if r < 3 { "a1".into() } else { "a2".into() },
                period: "1950s".into(),
                replicate: r,
                path: PathBuf::from("x.png"),
                sha256: String::new(),
            })
            .collect();
        let corpus = Corpus::from_records(records).unwrap();
        let proposals: Vec<AnachronismProposal> = ["a1", "a2"]
            .iter()
            .flat_map(|a| elements.iter().map(move |e| AnachronismProposal {
                activity: a.to_string(),
                period: "1950s".into(),
                element: e.to_string(),
                question: format!("Is there a {e}?"),
                source_model: "p".into(),
            }))
            .collect();
        let index = ElementIndex::new(&normalize(elements, 0.8));
        let verdicts: Vec<AnachronismVerdict> = detections
            .iter()
            .map(|(img, e, answers)| {
                let map = answers.iter().enumerate().map(|(i, &a)| (format!("v{i}"), a)).collect();
                AnachronismVerdict::new(&format!("img{img}"), elements[*e], "q", map)
            })
            .collect();
        let mut rev = verdicts.clone();
        rev.reverse();
        prop_assert_eq!(
            score(&verdicts, &proposals, &index, &corpus, "m", "1950s").unwrap(),
            score(&rev, &proposals, &index, &corpus, "m", "1950s").unwrap()
        );
    }

    #[test]
    fn kappa_survives_relabeling(pairs in prop::collection::vec((0u8..4, 0u8..4), 2..80)) {
        let relabeled: Vec<(u8, u8)> = pairs.iter().map(|&(a, b)| ((a + 1) % 4 * 10, (b + 1) % 4 * 10)).collect();
        let k1: Option<f64> = cohen_kappa(&pairs);
        let k2: Option<f64> = cohen_kappa(&relabeled);
        match (k1, k2) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn higher_confidence_retains_fewer_faces(
        images in prop::collection::vec(
            prop::collection::vec((any::<bool>(), 0usize..7, 0.0f64..1.0, 0.0f64..1.0), 0..4),
            1..20,
        ),
        lo in 0.0f64..1.0,
        gap in 0.0f64..0.5,
    ) {
        let lists: Vec<Vec<FaceObservation>> = images
            .iter()
            .map(|faces| {
                faces
                    .iter()
                    .map(|&(male, r, cg, cr)| FaceObservation {
                        gender: if male { Gender::Male } else { Gender::Female },
                        race: Race::ALL[r],
                        conf_gender: cg,
                        conf_race: cr,
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[FaceObservation]> = lists.iter().map(|l| l.as_slice()).collect();
        let retained = |t: f64| aggregate_face_lists(&refs, t, &Race::DEFAULT_METRIC).map_or(0, |a| a.retained_faces);
        prop_assert!(retained(lo + gap) <= retained(lo));
        if let Ok(a) = aggregate_face_lists(&refs, lo, &Race::DEFAULT_METRIC) {
            prop_assert!((a.gender.shares.values().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(a.race.share("Latino") == 0.0);
        }
    }
}

#[test]
fn thousand_random_pairs_keep_identities() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let mut pick = || -> DemographicDistribution {
            let w: BTreeMap<String, f64> = RACES.iter().map(|g| (g.to_string(), rng.random_range(0.01..1.0))).collect();
            DemographicDistribution::from_weights(Axis::Race, w).unwrap()
        };
        let (a, b) = (pick(), pick());
        for r in deviation("x", "y", &a, &b).unwrap() {
            assert_eq!(r.under * r.over, 0.0);
            assert!((r.under + r.over - (a.share(&r.group) - b.share(&r.group)).abs()).abs() < 1e-15);
        }
    }
}
