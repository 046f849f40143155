use std::collections::BTreeMap;
use std::path::PathBuf;

use chronoeval::anachronism::{
    frequency_severity, normalize, normalize_proposals, overall_rate, plan_verification, score, AnachronismProposal,
    AnachronismScore, AnachronismVerdict, Answer, ElementIndex,
};
use chronoeval::corpus::{Corpus, ImageRecord};
use chronoeval::report::{render_anachronism_report, DEFAULT_TOP_K};

fn corpus(activities: &[&str], replicates: u32) -> Corpus {
    let mut records = Vec::new();
    for a in activities {
        for r in 0..replicates {
            records.push(ImageRecord {
                image_id: format!("m/1950s/{a}/{r}"),
                model_id: "m".into(),
                activity: a.to_string(),
                period: "1950s".into(),
                replicate: r,
                path: PathBuf::from(format!("{a}/{r}.png")),
                sha256: String::new(),
            });
        }
    }
    Corpus::from_records(records).unwrap()
}

fn proposal(activity: &str, element: &str) -> AnachronismProposal {
    AnachronismProposal {
        activity: activity.into(),
        period: "1950s".into(),
        element: element.into(),
        question: format!("Is there a {element}? Answer with 'yes' or 'no'."),
        source_model: "proposer".into(),
    }
}

fn verdict(image: &str, element: &str, yes: usize) -> AnachronismVerdict {
    let answers: BTreeMap<String, Answer> = (0..3)
        .map(|i| (format!("v{i}"), if i < yes { Answer::Yes } else { Answer::No }))
        .collect();
    AnachronismVerdict::new(image, element, "q", answers)
}

#[test]
fn worked_example() {
    assert_eq!(frequency_severity(10, 10, 1000), (0.01, 1.0));
}

#[test]
fn hand_counted_scores() {
    let c = corpus(&["a1", "a2"], 4);
    let proposals = vec![proposal("a1", "radio"), proposal("a2", "radio"), proposal("a2", "smartphone")];
    let index = ElementIndex::new(&normalize_proposals(&proposals));
    let verdicts = vec![
        verdict("m/1950s/a1/0", "radio", 3),
        verdict("m/1950s/a1/1", "radio", 2),
        verdict("m/1950s/a1/2", "radio", 1),
        verdict("m/1950s/a2/0", "radio", 2),
        verdict("m/1950s/a2/3", "smartphone", 3),
        verdict("m/1950s/a2/3", "radio", 0),
    ];
    let rows = score(&verdicts, &proposals, &index, &c, "m", "1950s").unwrap();
    let by_id: BTreeMap<&str, &AnachronismScore> = rows.iter().map(|r| (r.canonical_id.as_str(), r)).collect();
    let radio = by_id["radio"];
    assert_eq!((radio.n_detected, radio.n_proposed, radio.n_images), (3, 2, 8));
    assert_eq!(radio.frequency, 0.375);
    assert_eq!(radio.severity, 1.5);
    let phone = by_id["smartphone"];
    assert_eq!((phone.n_detected, phone.n_proposed), (1, 1));
    assert_eq!(phone.frequency, 0.125);
    assert_eq!(overall_rate(&verdicts, &c, "m", "1950s").unwrap(), 0.5);
}

#[test]
fn quarter_of_images_flagged() {
    let c = corpus(&["a1", "a2"], 10);
    let mut verdicts = Vec::new();
    for r in 0..10 {
        // Replicates 0..5 of a1 carry one detection, and one of them a second.
        verdicts.push(verdict(&format!("m/1950s/a1/{r}"), "radio", if r < 5 { 3 } else { 0 }));
        verdicts.push(verdict(&format!("m/1950s/a2/{r}"), "radio", 1));
    }
    verdicts.push(verdict("m/1950s/a1/0", "smartphone", 2));
    assert_eq!(overall_rate(&verdicts, &c, "m", "1950s").unwrap(), 0.25);
}

#[test]
fn detected_but_unproposed_is_an_error() {
    let c = corpus(&["a1"], 2);
    let proposals = vec![proposal("a1", "radio")];
    let index = ElementIndex::new(&normalize(["radio", "telephone"], 0.8));
    let verdicts = vec![verdict("m/1950s/a1/0", "telephone", 3)];
    assert!(score(&verdicts, &proposals, &index, &c, "m", "1950s").is_err());
}

#[test]
fn audio_device_forms_cluster() {
    let elements = normalize(["audio device", "digital audio device"], 0.8);
    assert_eq!(elements.len(), 1);
    assert_eq!(elements[0].surface_forms.len(), 2);
    let again = normalize(elements.iter().map(|e| e.canonical_id.as_str()), 0.8);
    assert_eq!(again.len(), 1);
    assert_eq!(again[0].canonical_id, elements[0].canonical_id);
}

#[test]
fn verification_plan_covers_prompt_images() {
    let c = corpus(&["a1", "a2"], 3);
    let proposals = vec![proposal("a1", "radio"), proposal("a1", "Radio "), proposal("a2", "smartphone")];
    let index = ElementIndex::new(&normalize_proposals(&proposals));
    let tasks = plan_verification(&c, &proposals, &index, Some("m")).unwrap();
    assert_eq!(tasks.len(), 6);
    assert!(tasks.iter().filter(|t| t.image.activity == "a1").all(|t| t.canonical_id == "radio"));
    assert!(plan_verification(&c, &proposals, &index, Some("other")).unwrap().is_empty());
}

#[test]
fn top_k_equals_independent_sort() {
    let scores: Vec<AnachronismScore> = (0..20)
        .map(|i| {
            let d = (i * 7) % 11;
            let p = 1 + (i * 3) % 5;
            let (frequency, severity) = frequency_severity(d, p, 100);
            AnachronismScore {
                canonical_id: format!("element-{i:02}"),
                period: "1950s".into(),
                model_id: "m".into(),
                n_detected: d,
                n_proposed: p,
                n_images: 100,
                frequency,
                severity,
            }
        })
        .collect();
    let report = render_anachronism_report(&scores, &[], DEFAULT_TOP_K);

    let mut by_freq: Vec<(usize, String)> = scores.iter().map(|s| (s.n_detected, s.canonical_id.clone())).collect();
    by_freq.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let expected: Vec<String> = by_freq.into_iter().take(15).map(|x| x.1).collect();
    let got: Vec<String> = report.top_frequency["m"].iter().map(|e| e.canonical_id.clone()).collect();
    assert_eq!(got, expected);

    // Severity compared through cross-multiplication to avoid float keys.
    let mut by_sev: Vec<&AnachronismScore> = scores.iter().collect();
    by_sev.sort_by(|a, b| {
        (b.n_detected * a.n_proposed)
            .cmp(&(a.n_detected * b.n_proposed))
            .then(a.canonical_id.cmp(&b.canonical_id))
    });
    let expected: Vec<&str> = by_sev.iter().take(15).map(|s| s.canonical_id.as_str()).collect();
    let got: Vec<&str> = report.top_severity["m"].iter().map(|e| e.canonical_id.as_str()).collect();
    assert_eq!(got, expected);
}
