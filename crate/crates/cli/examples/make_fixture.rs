//! Regenerates the 60-image test fixture and its recorded response cache.
//!
//! ```text
//! cargo run -p chronoeval-cli --example make_fixture [-- OUT_DIR]
//! ```
//!
//! Endpoint replies come from a scripted in-process transport, so the cache
//! holds exactly the requests the pipeline makes over this corpus.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chronoeval::anachronism::{
    normalize_proposals, plan_verification, propose_all, verify_all, ElementIndex,
};
use chronoeval::corpus::{ingest_corpus, sha256_hex};
use chronoeval::demographics::{llm_baseline, BaselineVariant, Race};
use chronoeval::gateway::{completion_body, EndpointConfig, FnTransport, Gateway, Mode, ResponseCache, TransportResponse};
use chronoeval::manifest::Manifest;
use chronoeval::style::StyleLabel;
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const MODEL: &str = "sdxl";
const ACTIVITIES: [&str; 2] = ["listening-to-music", "communicating-using-a-device"];
const PERIODS: [&str; 3] = ["1910s", "1950s", "1990s"];
const SIDE: u32 = 32;
const DIM: usize = 8;

/// Pre-relabel style of each replicate, flagged when the image is grayscale.
fn styles(activity: &str, period: &str) -> Vec<(StyleLabel, bool)> {
    use StyleLabel::*;
    let plan: &[(StyleLabel, bool, usize)] = match (activity, period) {
        ("listening-to-music", "1910s") => &[(Photography, true, 7), (Painting, false, 2), (Drawing, false, 1)],
        (_, "1910s") => &[(Photography, true, 7), (Painting, false, 2), (Engraving, false, 1)],
        ("listening-to-music", "1950s") => &[(Photography, false, 6), (Painting, false, 3), (Illustration, false, 1)],
        (_, "1950s") => &[(Photography, false, 5), (Painting, false, 4), (Illustration, false, 1)],
        ("listening-to-music", _) => &[(Photography, false, 5), (Painting, false, 5)],
        _ => &[(Photography, false, 5), (Painting, false, 4), (Drawing, false, 1)],
    };
    plan.iter()
        .flat_map(|&(l, gray, n)| std::iter::repeat_n((l, gray), n))
        .collect()
}

fn render(label: StyleLabel, gray: bool, rng: &mut ChaCha8Rng) -> RgbImage {
    let base: [u8; 3] = [rng.random_range(40..200), rng.random_range(40..200), rng.random_range(40..200)];
    RgbImage::from_fn(SIDE, SIDE, |x, y| {
        let n: i16 = rng.random_range(-25..25);
        let shade = |v: u8| (v as i16 + n).clamp(0, 255) as u8;
        match (label, gray) {
            (_, true) => {
                let g = shade(((x + y) * 3 + 60) as u8);
                Rgb([g, g, g])
            }
            (StyleLabel::Drawing, _) | (StyleLabel::Engraving, _) => {
                let ink = (x + 2 * y) % 7 == 0;
                let v = if ink { 30 } else { 235 };
                Rgb([shade(v), shade(v), shade(v.saturating_sub(10))])
            }
            (StyleLabel::Illustration, _) => {
                let block = ((x / 8) + (y / 8)) % 3;
                Rgb([base[block as usize], base[(block as usize + 1) % 3], 255 - base[block as usize]])
            }
            _ => Rgb([shade(base[0].wrapping_add((x * 2) as u8)), shade(base[1]), shade(base[2].wrapping_add((y * 2) as u8))]),
        }
    })
}

fn unit(bytes: &[u8]) -> f64 {
    let d = sha2_digest(bytes);
    u64::from_be_bytes(d[..8].try_into().unwrap()) as f64 / u64::MAX as f64
}

fn sha2_digest(bytes: &[u8]) -> Vec<u8> {
    hex_decode(&sha256_hex(bytes))
}

fn hex_decode(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

fn content_text(message: &Value) -> String {
    match &message["content"] {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        _ => String::new(),
    }
}

fn image_url(message: &Value) -> Option<String> {
    message["content"]
        .as_array()?
        .iter()
        .find_map(|p| p["image_url"]["url"].as_str().map(str::to_string))
}

fn elements_for(prompt: &str) -> Vec<&'static str> {
    let music = prompt.contains("music");
    match (music, &prompt[prompt.len() - 5..]) {
        (true, "1910s") => vec!["digital audio device", "modern clothing"],
        (true, "1950s") => vec!["audio device", "modern clothing"],
        (true, _) => vec!["smartphone", "Modern Clothing"],
        (false, "1910s") => vec!["smartphone", "modern surroundings"],
        (false, "1950s") => vec!["smartphone", "laptop computer"],
        (false, _) => vec!["smartphone", "wireless earbuds"],
    }
}

fn proposer_reply(prompt: &str, attempt: usize) -> String {
    if prompt.ends_with("music in the 1990s") && attempt == 0 {
        return "Possible anachronisms include smartphones and modern clothing.".into();
    }
    let elements = elements_for(prompt);
    let questions: serde_json::Map<String, Value> = elements
        .iter()
        .map(|e| {
            (
                e.to_string(),
                json!(format!(
                    "Does the image show {} that would not fit the period? Answer with 'yes' (if the anachronism is present) or 'no' (if it is absent).",
                    e.to_lowercase()
                )),
            )
        })
        .collect();
    let body = json!({
        "index": 1,
        "prompt": prompt,
        "possible_anachronisms": elements,
        "questions_to_identify_anachronisms": questions,
    });
    format!("```json\n{}\n```", serde_json::to_string_pretty(&body).unwrap())
}

fn detection_rate(question: &str) -> f64 {
    if question.contains("smartphone") {
        0.35
    } else if question.contains("audio device") {
        0.4
    } else if question.contains("clothing") {
        0.5
    } else {
        0.15
    }
}

fn verifier_reply(model: &str, question: &str, image: &str) -> String {
    let key = format!("{image}|{question}");
    let u = unit(key.as_bytes());
    let jitter = unit(format!("{model}|{key}").as_bytes()) * 0.2 - 0.1;
    if model.starts_with("qwen") && unit(format!("abstain|{key}").as_bytes()) < 0.05 {
        return "I cannot determine this from the image.".into();
    }
    if u + jitter < detection_rate(question) {
        "Yes.".into()
    } else {
        "No, it does not.".into()
    }
}

fn baseline_reply(prompt: &str, attempt: usize) -> String {
    let h = unit(prompt.as_bytes());
    let male = 50 + (h * 40.0) as u32;
    if prompt.ends_with("device in the 1990s") && attempt == 0 {
        return format!("Male: {male}%\nFemale: 20%\nWhite: 70%\nBlack: 30%");
    }
    let (white, black, east, southeast, indian, middle, latino) = match &prompt[prompt.len() - 5..] {
        "1910s" => (62, 10, 10, 6, 6, 4, 2),
        "1950s" => (55, 12, 12, 7, 6, 4, 4),
        _ => (45, 14, 15, 9, 8, 5, 4),
    };
    format!(
        "**Gender (%):**\n- Male: {male}%\n- Female: {}%\n\n**Race (%):**\n- White: {white}%\n- Black: {black}%\n\
         - East Asian: {east}%\n- Southeast Asian: {southeast}%\n- Indian: {indian}%\n- Middle Eastern: {middle}%\n\
         - Latino: {latino}%\n",
        100 - male
    )
}

fn scripted(_url: &str, body: &Value) -> Result<TransportResponse, String> {
    let model = body["model"].as_str().unwrap_or_default();
    let messages = body["messages"].as_array().ok_or("no messages")?;
    let system = messages.first().map(content_text).unwrap_or_default();
    let user = messages.get(1).map(content_text).unwrap_or_default();
    let prompt = user
        .strip_prefix("Prompt: \"")
        .and_then(|s| s.split('"').next())
        .unwrap_or_default()
        .to_string();
    let attempt = messages.len().saturating_sub(2) / 2;
    let text = if system.starts_with("Anachronism Identification") {
        proposer_reply(&prompt, attempt)
    } else if system.contains("demographic breakdown") {
        baseline_reply(&prompt, attempt)
    } else {
        let message = messages.last().ok_or("empty request")?;
        let image = image_url(message).ok_or("verification request without image")?;
        verifier_reply(model, &content_text(message), &image)
    };
    Ok(TransportResponse {
        status: 200,
        body: completion_body(&text),
    })
}

fn endpoints() -> Vec<EndpointConfig> {
    vec![
        EndpointConfig::new("gpt-4o", "http://127.0.0.1:9/v1", "gpt-4o"),
        EndpointConfig::new("llama-3.2-vision", "http://127.0.0.1:9/v1", "llama-3.2-11b-vision-instruct"),
        EndpointConfig::new("qwen2.5-vl", "http://127.0.0.1:9/v1", "qwen2.5-vl-7b-instruct"),
    ]
}

const CONFIG: &str = r#"cache_dir = "cache"

[[endpoints]]
endpoint_id = "gpt-4o"
base_url = "http://127.0.0.1:9/v1"
model_name = "gpt-4o"
api_key_env = "OPENAI_API_KEY"
max_retries = 0

[[endpoints]]
endpoint_id = "llama-3.2-vision"
base_url = "http://127.0.0.1:9/v1"
model_name = "llama-3.2-11b-vision-instruct"
max_retries = 0

[[endpoints]]
endpoint_id = "qwen2.5-vl"
base_url = "http://127.0.0.1:9/v1"
model_name = "qwen2.5-vl-7b-instruct"
max_retries = 0

[roles]
proposer = "gpt-4o"
verifiers = ["gpt-4o", "llama-3.2-vision", "qwen2.5-vl"]
baseline = "gpt-4o"
"#;

fn jsonl(rows: &[Value]) -> String {
    rows.iter().map(|r| format!("{r}\n")).collect()
}

fn write(path: &Path, contents: impl AsRef<[u8]>) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, contents).unwrap();
}

fn pick_race(rng: &mut ChaCha8Rng) -> Race {
    let weights = [0.45, 0.15, 0.05, 0.12, 0.08, 0.08, 0.07];
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (w, r) in weights.iter().zip(Race::ALL) {
        acc += w;
        if u < acc {
            return r;
        }
    }
    Race::MiddleEastern
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini"));
    if out.exists() {
        assert!(out.join("endpoints.toml").is_file(), "refusing to replace {}", out.display());
        fs::remove_dir_all(&out).unwrap();
    }
    let manifest = Manifest::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(1910);

    let mut style_rows = Vec::new();
    let mut embedding_rows = Vec::new();
    let mut face_rows = Vec::new();
    let mut other_face_rows = Vec::new();
    for period in PERIODS {
        for activity in ACTIVITIES {
            for (replicate, (label, gray)) in styles(activity, period).into_iter().enumerate() {
                let id = format!("{MODEL}/{period}/{activity}/{replicate}");
                let img = render(label, gray, &mut rng);
                let path = out.join(format!("corpus/{id}.png"));
                fs::create_dir_all(path.parent().unwrap()).unwrap();
                img.save(&path).unwrap();
                style_rows.push(json!({"image_id": id, "label": label}));
                let k = StyleLabel::PREDICTED.iter().position(|&l| l == label).unwrap();
                let v: Vec<f64> = (0..DIM)
                    .map(|j| (if j == k { 3.0 } else { 0.0 }) + rng.random_range(-0.5..0.5))
                    .map(|x: f64| (x * 1e4).round() / 1e4)
                    .collect();
                embedding_rows.push(json!({"image_id": id, "vector": v}));

                let n_faces = match rng.random_range(0..20) {
                    0..=1 => 0,
                    2..=16 => 1,
                    _ => 2,
                };
                let p_male = if activity.starts_with("listening") { 0.6 } else { 0.5 };
                let mut faces = Vec::new();
                let mut other = Vec::new();
                for _ in 0..n_faces {
                    let male = rng.random::<f64>() < p_male;
                    let race = pick_race(&mut rng);
                    let cg: f64 = (rng.random_range(0.65..1.0f64) * 1e3).round() / 1e3;
                    let cr: f64 = (rng.random_range(0.65..1.0f64) * 1e3).round() / 1e3;
                    let gender = |m: bool| if m { "male" } else { "female" };
                    faces.push(json!({"gender": gender(male), "race": race, "conf_gender": cg, "conf_race": cr}));
                    let other_male = if rng.random::<f64>() < 0.05 { !male } else { male };
                    let other_race = match race {
                        Race::EastAsian if rng.random::<f64>() < 0.4 => Race::SoutheastAsian,
                        Race::SoutheastAsian if rng.random::<f64>() < 0.4 => Race::EastAsian,
                        _ if rng.random::<f64>() < 0.1 => pick_race(&mut rng),
                        r => r,
                    };
                    other.push(json!({"gender": gender(other_male), "race": other_race, "conf_gender": 0.9, "conf_race": 0.9}));
                }
                face_rows.push(json!({"image_id": id, "faces": faces}));
                other_face_rows.push(json!({"image_id": id, "faces": other}));
            }
        }
    }
    write(&out.join("sidecars/styles.jsonl"), jsonl(&style_rows));
    write(&out.join("sidecars/embeddings.jsonl"), jsonl(&embedding_rows));
    write(&out.join("sidecars/faces.jsonl"), jsonl(&face_rows));
    write(&out.join("sidecars/faces_other.jsonl"), jsonl(&other_face_rows));

    let mut train_vectors = Vec::new();
    let mut train_labels = Vec::new();
    for (k, label) in StyleLabel::PREDICTED.iter().enumerate() {
        for i in 0..24 {
            let id = format!("train-{label}-{i}");
            let v: Vec<f64> = (0..DIM)
                .map(|j| (if j == k { 3.0 } else { 0.0 }) + rng.random_range(-0.5..0.5))
                .map(|x: f64| (x * 1e4).round() / 1e4)
                .collect();
            train_vectors.push(json!({"image_id": id, "vector": v}));
            train_labels.push(json!({"image_id": id, "label": label}));
        }
    }
    write(&out.join("probe/train_embeddings.jsonl"), jsonl(&train_vectors));
    write(&out.join("probe/train_labels.jsonl"), jsonl(&train_labels));
    write(
        &out.join("precision.json"),
        serde_json::to_string_pretty(&json!({"precision": {
            "drawing": 0.82, "engraving": 0.9, "illustration": 0.78, "painting": 0.88, "photography": 0.93
        }}))
        .unwrap()
            + "\n",
    );
    write(&out.join("endpoints.toml"), CONFIG);

    // Record every endpoint reply the pipeline asks for.
    let corpus = ingest_corpus(&out.join("corpus"), None, &manifest).unwrap();
    assert_eq!(corpus.len(), 60);
    let gateway = Gateway::new(
        endpoints(),
        ResponseCache::new(out.join("cache")),
        Mode::Record,
        Arc::new(FnTransport(scripted)),
    )
    .unwrap();
    let prompts: Vec<_> = manifest
        .prompts()
        .iter()
        .filter(|p| ACTIVITIES.contains(&p.activity.as_str()) && PERIODS.contains(&p.period.as_str()))
        .collect();
    let proposals = propose_all(&gateway, "gpt-4o", &manifest, &prompts).unwrap();
    let elements = normalize_proposals(&proposals);
    let index = ElementIndex::new(&elements);
    let tasks = plan_verification(&corpus, &proposals, &index, None).unwrap();
    let verifiers: Vec<String> = endpoints().into_iter().map(|e| e.endpoint_id).collect();
    let verdicts = verify_all(&gateway, &tasks, &verifiers).unwrap();
    for prompt in &prompts {
        llm_baseline(&gateway, "gpt-4o", prompt, BaselineVariant::Race, &Race::DEFAULT_METRIC).unwrap();
    }

    // Three annotators on the first three replicates of every prompt.
    let mut annotation_rows = Vec::new();
    for v in &verdicts {
        let replicate: u32 = v.image_id.rsplit('/').next().unwrap().parse().unwrap();
        if replicate >= 3 {
            continue;
        }
        for annotator in ["a1", "a2", "a3"] {
            let flip = rng.random::<f64>() < 0.12;
            let yes = v.detected() != flip;
            annotation_rows.push(json!({
                "image_id": v.image_id,
                "question_id": v.canonical_id,
                "annotator_id": annotator,
                "answer": if yes { "yes" } else { "no" },
            }));
        }
    }
    write(&out.join("sidecars/annotations.jsonl"), jsonl(&annotation_rows));

    // Reference shares per (period, group) and an alternative estimate set.
    let mut reference = String::from("period,group,share_percent\n");
    let mut estimates = String::from("period,group,share_percent\n");
    let groups = ["male", "female", "White", "Black", "EastAsian", "SoutheastAsian", "Indian", "MiddleEastern"];
    let table: BTreeMap<&str, [f64; 8]> = BTreeMap::from([
        ("1910s", [78.0, 22.0, 58.0, 12.0, 11.0, 7.0, 7.0, 5.0]),
        ("1950s", [66.0, 34.0, 52.0, 13.0, 13.0, 8.0, 8.0, 6.0]),
        ("1990s", [55.0, 45.0, 44.0, 15.0, 16.0, 10.0, 9.0, 6.0]),
    ]);
    for (period, values) in &table {
        for (g, v) in groups.iter().zip(values) {
            writeln!(reference, "{period},{g},{v}").unwrap();
            writeln!(estimates, "{period},{g},{}", v + if matches!(*g, "male" | "female") { 3.5 } else { -1.25 }).unwrap();
        }
    }
    write(&out.join("validation/reference.csv"), reference);
    write(&out.join("validation/estimates.csv"), estimates);

    println!(
        "{}: 60 images, {} proposals, {} canonical elements, {} verdicts, {} cache entries",
        out.display(),
        proposals.len(),
        elements.len(),
        verdicts.len(),
        fs::read_dir(out.join("cache")).unwrap().count()
    );
}
