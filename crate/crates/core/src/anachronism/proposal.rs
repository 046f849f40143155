use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gateway::{Gateway, GatewayError, Message};
use crate::manifest::{Manifest, Period, PromptSpec};

/// Instruction sent ahead of every proposal request.
pub const PROPOSAL_INSTRUCTIONS: &str = include_str!("../../data/prompts/anachronism_proposal.txt");

/// Literal ending every identification question.
pub const ANSWER_SUFFIX: &str = "Answer with 'yes' or 'no'.";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnachronismProposal {
    pub activity: String,
    pub period: String,
    pub element: String,
    pub question: String,
    pub source_model: String,
}

/// Trims the question and makes it end with [`ANSWER_SUFFIX`], replacing any
/// other trailing "Answer with ..." sentence.
pub fn normalize_question(question: &str) -> String {
    let q = question.trim();
    if q.ends_with(ANSWER_SUFFIX) {
        return q.to_string();
    }
    let stem = match q.rfind("Answer with") {
        Some(i) => q[..i].trim_end(),
        None => q,
    };
    if stem.is_empty() {
        String::new()
    } else {
        format!("{stem} {ANSWER_SUFFIX}")
    }
}

pub fn proposal_messages(prompt: &PromptSpec) -> Vec<Message> {
    vec![
        Message::system(PROPOSAL_INSTRUCTIONS.trim_end()),
        Message::user(format!("Prompt: \"{}\"", prompt.text)),
    ]
}

fn repair_message(problem: &str) -> Message {
    Message::user(format!(
        "Your reply could not be used: {problem}. Reply again with only one JSON object that has a \
         \"possible_anachronisms\" list of strings and a \"questions_to_identify_anachronisms\" object \
         mapping each listed anachronism to its yes/no question."
    ))
}

/// Slice from the first `{` or `[` to the matching last bracket, which strips
/// code fences and surrounding prose.
fn json_span(text: &str) -> Option<&str> {
    let start = text.find(['{', '['])?;
    let close = if text[start..].starts_with('{') { '}' } else { ']' };
    let end = text.rfind(close)?;
    (end > start).then(|| &text[start..=end])
}

/// Parses one proposal reply. An array of objects is accepted when one of
/// them carries the requested prompt (or there is exactly one).
pub fn parse_proposal_reply(
    reply: &str,
    prompt: &PromptSpec,
    source_model: &str,
) -> std::result::Result<Vec<AnachronismProposal>, String> {
    let span = json_span(reply).ok_or("no JSON object in reply")?;
    let value: Value = serde_json::from_str(span).map_err(|e| format!("invalid JSON: {e}"))?;
    let object = match &value {
        Value::Object(_) => &value,
        Value::Array(items) => {
            let matching = items
                .iter()
                .find(|v| v.get("prompt").and_then(Value::as_str) == Some(prompt.text.as_str()));
            match (matching, items.len()) {
                (Some(v), _) => v,
                (None, 1) => &items[0],
                _ => return Err("array reply has no entry for the prompt".into()),
            }
        }
        _ => return Err("reply is not a JSON object".into()),
    };
    let elements = object
        .get("possible_anachronisms")
        .and_then(Value::as_array)
        .ok_or("missing \"possible_anachronisms\" list")?;
    let questions = object
        .get("questions_to_identify_anachronisms")
        .and_then(Value::as_object)
        .ok_or("missing \"questions_to_identify_anachronisms\" object")?;
    let mut out = Vec::with_capacity(elements.len());
    for element in elements {
        let element = element
            .as_str()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or("anachronisms must be non-empty strings")?;
        let question = questions
            .get(element)
            .and_then(Value::as_str)
            .map(normalize_question)
            .filter(|q| !q.is_empty())
            .ok_or_else(|| format!("no question for {element:?}"))?;
        out.push(AnachronismProposal {
            activity: prompt.activity.clone(),
            period: prompt.period.clone(),
            element: element.to_string(),
            question,
            source_model: source_model.to_string(),
        });
    }
    Ok(out)
}

fn check_eligible(prompt: &PromptSpec, period: &Period) -> Result<()> {
    if period.anachronism_eligible {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "period {} is not eligible for anachronism evaluation ({})",
            period.id, prompt.text
        )))
    }
}

fn finish(
    gateway: &Gateway,
    endpoint_id: &str,
    prompt: &PromptSpec,
    first: std::result::Result<String, GatewayError>,
) -> Result<Vec<AnachronismProposal>> {
    let source = gateway.endpoint(endpoint_id)?.model_name.clone();
    let reply = first?;
    let problem = match parse_proposal_reply(&reply, prompt, &source) {
        Ok(proposals) => return Ok(proposals),
        Err(problem) => problem,
    };
    let mut messages = proposal_messages(prompt);
    messages.push(Message::assistant(reply));
    messages.push(repair_message(&problem));
    let second = gateway.complete(endpoint_id, &messages)?;
    parse_proposal_reply(&second, prompt, &source).map_err(|message| Error::Reply {
        endpoint: endpoint_id.to_string(),
        message: format!("{}: {message}", prompt.text),
    })
}

/// Requests proposals for one prompt, retrying once with a repair
/// instruction when the reply violates the schema.
pub fn propose(gateway: &Gateway, endpoint_id: &str, prompt: &PromptSpec, period: &Period) -> Result<Vec<AnachronismProposal>> {
    check_eligible(prompt, period)?;
    let first = gateway.complete(endpoint_id, &proposal_messages(prompt));
    finish(gateway, endpoint_id, prompt, first)
}

/// Proposals for many prompts, first attempts run as one bounded batch.
pub fn propose_all(
    gateway: &Gateway,
    endpoint_id: &str,
    manifest: &Manifest,
    prompts: &[&PromptSpec],
) -> Result<Vec<AnachronismProposal>> {
    for prompt in prompts {
        let period = manifest
            .period(&prompt.period)
            .ok_or_else(|| Error::Manifest(format!("unknown period {}", prompt.period)))?;
        check_eligible(prompt, period)?;
    }
    let in_flight = gateway.endpoint(endpoint_id)?.max_in_flight;
    let requests: Vec<Vec<Message>> = prompts.iter().map(|p| proposal_messages(p)).collect();
    let replies = gateway.batch(endpoint_id, &requests, in_flight);
    let mut out = Vec::new();
    for (prompt, reply) in prompts.iter().zip(replies) {
        out.extend(finish(gateway, endpoint_id, prompt, reply)?);
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt() -> PromptSpec {
        PromptSpec {
            activity: "listening-to-music".into(),
            period: "18th-century".into(),
            text: "A person listening to music in the 18th century".into(),
        }
    }

    #[test]
    fn parses_fenced_reply() {
        let reply = r#"Here you go:
```json
{"index": 1, "prompt": "A person listening to music in the 18th century",
 "possible_anachronisms": ["audio devices", "modern clothing"],
 "questions_to_identify_anachronisms": {
   "audio devices": "Is the person using audio devices such as headphones? Answer with 'yes' or 'no'.",
   "modern clothing": "Is the person wearing modern clothing? Answer with 'yes' (if the anachronism is present) or 'no' (if it is absent)."}}
```"#;
        let p = parse_proposal_reply(reply, &prompt(), "gpt-4o").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].element, "audio devices");
        assert_eq!(p[1].question, "Is the person wearing modern clothing? Answer with 'yes' or 'no'.");
        assert!(p.iter().all(|x| x.question.ends_with(ANSWER_SUFFIX)));
    }

    #[test]
    fn empty_list_is_valid() {
        let reply = r#"{"possible_anachronisms": [], "questions_to_identify_anachronisms": {}}"#;
        assert!(parse_proposal_reply(reply, &prompt(), "m").unwrap().is_empty());
    }

    #[test]
    fn schema_violations() {
        for bad in [
            "no json here",
            r#"{"possible_anachronisms": ["x"]}"#,
            r#"{"possible_anachronisms": ["x"], "questions_to_identify_anachronisms": {}}"#,
            r#"{"possible_anachronisms": [3], "questions_to_identify_anachronisms": {}}"#,
            r#"{"possible_anachronisms": "x", "questions_to_identify_anachronisms": {}}"#,
        ] {
            assert!(parse_proposal_reply(bad, &prompt(), "m").is_err(), "{bad}");
        }
    }

    #[test]
    fn array_reply_selects_prompt() {
        let reply = r#"[{"prompt": "other", "possible_anachronisms": [], "questions_to_identify_anachronisms": {}},
                        {"prompt": "A person listening to music in the 18th century", "possible_anachronisms": ["radio"],
                         "questions_to_identify_anachronisms": {"radio": "Is there a radio?"}}]"#;
        let p = parse_proposal_reply(reply, &prompt(), "m").unwrap();
        assert_eq!(p[0].question, "Is there a radio? Answer with 'yes' or 'no'.");
    }

    #[test]
    fn question_suffix_rules() {
        assert_eq!(normalize_question("  Is it? Answer with 'yes' or 'no'.  "), "Is it? Answer with 'yes' or 'no'.");
        assert_eq!(normalize_question("Is it?"), "Is it? Answer with 'yes' or 'no'.");
        assert_eq!(normalize_question("Answer with yes"), "");
    }
}
