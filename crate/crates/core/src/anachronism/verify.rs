use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ImageRecord;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GatewayError, Message};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Majority {
    Detected,
    NotDetected,
}

/// Reads a yes/no reply: case-folded, punctuation stripped, decided by the
/// leading word only.
pub fn parse_yes_no(reply: &str) -> Answer {
    let folded: String = reply
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    match folded.split_whitespace().next() {
        Some("yes") => Answer::Yes,
        Some("no") => Answer::No,
        _ => Answer::Abstain,
    }
}

/// Strict majority of the non-abstaining votes; ties and all-abstain are not
/// detections.
pub fn majority(answers: impl IntoIterator<Item = Answer>) -> Majority {
    let (mut yes, mut no) = (0usize, 0usize);
    for a in answers {
        match a {
            Answer::Yes => yes += 1,
            Answer::No => no += 1,
            Answer::Abstain => {}
        }
    }
    if yes > no {
        Majority::Detected
    } else {
        Majority::NotDetected
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnachronismVerdict {
    pub image_id: String,
    pub canonical_id: String,
    pub question: String,
    pub answers: BTreeMap<String, Answer>,
    pub majority: Majority,
}

impl AnachronismVerdict {
    pub fn new(image_id: &str, canonical_id: &str, question: &str, answers: BTreeMap<String, Answer>) -> Self {
        let majority = majority(answers.values().copied());
        AnachronismVerdict {
            image_id: image_id.into(),
            canonical_id: canonical_id.into(),
            question: question.into(),
            answers,
            majority,
        }
    }

    pub fn detected(&self) -> bool {
        self.majority == Majority::Detected
    }
}

/// One question to put to every verifier about one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyTask<'a> {
    pub image: &'a ImageRecord,
    pub canonical_id: String,
    pub question: String,
}

pub fn verify_messages(image: &ImageRecord, question: &str) -> Result<Vec<Message>> {
    Ok(vec![Message::user(question).with_image(image.media_type(), image.read_bytes()?)])
}

/// A failed endpoint abstains. A replay miss is not an endpoint failure: it
/// means the recording is incomplete, so it aborts the run.
fn answer_of(result: std::result::Result<String, GatewayError>) -> Result<Answer> {
    match result {
        Ok(text) => Ok(parse_yes_no(&text)),
        Err(e @ GatewayError::ReplayMiss { .. }) | Err(e @ GatewayError::UnknownEndpoint(_)) => Err(e.into()),
        Err(_) => Ok(Answer::Abstain),
    }
}

pub fn verify(gateway: &Gateway, image: &ImageRecord, canonical_id: &str, question: &str, endpoints: &[String]) -> Result<AnachronismVerdict> {
    let verdicts = verify_all(
        gateway,
        &[VerifyTask {
            image,
            canonical_id: canonical_id.into(),
            question: question.into(),
        }],
        endpoints,
    )?;
    Ok(verdicts.into_iter().next().expect("one task"))
}

/// Asks every endpoint every task, each endpoint under its own in-flight cap.
pub fn verify_all(gateway: &Gateway, tasks: &[VerifyTask<'_>], endpoints: &[String]) -> Result<Vec<AnachronismVerdict>> {
    if endpoints.is_empty() {
        return Err(Error::Invalid("verification needs at least one endpoint".into()));
    }
    let requests: Vec<Vec<Message>> = tasks
        .iter()
        .map(|t| verify_messages(t.image, &t.question))
        .collect::<Result<_>>()?;
    let mut answers: Vec<BTreeMap<String, Answer>> = vec![BTreeMap::new(); tasks.len()];
    for endpoint in endpoints {
        let in_flight = gateway.endpoint(endpoint)?.max_in_flight;
        for (slot, result) in answers.iter_mut().zip(gateway.batch(endpoint, &requests, in_flight)) {
            slot.insert(endpoint.clone(), answer_of(result)?);
        }
    }
    Ok(tasks
        .iter()
        .zip(answers)
        .map(|(t, a)| AnachronismVerdict::new(&t.image.image_id, &t.canonical_id, &t.question, a))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Answer::*;

    #[test]
    fn parser_reads_leading_word() {
        assert_eq!(parse_yes_no("Yes."), Yes);
        assert_eq!(parse_yes_no("  NO, there is none"), No);
        assert_eq!(parse_yes_no("**Yes**"), Yes);
        assert_eq!(parse_yes_no("Yesterday"), Abstain);
        assert_eq!(parse_yes_no("I think yes"), Abstain);
        assert_eq!(parse_yes_no(""), Abstain);
    }

    #[test]
    fn voting_rule() {
        assert_eq!(majority([Yes, Yes, No]), Majority::Detected);
        assert_eq!(majority([Yes, No, Abstain]), Majority::NotDetected);
        assert_eq!(majority([Abstain, Abstain, Abstain]), Majority::NotDetected);
        assert_eq!(majority([Yes, Abstain, Abstain]), Majority::Detected);
        assert_eq!(majority([Yes, Yes, Yes]), Majority::Detected);
    }

    #[test]
    fn endpoint_failures_abstain_but_replay_misses_abort() {
        let status = GatewayError::Status {
            endpoint: "e".into(),
            status: 400,
            body: String::new(),
        };
        assert_eq!(answer_of(Err(status)).unwrap(), Abstain);
        let miss = GatewayError::ReplayMiss {
            endpoint: "e".into(),
            key: "k".into(),
        };
        assert!(answer_of(Err(miss)).is_err());
    }
}
