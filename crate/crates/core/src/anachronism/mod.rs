//! Historical consistency: anachronism proposals from a language model,
//! surface-form normalization, yes/no verification by a panel of vision
//! models, per-element frequency and severity, and agreement with human
//! annotators.

mod agreement;
mod normalize;
mod proposal;
mod score;
mod verify;

use std::collections::BTreeMap;

pub use agreement::{fleiss_kappa, human_agreement, AnnotationRecord, HumanAgreement, HumanAnswer};
pub use normalize::{
    lcs_len, normalize, normalize_form, ratio, similarity, token_set_ratio, CanonicalElement, ElementIndex,
    DEFAULT_SIMILARITY_THRESHOLD,
};
pub use proposal::{
    normalize_question, parse_proposal_reply, propose, propose_all, proposal_messages, AnachronismProposal,
    ANSWER_SUFFIX, PROPOSAL_INSTRUCTIONS,
};
pub use score::{frequency_severity, overall_rate, score, score_periods, AnachronismScore};
pub use verify::{majority, parse_yes_no, verify, verify_all, verify_messages, AnachronismVerdict, Answer, Majority, VerifyTask};

use crate::corpus::Corpus;
use crate::error::Result;

/// Clusters the elements of a proposal set at the default threshold.
pub fn normalize_proposals(proposals: &[AnachronismProposal]) -> Vec<CanonicalElement> {
    normalize(proposals.iter().map(|p| p.element.as_str()), DEFAULT_SIMILARITY_THRESHOLD)
}

/// One verification task per (image, canonical element proposed for the
/// image's prompt). When several surface forms of one element were proposed
/// for the same prompt, the question of the lexicographically first form is
/// asked. Tasks follow corpus order, then canonical id.
pub fn plan_verification<'a>(
    corpus: &'a Corpus,
    proposals: &[AnachronismProposal],
    index: &ElementIndex,
    model_id: Option<&str>,
) -> Result<Vec<VerifyTask<'a>>> {
    let mut sorted: Vec<&AnachronismProposal> = proposals.iter().collect();
    sorted.sort();
    let mut by_prompt: BTreeMap<(&str, &str), BTreeMap<String, String>> = BTreeMap::new();
    for p in sorted {
        let id = index.canonical_of(&p.element).ok_or_else(|| {
            crate::error::Error::Invalid(format!("proposal {:?} has no canonical element", p.element))
        })?;
        by_prompt
            .entry((p.activity.as_str(), p.period.as_str()))
            .or_default()
            .entry(id.to_string())
            .or_insert_with(|| p.question.clone());
    }
    let mut tasks = Vec::new();
    for record in corpus.records() {
        if model_id.is_some_and(|m| m != record.model_id) {
            continue;
        }
        let Some(questions) = by_prompt.get(&(record.activity.as_str(), record.period.as_str())) else {
            continue;
        };
        for (canonical_id, question) in questions {
            tasks.push(VerifyTask {
                image: record,
                canonical_id: canonical_id.clone(),
                question: question.clone(),
            });
        }
    }
    Ok(tasks)
}
