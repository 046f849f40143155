use std::collections::BTreeSet;
use std::path::Path;

use anyhow::Result;
use chronoeval::anachronism::{
    human_agreement, normalize_proposals, overall_rate, plan_verification, propose_all, score_periods,
    verify_all, AnachronismProposal, AnachronismVerdict, CanonicalElement, ElementIndex,
};
use chronoeval::corpus::Corpus;
use chronoeval::gateway::Mode;
use chronoeval::manifest::{Manifest, PromptSpec};
use chronoeval::report::{render_anachronism_report, RateRow};

use crate::config::EndpointSet;
use crate::run::{read_json, read_jsonl, write_json, write_jsonl, Run};

pub const PROPOSALS: &str = "anachronism/proposals.jsonl";
pub const ELEMENTS: &str = "anachronism/elements.json";
pub const VERDICTS: &str = "anachronism/verdicts.jsonl";
pub const OUTPUT: &str = "anachronism/report.json";

/// Eligible periods present in the corpus, in manifest order.
fn eligible_periods<'a>(manifest: &'a Manifest, corpus: &Corpus) -> Vec<&'a str> {
    let present: BTreeSet<&str> = corpus.records().iter().map(|r| r.period.as_str()).collect();
    manifest
        .periods()
        .iter()
        .filter(|p| p.anachronism_eligible && present.contains(p.id.as_str()))
        .map(|p| p.id.as_str())
        .collect()
}

fn eligible_prompts<'a>(manifest: &'a Manifest, corpus: &Corpus) -> Vec<&'a PromptSpec> {
    let cells: BTreeSet<(&str, &str)> = corpus
        .records()
        .iter()
        .map(|r| (r.activity.as_str(), r.period.as_str()))
        .collect();
    manifest
        .prompts()
        .iter()
        .filter(|p| cells.contains(&(p.activity.as_str(), p.period.as_str())))
        .filter(|p| manifest.period(&p.period).is_some_and(|period| period.anachronism_eligible))
        .collect()
}

pub fn propose(run: &mut Run, config: &Path, mode: Mode, endpoint: Option<&str>) -> Result<()> {
    let manifest = run.manifest()?;
    let corpus = run.bare_corpus(&manifest)?;
    let set = EndpointSet::load(config)?;
    let proposer = set.proposer(endpoint)?;
    let gateway = set.gateway(mode)?;
    let prompts = eligible_prompts(&manifest, &corpus);
    let proposals = propose_all(&gateway, &proposer, &manifest, &prompts)?;
    let elements = normalize_proposals(&proposals);
    println!(
        "{} proposals over {} prompts, {} canonical elements",
        proposals.len(),
        prompts.len(),
        elements.len()
    );
    write_jsonl(&run.path(PROPOSALS), &proposals)?;
    write_json(&run.path(ELEMENTS), &elements)?;
    run.record_output("anachronism propose", PROPOSALS)
}

fn load_proposals(run: &Run) -> Result<(Vec<AnachronismProposal>, ElementIndex)> {
    let proposals: Vec<AnachronismProposal> =
        read_jsonl(&run.require_output("anachronism propose", "anachronism propose")?)?;
    let elements: Vec<CanonicalElement> = read_json(&run.path(ELEMENTS))?;
    Ok((proposals, ElementIndex::new(&elements)))
}

pub fn verify(run: &mut Run, config: &Path, mode: Mode) -> Result<()> {
    let manifest = run.manifest()?;
    let corpus = run.bare_corpus(&manifest)?;
    let (proposals, index) = load_proposals(run)?;
    let set = EndpointSet::load(config)?;
    let verifiers = set.verifiers()?;
    let gateway = set.gateway(mode)?;
    let tasks = plan_verification(&corpus, &proposals, &index, None)?;
    let verdicts = verify_all(&gateway, &tasks, &verifiers)?;
    let detected = verdicts.iter().filter(|v| v.detected()).count();
    println!(
        "{} questions over {} images, {detected} detected",
        verdicts.len(),
        corpus.len()
    );
    write_jsonl(&run.path(VERDICTS), &verdicts)?;
    run.record_output("anachronism verify", VERDICTS)
}

pub fn score(run: &mut Run, top_k: usize) -> Result<()> {
    let manifest = run.manifest()?;
    let corpus = run.corpus(&manifest)?;
    let (proposals, index) = load_proposals(run)?;
    let verdicts: Vec<AnachronismVerdict> =
        read_jsonl(&run.require_output("anachronism verify", "anachronism verify")?)?;
    let periods = eligible_periods(&manifest, &corpus);

    let mut scores = Vec::new();
    let mut rates = Vec::new();
    for model in corpus.models() {
        let present: Vec<&str> = periods
            .iter()
            .copied()
            .filter(|p| corpus.count(model, p) > 0)
            .collect();
        scores.extend(score_periods(&verdicts, &proposals, &index, &corpus, model, &present)?);
        for period in present {
            let rate = overall_rate(&verdicts, &corpus, model, period)?;
            println!("{model}/{period}: overall rate {rate:.2}");
            rates.push(RateRow {
                model_id: model.to_string(),
                period: period.to_string(),
                overall_rate: rate,
            });
        }
    }
    let mut report = render_anachronism_report(&scores, &rates, top_k);
    if let Some(annotations) = &corpus.sidecars().annotations {
        let h = human_agreement(&verdicts, annotations)?;
        println!(
            "human agreement {:.1}% over {} items",
            h.percent_agreement * 100.0,
            h.n_items
        );
        report.human_agreement = Some(h);
    }
    write_json(&run.path(OUTPUT), &report)?;
    run.record_output("anachronism score", OUTPUT)
}
