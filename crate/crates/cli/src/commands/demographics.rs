use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Result};
use chronoeval::demographics::{
    aggregate_face_lists, category_summary, deviation, llm_baseline, BaselineEstimate, BaselineVariant,
    FaceObservation, Race, DEFAULT_CONFIDENCE,
};
use chronoeval::gateway::Mode;
use chronoeval::report::ModelDemographics;
use chronoeval::Error;
use clap::Args;
use rayon::prelude::*;

use crate::config::EndpointSet;
use crate::run::{write_json, write_jsonl, Run};

pub const BASELINES: &str = "demographics/baselines.jsonl";
pub const OUTPUT: &str = "demographics/report.json";

#[derive(Debug, Clone, Args)]
pub struct DemographicsArgs {
    /// Endpoint set file; the baseline role (or --endpoint) is queried.
    #[arg(long, value_name = "CFG")]
    baseline_endpoint: PathBuf,
    #[arg(long)]
    endpoint: Option<String>,
    /// Minimum gender and race confidence of a retained face.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    conf: f64,
    /// Comma-separated race groups scored (default: all but Latino).
    #[arg(long, value_name = "SET", value_delimiter = ',', conflicts_with = "include_latino")]
    groups: Option<Vec<Race>>,
    /// Score every race group, Latino included.
    #[arg(long)]
    include_latino: bool,
    #[arg(long, conflicts_with = "record")]
    replay: bool,
    #[arg(long)]
    record: bool,
}

pub fn run(run: &mut Run, args: &DemographicsArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.conf) {
        bail!("--conf {} outside [0, 1]", args.conf);
    }
    let manifest = run.manifest()?;
    let corpus = run.corpus(&manifest)?;
    let Some(faces) = &corpus.sidecars().faces else {
        return Err(Error::MissingSidecar("faces".into()).into());
    };
    let groups: Vec<Race> = match &args.groups {
        Some(g) => g.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        None => Race::metric_groups(args.include_latino),
    };
    if groups.is_empty() {
        bail!("--groups must name at least one race group");
    }
    let set = EndpointSet::load(&args.baseline_endpoint)?;
    let endpoint = set.baseline(args.endpoint.as_deref())?;
    let gateway = set.gateway(if args.record { Mode::Record } else { Mode::Replay })?;

    let cells: BTreeSet<(&str, &str)> = corpus
        .records()
        .iter()
        .map(|r| (r.activity.as_str(), r.period.as_str()))
        .collect();
    let prompts: Vec<_> = manifest
        .prompts()
        .iter()
        .filter(|p| cells.contains(&(p.activity.as_str(), p.period.as_str())))
        .collect();
    let baselines: Vec<BaselineEstimate> = prompts
        .par_iter()
        .map(|p| llm_baseline(&gateway, &endpoint, p, BaselineVariant::Race, &groups))
        .collect::<chronoeval::Result<_>>()?;
    write_jsonl(&run.path(BASELINES), &baselines)?;

    let mut out = Vec::new();
    for model in corpus.models() {
        let mut deviations = Vec::new();
        let (mut images, mut excluded) = (0, 0);
        for b in &baselines {
            let lists: Vec<&[FaceObservation]> = corpus
                .select(model, &b.period)
                .filter(|r| r.activity == b.activity)
                .map(|r| {
                    faces
                        .get(&r.image_id)
                        .map(Vec::as_slice)
                        .ok_or_else(|| Error::Invalid(format!("no faces row for {}", r.image_id)))
                })
                .collect::<chronoeval::Result<_>>()?;
            if lists.is_empty() {
                continue;
            }
            images += lists.len();
            let passes = |f: &FaceObservation| f.conf_gender >= args.conf && f.conf_race >= args.conf;
            let kept = lists.iter().filter(|l| l.iter().any(passes)).count();
            excluded += lists.len() - kept;
            if kept == 0 {
                continue;
            }
            let in_groups = lists.iter().any(|l| l.iter().any(|f| passes(f) && groups.contains(&f.race)));
            if !in_groups {
                // Every retained face is outside the scored groups: gender only.
                let agg = aggregate_face_lists(&lists, args.conf, &Race::ALL)?;
                deviations.extend(deviation(&b.activity, &b.period, &agg.gender, &b.gender)?);
                continue;
            }
            let agg = aggregate_face_lists(&lists, args.conf, &groups)?;
            deviations.extend(deviation(&b.activity, &b.period, &agg.gender, &b.gender)?);
            deviations.extend(deviation(&b.activity, &b.period, &agg.race, &b.other)?);
        }
        let categories = category_summary(&deviations, &manifest)?;
        println!(
            "{model}: {} deviation rows, {excluded} of {images} images without a confident face",
            deviations.len()
        );
        out.push(ModelDemographics {
            model_id: model.to_string(),
            baseline: format!("language-model estimate ({})", gateway.endpoint(&endpoint)?.model_name),
            include_latino: groups.contains(&Race::Latino),
            confidence: args.conf,
            images,
            excluded_images: excluded,
            deviations,
            categories,
        });
    }
    write_json(&run.path(OUTPUT), &out)?;
    run.record_output("demographics", OUTPUT)
}
