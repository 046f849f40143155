use std::path::Path;

use anyhow::{bail, Result};
use chronoeval::report::{
    render_csvs, render_markdown, render_vsd_table, AnachronismReport, Comparison, ModelDemographics, Report,
    StyleSection, ValidationReport,
};

use super::style::StyleOutput;
use crate::run::{read_json, write_atomic, Run, STATE_FILE};

fn optional<T: serde::de::DeserializeOwned>(run: &Run, step: &str) -> Result<Option<T>> {
    match run.state.outputs.get(step) {
        Some(file) => Ok(Some(read_json(&run.path(file))?)),
        None => Ok(None),
    }
}

pub fn run(run: &mut Run, compare: Option<&Path>) -> Result<()> {
    let manifest = run.manifest()?;
    let order: Vec<String> = manifest.periods().iter().map(|p| p.id.clone()).collect();
    let mut report = Report::default();

    let style: Option<StyleOutput> = optional(run, "style")?;
    if let Some(s) = &style {
        report.style = Some(StyleSection {
            threshold: s.threshold,
            replicates: s.replicates,
            seed: s.seed,
            results: s.results.clone(),
            table: render_vsd_table(&s.results, None, &order)?,
        });
    }
    if let Some(other) = compare {
        let Some(base) = &style else {
            bail!("--compare needs `style run` in this run first");
        };
        if !other.join(STATE_FILE).is_file() {
            bail!("{} is not a run directory", other.display());
        }
        let theirs: StyleOutput = read_json(&other.join(super::style::OUTPUT))?;
        let name = other
            .canonicalize()?
            .file_name()
            .map_or("other run".to_string(), |n| n.to_string_lossy().into_owned());
        report.comparison = Some(Comparison {
            other_run: name,
            table: render_vsd_table(&base.results, Some(&theirs.results), &order)?,
        });
    }
    report.anachronism = optional::<AnachronismReport>(run, "anachronism score")?;
    report.demographics = optional::<Vec<ModelDemographics>>(run, "demographics")?.unwrap_or_default();
    report.validation = optional::<ValidationReport>(run, "validate")?;
    if report.style.is_none() && report.anachronism.is_none() && report.demographics.is_empty() && report.validation.is_none() {
        bail!("nothing to report in {}; run an analysis first", run.dir.display());
    }

    write_atomic(&run.path("report.json"), report.to_json().as_bytes())?;
    write_atomic(&run.path("report.md"), render_markdown(&report).as_bytes())?;
    for (name, contents) in render_csvs(&report) {
        write_atomic(&run.path(name), contents.as_bytes())?;
    }
    println!("wrote {}", run.path("report.json").display());
    run.record_output("report", "report.json")
}
