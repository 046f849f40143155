mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use chronoeval::gateway::{GatewayError, Mode};
use clap::{Args, Parser, Subcommand};

/// Scores text-to-image corpora on historical representation.
#[derive(Debug, Parser)]
#[command(name = "chronoeval", version)]
struct Cli {
    /// Run directory holding state and outputs.
    #[arg(long, global = true, value_name = "DIR")]
    run: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or validate the prompt grid.
    #[command(subcommand)]
    Manifest(ManifestCommand),
    /// Index a corpus of generated images.
    Ingest {
        #[arg(long, value_name = "DIR")]
        root: PathBuf,
        /// Index file overriding the directory layout.
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
    },
    /// Attach a sidecar observation file.
    Attach {
        #[arg(long, value_parser = ["styles", "embeddings", "faces", "annotations"])]
        kind: String,
        #[arg(long, value_name = "FILE")]
        file: PathBuf,
    },
    /// Visual style dominance.
    #[command(subcommand)]
    Style(StyleCommand),
    /// Anachronism proposal, verification and scoring.
    #[command(subcommand)]
    Anachronism(AnachronismCommand),
    /// Demographic deviation against language-model baselines.
    #[command(subcommand)]
    Demographics(DemographicsCommand),
    /// Validation statistics.
    #[command(subcommand)]
    Validate(ValidateCommand),
    /// Render report.json, report.md and CSV tables.
    Report {
        /// Another run whose style results are compared against this one.
        #[arg(long, value_name = "OTHER_RUN")]
        compare: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum ManifestCommand {
    /// Write the run's manifest (bundled grid unless --from is given).
    Build {
        #[arg(long, value_name = "FILE")]
        from: Option<PathBuf>,
        /// Write here instead of the run directory.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Validate a manifest file (the run's manifest by default).
    Validate { file: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
enum StyleCommand {
    Run(commands::style::StyleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EndpointArgs {
    /// Endpoint set file (TOML or JSON).
    #[arg(long, value_name = "CFG")]
    endpoints: PathBuf,
    /// Serve only from the response cache (default).
    #[arg(long, conflicts_with = "record")]
    replay: bool,
    /// Call endpoints on cache misses and record the replies.
    #[arg(long)]
    record: bool,
}

impl EndpointArgs {
    fn mode(&self) -> Mode {
        if self.record {
            Mode::Record
        } else {
            Mode::Replay
        }
    }
}

#[derive(Debug, Subcommand)]
enum AnachronismCommand {
    /// Ask the proposer endpoint for candidate anachronisms per prompt.
    Propose {
        #[command(flatten)]
        endpoints: EndpointArgs,
        /// Proposer endpoint id, overriding roles.proposer.
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Ask every verifier about every image.
    Verify {
        #[command(flatten)]
        endpoints: EndpointArgs,
    },
    /// Frequency, severity and overall rates.
    Score {
        /// Accepted for symmetry with the other stages; scoring is offline.
        #[arg(long, value_name = "CFG")]
        endpoints: Option<PathBuf>,
        #[arg(long, conflicts_with = "record")]
        replay: bool,
        #[arg(long)]
        record: bool,
        #[arg(long, default_value_t = chronoeval::report::DEFAULT_TOP_K)]
        top_k: usize,
    },
}

#[derive(Debug, Subcommand)]
enum DemographicsCommand {
    Run(commands::demographics::DemographicsArgs),
}

#[derive(Debug, Subcommand)]
enum ValidateCommand {
    /// Mean absolute error of baseline estimates against reference shares.
    Mae {
        #[arg(long, value_name = "CSV")]
        reference: PathBuf,
        /// Estimates CSV; derived from the run's baselines when omitted.
        #[arg(long, value_name = "CSV")]
        estimates: Option<PathBuf>,
    },
    /// Agreement between the attached faces sidecar and another classifier.
    Agreement {
        #[arg(long, value_name = "FACES")]
        other: PathBuf,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let run_dir = || {
        cli.run
            .clone()
            .ok_or_else(|| anyhow::anyhow!("--run DIR is required for this command"))
    };
    match cli.command {
        Command::Manifest(ManifestCommand::Validate { file }) => {
            commands::manifest::validate(file.as_deref(), cli.run.as_deref())
        }
        Command::Manifest(ManifestCommand::Build { from, out }) => match out {
            Some(out) => commands::manifest::build_to(from.as_deref(), &out),
            None => commands::manifest::build(&mut run::Run::open(&run_dir()?)?, from.as_deref()),
        },
        Command::Ingest { root, index } => {
            commands::corpus::ingest(&mut run::Run::open(&run_dir()?)?, &root, index.as_deref())
        }
        Command::Attach { kind, file } => {
            commands::corpus::attach(&mut run::Run::open(&run_dir()?)?, kind.parse()?, &file)
        }
        Command::Style(StyleCommand::Run(args)) => commands::style::run(&mut run::Run::open(&run_dir()?)?, &args),
        Command::Anachronism(cmd) => {
            let mut run = run::Run::open(&run_dir()?)?;
            match cmd {
                AnachronismCommand::Propose { endpoints, endpoint } => {
                    commands::anachronism::propose(&mut run, &endpoints.endpoints, endpoints.mode(), endpoint.as_deref())
                }
                AnachronismCommand::Verify { endpoints } => {
                    commands::anachronism::verify(&mut run, &endpoints.endpoints, endpoints.mode())
                }
                AnachronismCommand::Score { top_k, .. } => commands::anachronism::score(&mut run, top_k),
            }
        }
        Command::Demographics(DemographicsCommand::Run(args)) => {
            commands::demographics::run(&mut run::Run::open(&run_dir()?)?, &args)
        }
        Command::Validate(cmd) => {
            let mut run = run::Run::open(&run_dir()?)?;
            match cmd {
                ValidateCommand::Mae { reference, estimates } => {
                    commands::validate::mae(&mut run, &reference, estimates.as_deref())
                }
                ValidateCommand::Agreement { other } => commands::validate::agreement(&mut run, &other),
            }
        }
        Command::Report { compare } => commands::report::run(&mut run::Run::open(&run_dir()?)?, compare.as_deref()),
    }
}

/// 2 for failures of a remote endpoint, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let endpoint = err.chain().any(|cause| {
        cause.downcast_ref::<GatewayError>().is_some()
            || cause.downcast_ref::<chronoeval::Error>().is_some_and(chronoeval::Error::is_endpoint)
    });
    if endpoint {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
