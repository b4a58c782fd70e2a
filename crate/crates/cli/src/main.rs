//! `voicing`: command-line driver for the landmark voicing pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voicing::features::FeatureKind;
use voicing::models::ModelFamily;
use voicing::pipeline::{Pipeline, PipelineConfig, RunOptions};
use voicing::Error;

/// Consonant voicing detection at phonetic landmarks.
///
/// Stages run in order: synth (optional) -> landmarks -> extract -> train ->
/// evaluate -> report. Each stage writes a manifest and refuses stale
/// upstream outputs unless --force is given.
#[derive(Debug, Parser)]
#[command(name = "voicing", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline config (TOML). See configs/example.toml for every key.
    #[arg(long, global = true, default_value = "voicing.toml")]
    config: PathBuf,
    /// Run seed; overrides `seed` and propagates to synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Corpus id(s) to process; defaults to every corpus the experiment uses.
    #[arg(long, global = true)]
    corpus: Vec<String>,
    /// Feature variant: cues, mc13_whole, mc13_region, mc39_whole, mc39_region, fft1024, fb40 (extract also accepts `all`).
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Model family: svm, mlp or cnn.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Consume upstream outputs even if their manifests report them stale.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (0 = all cores); overrides `jobs`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic corpora declared in [synth.*].
    Synth,
    /// Derive landmark files from phone alignments.
    Landmarks,
    /// Extract feature CSVs at obstruent landmarks.
    Extract,
    /// Train a classifier on the train corpus.
    Train,
    /// Evaluate a trained model on the reference and test corpora.
    Evaluate {
        /// Model artifact to evaluate instead of the one `train` wrote.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Merge all evaluation reports into one comparison table.
    Report,
}

fn run(cli: Cli) -> voicing::Result<()> {
    let c = &cli.common;
    let mut config = PipelineConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        config.set_seed(seed);
    }
    let variant = c
        .variant
        .as_deref()
        .filter(|v| *v != "all")
        .map(str::parse::<FeatureKind>)
        .transpose()?
        .unwrap_or(config.experiment.variant);
    let family = c
        .model
        .as_deref()
        .map(str::parse::<ModelFamily>)
        .transpose()?
        .unwrap_or(config.experiment.model);
    let corpora = if c.corpus.is_empty() {
        config.experiment_corpora()
    } else {
        c.corpus.clone()
    };
    let pipeline = Pipeline::new(
        config,
        RunOptions {
            force: c.force,
            jobs: c.jobs,
            out_dir: c.out.clone(),
        },
    )?;

    match &cli.command {
        Command::Synth => {
            let only = match c.corpus.as_slice() {
                [] => None,
                [one] => Some(one.as_str()),
                _ => {
                    return Err(Error::InvalidArgument(
                        "synth takes at most one --corpus".into(),
                    ))
                }
            };
            for dir in pipeline.synth(only)? {
                println!("{}", dir.display());
            }
        }
        Command::Landmarks => {
            for s in pipeline.landmarks(&corpora)? {
                println!(
                    "{}: {} utterances, {} landmarks, {} obstruent",
                    s.corpus,
                    s.files.len(),
                    s.landmarks,
                    s.obstruent_landmarks
                );
            }
        }
        Command::Extract => {
            let kinds = if c.variant.as_deref() == Some("all") {
                FeatureKind::all()
            } else {
                vec![variant]
            };
            for kind in kinds {
                for path in pipeline.extract(&corpora, kind)? {
                    println!("{}", path.display());
                }
            }
        }
        Command::Train => println!("{}", pipeline.train(variant, family)?.display()),
        Command::Evaluate { artifact } => {
            let report = pipeline.evaluate(variant, family, artifact.as_deref())?;
            print!(
                "{}",
                voicing::eval::render_increment_table(std::slice::from_ref(&report))
            );
        }
        Command::Report => print!("{}", pipeline.report()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
