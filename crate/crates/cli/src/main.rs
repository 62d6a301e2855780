//! `qrec`: manifest-driven experiments on return-time statistics.

mod error;
mod experiments;
mod manifest;
mod output;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;
use manifest::{ExperimentKind, Manifest, ModelSource};
use output::{io_err, summary_lines, write_all, VerdictFile};

const VERSION: &str = env!("QREC_VERSION");

#[derive(Parser)]
#[command(name = "qrec", version = VERSION, about = "Return-time experiments for random walks and Z-extensions of shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Toy model τ_ε samples and the E/|N| test.
    ToyTau(RunArgs),
    /// Toy model recurrence exponent from median τ_ε.
    ToyExponent(RunArgs),
    /// n-th return time of the simple walk, R_n/n².
    ToyRn(RunArgs),
    /// Build the Gibbs–Markov measure of a model.
    SftBuild(RunArgs),
    /// Twisted-operator curve, non-arithmeticity scan and σ².
    SftSpectral(RunArgs),
    /// Exact local-limit ratios by dynamic programming.
    ZextLlt(RunArgs),
    /// Z-extension return times at one k and the E/|N| shape test.
    ZextTau(RunArgs),
    /// Z-extension recurrence rate from median τ over k.
    ZextExponent(RunArgs),
    /// Cylinder return times and the exponential law.
    Hirata(RunArgs),
    /// Numerical checks of the renewal identities.
    LimitsVerify(RunArgs),
    /// Aggregate verdicts.json files into one pass/fail summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment manifest (JSON); omitted parameters take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the manifest).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "QREC_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Built-in model (overrides the manifest's model).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories or verdicts.json files.
    paths: Vec<PathBuf>,
    /// Also write the summary to this JSON file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_manifest(kind: ExperimentKind, args: &RunArgs) -> Result<Manifest, CliError> {
    let mut m = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let m = Manifest::from_json(&text)?;
            if m.experiment != kind {
                return Err(CliError::field(
                    "experiment",
                    format!("manifest is for {}, but the subcommand is {kind}", m.experiment),
                ));
            }
            m
        }
        None => Manifest::new(kind),
    };
    if let Some(seed) = args.seed {
        m.seed = seed;
    }
    if let Some(p) = &args.preset {
        m.model = Some(ModelSource::Preset(p.clone()));
    }
    if m.model.is_none() && kind.needs_model() {
        return Err(CliError::field("model", format!("{kind} needs a model: pass --preset or set \"model\"")));
    }
    Ok(m)
}

fn run_experiment(kind: ExperimentKind, args: &RunArgs) -> Result<bool, CliError> {
    let mut manifest = load_manifest(kind, args)?;
    let model = match &manifest.model {
        Some(src) => {
            let doc = src.document()?;
            Some(doc.build().map_err(|e| CliError::field(format!("{}.{}", src.path(), e.path), e.message))?)
        }
        None => None,
    };
    experiments::resolve(&mut manifest, &model)?;
    let pool = match args.workers {
        Some(0) => return Err(CliError::field("workers", "must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(CliError::run)?;
    let out = pool.install(|| experiments::run(&manifest, &model))?;
    let verdicts = VerdictFile::new(&manifest, out.verdicts.clone());
    let files = write_all(&args.out, &manifest, VERSION, out)?;
    println!("{kind} manifest_sha256={}", manifest.sha256());
    for line in summary_lines(&verdicts) {
        println!("  {line}");
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(verdicts.passed)
}

fn run_report(args: &ReportArgs) -> Result<bool, CliError> {
    let r = report::build(&args.paths)?;
    for run in &r.runs {
        let tag = if run.passed { "PASS" } else { "FAIL" };
        let failed = if run.failed.is_empty() { String::new() } else { format!(" failed: {}", run.failed.join(", ")) };
        println!("{tag} {} ({}){failed}", run.experiment, run.source);
    }
    println!("{}", if r.passed { "all runs passed" } else { "some runs failed" });
    if let Some(path) = &args.out {
        let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
        s.push('\n');
        fs::write(path, s).map_err(io_err(path))?;
    }
    Ok(r.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Report(a) => run_report(a),
        cmd => {
            let (kind, args) = match cmd {
                Command::ToyTau(a) => (ExperimentKind::ToyTau, a),
                Command::ToyExponent(a) => (ExperimentKind::ToyExponent, a),
                Command::ToyRn(a) => (ExperimentKind::ToyRn, a),
                Command::SftBuild(a) => (ExperimentKind::SftBuild, a),
                Command::SftSpectral(a) => (ExperimentKind::SftSpectral, a),
                Command::ZextLlt(a) => (ExperimentKind::ZextLlt, a),
                Command::ZextTau(a) => (ExperimentKind::ZextTau, a),
                Command::ZextExponent(a) => (ExperimentKind::ZextExponent, a),
                Command::Hirata(a) => (ExperimentKind::Hirata, a),
                Command::LimitsVerify(a) => (ExperimentKind::LimitsVerify, a),
                Command::Report(_) => unreachable!(),
            };
            run_experiment(kind, args)
        }
    };
    match result {
        // A completed experiment exits 0 whatever its verdicts; `report` gates.
        Ok(passed) => {
            if matches!(cli.command, Command::Report(_)) && !passed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
