//! Command-line front end. `run` returns the process exit code: 0 on success,
//! 2 for usage and configuration errors, 1 for data errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{write_sidecar, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{self, render_confusion, split, EvalReport, SplitPlan};
use crate::experiment::{self, SessionSource};
use crate::features::{parse_selection, Dataset};
use crate::models::{self, ModelKind, TrainedModel};
use crate::synthgen::{self, io as session_io};

#[derive(Debug, Parser)]
#[command(name = "songdecode", version, about = "Song classification from EEG recordings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["10", "120"])]
    pub epoch_seconds: Option<String>,
    /// Comma-separated feature families (spectopo, wavedec, dfa, entropy)
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long, value_parser = ["knn", "tree", "gboost", "gnb", "mlp", "kmeans", "gmm"])]
    pub model: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-evaluate against an already consumed split plan
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GenerateArgs {
    #[arg(long)]
    pub subjects: Option<u32>,
    #[arg(long)]
    pub channels: Option<u32>,
    #[arg(long)]
    pub songs: Option<u32>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
    #[arg(long)]
    pub class_separation: Option<f64>,
    #[arg(long)]
    pub bad_channels: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic sessions to <out>/sessions
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenerateArgs,
    },
    /// Sessions to an epochs file
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Session root (default <out>/sessions)
        #[arg(long)]
        sessions: Option<PathBuf>,
    },
    /// Epochs file to a feature dataset CSV
    Features {
        #[command(flatten)]
        common: Common,
        /// Epochs file (default <out>/epochs.bin)
        #[arg(long)]
        epochs: Option<PathBuf>,
    },
    /// Dataset to a stratified split plan
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Dataset and plan to a model file
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Model, dataset and plan to report files; consumes the plan
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Report to confusion CSV and heatmap
    Report {
        #[command(flatten)]
        common: Common,
        /// Report JSON (default <out>/report.json)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Every stage in one seeded run
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenerateArgs,
        /// Session root; defaults to <out>/sessions when present, otherwise
        /// sessions are generated in memory
        #[arg(long)]
        sessions: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other),
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            eprintln!("run with --help for usage");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve(common: &Common, gen: Option<&GenerateArgs>) -> Result<RunConfig> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::MissingFile(p) => Error::Config(format!("config file {} not found", p.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(e) = &common.epoch_seconds {
        c.preprocess.epoch_seconds = e.parse().map_err(|_| Error::Config(format!("bad --epoch-seconds {e}")))?;
    }
    if let Some(f) = &common.features {
        c.features.families = parse_selection(f)?.into_iter().collect();
    }
    if let Some(m) = &common.model {
        c.model.kind = m.parse::<ModelKind>()?;
    }
    if let Some(f) = common.test_fraction {
        c.split.test_fraction = f;
    }
    if let Some(o) = &common.out {
        c.paths.out = o.clone();
    }
    if let Some(g) = gen {
        let gc = &mut c.generator;
        if let Some(v) = g.subjects {
            gc.n_subjects = v;
        }
        if let Some(v) = g.channels {
            gc.n_channels = v;
        }
        if let Some(v) = g.songs {
            gc.n_songs = v;
        }
        if let Some(v) = g.sample_rate {
            gc.sample_rate_hz = v;
        }
        if let Some(v) = g.class_separation {
            gc.class_separation = v;
        }
        if let Some(v) = g.bad_channels {
            gc.n_bad_channels = v;
        }
    }
    let c = c.resolve()?;
    fs::create_dir_all(&c.paths.out).map_err(|e| Error::io(&c.paths.out, e))?;
    log::info!("resolved configuration:\n{}", c.to_toml());
    Ok(c)
}

fn or_out(p: &Option<PathBuf>, c: &RunConfig, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| c.paths.out.join(name))
}

fn write_text(path: &Path, text: &str, c: &RunConfig) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    write_sidecar(path, c)?;
    Ok(())
}

fn write_report(report: &EvalReport, c: &RunConfig) -> Result<()> {
    let out = &c.paths.out;
    write_text(&out.join("report.txt"), &report.summary(), c)?;
    write_text(&out.join("report.json"), &report.to_json()?, c)?;
    let files = render_confusion(report, out)?;
    write_sidecar(&files.csv, c)?;
    write_sidecar(&files.pgm, c)?;
    println!("accuracy {:.2}% (chance {:.2}%) on {} test epochs", report.overall_accuracy, report.chance_accuracy, report.n_test);
    Ok(())
}

fn execute(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Generate { common, gen } => {
            let c = resolve(&common, Some(&gen))?;
            let root = c.paths.out.join("sessions");
            for s in 1..=c.generator.n_subjects {
                let session = synthgen::generate_session(&c.generator, s)?;
                let manifest = session_io::write_session(&session, &root)?;
                write_sidecar(&manifest, &c)?;
            }
            fs::write(root.join("run.toml"), c.to_toml()).map_err(|e| Error::io(&root, e))?;
            println!("wrote {} sessions to {}", c.generator.n_subjects, root.display());
        }
        Command::Preprocess { common, sessions } => {
            let c = resolve(&common, None)?;
            let root = or_out(&sessions, &c, "sessions");
            let source = SessionSource::directory(&root)?;
            let path = c.paths.out.join("epochs.bin");
            let n = experiment::write_epochs(&source, &c.preprocess, &path, &c.to_toml())?;
            write_sidecar(&path, &c)?;
            println!("wrote {n} epochs to {}", path.display());
        }
        Command::Features { common, epochs } => {
            let c = resolve(&common, None)?;
            let path = or_out(&epochs, &c, "epochs.bin");
            let ds = experiment::featurize_epochs_file(&path, &c.features.selection()?)?;
            let out = c.paths.out.join("dataset.csv");
            ds.write_csv(&out)?;
            write_sidecar(&out, &c)?;
            println!("wrote {} rows x {} features to {}", ds.n_rows(), ds.width(), out.display());
        }
        Command::Split { common, dataset } => {
            let c = resolve(&common, None)?;
            let ds = Dataset::read_csv(&or_out(&dataset, &c, "dataset.csv"))?;
            let plan = eval::plan_split(&ds, c.split.test_fraction, c.seed)?;
            let out = c.paths.out.join("plan.csv");
            plan.write(&out)?;
            write_sidecar(&out, &c)?;
            println!("wrote plan with {} test rows to {}", plan.test_indices().len(), out.display());
        }
        Command::Train { common, dataset, plan } => {
            let c = resolve(&common, None)?;
            let ds = Dataset::read_csv(&or_out(&dataset, &c, "dataset.csv"))?;
            let plan = SplitPlan::read(&or_out(&plan, &c, "plan.csv"))?;
            let (train, _) = plan.apply(&ds)?;
            let model = models::fit(&c.model, &train)?;
            let out = c.paths.out.join("model.json");
            model.save(&out)?;
            write_sidecar(&out, &c)?;
            println!("trained {} on {} rows", model.kind, train.n_rows());
        }
        Command::Evaluate { common, model_file, dataset, plan } => {
            let c = resolve(&common, None)?;
            let plan_path = or_out(&plan, &c, "plan.csv");
            split::check_unconsumed(&plan_path, common.force)?;
            let model = TrainedModel::load(&or_out(&model_file, &c, "model.json"))?;
            let ds = Dataset::read_csv(&or_out(&dataset, &c, "dataset.csv"))?;
            let plan = SplitPlan::read(&plan_path)?;
            let (_, test) = plan.apply(&ds)?;
            let report = eval::evaluate(&model, &test)?;
            write_report(&report, &c)?;
            split::mark_consumed(&plan_path)?;
        }
        Command::Report { common, report } => {
            let c = resolve(&common, None)?;
            let path = or_out(&report, &c, "report.json");
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let r = EvalReport::from_json(&text)?;
            let files = render_confusion(&r, &c.paths.out)?;
            write_sidecar(&files.csv, &c)?;
            write_sidecar(&files.pgm, &c)?;
            println!("wrote {} and {}", files.csv.display(), files.pgm.display());
        }
        Command::Pipeline { common, gen, sessions } => {
            let mut c = resolve(&common, Some(&gen))?;
            let default_sessions = c.paths.out.join("sessions");
            if sessions.is_some() {
                c.paths.sessions = sessions;
            } else if c.paths.sessions.is_none() && default_sessions.is_dir() {
                c.paths.sessions = Some(default_sessions);
            }
            let plan_path = c.paths.out.join("plan.csv");
            split::check_unconsumed(&plan_path, common.force)?;
            let out = experiment::run_experiment(&c)?;
            let dir = &c.paths.out;
            out.dataset.write_csv(&dir.join("dataset.csv"))?;
            write_sidecar(&dir.join("dataset.csv"), &c)?;
            out.plan.write(&plan_path)?;
            write_sidecar(&plan_path, &c)?;
            out.model.save(&dir.join("model.json"))?;
            write_sidecar(&dir.join("model.json"), &c)?;
            write_report(&out.report, &c)?;
            fs::write(dir.join("run.toml"), c.to_toml()).map_err(|e| Error::io(dir, e))?;
            split::mark_consumed(&plan_path)?;
        }
    }
    Ok(())
}
