//! The `emiim` command line.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 for any other
//! failure, with a one-line diagnostic on stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use emiim_core::context::{build_dataset_with, FeatureMaps, PipelineConfig, SocialContextConfig};
use emiim_core::domain::weekday_label;
use emiim_core::eval::{compare_models, cross_validate, CvOptions};
use emiim_core::forest::ForestConfig;
use emiim_core::model::{ModelSpec, TrainedModel};
use emiim_core::segmentation::{SegmentationConfig, WEEK};
use emiim_core::synth::{generate, GenReport, PlantedRuleSet};
use emiim_core::tree::TreeConfig;
use emiim_core::{BehaviorClass, CallRecord, ContextVector};

use crate::error::{Error, Result};
use crate::log::{read_log_file, write_dataset, write_log, LogFormatSpec};
use crate::model_file::{load_model, save_model};
use crate::report;
use crate::scenario::{builtin, read_scenario_file};

#[derive(Debug, Parser)]
#[command(name = "emiim", version, about = "Context-aware call behavior models from phone logs")]
pub struct Cli {
    /// Seed for folds, forests and synthetic logs.
    #[arg(long, global = true, env = "EMIIM_SEED")]
    pub seed: Option<u64>,

    /// Leave out the `# generated` line in report files.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    /// Field delimiter of log and dataset files.
    #[arg(long, global = true, default_value_t = ',')]
    pub delimiter: char,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label a call log and write the context dataset.
    Ingest {
        #[arg(long)]
        log: PathBuf,
        /// Dataset file to write; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Fit and print the time segmentation of a log.
    Segment {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Generate a synthetic log from a planted-rule scenario.
    Synth {
        /// Built-in scenario name or path to a scenario file.
        #[arg(long, default_value = "alice")]
        scenario: String,
        /// Number of calls to generate.
        #[arg(long)]
        records: Option<usize>,
        /// Label flip probability.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar; defaults to `<out>.truth.csv`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train a model on a log and save it.
    Train {
        #[arg(long, value_enum)]
        model: ModelChoice,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Cross-validate one model on a log.
    Evaluate {
        #[arg(long, value_enum)]
        model: ModelChoice,
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        cv: CvArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Cross-validate MIIM and E-MIIM on the same folds of every log.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        logs: Vec<PathBuf>,
        #[command(flatten)]
        cv: CvArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Predict the behavior for one context with a saved model.
    Predict {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// For example `segment=S2,day=Mon,location=office,contact=C1`.
        #[arg(long)]
        context: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Miim,
    #[value(alias = "e-miim")]
    Emiim,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Base time-slot width in minutes.
    #[arg(long, default_value_t = 60)]
    pub granularity: u32,
    /// Fit one timeline shared by all days instead of one per weekday.
    #[arg(long)]
    pub shared_timeline: bool,
    /// Number of frequent contacts given their own id.
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Calls needed before a contact can get its own id.
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            segmentation: SegmentationConfig {
                base_granularity_min: self.granularity,
                per_day: !self.shared_timeline,
            },
            social: SocialContextConfig {
                top_k: self.top_k,
                min_count: self.min_count,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct LearnerArgs {
    /// Trees in the forest.
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    /// Features sampled per split; floor(sqrt(D)) if omitted.
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Train every tree on the full training set.
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub min_gain: f64,
}

impl LearnerArgs {
    fn tree(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_gain: self.min_gain,
            feature_subset_size: None,
        }
    }

    fn forest(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_features: self.max_features,
            bootstrap: !self.no_bootstrap,
            tree: self.tree(),
            master_seed: seed,
        }
    }

    fn spec(&self, choice: ModelChoice, seed: u64) -> ModelSpec {
        match choice {
            ModelChoice::Miim => ModelSpec::Miim { tree: self.tree(), seed },
            ModelChoice::Emiim => ModelSpec::Emiim(self.forest(seed)),
        }
    }
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Keep class proportions equal across folds.
    #[arg(long)]
    pub stratify: bool,
    /// Directory for report files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Runs the CLI with the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI writing normal output to `out` and diagnostics to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "emiim: {e}");
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn log_spec(cli: &Cli) -> Result<LogFormatSpec> {
    u8::try_from(cli.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .map(|delimiter| LogFormatSpec { delimiter })
        .ok_or_else(|| Error::Usage(format!("delimiter {:?} must be a single ASCII character", cli.delimiter)))
}

fn load_records(path: &Path, spec: &LogFormatSpec, err: &mut dyn Write) -> Result<Vec<CallRecord>> {
    let parsed = read_log_file(path, spec)?;
    for s in &parsed.skipped {
        writeln!(err, "{}:{}: skipped row: {}", path.display(), s.line, s.reason)?;
    }
    Ok(parsed.records)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "log".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_report(path: &Path, body: &str, timestamp: bool) -> Result<()> {
    let text = if timestamp {
        format!("{}{body}", report::timestamp_line())
    } else {
        body.to_string()
    };
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let spec = log_spec(cli)?;
    match &cli.command {
        Command::Ingest { log, out: dest, pipeline } => {
            let records = load_records(log, &spec, err)?;
            let maps = FeatureMaps::fit(&records, &pipeline.config())?;
            let dataset = build_dataset_with(&stem(log), &records, &maps)?;
            match dest {
                Some(path) => {
                    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
                    write_dataset(&dataset, std::io::BufWriter::new(file), &spec)?;
                }
                None => write_dataset(&dataset, &mut *out, &spec)?,
            }
            let c = dataset.class_counts();
            writeln!(
                err,
                "{} records, {} labeled (accept {}, reject {}, missed {})",
                records.len(),
                dataset.len(),
                c.get(BehaviorClass::Accept),
                c.get(BehaviorClass::Reject),
                c.get(BehaviorClass::Missed)
            )?;
        }
        Command::Segment { log, out: dest, pipeline } => {
            let records = load_records(log, &spec, err)?;
            let maps = FeatureMaps::fit(&records, &pipeline.config())?;
            let text = segment_lines(&maps);
            match dest {
                Some(path) => fs::write(path, text).map_err(|e| Error::file(path, e))?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Synth {
            scenario,
            records,
            noise,
            out: dest,
            truth,
        } => {
            let mut rules = match builtin(scenario) {
                Some(r) => r,
                None => read_scenario_file(Path::new(scenario))?,
            };
            if let Some(m) = records {
                rules.n_records = *m;
            }
            if let Some(e) = noise {
                rules.noise = *e;
            }
            if let Some(s) = cli.seed {
                rules.seed = s;
            }
            let (calls, gen) = generate(&rules)?;
            let file = fs::File::create(dest).map_err(|e| Error::file(dest, e))?;
            write_log(&calls, std::io::BufWriter::new(file), &spec)?;
            let truth_path = truth.clone().unwrap_or_else(|| {
                let mut p = dest.clone().into_os_string();
                p.push(".truth.csv");
                PathBuf::from(p)
            });
            fs::write(&truth_path, truth_csv(&rules, &calls, &gen)).map_err(|e| Error::file(&truth_path, e))?;
            let t = gen.tally;
            writeln!(
                out,
                "{} calls: accept {}, reject {}, missed {}; {} labels flipped ({:.3})",
                calls.len(),
                t.get(BehaviorClass::Accept),
                t.get(BehaviorClass::Reject),
                t.get(BehaviorClass::Missed),
                gen.flips,
                gen.flip_fraction()
            )?;
        }
        Command::Train {
            model,
            log,
            out: dest,
            pipeline,
            learner,
        } => {
            let records = load_records(log, &spec, err)?;
            let spec = learner.spec(*model, seed);
            let trained = TrainedModel::train(&stem(log), &records, &pipeline.config(), &spec)?;
            save_model(&trained, dest)?;
            writeln!(out, "{} model written to {}", trained.kind(), dest.display())?;
        }
        Command::Evaluate {
            model,
            log,
            cv,
            pipeline,
            learner,
        } => {
            let records = load_records(log, &spec, err)?;
            let opts = cv_options(cv, seed);
            let rep = cross_validate(&records, &pipeline.config(), &learner.spec(*model, seed), &opts)?;
            let table = report::eval_table(&rep);
            out.write_all(table.as_bytes())?;
            ensure_dir(&cv.out_dir)?;
            let base = format!("{}.{}", stem(log), model_slug(*model));
            write_report(&cv.out_dir.join(format!("{base}.eval.txt")), &table, !cli.no_timestamp)?;
            write_report(
                &cv.out_dir.join(format!("{base}.eval.csv")),
                &report::eval_csv(&rep),
                !cli.no_timestamp,
            )?;
        }
        Command::Compare {
            logs,
            cv,
            pipeline,
            learner,
        } => {
            let mut named = Vec::with_capacity(logs.len());
            for path in logs {
                named.push((stem(path), load_records(path, &spec, err)?));
            }
            let opts = cv_options(cv, seed);
            let cmp = compare_models(&named, &pipeline.config(), &learner.tree(), &learner.forest(seed), &opts)?;
            let table = report::comparison_table(&cmp);
            out.write_all(table.as_bytes())?;
            ensure_dir(&cv.out_dir)?;
            write_report(&cv.out_dir.join("comparison.txt"), &table, !cli.no_timestamp)?;
            write_report(
                &cv.out_dir.join("comparison.csv"),
                &report::comparison_csv(&cmp),
                !cli.no_timestamp,
            )?;
        }
        Command::Predict { model, context } => {
            let trained = load_model(model)?;
            let ctx = parse_context(context, &trained.feature_names)?;
            let (class, votes) = trained.predict(&ctx);
            writeln!(
                out,
                "{} (class {})\nvotes: accept {}, reject {}, missed {}",
                class.name(),
                class.id(),
                votes.get(BehaviorClass::Accept),
                votes.get(BehaviorClass::Reject),
                votes.get(BehaviorClass::Missed)
            )?;
        }
    }
    Ok(())
}

fn cv_options(cv: &CvArgs, seed: u64) -> CvOptions {
    CvOptions {
        k: cv.k,
        seed,
        stratify: cv.stratify,
    }
}

fn model_slug(choice: ModelChoice) -> &'static str {
    match choice {
        ModelChoice::Miim => "miim",
        ModelChoice::Emiim => "emiim",
    }
}

/// `day start end segment_id dominant_class`, one line per segment, with
/// times as `HH:MM`. A shared timeline is printed under the day `all`.
pub fn segment_lines(maps: &FeatureMaps) -> String {
    let seg = &maps.segmentation;
    let days: Vec<&str> = if seg.per_day() {
        WEEK.iter().map(|d| weekday_label(*d)).collect()
    } else {
        vec!["all"]
    };
    let mut text = String::new();
    for (day, timeline) in days.iter().zip(seg.timelines()) {
        for s in timeline {
            text.push_str(&format!(
                "{day} {} {} {} {}\n",
                hhmm(s.start_minute),
                hhmm(s.end_minute),
                s.id,
                s.dominant.map_or("none", BehaviorClass::name)
            ));
        }
    }
    text
}

fn hhmm(minute: u32) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

/// Parses `name=value` pairs into a context vector ordered like
/// `feature_names`. Every feature must be given exactly once.
pub fn parse_context(text: &str, feature_names: &[String]) -> Result<ContextVector> {
    let mut values: Vec<Option<String>> = vec![None; feature_names.len()];
    for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("context entry {pair:?} is not name=value")))?;
        let i = feature_names
            .iter()
            .position(|f| f.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| Error::Usage(format!("unknown context feature {name:?}")))?;
        if values[i].replace(value.trim().to_string()).is_some() {
            return Err(Error::Usage(format!("context feature {name:?} given twice")));
        }
    }
    values
        .into_iter()
        .zip(feature_names)
        .map(|(v, name)| v.ok_or_else(|| Error::Usage(format!("context is missing {name:?}"))))
        .collect()
}

/// One row per generated call, aligned with the log file.
pub fn truth_csv(rules: &PlantedRuleSet, calls: &[CallRecord], gen: &GenReport) -> String {
    let mut text = String::from("row,timestamp,slot,day,location,contact,rule,rule_class,emitted_class,flipped\n");
    for (i, (call, t)) in calls.iter().zip(&gen.truth).enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            i + 1,
            call.timestamp().format("%Y-%m-%dT%H:%M"),
            rules.slots[t.context.slot].name,
            weekday_label(t.context.day),
            rules.locations[t.context.location].name,
            rules.contacts[t.context.contact].name,
            t.rule.map_or_else(|| "default".to_string(), |r| (r + 1).to_string()),
            t.rule_class.name(),
            t.emitted_class.name(),
            t.flipped()
        ));
    }
    text
}
