//! `dyadsense`: one binary, one subcommand per pipeline stage.
//!
//! Results go to stdout unless `--out-dir` is given, in which case each
//! subcommand writes a fixed file name inside it. Exit status is 0 on
//! success, 1 on a runtime or model failure and 2 on bad input.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dyadsense_core::dsp::{read_wav, write_features_csv, write_features_jsonl, MfccExtractor};
use dyadsense_core::emotion::io::{read_feature_sets_csv, read_labels_csv, write_jsonl};
use dyadsense_core::emotion::{
    align_labels, evaluate_emotion, train_emotion_classifier, Axis, EmotionClassifier, EmotionTrainConfig, ModelKind,
};
use dyadsense_core::sim::{
    generate_scenario, run_battery, run_simulation, train_default_vad, BatteryReport, SpeechSource,
};
use dyadsense_core::trigger::write_actions_jsonl;
use dyadsense_core::vad::{
    detect_speech, load_model, model_to_json, read_labeled_csv, train_linear_svm, LinearSvmModel,
};
use dyadsense_core::{Error, Execution, PipelineConfig};
use sha2::{Digest, Sha256};

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "dyadsense", about = "Dyadic interaction sensing pipeline", disable_version_flag = true)]
struct Cli {
    /// Pipeline configuration (TOML). Missing sections take defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for anything random; overrides seeds in the config [default: 42].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write results into this directory instead of stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    /// Print the version and the hash of the effective configuration.
    #[arg(short = 'V', long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// MFCC features of a 16-bit PCM WAV file.
    Mfcc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
    },
    /// Train the linear-SVM speech detector.
    VadTrain {
        /// Labelled feature CSV (`label,f0,...`); without it a synthetic
        /// tone-stack/noise corpus is generated from the seed.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Detect speech segments in a WAV file.
    VadRun {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Train a valence or arousal classifier from feature and label CSVs.
    EmotionTrain {
        #[command(flatten)]
        data: EmotionData,
        #[arg(long)]
        axis: Axis,
        #[arg(long, default_value = "svm")]
        model: ModelKind,
        /// Fit a mean imputer so sessions with absent modalities can be classified.
        #[arg(long)]
        impute: bool,
    },
    /// Score a trained classifier on labelled sessions.
    EmotionEval {
        #[command(flatten)]
        data: EmotionData,
        #[arg(long)]
        classifier: PathBuf,
    },
    /// Run a battery of simulated days and write the report as JSON.
    Simulate {
        #[arg(long, default_value_t = 1)]
        scenarios: u64,
        /// Interaction density; overrides the config.
        #[arg(long)]
        density: Option<f64>,
        /// Speech detector; trained on the synthetic corpus when omitted.
        #[arg(long, conflicts_with = "oracle_speech")]
        model: Option<PathBuf>,
        /// Use ground-truth speech instead of a detector.
        #[arg(long)]
        oracle_speech: bool,
        /// Write every intermediate stream as JSONL under `<out-dir>/traces`.
        #[arg(long, requires = "out_dir")]
        dump_traces: bool,
        /// Run scenarios one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Render a simulation report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Debug, Args)]
struct EmotionData {
    /// Feature CSV: `session_id` then `modality.feature` columns.
    #[arg(long)]
    features: PathBuf,
    /// Label CSV: `session_id,valence,arousal`.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already print their cause
            let mut parts = Vec::new();
            for cause in e.chain() {
                parts.push(cause.to_string());
                if cause.is::<Error>() {
                    break;
                }
            }
            eprintln!("error: {}", parts.join(": "));
            let input = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .is_some_and(Error::is_input_error);
            ExitCode::from(if input { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.svm.seed = seed;
        cfg.forest.seed = seed;
    }
    Ok(cfg)
}

fn config_hash(cfg: &PipelineConfig) -> Result<String, Error> {
    let digest = Sha256::digest(cfg.to_toml()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

/// Writes to `<out-dir>/<name>` or to stdout.
fn emit(out_dir: Option<&Path>, name: &str, body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().with_context(|| format!("writing {}", path.display()))?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn json_line<T: serde::Serialize>(w: &mut dyn Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    if cli.version {
        println!("dyadsense {} (config sha256 {})", env!("CARGO_PKG_VERSION"), config_hash(&cfg)?);
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Error::Config("no subcommand given; see --help".into()).into());
    };
    let out_dir = cli.out_dir.as_deref();
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let exec = Execution::default();

    match command {
        Command::Mfcc { input, out } => {
            let audio = read_wav(input)?;
            let features = MfccExtractor::new(cfg.mfcc.clone())?.extract_with(&audio, exec)?;
            log::info!("{} frames from {}", features.len(), input.display());
            let (ext, jsonl) = match out {
                Format::Csv => ("csv", false),
                Format::Jsonl => ("jsonl", true),
            };
            emit(out_dir, &format!("{}.mfcc.{ext}", stem(input)), |w| {
                if jsonl {
                    write_features_jsonl(w, &features)?;
                } else {
                    write_features_csv(w, &features)?;
                }
                Ok(())
            })
        }
        Command::VadTrain { data } => {
            let (model, report) = match data {
                Some(path) => {
                    let set = read_labeled_csv(open(path)?, &path.display().to_string())?;
                    train_linear_svm(&set, &cfg.svm)?
                }
                None => train_default_vad(seed, &cfg.sim.audio, &cfg.mfcc, &cfg.svm, exec)?,
            };
            log::info!("objective by epoch: {:?}", report.epoch_objectives);
            let text = model_to_json(&model)?;
            emit(out_dir, "vad_model.json", |w| Ok(writeln!(w, "{text}")?))
        }
        Command::VadRun { model, input } => {
            let model = load_model(model)?;
            let audio = read_wav(input)?;
            let extractor = MfccExtractor::new(cfg.mfcc.clone())?;
            let segments = detect_speech(&audio, &extractor, &model, &cfg.hysteresis, exec)?;
            emit(out_dir, &format!("{}.segments.json", stem(input)), |w| json_line(w, &segments))
        }
        Command::EmotionTrain { data, axis, model, impute } => {
            let (schema, sets) = read_feature_sets_csv(open(&data.features)?, &data.features.display().to_string())?;
            let labels = read_labels_csv(open(&data.labels)?, &data.labels.display().to_string())?;
            let y: Vec<bool> = align_labels(&sets, &labels)?.iter().map(|l| l.on(*axis)).collect();
            let train_cfg = EmotionTrainConfig {
                model: *model,
                svm: cfg.svm.clone(),
                forest: cfg.forest.clone(),
                impute: *impute,
            };
            let clf = train_emotion_classifier(&sets, &y, *axis, &schema, &train_cfg, exec)?;
            let text = clf.to_json()?;
            emit(out_dir, &format!("emotion_{}.json", axis_name(*axis)), |w| Ok(writeln!(w, "{text}")?))
        }
        Command::EmotionEval { data, classifier } => {
            let clf = EmotionClassifier::from_json(&read_text(classifier)?, &classifier.display().to_string())?;
            let (_, sets) = read_feature_sets_csv(open(&data.features)?, &data.features.display().to_string())?;
            let labels = read_labels_csv(open(&data.labels)?, &data.labels.display().to_string())?;
            let eval = evaluate_emotion(&clf, &sets, &labels)?;
            emit(out_dir, "emotion_eval.json", |w| json_line(w, &eval))
        }
        Command::Simulate { scenarios, density, model, oracle_speech, dump_traces, sequential } => {
            let mut cfg = cfg;
            if let Some(d) = density {
                cfg.sim.density = *d;
            }
            cfg.validate()?;
            if *scenarios == 0 {
                return Err(Error::Config("--scenarios must be >= 1".into()).into());
            }
            let detector: Option<LinearSvmModel> = match (model, oracle_speech) {
                (_, true) => None,
                (Some(path), false) => Some(load_model(path)?),
                (None, false) => Some(train_default_vad(cfg.svm.seed, &cfg.sim.audio, &cfg.mfcc, &cfg.svm, exec)?.0),
            };
            let source = Some(detector.as_ref().map_or(SpeechSource::Oracle, SpeechSource::Model));
            let seeds: Vec<u64> = (0..*scenarios).map(|i| seed + i).collect();
            let exec = if *sequential { Execution::Sequential } else { exec };
            let report = if *dump_traces {
                let dir = out_dir.expect("clap enforces --out-dir").join("traces");
                let reports = seeds
                    .iter()
                    .map(|&s| {
                        let scenario = generate_scenario(s, &cfg.sim)?;
                        let run = run_simulation(&scenario, &cfg, source, true)?;
                        dump_traces_for(&dir.join(format!("seed-{s}")), &run)?;
                        Ok(run.report)
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                BatteryReport::from_reports(reports)
            } else {
                run_battery(&seeds, &cfg.sim, &cfg, source, exec)?
            };
            emit(out_dir, "report.json", |w| json_line(w, &report))
        }
        Command::Report { input, format } => {
            let report: BatteryReport = serde_json::from_str(&read_text(input)?).map_err(|e| Error::Parse {
                context: input.display().to_string(),
                message: e.to_string(),
            })?;
            match format {
                ReportFormat::Table => emit(out_dir, "report.txt", |w| Ok(write!(w, "{}", report.to_table())?)),
                ReportFormat::Csv => emit(out_dir, "report.csv", |w| Ok(write!(w, "{}", report.to_csv())?)),
            }
        }
    }
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Valence => "valence",
        Axis::Arousal => "arousal",
    }
}

fn dump_traces_for(dir: &Path, run: &dyadsense_core::sim::SimRun) -> anyhow::Result<()> {
    let Some(traces) = &run.traces else {
        bail!("simulation returned no traces");
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> anyhow::Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };
    write_jsonl(create("rssi.jsonl")?, &traces.rssi)?;
    write_jsonl(create("transitions.jsonl")?, &traces.transitions)?;
    write_jsonl(create("segments.jsonl")?, &traces.segments)?;
    write_jsonl(create("events.jsonl")?, &traces.events)?;
    write_jsonl(create("hr.jsonl")?, &traces.hr)?;
    write_jsonl(create("sessions.jsonl")?, &run.sessions)?;
    let mut actions = create("actions.jsonl")?;
    write_actions_jsonl(&mut actions, &run.actions)?;
    actions.flush()?;
    Ok(())
}
