//! `emotag`: extract music-part features, rank label separability, and train
//! and evaluate the emotion classifier.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use emotag_core::analysis::{emit_reports, label_summary, pairwise_max_separability};
use emotag_core::classifier::{loocv, SvmModel};
use emotag_core::dataset::FeatureTable;
use emotag_core::features::extract_features;
use emotag_core::pipeline::{dump_spectrogram, extract_manifest, load_part, read_manifest};
use emotag_core::{synth, Emotion, Error, FeatureSchema, KernelKind, LabeledDataset, StdConvention};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "emotag", version, about = "Music emotion features, separability analysis and SVM tagging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct TrainFlags {
    /// SVM kernel.
    #[arg(long)]
    kernel: Option<KernelKind>,

    /// Soft-margin penalty C.
    #[arg(long)]
    c: Option<f64>,

    /// RBF width; defaults to 1 / (features * mean variance).
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the feature table for every row of a manifest.
    Extract {
        /// CSV with columns path,label[,start].
        #[arg(long)]
        manifest: PathBuf,
        /// Output table; a .json extension selects the JSON layout.
        #[arg(long)]
        out: PathBuf,
        /// Also write each part's spectrogram as <dir>/<row>.csv.
        #[arg(long, value_name = "DIR")]
        dump_spectrogram: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Pairwise maximum Fisher separability of the labels.
    Separability {
        /// Labelled feature table.
        #[arg(long)]
        features: PathBuf,
        /// Directory for the matrix, group, summary and text reports.
        #[arg(long)]
        out: PathBuf,
        /// Standard deviation for the per-label summary.
        #[arg(long, value_enum)]
        std: Option<StdArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a one-vs-one SVM on a labelled feature table.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out cross-validation on a labelled feature table.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        /// Directory for accuracy.csv and confusion.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Label WAV files or the rows of a feature table with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Feature table to label instead of audio files.
        #[arg(long, conflicts_with = "wavs")]
        features: Option<PathBuf>,
        /// WAV files to label.
        wavs: Vec<PathBuf>,
        /// Part start in seconds for WAV inputs.
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        /// Also write part_id,label rows to this CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic feature table (for trying the pipeline out).
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Clusters)]
        kind: SynthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rows per label.
        #[arg(long, default_value_t = 20)]
        per_label: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StdArg {
    Population,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Six unit-variance clusters 8 sigma apart.
    Clusters,
    /// Standard-normal features with balanced random labels.
    Noise,
    /// Happy vs sad, separated only by tempo_bpm (Fisher ratio 2).
    Gap,
}

/// A failed command and the exit code family it belongs to.
enum Failure {
    /// Bad flags, unreadable inputs, schema mismatches: exit 2.
    Usage(anyhow::Error),
    /// Processing failures on otherwise valid inputs: exit 1.
    Data(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let usage = e.is_schema()
            || matches!(e, Error::Io { .. } | Error::Model(_) | Error::InvalidParameter(_) | Error::Csv(_));
        if usage {
            Failure::Usage(e.into())
        } else {
            Failure::Data(e.into())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(e: anyhow::Error) -> Failure {
    Failure::Usage(e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn setup(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(common.config.as_deref()).map_err(usage)?;
    if common.jobs.is_some() {
        cfg.jobs = common.jobs;
    }
    cfg.features.validate()?;
    if let Some(jobs) = cfg.jobs {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, flags: &TrainFlags) -> Result<(), Failure> {
    if let Some(k) = flags.kernel {
        cfg.train.kernel = k;
    }
    if let Some(c) = flags.c {
        cfg.train.c = c;
    }
    if flags.gamma.is_some() {
        cfg.train.gamma = flags.gamma;
    }
    cfg.train.validate()?;
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn read_table(path: &Path, schema: std::sync::Arc<FeatureSchema>) -> Result<FeatureTable, Failure> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let table = if is_json(path) {
        FeatureTable::read_json(reader, schema)
    } else {
        FeatureTable::read_csv(reader, schema)
    };
    table.map_err(|e| Failure::Usage(anyhow!(e).context(format!("reading {}", path.display()))))
}

fn read_dataset(path: &Path, cfg: &RunConfig) -> Result<LabeledDataset, Failure> {
    let table = read_table(path, cfg.features.schema())?;
    Ok(LabeledDataset::from_table(table)?)
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Extract {
            manifest,
            out,
            dump_spectrogram,
            common,
        } => cmd_extract(&manifest, &out, dump_spectrogram.as_deref(), &common),
        Command::Separability {
            features,
            out,
            std,
            common,
        } => cmd_separability(&features, &out, std, &common),
        Command::Train {
            features,
            out,
            train,
            common,
        } => cmd_train(&features, &out, &train, &common),
        Command::Evaluate {
            features,
            out,
            train,
            common,
        } => cmd_evaluate(&features, out.as_deref(), &train, &common),
        Command::Predict {
            model,
            features,
            wavs,
            start,
            out,
            common,
        } => cmd_predict(&model, features.as_deref(), &wavs, start, out.as_deref(), &common),
        Command::Synth {
            kind,
            seed,
            per_label,
            out,
        } => cmd_synth(kind, seed, per_label, &out),
    }
}

fn cmd_extract(manifest: &Path, out: &Path, dump: Option<&Path>, common: &Common) -> CmdResult {
    let cfg = setup(common)?;
    let rows = read_manifest(manifest)
        .map_err(|e| Failure::Usage(anyhow!(e).context(format!("reading manifest {}", manifest.display()))))?;
    let (table, failures) = extract_manifest(&rows, &cfg.features, cfg.jobs.unwrap_or(0))?;

    let mut w = create(out)?;
    if is_json(out) {
        table.write_json(&mut w)?;
    } else {
        table.write_csv(&mut w)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    if let Some(dir) = dump {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, row) in rows.iter().enumerate() {
            if failures.iter().any(|f| f.row == i) {
                continue;
            }
            let part = load_part(&row.resolved, row.start, &row.part_id(), &cfg.features)?;
            dump_spectrogram(&part, &cfg.features, &dir.join(format!("{i}.csv")))?;
        }
    }

    eprintln!("extracted {} of {} parts into {}", table.rows.len(), rows.len(), out.display());
    if failures.is_empty() {
        return Ok(());
    }
    for f in &failures {
        eprintln!("  failed: {} (manifest row {}): {}", f.path, f.row + 1, f.error);
    }
    Err(Failure::Data(anyhow!("{} of {} files failed", failures.len(), rows.len())))
}

fn cmd_separability(features: &Path, out: &Path, std: Option<StdArg>, common: &Common) -> CmdResult {
    let cfg = setup(common)?;
    let ds = read_dataset(features, &cfg)?;
    let convention = match std {
        Some(StdArg::Population) => StdConvention::Population,
        Some(StdArg::Sample) => StdConvention::Sample,
        None => cfg.analysis.std,
    };
    let matrix = pairwise_max_separability(&ds)?;
    let summary = label_summary(&matrix, convention);
    let paths = emit_reports(out, &matrix, &summary, ds.schema().names())?;
    print!("{}", fs::read_to_string(&paths.text).map_err(|e| Error::io(&paths.text, e))?);
    Ok(())
}

fn cmd_train(features: &Path, out: &Path, flags: &TrainFlags, common: &Common) -> CmdResult {
    let mut cfg = setup(common)?;
    apply_train_flags(&mut cfg, flags)?;
    let ds = read_dataset(features, &cfg)?;
    ds.require_two_per_label()?;
    let model = SvmModel::train(&ds, &cfg.train)?;
    if !model.all_converged() {
        eprintln!("warning: some pairwise machines hit the iteration limit");
    }
    let mut w = create(out)?;
    model.save(&mut w)?;
    w.flush().map_err(|e| Error::io(out, e))?;
    eprintln!(
        "trained {} machines over {} classes on {} rows; model written to {}",
        model.machines.len(),
        model.classes.len(),
        ds.len(),
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(features: &Path, out: Option<&Path>, flags: &TrainFlags, common: &Common) -> CmdResult {
    let mut cfg = setup(common)?;
    apply_train_flags(&mut cfg, flags)?;
    let ds = read_dataset(features, &cfg)?;
    let report = loocv(&ds, &cfg.train)?;
    let accuracy = report.accuracy_csv();
    let confusion = report.confusion_text();
    print!("{accuracy}\n{confusion}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("accuracy.csv", &accuracy), ("confusion.txt", &confusion)] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

fn cmd_predict(
    model_path: &Path,
    features: Option<&Path>,
    wavs: &[PathBuf],
    start: f64,
    out: Option<&Path>,
    common: &Common,
) -> CmdResult {
    let cfg = setup(common)?;
    let file = File::open(model_path)
        .map_err(|e| Failure::Usage(anyhow!(e).context(format!("opening model {}", model_path.display()))))?;
    let model = SvmModel::load(BufReader::new(file))?;

    let mut results: Vec<(String, Result<Emotion, Error>)> = Vec::new();
    match features {
        Some(path) => {
            let table = read_table(path, cfg.features.schema())?;
            for row in table.rows {
                let label = model.predict(&row.values);
                results.push((row.part_id, label));
            }
        }
        None if wavs.is_empty() => {
            return Err(usage(anyhow!("give WAV files or --features")));
        }
        None => {
            for wav in wavs {
                let id = format!("{}@{}", wav.display(), emotag_core::dataset::format_sig9(start));
                let label = load_part(wav, start, &id, &cfg.features)
                    .and_then(|part| extract_features(&part, &cfg.features.features))
                    .and_then(|v| model.predict(v.values()));
                results.push((id, label));
            }
        }
    }

    let mut failed = 0;
    let mut csv = String::from("part_id,label\n");
    for (id, label) in &results {
        match label {
            Ok(label) => {
                println!("{id}\t{label}");
                csv.push_str(&format!("{id},{label}\n"));
            }
            Err(Error::Dimension { expected, got }) => {
                return Err(usage(anyhow!(
                    "model expects {expected} features, input has {got}"
                )));
            }
            Err(e) => {
                failed += 1;
                eprintln!("  failed: {id}: {e}");
            }
        }
    }
    if let Some(out) = out {
        let mut w = create(out)?;
        w.write_all(csv.as_bytes()).map_err(|e| Error::io(out, e))?;
        w.flush().map_err(|e| Error::io(out, e))?;
    }
    if failed > 0 {
        return Err(Failure::Data(anyhow!("{failed} of {} inputs failed", results.len())));
    }
    Ok(())
}

fn cmd_synth(kind: SynthKind, seed: u64, per_label: usize, out: &Path) -> CmdResult {
    let ds = match kind {
        SynthKind::Clusters => synth::gaussian_clusters(seed, &Emotion::ALL, per_label, 8.0),
        SynthKind::Noise => synth::random_label_noise(seed, per_label * Emotion::ALL.len()),
        SynthKind::Gap => {
            let column = FeatureSchema::standard().index_of("tempo_bpm").expect("standard column");
            synth::single_feature_gap(seed, (Emotion::Happy, Emotion::Sad), per_label, column, 2.0)
        }
    };
    let mut w = create(out)?;
    let table = ds.into_table();
    if is_json(out) {
        table.write_json(&mut w)?;
    } else {
        table.write_csv(&mut w)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(())
}
