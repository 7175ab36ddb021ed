//! `rotordiag`: scripted, reproducible rotor-noise fault-diagnosis runs.
//!
//! Every command is a thin adapter over the library pipeline. All randomness
//! derives from `--seed` (or `ROTORDIAG_SEED`), so repeating a command with
//! identical flags reproduces its checkpoints, images, and reports byte for
//! byte.
//!
//! Exit codes: 0 success, 2 validation failure (bad flags, malformed input
//! data), 3 I/O failure (missing files, unwritable paths), 4 training
//! divergence. A failed `gradcheck` exits 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rotordiag::audio::{preset_by_name, read_preset_file, read_wav, AudioError, QuadPreset};
use rotordiag::nn::{
    grad_check_detailed, init_params, load_checkpoint, save_checkpoint, ModelSpec, NnError, Tensor,
};
use rotordiag::pipeline::{
    build_synthetic_dataset, cross_evaluate, epochs_csv, evaluate, load_manifest, report_text,
    split, train, transfer, DatasetLayout, PipelineError, TrainConfig, TrainReport, TransferConfig,
};
use rotordiag::rng::{derive_seed, SplitMix64};
use rotordiag::spectrogram::{colorize, log_power, stft, write_image, SpectrogramParams};

/// Seed-stream tags for the independent random streams one CLI seed fans
/// out into.
mod streams {
    pub const SYNTH_A: u64 = 10;
    pub const SYNTH_B: u64 = 11;
    pub const SPLIT: u64 = 12;
    pub const TRAIN: u64 = 13;
    pub const TRANSFER_10: u64 = 14;
    pub const TRANSFER_20: u64 = 15;
    pub const GRADCHECK: u64 = 16;
}

#[derive(Parser)]
#[command(
    name = "rotordiag",
    about = "Diagnose propeller damage from rotor audio",
    version
)]
struct Cli {
    /// Master seed; falls back to ROTORDIAG_SEED, then 42.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Base directory for relative paths.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    /// Suppress progress output (results still print).
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic spectrogram dataset for one rotor preset.
    Synth(SynthArgs),
    /// Render one WAV file as a spectrogram image.
    Spectrogram(SpectrogramArgs),
    /// Train a classifier on a dataset manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint against a manifest.
    Eval(EvalArgs),
    /// Adapt a trained checkpoint to a second rotor with a few samples.
    Transfer(TransferArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Run the whole ladder: train, cross-evaluate, transfer with 10 and
    /// 20 target images; write a summary table.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in preset name (quadA, quadB) or path to a key=value preset
    /// file.
    #[arg(long)]
    preset: String,

    /// Healthy and damaged sample count (each) to generate.
    #[arg(long, default_value_t = 80)]
    per_class: usize,

    /// Output directory; defaults to dataset_<preset>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrogramArgs {
    /// Input 16-bit PCM WAV file.
    #[arg(long)]
    wav: PathBuf,

    /// Output PPM path.
    #[arg(long, default_value = "spectrogram.ppm")]
    out: PathBuf,

    /// Analysis window length in samples (N).
    #[arg(long, default_value_t = 1024)]
    window: usize,

    /// Hop between windows in samples (h).
    #[arg(long, default_value_t = 512)]
    hop: usize,

    /// Level floor in dB.
    #[arg(long, default_value_t = -80.0)]
    floor_db: f64,

    /// Keep only this many low-frequency bins before rendering.
    #[arg(long)]
    crop_bins: Option<usize>,

    #[arg(long, default_value_t = 64)]
    height: usize,

    #[arg(long, default_value_t = 64)]
    width: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest CSV.
    #[arg(long)]
    manifest: PathBuf,

    /// Where to write the trained checkpoint.
    #[arg(long, default_value = "model.rdgn")]
    checkpoint_out: PathBuf,

    /// Directory for report.txt and epochs.csv.
    #[arg(long, default_value = ".")]
    report_dir: PathBuf,

    #[arg(long, default_value_t = 30)]
    epochs: usize,

    #[arg(long, default_value_t = 0.01)]
    lr: f32,

    #[arg(long, default_value_t = 10)]
    batch: usize,

    #[arg(long, default_value_t = 50)]
    train_per_class: usize,

    #[arg(long, default_value_t = 15)]
    val_per_class: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,

    /// Manifest to score (all records).
    #[arg(long)]
    manifest: PathBuf,

    /// Optional path for a one-line CSV report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TransferArgs {
    /// Source checkpoint to adapt.
    #[arg(long)]
    checkpoint: PathBuf,

    /// Target-rotor manifest.
    #[arg(long)]
    manifest: PathBuf,

    /// Labeled target samples per class used for fine-tuning.
    #[arg(long)]
    n_per_class: usize,

    #[arg(long, default_value = "transferred.rdgn")]
    checkpoint_out: PathBuf,

    #[arg(long, default_value = ".")]
    report_dir: PathBuf,

    #[arg(long, default_value_t = 150)]
    epochs: usize,

    #[arg(long, default_value_t = 0.02)]
    lr: f32,

    #[arg(long, default_value_t = 10)]
    batch: usize,

    #[arg(long, default_value_t = 15)]
    val_per_class: usize,

    /// Learning-rate factor for retained feature layers.
    #[arg(long, default_value_t = 0.1)]
    feature_lr_scale: f32,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,

    /// Maximum acceptable relative error.
    #[arg(long, default_value_t = 1e-2)]
    tolerance: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Healthy and damaged samples (each) per rotor.
    #[arg(long, default_value_t = 80)]
    per_class: usize,

    /// Directory for datasets, checkpoints, reports, and the summary.
    #[arg(long, default_value = "experiment")]
    out: PathBuf,
}

/// Failures mapped to exit codes.
enum CliError {
    /// Exit 2: bad flags or invalid/malformed input data.
    Validation(String),
    /// Exit 3: filesystem-level failure.
    Io(String),
    /// Exit 4: training diverged.
    Divergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Divergence(m) => m,
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::FileNotFound(_) | AudioError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<rotordiag::spectrogram::SpectrogramError> for CliError {
    fn from(e: rotordiag::spectrogram::SpectrogramError) -> Self {
        match e {
            rotordiag::spectrogram::SpectrogramError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::TrainingDiverged { .. } => CliError::Divergence(e.to_string()),
            PipelineError::Io { .. } => CliError::Io(e.to_string()),
            PipelineError::Audio(inner) => inner.into(),
            PipelineError::Nn(inner) => inner.into(),
            PipelineError::Spectrogram(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli
        .seed
        .or_else(|| {
            std::env::var("ROTORDIAG_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(42);

    let ctx = Context {
        seed,
        output_dir: cli.output_dir.clone(),
        quiet: cli.quiet,
    };

    let result = match cli.command {
        Command::Synth(args) => cmd_synth(&ctx, args),
        Command::Spectrogram(args) => cmd_spectrogram(&ctx, args),
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Eval(args) => cmd_eval(&ctx, args),
        Command::Transfer(args) => cmd_transfer(&ctx, args),
        Command::Gradcheck(args) => cmd_gradcheck(&ctx, args),
        Command::Experiment(args) => cmd_experiment(&ctx, args),
    };

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

struct Context {
    seed: u64,
    output_dir: PathBuf,
    quiet: bool,
}

impl Context {
    /// Relative paths resolve against --output-dir.
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.output_dir.join(path)
        }
    }

    fn note(&self, message: &str) {
        if !self.quiet {
            println!("{message}");
        }
    }
}

fn percent(accuracy: f64) -> String {
    format!("{:.2}%", 100.0 * accuracy)
}

fn load_preset(ctx: &Context, name_or_path: &str) -> Result<QuadPreset, CliError> {
    if let Some(preset) = preset_by_name(name_or_path) {
        return Ok(preset);
    }
    let path = ctx.resolve(Path::new(name_or_path));
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "--preset {name_or_path:?} is neither a built-in preset (quadA, quadB) nor a preset file"
        )));
    }
    let base = read_preset_file(&path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "custom".to_string());
    Ok(QuadPreset::from_base(&stem, base))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("creating {parent:?}: {e}")))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("writing {path:?}: {e}")))
}

fn cmd_synth(ctx: &Context, args: SynthArgs) -> Result<ExitCode, CliError> {
    let preset = load_preset(ctx, &args.preset)?;
    let out = ctx.resolve(
        &args
            .out
            .unwrap_or_else(|| PathBuf::from(format!("dataset_{}", preset.name))),
    );
    let stream = if preset.name == "quadB" {
        streams::SYNTH_B
    } else {
        streams::SYNTH_A
    };
    let manifest = build_synthetic_dataset(
        &preset,
        args.per_class,
        &out,
        derive_seed(ctx.seed, stream),
        &DatasetLayout::default(),
    )?;
    println!(
        "wrote {} records ({} per class) to {}",
        manifest.records.len(),
        args.per_class,
        out.join("manifest.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrogram(ctx: &Context, args: SpectrogramArgs) -> Result<ExitCode, CliError> {
    // Analysis parameters are validated before any file is touched.
    let params = SpectrogramParams::new(args.window, args.hop)?;
    if args.height < 8 || args.width < 8 {
        return Err(CliError::Validation(format!(
            "--height/--width must be at least 8, got {}x{}",
            args.height, args.width
        )));
    }
    if args.floor_db >= 0.0 {
        return Err(CliError::Validation(format!(
            "--floor-db must be negative, got {}",
            args.floor_db
        )));
    }

    let wav = ctx.resolve(&args.wav);
    let out = ctx.resolve(&args.out);
    let clip = read_wav(&wav)?;
    let spec = stft(&clip, &params)?;
    let levels = log_power(&spec, args.floor_db);
    let levels = match args.crop_bins {
        Some(bins) => levels.left_cols(bins),
        None => levels,
    };
    let image = colorize(&levels, args.height, args.width)?;
    write_image(&image, &out)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(ctx: &Context, args: TrainArgs) -> Result<ExitCode, CliError> {
    if args.epochs > 0 && args.batch == 0 {
        return Err(CliError::Validation("--batch must be positive".into()));
    }
    if !(args.lr > 0.0) {
        return Err(CliError::Validation(format!(
            "--lr must be positive, got {}",
            args.lr
        )));
    }
    let manifest = load_manifest(&ctx.resolve(&args.manifest))?;
    let plan = split(
        &manifest,
        derive_seed(ctx.seed, streams::SPLIT),
        args.train_per_class,
        args.val_per_class,
    )?;
    ctx.note(&format!(
        "training on {} samples, validating on {}, testing on {}",
        plan.train.len(),
        plan.validation.len(),
        plan.test.len()
    ));

    let layout = DatasetLayout::default();
    let spec = ModelSpec::default_classifier(layout.image_height, layout.image_width);
    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: derive_seed(ctx.seed, streams::TRAIN),
    };
    let (params, report) = train(&spec, &manifest, &plan, &config)?;

    let checkpoint_out = ctx.resolve(&args.checkpoint_out);
    save_checkpoint(&spec, &params, &checkpoint_out)?;
    let report_dir = ctx.resolve(&args.report_dir);
    write_reports(&report_dir, "report", &report)?;

    println!("test accuracy: {}", percent(report.test_accuracy));
    println!("checkpoint: {}", checkpoint_out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_reports(dir: &Path, stem: &str, report: &TrainReport) -> Result<(), CliError> {
    write_file(&dir.join(format!("{stem}.txt")), &report_text(report))?;
    write_file(&dir.join(format!("{stem}_epochs.csv")), &epochs_csv(report))?;
    Ok(())
}

fn cmd_eval(ctx: &Context, args: EvalArgs) -> Result<ExitCode, CliError> {
    let (spec, params) = load_checkpoint(&ctx.resolve(&args.checkpoint))?;
    let manifest = load_manifest(&ctx.resolve(&args.manifest))?;
    let report = evaluate(&spec, &params, &manifest, &manifest.all_indices())?;
    println!("accuracy: {}", percent(report.accuracy));
    println!(
        "confusion: [[{}, {}], [{}, {}]]",
        report.confusion[0][0],
        report.confusion[0][1],
        report.confusion[1][0],
        report.confusion[1][1]
    );
    if let Some(report_path) = args.report {
        let csv = format!(
            "accuracy,unbroken_as_unbroken,unbroken_as_broken,broken_as_unbroken,broken_as_broken\n{},{},{},{},{}\n",
            percent(report.accuracy),
            report.confusion[0][0],
            report.confusion[0][1],
            report.confusion[1][0],
            report.confusion[1][1]
        );
        write_file(&ctx.resolve(&report_path), &csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_transfer(ctx: &Context, args: TransferArgs) -> Result<ExitCode, CliError> {
    if args.n_per_class == 0 {
        return Err(CliError::Validation(
            "--n-per-class must be positive".into(),
        ));
    }
    if !(args.lr > 0.0) {
        return Err(CliError::Validation(format!(
            "--lr must be positive, got {}",
            args.lr
        )));
    }
    let (spec, params) = load_checkpoint(&ctx.resolve(&args.checkpoint))?;
    let manifest = load_manifest(&ctx.resolve(&args.manifest))?;
    let config = TransferConfig {
        base: TrainConfig {
            learning_rate: args.lr,
            batch_size: args.batch,
            epochs: args.epochs,
            seed: derive_seed(ctx.seed, streams::TRANSFER_10 + args.n_per_class as u64),
        },
        n_train_per_class: args.n_per_class,
        val_per_class: args.val_per_class,
        feature_lr_scale: args.feature_lr_scale,
    };
    let (adapted, report, plan) = transfer(&spec, &params, &manifest, &config)?;

    let checkpoint_out = ctx.resolve(&args.checkpoint_out);
    save_checkpoint(&spec, &adapted, &checkpoint_out)?;
    write_reports(&ctx.resolve(&args.report_dir), "transfer_report", &report)?;

    ctx.note(&format!(
        "fine-tuned on {} target samples, tested on {}",
        plan.train.len(),
        plan.test.len()
    ));
    println!("target test accuracy: {}", percent(report.test_accuracy));
    println!("checkpoint: {}", checkpoint_out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(ctx: &Context, args: GradcheckArgs) -> Result<ExitCode, CliError> {
    if !(1e-4..=1e-2).contains(&args.epsilon) {
        return Err(CliError::Validation(format!(
            "--epsilon must lie in [1e-4, 1e-2], got {}",
            args.epsilon
        )));
    }
    let layout = DatasetLayout::default();
    let spec = ModelSpec::default_classifier(layout.image_height, layout.image_width);
    let seed = derive_seed(ctx.seed, streams::GRADCHECK);
    let params = init_params(&spec, seed);
    let mut rng = SplitMix64::new(derive_seed(seed, 1));
    let len = 3 * layout.image_height * layout.image_width;
    let input = Tensor::new(
        vec![3, layout.image_height, layout.image_width],
        (0..len).map(|_| rng.next_f64() as f32).collect(),
    );
    let label = (rng.next_u64() % 2) as usize;
    let report = grad_check_detailed(&spec, &params, &input, label, args.epsilon, seed)?;
    println!(
        "gradcheck: max relative error {:.3e}, median {:.3e} over {} parameters",
        report.max_error, report.median_error, report.checked
    );
    if report.max_error < args.tolerance {
        println!("gradcheck: PASS (tolerance {:.1e})", args.tolerance);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("gradcheck: FAIL (tolerance {:.1e})", args.tolerance);
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_experiment(ctx: &Context, args: ExperimentArgs) -> Result<ExitCode, CliError> {
    let out = ctx.resolve(&args.out);
    let layout = DatasetLayout::default();
    let spec = ModelSpec::default_classifier(layout.image_height, layout.image_width);

    ctx.note("generating quadA and quadB datasets");
    let quad_a = build_synthetic_dataset(
        &rotordiag::audio::quad_a(),
        args.per_class,
        &out.join("quadA"),
        derive_seed(ctx.seed, streams::SYNTH_A),
        &layout,
    )?;
    let quad_b = build_synthetic_dataset(
        &rotordiag::audio::quad_b(),
        args.per_class,
        &out.join("quadB"),
        derive_seed(ctx.seed, streams::SYNTH_B),
        &layout,
    )?;

    ctx.note("training on quadA");
    let plan = split(&quad_a, derive_seed(ctx.seed, streams::SPLIT), 50, 15)?;
    let config = TrainConfig {
        seed: derive_seed(ctx.seed, streams::TRAIN),
        ..TrainConfig::default()
    };
    let (params, native_report) = train(&spec, &quad_a, &plan, &config)?;
    save_checkpoint(&spec, &params, &out.join("quadA_model.rdgn"))?;
    write_reports(&out, "native_report", &native_report)?;

    ctx.note("cross-evaluating the quadA model on quadB");
    let cross = cross_evaluate(&spec, &params, &quad_b)?;

    let mut ladder = Vec::new();
    for (n_per_class, stream, tag) in [
        (5usize, streams::TRANSFER_10, "transfer_10"),
        (10usize, streams::TRANSFER_20, "transfer_20"),
    ] {
        ctx.note(&format!(
            "transferring to quadB with {} images",
            2 * n_per_class
        ));
        let t_config = TransferConfig::recommended(n_per_class, derive_seed(ctx.seed, stream));
        let (adapted, report, _) = transfer(&spec, &params, &quad_b, &t_config)?;
        save_checkpoint(&spec, &adapted, &out.join(format!("{tag}_model.rdgn")))?;
        write_reports(&out, &format!("{tag}"), &report)?;
        ladder.push(report.test_accuracy);
    }

    let rows = [
        ("native (quadA test)", native_report.test_accuracy),
        ("cross-eval (quadB, no transfer)", cross.accuracy),
        ("transfer, 10 target images", ladder[0]),
        ("transfer, 20 target images", ladder[1]),
    ];
    let mut summary = String::from("experiment,accuracy\n");
    let mut table = String::new();
    for (name, acc) in rows {
        summary.push_str(&format!("{name},{}\n", percent(acc)));
        table.push_str(&format!("{name:<34} {:>8}\n", percent(acc)));
    }
    write_file(&out.join("summary.csv"), &summary)?;
    write_file(&out.join("summary.txt"), &table)?;
    print!("{table}");
    println!("summary: {}", out.join("summary.csv").display());
    Ok(ExitCode::SUCCESS)
}
