use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaze_affect::fusion::{convert_shift, fuse_features, shift_annotations, ShiftSpec};
use gaze_affect::gaze::{extract_gaze_features, GazeFeatureConfig, WindowSpec};
use gaze_affect::harness::{
    evaluate_model, generate_synthetic_corpus, render_report, run_cross_corpus, run_intra_corpus,
    run_shift_sweep, write_report, ExperimentConfig, HarnessError, ReportFormat, ResultsTable,
    SyntheticCorpusSpec, WindowSeconds,
};
use gaze_affect::net::{load_model, save_model};
use gaze_affect::timeline::{
    load_annotation_csv, load_corpus_manifest, load_feature_csv, load_gaze_log_csv, write_file,
    Dimension, FrameRate, GazeColumnMap,
};

#[derive(Parser)]
#[command(name = "gaze-affect", version, about = "Bimodal speech + eye-gaze continuous affect prediction")]
struct Cli {
    /// Experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Single random seed (replaces the config's seed grid / the synthetic seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Windowed eye-gaze features from raw gaze logs
    ExtractGaze(ExtractArgs),
    /// Concatenate speech and gaze feature CSVs frame by frame
    Fuse(FuseArgs),
    /// Shift an annotation trace back in time
    Shift(ShiftArgs),
    /// Score a saved model on a feature CSV and annotation trace
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with a known annotator lag
    Synth(SynthArgs),
    /// Ground-truth shift sweep on the validation partition
    Sweep(ExperimentArgs),
    /// Intra-corpus modality × network experiment; saves the selected models
    Train(ExperimentArgs),
    /// Cross-corpus experiment
    CrossEval(ExperimentArgs),
    /// Render a results CSV as a report
    Report(ReportArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus manifest: extract for every recording into <out-dir>/features
    #[arg(long, conflicts_with = "input")]
    manifest: Option<PathBuf>,
    /// Single gaze log CSV
    #[arg(long, requires_all = ["output", "fps"])]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
    /// Window length follows the dimension (4 s arousal, 6 s valence)
    #[arg(long, default_value = "arousal")]
    dimension: Dimension,
    /// Explicit window length in seconds
    #[arg(long)]
    window_seconds: Option<f64>,
    /// Column mapping `h=..,v=..,closed=..,valid=..[,frame=..]`
    #[arg(long, conflicts_with = "openface")]
    columns: Option<GazeColumnMap>,
    /// OpenFace column names
    #[arg(long)]
    openface: bool,
}

#[derive(Args)]
struct FuseArgs {
    /// Corpus manifest: fuse speech features with <out-dir>/features gaze features
    #[arg(long, conflicts_with = "speech")]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "arousal")]
    dimension: Dimension,
    #[arg(long, requires_all = ["gaze", "output", "fps"])]
    speech: Option<PathBuf>,
    #[arg(long)]
    gaze: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
}

#[derive(Args)]
struct ShiftArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Shift in frames at --fps
    #[arg(long)]
    frames: usize,
    #[arg(long)]
    fps: f64,
    /// Convert the shift to this frame rate before applying it
    #[arg(long)]
    target_fps: Option<f64>,
    /// Use this many frames at the target rate instead of the conversion
    #[arg(long)]
    shift_override: Option<usize>,
    #[arg(long, default_value = "arousal")]
    dimension: Dimension,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    annotation: PathBuf,
    #[arg(long)]
    fps: f64,
    /// Defaults to the model's training shift
    #[arg(long)]
    shift: Option<usize>,
    /// Write per-frame predictions here
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec (JSON); flags below override it
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    validation: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    speech_channels: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Training corpus manifest (overrides the config)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Cross-corpus test manifest (overrides the config)
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    #[arg(long)]
    dimension: Option<Dimension>,
    /// Annotation shift in frames (overrides the config)
    #[arg(long)]
    shift: Option<usize>,
    /// Cross-corpus test shift override in frames
    #[arg(long)]
    shift_override: Option<usize>,
    /// Report format: markdown or csv
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV written by sweep, train or cross-eval
    #[arg(long, required = true, num_args = 1..)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Defaults to stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn out_dir(cli: &Cli, config: Option<&ExperimentConfig>) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| config.map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn fps(f: f64) -> Result<FrameRate, HarnessError> {
    Ok(FrameRate::new(f)?)
}

fn window_seconds(dimension: Dimension, explicit: Option<f64>, cli: &Cli) -> Result<f64, HarnessError> {
    if let Some(w) = explicit {
        return Ok(w);
    }
    let windows = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?.window_seconds,
        None => WindowSeconds::default(),
    };
    Ok(windows.get(dimension))
}

fn gaze_config(cli: &Cli) -> Result<GazeFeatureConfig, HarnessError> {
    Ok(match &cli.config {
        Some(path) => ExperimentConfig::load(path)?.gaze,
        None => GazeFeatureConfig::default(),
    })
}

fn features_path(out: &Path, id: &str, kind: &str, dimension: Dimension) -> PathBuf {
    out.join("features").join(format!("{id}_{kind}_{dimension}.csv"))
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::ExtractGaze(a) => extract(cli, a),
        Command::Fuse(a) => fuse(cli, a),
        Command::Shift(a) => shift(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Train(a) => train(cli, a),
        Command::CrossEval(a) => cross(cli, a),
        Command::Report(a) => report(a),
    }
}

fn extract(cli: &Cli, a: &ExtractArgs) -> Result<(), HarnessError> {
    let window = WindowSpec::seconds(window_seconds(a.dimension, a.window_seconds, cli)?);
    let config = gaze_config(cli)?;
    let explicit = if a.openface {
        Some(GazeColumnMap::openface())
    } else {
        a.columns.clone()
    };
    match (&a.manifest, &a.input) {
        (Some(manifest), _) => {
            let m = load_corpus_manifest(manifest)?;
            let columns = match explicit {
                Some(c) => c,
                None => m.column_map()?,
            };
            let out = out_dir(cli, None);
            for r in &m.recordings {
                let log = load_gaze_log_csv(&r.gaze, r.fps, &columns)?;
                let features = extract_gaze_features(&log, &window, &config)?;
                let path = features_path(&out, &r.id, "gaze", a.dimension);
                features.write_csv(&path)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        (None, Some(input)) => {
            let log = load_gaze_log_csv(input, fps(a.fps.unwrap_or_default())?, &explicit.unwrap_or_default())?;
            let features = extract_gaze_features(&log, &window, &config)?;
            let output = a.output.as_ref().expect("clap requires --output");
            features.write_csv(output)?;
            println!("{}", output.display());
            Ok(())
        }
        (None, None) => Err(HarnessError::Config("extract-gaze needs --manifest or --input".into())),
    }
}

fn fuse(cli: &Cli, a: &FuseArgs) -> Result<(), HarnessError> {
    match (&a.manifest, &a.speech) {
        (Some(manifest), _) => {
            let m = load_corpus_manifest(manifest)?;
            let out = out_dir(cli, None);
            for r in &m.recordings {
                let speech = load_feature_csv(&r.speech, r.fps)?;
                let gaze_path = features_path(&out, &r.id, "gaze", a.dimension);
                let gaze = load_feature_csv(&gaze_path, r.fps)?;
                let fused = fuse_features(&speech, "speech", &gaze, "gaze")?;
                let path = features_path(&out, &r.id, "fused", a.dimension);
                fused.write_csv(&path)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        (None, Some(speech)) => {
            let rate = fps(a.fps.unwrap_or_default())?;
            let speech = load_feature_csv(speech, rate)?;
            let gaze = load_feature_csv(a.gaze.as_ref().expect("clap requires --gaze"), rate)?;
            let fused = fuse_features(&speech, "speech", &gaze, "gaze")?;
            let output = a.output.as_ref().expect("clap requires --output");
            fused.write_csv(output)?;
            println!("{}", output.display());
            Ok(())
        }
        (None, None) => Err(HarnessError::Config("fuse needs --manifest or --speech".into())),
    }
}

fn shift(a: &ShiftArgs) -> Result<(), HarnessError> {
    let source = fps(a.fps)?;
    let target = match a.target_fps {
        Some(f) => fps(f)?,
        None => source,
    };
    let spec = convert_shift(&ShiftSpec::new(a.frames, source), target, a.shift_override);
    let trace = load_annotation_csv(&a.input, a.dimension, target)?;
    let shifted = shift_annotations(&trace, &spec)?;
    shifted.write_csv(&a.output)?;
    println!("shift {} frames @ {} fps", spec.frames, target);
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<(), HarnessError> {
    let model = load_model(&a.model)?;
    let rate = fps(a.fps)?;
    let features = load_feature_csv(&a.features, rate)?;
    let annotation = load_annotation_csv(&a.annotation, model.dimension, rate)?;
    let shift = a.shift.unwrap_or(model.shift_frames);
    let (predictions, ccc) = evaluate_model(&model, &features, annotation.values(), shift)?;
    if let Some(path) = &a.predictions {
        let mut out = String::from("prediction\n");
        for p in &predictions {
            out.push_str(&gaze_affect::timeline::format_decimal(*p));
            out.push('\n');
        }
        write_file(path, out.as_bytes())?;
    }
    println!("{} CCC {ccc:.6} (shift {shift})", model.dimension);
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<(), HarnessError> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticCorpusSpec::default(),
    };
    macro_rules! set {
        ($($field:ident <- $arg:expr),*) => { $(if let Some(v) = $arg.clone() { spec.$field = v; })* };
    }
    set!(name <- a.name, train_recordings <- a.train, validation_recordings <- a.validation,
        test_recordings <- a.test, frames <- a.frames, fps <- a.fps, lag_frames <- a.lag,
        noise <- a.noise, speech_channels <- a.speech_channels, seed <- cli.seed);
    let out = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
    let manifest = generate_synthetic_corpus(&spec, &out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn experiment_config(cli: &Cli, a: &ExperimentArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match (&cli.config, &a.manifest) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(manifest)) => ExperimentConfig::new(manifest, a.dimension.unwrap_or(Dimension::Arousal)),
        (None, None) => return Err(HarnessError::Config("pass --config or --manifest".into())),
    };
    if let Some(m) = &a.manifest {
        config.train_manifest = m.clone();
    }
    if let Some(m) = &a.test_manifest {
        config.test_manifest = Some(m.clone());
    }
    if let Some(d) = a.dimension {
        config.dimension = d;
    }
    if let Some(s) = a.shift {
        config.shift_frames = Some(s);
    }
    if let Some(s) = a.shift_override {
        config.cross_shift_override = Some(s);
    }
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    config.output_dir = out_dir(cli, Some(&config));
    config.validate()?;
    Ok(config)
}

fn save_outputs(config: &ExperimentConfig, stem: &str, table: &ResultsTable, format: ReportFormat) -> Result<(), HarnessError> {
    let csv = config.output_dir.join(format!("{stem}.csv"));
    table.save_csv(&csv)?;
    let ext = match format {
        ReportFormat::Csv => "report.csv",
        ReportFormat::Markdown => "md",
    };
    let report = config.output_dir.join(format!("{stem}.{ext}"));
    write_report(table, format, &report)?;
    println!("{}", render_report(table, ReportFormat::Markdown)?);
    println!("results: {}\nreport: {}", csv.display(), report.display());
    Ok(())
}

fn sweep(cli: &Cli, a: &ExperimentArgs) -> Result<(), HarnessError> {
    let config = experiment_config(cli, a)?;
    let outcome = run_shift_sweep(&config)?;
    save_outputs(&config, &format!("sweep_{}", config.dimension), &outcome.table, a.format)?;
    for (kind, shift) in &outcome.best_shift {
        println!("best shift {kind}: {shift} frames");
    }
    Ok(())
}

fn train(cli: &Cli, a: &ExperimentArgs) -> Result<(), HarnessError> {
    let config = experiment_config(cli, a)?;
    let outcome = run_intra_corpus(&config)?;
    save_outputs(&config, &format!("intra_{}", config.dimension), &outcome.table, a.format)?;
    for model in &outcome.models {
        let modality = model.metadata.modality.as_deref().unwrap_or("model");
        let path = config.output_dir.join("models").join(format!(
            "{}_{}_{}.json",
            model.dimension,
            modality,
            model.spec.layers[0].kind.as_str().to_ascii_lowercase()
        ));
        save_model(model, &path)?;
        println!("model: {}", path.display());
    }
    Ok(())
}

fn cross(cli: &Cli, a: &ExperimentArgs) -> Result<(), HarnessError> {
    let config = experiment_config(cli, a)?;
    let table = run_cross_corpus(&config)?;
    save_outputs(&config, &format!("cross_{}", config.dimension), &table, a.format)
}

fn report(a: &ReportArgs) -> Result<(), HarnessError> {
    let mut table = ResultsTable::default();
    for path in &a.results {
        table.extend(ResultsTable::load_csv(path)?);
    }
    let text = render_report(&table, a.format)?;
    match &a.output {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            println!("{}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
