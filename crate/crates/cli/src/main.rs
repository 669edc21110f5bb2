//! `castmatch`: track, label and evaluate face tracks from the command line.
//!
//! Any config field can be overridden with a dotted flag, e.g.
//! `--labeler.lambda -0.3` or `--tracker.desc_dist_max=0.8`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use castmatch::eval::{format_report, score, segment_sweep};
use castmatch::io::{self, PipelineConfig};
use castmatch::labeler::{label_tracks, self_label, ActorCloud, Labeling, Method};
use castmatch::synth::{generate, generate_stream, track_ground_truth};
use castmatch::tracker::{track_stream, Track};
use castmatch::Error;
use clap::{Args, Parser, Subcommand};
use log::info;

#[derive(Parser, Debug)]
#[command(
    name = "castmatch",
    version,
    about = "Label face tracks with actor names"
)]
struct Cli {
    /// JSON config file; dotted flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group per-frame detections into tracks.
    Track(TrackArgs),
    /// Label tracks against actor templates.
    Label(LabelArgs),
    /// Score a labels file against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic scenario in the regular file formats.
    Synth(SynthArgs),
    /// Run track, label and eval in one go.
    Pipeline(PipelineArgs),
    /// Label growing prefixes of the video and score each.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Output tracks file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-detection labels; with --ground-truth-out, writes track labels
    /// by majority vote.
    #[arg(long)]
    detection_labels: Option<PathBuf>,
    #[arg(long)]
    ground_truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LabelArgs {
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    tracks: Option<PathBuf>,
    /// Output labels CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write actor profiles here (HCSL only).
    #[arg(long)]
    profile_dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Machine-readable report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit a detection stream instead of ready-made tracks.
    #[arg(long)]
    stream: bool,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Output directory for every intermediate and final file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Real templates; a synthetic stream is generated when omitted.
    #[arg(long, requires = "detections")]
    templates: Option<PathBuf>,
    #[arg(long, requires = "templates")]
    detections: Option<PathBuf>,
    #[arg(long, conflicts_with = "ground_truth")]
    detection_labels: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    tracks: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Comma-separated prefix lengths in seconds.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<f64>>,
    /// Output JSON with one report per length.
    #[arg(long)]
    out: Option<PathBuf>,
}

type Overrides = Vec<(String, String)>;

/// Pulls `--a.b value` and `--a.b=value` out of the raw arguments.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), Error> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(it.by_ref());
            break;
        }
        let Some(name) = arg.strip_prefix("--").filter(|n| {
            let key = n.split('=').next().unwrap_or("");
            key.contains('.') && !key.starts_with('.')
        }) else {
            rest.push(arg);
            continue;
        };
        match name.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| Error::InvalidConfig(format!("--{name} needs a value")))?;
                overrides.push((name.to_string(), value));
            }
        }
    }
    Ok((rest, overrides))
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("CASTMATCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::InvalidConfig(format!(
            "CASTMATCH_THREADS must be a non-negative integer, got '{raw}'"
        ))
    })?;
    // 0 keeps rayon's default of one thread per core.
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot size thread pool: {e}")))
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| {
        Error::InvalidInput(format!(
            "missing --{name} (or paths.{} in the config)",
            name.replace('-', "_")
        ))
        .into()
    })
}

fn summary(labeling: &Labeling) -> String {
    let side = labeling
        .entries
        .values()
        .filter(|e| e.label.is_side_actor())
        .count();
    format!(
        "labelled {} tracks ({} side actor) in {} iterations",
        labeling.len(),
        side,
        labeling.iterations
    )
}

/// Labels `tracks`, writing the optional profile dump for HCSL.
fn run_labeler(
    cfg: &PipelineConfig,
    tracks: &[Track],
    clouds: &[ActorCloud],
    profile_dump: Option<&Path>,
) -> Result<Labeling> {
    if cfg.labeler.method == Method::Hcsl {
        let outcome = self_label(tracks, clouds, &cfg.labeler)?;
        if let Some(path) = profile_dump {
            io::save_profiles(path, &outcome.clouds, &cfg.profile)?;
        }
        Ok(outcome.labeling)
    } else {
        Ok(label_tracks(tracks, clouds, &cfg.labeler)?)
    }
}

fn cmd_track(cfg: &PipelineConfig, args: TrackArgs) -> Result<()> {
    let detections = required(args.detections, &cfg.paths.detections, "detections")?;
    let out = required(args.out, &cfg.paths.tracks, "out")?;
    let frames = io::load_detections(&detections, Some(cfg.dim))?;
    let tracks = track_stream(frames, &cfg.tracker, cfg.dim)?;
    io::save_tracks(&out, &tracks)?;
    println!("{} tracks written to {}", tracks.len(), out.display());

    let labels = args
        .detection_labels
        .or_else(|| cfg.paths.detection_labels.clone());
    let gt_out = args
        .ground_truth_out
        .or_else(|| cfg.paths.ground_truth.clone());
    match (labels, gt_out) {
        (Some(labels), Some(gt_out)) => {
            let gt = track_ground_truth(&tracks, &io::load_detection_labels(&labels)?)?;
            io::save_ground_truth(&gt_out, &gt)?;
        }
        (Some(_), None) => {
            return Err(
                Error::InvalidInput("--detection-labels needs --ground-truth-out".into()).into(),
            )
        }
        _ => {}
    }
    Ok(())
}

fn cmd_label(cfg: &PipelineConfig, args: LabelArgs) -> Result<()> {
    let templates = required(args.templates, &cfg.paths.templates, "templates")?;
    let tracks = required(args.tracks, &cfg.paths.tracks, "tracks")?;
    let out = required(args.out, &cfg.paths.labels, "out")?;
    let clouds = io::load_templates(&templates, Some(cfg.dim))?;
    let tracks = io::load_tracks(&tracks, Some(cfg.dim))?;
    let dump = args.profile_dump.or_else(|| cfg.paths.profile_dump.clone());
    let labeling = run_labeler(cfg, &tracks, &clouds, dump.as_deref())?;
    io::save_labels(&out, &labeling)?;
    println!("{}", summary(&labeling));
    Ok(())
}

fn cmd_eval(cfg: &PipelineConfig, args: EvalArgs) -> Result<()> {
    let labels = required(args.labels, &cfg.paths.labels, "labels")?;
    let gt = required(args.ground_truth, &cfg.paths.ground_truth, "ground-truth")?;
    let report = score(&io::load_labels(&labels)?, &io::load_ground_truth(&gt)?)?;
    if let Some(path) = args.report.or_else(|| cfg.paths.report.clone()) {
        io::save_report(&path, &report)?;
    }
    print!("{}", format_report(&report));
    Ok(())
}

fn cmd_synth(cfg: &PipelineConfig, args: SynthArgs) -> Result<()> {
    let out = required(args.out, &cfg.paths.out_dir, "out")?;
    if args.stream {
        let s = generate_stream(&cfg.synth, &cfg.stream)?;
        io::save_templates(&out.join("templates"), &s.templates)?;
        io::save_detections(&out.join("detections.jsonl"), &s.frames)?;
        io::save_detection_labels(&out.join("detection_labels.csv"), &s.detection_labels)?;
        println!(
            "{} detections in {} frames written to {}",
            s.n_detections(),
            s.frames.len(),
            out.display()
        );
    } else {
        let s = generate(&cfg.synth)?;
        io::save_templates(&out.join("templates"), &s.templates)?;
        io::save_tracks(&out.join("tracks.jsonl"), &s.tracks)?;
        io::save_ground_truth(&out.join("ground_truth.csv"), &s.ground_truth)?;
        println!("{} tracks written to {}", s.tracks.len(), out.display());
    }
    Ok(())
}

fn cmd_pipeline(cfg: &PipelineConfig, args: PipelineArgs) -> Result<()> {
    let out = required(args.out, &cfg.paths.out_dir, "out")?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let (templates, detections, detection_labels) = match (args.templates, args.detections) {
        (Some(t), Some(d)) => (t, d, args.detection_labels),
        _ => {
            info!("generating synthetic stream into {}", out.display());
            let s = generate_stream(&cfg.synth, &cfg.stream)?;
            io::save_templates(&out.join("templates"), &s.templates)?;
            io::save_detections(&out.join("detections.jsonl"), &s.frames)?;
            io::save_detection_labels(&out.join("detection_labels.csv"), &s.detection_labels)?;
            (
                out.join("templates"),
                out.join("detections.jsonl"),
                Some(out.join("detection_labels.csv")),
            )
        }
    };

    let clouds = io::load_templates(&templates, Some(cfg.dim))?;
    let frames = io::load_detections(&detections, Some(cfg.dim))?;
    let tracks = track_stream(frames, &cfg.tracker, cfg.dim)?;
    io::save_tracks(&out.join("tracks.jsonl"), &tracks)?;
    info!("{} tracks", tracks.len());

    let dump = (cfg.labeler.method == Method::Hcsl).then(|| out.join("profiles.txt"));
    let labeling = run_labeler(cfg, &tracks, &clouds, dump.as_deref())?;
    io::save_labels(&out.join("labels.csv"), &labeling)?;
    println!("{}", summary(&labeling));

    let gt = match (detection_labels, args.ground_truth) {
        (Some(labels), _) => {
            let gt = track_ground_truth(&tracks, &io::load_detection_labels(&labels)?)?;
            io::save_ground_truth(&out.join("ground_truth.csv"), &gt)?;
            Some(gt)
        }
        (None, Some(path)) => Some(io::load_ground_truth(&path)?),
        (None, None) => None,
    };
    if let Some(gt) = gt {
        let report = score(&labeling, &gt)?;
        io::save_report(&out.join("report.json"), &report)?;
        print!("{}", format_report(&report));
    }
    Ok(())
}

fn cmd_sweep(cfg: &PipelineConfig, args: SweepArgs) -> Result<()> {
    let templates = required(args.templates, &cfg.paths.templates, "templates")?;
    let tracks = required(args.tracks, &cfg.paths.tracks, "tracks")?;
    let gt = required(args.ground_truth, &cfg.paths.ground_truth, "ground-truth")?;
    let lengths = args.lengths.unwrap_or_else(|| cfg.sweep_lengths.clone());
    let clouds = io::load_templates(&templates, Some(cfg.dim))?;
    let tracks = io::load_tracks(&tracks, Some(cfg.dim))?;
    let gt = io::load_ground_truth(&gt)?;
    let results = segment_sweep(&tracks, &clouds, &cfg.labeler, &gt, cfg.fps, &lengths)?;
    for r in &results {
        println!(
            "{:>10.1}s {:>6} tracks accuracy {:.4}",
            r.length, r.report.n_tracks, r.report.overall_accuracy
        );
    }
    if let Some(out) = args.out.or_else(|| cfg.paths.report.clone()) {
        io::save_sweep(&out, &results)?;
    }
    Ok(())
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), overrides)?;
    match cli.command {
        Command::Track(a) => cmd_track(&cfg, a),
        Command::Label(a) => cmd_label(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Synth(a) => cmd_synth(&cfg, a),
        Command::Pipeline(a) => cmd_pipeline(&cfg, a),
        Command::Sweep(a) => cmd_sweep(&cfg, a),
    }
}

/// 1 for bad input or configuration, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
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

    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
