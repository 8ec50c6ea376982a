//! `reenact`: command-line front end for the geometry pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use reenact_core::eyes::{detect_pupils, render_eye_sketch, EyeTrack, SKETCH_SIZE};
use reenact_core::io;
use reenact_core::metrics::{evaluate, EvaluationInputs, MetricReport};
use reenact_core::pipeline::{
    average_bounding_box, crop_roi, generate_conditional_inputs, route_parameters, ConditionalRenderer,
    NnBaseline, ReenactmentMode, ROI_SIZE,
};
use reenact_core::raster::{nmfc_facial_mask, rasterize_visibility, NmfcPalette};
use reenact_core::recon::{average_identity, recover_frame};
use reenact_core::{Error, Result};

const EXIT_VALIDATION: u8 = 2;
const EXIT_INGEST: u8 = 3;

#[derive(Parser)]
#[command(name = "reenact", version, about = "3DMM geometry pipeline for face reenactment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover pose and shape coefficients for every observed frame.
    Fit(FitArgs),
    /// Render NMFC images from a recovery file.
    Nmfc(NmfcArgs),
    /// Detect pupils and render eye sketches.
    Eyes(EyesArgs),
    /// Crop every frame to the sequence's average face box.
    Crop(CropArgs),
    /// Route parameters between sequences and render conditional inputs.
    Reenact(ReenactArgs),
    /// Compare real and generated sequences.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    obs_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NmfcArgs {
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    recovery: PathBuf,
    #[arg(long, default_value_t = ROI_SIZE)]
    size: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write raw visibility masks as `mask_NNNNNN.u32`.
    #[arg(long)]
    dump_masks: bool,
}

#[derive(Args)]
struct EyesArgs {
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    frames_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = SKETCH_SIZE)]
    size: usize,
}

#[derive(Args)]
struct CropArgs {
    #[arg(long)]
    frames_dir: PathBuf,
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long, default_value_t = ROI_SIZE)]
    size: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReenactArgs {
    #[arg(long)]
    mode: ReenactmentMode,
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    source_recovery: PathBuf,
    #[arg(long)]
    target_recovery: PathBuf,
    /// Directory of `nmfc_NNNNNN.png` / `frame_NNNNNN.png` training pairs.
    #[arg(long)]
    train_pairs: PathBuf,
    /// Eye tracks (`eyes.json`) of the source sequence.
    #[arg(long)]
    source_eyes: Option<PathBuf>,
    /// Eye tracks (`eyes.json`) of the target sequence.
    #[arg(long)]
    target_eyes: Option<PathBuf>,
    #[arg(long, default_value_t = ROI_SIZE)]
    size: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory of real `frame_NNNNNN.png` frames.
    #[arg(long)]
    real: Option<PathBuf>,
    /// Directory of generated `frame_NNNNNN.png` frames.
    #[arg(long)]
    fake: Option<PathBuf>,
    /// NMFC directory whose non-black pixels define the MAPD masks.
    #[arg(long)]
    masks_from_nmfc: Option<PathBuf>,
    #[arg(long, requires = "features_fake")]
    features_real: Option<PathBuf>,
    #[arg(long, requires = "features_real")]
    features_fake: Option<PathBuf>,
    /// Real and generated recovery files.
    #[arg(long, num_args = 2, value_names = ["REAL", "FAKE"])]
    recoveries: Option<Vec<PathBuf>>,
    /// Real and generated eye-track files.
    #[arg(long, num_args = 2, value_names = ["REAL", "FAKE"])]
    eyes: Option<Vec<PathBuf>>,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Ingest(format!("{}: {e}", dir.display())))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn fit(args: &FitArgs) -> Result<()> {
    let model = io::read_model_dir(&args.model_dir)?;
    let observations = io::read_observations(&args.obs_dir)?;
    let recoveries = observations
        .par_iter()
        .map(|obs| recover_frame(&model, obs))
        .collect::<Result<Vec<_>>>()?;
    for r in recoveries.iter().filter(|r| !r.converged) {
        log::warn!(
            "frame {} did not converge in {} iterations (residual {:.3e})",
            r.frame_index,
            r.iterations,
            r.residual_rms
        );
    }
    ensure_parent(&args.out)?;
    io::write_recoveries(&args.out, &recoveries)?;
    log::info!("recovered {} frames", recoveries.len());
    Ok(())
}

fn nmfc(args: &NmfcArgs) -> Result<()> {
    let model = io::read_model_dir(&args.model_dir)?;
    let recoveries = io::read_recoveries(&args.recovery)?;
    let palette = NmfcPalette::new(&model.normalized_mean_face()?, model.triangles())?;
    create_dir(&args.out_dir)?;
    recoveries.par_iter().enumerate().try_for_each(|(t, r)| {
        let shape = model.assemble_shape(&r.coeffs)?;
        let mask = rasterize_visibility(&r.pose, &shape, model.triangles(), args.size, args.size);
        if args.dump_masks {
            io::write_visibility_mask(&args.out_dir.join(io::frame_file_name("mask", t, "u32")), &mask)?;
        }
        io::write_png(&args.out_dir.join(io::frame_file_name("nmfc", t, "png")), &palette.render(&mask)?)
    })
}

fn eyes(args: &EyesArgs) -> Result<()> {
    let landmarks = io::eye_landmarks_from_csv(&args.landmarks)?;
    let frames = io::list_frame_stream(&args.frames_dir, "frame", "png")?;
    if frames.len() != landmarks.len() {
        return Err(Error::Ingest(format!(
            "{} landmark rows for {} frames",
            landmarks.len(),
            frames.len()
        )));
    }
    create_dir(&args.out_dir)?;
    let tracks = frames
        .par_iter()
        .zip(&landmarks)
        .enumerate()
        .map(|(t, (path, lms))| {
            let gray = io::read_png(path)?.to_gray();
            let pupils = detect_pupils(lms, &gray)?;
            let sketch = render_eye_sketch(lms, &pupils, args.size);
            if sketch.clipped {
                log::warn!("frame {t}: eye sketch clipped at the frame border");
            }
            io::write_png(&args.out_dir.join(io::frame_file_name("eyes", t, "png")), &sketch.frame)?;
            Ok(EyeTrack {
                frame_index: t,
                landmarks: *lms,
                pupils,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_eye_tracks(&args.out_dir.join("eyes.json"), &tracks)
}

fn crop(args: &CropArgs) -> Result<()> {
    let frames = io::list_frame_stream(&args.frames_dir, "frame", "png")?;
    let boxes = io::read_boxes_csv(&args.boxes)?;
    if boxes.len() != frames.len() {
        return Err(Error::Ingest(format!("{} boxes for {} frames", boxes.len(), frames.len())));
    }
    let first = io::read_png(frames.first().ok_or(Error::EmptyInput("frames"))?)?;
    let roi = average_bounding_box(&boxes, first.width(), first.height())?;
    log::info!("average ROI {roi}");
    create_dir(&args.out_dir)?;
    frames.par_iter().enumerate().try_for_each(|(t, path)| {
        let frame = io::read_png(path)?;
        let out = crop_roi(&frame, &roi, args.size)?;
        io::write_png(&args.out_dir.join(io::frame_file_name("frame", t, "png")), &out)
    })
}

fn reenact(args: &ReenactArgs) -> Result<()> {
    let model = io::read_model_dir(&args.model_dir)?;
    let source = io::read_recoveries(&args.source_recovery)?;
    let target = io::read_recoveries(&args.target_recovery)?;
    let target_identity = average_identity(&target)?;
    let routed = route_parameters(args.mode, &source, &target, &target_identity)?;
    let source_eyes = args.source_eyes.as_deref().map(io::read_eye_tracks).transpose()?;
    let target_eyes = args.target_eyes.as_deref().map(io::read_eye_tracks).transpose()?;

    let nmfcs = io::read_png_stream(&args.train_pairs, "nmfc")?;
    let frames = io::read_png_stream(&args.train_pairs, "frame")?;
    if nmfcs.len() != frames.len() {
        return Err(Error::Ingest(format!(
            "{} training NMFCs but {} training frames",
            nmfcs.len(),
            frames.len()
        )));
    }
    let baseline = NnBaseline::new(nmfcs.into_iter().zip(frames).collect())?;

    let renderer = ConditionalRenderer::new(&model, args.size)?;
    let inputs = generate_conditional_inputs(&renderer, &routed, source_eyes.as_deref(), target_eyes.as_deref())?;
    create_dir(&args.out_dir)?;
    inputs.par_iter().enumerate().try_for_each(|(t, input)| {
        io::write_png(&args.out_dir.join(io::frame_file_name("nmfc", t, "png")), &input.nmfc)?;
        if let Some(eyes) = &input.eyes {
            io::write_png(&args.out_dir.join(io::frame_file_name("eyes", t, "png")), eyes)?;
        }
        io::write_png(
            &args.out_dir.join(io::frame_file_name("frame", t, "png")),
            baseline.render(&input.nmfc)?,
        )
    })?;
    io::write_json(&args.out_dir.join("routed.json"), &routed)?;
    log::info!("rendered {} frames", inputs.len());
    Ok(())
}

#[derive(Serialize)]
struct Provenance {
    inputs: BTreeMap<String, String>,
    frame_counts: BTreeMap<String, usize>,
    decisions: Decisions,
}

#[derive(Serialize)]
struct Decisions {
    ard_aggregation: &'static str,
    mapd_pooling: &'static str,
    mmd_bandwidth: String,
}

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    metrics: MetricReport,
    provenance: Provenance,
}

fn pair(paths: &Option<Vec<PathBuf>>) -> Option<(&Path, &Path)> {
    paths.as_ref().map(|p| (p[0].as_path(), p[1].as_path()))
}

fn metrics(args: &MetricsArgs) -> Result<()> {
    let mut inputs_used = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut note = |name: &str, path: &Path| {
        inputs_used.insert(name.to_string(), path.display().to_string());
    };

    let read_frames = |p: &Option<PathBuf>, prefix: &str| p.as_deref().map(|d| io::read_png_stream(d, prefix)).transpose();
    let real = read_frames(&args.real, "frame")?;
    let fake = read_frames(&args.fake, "frame")?;
    let masks = read_frames(&args.masks_from_nmfc, "nmfc")?
        .map(|n| n.iter().map(nmfc_facial_mask).collect::<Vec<_>>());
    for (name, p) in [("real", &args.real), ("fake", &args.fake), ("masks_from_nmfc", &args.masks_from_nmfc)] {
        if let Some(p) = p {
            note(name, p);
        }
    }
    if let Some(r) = &real {
        counts.insert("real_frames".into(), r.len());
    }
    if let Some(f) = &fake {
        counts.insert("fake_frames".into(), f.len());
    }

    let recoveries = match pair(&args.recoveries) {
        Some((r, f)) => {
            note("real_recovery", r);
            note("fake_recovery", f);
            Some((io::read_recoveries(r)?, io::read_recoveries(f)?))
        }
        None => None,
    };
    let eye_tracks = match pair(&args.eyes) {
        Some((r, f)) => {
            note("real_eyes", r);
            note("fake_eyes", f);
            Some((io::read_eye_tracks(r)?, io::read_eye_tracks(f)?))
        }
        None => None,
    };
    let features = match (&args.features_real, &args.features_fake) {
        (Some(r), Some(f)) => {
            note("features_real", r);
            note("features_fake", f);
            Some((io::read_features(r)?, io::read_features(f)?))
        }
        _ => None,
    };
    if let Some((r, f)) = &recoveries {
        counts.insert("real_recovery_frames".into(), r.len());
        counts.insert("fake_recovery_frames".into(), f.len());
    }
    if let Some((r, f)) = &features {
        counts.insert("real_feature_samples".into(), r.samples());
        counts.insert("fake_feature_samples".into(), f.samples());
    }

    let report = evaluate(&EvaluationInputs {
        real_frames: real.as_deref(),
        fake_frames: fake.as_deref(),
        masks: masks.as_deref(),
        real_recoveries: recoveries.as_ref().map(|r| r.0.as_slice()),
        fake_recoveries: recoveries.as_ref().map(|r| r.1.as_slice()),
        real_eyes: eye_tracks.as_ref().map(|e| e.0.as_slice()),
        fake_eyes: eye_tracks.as_ref().map(|e| e.1.as_slice()),
        real_features: features.as_ref().map(|f| &f.0),
        fake_features: features.as_ref().map(|f| &f.1),
    })?;
    let mmd_bandwidth = match report.mmd_bandwidth {
        Some(bw) => format!("median heuristic ({bw})"),
        None => "median heuristic".into(),
    };
    ensure_parent(&args.out)?;
    io::write_json(
        &args.out,
        &Report {
            metrics: report,
            provenance: Provenance {
                inputs: inputs_used,
                frame_counts: counts,
                decisions: Decisions {
                    ard_aggregation: "mean of absolute wrapped yaw/pitch/roll differences, degrees",
                    mapd_pooling: "global over all masked pixels of all frames",
                    mmd_bandwidth,
                },
            },
        },
    )
}

fn configure_threads() -> Result<()> {
    let threads = match std::env::var("H2H_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Invalid(format!("H2H_THREADS={v:?} is not a non-negative integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Nmfc(a) => nmfc(a),
        Command::Eyes(a) => eyes(a),
        Command::Crop(a) => crop(a),
        Command::Reenact(a) => reenact(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_ingest() { EXIT_INGEST } else { EXIT_VALIDATION })
        }
    }
}
