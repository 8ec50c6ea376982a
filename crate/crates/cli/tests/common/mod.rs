#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reenact_core::camera::{project, CameraPose};
use reenact_core::eyes::{strictly_inside, LANDMARK_COUNT};
use reenact_core::io;
use reenact_core::model::{MorphableModel, ShapeCoefficients};
use reenact_core::raster::{rasterize_visibility, NmfcPalette};
use reenact_core::recon::FrameObservation;
use reenact_core::synth::{random_coefficients, synthetic_face_model, SyntheticModelSpec};
use reenact_core::RgbFrame;

pub const BIN: &str = env!("CARGO_BIN_EXE_reenact");

pub fn small_model(seed: u64) -> MorphableModel {
    let spec = SyntheticModelSpec {
        rings: 24,
        segments: 36,
        identity_dim: 8,
        expression_dim: 5,
        ..Default::default()
    };
    synthetic_face_model(&spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Smooth head motion centered in a 256 ROI.
pub fn sweep_pose(t: usize, n: usize, phase: f64) -> CameraPose {
    let u = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.0 };
    CameraPose::new(
        -0.5 + u + 0.1 * phase.sin(),
        0.2 * (5.0 * u + phase).sin(),
        0.1 * (3.0 * u + phase).cos(),
        128.0 + 4.0 * (2.0 * u).sin(),
        128.0,
        1.0,
    )
    .unwrap()
}

/// Per-frame coefficients sharing one identity.
pub fn sequence_coefficients(model: &MorphableModel, frames: usize, seed: u64) -> Vec<ShapeCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identity = random_coefficients(model, 6.0, &mut rng).identity;
    (0..frames)
        .map(|_| ShapeCoefficients {
            identity: identity.clone(),
            expression: random_coefficients(model, 4.0, &mut rng).expression,
        })
        .collect()
}

pub fn observe(model: &MorphableModel, coeffs: &ShapeCoefficients, pose: &CameraPose, t: usize) -> FrameObservation {
    let shape = model.assemble_shape(coeffs).unwrap();
    FrameObservation::from_points(t, &project(pose, &shape))
}

pub fn render(model: &MorphableModel, palette: &NmfcPalette, coeffs: &ShapeCoefficients, pose: &CameraPose, size: usize) -> RgbFrame {
    let shape = model.assemble_shape(coeffs).unwrap();
    palette.render(&rasterize_visibility(pose, &shape, model.triangles(), size, size)).unwrap()
}

/// Stand-in "photograph" of a face: a fixed recoloring of its NMFC over a
/// dark background.
pub fn shade(nmfc: &RgbFrame) -> RgbFrame {
    let mut out = RgbFrame::filled(nmfc.width(), nmfc.height(), [30, 30, 30]);
    for y in 0..nmfc.height() {
        for x in 0..nmfc.width() {
            let [r, g, b] = nmfc.pixel(x, y);
            if [r, g, b] != [0, 0, 0] {
                out.set_pixel(x, y, [r / 2 + 100, g, 255 - b / 2]);
            }
        }
    }
    out
}

/// 68 landmarks; only the eye contours carry meaning.
pub fn face_landmarks(t: usize) -> Vec<Vector2<f64>> {
    let dx = 2.0 * (t as f64 * 0.3).sin();
    let mut pts = vec![Vector2::new(128.0, 200.0); LANDMARK_COUNT];
    for (start, cx) in [(36, 100.0 + dx), (42, 156.0 + dx)] {
        let cy = 105.0;
        let hex = [(-12.0, 0.0), (-5.0, -5.0), (5.0, -5.0), (12.0, 0.0), (5.0, 5.0), (-5.0, 5.0)];
        for (i, (ox, oy)) in hex.iter().enumerate() {
            pts[start + i] = Vector2::new(cx + ox + 0.25, cy + oy + 0.25);
        }
    }
    pts
}

/// Whitens each eye and draws a dark radius-3 pupil.
pub fn paint_eyes(frame: &mut RgbFrame, landmarks: &[Vector2<f64>], t: usize) {
    let gaze = 3.0 * (t as f64 * 0.2).cos();
    for start in [36, 42] {
        let contour = &landmarks[start..start + 6];
        let center = contour.iter().sum::<Vector2<f64>>() / 6.0 + Vector2::new(gaze, 0.0);
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                if strictly_inside(contour, p) {
                    let dark = (p - center).norm() <= 3.0;
                    frame.set_pixel(x, y, if dark { [10, 10, 10] } else { [255, 255, 255] });
                }
            }
        }
    }
}

pub const RAW_W: usize = 300;
pub const RAW_H: usize = 290;
pub const ROI_X: usize = 20;
pub const ROI_Y: usize = 14;

/// Writes a synthetic capture under `root`:
/// `obs/` observations, `raw/frame_*.png` uncropped frames, `boxes.csv`,
/// `landmarks.csv` in ROI coordinates.
pub fn write_sequence(root: &Path, model: &MorphableModel, frames: usize, seed: u64) {
    let palette = NmfcPalette::new(&model.normalized_mean_face().unwrap(), model.triangles()).unwrap();
    let coeffs = sequence_coefficients(model, frames, seed);
    let raw = root.join("raw");
    std::fs::create_dir_all(&raw).unwrap();
    let mut obs = Vec::new();
    let mut boxes = String::new();
    let mut landmarks = Vec::new();
    for (t, c) in coeffs.iter().enumerate() {
        let pose = sweep_pose(t, frames, seed as f64);
        obs.push(observe(model, c, &pose, t));
        let lms = face_landmarks(t);
        let mut roi = shade(&render(model, &palette, c, &pose, 256));
        paint_eyes(&mut roi, &lms, t);
        let mut frame = RgbFrame::filled(RAW_W, RAW_H, [60, 60, 60]);
        for y in 0..256 {
            for x in 0..256 {
                frame.set_pixel(x + ROI_X, y + ROI_Y, roi.pixel(x, y));
            }
        }
        io::write_png(&raw.join(io::frame_file_name("frame", t, "png")), &frame).unwrap();
        // Jitter that averages out over each pair of frames.
        let j = if t % 2 == 0 { 1.5 } else { -1.5 };
        let (x0, y0) = (ROI_X as f64 + j, ROI_Y as f64 - j);
        boxes.push_str(&format!("{t},{},{},{},{}\n", x0, y0, x0 + 256.0, y0 + 256.0));
        landmarks.push(lms);
    }
    io::write_observations(&root.join("obs"), &obs).unwrap();
    std::fs::write(root.join("boxes.csv"), boxes).unwrap();
    io::write_landmarks_csv(&root.join("landmarks.csv"), &landmarks).unwrap();
}

/// Source and target captures plus the model, all under `root`.
pub fn write_fixture(root: &Path, frames: usize) {
    let model = small_model(11);
    io::write_model_dir(&root.join("model"), &model).unwrap();
    write_sequence(&root.join("source"), &model, frames, 1);
    write_sequence(&root.join("target"), &model, frames, 2);
}

pub fn reenact(dir: &Path, threads: &str, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env("H2H_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn check(out: Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs every subcommand over a fixture in `dir` (relative paths only),
/// writing results under `dir/run`.
pub fn run_pipeline(dir: &Path, threads: &str, mode: &str) {
    let steps: Vec<Vec<&str>> = vec![
        vec!["fit", "--model-dir", "model", "--obs-dir", "source/obs", "--out", "run/source.json"],
        vec!["fit", "--model-dir", "model", "--obs-dir", "target/obs", "--out", "run/target.json"],
        vec!["crop", "--frames-dir", "target/raw", "--boxes", "target/boxes.csv", "--size", "256", "--out-dir", "run/train"],
        vec!["crop", "--frames-dir", "source/raw", "--boxes", "source/boxes.csv", "--size", "256", "--out-dir", "run/source_roi"],
        vec!["nmfc", "--model-dir", "model", "--recovery", "run/target.json", "--size", "256", "--out-dir", "run/train"],
        vec!["eyes", "--landmarks", "target/landmarks.csv", "--frames-dir", "run/train", "--out-dir", "run/target_eyes"],
        vec!["eyes", "--landmarks", "source/landmarks.csv", "--frames-dir", "run/source_roi", "--out-dir", "run/source_eyes"],
        vec![
            "reenact", "--mode", mode, "--model-dir", "model", "--source-recovery", "run/source.json",
            "--target-recovery", "run/target.json", "--train-pairs", "run/train",
            "--source-eyes", "run/source_eyes/eyes.json", "--target-eyes", "run/target_eyes/eyes.json",
            "--out-dir", "run/out",
        ],
        vec![
            "metrics", "--real", "run/source_roi", "--fake", "run/out", "--masks-from-nmfc", "run/out",
            "--recoveries", "run/source.json", "run/target.json",
            "--eyes", "run/source_eyes/eyes.json", "run/target_eyes/eyes.json",
            "--out", "run/report.json",
        ],
    ];
    for step in steps {
        check(reenact(dir, threads, &step), step[0]);
    }
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
