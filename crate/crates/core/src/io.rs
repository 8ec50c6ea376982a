//! On-disk formats: model and observation directories, recovery and feature
//! files, landmark and box CSVs, PNG frame streams.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::eyes::{EyeLandmarks, EyeTrack, LANDMARK_COUNT};
use crate::frame::RgbFrame;
use crate::metrics::FeatureSet;
use crate::model::{MorphableModel, ShapeCoefficients};
use crate::pipeline::BoundingBox;
use crate::raster::VisibilityMask;
use crate::recon::{FrameObservation, FrameRecovery};

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub vertex_count: usize,
    pub identity_dim: usize,
    pub expression_dim: usize,
    pub triangle_count: usize,
    pub version: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationManifest {
    pub vertex_count: usize,
    pub frame_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub n: usize,
    pub d: usize,
}

/// Serialized form of one [`FrameRecovery`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub frame_index: usize,
    pub pose: CameraPose,
    pub identity: Vec<f64>,
    pub expression: Vec<f64>,
    pub residual_rms: f64,
}

impl From<&FrameRecovery> for RecoveryRecord {
    fn from(r: &FrameRecovery) -> Self {
        Self {
            frame_index: r.frame_index,
            pose: r.pose,
            identity: r.coeffs.identity.clone(),
            expression: r.coeffs.expression.clone(),
            residual_rms: r.residual_rms,
        }
    }
}

impl RecoveryRecord {
    pub fn into_recovery(self) -> Result<FrameRecovery> {
        self.pose.validate()?;
        Ok(FrameRecovery {
            frame_index: self.frame_index,
            pose: self.pose,
            coeffs: ShapeCoefficients {
                identity: self.identity,
                expression: self.expression,
            },
            residual_rms: self.residual_rms,
            iterations: 0,
            converged: true,
        })
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_f32_vec(path: &Path, expected: Option<usize>) -> Result<Vec<f64>> {
    let bytes = read_bytes(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Ingest(format!(
            "{}: {} bytes is not a whole number of f32 values",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if let Some(n) = expected {
        if values.len() != n {
            return Err(Error::Ingest(format!(
                "{}: expected {n} values, found {}",
                path.display(),
                values.len()
            )));
        }
    }
    Ok(values)
}

pub fn write_f32_vec(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(|v| (v as f32).to_le_bytes()).collect();
    write_bytes(path, &bytes)
}

fn read_u32_vec(path: &Path, expected: usize) -> Result<Vec<u32>> {
    let bytes = read_bytes(path)?;
    if bytes.len() != expected * 4 {
        return Err(Error::Ingest(format!(
            "{}: expected {expected} u32 values, found {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_u32_vec(path: &Path, values: impl IntoIterator<Item = u32>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(u32::to_le_bytes).collect();
    write_bytes(path, &bytes)
}

pub fn read_model_dir(dir: &Path) -> Result<MorphableModel> {
    let manifest: ModelManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.version != MODEL_VERSION {
        return Err(Error::Ingest(format!(
            "{}: unsupported model version {}",
            dir.display(),
            manifest.version
        )));
    }
    let n3 = manifest.vertex_count * 3;
    let mean = read_f32_vec(&dir.join("mean_shape.f32"), Some(n3))?;
    let u_id = read_f32_vec(&dir.join("u_id.f32"), Some(n3 * manifest.identity_dim))?;
    let u_exp = read_f32_vec(&dir.join("u_exp.f32"), Some(n3 * manifest.expression_dim))?;
    let tris = read_u32_vec(&dir.join("triangles.u32"), manifest.triangle_count * 3)?;
    MorphableModel::new(
        mean,
        DMatrix::from_vec(n3, manifest.identity_dim, u_id),
        DMatrix::from_vec(n3, manifest.expression_dim, u_exp),
        tris.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect(),
    )
}

/// Writes the model as binary32. Bases written this way are orthonormal
/// only to single precision.
pub fn write_model_dir(dir: &Path, model: &MorphableModel) -> Result<()> {
    create_dir(dir)?;
    write_json(
        &dir.join("manifest.json"),
        &ModelManifest {
            vertex_count: model.vertex_count(),
            identity_dim: model.identity_dim(),
            expression_dim: model.expression_dim(),
            triangle_count: model.triangle_count(),
            version: MODEL_VERSION,
        },
    )?;
    write_f32_vec(&dir.join("mean_shape.f32"), model.mean_shape().iter().copied())?;
    write_f32_vec(&dir.join("u_id.f32"), model.identity_basis().iter().copied())?;
    write_f32_vec(&dir.join("u_exp.f32"), model.expression_basis().iter().copied())?;
    write_u32_vec(&dir.join("triangles.u32"), model.triangles().iter().flatten().copied())
}

pub fn frame_file_name(prefix: &str, index: usize, ext: &str) -> String {
    format!("{prefix}_{index:06}.{ext}")
}

/// Files named `{prefix}_NNNNNN.{ext}` in `dir`, ordered by index. The
/// indices must run 0, 1, 2, … without gaps.
pub fn list_frame_stream(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let head = format!("{prefix}_");
    let tail = format!(".{ext}");
    let mut found = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(digits) = name.strip_prefix(&head).and_then(|s| s.strip_suffix(&tail)) else {
            continue;
        };
        if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        found.insert(digits.parse::<usize>().expect("six digits"), entry.path());
    }
    for (expected, &index) in found.keys().enumerate() {
        if index != expected {
            return Err(Error::Ingest(format!(
                "{}: {prefix} stream has a gap, frame {expected:06} is missing",
                dir.display()
            )));
        }
    }
    Ok(found.into_values().collect())
}

pub fn read_observations(dir: &Path) -> Result<Vec<FrameObservation>> {
    let manifest: ObservationManifest = read_json(&dir.join("obs_manifest.json"))?;
    let files = list_frame_stream(dir, "frame", "f32")?;
    if files.len() != manifest.frame_count {
        return Err(Error::Ingest(format!(
            "{}: manifest lists {} frames, found {}",
            dir.display(),
            manifest.frame_count,
            files.len()
        )));
    }
    files
        .iter()
        .enumerate()
        .map(|(t, path)| {
            let v = read_f32_vec(path, Some(manifest.vertex_count * 3))?;
            FrameObservation::new(t, v)
        })
        .collect()
}

pub fn write_observations(dir: &Path, observations: &[FrameObservation]) -> Result<()> {
    create_dir(dir)?;
    let vertex_count = observations.first().map_or(0, |o| o.vertices.len() / 3);
    write_json(
        &dir.join("obs_manifest.json"),
        &ObservationManifest {
            vertex_count,
            frame_count: observations.len(),
        },
    )?;
    for (t, obs) in observations.iter().enumerate() {
        write_f32_vec(&dir.join(frame_file_name("frame", t, "f32")), obs.vertices.iter().copied())?;
    }
    Ok(())
}

pub fn read_recoveries(path: &Path) -> Result<Vec<FrameRecovery>> {
    let records: Vec<RecoveryRecord> = read_json(path)?;
    records.into_iter().map(RecoveryRecord::into_recovery).collect()
}

pub fn write_recoveries(path: &Path, recoveries: &[FrameRecovery]) -> Result<()> {
    let records: Vec<RecoveryRecord> = recoveries.iter().map(Into::into).collect();
    write_json(path, &records)
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads `features.f32` and its `{n, d}` sidecar (same stem, `.json`).
pub fn read_features(path: &Path) -> Result<FeatureSet> {
    let side: FeatureSidecar = read_json(&sidecar_path(path))?;
    let values = read_f32_vec(path, Some(side.n * side.d))?;
    FeatureSet::new(side.n, side.d, &values)
}

pub fn write_features(path: &Path, features: &FeatureSet) -> Result<()> {
    let m = features.matrix();
    write_f32_vec(path, m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))?;
    write_json(
        &sidecar_path(path),
        &FeatureSidecar {
            n: features.samples(),
            d: features.dim(),
        },
    )
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))
}

fn parse_rows(path: &Path, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (line, record) in csv_reader(path)?.records().enumerate() {
        let bad = |msg: String| Error::Ingest(format!("{}: row {}: {msg}", path.display(), line + 1));
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != width + 1 {
            return Err(bad(format!("expected {} fields, found {}", width + 1, record.len())));
        }
        let index = record[0]
            .parse::<usize>()
            .map_err(|e| bad(format!("frame index: {e}")))?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if index != rows.len() {
            return Err(bad(format!("frame index {index}, expected {}", rows.len())));
        }
        rows.push((index, values));
    }
    Ok(rows)
}

/// One row per frame: frame index then x1,y1,…,x68,y68.
pub fn read_landmarks_csv(path: &Path) -> Result<Vec<Vec<Vector2<f64>>>> {
    Ok(parse_rows(path, LANDMARK_COUNT * 2)?
        .into_iter()
        .map(|(_, v)| v.chunks_exact(2).map(|p| Vector2::new(p[0], p[1])).collect())
        .collect())
}

pub fn write_landmarks_csv(path: &Path, frames: &[Vec<Vector2<f64>>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    for (t, points) in frames.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(points.iter().flat_map(|p| [p.x.to_string(), p.y.to_string()]));
        w.write_record(&row).map_err(|e| Error::Ingest(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn eye_landmarks_from_csv(path: &Path) -> Result<Vec<EyeLandmarks>> {
    read_landmarks_csv(path)?
        .iter()
        .map(|p| EyeLandmarks::from_face_landmarks(p))
        .collect()
}

/// Rows of `frame_index,x_min,y_min,x_max,y_max`.
pub fn read_boxes_csv(path: &Path) -> Result<Vec<BoundingBox>> {
    parse_rows(path, 4)?
        .into_iter()
        .map(|(_, v)| BoundingBox::new(v[0], v[1], v[2], v[3]))
        .collect()
}

pub fn read_eye_tracks(path: &Path) -> Result<Vec<EyeTrack>> {
    read_json(path)
}

pub fn write_eye_tracks(path: &Path, tracks: &[EyeTrack]) -> Result<()> {
    write_json(path, tracks)
}

pub fn read_png(path: &Path) -> Result<RgbFrame> {
    let img = image::open(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    RgbFrame::from_raw(w as usize, h as usize, img.into_raw())
}

pub fn write_png(path: &Path, frame: &RgbFrame) -> Result<()> {
    let img = image::RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.as_raw().to_vec())
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))
}

/// Reads a gap-free `{prefix}_NNNNNN.png` stream.
pub fn read_png_stream(dir: &Path, prefix: &str) -> Result<Vec<RgbFrame>> {
    list_frame_stream(dir, prefix, "png")?
        .iter()
        .map(|p| read_png(p))
        .collect()
}

pub fn write_png_stream(dir: &Path, prefix: &str, frames: &[RgbFrame]) -> Result<()> {
    create_dir(dir)?;
    for (t, f) in frames.iter().enumerate() {
        write_png(&dir.join(frame_file_name(prefix, t, "png")), f)?;
    }
    Ok(())
}

/// Raw little-endian triangle indices, row-major, `u32::MAX` where empty.
pub fn write_visibility_mask(path: &Path, mask: &VisibilityMask) -> Result<()> {
    write_u32_vec(path, mask.as_raw().iter().copied())
}

pub fn read_visibility_mask(path: &Path, width: usize, height: usize) -> Result<VisibilityMask> {
    VisibilityMask::from_raw(width, height, read_u32_vec(path, width * height)?)
}
