//! Sequence-level orchestration: ROI cropping, reenactment parameter
//! routing, conditional-input generation and the nearest-neighbour
//! baseline renderer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eyes::{render_eye_sketch, EyeTrack};
use crate::frame::RgbFrame;
use crate::model::{MorphableModel, ShapeCoefficients};
use crate::camera::CameraPose;
use crate::raster::{rasterize_visibility, NmfcPalette};
use crate::recon::FrameRecovery;

pub const ROI_SIZE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::Invalid(format!("bounding box {b} is empty")));
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]x[{}, {}]", self.x_min, self.x_max, self.y_min, self.y_max)
    }
}

/// Coordinate-wise mean of the boxes.
pub fn mean_bounding_box(boxes: &[BoundingBox]) -> Result<BoundingBox> {
    if boxes.is_empty() {
        return Err(Error::EmptyInput("bounding boxes"));
    }
    let n = boxes.len() as f64;
    let mut sum = [0.0; 4];
    for b in boxes {
        sum[0] += b.x_min;
        sum[1] += b.y_min;
        sum[2] += b.x_max;
        sum[3] += b.y_max;
    }
    BoundingBox::new(sum[0] / n, sum[1] / n, sum[2] / n, sum[3] / n)
}

/// Mean box, grown to a square on its longer side about its center, then
/// clamped to the frame.
pub fn average_bounding_box(
    boxes: &[BoundingBox],
    frame_width: usize,
    frame_height: usize,
) -> Result<BoundingBox> {
    let mean = mean_bounding_box(boxes)?;
    let side = mean.width().max(mean.height());
    let cx = 0.5 * (mean.x_min + mean.x_max);
    let cy = 0.5 * (mean.y_min + mean.y_max);
    let clamp_x = |v: f64| v.clamp(0.0, frame_width as f64);
    let clamp_y = |v: f64| v.clamp(0.0, frame_height as f64);
    let squared = BoundingBox {
        x_min: clamp_x(cx - 0.5 * side),
        y_min: clamp_y(cy - 0.5 * side),
        x_max: clamp_x(cx + 0.5 * side),
        y_max: clamp_y(cy + 0.5 * side),
    };
    if !(squared.x_min < squared.x_max && squared.y_min < squared.y_max) {
        return Err(Error::OutOfFrame(mean.to_string()));
    }
    Ok(squared)
}

/// Resamples `bbox` to a `size × size` image with bilinear filtering.
/// Samples beyond the frame replicate the nearest edge pixel.
pub fn crop_roi(frame: &RgbFrame, bbox: &BoundingBox, size: usize) -> Result<RgbFrame> {
    let (w, h) = (frame.width(), frame.height());
    let overlaps = bbox.x_min < w as f64 && bbox.x_max > 0.0 && bbox.y_min < h as f64 && bbox.y_max > 0.0;
    if !overlaps || w == 0 || h == 0 || bbox.width() <= 0.0 || bbox.height() <= 0.0 {
        return Err(Error::OutOfFrame(bbox.to_string()));
    }
    let sx = bbox.width() / size as f64;
    let sy = bbox.height() / size as f64;
    let mut out = RgbFrame::black(size, size);
    let fetch = |x: i64, y: i64| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        frame.pixel(x, y)
    };
    for j in 0..size {
        let y = bbox.y_min + (j as f64 + 0.5) * sy - 0.5;
        let y0 = y.floor();
        let fy = y - y0;
        for i in 0..size {
            let x = bbox.x_min + (i as f64 + 0.5) * sx - 0.5;
            let x0 = x.floor();
            let fx = x - x0;
            let (xi, yi) = (x0 as i64, y0 as i64);
            let p00 = fetch(xi, yi);
            let p10 = fetch(xi + 1, yi);
            let p01 = fetch(xi, yi + 1);
            let p11 = fetch(xi + 1, yi + 1);
            let rgb = [0, 1, 2].map(|k| {
                let top = p00[k] as f64 * (1.0 - fx) + p10[k] as f64 * fx;
                let bottom = p01[k] as f64 * (1.0 - fx) + p11[k] as f64 * fx;
                (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
            });
            out.set_pixel(i, j, rgb);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReenactmentMode {
    /// Target driven by its own footage.
    #[serde(rename = "self")]
    SelfReenactment,
    /// Source expressions under the target's own head pose and eyes.
    Face,
    /// Source pose, expressions and eyes transferred to the target.
    Head,
}

impl std::str::FromStr for ReenactmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "self" => Ok(Self::SelfReenactment),
            "face" => Ok(Self::Face),
            "head" => Ok(Self::Head),
            other => Err(Error::Invalid(format!("unknown reenactment mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeSource {
    Source,
    Target,
}

/// Parameters driving one output frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedFrame {
    pub frame_index: usize,
    pub coeffs: ShapeCoefficients,
    pub pose: CameraPose,
    pub eye_source: EyeSource,
}

/// Combines the target's average identity with per-frame source expressions.
/// Head (and self) mode also takes the source pose and eyes; face mode keeps
/// the target's pose and eyes frame by frame.
pub fn route_parameters(
    mode: ReenactmentMode,
    source: &[FrameRecovery],
    target: &[FrameRecovery],
    target_avg_identity: &[f64],
) -> Result<Vec<RoutedFrame>> {
    if mode == ReenactmentMode::Face && target.len() < source.len() {
        return Err(Error::TargetExhausted {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    source
        .iter()
        .enumerate()
        .map(|(t, src)| {
            if src.coeffs.identity.len() != target_avg_identity.len() {
                return Err(Error::Dimension(format!(
                    "source frame {} identity length {} vs target average {}",
                    src.frame_index,
                    src.coeffs.identity.len(),
                    target_avg_identity.len()
                )));
            }
            let (pose, eye_source) = match mode {
                ReenactmentMode::Head | ReenactmentMode::SelfReenactment => {
                    (src.pose, EyeSource::Source)
                }
                ReenactmentMode::Face => (target[t].pose, EyeSource::Target),
            };
            Ok(RoutedFrame {
                frame_index: t,
                coeffs: ShapeCoefficients {
                    identity: target_avg_identity.to_vec(),
                    expression: src.coeffs.expression.clone(),
                },
                pose,
                eye_source,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalInput {
    pub frame_index: usize,
    pub nmfc: RgbFrame,
    /// Present when eye tracks were supplied for the routed eye source.
    pub eyes: Option<RgbFrame>,
}

/// Renders NMFC and eye-sketch frames for routed parameters.
pub struct ConditionalRenderer<'a> {
    model: &'a MorphableModel,
    palette: NmfcPalette,
    size: usize,
}

impl<'a> ConditionalRenderer<'a> {
    pub fn new(model: &'a MorphableModel, size: usize) -> Result<Self> {
        let palette = NmfcPalette::new(&model.normalized_mean_face()?, model.triangles())?;
        Ok(Self {
            model,
            palette,
            size,
        })
    }

    pub fn palette(&self) -> &NmfcPalette {
        &self.palette
    }

    pub fn render_nmfc(&self, coeffs: &ShapeCoefficients, pose: &CameraPose) -> Result<RgbFrame> {
        let shape = self.model.assemble_shape(coeffs)?;
        let mask = rasterize_visibility(pose, &shape, self.model.triangles(), self.size, self.size);
        self.palette.render(&mask)
    }

    pub fn render_frame(&self, routed: &RoutedFrame, eyes: Option<&EyeTrack>) -> Result<ConditionalInput> {
        let nmfc = self.render_nmfc(&routed.coeffs, &routed.pose)?;
        let eyes = eyes.map(|e| render_eye_sketch(&e.landmarks, &e.pupils, self.size).frame);
        Ok(ConditionalInput {
            frame_index: routed.frame_index,
            nmfc,
            eyes,
        })
    }
}

/// Renders every routed frame independently, in parallel, returning them
/// in input order. Eye tracks are indexed by frame position.
pub fn generate_conditional_inputs(
    renderer: &ConditionalRenderer<'_>,
    routed: &[RoutedFrame],
    source_eyes: Option<&[EyeTrack]>,
    target_eyes: Option<&[EyeTrack]>,
) -> Result<Vec<ConditionalInput>> {
    for (name, eyes) in [("source", source_eyes), ("target", target_eyes)] {
        if let Some(e) = eyes {
            let needed = routed
                .iter()
                .filter(|r| (r.eye_source == EyeSource::Source) == (name == "source"))
                .count();
            if needed > 0 && e.len() < routed.len() {
                return Err(Error::Dimension(format!(
                    "{name} eye tracks cover {} frames, {} routed",
                    e.len(),
                    routed.len()
                )));
            }
        }
    }
    routed
        .par_iter()
        .enumerate()
        .map(|(t, r)| {
            let eyes = match r.eye_source {
                EyeSource::Source => source_eyes,
                EyeSource::Target => target_eyes,
            }
            .map(|e| &e[t]);
            renderer.render_frame(r, eyes)
        })
        .collect()
}

/// Side of the square grid NMFCs are box-filtered to before comparison.
pub const NN_GRID: usize = 32;

/// Box-filters an image to `grid × grid` cells, averaging each channel.
pub fn box_downsample(image: &RgbFrame, grid: usize) -> Result<Vec<f64>> {
    let (w, h) = (image.width(), image.height());
    if w < grid || h < grid {
        return Err(Error::Dimension(format!(
            "{w}x{h} image is smaller than the {grid}x{grid} grid"
        )));
    }
    let mut out = Vec::with_capacity(grid * grid * 3);
    for gy in 0..grid {
        let (y0, y1) = (gy * h / grid, (gy + 1) * h / grid);
        for gx in 0..grid {
            let (x0, x1) = (gx * w / grid, (gx + 1) * w / grid);
            let mut acc = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = image.pixel(x, y);
                    for k in 0..3 {
                        acc[k] += p[k] as u64;
                    }
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            out.extend(acc.map(|a| a as f64 / n));
        }
    }
    Ok(out)
}

/// Retrieval stand-in for a learned renderer: returns the training frame
/// whose NMFC is closest to the query after box-downsampling.
pub struct NnBaseline {
    descriptors: Vec<Vec<f64>>,
    frames: Vec<RgbFrame>,
    width: usize,
    height: usize,
}

impl NnBaseline {
    pub fn new(pairs: Vec<(RgbFrame, RgbFrame)>) -> Result<Self> {
        let first = pairs.first().ok_or(Error::EmptyInput("training pairs"))?;
        let (width, height) = (first.0.width(), first.0.height());
        let mut descriptors = Vec::with_capacity(pairs.len());
        let mut frames = Vec::with_capacity(pairs.len());
        for (i, (nmfc, frame)) in pairs.into_iter().enumerate() {
            if nmfc.width() != width || nmfc.height() != height {
                return Err(Error::Dimension(format!(
                    "training NMFC {i} is {}x{}, expected {width}x{height}",
                    nmfc.width(),
                    nmfc.height()
                )));
            }
            descriptors.push(box_downsample(&nmfc, NN_GRID)?);
            frames.push(frame);
        }
        Ok(Self {
            descriptors,
            frames,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the nearest training NMFC; ties go to the lower index.
    pub fn nearest(&self, query: &RgbFrame) -> Result<usize> {
        if query.width() != self.width || query.height() != self.height {
            return Err(Error::Dimension(format!(
                "query is {}x{}, training NMFCs are {}x{}",
                query.width(),
                query.height(),
                self.width,
                self.height
            )));
        }
        let q = box_downsample(query, NN_GRID)?;
        let mut best = (f64::INFINITY, 0);
        for (i, d) in self.descriptors.iter().enumerate() {
            let dist: f64 = d.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.0 {
                best = (dist, i);
            }
        }
        Ok(best.1)
    }

    pub fn render(&self, query: &RgbFrame) -> Result<&RgbFrame> {
        Ok(&self.frames[self.nearest(query)?])
    }
}

pub fn nn_baseline_render(train_pairs: &[(RgbFrame, RgbFrame)], query: &RgbFrame) -> Result<RgbFrame> {
    NnBaseline::new(train_pairs.to_vec())?.render(query).cloned()
}
