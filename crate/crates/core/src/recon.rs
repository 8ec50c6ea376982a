//! Per-frame recovery of camera pose and shape coefficients from dense
//! image-space vertices, by alternating pose estimation and basis projection.

use nalgebra::{Vector2, Vector3};

use crate::camera::{estimate_pose, CameraPose};
use crate::error::{Error, Result};
use crate::model::{FaceShape, MorphableModel, ShapeCoefficients};

pub const MAX_ITERATIONS: usize = 10;
/// Stop when `‖Δs‖ ≤ tol · max(‖s‖, 1)`.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-6;

/// Dense vertices in image space: `x, y` in pixels, `z` a relative depth in
/// the same units (larger is nearer).
#[derive(Clone, Debug, PartialEq)]
pub struct FrameObservation {
    pub frame_index: usize,
    pub vertices: Vec<f64>,
}

impl FrameObservation {
    pub fn new(frame_index: usize, vertices: Vec<f64>) -> Result<Self> {
        if !vertices.len().is_multiple_of(3) {
            return Err(Error::Dimension(format!(
                "observation length {} is not a multiple of 3",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "observation {frame_index} has non-finite coordinates"
            )));
        }
        Ok(Self {
            frame_index,
            vertices,
        })
    }

    pub fn from_points(frame_index: usize, points: &[Vector3<f64>]) -> Self {
        Self {
            frame_index,
            vertices: points.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecovery {
    pub frame_index: usize,
    pub pose: CameraPose,
    pub coeffs: ShapeCoefficients,
    /// Per-coordinate RMS distance between observation and fitted shape, pixels.
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn recover_frame(model: &MorphableModel, obs: &FrameObservation) -> Result<FrameRecovery> {
    recover_frame_traced(model, obs).map(|(r, _)| r)
}

/// Like [`recover_frame`], also returning the residual after every iteration.
pub fn recover_frame_traced(
    model: &MorphableModel,
    obs: &FrameObservation,
) -> Result<(FrameRecovery, Vec<f64>)> {
    let n = model.vertex_count();
    if obs.vertices.len() != 3 * n {
        return Err(Error::Dimension(format!(
            "observation {} has {} coordinates, model expects {}",
            obs.frame_index,
            obs.vertices.len(),
            3 * n
        )));
    }
    let targets: Vec<Vector3<f64>> = obs
        .vertices
        .chunks_exact(3)
        .map(|v| Vector3::new(v[0], v[1], v[2]))
        .collect();
    let xy: Vec<Vector2<f64>> = targets.iter().map(|p| p.xy()).collect();
    let depth: Vec<f64> = targets.iter().map(|p| p.z).collect();

    let mut shape = model.mean_face();
    let mut coeffs = model.zero_coefficients();
    let mut trace = Vec::with_capacity(MAX_ITERATIONS);
    let mut best: Option<FrameRecovery> = None;
    let mut model_points: Vec<Vector3<f64>> = shape.points().collect();
    let mut deposed = FaceShape {
        vertices: vec![0.0; 3 * n],
    };

    for iteration in 1..=MAX_ITERATIONS {
        let fit = estimate_pose(&model_points, &xy, Some(&depth))?;
        for (dst, q) in deposed.vertices.chunks_exact_mut(3).zip(&targets) {
            let v = fit.similarity.invert(q);
            dst.copy_from_slice(v.as_slice());
        }
        let next = model.project_to_bases(&deposed)?;
        shape = model.assemble_shape(&next)?;
        model_points.clear();
        model_points.extend(shape.points());

        let sq: f64 = model_points
            .iter()
            .zip(&targets)
            .map(|(v, q)| (fit.similarity.apply(v) - q).norm_squared())
            .sum();
        let residual = (sq / (3 * n) as f64).sqrt();
        trace.push(residual);

        let delta = l2_distance(&next.joint(), &coeffs.joint());
        let norm = l2_norm(&next.joint());
        coeffs = next;
        let converged = delta <= COEFFICIENT_TOLERANCE * norm.max(1.0);

        let candidate = FrameRecovery {
            frame_index: obs.frame_index,
            pose: fit.pose,
            coeffs: coeffs.clone(),
            residual_rms: residual,
            iterations: iteration,
            converged,
        };
        if best.as_ref().is_none_or(|b| candidate.residual_rms <= b.residual_rms) {
            best = Some(candidate);
        }
        if converged {
            break;
        }
    }

    let mut best = best.expect("at least one iteration runs");
    if !trace.is_empty() && !best.converged {
        log::warn!(
            "frame {}: coefficients still moving after {MAX_ITERATIONS} iterations",
            obs.frame_index
        );
    }
    best.iterations = trace.len();
    Ok((best, trace))
}

/// Arithmetic mean of the identity vectors, accumulated in frame order.
pub fn average_identity(recoveries: &[FrameRecovery]) -> Result<Vec<f64>> {
    let first = recoveries
        .first()
        .ok_or(Error::EmptyInput("no frame recoveries to average"))?;
    let dim = first.coeffs.identity.len();
    let mut sum = vec![0.0; dim];
    for r in recoveries {
        if r.coeffs.identity.len() != dim {
            return Err(Error::Dimension(format!(
                "frame {} has identity length {}, expected {dim}",
                r.frame_index,
                r.coeffs.identity.len()
            )));
        }
        for (s, v) in sum.iter_mut().zip(&r.coeffs.identity) {
            *s += v;
        }
    }
    let n = recoveries.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
