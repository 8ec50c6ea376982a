//! Scaled-orthographic camera.
//!
//! Rotations use intrinsic yaw (about y), pitch (about x), roll (about z),
//! composed as `R = Rz(roll) · Rx(pitch) · Ry(yaw)`. Angles are radians in
//! `(-π, π]`. After rotation, `x` and `y` map to image pixels and a larger
//! rotated `z` is nearer the camera.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FaceShape;

/// Pitch values within this distance of ±π/2 are treated as gimbal lock.
pub const GIMBAL_LOCK_EPS: f64 = 1e-6;

/// `RᵀR` must be within this (entrywise) of the identity for decomposition.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub tx: f64,
    pub ty: f64,
    pub scale: f64,
}

impl CameraPose {
    pub fn new(yaw: f64, pitch: f64, roll: f64, tx: f64, ty: f64, scale: f64) -> Result<Self> {
        let pose = Self {
            yaw: wrap_angle(yaw),
            pitch: wrap_angle(pitch),
            roll: wrap_angle(roll),
            tx,
            ty,
            scale,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            tx: 0.0,
            ty: 0.0,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidPose(format!("scale {} must be positive", self.scale)));
        }
        for (name, a) in [("yaw", self.yaw), ("pitch", self.pitch), ("roll", self.roll)] {
            if !a.is_finite() || a <= -PI || a > PI {
                return Err(Error::InvalidPose(format!("{name} {a} outside (-pi, pi]")));
            }
        }
        if !(self.tx.is_finite() && self.ty.is_finite()) {
            return Err(Error::InvalidPose("translation is not finite".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        compose_rotation(self.yaw, self.pitch, self.roll)
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.tx, self.ty)
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn compose_rotation(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    let rz = Matrix3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
    rz * rx * ry
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Set when pitch is at ±π/2; roll is then pinned to zero and yaw
    /// carries the combined in-plane rotation.
    pub gimbal_lock: bool,
}

pub fn decompose_rotation(r: &Matrix3<f64>) -> Result<EulerAngles> {
    let deviation = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(deviation <= ROTATION_TOLERANCE) || r.determinant() < 0.0 {
        return Err(Error::NotOrthonormal(format!(
            "max |RᵀR - I| = {deviation:e}, det = {}",
            r.determinant()
        )));
    }
    // R[2][1] = sin(pitch), R[2][0] = -cos(pitch)sin(yaw), R[2][2] = cos(pitch)cos(yaw),
    // R[0][1] = -sin(roll)cos(pitch), R[1][1] = cos(roll)cos(pitch).
    let pitch = r[(2, 1)].clamp(-1.0, 1.0).asin();
    if (pitch.abs() - FRAC_PI_2).abs() <= GIMBAL_LOCK_EPS {
        log::warn!("gimbal lock at pitch {pitch}; roll pinned to 0");
        let yaw = r[(0, 2)].atan2(r[(0, 0)]);
        return Ok(EulerAngles {
            yaw: wrap_angle(yaw),
            pitch: wrap_angle(pitch),
            roll: 0.0,
            gimbal_lock: true,
        });
    }
    let yaw = (-r[(2, 0)]).atan2(r[(2, 2)]);
    let roll = (-r[(0, 1)]).atan2(r[(1, 1)]);
    Ok(EulerAngles {
        yaw: wrap_angle(yaw),
        pitch: wrap_angle(pitch),
        roll: wrap_angle(roll),
        gimbal_lock: false,
    })
}

/// Projects every vertex. Each output is `(x, y, depth)`: `x, y` in pixels
/// and `depth = scale · (R·v).z`, in the same pixel units.
pub fn project(pose: &CameraPose, shape: &FaceShape) -> Vec<Vector3<f64>> {
    let r = pose.rotation();
    let t = Vector3::new(pose.tx, pose.ty, 0.0);
    shape.points().map(|v| pose.scale * (r * v) + t).collect()
}

/// Rotation, scale and full 3D translation mapping model space to image space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Similarity {
    #[inline]
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * v) + self.translation
    }

    #[inline]
    pub fn invert(&self, q: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(q - self.translation)) / self.scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseFit {
    pub pose: CameraPose,
    /// The full fitted transform, including the depth offset that the
    /// 6-parameter pose drops.
    pub similarity: Similarity,
    /// RMS over all fitted coordinates (x, y and, when given, depth).
    pub residual_rms: f64,
    pub gimbal_lock: bool,
}

/// Least-squares scaled-orthographic fit of `model` onto `observed`.
///
/// With `depths`, the observations are treated as 3D points in image space
/// and a full similarity Procrustes fit is used. Without them the affine
/// 2×3 solution is projected onto the nearest scaled pair of orthonormal rows.
pub fn estimate_pose(
    model: &[Vector3<f64>],
    observed: &[Vector2<f64>],
    depths: Option<&[f64]>,
) -> Result<PoseFit> {
    if model.len() != observed.len() || depths.is_some_and(|d| d.len() != model.len()) {
        return Err(Error::Dimension(format!(
            "{} model points vs {} observations",
            model.len(),
            observed.len()
        )));
    }
    if model.len() < 4 {
        return Err(Error::DegenerateConfig(format!(
            "need at least 4 points, got {}",
            model.len()
        )));
    }
    let n = model.len() as f64;
    let model_centroid = model.iter().sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for v in model {
        let d = v - model_centroid;
        scatter += d * d.transpose();
    }
    check_spread(&scatter)?;

    let similarity = match depths {
        Some(depths) => {
            let targets: Vec<Vector3<f64>> = observed
                .iter()
                .zip(depths)
                .map(|(q, &z)| Vector3::new(q.x, q.y, z))
                .collect();
            fit_similarity_3d(model, &model_centroid, &scatter, &targets)?
        }
        None => fit_scaled_orthographic(model, &model_centroid, &scatter, observed)?,
    };

    let mut sq = 0.0;
    for (i, v) in model.iter().enumerate() {
        let p = similarity.apply(v);
        sq += (p.x - observed[i].x).powi(2) + (p.y - observed[i].y).powi(2);
        if let Some(d) = depths {
            sq += (p.z - d[i]).powi(2);
        }
    }
    let channels = if depths.is_some() { 3.0 } else { 2.0 };
    let residual_rms = (sq / (channels * n)).sqrt();

    let euler = decompose_rotation(&similarity.rotation)?;
    let pose = CameraPose {
        yaw: euler.yaw,
        pitch: euler.pitch,
        roll: euler.roll,
        tx: similarity.translation.x,
        ty: similarity.translation.y,
        scale: similarity.scale,
    };
    pose.validate()?;
    Ok(PoseFit {
        pose,
        similarity,
        residual_rms,
        gimbal_lock: euler.gimbal_lock,
    })
}

fn check_spread(scatter: &Matrix3<f64>) -> Result<()> {
    let eig = scatter.symmetric_eigenvalues();
    let largest = eig.max();
    let smallest = eig.min();
    if !(largest > 0.0) || smallest <= 1e-10 * largest {
        return Err(Error::DegenerateConfig(format!(
            "model points are collinear or coplanar (scatter eigenvalues {:.3e}..{:.3e})",
            smallest, largest
        )));
    }
    Ok(())
}

fn fit_similarity_3d(
    model: &[Vector3<f64>],
    model_centroid: &Vector3<f64>,
    scatter: &Matrix3<f64>,
    targets: &[Vector3<f64>],
) -> Result<Similarity> {
    let n = model.len() as f64;
    let target_centroid = targets.iter().sum::<Vector3<f64>>() / n;
    let mut cross = Matrix3::zeros();
    for (v, q) in model.iter().zip(targets) {
        cross += (q - target_centroid) * (v - model_centroid).transpose();
    }
    let svd = SVD::new(cross, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sign = (u * v_t).determinant().signum();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = u * d * v_t;
    let s = svd.singular_values;
    let scale = (s[0] + s[1] + sign * s[2]) / scatter.trace();
    if !(scale > 0.0) {
        return Err(Error::DegenerateConfig("observations collapse to a point".into()));
    }
    let translation = target_centroid - scale * (rotation * model_centroid);
    Ok(Similarity {
        rotation,
        scale,
        translation,
    })
}

fn fit_scaled_orthographic(
    model: &[Vector3<f64>],
    model_centroid: &Vector3<f64>,
    scatter: &Matrix3<f64>,
    observed: &[Vector2<f64>],
) -> Result<Similarity> {
    let n = model.len() as f64;
    let obs_centroid = observed.iter().sum::<Vector2<f64>>() / n;
    let mut cross = Matrix2x3::zeros();
    for (v, q) in model.iter().zip(observed) {
        cross += (q - obs_centroid) * (v - model_centroid).transpose();
    }
    let scatter_inv = scatter
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfig("model scatter is singular".into()))?;
    let affine = cross * scatter_inv;
    let svd = SVD::new(affine, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let rows = u * v_t;
    let scale = 0.5 * (svd.singular_values[0] + svd.singular_values[1]);
    if !(scale > 0.0) {
        return Err(Error::DegenerateConfig("observations collapse to a point".into()));
    }
    let r1 = rows.row(0).transpose();
    let r2 = rows.row(1).transpose();
    let r3 = r1.cross(&r2);
    let rotation = Matrix3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()]);
    let rc = rotation * model_centroid;
    let translation = Vector3::new(
        obs_centroid.x - scale * rc.x,
        obs_centroid.y - scale * rc.y,
        0.0,
    );
    Ok(Similarity {
        rotation,
        scale,
        translation,
    })
}
