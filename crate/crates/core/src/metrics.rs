//! Evaluation metrics between real and generated sequences.
//!
//! Pixel metrics work in 0–255 RGB space. Pose discrepancy averages the
//! absolute wrapped differences of yaw, pitch and roll. Expression distance
//! is an unnormalized L1 norm, so it scales with the expression dimension.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::camera::{wrap_angle, CameraPose};
use crate::error::{Error, Result};
use crate::eyes::EyeTrack;
use crate::frame::{PixelMask, RgbFrame};
use crate::recon::{average_identity, FrameRecovery};

/// Lower bound on the RBF bandwidth when every pooled point coincides.
pub const MIN_BANDWIDTH: f64 = 1e-12;

fn check_sequences(real: &[RgbFrame], fake: &[RgbFrame]) -> Result<()> {
    if real.is_empty() {
        return Err(Error::EmptyInput("frame sequence"));
    }
    if real.len() != fake.len() {
        return Err(Error::Dimension(format!(
            "{} real frames vs {} generated",
            real.len(),
            fake.len()
        )));
    }
    let (w, h) = (real[0].width(), real[0].height());
    for (i, (r, f)) in real.iter().zip(fake).enumerate() {
        if r.width() != w || r.height() != h || !r.same_shape(f) {
            return Err(Error::Dimension(format!(
                "frame {i}: {}x{} vs {}x{} (sequence is {w}x{h})",
                r.width(),
                r.height(),
                f.width(),
                f.height()
            )));
        }
    }
    Ok(())
}

#[inline]
fn rgb_distance(a: &[u8], b: &[u8]) -> f64 {
    let d = |k: usize| a[k] as f64 - b[k] as f64;
    (d(0) * d(0) + d(1) * d(1) + d(2) * d(2)).sqrt()
}

/// Average per-pixel RGB Euclidean distance over all pixels and frames.
pub fn apd(real: &[RgbFrame], fake: &[RgbFrame]) -> Result<f64> {
    check_sequences(real, fake)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, f) in real.iter().zip(fake) {
        for (a, b) in r.as_raw().chunks_exact(3).zip(f.as_raw().chunks_exact(3)) {
            sum += rgb_distance(a, b);
        }
        count += r.width() * r.height();
    }
    Ok(sum / count as f64)
}

/// APD restricted to masked pixels, pooled over all frames.
pub fn mapd(real: &[RgbFrame], fake: &[RgbFrame], masks: &[PixelMask]) -> Result<f64> {
    check_sequences(real, fake)?;
    if masks.len() != real.len() {
        return Err(Error::Dimension(format!(
            "{} masks for {} frames",
            masks.len(),
            real.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((r, f), m) in real.iter().zip(fake).zip(masks) {
        if m.width() != r.width() || m.height() != r.height() {
            return Err(Error::Dimension("mask and frame sizes differ".into()));
        }
        let pixels = r.as_raw().chunks_exact(3).zip(f.as_raw().chunks_exact(3));
        for ((a, b), &keep) in pixels.zip(m.as_slice()) {
            if keep {
                sum += rgb_distance(a, b);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

fn check_lengths(what: &str, a: usize, b: usize) -> Result<()> {
    if a == 0 {
        return Err(Error::EmptyInput("metric input sequence"));
    }
    if a != b {
        return Err(Error::Dimension(format!("{what}: {a} vs {b} frames")));
    }
    Ok(())
}

fn l1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vector lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Mean over frames of the L1 distance between expression vectors.
pub fn aed(real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    check_lengths("expression sequences", real.len(), fake.len())?;
    let mut sum = 0.0;
    for (a, b) in real.iter().zip(fake) {
        sum += l1(a, b)?;
    }
    Ok(sum / real.len() as f64)
}

/// Mean absolute Euler-angle difference in degrees, angles wrapped to (−180°, 180°].
pub fn ard(real: &[CameraPose], fake: &[CameraPose]) -> Result<f64> {
    check_lengths("pose sequences", real.len(), fake.len())?;
    let mut sum = 0.0;
    for (a, b) in real.iter().zip(fake) {
        let per_angle = [a.yaw - b.yaw, a.pitch - b.pitch, a.roll - b.roll]
            .map(|d| wrap_angle(d).abs().to_degrees());
        sum += per_angle.iter().sum::<f64>() / 3.0;
    }
    Ok(sum / real.len() as f64)
}

/// L1 distance between the average identities of two sequences.
pub fn dai(real: &[FrameRecovery], fake: &[FrameRecovery]) -> Result<f64> {
    l1(&average_identity(real)?, &average_identity(fake)?)
}

/// Mean over frames of the mean distance between corresponding eye points
/// (12 contour landmarks and 2 pupils).
pub fn aeld(real: &[EyeTrack], fake: &[EyeTrack]) -> Result<f64> {
    check_lengths("eye tracks", real.len(), fake.len())?;
    let mut sum = 0.0;
    for (a, b) in real.iter().zip(fake) {
        let d: f64 = a.points().zip(b.points()).map(|(p, q)| (p - q).norm()).sum();
        sum += d / 14.0;
    }
    Ok(sum / real.len() as f64)
}

/// Externally extracted embeddings, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    rows: DMatrix<f64>,
}

impl FeatureSet {
    pub fn new(samples: usize, dim: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != samples * dim {
            return Err(Error::InvalidFeature(format!(
                "{samples}x{dim} features need {} values, got {}",
                samples * dim,
                row_major.len()
            )));
        }
        if row_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature("non-finite feature value".into()));
        }
        Ok(Self {
            rows: DMatrix::from_row_slice(samples, dim, row_major),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidFeature("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), dim, &flat)
    }

    pub fn samples(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    fn mean(&self) -> DVector<f64> {
        self.rows.row_mean().transpose()
    }

    /// Unbiased sample covariance.
    fn covariance(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        let mut centered = self.rows.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        centered.tr_mul(&centered) / (self.samples() as f64 - 1.0)
    }
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits of two feature sets:
/// `‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^½)`, with the trace of the product
/// root taken from the symmetric matrix `Σa^½ Σb Σa^½`.
pub fn fid_from_features(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "feature dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.samples() < 2 || b.samples() < 2 {
        return Err(Error::InvalidFeature(
            "FID needs at least two samples per set".into(),
        ));
    }
    let (mu_a, mu_b) = (a.mean(), b.mean());
    let (cov_a, cov_b) = (a.covariance(&mu_a), b.covariance(&mu_b));
    let root_a = symmetric_sqrt(&cov_a);
    let product = &root_a * &cov_b * &root_a;
    let product = (&product + product.transpose()) * 0.5;
    let trace_root: f64 = SymmetricEigen::new(product)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    let mean_term = (mu_a - mu_b).norm_squared();
    Ok((mean_term + cov_a.trace() + cov_b.trace() - 2.0 * trace_root).max(0.0))
}

/// Median of all pooled pairwise distances, self-pairs included. Counting
/// every ordered pair makes the value unchanged when both sets are duplicated.
pub fn median_bandwidth(a: &FeatureSet, b: &FeatureSet) -> f64 {
    let pooled: Vec<_> = a.rows.row_iter().chain(b.rows.row_iter()).collect();
    let mut dists = Vec::with_capacity(pooled.len() * pooled.len());
    for p in &pooled {
        for q in &pooled {
            dists.push((p - q).norm());
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    median.max(MIN_BANDWIDTH)
}

fn mean_kernel(x: &DMatrix<f64>, y: &DMatrix<f64>, gamma: f64) -> f64 {
    let mut sum = 0.0;
    for p in x.row_iter() {
        for q in y.row_iter() {
            sum += (-gamma * (p - q).norm_squared()).exp();
        }
    }
    sum / (x.nrows() * y.nrows()) as f64
}

/// Biased (V-statistic) squared MMD with kernel `exp(−‖x − y‖² / 2σ²)`.
pub fn mmd2_with_bandwidth(a: &FeatureSet, b: &FeatureSet, bandwidth: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "feature dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.samples() == 0 || b.samples() == 0 {
        return Err(Error::EmptyInput("MMD feature set"));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Invalid(format!("bandwidth {bandwidth} must be positive")));
    }
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let value = mean_kernel(&a.rows, &a.rows, gamma) + mean_kernel(&b.rows, &b.rows, gamma)
        - 2.0 * mean_kernel(&a.rows, &b.rows, gamma);
    // The biased estimator is a squared RKHS norm; only rounding can push it below zero.
    Ok(value.max(0.0))
}

/// [`mmd2_with_bandwidth`] with the median-distance bandwidth.
pub fn mmd2_from_features(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "feature dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    mmd2_with_bandwidth(a, b, median_bandwidth(a, b))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aed: Option<f64>,
    /// Expression dimension the AED was computed over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aed_expression_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ard_degrees: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dai: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aeld: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmd2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmd_bandwidth: Option<f64>,
}

/// Whatever subset of inputs is available for one real/generated pair.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvaluationInputs<'a> {
    pub real_frames: Option<&'a [RgbFrame]>,
    pub fake_frames: Option<&'a [RgbFrame]>,
    pub masks: Option<&'a [PixelMask]>,
    pub real_recoveries: Option<&'a [FrameRecovery]>,
    pub fake_recoveries: Option<&'a [FrameRecovery]>,
    pub real_eyes: Option<&'a [EyeTrack]>,
    pub fake_eyes: Option<&'a [EyeTrack]>,
    pub real_features: Option<&'a FeatureSet>,
    pub fake_features: Option<&'a FeatureSet>,
}

/// Computes every metric whose inputs are present. Feature-space metrics run
/// alongside the pixel and parameter metrics; the report is the same
/// whatever the thread count.
pub fn evaluate(inputs: &EvaluationInputs<'_>) -> Result<MetricReport> {
    let pixel_and_params = || -> Result<MetricReport> {
        let mut report = MetricReport::default();
        if let (Some(r), Some(f)) = (inputs.real_frames, inputs.fake_frames) {
            report.apd = Some(apd(r, f)?);
            if let Some(m) = inputs.masks {
                report.mapd = Some(mapd(r, f, m)?);
            }
        }
        if let (Some(r), Some(f)) = (inputs.real_recoveries, inputs.fake_recoveries) {
            let er: Vec<Vec<f64>> = r.iter().map(|x| x.coeffs.expression.clone()).collect();
            let ef: Vec<Vec<f64>> = f.iter().map(|x| x.coeffs.expression.clone()).collect();
            report.aed = Some(aed(&er, &ef)?);
            report.aed_expression_dim = er.first().map(Vec::len);
            let pr: Vec<CameraPose> = r.iter().map(|x| x.pose).collect();
            let pf: Vec<CameraPose> = f.iter().map(|x| x.pose).collect();
            report.ard_degrees = Some(ard(&pr, &pf)?);
            report.dai = Some(dai(r, f)?);
        }
        if let (Some(r), Some(f)) = (inputs.real_eyes, inputs.fake_eyes) {
            report.aeld = Some(aeld(r, f)?);
        }
        Ok(report)
    };
    let features = || -> Result<Option<(f64, f64, f64)>> {
        match (inputs.real_features, inputs.fake_features) {
            (Some(a), Some(b)) => {
                let bw = median_bandwidth(a, b);
                Ok(Some((fid_from_features(a, b)?, mmd2_with_bandwidth(a, b, bw)?, bw)))
            }
            _ => Ok(None),
        }
    };
    let (report, feats) = rayon::join(pixel_and_params, features);
    let mut report = report?;
    if let Some((fid, mmd2, bw)) = feats? {
        report.fid = Some(fid);
        report.mmd2 = Some(mmd2);
        report.mmd_bandwidth = Some(bw);
    }
    Ok(report)
}
