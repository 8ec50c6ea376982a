//! Linear morphable face model: mean shape plus identity and expression offsets.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entrywise tolerance on `UᵀU − I` accepted when a basis is loaded.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct MorphableModel {
    mean_shape: DVector<f64>,
    identity_basis: DMatrix<f64>,
    expression_basis: DMatrix<f64>,
    triangles: Vec<[u32; 3]>,
    joint_basis: DMatrix<f64>,
    joint_gram: Cholesky<f64, Dyn>,
}

impl MorphableModel {
    /// Validates the model and precomputes the joint projection operator.
    ///
    /// Each basis must have orthonormal columns and every triangle must
    /// reference three distinct in-range vertices.
    pub fn new(
        mean_shape: Vec<f64>,
        identity_basis: DMatrix<f64>,
        expression_basis: DMatrix<f64>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let len = mean_shape.len();
        if len == 0 || !len.is_multiple_of(3) {
            return Err(Error::InvalidModel(format!(
                "mean shape length {len} is not a positive multiple of 3"
            )));
        }
        let vertex_count = len / 3;
        if mean_shape.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("mean shape has non-finite entries".into()));
        }
        for (name, basis) in [("identity", &identity_basis), ("expression", &expression_basis)] {
            if basis.nrows() != len {
                return Err(Error::InvalidModel(format!(
                    "{name} basis has {} rows, expected {len}",
                    basis.nrows()
                )));
            }
            if basis.ncols() >= len {
                log::warn!(
                    "{name} basis has {} components for a {len}-dimensional shape space",
                    basis.ncols()
                );
            }
            let deviation = orthonormality_deviation(basis);
            if deviation > ORTHONORMALITY_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "{name} basis is not orthonormal (max |UᵀU - I| = {deviation:e})"
                )));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= vertex_count) {
                return Err(Error::InvalidModel(format!(
                    "triangle {t} {tri:?} references a vertex >= {vertex_count}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidModel(format!("triangle {t} {tri:?} is degenerate")));
            }
        }

        let n_id = identity_basis.ncols();
        let n_exp = expression_basis.ncols();
        let mut joint_basis = DMatrix::zeros(len, n_id + n_exp);
        joint_basis.columns_mut(0, n_id).copy_from(&identity_basis);
        joint_basis.columns_mut(n_id, n_exp).copy_from(&expression_basis);
        let joint_gram = Cholesky::new(joint_basis.tr_mul(&joint_basis)).ok_or_else(|| {
            Error::InvalidModel("identity and expression bases are linearly dependent".into())
        })?;

        Ok(Self {
            mean_shape: DVector::from_vec(mean_shape),
            identity_basis,
            expression_basis,
            triangles,
            joint_basis,
            joint_gram,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.mean_shape.len() / 3
    }

    pub fn identity_dim(&self) -> usize {
        self.identity_basis.ncols()
    }

    pub fn expression_dim(&self) -> usize {
        self.expression_basis.ncols()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn mean_shape(&self) -> &DVector<f64> {
        &self.mean_shape
    }

    pub fn identity_basis(&self) -> &DMatrix<f64> {
        &self.identity_basis
    }

    pub fn expression_basis(&self) -> &DMatrix<f64> {
        &self.expression_basis
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn mean_face(&self) -> FaceShape {
        FaceShape {
            vertices: self.mean_shape.as_slice().to_vec(),
        }
    }

    pub fn zero_coefficients(&self) -> ShapeCoefficients {
        ShapeCoefficients {
            identity: vec![0.0; self.identity_dim()],
            expression: vec![0.0; self.expression_dim()],
        }
    }

    fn check_coefficients(&self, coeffs: &ShapeCoefficients) -> Result<()> {
        if coeffs.identity.len() != self.identity_dim()
            || coeffs.expression.len() != self.expression_dim()
        {
            return Err(Error::Dimension(format!(
                "coefficients ({}, {}) do not match model dims ({}, {})",
                coeffs.identity.len(),
                coeffs.expression.len(),
                self.identity_dim(),
                self.expression_dim()
            )));
        }
        Ok(())
    }

    /// `x̄ + U_id·s_id + U_exp·s_exp`.
    pub fn assemble_shape(&self, coeffs: &ShapeCoefficients) -> Result<FaceShape> {
        self.check_coefficients(coeffs)?;
        let mut x = self.mean_shape.clone();
        x.gemv(
            1.0,
            &self.identity_basis,
            &DVector::from_column_slice(&coeffs.identity),
            1.0,
        );
        x.gemv(
            1.0,
            &self.expression_basis,
            &DVector::from_column_slice(&coeffs.expression),
            1.0,
        );
        Ok(FaceShape {
            vertices: x.data.into(),
        })
    }

    /// Least-squares coefficients of `shape − x̄` on the concatenated
    /// `[U_id U_exp]` basis. With a jointly orthonormal basis this is the
    /// plain projection `Uᵀ(x − x̄)`.
    pub fn project_to_bases(&self, shape: &FaceShape) -> Result<ShapeCoefficients> {
        if shape.vertices.len() != self.mean_shape.len() {
            return Err(Error::Dimension(format!(
                "shape has {} coordinates, model expects {}",
                shape.vertices.len(),
                self.mean_shape.len()
            )));
        }
        let offset = DVector::from_column_slice(&shape.vertices) - &self.mean_shape;
        let rhs = self.joint_basis.tr_mul(&offset);
        let s = self.joint_gram.solve(&rhs);
        let n_id = self.identity_dim();
        Ok(ShapeCoefficients {
            identity: s.as_slice()[..n_id].to_vec(),
            expression: s.as_slice()[n_id..].to_vec(),
        })
    }

    /// Mean shape rescaled into `[0, 1]` with one min/max shared by all
    /// three axes.
    pub fn normalized_mean_face(&self) -> Result<NormalizedMeanFace> {
        let mut axis_min = [f64::INFINITY; 3];
        let mut axis_max = [f64::NEG_INFINITY; 3];
        for v in self.mean_shape.as_slice().chunks_exact(3) {
            for k in 0..3 {
                axis_min[k] = axis_min[k].min(v[k]);
                axis_max[k] = axis_max[k].max(v[k]);
            }
        }
        if let Some(k) = (0..3).find(|&k| axis_max[k] - axis_min[k] <= 0.0) {
            return Err(Error::DegenerateModel(format!(
                "mean shape has zero extent along axis {}",
                ["x", "y", "z"][k]
            )));
        }
        let lo = axis_min.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = axis_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let extent = hi - lo;
        let colors = self
            .mean_shape
            .iter()
            .map(|&c| ((c - lo) / extent).clamp(0.0, 1.0))
            .collect();
        Ok(NormalizedMeanFace { colors })
    }
}

fn orthonormality_deviation(basis: &DMatrix<f64>) -> f64 {
    let gram = basis.tr_mul(basis);
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeCoefficients {
    pub identity: Vec<f64>,
    pub expression: Vec<f64>,
}

impl ShapeCoefficients {
    /// `[identity; expression]` as one vector.
    pub fn joint(&self) -> Vec<f64> {
        self.identity.iter().chain(&self.expression).copied().collect()
    }
}

/// Dense vertex positions laid out `[x1, y1, z1, x2, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceShape {
    pub vertices: Vec<f64>,
}

impl FaceShape {
    pub fn from_points(points: &[Vector3<f64>]) -> Self {
        Self {
            vertices: points.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / 3
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> Vector3<f64> {
        Vector3::new(
            self.vertices[3 * i],
            self.vertices[3 * i + 1],
            self.vertices[3 * i + 2],
        )
    }

    pub fn points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.vertices
            .chunks_exact(3)
            .map(|v| Vector3::new(v[0], v[1], v[2]))
    }

    pub fn is_finite(&self) -> bool {
        self.vertices.iter().all(|v| v.is_finite())
    }
}

/// Per-vertex semantic colors: the mean face squeezed into the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMeanFace {
    pub colors: Vec<f64>,
}

impl NormalizedMeanFace {
    #[inline]
    pub fn color(&self, vertex: usize) -> [f64; 3] {
        [
            self.colors[3 * vertex],
            self.colors[3 * vertex + 1],
            self.colors[3 * vertex + 2],
        ]
    }
}
