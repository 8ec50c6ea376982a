//! Seeded synthetic models and random geometry for tests, demos and benchmarks.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{MorphableModel, ShapeCoefficients};

/// `rows × cols` matrix with orthonormal columns (thin QR of a Gaussian matrix).
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    // Fix column signs so the factorization is unique.
    let r = qr.r();
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Haar-distributed rotation.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let q = random_orthonormal(3, 3, rng);
    let mut m = Matrix3::from_iterator(q.iter().copied());
    if m.determinant() < 0.0 {
        m.column_mut(0).neg_mut();
    }
    m
}

#[derive(Clone, Copy, Debug)]
pub struct SyntheticModelSpec {
    /// Latitude rings between the two poles.
    pub rings: usize,
    /// Vertices per ring.
    pub segments: usize,
    pub identity_dim: usize,
    pub expression_dim: usize,
    /// Semi-axes of the head ellipsoid in model units.
    pub radii: [f64; 3],
}

impl Default for SyntheticModelSpec {
    /// 5,000 vertices and 9,996 triangles.
    fn default() -> Self {
        Self {
            rings: 49,
            segments: 102,
            identity_dim: 40,
            expression_dim: 20,
            radii: [70.0, 90.0, 60.0],
        }
    }
}

impl SyntheticModelSpec {
    pub fn vertex_count(&self) -> usize {
        self.rings * self.segments + 2
    }
}

/// Closed head-like mesh (ellipsoid with a nose ridge facing +z) with
/// outward-wound triangles and random jointly orthonormal bases.
pub fn synthetic_face_model(spec: &SyntheticModelSpec, rng: &mut impl Rng) -> MorphableModel {
    let (mean, triangles) = head_mesh(spec);
    let n = mean.len();
    let joint = random_orthonormal(n, spec.identity_dim + spec.expression_dim, rng);
    MorphableModel::new(
        mean,
        joint.columns(0, spec.identity_dim).into_owned(),
        joint
            .columns(spec.identity_dim, spec.expression_dim)
            .into_owned(),
        triangles,
    )
    .expect("synthetic model is valid by construction")
}

fn head_mesh(spec: &SyntheticModelSpec) -> (Vec<f64>, Vec<[u32; 3]>) {
    use std::f64::consts::PI;
    let [ax, ay, az] = spec.radii;
    let mut points = vec![Vector3::new(0.0, ay, 0.0)];
    for i in 1..=spec.rings {
        let theta = PI * i as f64 / (spec.rings + 1) as f64;
        for j in 0..spec.segments {
            let phi = 2.0 * PI * j as f64 / spec.segments as f64;
            let x = ax * theta.sin() * phi.sin();
            let y = ay * theta.cos();
            let mut z = az * theta.sin() * phi.cos();
            if z > 0.0 {
                let bump = (-(x / (0.15 * ax)).powi(2) - ((y + 0.05 * ay) / (0.3 * ay)).powi(2)).exp();
                z += 0.4 * az * bump;
            }
            points.push(Vector3::new(x, y, z));
        }
    }
    points.push(Vector3::new(0.0, -ay, 0.0));

    let s = spec.segments as u32;
    let ring = |i: usize, j: u32| 1 + (i as u32) * s + (j % s);
    let bottom = points.len() as u32 - 1;
    let mut triangles = Vec::new();
    for j in 0..s {
        triangles.push([0, ring(0, j), ring(0, j + 1)]);
    }
    for i in 0..spec.rings - 1 {
        for j in 0..s {
            triangles.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..s {
        triangles.push([bottom, ring(spec.rings - 1, j + 1), ring(spec.rings - 1, j)]);
    }
    // Orient every triangle so its normal points away from the center.
    for t in &mut triangles {
        let [a, b, c] = t.map(|i| points[i as usize]);
        let normal = (b - a).cross(&(c - a));
        if normal.dot(&((a + b + c) / 3.0)) < 0.0 {
            t.swap(1, 2);
        }
    }
    let mean = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    (mean, triangles)
}

/// Gaussian coefficients with standard deviation `sigma`.
pub fn random_coefficients(
    model: &MorphableModel,
    sigma: f64,
    rng: &mut impl Rng,
) -> ShapeCoefficients {
    let mut draw = |n: usize| {
        (0..n)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    ShapeCoefficients {
        identity: draw(model.identity_dim()),
        expression: draw(model.expression_dim()),
    }
}
