//! Orthographic z-buffer rasterizer producing triangle-visibility masks and
//! NMFC images (flat per-triangle mean-face colors).
//!
//! Coverage is sampled at pixel centers `(u + 0.5, v + 0.5)`. Vertex
//! positions are snapped to a 1/256 pixel grid and edge functions are
//! evaluated exactly in integers. Triangles with positive signed area
//! `(b − a) × (c − a)` are front-facing; the rest are culled. Pixels on a
//! shared edge belong to the triangle for which that edge is a top or left
//! edge. Among covering triangles the one with the largest interpolated
//! depth wins, and equal depths go to the lower triangle index.

use nalgebra::Vector3;

use crate::camera::{project, CameraPose};
use crate::error::{Error, Result};
use crate::frame::{PixelMask, RgbFrame};
use crate::model::{FaceShape, NormalizedMeanFace};

/// Mask value for pixels not covered by any triangle.
pub const NO_TRIANGLE: u32 = u32::MAX;

pub const SUBPIXEL_BITS: u32 = 8;
const SUBPIXEL_ONE: i64 = 1 << SUBPIXEL_BITS;
const HALF_PIXEL: i64 = SUBPIXEL_ONE / 2;

/// Vertices farther than this from the origin (in pixels) are outside the
/// guard band; triangles touching them are dropped so that edge products
/// stay exact in 64-bit integers and as `f64`.
pub const GUARD_BAND: f64 = 65536.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityMask {
    width: usize,
    height: usize,
    triangle_index: Vec<u32>,
}

impl VisibilityMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            triangle_index: vec![NO_TRIANGLE; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, triangle_index: Vec<u32>) -> Result<Self> {
        if triangle_index.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} mask needs {} entries, got {}",
                width * height,
                triangle_index.len()
            )));
        }
        Ok(Self {
            width,
            height,
            triangle_index,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Triangle visible at pixel `(x, y)`, if any.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<u32> {
        match self.triangle_index[y * self.width + x] {
            NO_TRIANGLE => None,
            t => Some(t),
        }
    }

    pub fn as_raw(&self) -> &[u32] {
        &self.triangle_index
    }

    pub fn covered(&self) -> PixelMask {
        PixelMask::new(
            self.width,
            self.height,
            self.triangle_index.iter().map(|&t| t != NO_TRIANGLE).collect(),
        )
        .expect("same dimensions")
    }
}

/// Vertex snapped to the subpixel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnappedPoint {
    pub x: i64,
    pub y: i64,
}

/// Snaps a pixel-space coordinate pair, or `None` outside the guard band.
pub fn snap(x: f64, y: f64) -> Option<SnappedPoint> {
    if !(x.abs() <= GUARD_BAND && y.abs() <= GUARD_BAND) {
        return None;
    }
    Some(SnappedPoint {
        x: (x * SUBPIXEL_ONE as f64).round() as i64,
        y: (y * SUBPIXEL_ONE as f64).round() as i64,
    })
}

/// Subpixel position of the center of pixel `u`.
#[inline]
pub fn pixel_center(u: usize) -> i64 {
    u as i64 * SUBPIXEL_ONE + HALF_PIXEL
}

/// Twice the signed area of the edge `a → b` and point `p`.
#[inline]
pub fn edge_function(a: SnappedPoint, b: SnappedPoint, px: i64, py: i64) -> i64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

/// Whether a zero edge-function value on `a → b` counts as inside.
#[inline]
pub fn is_top_left(a: SnappedPoint, b: SnappedPoint) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    dy < 0 || (dy == 0 && dx > 0)
}

/// Depth at a covered sample from its three edge weights.
#[inline]
pub fn interpolate_depth(weights: [i64; 3], area2: i64, depths: [f64; 3]) -> f64 {
    (weights[0] as f64 * depths[0] + weights[1] as f64 * depths[1] + weights[2] as f64 * depths[2])
        / area2 as f64
}

pub fn rasterize_visibility(
    pose: &CameraPose,
    shape: &FaceShape,
    triangles: &[[u32; 3]],
    width: usize,
    height: usize,
) -> VisibilityMask {
    rasterize_projected(&project(pose, shape), triangles, width, height)
}

/// Rasterizes already projected vertices `(x, y, depth)`.
pub fn rasterize_projected(
    screen: &[Vector3<f64>],
    triangles: &[[u32; 3]],
    width: usize,
    height: usize,
) -> VisibilityMask {
    let mut mask = VisibilityMask::empty(width, height);
    if width == 0 || height == 0 {
        return mask;
    }
    let mut zbuf = vec![f64::NEG_INFINITY; width * height];
    for (index, tri) in triangles.iter().enumerate() {
        let [ia, ib, ic] = tri.map(|i| i as usize);
        let (Some(va), Some(vb), Some(vc)) = (screen.get(ia), screen.get(ib), screen.get(ic))
        else {
            continue;
        };
        let depths = [va.z, vb.z, vc.z];
        if depths.iter().any(|d| !d.is_finite()) {
            continue;
        }
        let (Some(a), Some(b), Some(c)) = (snap(va.x, va.y), snap(vb.x, vb.y), snap(vc.x, vc.y))
        else {
            continue;
        };
        let area2 = edge_function(a, b, c.x, c.y);
        if area2 <= 0 {
            continue;
        }
        draw_triangle(&mut mask, &mut zbuf, index as u32, [a, b, c], area2, depths);
    }
    mask
}

fn draw_triangle(
    mask: &mut VisibilityMask,
    zbuf: &mut [f64],
    index: u32,
    [a, b, c]: [SnappedPoint; 3],
    area2: i64,
    depths: [f64; 3],
) {
    let (w, h) = (mask.width as i64, mask.height as i64);
    // Pixel range whose centers can fall inside the bounding box.
    let first = |lo: i64| (lo - HALF_PIXEL).div_euclid(SUBPIXEL_ONE).max(0);
    let last = |hi: i64, n: i64| ((hi - HALF_PIXEL).div_euclid(SUBPIXEL_ONE) + 1).min(n);
    let x0 = first(a.x.min(b.x).min(c.x));
    let x1 = last(a.x.max(b.x).max(c.x), w);
    let y0 = first(a.y.min(b.y).min(c.y));
    let y1 = last(a.y.max(b.y).max(c.y), h);
    if x0 >= x1 || y0 >= y1 {
        return;
    }

    // Edge opposite each vertex: weight of a comes from edge b→c, etc.
    let edges = [(b, c), (c, a), (a, b)];
    let bias = edges.map(|(p, q)| if is_top_left(p, q) { 0 } else { -1 });
    let step_x = edges.map(|(p, q)| -(q.y - p.y) * SUBPIXEL_ONE);
    let step_y = edges.map(|(p, q)| (q.x - p.x) * SUBPIXEL_ONE);
    let (sx, sy) = (pixel_center(x0 as usize), pixel_center(y0 as usize));
    let mut row = edges.map(|(p, q)| edge_function(p, q, sx, sy));

    for y in y0..y1 {
        let mut e = row;
        let line = (y * w) as usize;
        for x in x0..x1 {
            if e[0] + bias[0] >= 0 && e[1] + bias[1] >= 0 && e[2] + bias[2] >= 0 {
                let z = interpolate_depth(e, area2, depths);
                let at = line + x as usize;
                let current = mask.triangle_index[at];
                if z > zbuf[at] || (z == zbuf[at] && index < current) {
                    zbuf[at] = z;
                    mask.triangle_index[at] = index;
                }
            }
            for k in 0..3 {
                e[k] += step_x[k];
            }
        }
        for k in 0..3 {
            row[k] += step_y[k];
        }
    }
}

/// Encodes a unit-interval value as a byte, rounding halves up. Values
/// within 1e-9 of a half count as the half so that decimal inputs like
/// 0.3 land where they would in exact arithmetic.
#[inline]
pub fn encode_unit(c: f64) -> u8 {
    (255.0 * c + 1e-9).round().clamp(0.0, 255.0) as u8
}

/// Per-triangle NMFC colors: the encoded centroid of each triangle's
/// normalized mean-face vertex coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NmfcPalette {
    colors: Vec<[u8; 3]>,
}

impl NmfcPalette {
    pub fn new(nmf: &NormalizedMeanFace, triangles: &[[u32; 3]]) -> Result<Self> {
        let vertex_count = nmf.colors.len() / 3;
        let colors = triangles
            .iter()
            .map(|tri| {
                if tri.iter().any(|&i| i as usize >= vertex_count) {
                    return Err(Error::Dimension(format!(
                        "triangle {tri:?} references a vertex >= {vertex_count}"
                    )));
                }
                let [a, b, c] = tri.map(|i| nmf.color(i as usize));
                Ok([0, 1, 2].map(|k| encode_unit((a[k] + b[k] + c[k]) / 3.0)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { colors })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn color(&self, triangle: u32) -> Option<[u8; 3]> {
        self.colors.get(triangle as usize).copied()
    }

    pub fn render(&self, mask: &VisibilityMask) -> Result<RgbFrame> {
        let mut data = Vec::with_capacity(mask.triangle_index.len() * 3);
        for &t in &mask.triangle_index {
            if t == NO_TRIANGLE {
                data.extend_from_slice(&[0, 0, 0]);
            } else {
                let rgb = self.color(t).ok_or(Error::CorruptMask {
                    index: t,
                    count: self.colors.len(),
                })?;
                data.extend_from_slice(&rgb);
            }
        }
        RgbFrame::from_raw(mask.width, mask.height, data)
    }
}

pub fn render_nmfc(
    mask: &VisibilityMask,
    nmf: &NormalizedMeanFace,
    triangles: &[[u32; 3]],
) -> Result<RgbFrame> {
    NmfcPalette::new(nmf, triangles)?.render(mask)
}

/// Facial-area mask of an NMFC image: every pixel that is not pure black.
pub fn nmfc_facial_mask(image: &RgbFrame) -> PixelMask {
    let data = image.pixels().map(|p| p != [0, 0, 0]).collect();
    PixelMask::new(image.width(), image.height(), data).expect("same dimensions")
}
