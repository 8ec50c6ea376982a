//! Pupil localization from eye-contour landmarks and the eye-sketch
//! conditioning frames.
//!
//! Pixel `(u, v)` has its center at `(u + 0.5, v + 0.5)` in the same
//! coordinate system as the landmarks.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, RgbFrame};

pub const LANDMARK_COUNT: usize = 68;
/// Left-eye contour in the 68-point scheme.
pub const LEFT_EYE: std::ops::Range<usize> = 36..42;
/// Right-eye contour in the 68-point scheme.
pub const RIGHT_EYE: std::ops::Range<usize> = 42..48;

pub const SKETCH_SIZE: usize = 256;
pub const OUTLINE_COLOR: [u8; 3] = [255, 255, 255];
pub const PUPIL_COLOR: [u8; 3] = [255, 0, 0];
/// Pupil disc radius as a fraction of eye width.
pub const PUPIL_RADIUS_RATIO: f64 = 0.15;

pub type EyeContour = [Vector2<f64>; 6];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EyeLandmarks {
    pub left: EyeContour,
    pub right: EyeContour,
}

impl EyeLandmarks {
    pub fn from_face_landmarks(points: &[Vector2<f64>]) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Dimension(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                points.len()
            )));
        }
        let pick = |r: std::ops::Range<usize>| -> EyeContour {
            std::array::from_fn(|i| points[r.start + i])
        };
        Ok(Self {
            left: pick(LEFT_EYE),
            right: pick(RIGHT_EYE),
        })
    }

    pub fn contours(&self) -> [&EyeContour; 2] {
        [&self.left, &self.right]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PupilPair {
    pub left: Vector2<f64>,
    pub right: Vector2<f64>,
}

/// Eye contours and pupils of one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EyeTrack {
    pub frame_index: usize,
    pub landmarks: EyeLandmarks,
    pub pupils: PupilPair,
}

impl EyeTrack {
    /// The 12 contour points followed by the two pupils.
    pub fn points(&self) -> impl Iterator<Item = Vector2<f64>> + '_ {
        self.landmarks
            .left
            .iter()
            .chain(&self.landmarks.right)
            .copied()
            .chain([self.pupils.left, self.pupils.right])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PupilEstimate {
    pub point: Vector2<f64>,
    /// No pixel center fell inside the contour; `point` is the vertex centroid.
    pub sub_pixel: bool,
}

fn on_segment(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> bool {
    let ab = b - a;
    let ap = p - a;
    ab.perp(&ap) == 0.0 && ap.dot(&ab) >= 0.0 && ap.dot(&ab) <= ab.norm_squared()
}

/// Even-odd containment that excludes points lying on the boundary.
pub fn strictly_inside(polygon: &[Vector2<f64>], p: Vector2<f64>) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if on_segment(p, a, b) {
            return false;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn polygon_area(polygon: &[Vector2<f64>]) -> f64 {
    let n = polygon.len();
    0.5 * (0..n)
        .map(|i| polygon[i].perp(&polygon[(i + 1) % n]))
        .sum::<f64>()
}

/// Darkness-weighted center of mass of the pixels inside the eye contour,
/// with weight `255 − intensity`.
pub fn detect_pupil(contour: &[Vector2<f64>], gray: &GrayFrame) -> Result<PupilEstimate> {
    if contour.len() < 3 || contour.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Invalid("eye contour needs at least 3 finite points".into()));
    }
    if polygon_area(contour) == 0.0 {
        return Err(Error::Invalid("eye contour has zero area".into()));
    }
    let (mut lo, mut hi) = (contour[0], contour[0]);
    for p in contour {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let u0 = lo.x.floor().max(0.0) as usize;
    let v0 = lo.y.floor().max(0.0) as usize;
    let u1 = (hi.x.ceil().max(0.0) as usize).min(gray.width());
    let v1 = (hi.y.ceil().max(0.0) as usize).min(gray.height());

    let (mut wsum, mut wx, mut wy) = (0.0, 0.0, 0.0);
    let (mut count, mut cx, mut cy) = (0usize, 0.0, 0.0);
    for v in v0..v1 {
        for u in u0..u1 {
            let center = Vector2::new(u as f64 + 0.5, v as f64 + 0.5);
            if !strictly_inside(contour, center) {
                continue;
            }
            let w = (255 - gray.get(u, v)) as f64;
            wsum += w;
            wx += w * center.x;
            wy += w * center.y;
            count += 1;
            cx += center.x;
            cy += center.y;
        }
    }
    if count == 0 {
        let centroid = contour.iter().sum::<Vector2<f64>>() / contour.len() as f64;
        log::warn!("eye contour covers no pixel center; using vertex centroid");
        return Ok(PupilEstimate {
            point: centroid,
            sub_pixel: true,
        });
    }
    let point = if wsum > 0.0 {
        Vector2::new(wx / wsum, wy / wsum)
    } else {
        Vector2::new(cx / count as f64, cy / count as f64)
    };
    Ok(PupilEstimate {
        point,
        sub_pixel: false,
    })
}

pub fn detect_pupils(landmarks: &EyeLandmarks, gray: &GrayFrame) -> Result<PupilPair> {
    Ok(PupilPair {
        left: detect_pupil(&landmarks.left, gray)?.point,
        right: detect_pupil(&landmarks.right, gray)?.point,
    })
}

/// Integer points of the segment `from → to`: one per step along the
/// major axis, with the minor coordinate rounded half away from the start.
pub fn bresenham(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let (sx, sy) = (dx.signum(), dy.signum());
    let (ax, ay) = (dx.abs(), dy.abs());
    let steep = ay > ax;
    let (major, minor) = if steep { (ay, ax) } else { (ax, ay) };
    let mut out = Vec::with_capacity(major as usize + 1);
    // err = 2·i·minor + major − 2·major·k, kept in [0, 2·major).
    let mut err = major;
    let mut k = 0;
    for i in 0..=major {
        let (mx, my) = if steep { (k, i) } else { (i, k) };
        out.push((from.0 + sx * mx, from.1 + sy * my));
        err += 2 * minor;
        while err >= 2 * major && major > 0 {
            err -= 2 * major;
            k += 1;
        }
    }
    out
}

/// Pupil disc radius for an eye contour: `max(1, round(0.15 · width))`,
/// width being the distance between the leftmost and rightmost landmarks.
pub fn pupil_radius(contour: &EyeContour) -> i64 {
    let by_x = |a: &&Vector2<f64>, b: &&Vector2<f64>| a.x.total_cmp(&b.x);
    let leftmost = contour.iter().min_by(by_x).expect("six points");
    let rightmost = contour.iter().max_by(by_x).expect("six points");
    ((PUPIL_RADIUS_RATIO * (rightmost - leftmost).norm()).round() as i64).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EyeSketch {
    pub frame: RgbFrame,
    /// Some input coordinate fell outside the canvas and was clipped.
    pub clipped: bool,
}

struct Canvas {
    frame: RgbFrame,
    clipped: bool,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        let size = self.frame.width() as i64;
        if (0..size).contains(&x) && (0..self.frame.height() as i64).contains(&y) {
            self.frame.set_pixel(x as usize, y as usize, rgb);
        } else {
            self.clipped = true;
        }
    }
}

fn pixel_of(p: &Vector2<f64>) -> (i64, i64) {
    (p.x.floor() as i64, p.y.floor() as i64)
}

/// White closed outlines for both eyes with filled red pupil discs on top.
pub fn render_eye_sketch(landmarks: &EyeLandmarks, pupils: &PupilPair, size: usize) -> EyeSketch {
    let mut canvas = Canvas {
        frame: RgbFrame::black(size, size),
        clipped: false,
    };
    let in_range = |p: &Vector2<f64>| {
        p.x.is_finite() && p.y.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x < size as f64 && p.y < size as f64
    };
    let all_points = landmarks
        .left
        .iter()
        .chain(&landmarks.right)
        .chain([&pupils.left, &pupils.right]);
    if !all_points.clone().all(in_range) {
        canvas.clipped = true;
    }

    for contour in landmarks.contours() {
        for i in 0..contour.len() {
            let a = pixel_of(&contour[i]);
            let b = pixel_of(&contour[(i + 1) % contour.len()]);
            for (x, y) in bresenham(a, b) {
                canvas.put(x, y, OUTLINE_COLOR);
            }
        }
    }
    for (contour, pupil) in [(&landmarks.left, pupils.left), (&landmarks.right, pupils.right)] {
        if !(pupil.x.is_finite() && pupil.y.is_finite()) {
            continue;
        }
        let r = pupil_radius(contour);
        let r2 = (r * r) as f64;
        let (cu, cv) = pixel_of(&pupil);
        for v in cv - r - 1..=cv + r + 1 {
            for u in cu - r - 1..=cu + r + 1 {
                let dx = u as f64 + 0.5 - pupil.x;
                let dy = v as f64 + 0.5 - pupil.y;
                if dx * dx + dy * dy <= r2 {
                    canvas.put(u, v, PUPIL_COLOR);
                }
            }
        }
    }
    if canvas.clipped {
        log::warn!("eye sketch input outside the {size}x{size} canvas was clipped");
    }
    EyeSketch {
        frame: canvas.frame,
        clipped: canvas.clipped,
    }
}
