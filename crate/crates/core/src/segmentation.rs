//! Foreground segmentation from coherence / local mean / local variance with
//! a pixel-wise linear classifier, plus weak and strong labels derived from
//! marked minutiae.

use crate::error::{Error, Result};
use crate::extraction::Minutia;
use crate::orientation::{coherence, sobel_gradients, structure_tensor, StructureTensor};
use crate::raster::{box_sum, ensure_same_dims, BinaryMask, Image};
use crate::scalar::Scalar;
use crate::synth::synth_patch_dataset;

/// Per-pixel segmentation features.
#[derive(Clone, Debug, PartialEq)]
pub struct SegFeatures<T> {
    pub coh: Image<T>,
    pub mean: Image<T>,
    pub var: Image<T>,
}

/// `score = w·[coh, mean, var] + bias`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegClassifier {
    pub weights: [f64; 3],
    pub bias: f64,
}

impl Default for SegClassifier {
    /// [`fit_default_classifier`] at window 16, rounded. Scores above 0 are
    /// foreground.
    fn default() -> Self {
        Self {
            weights: [DEFAULT_WEIGHTS[0], DEFAULT_WEIGHTS[1], DEFAULT_WEIGHTS[2]],
            bias: DEFAULT_WEIGHTS[3],
        }
    }
}

/// `[coh, mean, var, bias]` of the shipped classifier.
pub const DEFAULT_WEIGHTS: [f64; 4] = [5.76, -0.05, 4.35, -4.77];

/// Default foreground threshold on classifier scores.
pub const DEFAULT_THRESHOLD: f64 = 0.0;

impl SegClassifier {
    pub fn new(weights: [f64; 3], bias: f64) -> Result<Self> {
        if weights.iter().chain([&bias]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite classifier parameter".into()));
        }
        Ok(Self { weights, bias })
    }

    #[inline]
    pub fn score(&self, coh: f64, mean: f64, var: f64) -> f64 {
        self.weights[0] * coh + self.weights[1] * mean + self.weights[2] * var + self.bias
    }
}

/// Classifier scores at `stride` pixels per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationMap<T> {
    pub scores: Image<T>,
    pub stride: usize,
}

impl<T: Scalar> SegmentationMap<T> {
    /// Averages scores over `cell × cell` blocks (partial blocks at the
    /// right and bottom edges average what they cover).
    pub fn pooled(&self, cell: usize) -> Result<SegmentationMap<T>> {
        if cell == 0 {
            return Err(Error::InvalidParameter("pooling cell 0".into()));
        }
        let (w, h) = self.scores.dims();
        let scores = Image::from_fn(w.div_ceil(cell), h.div_ceil(cell), |cx, cy| {
            let mut s = T::zero();
            let mut n = 0usize;
            for y in cy * cell..((cy + 1) * cell).min(h) {
                for x in cx * cell..((cx + 1) * cell).min(w) {
                    s += self.scores.get(x, y);
                    n += 1;
                }
            }
            s / T::from_usize(n).unwrap()
        });
        Ok(SegmentationMap {
            scores,
            stride: self.stride * cell,
        })
    }
}

/// Coherence, local mean and local variance over `w × w` windows.
pub fn seg_features<T: Scalar>(image: &Image<T>, t: &StructureTensor<T>, w: usize) -> Result<SegFeatures<T>> {
    ensure_same_dims(image.dims(), t.dims())?;
    let area = T::from_usize(w * w).unwrap();
    let mean = box_sum(image, w)?.map(|v| v / area);
    let dev2 = image.zip_map(&mean, |p, m| (p - m) * (p - m))?;
    let var = box_sum(&dev2, w)?.map(|v| v / area);
    Ok(SegFeatures {
        coh: coherence(t),
        mean,
        var,
    })
}

/// Pixel-wise linear classifier, stride 1.
pub fn seg_classify<T: Scalar>(f: &SegFeatures<T>, c: &SegClassifier) -> SegmentationMap<T> {
    let [a, b, d] = c.weights.map(T::lit);
    let bias = T::lit(c.bias);
    let scores = Image::from_fn(f.coh.width(), f.coh.height(), |x, y| {
        a * f.coh.get(x, y) + b * f.mean.get(x, y) + d * f.var.get(x, y) + bias
    });
    SegmentationMap { scores, stride: 1 }
}

/// `score > threshold`.
pub fn seg_binarize<T: Scalar>(m: &SegmentationMap<T>, threshold: f64) -> BinaryMask {
    let t = T::lit(threshold);
    BinaryMask::from_fn(m.scores.width(), m.scores.height(), |x, y| m.scores.get(x, y) > t)
}

/// Fits `SegClassifier` by L2-regularized logistic regression (Newton
/// iterations). Labels `true` are foreground.
pub fn fit_classifier(samples: &[([f64; 3], bool)], l2: f64) -> Result<SegClassifier> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no training samples".into()));
    }
    let mut beta = [0.0f64; 4];
    let n = samples.len() as f64;
    for _ in 0..100 {
        let mut grad = [0.0f64; 4];
        let mut hess = [[0.0f64; 4]; 4];
        for (f, label) in samples {
            let x = [f[0], f[1], f[2], 1.0];
            let z: f64 = (0..4).map(|k| beta[k] * x[k]).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            let y = if *label { 1.0 } else { 0.0 };
            for i in 0..4 {
                grad[i] += (p - y) * x[i] / n;
                for j in 0..4 {
                    hess[i][j] += p * (1.0 - p) * x[i] * x[j] / n;
                }
            }
        }
        // Bias is not penalized.
        for i in 0..3 {
            grad[i] += l2 * beta[i];
            hess[i][i] += l2;
        }
        hess[3][3] += 1e-12;
        let step = solve4(hess, grad).ok_or_else(|| Error::InvalidParameter("singular Hessian".into()))?;
        let mut moved = 0.0f64;
        for k in 0..4 {
            beta[k] -= step[k];
            moved = moved.max(step[k].abs());
        }
        if moved < 1e-12 {
            break;
        }
    }
    SegClassifier::new([beta[0], beta[1], beta[2]], beta[3])
}

/// Features at the center pixel of a patch, computed with a `w × w`
/// window exactly as the pipeline does.
pub fn patch_features(patch: &Image<f64>, w: usize) -> Result<[f64; 3]> {
    let (gx, gy) = sobel_gradients(patch)?;
    let t = structure_tensor(&gx, &gy, w)?;
    let f = seg_features(patch, &t, w)?;
    let (cx, cy) = (patch.width() / 2, patch.height() / 2);
    Ok([f.coh.get(cx, cy), f.mean.get(cx, cy), f.var.get(cx, cy)])
}

/// Training set and regularization behind [`DEFAULT_WEIGHTS`].
pub const DEFAULT_FIT_PATCHES: usize = 4000;
pub const DEFAULT_FIT_SEED: u64 = 7;
pub const DEFAULT_FIT_L2: f64 = 1e-3;

/// Reproduces the shipped classifier from synthetic patches at window `w`.
pub fn fit_default_classifier(w: usize) -> Result<SegClassifier> {
    let samples = synth_patch_dataset(DEFAULT_FIT_PATCHES, DEFAULT_FIT_SEED)?
        .iter()
        .map(|p| Ok((patch_features(&p.image, w)?, p.foreground)))
        .collect::<Result<Vec<_>>>()?;
    fit_classifier(&samples, DEFAULT_FIT_L2)
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Convex hull of points, counter-clockwise in a y-up sense (monotone
/// chain). Collinear points are dropped; degenerate inputs return one or
/// two points.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Euclidean distance from `p` to the filled hull polygon (0 inside).
pub fn hull_distance(hull: &[(f64, f64)], p: (f64, f64)) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => (p.0 - hull[0].0).hypot(p.1 - hull[0].1),
        2 => segment_distance(p, hull[0], hull[1]),
        n => {
            let inside = (0..n).all(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= -1e-9
            });
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| segment_distance(p, hull[i], hull[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// One pass of a 3×3 binary majority filter (replicate border).
pub fn majority_filter(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let mut n = 0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                n += mask.get(sx, sy) as usize;
            }
        }
        n >= 5
    })
}

/// Default dilation of the weak label, in pixels.
pub const DEFAULT_DILATION: f64 = 16.0;

/// Weak foreground label: minutiae convex hull dilated by a disk of
/// `radius` pixels, then one majority-filter pass.
pub fn weak_seg_label(minutiae: &[Minutia], width: usize, height: usize, radius: f64) -> Result<BinaryMask> {
    weak_seg_label_with(minutiae, width, height, radius, 1)
}

/// [`weak_seg_label`] with an explicit number of smoothing passes.
pub fn weak_seg_label_with(
    minutiae: &[Minutia],
    width: usize,
    height: usize,
    radius: f64,
    smoothing_passes: usize,
) -> Result<BinaryMask> {
    if minutiae.is_empty() {
        return Err(Error::EmptyMinutiae);
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("empty label raster".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("dilation radius {radius}")));
    }
    let inside: Vec<(f64, f64)> = minutiae
        .iter()
        .filter(|m| m.x >= 0.0 && m.y >= 0.0 && m.x < width as f64 && m.y < height as f64)
        .map(|m| (m.x, m.y))
        .collect();
    if inside.is_empty() {
        let m = minutiae[0];
        return Err(Error::OutOfBounds {
            x: m.x,
            y: m.y,
            width,
            height,
        });
    }
    let hull = convex_hull(&inside);
    let mut mask = BinaryMask::from_fn(width, height, |x, y| {
        hull_distance(&hull, (x as f64, y as f64)) <= radius + 1e-9
    });
    for _ in 0..smoothing_passes {
        mask = majority_filter(&mask);
    }
    Ok(mask)
}

/// Sparse orientation supervision: `(cell_x, cell_y, direction mod 180)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientationLabel {
    pub cell_x: usize,
    pub cell_y: usize,
    pub angle: f64,
}

/// Unoriented minutia directions as orientation labels on a `stride` grid of
/// `cells_w × cells_h` cells.
pub fn strong_orientation_label(
    minutiae: &[Minutia],
    cells_w: usize,
    cells_h: usize,
    stride: usize,
) -> Result<Vec<OrientationLabel>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride 0".into()));
    }
    minutiae
        .iter()
        .map(|m| {
            let (w, h) = (cells_w * stride, cells_h * stride);
            if !(m.x >= 0.0 && m.y >= 0.0 && m.x < w as f64 && m.y < h as f64) {
                return Err(Error::OutOfBounds {
                    x: m.x,
                    y: m.y,
                    width: w,
                    height: h,
                });
            }
            let mut angle = m.direction.rem_euclid(180.0);
            if angle >= 180.0 {
                angle = 0.0;
            }
            Ok(OrientationLabel {
                cell_x: (m.x / stride as f64).floor() as usize,
                cell_y: (m.y / stride as f64).floor() as usize,
                angle,
            })
        })
        .collect()
}
