//! Training losses with analytic gradients: balanced cross-entropy, the
//! orientation coherence loss, segmentation smoothness and a named weighted
//! total.

use std::collections::BTreeMap;

use crate::angle::AngleDistribution;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ChannelMap, Image};
use crate::scalar::Scalar;
use crate::segmentation::SegmentationMap;

/// Probability clipping bound for cross-entropy.
pub const PROB_EPS: f64 = 1e-7;
/// Denominator guard of the coherence ratio.
pub const COHERENCE_LOSS_EPS: f64 = 1e-6;

/// A loss value and its gradient with respect to the differentiated map.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue<T> {
    pub value: f64,
    pub gradient: ChannelMap<T>,
}

fn roi_count(roi: &BinaryMask, w: usize, h: usize) -> Result<usize> {
    if roi.dims() != (w, h) {
        return Err(Error::ShapeMismatch(format!("ROI {:?} vs map {w}x{h}", roi.dims())));
    }
    match roi.count() {
        0 => Err(Error::EmptyRoi),
        n => Ok(n),
    }
}

/// `λ⁺ = 1`, `λ⁻ = Σ p_l / Σ (1 − p_l)` over the ROI.
pub fn default_lambdas<T: Scalar>(label: &ChannelMap<T>, roi: &BinaryMask) -> Result<(f64, f64)> {
    let (w, h, _) = label.shape();
    roi_count(roi, w, h)?;
    let (mut pos, mut neg) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if roi.get(x, y) {
                for &p in label.cell(x, y) {
                    pos += p.as_f64();
                    neg += 1.0 - p.as_f64();
                }
            }
        }
    }
    Ok((1.0, if neg > 0.0 { pos / neg } else { 1.0 }))
}

/// `−(1/|ROI|) Σ_ROI Σᵢ [λ⁺ p_l log p + λ⁻ (1 − p_l) log(1 − p)]` with `p`
/// clipped to `[ε, 1 − ε]`. Clipped entries get zero gradient.
pub fn balanced_cross_entropy<T: Scalar>(
    pred: &ChannelMap<T>,
    label: &ChannelMap<T>,
    roi: &BinaryMask,
    lambda_pos: f64,
    lambda_neg: f64,
) -> Result<LossValue<T>> {
    if pred.shape() != label.shape() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs label {:?}",
            pred.shape(),
            label.shape()
        )));
    }
    let (w, h, c) = pred.shape();
    let n = roi_count(roi, w, h)? as f64;
    let mut value = 0.0;
    let mut grad = ChannelMap::zeros(w, h, c);
    for y in 0..h {
        for x in 0..w {
            if !roi.get(x, y) {
                continue;
            }
            let g = grad.cell_mut(x, y);
            for (i, (&p, &l)) in pred.cell(x, y).iter().zip(label.cell(x, y)).enumerate() {
                let (raw, l) = (p.as_f64(), l.as_f64());
                let p = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
                value -= lambda_pos * l * p.ln() + lambda_neg * (1.0 - l) * (1.0 - p).ln();
                if raw == p {
                    g[i] = T::lit(-(lambda_pos * l / p - lambda_neg * (1.0 - l) / (1.0 - p)) / n);
                }
            }
        }
    }
    Ok(LossValue {
        value: value / n,
        gradient: grad,
    })
}

/// Coherence loss `|ROI| / Σ_ROI Coh − 1`, where per cell
/// `Coh = |Σ₃ₓ₃ d̄| / (Σ₃ₓ₃ |d̄| + ε)` and `d̄` is the doubled-angle mean
/// vector. Cells beyond the grid contribute nothing to a window.
pub fn coherence_loss<T: Scalar>(dist: &AngleDistribution<T>, roi: &BinaryMask) -> Result<LossValue<T>> {
    if dist.span() != 180.0 {
        return Err(Error::UnsupportedSpan(dist.span()));
    }
    coherence_loss_raw(dist.probs(), dist.bin_step(), roi)
}

/// [`coherence_loss`] on unnormalized per-bin weights.
pub fn coherence_loss_raw<T: Scalar>(probs: &ChannelMap<T>, step: f64, roi: &BinaryMask) -> Result<LossValue<T>> {
    let (w, h, nb) = probs.shape();
    let roi_n = roi_count(roi, w, h)? as f64;
    let trig: Vec<(f64, f64)> = (0..nb)
        .map(|i| {
            let a = (2.0 * step * i as f64).to_radians();
            (a.cos() / nb as f64, a.sin() / nb as f64)
        })
        .collect();
    let mut d = vec![(0.0f64, 0.0f64); w * h];
    for y in 0..h {
        for x in 0..w {
            d[y * w + x] = probs
                .cell(x, y)
                .iter()
                .zip(&trig)
                .fold((0.0, 0.0), |(c, s), (&p, &(tc, ts))| (c + p.as_f64() * tc, s + p.as_f64() * ts));
        }
    }
    let mag: Vec<f64> = d.iter().map(|&(c, s)| c.hypot(s)).collect();
    let window = |x: usize, y: usize| {
        let xs = x.saturating_sub(1)..(x + 2).min(w);
        let ys = y.saturating_sub(1)..(y + 2).min(h);
        ys.flat_map(move |yy| xs.clone().map(move |xx| yy * w + xx))
    };
    // Per ROI cell: V, |V|, D + ε, Coh.
    let mut coh_sum = 0.0;
    let mut cells = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !roi.get(x, y) {
                continue;
            }
            let (mut vx, mut vy, mut den) = (0.0, 0.0, COHERENCE_LOSS_EPS);
            for j in window(x, y) {
                vx += d[j].0;
                vy += d[j].1;
                den += mag[j];
            }
            let vn = vx.hypot(vy);
            coh_sum += vn / den;
            cells.push((x, y, vx, vy, vn, den));
        }
    }
    if !(coh_sum > 0.0) {
        return Err(Error::InvalidParameter("coherence vanishes on the whole ROI".into()));
    }
    let value = roi_n / coh_sum - 1.0;
    let dl_dcoh = -roi_n / (coh_sum * coh_sum);
    let mut gd = vec![(0.0f64, 0.0f64); w * h];
    for &(x, y, vx, vy, vn, den) in &cells {
        let (ux, uy) = if vn > 0.0 { (vx / vn, vy / vn) } else { (0.0, 0.0) };
        let a = dl_dcoh / den;
        let b = dl_dcoh * vn / (den * den);
        for j in window(x, y) {
            let (mx, my) = if mag[j] > 0.0 {
                (d[j].0 / mag[j], d[j].1 / mag[j])
            } else {
                (0.0, 0.0)
            };
            gd[j].0 += a * ux - b * mx;
            gd[j].1 += a * uy - b * my;
        }
    }
    let mut grad = ChannelMap::zeros(w, h, nb);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = gd[y * w + x];
            for (g, &(tc, ts)) in grad.cell_mut(x, y).iter_mut().zip(&trig) {
                *g = T::lit(gx * tc + gy * ts);
            }
        }
    }
    Ok(LossValue { value, gradient: grad })
}

const LAPLACIAN: [(isize, isize, f64); 5] = [(0, -1, 1.0), (-1, 0, 1.0), (0, 0, -4.0), (1, 0, 1.0), (0, 1, 1.0)];

/// Laplacian response with replicate padding.
pub fn laplacian<T: Scalar>(s: &Image<T>) -> Image<T> {
    let (w, h) = s.dims();
    Image::from_fn(w, h, |x, y| {
        LAPLACIAN.iter().fold(T::zero(), |acc, &(dx, dy, k)| {
            acc + T::lit(k) * s.get_clamped(x as isize + dx, y as isize + dy)
        })
    })
}

/// Mean absolute Laplacian of the segmentation scores. The subgradient at
/// exact zeros of the response is 0.
pub fn smoothness_loss<T: Scalar>(seg: &SegmentationMap<T>) -> Result<LossValue<T>> {
    let s = &seg.scores;
    let (w, h) = s.dims();
    if w < 3 || h < 3 {
        return Err(Error::KernelTooLarge {
            kw: 3,
            kh: 3,
            width: w,
            height: h,
        });
    }
    let r = laplacian(s);
    let n = (w * h) as f64;
    let value = r.data().iter().map(|v| v.as_f64().abs()).sum::<f64>() / n;
    let mut g = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let rv = r.get(x, y).as_f64();
            let sign = if rv > 0.0 {
                1.0
            } else if rv < 0.0 {
                -1.0
            } else {
                continue;
            };
            for &(dx, dy, k) in &LAPLACIAN {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                g[sy * w + sx] += sign * k / n;
            }
        }
    }
    Ok(LossValue {
        value,
        gradient: ChannelMap::new(w, h, 1, g.into_iter().map(T::lit).collect())?,
    })
}

/// Non-negative weight per named loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossWeights(BTreeMap<String, f64>);

/// Names of the default loss instances.
pub const DEFAULT_LOSS_NAMES: [&str; 9] = [
    "orientation_ce",
    "orientation_strong_ce",
    "orientation_coherence",
    "segmentation_ce",
    "segmentation_smoothness",
    "minutiae_score_ce",
    "minutiae_x_ce",
    "minutiae_y_ce",
    "minutiae_direction_ce",
];

impl Default for LossWeights {
    /// Every default instance weighted 1.0.
    fn default() -> Self {
        Self(DEFAULT_LOSS_NAMES.iter().map(|n| (n.to_string(), 1.0)).collect())
    }
}

impl LossWeights {
    pub fn empty() -> Self {
        Self(BTreeMap::new())
    }

    pub fn set(&mut self, name: &str, weight: f64) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Config(format!("loss weight {name} = {weight}")));
        }
        self.0.insert(name.to_string(), weight);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// A component loss: `name` selects its weight, `target` names the map its
/// gradient belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedLoss<T> {
    pub name: String,
    pub target: String,
    pub loss: LossValue<T>,
}

/// Weighted sum of component losses with gradients summed per target map.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalLoss<T> {
    pub value: f64,
    pub gradients: BTreeMap<String, ChannelMap<T>>,
}

pub fn total_loss<T: Scalar>(components: &[NamedLoss<T>], weights: &LossWeights) -> Result<TotalLoss<T>> {
    let mut value = 0.0;
    let mut gradients: BTreeMap<String, ChannelMap<T>> = BTreeMap::new();
    for c in components {
        let wgt = weights
            .get(&c.name)
            .ok_or_else(|| Error::Config(format!("no weight for loss {:?}", c.name)))?;
        value += wgt * c.loss.value;
        let wt = T::lit(wgt);
        match gradients.get_mut(&c.target) {
            Some(acc) => {
                if acc.shape() != c.loss.gradient.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "gradients for {:?}: {:?} vs {:?}",
                        c.target,
                        acc.shape(),
                        c.loss.gradient.shape()
                    )));
                }
                for (a, &g) in acc.data_mut().iter_mut().zip(c.loss.gradient.data()) {
                    *a += wt * g;
                }
            }
            None => {
                let mut g = c.loss.gradient.clone();
                g.data_mut().iter_mut().for_each(|v| *v = *v * wt);
                gradients.insert(c.target.clone(), g);
            }
        }
    }
    Ok(TotalLoss { value, gradients })
}

/// Finite-difference verification of the analytic gradients.
pub mod gradcheck {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central-difference step.
    pub const STEP: f64 = 1e-6;
    /// Maximum accepted relative error.
    pub const TOLERANCE: f64 = 1e-5;
    /// Smoothness entries whose Laplacian responses come this close to 0
    /// are skipped.
    pub const KINK_MARGIN: f64 = 1e-4;
    /// Denominator floor of the relative error, per unit of loss value.
    /// Central-difference round-off is of order `ε·|L|/STEP`, so entries
    /// whose true gradient is near 0 are judged against that scale.
    pub const REL_FLOOR: f64 = 1e-4;

    /// Worst entry of one loss's check.
    #[derive(Clone, Debug, PartialEq)]
    pub struct GradReport {
        pub loss: &'static str,
        pub max_rel_err: f64,
        /// `(x, y, channel)` of the worst entry.
        pub worst: (usize, usize, usize),
        pub checked: usize,
    }

    impl GradReport {
        pub fn passed(&self) -> bool {
            self.max_rel_err < TOLERANCE
        }
    }

    /// `|a − n| / max(|a|, |n|, REL_FLOOR·max(1, |loss|))`.
    pub fn relative_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
        let floor = REL_FLOOR * loss.abs().max(1.0);
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
    }

    /// Compares `grad` to central differences of `f` over the entries of
    /// `map` accepted by `include`. `bias` is added to every analytic entry.
    fn compare(
        loss: &'static str,
        map: &ChannelMap<f64>,
        grad: &ChannelMap<f64>,
        bias: f64,
        mut include: impl FnMut(usize, usize, usize) -> bool,
        mut f: impl FnMut(&ChannelMap<f64>) -> f64,
    ) -> GradReport {
        let (w, h, c) = map.shape();
        let base = f(map);
        let mut probe = map.clone();
        let mut report = GradReport {
            loss,
            max_rel_err: 0.0,
            worst: (0, 0, 0),
            checked: 0,
        };
        for y in 0..h {
            for x in 0..w {
                for k in 0..c {
                    if !include(x, y, k) {
                        continue;
                    }
                    let i = (y * w + x) * c + k;
                    let orig = probe.data()[i];
                    probe.data_mut()[i] = orig + STEP;
                    let up = f(&probe);
                    probe.data_mut()[i] = orig - STEP;
                    let down = f(&probe);
                    probe.data_mut()[i] = orig;
                    let numeric = (up - down) / (2.0 * STEP);
                    let e = relative_error(grad.data()[i] + bias, numeric, base);
                    report.checked += 1;
                    if e > report.max_rel_err || report.checked == 1 {
                        report.max_rel_err = e;
                        report.worst = (x, y, k);
                    }
                }
            }
        }
        report
    }

    fn random_roi(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
        let mut roi = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(0.75));
        roi.set(w / 2, h / 2, true);
        roi
    }

    /// Balanced cross-entropy on a random 4×4×8 map.
    pub fn check_cross_entropy(seed: u64, bias: f64) -> GradReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h, c) = (4, 4, 8);
        let pred = ChannelMap::from_fn(w, h, c, |_, _, _| rng.gen_range(0.05..0.95));
        let label = ChannelMap::from_fn(w, h, c, |_, _, _| rng.gen_range(0.0..1.0));
        let roi = random_roi(&mut rng, w, h);
        let (lp, ln) = (1.0, rng.gen_range(0.2..2.0));
        let g = balanced_cross_entropy(&pred, &label, &roi, lp, ln).unwrap().gradient;
        compare("balanced_cross_entropy", &pred, &g, bias, |_, _, _| true, |p| {
            balanced_cross_entropy(p, &label, &roi, lp, ln).unwrap().value
        })
    }

    /// Coherence loss on random 6×6×90 distributions: uniform noise plus a
    /// Gaussian bump at a random angle per cell. The bump keeps each cell's
    /// mean vector away from 0, where its norm is not differentiable.
    pub fn check_coherence(seed: u64, bias: f64) -> GradReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let (w, h, c) = (6, 6, 90);
        let step = crate::angle::bin_step(180.0, c);
        let mut probs = ChannelMap::zeros(w, h, c);
        for y in 0..h {
            for x in 0..w {
                let centre = rng.gen_range(0.0..180.0);
                let sigma: f64 = rng.gen_range(10.0..30.0);
                let cell = probs.cell_mut(x, y);
                for (i, p) in cell.iter_mut().enumerate() {
                    let d = crate::angle::circular_distance(i as f64 * step, centre, 180.0);
                    *p = rng.gen_range(0.0..0.5) + (-d * d / (2.0 * sigma * sigma)).exp();
                }
                let s: f64 = cell.iter().sum();
                cell.iter_mut().for_each(|p| *p /= s);
            }
        }
        let roi = random_roi(&mut rng, w, h);
        let g = coherence_loss_raw(&probs, step, &roi).unwrap().gradient;
        compare("coherence_loss", &probs, &g, bias, |_, _, _| true, |p| {
            coherence_loss_raw(p, step, &roi).unwrap().value
        })
    }

    /// Smoothness loss on a random 8×8 map, skipping entries next to kinks.
    pub fn check_smoothness(seed: u64, bias: f64) -> GradReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
        let (w, h) = (8, 8);
        let scores: Image<f64> = Image::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0));
        let map = ChannelMap::from_image(&scores);
        let seg = SegmentationMap {
            scores: scores.clone(),
            stride: 1,
        };
        let g = smoothness_loss(&seg).unwrap().gradient;
        let r = laplacian(&scores);
        let near_kink = |x: usize, y: usize| {
            // Responses reading pixel (x, y) lie within one step of it.
            (-2isize..=2).any(|dy| {
                (-2isize..=2).any(|dx| {
                    let (px, py) = (x as isize + dx, y as isize + dy);
                    px >= 0 && py >= 0 && px < w as isize && py < h as isize && r.get(px as usize, py as usize).abs() < KINK_MARGIN
                })
            })
        };
        compare("smoothness_loss", &map, &g, bias, |x, y, _| !near_kink(x, y), |m| {
            let seg = SegmentationMap {
                scores: m.channel(0),
                stride: 1,
            };
            smoothness_loss(&seg).unwrap().value
        })
    }

    /// All three checks.
    pub fn run_all(seed: u64, bias: f64) -> Vec<GradReport> {
        vec![
            check_cross_entropy(seed, bias),
            check_coherence(seed, bias),
            check_smoothness(seed, bias),
        ]
    }
}
