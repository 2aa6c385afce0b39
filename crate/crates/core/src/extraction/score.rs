use super::nms::nms;
use super::templates::{normalized_score, wave_vector, TemplateBank};
use super::{Minutia, MinutiaeList};
use crate::enhancement::EnhancedMap;
use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, Image};
use crate::scalar::Scalar;

/// Extraction thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractParams {
    /// Minimum score of a detection, in `(0, 1)`.
    pub threshold: f64,
    /// NMS radius in pixels.
    pub nms_radius: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            nms_radius: 16.0,
        }
    }
}

/// Best template score per pixel and the direction of that template.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMaps<T> {
    pub score: Image<T>,
    pub direction: Image<T>,
}

impl<T: Scalar> ScoreMaps<T> {
    /// Zeroes both maps outside `seg`; equal to scoring with `seg` directly.
    pub fn masked(&self, seg: &BinaryMask) -> Result<ScoreMaps<T>> {
        ensure_same_dims(self.score.dims(), seg.dims())?;
        let (w, h) = self.score.dims();
        let keep = |img: &Image<T>| Image::from_fn(w, h, |x, y| if seg.get(x, y) { img.get(x, y) } else { T::zero() });
        Ok(ScoreMaps {
            score: keep(&self.score),
            direction: keep(&self.direction),
        })
    }
}

/// Scores `cos(E)` against the bank.
pub fn minutiae_score<T: Scalar>(e: &EnhancedMap<T>, bank: &TemplateBank<T>, seg: &BinaryMask) -> Result<ScoreMaps<T>> {
    minutiae_score_raster(&e.cosine(), bank, seg)
}

/// Scores an arbitrary raster against the bank. Pixels closer than
/// `ksize / 2` to the border and pixels outside `seg` score 0; ties between
/// templates go to the lower index.
pub fn minutiae_score_raster<T: Scalar>(image: &Image<T>, bank: &TemplateBank<T>, seg: &BinaryMask) -> Result<ScoreMaps<T>> {
    ensure_same_dims(image.dims(), seg.dims())?;
    let (w, h) = image.dims();
    let ks = bank.ksize();
    let r = ks / 2;
    let mut best = vec![0.0f64; w * h];
    let mut best_k = vec![usize::MAX; w * h];
    if w >= ks && h >= ks {
        let mean = image.mean().as_f64();
        let p: Vec<f64> = image.data().iter().map(|v| v.as_f64() - mean).collect();
        let (s1, centered) = window_moments(&p, w, h, ks);
        let k_total = bank.len();
        let paired = k_total.is_multiple_of(2);
        let first: Vec<usize> = if paired { (0..k_total / 2).collect() } else { (0..k_total).collect() };
        let mut cand = vec![0.0f64; w * h];
        let mut cand2 = vec![0.0f64; w * h];
        for &k in &first {
            let (ar, ai, br, bi) = ending_responses(&p, w, h, bank, k);
            let t = &bank.templates()[k];
            let (ca, sa) = {
                let a = t.direction.to_radians();
                (a.cos(), -a.sin())
            };
            let partner = paired.then(|| &bank.templates()[k + k_total / 2]);
            for y in r..h - r {
                for x in r..w - r {
                    let i = y * w + x;
                    let (s, var) = (s1[i], centered[i]);
                    // C = e^{−iα}(A + iB)
                    let (zr, zi) = (ar[i] - bi[i], ai[i] + br[i]);
                    let cr = ca * zr - sa * zi;
                    let ci = ca * zi + sa * zr;
                    let ce = (cr - t.mean_re * s) / t.norm_re;
                    let co = (ci - t.mean_im * s - t.beta * ce) / t.norm_im;
                    cand[i] = normalized_score(ce, co, var, ks);
                    if let Some(t2) = partner {
                        // C' = −e^{−iα}(conj A + i·conj B)
                        let (zr, zi) = (ar[i] + bi[i], -ai[i] + br[i]);
                        let cr = -(ca * zr - sa * zi);
                        let ci = -(ca * zi + sa * zr);
                        let ce = (cr - t2.mean_re * s) / t2.norm_re;
                        let co = (ci - t2.mean_im * s - t2.beta * ce) / t2.norm_im;
                        cand2[i] = normalized_score(ce, co, var, ks);
                    }
                }
            }
            let mut update = |cand: &[f64], k: usize| {
                for y in r..h - r {
                    for x in r..w - r {
                        let i = y * w + x;
                        if cand[i] > best[i] || (cand[i] == best[i] && k < best_k[i]) {
                            best[i] = cand[i];
                            best_k[i] = k;
                        }
                    }
                }
            };
            update(&cand, k);
            if paired {
                update(&cand2, k + k_total / 2);
            }
        }
    }
    let step = bank.step();
    let mut score = Vec::with_capacity(w * h);
    let mut direction = Vec::with_capacity(w * h);
    for (i, (&s, &k)) in best.iter().zip(&best_k).enumerate() {
        let on = seg.data()[i] && k != usize::MAX && s > 0.0;
        score.push(T::lit(if on { s } else { 0.0 }));
        direction.push(T::lit(if on { step * k as f64 } else { 0.0 }));
    }
    Ok(ScoreMaps {
        score: Image::new(w, h, score)?,
        direction: Image::new(w, h, direction)?,
    })
}

/// Window sums `S1 = ΣP` and centred energies `ΣP² − S1²/n` over the
/// `ks × ks` window centred at every valid pixel.
fn window_moments(p: &[f64], w: usize, h: usize, ks: usize) -> (Vec<f64>, Vec<f64>) {
    let r = ks / 2;
    let stride = w + 1;
    let mut i1 = vec![0.0f64; (w + 1) * (h + 1)];
    let mut i2 = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let (mut a1, mut a2) = (0.0, 0.0);
        for x in 0..w {
            let v = p[y * w + x];
            a1 += v;
            a2 += v * v;
            i1[(y + 1) * stride + x + 1] = i1[y * stride + x + 1] + a1;
            i2[(y + 1) * stride + x + 1] = i2[y * stride + x + 1] + a2;
        }
    }
    let rect = |ii: &[f64], x0: usize, y0: usize| {
        let (x1, y1) = (x0 + ks, y0 + ks);
        ii[y1 * stride + x1] - ii[y0 * stride + x1] - ii[y1 * stride + x0] + ii[y0 * stride + x0]
    };
    let n = (ks * ks) as f64;
    let mut s1 = vec![0.0; w * h];
    let mut c = vec![0.0; w * h];
    for y in r..h - r {
        for x in r..w - r {
            let a = rect(&i1, x - r, y - r);
            let b = rect(&i2, x - r, y - r);
            s1[y * w + x] = a;
            c[y * w + x] = (b - a * a / n).max(0.0);
        }
    }
    (s1, c)
}

/// `A = Σ P(p+d)·dx·G(d)·e^{ik·d}` and `B = Σ P(p+d)·dy·G(d)·e^{ik·d}`
/// at valid pixels, as `(Re A, Im A, Re B, Im B)`.
fn ending_responses<T: Scalar>(
    p: &[f64],
    w: usize,
    h: usize,
    bank: &TemplateBank<T>,
    k: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let params = bank.params();
    let ks = params.ksize;
    let r = ks / 2;
    let (kx, ky) = wave_vector(bank.templates()[k].direction, params.period);
    let factor = |kk: f64, weighted: bool| -> (Vec<f64>, Vec<f64>) {
        (0..ks)
            .map(|j| {
                let t = j as f64 - r as f64;
                let g = (-(t * t) / (2.0 * params.window_sigma * params.window_sigma)).exp();
                let g = if weighted { g * t } else { g };
                (g * (kk * t).cos(), g * (kk * t).sin())
            })
            .unzip()
    };
    let (h0r, h0i) = factor(kx, false);
    let (h1r, h1i) = factor(kx, true);
    let (v0r, v0i) = factor(ky, false);
    let (v1r, v1i) = factor(ky, true);

    // Horizontal passes over every row, valid columns only.
    let n = w * h;
    let (mut a_r, mut a_i, mut b_r, mut b_i) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..h {
        let row = &p[y * w..(y + 1) * w];
        let base = y * w;
        for j in 0..ks {
            let src = &row[j..j + w - 2 * r];
            let (c0r, c0i, c1r, c1i) = (h0r[j], h0i[j], h1r[j], h1i[j]);
            let o0r = &mut b_r[base + r..base + w - r];
            for (o, &s) in o0r.iter_mut().zip(src) {
                *o += c0r * s;
            }
            let o0i = &mut b_i[base + r..base + w - r];
            for (o, &s) in o0i.iter_mut().zip(src) {
                *o += c0i * s;
            }
            let o1r = &mut a_r[base + r..base + w - r];
            for (o, &s) in o1r.iter_mut().zip(src) {
                *o += c1r * s;
            }
            let o1i = &mut a_i[base + r..base + w - r];
            for (o, &s) in o1i.iter_mut().zip(src) {
                *o += c1i * s;
            }
        }
    }
    // Here a_* holds H1 (dx-weighted) and b_* holds H0.
    let (h1_r, h1_i, h0_r, h0_i) = (a_r, a_i, b_r, b_i);
    let (mut ar, mut ai, mut br, mut bi) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in r..h - r {
        let out = y * w + r..y * w + w - r;
        for j in 0..ks {
            let src = (y + j - r) * w + r..(y + j - r) * w + w - r;
            // A += H1 · v0
            complex_axpy(
                &mut ar[out.clone()],
                &mut ai[out.clone()],
                &h1_r[src.clone()],
                &h1_i[src.clone()],
                v0r[j],
                v0i[j],
            );
            // B += H0 · v1
            complex_axpy(
                &mut br[out.clone()],
                &mut bi[out.clone()],
                &h0_r[src.clone()],
                &h0_i[src],
                v1r[j],
                v1i[j],
            );
        }
    }
    (ar, ai, br, bi)
}

#[inline]
fn complex_axpy(or: &mut [f64], oi: &mut [f64], sr: &[f64], si: &[f64], cr: f64, ci: f64) {
    for (((o_r, o_i), &s_r), &s_i) in or.iter_mut().zip(oi.iter_mut()).zip(sr).zip(si) {
        *o_r += cr * s_r - ci * s_i;
        *o_i += cr * s_i + ci * s_r;
    }
}

/// Minutiae of `cos(E)` inside `seg`: [`extract_within`] on the unmasked
/// score maps.
pub fn extract<T: Scalar>(
    e: &EnhancedMap<T>,
    bank: &TemplateBank<T>,
    seg: &BinaryMask,
    params: &ExtractParams,
) -> Result<MinutiaeList> {
    let cos = e.cosine();
    let (w, h) = cos.dims();
    let open = minutiae_score_raster(&cos, bank, &BinaryMask::filled(w, h, true))?;
    extract_within(&open, &cos, bank, seg, params)
}

/// [`extract_from_scores`] on unmasked maps, then the survivors inside
/// `seg`. The result is always a subset of the unmasked extraction.
pub fn extract_within<T: Scalar>(
    open: &ScoreMaps<T>,
    image: &Image<T>,
    bank: &TemplateBank<T>,
    seg: &BinaryMask,
    params: &ExtractParams,
) -> Result<MinutiaeList> {
    ensure_same_dims(open.score.dims(), seg.dims())?;
    let mut list = extract_from_scores(open, image, bank, params)?;
    list.retain(|m| seg.get(m.x as usize, m.y as usize));
    Ok(list)
}

/// Thresholded strict local maxima of `maps.score`, NMS applied.
/// Directions are refined by a parabola through the scores of the best
/// template and its two angular neighbours.
pub fn extract_from_scores<T: Scalar>(
    maps: &ScoreMaps<T>,
    image: &Image<T>,
    bank: &TemplateBank<T>,
    params: &ExtractParams,
) -> Result<MinutiaeList> {
    if !(params.threshold > 0.0 && params.threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {} outside (0, 1)", params.threshold)));
    }
    if !(params.nms_radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("NMS radius {}", params.nms_radius)));
    }
    ensure_same_dims(maps.score.dims(), image.dims())?;
    let (w, h) = maps.score.dims();
    let s = |x: usize, y: usize| maps.score.get(x, y).as_f64();
    let mut found = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = s(x, y);
            if !(v > params.threshold) {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = s(nx as usize, ny as usize);
                    // Equal neighbours earlier in (x, y) order win.
                    if q > v || (q == v && (nx, ny) < (x as isize, y as isize)) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                let dir = refine_direction(bank, image, maps.direction.get(x, y).as_f64(), x, y);
                found.push(Minutia::new(x as f64, y as f64, dir, v));
            }
        }
    }
    Ok(nms(&found, params.nms_radius))
}

fn refine_direction<T: Scalar>(bank: &TemplateBank<T>, image: &Image<T>, coarse: f64, x: usize, y: usize) -> f64 {
    let k_total = bank.len();
    let step = bank.step();
    let k = ((coarse / step).round() as usize) % k_total;
    let s0 = bank.score_at(image, k, x, y);
    let sm = bank.score_at(image, (k + k_total - 1) % k_total, x, y);
    let sp = bank.score_at(image, (k + 1) % k_total, x, y);
    let denom = sm - 2.0 * s0 + sp;
    let delta = if denom < 0.0 {
        (0.5 * (sm - sp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    super::wrap360((k as f64 + delta) * step)
}
