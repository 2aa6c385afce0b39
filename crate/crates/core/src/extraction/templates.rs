//! Ridge-ending templates.
//!
//! Near an ending pointing along `α` the enhanced pattern is
//! `cos(k_α·d + atan2(d) + φ)` for an unknown phase `φ`. The complex
//! template `Z_α(d) = e^{−iα}·(dx + i·dy)·G(d)·e^{i k_α·d}` carries that
//! spiral under a ring-shaped window `|d|·G(d)`; its real and imaginary
//! parts, orthonormalized, form a quadrature pair whose joint response does
//! not depend on `φ`. Ridge endings (`φ`) and valley endings (`φ + π`) are
//! therefore scored by the same pair.

use crate::error::{Error, Result};
use crate::raster::{Image, Kernel};
use crate::scalar::Scalar;
use std::f64::consts::PI;

/// Template bank parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemplateParams {
    /// Number of directions `K`, spread uniformly over `[0, 360)`.
    pub directions: usize,
    /// Odd template extent in pixels.
    pub ksize: usize,
    /// Ridge period in pixels.
    pub period: f64,
    /// σ of the Gaussian part of the window.
    pub window_sigma: f64,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            directions: 16,
            ksize: 25,
            period: 9.0,
            window_sigma: 4.0,
        }
    }
}

/// One direction's quadrature pair, each zero-mean and unit-norm, with
/// `⟨even, odd⟩ = 0`.
#[derive(Clone, Debug)]
pub struct Template<T> {
    pub direction: f64,
    pub even: Kernel<T>,
    pub odd: Kernel<T>,
    // even = (Re Z − mean_re) / norm_re;
    // odd = (Im Z − mean_im − beta·even) / norm_im.
    pub(crate) mean_re: f64,
    pub(crate) norm_re: f64,
    pub(crate) mean_im: f64,
    pub(crate) norm_im: f64,
    pub(crate) beta: f64,
}

/// `K` templates; template `k` points along `360·k/K` degrees.
#[derive(Clone, Debug)]
pub struct TemplateBank<T> {
    templates: Vec<Template<T>>,
    params: TemplateParams,
}

/// Wave vector of the ending pointing along `alpha` degrees.
pub(crate) fn wave_vector(alpha: f64, period: f64) -> (f64, f64) {
    let a = alpha.to_radians();
    let w = 2.0 * PI / period;
    (w * a.sin(), -w * a.cos())
}

fn gauss(t: f64, sigma: f64) -> f64 {
    (-(t * t) / (2.0 * sigma * sigma)).exp()
}

/// `Z_α(u, v)` in closed form.
pub(crate) fn complex_template(alpha: f64, p: &TemplateParams, u: f64, v: f64) -> (f64, f64) {
    let (kx, ky) = wave_vector(alpha, p.period);
    let g = gauss(u, p.window_sigma) * gauss(v, p.window_sigma);
    let ph = kx * u + ky * v - alpha.to_radians();
    let (c, s) = (ph.cos(), ph.sin());
    // (u + iv)(c + is)
    (g * (u * c - v * s), g * (u * s + v * c))
}

/// Builds the default-window bank for `k` directions.
pub fn template_bank<T: Scalar>(k: usize, ksize: usize, period: f64) -> Result<TemplateBank<T>> {
    TemplateBank::new(TemplateParams {
        directions: k,
        ksize,
        period,
        ..TemplateParams::default()
    })
}

impl<T: Scalar> TemplateBank<T> {
    pub fn new(params: TemplateParams) -> Result<Self> {
        if params.directions < 4 {
            return Err(Error::InvalidKernel(format!("{} template directions", params.directions)));
        }
        if params.ksize.is_multiple_of(2) || params.ksize < 3 {
            return Err(Error::InvalidKernel(format!("template size {}", params.ksize)));
        }
        if !(params.period > 0.0) || !(params.window_sigma > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "template period {} window {}",
                params.period, params.window_sigma
            )));
        }
        let r = (params.ksize / 2) as isize;
        let n = (params.ksize * params.ksize) as f64;
        let templates = (0..params.directions)
            .map(|i| {
                let alpha = 360.0 * i as f64 / params.directions as f64;
                let mut re = Vec::with_capacity(params.ksize * params.ksize);
                let mut im = Vec::with_capacity(re.capacity());
                for v in -r..=r {
                    for u in -r..=r {
                        let (a, b) = complex_template(alpha, &params, u as f64, v as f64);
                        re.push(a);
                        im.push(b);
                    }
                }
                let mean_re = re.iter().sum::<f64>() / n;
                re.iter_mut().for_each(|a| *a -= mean_re);
                let norm_re = re.iter().map(|a| a * a).sum::<f64>().sqrt();
                re.iter_mut().for_each(|a| *a /= norm_re);
                let mean_im = im.iter().sum::<f64>() / n;
                im.iter_mut().for_each(|b| *b -= mean_im);
                let beta: f64 = im.iter().zip(&re).map(|(b, a)| a * b).sum();
                im.iter_mut().zip(&re).for_each(|(b, a)| *b -= beta * a);
                let norm_im = im.iter().map(|b| b * b).sum::<f64>().sqrt();
                im.iter_mut().for_each(|b| *b /= norm_im);
                let k = params.ksize;
                Ok(Template {
                    direction: alpha,
                    even: Kernel::new(k, k, re.into_iter().map(T::lit).collect())?,
                    odd: Kernel::new(k, k, im.into_iter().map(T::lit).collect())?,
                    mean_re,
                    norm_re,
                    mean_im,
                    norm_im,
                    beta,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { templates, params })
    }

    pub fn params(&self) -> &TemplateParams {
        &self.params
    }

    pub fn templates(&self) -> &[Template<T>] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn ksize(&self) -> usize {
        self.params.ksize
    }

    /// Angular spacing of the templates in degrees.
    pub fn step(&self) -> f64 {
        360.0 / self.templates.len() as f64
    }

    /// Quadrature score of template `k` at `(x, y)`:
    /// `√(⟨P, even⟩² + ⟨P, odd⟩²) / ‖P − P̄‖` over the `ksize × ksize`
    /// patch `P` centred there, in `[0, 1]`. Returns 0 when the patch does
    /// not fit inside the image or is flat.
    pub fn score_at(&self, image: &Image<T>, k: usize, x: usize, y: usize) -> f64 {
        let r = self.params.ksize / 2;
        let (w, h) = image.dims();
        if x < r || y < r || x + r >= w || y + r >= h {
            return 0.0;
        }
        let ks = self.params.ksize;
        let t = &self.templates[k];
        let (mut s1, mut s2, mut ce, mut co) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..ks {
            let row = &image.row(y + j - r)[x - r..x - r + ks];
            for (i, &p) in row.iter().enumerate() {
                let p = p.as_f64();
                s1 += p;
                s2 += p * p;
                ce += p * t.even.taps()[j * ks + i].as_f64();
                co += p * t.odd.taps()[j * ks + i].as_f64();
            }
        }
        let var = s2 - s1 * s1 / (ks * ks) as f64;
        normalized_score(ce, co, var, ks)
    }
}

/// Shared final step of the direct and separable scorers.
#[inline]
pub(crate) fn normalized_score(ce: f64, co: f64, centered_sq: f64, ksize: usize) -> f64 {
    // Patches this flat carry no ridge structure.
    if centered_sq <= 1e-12 * (ksize * ksize) as f64 {
        return 0.0;
    }
    ((ce * ce + co * co) / centered_sq).sqrt().min(1.0)
}
