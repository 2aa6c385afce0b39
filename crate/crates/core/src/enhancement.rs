//! Selective Gabor enhancement.
//!
//! The image is filtered with a bank of `N` complex Gabor kernels, one per
//! quantized ridge orientation. The phases of all responses form the grouped
//! phases; an orientation mask then selects, per pixel, the channel matching
//! the local ridge orientation. The selected phase is the enhanced map and
//! its cosine the displayable enhanced print.

use num_complex::Complex;

use crate::angle::{bin_step, AngleDistribution};
use crate::error::{Error, Result};
use crate::orientation::OrientationField;
use crate::raster::{ChannelMap, Image, Kernel};
use crate::scalar::Scalar;

/// Responses with amplitude below this keep phase 0.
pub const AMPLITUDE_FLOOR: f64 = 1e-9;

/// Gabor bank parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborParams {
    /// Ridge period in pixels (frequency is `1 / period`).
    pub period: f64,
    /// Gaussian envelope σ in pixels.
    pub sigma: f64,
    /// Odd kernel extent.
    pub ksize: usize,
    /// Number of orientation bins.
    pub bins: usize,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            period: 9.0,
            sigma: 4.5,
            ksize: 25,
            bins: 90,
        }
    }
}

/// Complex Gabor filters at orientations `θᵢ = ⌊180/N⌋·i`.
#[derive(Clone, Debug)]
pub struct GaborBank<T> {
    kernels: Vec<(Kernel<T>, Kernel<T>)>,
    thetas: Vec<f64>,
    freq: f64,
    sigma: f64,
    ksize: usize,
    // Separable factors per kernel: horizontal and vertical 1D taps.
    sep: Vec<(Vec<Complex<T>>, Vec<Complex<T>>)>,
}

/// Builds the bank. Kernel `i` is
/// `exp(−(x²+y²)/(2σ²)) · exp(i·2πf·(x·cos(θᵢ+90°) + y·sin(θᵢ+90°)))`,
/// so the wave vector runs across the ridges.
pub fn gabor_bank<T: Scalar>(freq: f64, n: usize, sigma: f64, ksize: usize) -> Result<GaborBank<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("{n} Gabor orientations")));
    }
    if !(freq > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("Gabor freq {freq}, sigma {sigma}")));
    }
    if ksize.is_multiple_of(2) || ksize == 0 {
        return Err(Error::InvalidKernel(format!("even Gabor size {ksize}")));
    }
    let step = bin_step(180.0, n);
    let r = (ksize / 2) as isize;
    let w = 2.0 * std::f64::consts::PI * freq;
    let mut kernels = Vec::with_capacity(n);
    let mut sep = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        let theta = step * i as f64;
        let a = (theta + 90.0).to_radians();
        let (kx, ky) = (w * a.cos(), w * a.sin());
        let g = |u: isize, v: isize| {
            let (u, v) = (u as f64, v as f64);
            let env = (-(u * u + v * v) / (2.0 * sigma * sigma)).exp();
            let ph = kx * u + ky * v;
            (env * ph.cos(), env * ph.sin())
        };
        let re = Kernel::from_offsets(ksize, |u, v| T::lit(g(u, v).0))?;
        let im = Kernel::from_offsets(ksize, |u, v| T::lit(g(u, v).1))?;
        let factor = |k: f64| -> Vec<Complex<T>> {
            (-r..=r)
                .map(|u| {
                    let u = u as f64;
                    let env = (-(u * u) / (2.0 * sigma * sigma)).exp();
                    Complex::new(T::lit(env * (k * u).cos()), T::lit(env * (k * u).sin()))
                })
                .collect()
        };
        sep.push((factor(kx), factor(ky)));
        kernels.push((re, im));
        thetas.push(theta);
    }
    Ok(GaborBank {
        kernels,
        thetas,
        freq,
        sigma,
        ksize,
        sep,
    })
}

impl<T: Scalar> GaborBank<T> {
    pub fn from_params(p: &GaborParams) -> Result<Self> {
        if !(p.period > 0.0) {
            return Err(Error::InvalidParameter(format!("Gabor period {}", p.period)));
        }
        gabor_bank(1.0 / p.period, p.bins, p.sigma, p.ksize)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// `(real, imaginary)` kernel pair of channel `i`.
    pub fn kernel(&self, i: usize) -> (&Kernel<T>, &Kernel<T>) {
        let (re, im) = &self.kernels[i];
        (re, im)
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn ksize(&self) -> usize {
        self.ksize
    }

    /// Bin whose orientation is circularly nearest to `theta` (mod 180);
    /// ties go to the lower bin.
    pub fn nearest_bin(&self, theta: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &t) in self.thetas.iter().enumerate() {
            let d = crate::orientation::orientation_distance(theta, t);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Complex response of channel `i` at one pixel (replicate padding),
    /// evaluated directly from the 2D kernel.
    pub fn response_at(&self, image: &Image<T>, i: usize, x: usize, y: usize) -> Complex<T> {
        let (re, im) = &self.kernels[i];
        let r = (self.ksize / 2) as isize;
        let mut acc = Complex::new(T::zero(), T::zero());
        let (xi, yi) = (x as isize, y as isize);
        let (w, h) = (image.width() as isize, image.height() as isize);
        let interior = xi >= r && yi >= r && xi + r < w && yi + r < h;
        let size = self.ksize;
        for j in 0..size {
            let v = j as isize - r;
            let sy = yi - v;
            let base = j * size;
            for k in 0..size {
                let u = k as isize - r;
                let sx = xi - u;
                let p = if interior {
                    image.get(sx as usize, sy as usize)
                } else {
                    image.get_clamped(sx, sy)
                };
                acc.re += re.taps()[base + k] * p;
                acc.im += im.taps()[base + k] * p;
            }
        }
        acc
    }

    /// Full complex response of channel `i` (separable, replicate padding).
    pub fn response(&self, image: &Image<T>, i: usize) -> Result<(Image<T>, Image<T>)> {
        let (w, h) = image.dims();
        if self.ksize > w || self.ksize > h {
            return Err(Error::KernelTooLarge {
                kw: self.ksize,
                kh: self.ksize,
                width: w,
                height: h,
            });
        }
        let (hx, vy) = &self.sep[i];
        let r = (self.ksize / 2) as isize;
        // Horizontal: H(x, y) = Σ_u hx(u) · I(x − u, y).
        let mut hr = vec![T::zero(); w * h];
        let mut hi = vec![T::zero(); w * h];
        for y in 0..h {
            let row = image.row(y);
            for (k, c) in hx.iter().enumerate() {
                let u = k as isize - r;
                for x in 0..w {
                    let sx = (x as isize - u).clamp(0, w as isize - 1) as usize;
                    hr[y * w + x] += c.re * row[sx];
                    hi[y * w + x] += c.im * row[sx];
                }
            }
        }
        // Vertical: C(x, y) = Σ_v vy(v) · H(x, y − v).
        let mut cr = vec![T::zero(); w * h];
        let mut ci = vec![T::zero(); w * h];
        for y in 0..h {
            let (or, oi) = (&mut cr[y * w..(y + 1) * w], &mut ci[y * w..(y + 1) * w]);
            for (k, c) in vy.iter().enumerate() {
                let v = k as isize - r;
                let sy = (y as isize - v).clamp(0, h as isize - 1) as usize;
                let (sr, si) = (&hr[sy * w..(sy + 1) * w], &hi[sy * w..(sy + 1) * w]);
                for x in 0..w {
                    or[x] += c.re * sr[x] - c.im * si[x];
                    oi[x] += c.re * si[x] + c.im * sr[x];
                }
            }
        }
        Ok((Image::new(w, h, cr)?, Image::new(w, h, ci)?))
    }
}

/// `Arg` in `(−π, π]` with `Arg(0) = 0`.
#[inline]
pub fn phase_of<T: Scalar>(re: T, im: T) -> T {
    if (re * re + im * im).sqrt() < T::lit(AMPLITUDE_FLOOR) {
        return T::zero();
    }
    let a = im.atan2(re);
    if a <= -T::PI() {
        T::PI()
    } else {
        a
    }
}

/// Phases of all bank responses, one channel per orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedPhases<T> {
    pub phases: ChannelMap<T>,
}

/// Per-pixel channel weights.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationMask<T> {
    pub mask: ChannelMap<T>,
}

/// Selected phase (radians) and, when available, the amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancedMap<T> {
    pub phase: Image<T>,
    pub amplitude: Option<Image<T>>,
}

impl<T: Scalar> EnhancedMap<T> {
    /// `cos(E)`, the enhanced ridge pattern in `[−1, 1]`.
    pub fn cosine(&self) -> Image<T> {
        self.phase.map(|p| p.cos())
    }

    /// `(cos(E) + 1) / 2` scaled to `[0, 255]` for saving.
    pub fn to_display(&self) -> Image<T> {
        let s = T::lit(127.5);
        self.phase.map(|p| (p.cos() + T::one()) * s)
    }
}

/// `C(·,·,i) = I ∗ gᵢ`; returns the phases and amplitudes of every channel.
pub fn grouped_phases<T: Scalar>(image: &Image<T>, bank: &GaborBank<T>) -> Result<(GroupedPhases<T>, ChannelMap<T>)> {
    let (w, h) = image.dims();
    let n = bank.len();
    let mut phases = ChannelMap::zeros(w, h, n);
    let mut amps = ChannelMap::zeros(w, h, n);
    for i in 0..n {
        let (re, im) = bank.response(image, i)?;
        let (pd, ad) = (phases.data_mut(), amps.data_mut());
        for (p, (&a, &b)) in re.data().iter().zip(im.data()).enumerate() {
            pd[p * n + i] = phase_of(a, b);
            ad[p * n + i] = (a * a + b * b).sqrt();
        }
    }
    Ok((GroupedPhases { phases }, amps))
}

/// Hard mask: one-hot at the bank bin nearest each pixel's orientation.
pub fn orientation_mask<T: Scalar>(field: &OrientationField<T>, bank: &GaborBank<T>) -> OrientationMask<T> {
    let angles = field.to_pixels();
    let (w, h) = angles.dims();
    let mut mask = ChannelMap::zeros(w, h, bank.len());
    for y in 0..h {
        for x in 0..w {
            let b = bank.nearest_bin(angles.get(x, y).as_f64());
            mask.cell_mut(x, y)[b] = T::one();
        }
    }
    OrientationMask { mask }
}

/// Soft mask: the orientation probabilities themselves.
pub fn soft_orientation_mask<T: Scalar>(dist: &AngleDistribution<T>, bank: &GaborBank<T>) -> Result<OrientationMask<T>> {
    if dist.bins() != bank.len() || dist.span() != 180.0 {
        return Err(Error::ShapeMismatch(format!(
            "{}-bin span-{} distribution for a {}-channel bank",
            dist.bins(),
            dist.span(),
            bank.len()
        )));
    }
    Ok(OrientationMask {
        mask: dist.probs().clone(),
    })
}

/// `E(x, y) = Σᵢ F(x, y, i) · M(x, y, i)`.
pub fn enhance<T: Scalar>(phases: &GroupedPhases<T>, mask: &OrientationMask<T>) -> Result<EnhancedMap<T>> {
    if phases.phases.shape() != mask.mask.shape() {
        return Err(Error::ShapeMismatch(format!(
            "phases {:?} vs mask {:?}",
            phases.phases.shape(),
            mask.mask.shape()
        )));
    }
    let (w, h, _) = phases.phases.shape();
    let phase = Image::from_fn(w, h, |x, y| {
        phases
            .phases
            .cell(x, y)
            .iter()
            .zip(mask.mask.cell(x, y))
            .fold(T::zero(), |acc, (&f, &m)| acc + f * m)
    });
    Ok(EnhancedMap { phase, amplitude: None })
}

/// Hard-mask enhancement without materializing all `N` channels: each
/// pixel is filtered only with the kernel of its own orientation bin.
/// Equal to `enhance(grouped_phases(image), orientation_mask(field))`.
pub fn selective_enhance<T: Scalar>(
    image: &Image<T>,
    bank: &GaborBank<T>,
    field: &OrientationField<T>,
) -> Result<EnhancedMap<T>> {
    let (w, h) = image.dims();
    if field.pixel_dims() != (w, h) {
        return Err(Error::ShapeMismatch(format!(
            "field covers {:?}, image is {w}x{h}",
            field.pixel_dims()
        )));
    }
    if bank.ksize() > w || bank.ksize() > h {
        return Err(Error::KernelTooLarge {
            kw: bank.ksize(),
            kh: bank.ksize(),
            width: w,
            height: h,
        });
    }
    let angles = field.to_pixels();
    let mut phase = vec![T::zero(); w * h];
    let mut amp = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let b = bank.nearest_bin(angles.get(x, y).as_f64());
            let c = bank.response_at(image, b, x, y);
            phase[y * w + x] = phase_of(c.re, c.im);
            amp[y * w + x] = c.norm();
        }
    }
    Ok(EnhancedMap {
        phase: Image::new(w, h, phase)?,
        amplitude: Some(Image::new(w, h, amp)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{conv2d, PaddingMode};
    use std::f64::consts::PI;

    #[test]
    fn two_bin_bank_orientations() {
        let bank = gabor_bank::<f64>(1.0 / 9.0, 2, 4.5, 25).unwrap();
        assert_eq!(bank.thetas(), &[0.0, 90.0]);
        // θ = 0°: constant along x, oscillating along y.
        let (re, _) = bank.kernel(0);
        let env = |u: f64, v: f64| (-(u * u + v * v) / (2.0 * 4.5 * 4.5)).exp();
        assert!((re.at(3, 0) - env(3.0, 0.0)).abs() < 1e-15);
        assert!((re.at(0, 3) - env(0.0, 3.0) * (2.0 * PI * 3.0 / 9.0 * (PI / 2.0).sin()).cos()).abs() < 1e-12);
    }

    #[test]
    fn kernel_symmetry() {
        let bank = gabor_bank::<f64>(1.0 / 9.0, 12, 4.5, 25).unwrap();
        for i in 0..bank.len() {
            let (re, im) = bank.kernel(i);
            for v in -12..=12 {
                for u in -12..=12 {
                    assert!((re.at(u, v) - re.at(-u, -v)).abs() < 1e-15);
                    assert!((im.at(u, v) + im.at(-u, -v)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn even_size_rejected() {
        assert!(matches!(gabor_bank::<f64>(0.1, 4, 4.0, 24), Err(Error::InvalidKernel(_))));
        assert!(gabor_bank::<f64>(0.1, 1, 4.0, 25).is_err());
    }

    #[test]
    fn separable_response_matches_two_real_convolutions() {
        let bank = gabor_bank::<f64>(1.0 / 9.0, 6, 4.5, 25).unwrap();
        let img = Image::<f64>::from_fn(40, 33, |x, y| ((x * 7 + y * 13) % 17) as f64 / 17.0 - 0.5);
        for i in 0..bank.len() {
            let (re, im) = bank.response(&img, i).unwrap();
            let (kr, ki) = bank.kernel(i);
            let rr = conv2d(&img, kr, PaddingMode::Replicate).unwrap();
            let ri = conv2d(&img, ki, PaddingMode::Replicate).unwrap();
            assert!(re.max_abs_diff(&rr) <= 1e-12);
            assert!(im.max_abs_diff(&ri) <= 1e-12);
            for (x, y) in [(0, 0), (20, 16), (39, 32)] {
                let c = bank.response_at(&img, i, x, y);
                assert!((c.re - rr.get(x, y)).abs() <= 1e-12);
                assert!((c.im - ri.get(x, y)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_image_zero_phase() {
        let bank = gabor_bank::<f64>(1.0 / 9.0, 4, 4.5, 25).unwrap();
        let (ph, amp) = grouped_phases(&Image::zeros(30, 30), &bank).unwrap();
        assert!(ph.phases.data().iter().chain(amp.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn phase_range() {
        assert_eq!(phase_of(-1.0, -0.0), PI);
        assert_eq!(phase_of(-1.0, 0.0), PI);
        assert_eq!(phase_of(0.0, 0.0), 0.0);
    }

    #[test]
    fn mask_rules() {
        let bank = gabor_bank::<f64>(1.0 / 9.0, 90, 4.5, 25).unwrap();
        assert_eq!(bank.nearest_bin(46.0), 23);
        assert_eq!(bank.nearest_bin(47.0), 23);
        assert_eq!(bank.nearest_bin(179.5), 0);
        assert_eq!(bank.nearest_bin(178.9), 89);
        let field = OrientationField::new(Image::<f64>::filled(2, 2, 47.0), 4, (8, 7)).unwrap();
        let m = orientation_mask(&field, &bank);
        assert_eq!(m.mask.shape(), (8, 7, 90));
        assert_eq!(m.mask.cell(7, 6)[23], 1.0);
        assert_eq!(m.mask.cell(7, 6).iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn enhance_selects_and_null_mask() {
        let ph = GroupedPhases {
            phases: ChannelMap::new(2, 1, 3, vec![0.1, 0.2, 0.3, -0.1, -0.2, -0.3]).unwrap(),
        };
        let mut m = ChannelMap::zeros(2, 1, 3);
        m.cell_mut(0, 0)[2] = 1.0;
        m.cell_mut(1, 0)[2] = 1.0;
        let e = enhance(&ph, &OrientationMask { mask: m }).unwrap();
        assert_eq!(e.phase.data(), &[0.3, -0.3]);
        let e = enhance(&ph, &OrientationMask { mask: ChannelMap::zeros(2, 1, 3) }).unwrap();
        assert_eq!(e.phase.data(), &[0.0, 0.0]);
        assert!(enhance(&ph, &OrientationMask { mask: ChannelMap::zeros(2, 1, 2) }).is_err());
    }

    #[test]
    fn soft_mask_checks_bins() {
        let bank = gabor_bank::<f64>(1.0 / 9.0, 4, 4.5, 25).unwrap();
        let d = AngleDistribution::<f64>::uniform(3, 3, 4, 180.0).unwrap();
        let m = soft_orientation_mask(&d, &bank).unwrap();
        assert!(m.mask.data().iter().all(|&v| v == 0.25));
        let d = AngleDistribution::<f64>::uniform(3, 3, 5, 180.0).unwrap();
        assert!(soft_orientation_mask(&d, &bank).is_err());
    }
}
