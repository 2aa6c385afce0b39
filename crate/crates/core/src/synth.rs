//! Synthetic prints from a phase model with spiral singularities.
//!
//! `ψ(x, y) = (2π/T)·(x·cos(θ+90°) + y·sin(θ+90°)) + φ₀ + Σ sᵢ·atan2(y − yᵢ, x − xᵢ)`
//! and the image is `A·cos(ψ)` plus seeded Gaussian noise. Each spiral adds
//! one ridge ending (`s = +1`) or valley ending (`s = −1`, a bifurcation in
//! the inverted print).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::extraction::{Minutia, MinutiaeList};
use crate::orientation::OrientationField;
use crate::raster::Image;
use crate::scalar::Scalar;

/// Winding sign of a planted spiral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedMinutia {
    pub x: f64,
    pub y: f64,
    pub polarity: Polarity,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthOrientation {
    Constant(f64),
    /// Per-pixel orientation; must cover the print's dimensions.
    Field(OrientationField<f64>),
}

/// Where the ridge pattern is drawn; elsewhere only noise remains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Foreground {
    Full,
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Foreground {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Foreground::Full => true,
            Foreground::Ellipse { cx, cy, rx, ry } => {
                let (u, v) = ((x - cx) / rx, (y - cy) / ry);
                u * u + v * v <= 1.0
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub orientation: SynthOrientation,
    pub period: f64,
    pub global_phase: f64,
    pub minutiae: Vec<PlantedMinutia>,
    pub noise_sigma: f64,
    pub amplitude: f64,
    pub foreground: Foreground,
}

impl SynthSpec {
    /// Clean full-frame pattern at constant orientation.
    pub fn plain(width: usize, height: usize, theta: f64, period: f64) -> Self {
        Self {
            width,
            height,
            orientation: SynthOrientation::Constant(theta),
            period,
            global_phase: 0.0,
            minutiae: Vec::new(),
            noise_sigma: 0.0,
            amplitude: 1.0,
            foreground: Foreground::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("empty synthetic print".into()));
        }
        if !(self.period >= 4.0) {
            return Err(Error::InvalidParameter(format!("period {} below 4", self.period)));
        }
        if !(self.noise_sigma >= 0.0) || !self.amplitude.is_finite() || !self.global_phase.is_finite() {
            return Err(Error::InvalidParameter("noise, amplitude or phase invalid".into()));
        }
        if let SynthOrientation::Field(f) = &self.orientation {
            if f.pixel_dims() != (self.width, self.height) {
                return Err(Error::ShapeMismatch(format!(
                    "orientation field covers {:?}, print is {}x{}",
                    f.pixel_dims(),
                    self.width,
                    self.height
                )));
            }
        }
        for m in &self.minutiae {
            if !(m.x >= 0.0 && m.y >= 0.0 && m.x < self.width as f64 && m.y < self.height as f64) {
                return Err(Error::OutOfBounds {
                    x: m.x,
                    y: m.y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }

    fn theta_at(&self, x: f64, y: f64) -> f64 {
        match &self.orientation {
            SynthOrientation::Constant(t) => *t,
            SynthOrientation::Field(f) => {
                let xi = (x.round().max(0.0) as usize).min(self.width - 1);
                let yi = (y.round().max(0.0) as usize).min(self.height - 1);
                f.angle_at_pixel(xi, yi)
            }
        }
    }

    /// `ψ(x, y)` in radians, unwrapped.
    pub fn phase_at(&self, x: f64, y: f64) -> f64 {
        let a = (self.theta_at(x, y) + 90.0).to_radians();
        let mut psi = 2.0 * PI / self.period * (x * a.cos() + y * a.sin()) + self.global_phase;
        for m in &self.minutiae {
            psi += m.polarity.sign() * (y - m.y).atan2(x - m.x);
        }
        psi
    }

    /// `∇ψ` with the orientation held at its value at `(x, y)`.
    pub fn phase_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let a = (self.theta_at(x, y) + 90.0).to_radians();
        let w = 2.0 * PI / self.period;
        let (mut gx, mut gy) = (w * a.cos(), w * a.sin());
        for m in &self.minutiae {
            let (dx, dy) = (x - m.x, y - m.y);
            let r2 = dx * dx + dy * dy;
            if r2 > 0.0 {
                gx -= m.polarity.sign() * dy / r2;
                gy += m.polarity.sign() * dx / r2;
            }
        }
        (gx, gy)
    }

    /// Direction in degrees of the planted minutia: the ridge flow (∇ψ
    /// turned 90°) one period out along the open side of the spiral,
    /// oriented to point that way.
    pub fn ground_truth_direction(&self, m: &PlantedMinutia) -> f64 {
        let theta = self.theta_at(m.x, m.y);
        let nominal = match m.polarity {
            Polarity::Positive => theta + 180.0,
            Polarity::Negative => theta,
        }
        .to_radians();
        let (ux, uy) = (nominal.cos(), nominal.sin());
        let (gx, gy) = self.phase_gradient(m.x + self.period * ux, m.y + self.period * uy);
        let (mut fx, mut fy) = (-gy, gx);
        if fx * ux + fy * uy < 0.0 {
            fx = -fx;
            fy = -fy;
        }
        crate::extraction::wrap360(fy.atan2(fx).to_degrees())
    }

    pub fn ground_truth(&self) -> MinutiaeList {
        self.minutiae
            .iter()
            .map(|m| Minutia::new(m.x, m.y, self.ground_truth_direction(m), 1.0))
            .collect()
    }
}

/// Renders `spec`; noise is drawn from a ChaCha8 stream seeded by `seed`.
pub fn synth_print<T: Scalar>(spec: &SynthSpec, seed: u64) -> Result<(Image<T>, MinutiaeList)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let img = Image::from_fn(spec.width, spec.height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let clean = if spec.foreground.contains(xf, yf) {
            spec.amplitude * spec.phase_at(xf, yf).cos()
        } else {
            0.0
        };
        let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        T::lit(clean + n)
    });
    Ok((img, spec.ground_truth()))
}

/// Random scene: `count` minutiae of alternating polarity, pairwise at
/// least `min_sep` apart and `margin` from the border, on a constant
/// orientation with random angle, period in `[8, 10]` and phase.
pub fn random_scene(
    width: usize,
    height: usize,
    count: usize,
    min_sep: f64,
    margin: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SynthSpec::plain(width, height, rng.gen_range(0.0..180.0), rng.gen_range(8.0..10.0));
    spec.global_phase = rng.gen_range(-PI..PI);
    spec.noise_sigma = noise_sigma;
    if !(2.0 * margin < width as f64 && 2.0 * margin < height as f64) {
        return Err(Error::InvalidParameter(format!("margin {margin} leaves no room")));
    }
    let mut attempts = 0;
    while spec.minutiae.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::InvalidParameter(format!("cannot place {count} minutiae {min_sep} px apart")));
        }
        let x = rng.gen_range(margin..width as f64 - margin).round();
        let y = rng.gen_range(margin..height as f64 - margin).round();
        if spec.minutiae.iter().all(|m| (m.x - x).hypot(m.y - y) >= min_sep) {
            let polarity = if spec.minutiae.len().is_multiple_of(2) {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            spec.minutiae.push(PlantedMinutia { x, y, polarity });
        }
    }
    Ok(spec)
}

/// Side of a dataset patch.
pub const PATCH_SIZE: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPatch {
    pub image: Image<f64>,
    pub foreground: bool,
}

/// `n / 2` ridge patches (rounded up) and `n / 2` background patches
/// (noise, constants, or both) on the scale of a normalized print.
pub fn synth_patch_dataset(n: usize, seed: u64) -> Result<Vec<LabeledPatch>> {
    if n == 0 {
        return Err(Error::InvalidParameter("empty patch dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = PATCH_SIZE;
        let sub_seed = rng.gen::<u64>();
        if i % 2 == 0 {
            let mut spec = SynthSpec::plain(s, s, rng.gen_range(0.0..180.0), rng.gen_range(6.0..12.0));
            spec.global_phase = rng.gen_range(-PI..PI);
            spec.amplitude = rng.gen_range(0.8..2.5);
            spec.noise_sigma = spec.amplitude * rng.gen_range(0.0..0.5);
            let (image, _) = synth_print::<f64>(&spec, sub_seed)?;
            out.push(LabeledPatch { image, foreground: true });
        } else {
            let level = rng.gen_range(-1.5..1.5);
            let sigma = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.3) };
            let mut nrng = ChaCha8Rng::seed_from_u64(sub_seed);
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let image = Image::from_fn(s, s, |_, _| level + if sigma > 0.0 { noise.sample(&mut nrng) } else { 0.0 });
            out.push(LabeledPatch { image, foreground: false });
        }
    }
    Ok(out)
}
