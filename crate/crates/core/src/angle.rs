//! Discrete angle distributions: Gaussian label encoding and the
//! maximum-response / doubled-angle-average decoders.
//!
//! Bin `i` of an `N`-bin distribution over `span` degrees sits at
//! `⌊span / N⌋ · i`.

use crate::error::{Error, Result};
use crate::raster::{ChannelMap, Image};
use crate::scalar::Scalar;

/// Tolerance on per-cell probability sums.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Cells whose mean resultant length falls below this are flagged as
/// low-confidence by [`decode_theta_ave`].
pub const LOW_CONFIDENCE: f64 = 0.05;

/// Encoding parameters: bin count, span (180 or 360) and label width σ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleSpec {
    pub bins: usize,
    pub span: f64,
    pub sigma: f64,
}

impl AngleSpec {
    /// 90 bins over 180°, σ = 5°.
    pub const ORIENTATION: AngleSpec = AngleSpec {
        bins: 90,
        span: 180.0,
        sigma: 5.0,
    };

    /// 180 bins over 360°, σ = 10°.
    pub const DIRECTION: AngleSpec = AngleSpec {
        bins: 180,
        span: 360.0,
        sigma: 10.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidParameter(format!("{} angle bins", self.bins)));
        }
        if self.span != 180.0 && self.span != 360.0 {
            return Err(Error::InvalidParameter(format!("angle span {}", self.span)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("label sigma {}", self.sigma)));
        }
        Ok(())
    }

    /// `⌊span / N⌋`, in degrees.
    pub fn bin_step(&self) -> f64 {
        bin_step(self.span, self.bins)
    }
}

#[inline]
pub fn bin_step(span: f64, bins: usize) -> f64 {
    (span / bins as f64).floor()
}

/// Circular distance on a circle of circumference `span`.
#[inline]
pub fn circular_distance(a: f64, b: f64, span: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(span);
    d.min(span - d)
}

/// Gaussian label vector for angle `theta`, normalized to sum 1.
pub fn encode_angle<T: Scalar>(theta: f64, spec: AngleSpec) -> Result<Vec<T>> {
    spec.validate()?;
    if !(0.0..spec.span).contains(&theta) {
        return Err(Error::AngleOutOfRange {
            angle: theta,
            span: spec.span,
        });
    }
    let step = spec.bin_step();
    let norm = 1.0 / (spec.sigma * (2.0 * std::f64::consts::PI).sqrt());
    let raw: Vec<f64> = (0..spec.bins)
        .map(|i| {
            let d = (theta - step * i as f64).abs();
            let d = d.min(spec.span - d);
            norm * (-0.5 * (d / spec.sigma).powi(2)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|p| T::lit(p / total)).collect())
}

/// Per-cell probability vectors over angle bins.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleDistribution<T> {
    span: f64,
    probs: ChannelMap<T>,
}

impl<T: Scalar> AngleDistribution<T> {
    /// Validates entries in `[0, 1]` and per-cell sums of 1.
    pub fn new(probs: ChannelMap<T>, span: f64) -> Result<Self> {
        if probs.channels() < 2 {
            return Err(Error::InvalidParameter("angle distribution needs at least 2 bins".into()));
        }
        if span != 180.0 && span != 360.0 {
            return Err(Error::InvalidParameter(format!("angle span {span}")));
        }
        for y in 0..probs.height() {
            for x in 0..probs.width() {
                let cell = probs.cell(x, y);
                if cell.iter().any(|&p| p < T::zero() || p > T::one()) {
                    return Err(Error::InvalidParameter(format!("probability outside [0, 1] at ({x}, {y})")));
                }
                let s: f64 = cell.iter().map(|p| p.as_f64()).sum();
                if (s - 1.0).abs() > SUM_TOLERANCE {
                    return Err(Error::InvalidParameter(format!("cell ({x}, {y}) sums to {s}")));
                }
            }
        }
        Ok(Self { span, probs })
    }

    /// Uniform distribution everywhere.
    pub fn uniform(width: usize, height: usize, bins: usize, span: f64) -> Result<Self> {
        Self::new(
            ChannelMap::filled(width, height, bins, T::one() / T::from_usize(bins).unwrap()),
            span,
        )
    }

    /// Encodes an angle raster (degrees in `[0, span)`).
    pub fn encode(angles: &Image<T>, spec: AngleSpec) -> Result<Self> {
        let mut probs = ChannelMap::zeros(angles.width(), angles.height(), spec.bins);
        for y in 0..angles.height() {
            for x in 0..angles.width() {
                let v = encode_angle::<T>(angles.get(x, y).as_f64(), spec)?;
                probs.cell_mut(x, y).copy_from_slice(&v);
            }
        }
        Ok(Self { span: spec.span, probs })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn bins(&self) -> usize {
        self.probs.channels()
    }

    pub fn width(&self) -> usize {
        self.probs.width()
    }

    pub fn height(&self) -> usize {
        self.probs.height()
    }

    pub fn probs(&self) -> &ChannelMap<T> {
        &self.probs
    }

    pub fn into_probs(self) -> ChannelMap<T> {
        self.probs
    }

    pub fn cell(&self, x: usize, y: usize) -> &[T] {
        self.probs.cell(x, y)
    }

    pub fn bin_step(&self) -> f64 {
        bin_step(self.span, self.bins())
    }
}

/// Index of the largest entry, ties toward the smallest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate().skip(1) {
        if p > v[best] {
            best = i;
        }
    }
    best
}

/// Angle of the maximum-probability bin per cell.
pub fn decode_theta_max<T: Scalar>(dist: &AngleDistribution<T>) -> Image<T> {
    let step = T::lit(dist.bin_step());
    Image::from_fn(dist.width(), dist.height(), |x, y| {
        step * T::from_usize(argmax(dist.cell(x, y))).unwrap()
    })
}

/// Doubled-angle mean vector `(d_cos, d_sin)` of one cell, including the
/// `1/N` factor.
pub fn mean_vector<T: Scalar>(cell: &[T], step: f64) -> (T, T) {
    let n = cell.len();
    let mut c = T::zero();
    let mut s = T::zero();
    for (i, &p) in cell.iter().enumerate() {
        let a = T::lit((2.0 * step * i as f64).to_radians());
        c += p * a.cos();
        s += p * a.sin();
    }
    let inv = T::one() / T::from_usize(n).unwrap();
    (c * inv, s * inv)
}

/// Averaged orientation per cell from the doubled-angle mean vector,
/// mapped into `[0, 180)`. Only defined for 180° spans.
pub fn decode_theta_ave<T: Scalar>(dist: &AngleDistribution<T>) -> Result<Image<T>> {
    if dist.span() != 180.0 {
        return Err(Error::UnsupportedSpan(dist.span()));
    }
    let step = dist.bin_step();
    Ok(Image::from_fn(dist.width(), dist.height(), |x, y| {
        let (c, s) = mean_vector(dist.cell(x, y), step);
        let half = if c == T::zero() && s == T::zero() {
            T::zero()
        } else {
            s.atan2(c).to_degrees() * T::lit(0.5)
        };
        let mut a = if half < T::zero() { half + T::lit(180.0) } else { half };
        if a >= T::lit(180.0) {
            a = T::zero();
        }
        a
    }))
}

/// Mean resultant length `N · |d̄|` in `[0, 1]`; values below
/// [`LOW_CONFIDENCE`] mark cells where the average is ill-conditioned.
pub fn resultant_length<T: Scalar>(dist: &AngleDistribution<T>) -> Image<T> {
    let step = dist.bin_step();
    let n = T::from_usize(dist.bins()).unwrap();
    Image::from_fn(dist.width(), dist.height(), |x, y| {
        let (c, s) = mean_vector(dist.cell(x, y), step);
        (c * c + s * s).sqrt() * n
    })
}
