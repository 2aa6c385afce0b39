//! Global mean/variance intensity normalization.

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::scalar::Scalar;

/// Target mean `m0` and variance `v0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormParams {
    pub m0: f64,
    pub v0: f64,
}

impl Default for NormParams {
    fn default() -> Self {
        Self { m0: 0.0, v0: 1.0 }
    }
}

impl NormParams {
    pub fn new(m0: f64, v0: f64) -> Result<Self> {
        if !(v0 > 0.0) || !m0.is_finite() || !v0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "normalization target ({m0}, {v0}) needs finite mean and positive variance"
            )));
        }
        Ok(Self { m0, v0 })
    }
}

/// Maps each pixel to `m0 ± sqrt((I − m)² · v0 / v)`, taking `+` above the
/// image mean `m` and `−` otherwise.
pub fn normalize<T: Scalar>(image: &Image<T>, params: NormParams) -> Result<Image<T>> {
    let m = image.mean();
    let v = image.variance();
    if !(v > T::zero()) {
        return Err(Error::DegenerateImage("image has zero variance".into()));
    }
    let m0 = T::lit(params.m0);
    let ratio = T::lit(params.v0) / v;
    Ok(image.map(|p| {
        let d = ((p - m) * (p - m) * ratio).sqrt();
        if p > m {
            m0 + d
        } else {
            m0 - d
        }
    }))
}
