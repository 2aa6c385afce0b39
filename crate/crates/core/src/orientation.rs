//! Gradient-based ridge orientation: Sobel gradients, windowed structure
//! tensor, orientation field and coherence.
//!
//! Angles are in degrees in image coordinates (x right, y down). A ridge
//! orientation of 0° means ridges run along the x axis.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{box_sum, conv2d, ensure_same_dims, upsample_nearest, Image, Kernel, PaddingMode};
use crate::scalar::Scalar;

/// Denominator guard for coherence.
pub const COHERENCE_EPS: f64 = 1e-12;

/// Sobel kernels laid out for true convolution: a ramp `I(x, y) = x`
/// produces `∇x = +8`.
pub fn sobel_kernels<T: Scalar>() -> (Kernel<T>, Kernel<T>) {
    let sx = Kernel::from_rows(&[&[1.0, 0.0, -1.0], &[2.0, 0.0, -2.0], &[1.0, 0.0, -1.0]]).unwrap();
    let sy = Kernel::from_rows(&[&[1.0, 2.0, 1.0], &[0.0, 0.0, 0.0], &[-1.0, -2.0, -1.0]]).unwrap();
    (sx, sy)
}

/// `(∇x I, ∇y I)` with replicate padding.
pub fn sobel_gradients<T: Scalar>(image: &Image<T>) -> Result<(Image<T>, Image<T>)> {
    let (sx, sy) = sobel_kernels();
    Ok((
        conv2d(image, &sx, PaddingMode::Replicate)?,
        conv2d(image, &sy, PaddingMode::Replicate)?,
    ))
}

/// Windowed gradient products.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensor<T> {
    pub gxx: Image<T>,
    pub gyy: Image<T>,
    pub gxy: Image<T>,
}

impl<T: Scalar> StructureTensor<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.gxx.dims()
    }
}

pub fn structure_tensor<T: Scalar>(gx: &Image<T>, gy: &Image<T>, w: usize) -> Result<StructureTensor<T>> {
    ensure_same_dims(gx.dims(), gy.dims())?;
    Ok(StructureTensor {
        gxx: box_sum(&gx.map(|v| v * v), w)?,
        gyy: box_sum(&gy.map(|v| v * v), w)?,
        gxy: box_sum(&gx.zip_map(gy, |a, b| a * b)?, w)?,
    })
}

/// Per-cell ridge orientation in `[0, 180)` degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationField<T> {
    angles: Image<T>,
    stride: usize,
    coherence: Option<Image<T>>,
    pixel_dims: (usize, usize),
}

impl<T: Scalar> OrientationField<T> {
    /// Wraps a raster of angles; `pixel_dims` is the size of the image the
    /// cells tile.
    pub fn new(angles: Image<T>, stride: usize, pixel_dims: (usize, usize)) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParameter("orientation stride 0".into()));
        }
        let expect = (pixel_dims.0.div_ceil(stride), pixel_dims.1.div_ceil(stride));
        if angles.dims() != expect {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} cells for {}x{} pixels at stride {stride}",
                angles.width(),
                angles.height(),
                pixel_dims.0,
                pixel_dims.1
            )));
        }
        let lim = T::lit(180.0);
        if angles.data().iter().any(|&a| a < T::zero() || a >= lim) {
            return Err(Error::InvalidParameter("orientation outside [0, 180)".into()));
        }
        Ok(Self {
            angles,
            stride,
            coherence: None,
            pixel_dims,
        })
    }

    /// A field with the same angle everywhere.
    pub fn constant(angle: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(Image::filled(width, height, T::lit(angle)), 1, (width, height))
    }

    pub fn with_coherence(mut self, coherence: Image<T>) -> Result<Self> {
        ensure_same_dims(self.angles.dims(), coherence.dims())?;
        if coherence.data().iter().any(|&c| c < T::zero() || c > T::one()) {
            return Err(Error::InvalidParameter("coherence outside [0, 1]".into()));
        }
        self.coherence = Some(coherence);
        Ok(self)
    }

    pub fn angles(&self) -> &Image<T> {
        &self.angles
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn coherence(&self) -> Option<&Image<T>> {
        self.coherence.as_ref()
    }

    pub fn pixel_dims(&self) -> (usize, usize) {
        self.pixel_dims
    }

    /// Angle at pixel `(x, y)` of the underlying image.
    pub fn angle_at_pixel(&self, x: usize, y: usize) -> T {
        self.angles.get(x / self.stride, y / self.stride)
    }

    /// Full-resolution angle raster (nearest upsampling, cropped).
    pub fn to_pixels(&self) -> Image<T> {
        if self.stride == 1 {
            return self.angles.clone();
        }
        let up = upsample_nearest(&self.angles, self.stride).expect("stride >= 1");
        let (w, h) = self.pixel_dims;
        Image::from_fn(w, h, |x, y| up.get(x, y))
    }

    /// Coarser field sampled at cell centers of a stride-1 field.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if self.stride != 1 {
            return Err(Error::InvalidParameter("subsample needs a stride-1 field".into()));
        }
        let (w, h) = self.pixel_dims;
        let pick = |img: &Image<T>| cell_centers(img, stride);
        let mut out = Self::new(pick(&self.angles)?, stride, (w, h))?;
        if let Some(c) = &self.coherence {
            out.coherence = Some(pick(c)?);
        }
        Ok(out)
    }

    /// Text form: `W H stride` header, then one row of angles per line with
    /// one decimal place.
    pub fn to_text(&self) -> String {
        let (w, h) = self.angles.dims();
        let mut s = format!("{w} {h} {}\n", self.stride);
        for y in 0..h {
            for x in 0..w {
                let mut a = (self.angles.get(x, y).as_f64() * 10.0).round() / 10.0;
                if a >= 180.0 {
                    a -= 180.0;
                }
                if x > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{a:.1}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the text form. The pixel dimensions are taken as cells × stride.
    pub fn from_text(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 1, "missing header"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(source_name, 1, "header must be `W H stride`"))?;
        let [w, h, stride] = nums[..] else {
            return Err(Error::parse(source_name, 1, "header must be `W H stride`"));
        };
        let mut data = Vec::with_capacity(w * h);
        for _ in 0..h {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::parse(source_name, h + 1, "missing row"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(source_name, i + 1, "malformed angle"))?;
            if row.len() != w {
                return Err(Error::parse(source_name, i + 1, format!("expected {w} angles")));
            }
            data.extend(row.into_iter().map(T::lit));
        }
        let angles = Image::new(w, h, data).map_err(|e| Error::parse(source_name, 1, e.to_string()))?;
        Self::new(angles, stride, (w * stride, h * stride))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn cell_centers<T: Scalar>(img: &Image<T>, stride: usize) -> Result<Image<T>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("orientation stride 0".into()));
    }
    let (w, h) = img.dims();
    Ok(Image::from_fn(w.div_ceil(stride), h.div_ceil(stride), |cx, cy| {
        let x = (cx * stride + stride / 2).min(w - 1);
        let y = (cy * stride + stride / 2).min(h - 1);
        img.get(x, y)
    }))
}

/// `θ = 90° + ½·atan2(2·gxy, gxx − gyy)` reduced into `[0, 180)`.
#[inline]
pub fn tensor_angle<T: Scalar>(gxx: T, gyy: T, gxy: T) -> T {
    let num = gxy + gxy;
    let den = gxx - gyy;
    let half = if num == T::zero() && den == T::zero() {
        T::zero()
    } else {
        num.atan2(den).to_degrees() * T::lit(0.5)
    };
    wrap_degrees(T::lit(90.0) + half, T::lit(180.0))
}

/// Reduces an angle into `[0, span)`.
#[inline]
pub fn wrap_degrees<T: Scalar>(a: T, span: T) -> T {
    let mut r = a % span;
    if r < T::zero() {
        r += span;
    }
    if r >= span {
        r = T::zero();
    }
    r
}

/// Orientation per cell, sampled at cell-center pixels when `stride > 1`.
/// Coherence is left unset.
pub fn orientation_field<T: Scalar>(t: &StructureTensor<T>, stride: usize) -> Result<OrientationField<T>> {
    let (w, h) = t.dims();
    let full = Image::from_fn(w, h, |x, y| tensor_angle(t.gxx.get(x, y), t.gyy.get(x, y), t.gxy.get(x, y)));
    let angles = if stride == 1 { full } else { cell_centers(&full, stride)? };
    OrientationField::new(angles, stride, (w, h))
}

/// `sqrt((gxx − gyy)² + 4·gxy²) / (gxx + gyy + ε)`, clamped to `[0, 1]`.
pub fn coherence<T: Scalar>(t: &StructureTensor<T>) -> Image<T> {
    let eps = T::lit(COHERENCE_EPS);
    let four = T::lit(4.0);
    Image::from_fn(t.gxx.width(), t.gxx.height(), |x, y| {
        let (a, b, c) = (t.gxx.get(x, y), t.gyy.get(x, y), t.gxy.get(x, y));
        let num = ((a - b) * (a - b) + four * c * c).sqrt();
        (num / (a + b + eps)).max(T::zero()).min(T::one())
    })
}

/// Smallest angular distance between two orientations (mod 180).
pub fn orientation_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_image_has_zero_gradient() {
        let img = Image::<f64>::filled(9, 9, 4.0);
        let (gx, gy) = sobel_gradients(&img).unwrap();
        assert!(gx.data().iter().chain(gy.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_gradient_is_eight() {
        let img = Image::<f64>::from_fn(9, 9, |x, _| x as f64);
        let (gx, gy) = sobel_gradients(&img).unwrap();
        for y in 1..8 {
            for x in 1..8 {
                assert_eq!(gx.get(x, y), 8.0);
                assert_eq!(gy.get(x, y), 0.0);
            }
        }
        let img = Image::<f64>::from_fn(9, 9, |_, y| y as f64);
        let (_, gy) = sobel_gradients(&img).unwrap();
        assert_eq!(gy.get(4, 4), 8.0);
    }

    #[test]
    fn sinusoid_in_y_has_no_x_gradient() {
        let t = 9.0;
        let img = Image::<f64>::from_fn(32, 32, |_, y| (2.0 * PI * y as f64 / t).sin());
        let (gx, gy) = sobel_gradients(&img).unwrap();
        for y in 1..31 {
            for x in 1..31 {
                assert!(gx.get(x, y).abs() < 1e-12);
            }
        }
        // Sobel response to sin(ωy): 2·sin(ω)·(1+1+2)·cos(ωy) / ... periodic in y.
        for y in 1..(31 - 9) {
            assert!((gy.get(10, y) - gy.get(10, y + 9)).abs() < 1e-12);
        }
        let w = 2.0 * PI / t;
        let expect = 4.0 * 2.0 * w.sin() * (w * 10.0).cos();
        assert!((gy.get(10, 10) - expect).abs() < 1e-12);
    }

    #[test]
    fn tensor_of_constant_gradients() {
        let one = Image::<f64>::filled(6, 6, 1.0);
        let zero = Image::<f64>::zeros(6, 6);
        let t = structure_tensor(&one, &zero, 3).unwrap();
        assert!(t.gxx.data().iter().all(|&v| v == 9.0));
        assert!(t.gyy.data().iter().chain(t.gxy.data()).all(|&v| v == 0.0));
        let t = structure_tensor(&one, &one, 3).unwrap();
        assert!(t.gxy.data().iter().all(|&v| v == 9.0));
        assert!(structure_tensor(&one, &Image::zeros(5, 6), 3).is_err());
    }

    #[test]
    fn sign_chase_of_ridge_angle() {
        // Horizontal ridges: all gradient energy in y.
        assert_eq!(tensor_angle(0.0, 5.0, 0.0), 0.0);
        // Vertical ridges.
        assert_eq!(tensor_angle(5.0, 0.0, 0.0), 90.0);
        // Flat.
        assert_eq!(tensor_angle(0.0, 0.0, 0.0), 90.0);
        assert_eq!(tensor_angle(0.0, 0.0, -0.0), 90.0);
    }

    #[test]
    fn coherence_scalar_cases() {
        let mk = |a: f64, b: f64, c: f64| StructureTensor {
            gxx: Image::filled(1, 1, a),
            gyy: Image::filled(1, 1, b),
            gxy: Image::filled(1, 1, c),
        };
        assert!((coherence(&mk(4.0, 0.0, 0.0)).get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(coherence(&mk(2.0, 2.0, 0.0)).get(0, 0), 0.0);
        let c = coherence(&mk(3.0, 1.0, 1.0)).get(0, 0);
        assert!((c - 8f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(coherence(&mk(0.0, 0.0, 0.0)).get(0, 0), 0.0);
    }

    #[test]
    fn stride_samples_cell_centers() {
        let t = StructureTensor {
            gxx: Image::<f64>::from_fn(20, 12, |x, _| if x == 4 { 0.0 } else { 1.0 }),
            gyy: Image::from_fn(20, 12, |x, _| if x == 4 { 1.0 } else { 0.0 }),
            gxy: Image::zeros(20, 12),
        };
        let f = orientation_field(&t, 8).unwrap();
        assert_eq!(f.angles().dims(), (3, 2));
        assert_eq!(f.angles().get(0, 0), 0.0);
        assert_eq!(f.angles().get(1, 0), 90.0);
        assert_eq!(f.to_pixels().dims(), (20, 12));
    }

    #[test]
    fn text_roundtrip() {
        let angles = Image::<f64>::from_fn(3, 2, |x, y| (x * 40 + y * 7) as f64 + 0.25);
        let f = OrientationField::new(angles, 8, (24, 16)).unwrap();
        let text = f.to_text();
        assert!(text.starts_with("3 2 8\n"));
        let back = OrientationField::<f64>::from_text(&text, "mem").unwrap();
        assert_eq!(back.to_text(), text);
        assert!(OrientationField::<f64>::from_text("3 2 8\n1 2 3\n", "mem").is_err());
    }

    #[test]
    fn text_wraps_rounded_seam() {
        let f = OrientationField::new(Image::<f64>::filled(1, 1, 179.97), 1, (1, 1)).unwrap();
        assert_eq!(f.to_text(), "1 1 1\n0.0\n");
    }
}
