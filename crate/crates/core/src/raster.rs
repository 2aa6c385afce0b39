//! Raster containers and the convolution engine.
//!
//! Every stage of the pipeline reads and writes [`Image`]s. Convolution is
//! true convolution: for a kernel with anchor `(ax, ay)`,
//!
//! ```text
//! out(x, y) = Σ_{j,i} taps[j][i] · img(x − (i − ax), y − (j − ay))
//! ```
//!
//! with out-of-range samples supplied by the [`PaddingMode`]. The anchor of
//! an extent `k` is `(k − 1) / 2`, the center for odd extents.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Border handling for convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PaddingMode {
    /// Out-of-range samples repeat the nearest edge pixel.
    #[default]
    Replicate,
    /// Out-of-range samples are zero.
    Zero,
}

/// Real-valued raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    /// Builds an image, checking dimensions and that every value is finite.
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("empty raster {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster(format!(
                "non-finite value at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with replicate clamping for signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pixel-wise combination of two same-sized images.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mean(&self) -> T {
        let n = T::from_usize(self.data.len()).unwrap();
        self.data.iter().fold(T::zero(), |acc, &v| acc + v) / n
    }

    /// Population variance.
    pub fn variance(&self) -> T {
        let m = self.mean();
        let n = T::from_usize(self.data.len()).unwrap();
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc + (v - m) * (v - m))
            / n
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

pub(crate) fn ensure_same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Convolution kernel.
///
/// Extents may be even (window sums such as a 16×16 all-ones block); the
/// anchor then sits at `(k − 1) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    kw: usize,
    kh: usize,
    taps: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(kw: usize, kh: usize, taps: Vec<T>) -> Result<Self> {
        if kw == 0 || kh == 0 {
            return Err(Error::InvalidKernel(format!("empty kernel {kw}x{kh}")));
        }
        if taps.len() != kw * kh {
            return Err(Error::InvalidKernel(format!(
                "{} taps for a {kw}x{kh} kernel",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidKernel("non-finite tap".into()));
        }
        Ok(Self { kw, kh, taps })
    }

    /// Builds a kernel from rows of taps.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let kh = rows.len();
        let kw = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != kw) {
            return Err(Error::InvalidKernel("ragged rows".into()));
        }
        Self::new(
            kw,
            kh,
            rows.iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect(),
        )
    }

    /// The all-ones `w × w` window.
    pub fn ones(w: usize) -> Result<Self> {
        Self::new(w, w, vec![T::one(); w * w])
    }

    /// Builds an odd `size × size` kernel from a function of the signed
    /// offsets `(u, v)` relative to the center.
    pub fn from_offsets(size: usize, f: impl Fn(isize, isize) -> T) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!("even kernel size {size}")));
        }
        let r = (size / 2) as isize;
        let mut taps = Vec::with_capacity(size * size);
        for v in -r..=r {
            for u in -r..=r {
                taps.push(f(u, v));
            }
        }
        Self::new(size, size, taps)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.kw
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.kh
    }

    #[inline]
    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    /// Tap at signed offset `(u, v)` from the anchor.
    #[inline]
    pub fn at(&self, u: isize, v: isize) -> T {
        let i = (u + self.anchor().0 as isize) as usize;
        let j = (v + self.anchor().1 as isize) as usize;
        self.taps[j * self.kw + i]
    }

    #[inline]
    pub fn anchor(&self) -> (usize, usize) {
        ((self.kw - 1) / 2, (self.kh - 1) / 2)
    }

    pub fn sum(&self) -> T {
        self.taps.iter().fold(T::zero(), |a, &b| a + b)
    }
}

/// Same-size 2D convolution.
pub fn conv2d<T: Scalar>(image: &Image<T>, kernel: &Kernel<T>, pad: PaddingMode) -> Result<Image<T>> {
    let (w, h) = image.dims();
    let (kw, kh) = (kernel.width(), kernel.height());
    if kw > w || kh > h {
        return Err(Error::KernelTooLarge {
            kw,
            kh,
            width: w,
            height: h,
        });
    }
    let (ax, ay) = kernel.anchor();
    // Source column for output x and tap column i is x + ax - i, so the
    // padded buffer needs (kw - 1 - ax) columns on the left and ax on the right.
    let left = kw - 1 - ax;
    let top = kh - 1 - ay;
    let pw = w + kw - 1;
    let ph = h + kh - 1;
    let mut padded = vec![T::zero(); pw * ph];
    for py in 0..ph {
        let sy = py as isize - top as isize;
        let row_in = (0..h as isize).contains(&sy);
        if !row_in && pad == PaddingMode::Zero {
            continue;
        }
        for px in 0..pw {
            let sx = px as isize - left as isize;
            let col_in = (0..w as isize).contains(&sx);
            padded[py * pw + px] = match pad {
                PaddingMode::Replicate => image.get_clamped(sx, sy),
                PaddingMode::Zero if col_in => image.get(sx as usize, sy as usize),
                PaddingMode::Zero => T::zero(),
            };
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        let orow = &mut out[y * w..(y + 1) * w];
        for j in 0..kh {
            // padded row index: y + ay - j + top
            let prow = y + kh - 1 - j;
            for i in 0..kw {
                let t = kernel.taps[j * kw + i];
                if t == T::zero() {
                    continue;
                }
                let off = prow * pw + (kw - 1 - i);
                let src = &padded[off..off + w];
                for (o, &s) in orow.iter_mut().zip(src) {
                    *o += t * s;
                }
            }
        }
    }
    Image::new(w, h, out)
}

/// Sum over a `w × w` window with replicate padding, identical to
/// `conv2d(image, J_w, Replicate)`.
pub fn box_sum<T: Scalar>(image: &Image<T>, w: usize) -> Result<Image<T>> {
    let (width, height) = image.dims();
    if w == 0 {
        return Err(Error::InvalidParameter("window size 0".into()));
    }
    if w > width.min(height) {
        return Err(Error::KernelTooLarge {
            kw: w,
            kh: w,
            width,
            height,
        });
    }
    let a = ((w - 1) / 2) as isize;
    let lo = a - (w as isize - 1);
    // Horizontal pass: window [x + lo, x + a].
    let mut horiz = vec![T::zero(); width * height];
    for y in 0..height {
        let row = image.row(y);
        for x in 0..width {
            let mut s = T::zero();
            for d in lo..=a {
                let sx = (x as isize + d).clamp(0, width as isize - 1) as usize;
                s += row[sx];
            }
            horiz[y * width + x] = s;
        }
    }
    let mut out = vec![T::zero(); width * height];
    for y in 0..height {
        let orow = &mut out[y * width..(y + 1) * width];
        for d in lo..=a {
            let sy = (y as isize + d).clamp(0, height as isize - 1) as usize;
            for (o, &s) in orow.iter_mut().zip(&horiz[sy * width..(sy + 1) * width]) {
                *o += s;
            }
        }
    }
    Image::new(width, height, out)
}

/// Replicates every pixel into a `factor × factor` block.
pub fn upsample_nearest<T: Scalar>(image: &Image<T>, factor: usize) -> Result<Image<T>> {
    if factor == 0 {
        return Err(Error::InvalidFactor(factor));
    }
    Ok(Image::from_fn(
        image.width() * factor,
        image.height() * factor,
        |x, y| image.get(x / factor, y / factor),
    ))
}

/// Per-pixel vector raster: `channels` values per pixel, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMap<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ChannelMap<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidRaster(format!(
                "empty channel map {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidRaster(format!(
                "{} values for a {width}x{height}x{channels} map",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster("non-finite value".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, T::zero())
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        assert!(width > 0 && height > 0 && channels > 0, "empty channel map");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Fills entries in storage order `(y, x, channel)`.
    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut m = Self::zeros(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    m.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        m
    }

    /// Wraps a single-channel raster.
    pub fn from_image(image: &Image<T>) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            channels: 1,
            data: image.data().to_vec(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn cell(&self, x: usize, y: usize) -> &[T] {
        let o = (y * self.width + x) * self.channels;
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let o = (y * self.width + x) * self.channels;
        &mut self.data[o..o + self.channels]
    }

    /// Extracts channel `c` as an image.
    pub fn channel(&self, c: usize) -> Image<T> {
        assert!(c < self.channels);
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    /// Stacks same-sized images into a channel map.
    pub fn stack(images: &[Image<T>]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidRaster("no channels to stack".into()))?;
        for im in images {
            ensure_same_dims(first.dims(), im.dims())?;
        }
        let n = images.len();
        let mut data = vec![T::zero(); first.width() * first.height() * n];
        for (c, im) in images.iter().enumerate() {
            for (p, &v) in im.data().iter().enumerate() {
                data[p * n + c] = v;
            }
        }
        Ok(Self {
            width: first.width(),
            height: first.height(),
            channels: n,
            data,
        })
    }
}

/// Binary raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} values for a {width}x{height} mask",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "empty mask");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "empty mask");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// `{0, 255}` image for saving.
    pub fn to_image<T: Scalar>(&self) -> Image<T> {
        Image::from_fn(self.width, self.height, |x, y| {
            if self.get(x, y) {
                T::lit(255.0)
            } else {
                T::zero()
            }
        })
    }
}
