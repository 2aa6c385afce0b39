use super::nms::nms;
use super::{Minutia, MinutiaeList};
use crate::angle::{decode_theta_max, encode_angle, AngleDistribution, AngleSpec};
use crate::error::{Error, Result};
use crate::raster::{ChannelMap, Image};
use crate::scalar::Scalar;

/// Pixels per map cell.
pub const MAP_STRIDE: usize = 8;

/// Stride-8 minutiae encoding: occupancy score, within-cell x and y offset
/// distributions and a 360° direction distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct MinutiaeMaps<T> {
    pub score: Image<T>,
    pub xoff: ChannelMap<T>,
    pub yoff: ChannelMap<T>,
    pub direction: AngleDistribution<T>,
}

/// Two minutiae fell into the same cell; `kept` (the later one) overwrote
/// `dropped`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellCollision {
    pub cell: (usize, usize),
    pub dropped: Minutia,
    pub kept: Minutia,
}

impl<T: Scalar> MinutiaeMaps<T> {
    /// Cell grid dimensions.
    pub fn dims(&self) -> (usize, usize) {
        self.score.dims()
    }
}

/// Encodes `list` on a `⌈width/8⌉ × ⌈height/8⌉` grid using rounded
/// coordinates. Later minutiae win cell collisions, which are returned.
pub fn encode_minutiae_maps<T: Scalar>(
    list: &[Minutia],
    width: usize,
    height: usize,
    dir_spec: AngleSpec,
) -> Result<(MinutiaeMaps<T>, Vec<CellCollision>)> {
    dir_spec.validate()?;
    if dir_spec.span != 360.0 {
        return Err(Error::UnsupportedSpan(dir_spec.span));
    }
    let (cw, ch) = (width.div_ceil(MAP_STRIDE), height.div_ceil(MAP_STRIDE));
    let mut score = Image::zeros(cw, ch);
    let uniform_off = T::one() / T::from_usize(MAP_STRIDE).unwrap();
    let mut xoff = ChannelMap::filled(cw, ch, MAP_STRIDE, uniform_off);
    let mut yoff = ChannelMap::filled(cw, ch, MAP_STRIDE, uniform_off);
    let mut dir = AngleDistribution::<T>::uniform(cw, ch, dir_spec.bins, 360.0)?.into_probs();
    let mut owner: Vec<Option<Minutia>> = vec![None; cw * ch];
    let mut collisions = Vec::new();
    for m in list {
        let (xr, yr) = (m.x.round(), m.y.round());
        if !(xr >= 0.0 && yr >= 0.0 && xr < width as f64 && yr < height as f64) {
            return Err(Error::OutOfBounds {
                x: m.x,
                y: m.y,
                width,
                height,
            });
        }
        let (xi, yi) = (xr as usize, yr as usize);
        let (cx, cy) = (xi / MAP_STRIDE, yi / MAP_STRIDE);
        if let Some(prev) = owner[cy * cw + cx].replace(*m) {
            log::warn!("minutiae ({}, {}) and ({}, {}) share cell ({cx}, {cy})", prev.x, prev.y, m.x, m.y);
            collisions.push(CellCollision {
                cell: (cx, cy),
                dropped: prev,
                kept: *m,
            });
        }
        score.set(cx, cy, T::one());
        for (c, v) in xoff.cell_mut(cx, cy).iter_mut().enumerate() {
            *v = if c == xi % MAP_STRIDE { T::one() } else { T::zero() };
        }
        for (c, v) in yoff.cell_mut(cx, cy).iter_mut().enumerate() {
            *v = if c == yi % MAP_STRIDE { T::one() } else { T::zero() };
        }
        let d = encode_angle::<T>(m.direction, dir_spec)?;
        dir.cell_mut(cx, cy).copy_from_slice(&d);
    }
    Ok((
        MinutiaeMaps {
            score,
            xoff,
            yoff,
            direction: AngleDistribution::new(dir, 360.0)?,
        },
        collisions,
    ))
}

/// Cells scoring above `threshold` become minutiae at the argmax offsets,
/// with the argmax direction bin, then NMS.
pub fn decode_minutiae_maps<T: Scalar>(maps: &MinutiaeMaps<T>, threshold: f64, nms_radius: f64) -> Result<MinutiaeList> {
    let (cw, ch) = maps.score.dims();
    let shapes = [maps.xoff.shape(), maps.yoff.shape()];
    if shapes.iter().any(|s| s.0 != cw || s.1 != ch)
        || (maps.direction.width(), maps.direction.height()) != (cw, ch)
    {
        return Err(Error::ShapeMismatch("minutiae maps disagree in shape".into()));
    }
    if maps.direction.span() != 360.0 {
        return Err(Error::UnsupportedSpan(maps.direction.span()));
    }
    let dirs = decode_theta_max(&maps.direction);
    let mut out = Vec::new();
    for cy in 0..ch {
        for cx in 0..cw {
            let s = maps.score.get(cx, cy).as_f64();
            if s > threshold {
                let ox = crate::angle::argmax(maps.xoff.cell(cx, cy));
                let oy = crate::angle::argmax(maps.yoff.cell(cx, cy));
                out.push(Minutia::new(
                    (cx * MAP_STRIDE + ox) as f64,
                    (cy * MAP_STRIDE + oy) as f64,
                    dirs.get(cx, cy).as_f64(),
                    s,
                ));
            }
        }
    }
    Ok(nms(&out, nms_radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_arithmetic() {
        let m = Minutia::new(19.0, 35.0, 46.0, 1.0);
        let (maps, col) = encode_minutiae_maps::<f64>(&[m], 64, 64, AngleSpec::DIRECTION).unwrap();
        assert!(col.is_empty());
        assert_eq!(maps.score.get(2, 4), 1.0);
        assert_eq!(maps.score.data().iter().sum::<f64>(), 1.0);
        assert_eq!(maps.xoff.cell(2, 4)[3], 1.0);
        assert_eq!(maps.yoff.cell(2, 4)[3], 1.0);
        assert_eq!(crate::angle::argmax(maps.direction.cell(2, 4)), 23);
        assert_eq!(maps.xoff.cell(0, 0), &[0.125; 8]);
    }

    #[test]
    fn empty_and_ceil_dims() {
        let (maps, _) = encode_minutiae_maps::<f64>(&[], 61, 17, AngleSpec::DIRECTION).unwrap();
        assert_eq!(maps.dims(), (8, 3));
        assert!(maps.score.data().iter().all(|&v| v == 0.0));
        assert!(decode_minutiae_maps(&maps, 0.5, 16.0).unwrap().is_empty());
    }

    #[test]
    fn collision_later_wins() {
        let a = Minutia::new(1.0, 1.0, 10.0, 1.0);
        let b = Minutia::new(6.0, 2.0, 200.0, 1.0);
        let (maps, col) = encode_minutiae_maps::<f64>(&[a, b], 16, 16, AngleSpec::DIRECTION).unwrap();
        assert_eq!(col.len(), 1);
        assert_eq!(col[0].kept, b);
        assert_eq!(crate::angle::argmax(maps.xoff.cell(0, 0)), 6);
        assert_eq!(crate::angle::argmax(maps.direction.cell(0, 0)), 100);
    }

    #[test]
    fn out_of_bounds() {
        let m = Minutia::new(63.6, 3.0, 0.0, 1.0);
        assert!(matches!(
            encode_minutiae_maps::<f64>(&[m], 64, 64, AngleSpec::DIRECTION),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn uniform_half_scores_one_per_cell() {
        let (mut maps, _) = encode_minutiae_maps::<f64>(&[], 40, 24, AngleSpec::DIRECTION).unwrap();
        maps.score = Image::filled(5, 3, 0.5);
        assert_eq!(decode_minutiae_maps(&maps, 0.0, 0.0).unwrap().len(), 15);
    }
}
