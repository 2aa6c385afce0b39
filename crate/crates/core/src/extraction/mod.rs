//! Minutiae: template-matching extraction, non-maximum suppression, the
//! stride-8 map encoding and the text file format.

mod io;
mod maps;
mod nms;
mod score;
mod templates;

pub use io::{format_minutiae, parse_minutiae, read_minutiae, write_minutiae};
pub use maps::{decode_minutiae_maps, encode_minutiae_maps, CellCollision, MinutiaeMaps, MAP_STRIDE};
pub use nms::nms;
pub use score::{extract, extract_from_scores, extract_within, minutiae_score, minutiae_score_raster, ExtractParams, ScoreMaps};
pub use templates::{template_bank, Template, TemplateBank, TemplateParams};

/// A point feature: position in pixels, direction in `[0, 360)` degrees and
/// a detection score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    pub direction: f64,
    pub score: f64,
}

impl Minutia {
    /// Builds a minutia, wrapping the direction into `[0, 360)`.
    pub fn new(x: f64, y: f64, direction: f64, score: f64) -> Self {
        Self {
            x,
            y,
            direction: wrap360(direction),
            score,
        }
    }

    pub fn distance(&self, other: &Minutia) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Circular direction difference in `[0, 180]`.
    pub fn angle_difference(&self, other: &Minutia) -> f64 {
        crate::angle::circular_distance(self.direction, other.direction, 360.0)
    }
}

pub type MinutiaeList = Vec<Minutia>;

#[inline]
pub(crate) fn wrap360(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}
