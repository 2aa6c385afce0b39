//! End-to-end run: normalize, orientation, segmentation, selective Gabor
//! enhancement, template scoring, extraction and map encoding.

use std::fmt;

use crate::angle::AngleSpec;
use crate::config::PipelineConfig;
use crate::enhancement::{selective_enhance, EnhancedMap, GaborBank};
use crate::error::Error;
use crate::extraction::{
    encode_minutiae_maps, extract_within, minutiae_score_raster, CellCollision, MinutiaeList, MinutiaeMaps,
    ScoreMaps, TemplateBank,
};
use crate::normalize::normalize;
use crate::orientation::{coherence, orientation_field, sobel_gradients, structure_tensor, OrientationField};
use crate::raster::{BinaryMask, Image};
use crate::scalar::Scalar;
use crate::segmentation::{seg_binarize, seg_classify, seg_features, SegmentationMap};

/// Smallest accepted input side.
pub const MIN_SIDE: usize = 64;

/// A stage failure.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait Stage<V> {
    fn stage(self, name: &'static str) -> Result<V, PipelineError>;
}

impl<V> Stage<V> for crate::error::Result<V> {
    fn stage(self, name: &'static str) -> Result<V, PipelineError> {
        self.map_err(|source| PipelineError { stage: name, source })
    }
}

/// Every intermediate of one run.
#[derive(Clone, Debug)]
pub struct PipelineArtifacts<T> {
    pub normalized: Image<T>,
    /// Stride-1 orientation with coherence.
    pub field: OrientationField<T>,
    /// Stride-1 classifier scores.
    pub seg_scores: SegmentationMap<T>,
    /// Scores pooled to `seg.stride`.
    pub seg: SegmentationMap<T>,
    pub mask: BinaryMask,
    pub enhanced: EnhancedMap<T>,
    pub scores: ScoreMaps<T>,
    pub minutiae: MinutiaeList,
    pub maps: MinutiaeMaps<T>,
    pub collisions: Vec<CellCollision>,
}

/// Banks built once per configuration.
#[derive(Clone, Debug)]
pub struct Pipeline<T> {
    cfg: PipelineConfig,
    gabor: GaborBank<T>,
    templates: TemplateBank<T>,
}

impl<T: Scalar> Pipeline<T> {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate().stage("config")?;
        let gabor = GaborBank::from_params(&cfg.gabor).stage("enhancement")?;
        let templates = TemplateBank::new(cfg.templates).stage("extraction")?;
        Ok(Self { cfg, gabor, templates })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn gabor(&self) -> &GaborBank<T> {
        &self.gabor
    }

    pub fn templates(&self) -> &TemplateBank<T> {
        &self.templates
    }

    pub fn run(&self, image: &Image<T>) -> Result<PipelineArtifacts<T>, PipelineError> {
        let cfg = &self.cfg;
        let (w, h) = image.dims();
        if w < MIN_SIDE || h < MIN_SIDE {
            return Err(PipelineError {
                stage: "input",
                source: Error::InvalidRaster(format!("{w}x{h} is below {MIN_SIDE}x{MIN_SIDE}")),
            });
        }
        let normalized = normalize(image, cfg.norm).stage("normalize")?;

        let (gx, gy) = sobel_gradients(&normalized).stage("orientation")?;
        let tensor = structure_tensor(&gx, &gy, cfg.window).stage("orientation")?;
        let field = orientation_field(&tensor, 1)
            .and_then(|f| f.with_coherence(coherence(&tensor)))
            .stage("orientation")?;

        let features = seg_features(&normalized, &tensor, cfg.window).stage("segmentation")?;
        let seg_scores = seg_classify(&features, &cfg.seg.classifier);
        let seg = seg_scores.pooled(cfg.seg.stride).stage("segmentation")?;
        let mask = if cfg.seg.enabled {
            seg_binarize(&seg_scores, cfg.seg.threshold)
        } else {
            BinaryMask::filled(w, h, true)
        };

        let enhanced = selective_enhance(&normalized, &self.gabor, &field).stage("enhancement")?;

        // Extraction runs on unmasked scores so that masking only removes
        // minutiae and never creates new local maxima.
        let cos = enhanced.cosine();
        let open = minutiae_score_raster(&cos, &self.templates, &BinaryMask::filled(w, h, true)).stage("extraction")?;
        let minutiae = extract_within(&open, &cos, &self.templates, &mask, &cfg.extract).stage("extraction")?;
        let scores = open.masked(&mask).stage("extraction")?;

        let (maps, collisions) = encode_minutiae_maps(&minutiae, w, h, AngleSpec::DIRECTION).stage("encoding")?;
        Ok(PipelineArtifacts {
            normalized,
            field,
            seg_scores,
            seg,
            mask,
            enhanced,
            scores,
            minutiae,
            maps,
            collisions,
        })
    }
}

/// One-shot [`Pipeline::run`].
pub fn run<T: Scalar>(image: &Image<T>, cfg: &PipelineConfig) -> Result<PipelineArtifacts<T>, PipelineError> {
    Pipeline::new(cfg.clone())?.run(image)
}
