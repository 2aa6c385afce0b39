//! Run configuration: plain `key=value` lines with dotted keys.

use std::path::Path;

use crate::enhancement::GaborParams;
use crate::error::{Error, Result};
use crate::extraction::{ExtractParams, TemplateParams};
use crate::losses::{LossWeights, DEFAULT_LOSS_NAMES};
use crate::normalize::NormParams;
use crate::segmentation::{SegClassifier, DEFAULT_THRESHOLD};

#[derive(Clone, Debug, PartialEq)]
pub struct SegConfig {
    pub enabled: bool,
    pub classifier: SegClassifier,
    pub threshold: f64,
    /// Cell size of the pooled segmentation map.
    pub stride: usize,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            classifier: SegClassifier::default(),
            threshold: DEFAULT_THRESHOLD,
            stride: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub norm: NormParams,
    /// Structure-tensor and segmentation-feature window.
    pub window: usize,
    /// Gabor bins; `gabor.bins` always equals this.
    pub gabor: GaborParams,
    pub seg: SegConfig,
    pub templates: TemplateParams,
    pub extract: ExtractParams,
    pub loss_weights: LossWeights,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let gabor = GaborParams::default();
        Self {
            norm: NormParams::default(),
            window: 16,
            gabor,
            seg: SegConfig::default(),
            templates: TemplateParams {
                period: gabor.period,
                ..TemplateParams::default()
            },
            extract: ExtractParams::default(),
            loss_weights: LossWeights::default(),
        }
    }
}

/// Every accepted key (loss weights excluded) with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("norm.m0", "target mean after normalization"),
    ("norm.v0", "target variance after normalization"),
    ("orientation.window", "structure-tensor and segmentation window (pixels)"),
    ("orientation.bins", "orientation bins, also the Gabor bank size"),
    ("gabor.period", "ridge period in pixels (Gabor and templates)"),
    ("gabor.sigma", "Gabor envelope sigma (pixels)"),
    ("gabor.ksize", "Gabor kernel size (odd)"),
    ("seg.enabled", "false treats the whole image as foreground"),
    ("seg.w_coh", "classifier weight on coherence"),
    ("seg.w_mean", "classifier weight on local mean"),
    ("seg.w_var", "classifier weight on local variance"),
    ("seg.bias", "classifier bias"),
    ("seg.threshold", "foreground iff score > threshold"),
    ("seg.stride", "cell size of the pooled segmentation map"),
    ("extract.directions", "number of template directions"),
    ("extract.ksize", "template size (odd)"),
    ("extract.window_sigma", "template window sigma (pixels)"),
    ("extract.threshold", "minimum minutia score, in (0, 1)"),
    ("extract.nms_radius", "non-maximum suppression radius (pixels)"),
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn float(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{key}: non-finite {value:?}")));
    }
    Ok(v)
}

impl PipelineConfig {
    /// Applies one `key = value`. Unknown keys are `Error::Config`; bad
    /// values are `Error::InvalidParameter`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim();
        match k {
            "norm.m0" => self.norm.m0 = float(k, value)?,
            "norm.v0" => self.norm.v0 = float(k, value)?,
            "orientation.window" => self.window = num(k, value)?,
            "orientation.bins" => self.gabor.bins = num(k, value)?,
            "gabor.period" => {
                self.gabor.period = float(k, value)?;
                self.templates.period = self.gabor.period;
            }
            "gabor.sigma" => self.gabor.sigma = float(k, value)?,
            "gabor.ksize" => self.gabor.ksize = num(k, value)?,
            "seg.enabled" => self.seg.enabled = num(k, value)?,
            "seg.w_coh" => self.seg.classifier.weights[0] = float(k, value)?,
            "seg.w_mean" => self.seg.classifier.weights[1] = float(k, value)?,
            "seg.w_var" => self.seg.classifier.weights[2] = float(k, value)?,
            "seg.bias" => self.seg.classifier.bias = float(k, value)?,
            "seg.threshold" => self.seg.threshold = float(k, value)?,
            "seg.stride" => self.seg.stride = num(k, value)?,
            "extract.directions" => self.templates.directions = num(k, value)?,
            "extract.ksize" => self.templates.ksize = num(k, value)?,
            "extract.window_sigma" => self.templates.window_sigma = float(k, value)?,
            "extract.threshold" => self.extract.threshold = float(k, value)?,
            "extract.nms_radius" => self.extract.nms_radius = float(k, value)?,
            _ => match k.strip_prefix("loss.") {
                Some(name) if DEFAULT_LOSS_NAMES.contains(&name) => {
                    let v = float(k, value)?;
                    self.loss_weights
                        .set(name, v)
                        .map_err(|_| Error::InvalidParameter(format!("{k}: negative weight {v}")))?;
                }
                _ => return Err(Error::Config(format!("unknown key {k:?}"))),
            },
        }
        Ok(())
    }

    /// Current value of `key`, formatted as it would be written.
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "norm.m0" => self.norm.m0.to_string(),
            "norm.v0" => self.norm.v0.to_string(),
            "orientation.window" => self.window.to_string(),
            "orientation.bins" => self.gabor.bins.to_string(),
            "gabor.period" => self.gabor.period.to_string(),
            "gabor.sigma" => self.gabor.sigma.to_string(),
            "gabor.ksize" => self.gabor.ksize.to_string(),
            "seg.enabled" => self.seg.enabled.to_string(),
            "seg.w_coh" => self.seg.classifier.weights[0].to_string(),
            "seg.w_mean" => self.seg.classifier.weights[1].to_string(),
            "seg.w_var" => self.seg.classifier.weights[2].to_string(),
            "seg.bias" => self.seg.classifier.bias.to_string(),
            "seg.threshold" => self.seg.threshold.to_string(),
            "seg.stride" => self.seg.stride.to_string(),
            "extract.directions" => self.templates.directions.to_string(),
            "extract.ksize" => self.templates.ksize.to_string(),
            "extract.window_sigma" => self.templates.window_sigma.to_string(),
            "extract.threshold" => self.extract.threshold.to_string(),
            "extract.nms_radius" => self.extract.nms_radius.to_string(),
            _ => return key.strip_prefix("loss.").and_then(|n| self.loss_weights.get(n)).map(|w| w.to_string()),
        };
        Some(v)
    }

    /// All keys including `loss.*`.
    pub fn keys() -> Vec<String> {
        CONFIG_KEYS
            .iter()
            .map(|(k, _)| k.to_string())
            .chain(DEFAULT_LOSS_NAMES.iter().map(|n| format!("loss.{n}")))
            .collect()
    }

    /// Checks cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.norm.v0 > 0.0) {
            return bad(format!("norm.v0 = {} must be positive", self.norm.v0));
        }
        if self.window == 0 {
            return bad("orientation.window must be positive".into());
        }
        if self.gabor.bins < 2 {
            return bad(format!("orientation.bins = {} below 2", self.gabor.bins));
        }
        if self.gabor.ksize.is_multiple_of(2) || self.templates.ksize.is_multiple_of(2) {
            return bad("kernel sizes must be odd".into());
        }
        if !(self.gabor.period >= 2.0 && self.gabor.sigma > 0.0 && self.templates.window_sigma > 0.0) {
            return bad("gabor.period, gabor.sigma and extract.window_sigma must be positive".into());
        }
        if self.templates.directions < 4 {
            return bad(format!("extract.directions = {} below 4", self.templates.directions));
        }
        if !(self.extract.threshold > 0.0 && self.extract.threshold < 1.0) {
            return bad(format!("extract.threshold = {} outside (0, 1)", self.extract.threshold));
        }
        if !(self.extract.nms_radius >= 0.0) || self.seg.stride == 0 {
            return bad("extract.nms_radius and seg.stride must be non-negative / positive".into());
        }
        Ok(())
    }
}

/// Parses a config file body. Blank lines and `#` comments are ignored;
/// missing keys keep their defaults.
pub fn parse_config(text: &str, source_name: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(source_name, i + 1, format!("expected key=value, found {line:?}")));
        };
        cfg.set(k, v).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{source_name}:{}: {m}", i + 1)),
            other => Error::parse(source_name, i + 1, other.to_string()),
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}
