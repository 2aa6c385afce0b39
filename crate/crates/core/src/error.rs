use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel {kw}x{kh} larger than image {width}x{height}")]
    KernelTooLarge {
        kw: usize,
        kh: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid upsampling factor {0}")]
    InvalidFactor(usize),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
    #[error("angle {angle} outside [0, {span})")]
    AngleOutOfRange { angle: f64, span: f64 },
    #[error("unsupported angle span {0} (expected 180)")]
    UnsupportedSpan(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty minutiae list")]
    EmptyMinutiae,
    #[error("empty region of interest")]
    EmptyRoi,
    #[error("minutia at ({x}, {y}) outside {width}x{height}")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
