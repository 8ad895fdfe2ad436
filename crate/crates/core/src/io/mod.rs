//! On-disk formats: latent batches, images, manifests, label tables and
//! reports.

pub mod image;
pub mod labels;
pub mod latent;
pub mod manifest;
pub mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tensor::{LatentShape, TensorError};

pub use image::{image_channel_means, load_rgb, rgb_channel_means};
pub use labels::{parse_labels, read_labels};
pub use latent::{
    decode_latents, decode_npy, encode_latents, encode_npy, read_latents, read_npy, write_latents, write_npy,
    LatentFileHeader,
};
pub use manifest::{load_manifest, parse_manifest, write_manifest, BatchManifest, ManifestBatch};
pub use report::{read_report, write_report, DiversityReport, MetricKind, MetricValue};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:02x?}, expected \"DLT1\"")]
    BadMagic(Vec<u8>),
    #[error("truncated file: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("unsupported latent file version {0}")]
    UnsupportedVersion(u16),
    #[error("element count {count} does not fit shape {dims:?}")]
    ShapeCountMismatch { dims: [usize; 3], count: u64 },
    #[error("{0} unexpected bytes after payload")]
    TrailingBytes(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("cannot write an empty batch")]
    EmptyBatch,
    #[error("batch mixes shapes {first} and {other}")]
    MixedShapes { first: LatentShape, other: LatentShape },
    #[error("dimension {0} does not fit in 32 bits")]
    DimensionTooLarge(usize),
    #[error("npy: {0}")]
    Npy(String),
    #[error("{}: cannot decode image: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{}: unsupported pixel format {color}", path.display())]
    UnsupportedImage { path: PathBuf, color: String },
    #[error("invalid {what}: {message}")]
    Json { what: &'static str, message: String },
    #[error("manifest has no batches")]
    EmptyManifest,
    #[error("duplicate batch ids: {}", .0.join(", "))]
    DuplicateBatchIds(Vec<String>),
    #[error("batch {0:?} has no items")]
    EmptyManifestBatch(String),
    #[error("missing files: {}", display_paths(.0))]
    MissingFiles(Vec<PathBuf>),
    #[error("labels line {line}: {message}")]
    LabelRow { line: u64, message: String },
    #[error("report is malformed: {0}")]
    Report(String),
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

impl FormatError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}
