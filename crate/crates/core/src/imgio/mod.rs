//! Mask decoding, scene manifests and report serialization.

mod manifest;
mod mask;
pub mod report;
mod rle;
mod scene;

use std::path::PathBuf;

pub use manifest::{
    check_unique_ids, load_manifest, parse_manifest_line, read_manifest_lines, resolve_record,
    write_manifest, ManifestRecord, ManifestTruth, MaskSource,
};
pub use mask::{decode_mask, BinaryMask, DEFAULT_THRESHOLD};
pub use rle::{decode_rle, encode_rle};
pub use scene::{
    GroundTruth, Landmark, LandmarkPoint, LandmarkProbs, LandmarkSet, LandmarkSource, Laterality,
    PartialLandmarks, SceneRecord, Structure, StructureSet,
};

#[derive(Debug, thiserror::Error)]
pub enum ImgioError {
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("bad dimensions: {0}")]
    Dimension(String),
    #[error("malformed run-length data: {0}")]
    Format(String),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("manifest line {line}: missing required field `{field}`")]
    Schema { line: usize, field: &'static str },
    #[error("manifest line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("manifest line {line}: duplicate scene_id {scene_id:?}")]
    DuplicateScene { line: usize, scene_id: String },
}
