//! Graf hip-ultrasound measurement and evaluation engine.
//!
//! Masks of the four key structures (flat ilium, lower limb, labrum,
//! chondro-osseous junction) and predicted landmarks go in; alpha/beta angles,
//! hip type, shape and bony-rim consistency scores and evaluation statistics
//! come out. [`phantom`] generates scenes with known angles for testing.

pub mod curvefit;
pub mod geometry;
pub mod imgio;
pub mod measure;
pub mod metrics;
pub mod phantom;

pub use curvefit::{ss_score, FitConfig, FitError, PolyCoeffs, SsScore};
pub use geometry::{Contour, GeometryError, Line2D, Point};
pub use imgio::{
    BinaryMask, ImgioError, Landmark, LandmarkPoint, LandmarkSet, LandmarkSource, Laterality,
    PartialLandmarks, SceneRecord, Structure, StructureSet,
};
pub use measure::{
    measure_scene, GrafType, LossRecord, LossTerms, LossWeights, MeasureConfig, MeasureError,
    MeasurementReport,
};
pub use metrics::{EvalRecord, EvalSummary, MetricsError, StdMode, Thresholds};
pub use phantom::{PhantomError, PhantomScene, PhantomSpec};
