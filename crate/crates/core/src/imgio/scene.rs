use serde::{Deserialize, Serialize};

use super::{BinaryMask, ImgioError};
use crate::geometry::Point;

/// The four segmented hip structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    FlatIlium,
    LowerLimb,
    Labrum,
    CoJunction,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::FlatIlium,
        Structure::LowerLimb,
        Structure::Labrum,
        Structure::CoJunction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::FlatIlium => "flat_ilium",
            Structure::LowerLimb => "lower_limb",
            Structure::Labrum => "labrum",
            Structure::CoJunction => "co_junction",
        }
    }

    /// Manifest key (`s1`..`s4`).
    pub fn key(self) -> &'static str {
        match self {
            Structure::FlatIlium => "s1",
            Structure::LowerLimb => "s2",
            Structure::Labrum => "s3",
            Structure::CoJunction => "s4",
        }
    }
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laterality {
    #[default]
    Left,
    Right,
}

/// Masks of one scene. All present masks share the same dimensions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructureSet {
    pub flat_ilium: Option<BinaryMask>,
    pub lower_limb: Option<BinaryMask>,
    pub labrum: Option<BinaryMask>,
    pub co_junction: Option<BinaryMask>,
    pub laterality: Laterality,
}

impl StructureSet {
    pub fn get(&self, s: Structure) -> Option<&BinaryMask> {
        match s {
            Structure::FlatIlium => self.flat_ilium.as_ref(),
            Structure::LowerLimb => self.lower_limb.as_ref(),
            Structure::Labrum => self.labrum.as_ref(),
            Structure::CoJunction => self.co_junction.as_ref(),
        }
    }

    pub fn slot_mut(&mut self, s: Structure) -> &mut Option<BinaryMask> {
        match s {
            Structure::FlatIlium => &mut self.flat_ilium,
            Structure::LowerLimb => &mut self.lower_limb,
            Structure::Labrum => &mut self.labrum,
            Structure::CoJunction => &mut self.co_junction,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Structure, Option<&BinaryMask>)> + '_ {
        Structure::ALL.into_iter().map(move |s| (s, self.get(s)))
    }

    /// Dimensions shared by every present mask, or `None` when no mask is present.
    pub fn dims(&self) -> Result<Option<(usize, usize)>, ImgioError> {
        let mut dims = None;
        for (s, m) in self.iter() {
            if let Some(m) = m {
                match dims {
                    None => dims = Some(m.dims()),
                    Some(d) if d != m.dims() => {
                        return Err(ImgioError::Dimension(format!(
                            "{s} is {}x{}, other structures are {}x{}",
                            m.width(),
                            m.height(),
                            d.0,
                            d.1
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(dims)
    }

    pub fn mirrored(&self) -> Self {
        self.map_masks(BinaryMask::mirrored)
    }

    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        self.map_masks(|m| m.translated(dx, dy))
    }

    fn map_masks(&self, f: impl Fn(&BinaryMask) -> BinaryMask) -> Self {
        Self {
            flat_ilium: self.flat_ilium.as_ref().map(&f),
            lower_limb: self.lower_limb.as_ref().map(&f),
            labrum: self.labrum.as_ref().map(&f),
            co_junction: self.co_junction.as_ref().map(&f),
            laterality: self.laterality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkSource {
    MaskDerived,
    Predicted,
    Fused,
}

/// Sub-pixel landmark position in the image frame (origin top-left, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkPoint {
    pub x: f64,
    pub y: f64,
    pub source: LandmarkSource,
}

impl LandmarkPoint {
    pub fn new(x: f64, y: f64, source: LandmarkSource) -> Self {
        Self { x, y, source }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn mirrored(&self, width: usize) -> Self {
        Self {
            x: width as f64 - 1.0 - self.x,
            ..*self
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x < width as f64 && self.y < height as f64
    }
}

/// The three Graf landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Landmark {
    BonyRim,
    LowerLimbPoint,
    LabrumMid,
}

impl Landmark {
    pub const ALL: [Landmark; 3] = [Landmark::BonyRim, Landmark::LowerLimbPoint, Landmark::LabrumMid];

    pub fn name(self) -> &'static str {
        match self {
            Landmark::BonyRim => "p1_bony_rim",
            Landmark::LowerLimbPoint => "p2_lower_limb",
            Landmark::LabrumMid => "p3_labrum_mid",
        }
    }
}

impl std::fmt::Display for Landmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Complete set of landmarks used for a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub p1_bony_rim: LandmarkPoint,
    pub p2_lower_limb: LandmarkPoint,
    pub p3_labrum_mid: LandmarkPoint,
}

impl LandmarkSet {
    pub fn get(&self, l: Landmark) -> LandmarkPoint {
        match l {
            Landmark::BonyRim => self.p1_bony_rim,
            Landmark::LowerLimbPoint => self.p2_lower_limb,
            Landmark::LabrumMid => self.p3_labrum_mid,
        }
    }

    pub fn to_partial(self) -> PartialLandmarks {
        PartialLandmarks {
            p1_bony_rim: Some(self.p1_bony_rim),
            p2_lower_limb: Some(self.p2_lower_limb),
            p3_labrum_mid: Some(self.p3_labrum_mid),
        }
    }
}

/// Landmarks where any subset may be missing (one inference route failed or was not run).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PartialLandmarks {
    pub p1_bony_rim: Option<LandmarkPoint>,
    pub p2_lower_limb: Option<LandmarkPoint>,
    pub p3_labrum_mid: Option<LandmarkPoint>,
}

impl PartialLandmarks {
    pub fn get(&self, l: Landmark) -> Option<LandmarkPoint> {
        match l {
            Landmark::BonyRim => self.p1_bony_rim,
            Landmark::LowerLimbPoint => self.p2_lower_limb,
            Landmark::LabrumMid => self.p3_labrum_mid,
        }
    }

    pub fn slot_mut(&mut self, l: Landmark) -> &mut Option<LandmarkPoint> {
        match l {
            Landmark::BonyRim => &mut self.p1_bony_rim,
            Landmark::LowerLimbPoint => &mut self.p2_lower_limb,
            Landmark::LabrumMid => &mut self.p3_labrum_mid,
        }
    }

    pub fn is_empty(&self) -> bool {
        Landmark::ALL.iter().all(|&l| self.get(l).is_none())
    }

    pub fn complete(&self) -> Option<LandmarkSet> {
        Some(LandmarkSet {
            p1_bony_rim: self.p1_bony_rim?,
            p2_lower_limb: self.p2_lower_limb?,
            p3_labrum_mid: self.p3_labrum_mid?,
        })
    }

    pub fn mirrored(&self, width: usize) -> Self {
        self.map(|p| p.mirrored(width))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        self.map(|p| p.translated(dx, dy))
    }

    fn map(&self, f: impl Fn(&LandmarkPoint) -> LandmarkPoint) -> Self {
        Self {
            p1_bony_rim: self.p1_bony_rim.as_ref().map(&f),
            p2_lower_limb: self.p2_lower_limb.as_ref().map(&f),
            p3_labrum_mid: self.p3_labrum_mid.as_ref().map(&f),
        }
    }
}

/// One-hot label vector and softmax output for the landmark classifier term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkProbs {
    pub labels: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Reference annotation for a scene.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub structures: StructureSet,
    pub landmarks: PartialLandmarks,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

/// One decoded manifest line, already in canonical (left-lateral) orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub width: usize,
    pub height: usize,
    pub structures: StructureSet,
    pub predicted_landmarks: PartialLandmarks,
    pub ground_truth: Option<GroundTruth>,
    /// Externally computed detection/segmentation loss, when the producer supplies it.
    pub maskrcnn_loss: Option<f64>,
    pub landmark_probs: Vec<LandmarkProbs>,
}

impl SceneRecord {
    /// Horizontal mirror of every mask and landmark. Laterality is left untouched,
    /// so applying this twice restores the record.
    pub fn mirrored(&self) -> Self {
        let w = self.width;
        Self {
            structures: self.structures.mirrored(),
            predicted_landmarks: self.predicted_landmarks.mirrored(w),
            ground_truth: self.ground_truth.as_ref().map(|gt| GroundTruth {
                structures: gt.structures.mirrored(),
                landmarks: gt.landmarks.mirrored(w),
                alpha: gt.alpha,
                beta: gt.beta,
            }),
            ..self.clone()
        }
    }
}
