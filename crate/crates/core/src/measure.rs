//! Graf measurement: landmark inference and fusion, the three measurement
//! lines, alpha/beta angles, hip type and standard-plane check. Also hosts the
//! scalar consistency scores (bony-rim distance, landmark cross-entropy and the
//! weighted composite).

use serde::{Deserialize, Serialize};

use crate::curvefit::{ss_score, FitConfig, FitError};
use crate::geometry::{
    angle_between, extract_contours, fit_line_tls, largest_component, supporting_vertex,
    GeometryError, Line2D, Point, Side,
};
use crate::imgio::{
    BinaryMask, Landmark, LandmarkPoint, LandmarkSet, LandmarkSource, PartialLandmarks,
    SceneRecord, Structure, StructureSet,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeasureError {
    #[error("{0} mask is missing or empty")]
    MissingStructure(Structure),
    #[error("no mask-derived or predicted position for {0}")]
    UnmeasurableLandmark(Landmark),
    #[error("invalid probability input: {0}")]
    InvalidProbabilities(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("scene has no ground truth")]
    NoGroundTruth,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrafType {
    #[serde(rename = "type_I")]
    TypeI,
    #[serde(rename = "type_II")]
    TypeII,
}

impl GrafType {
    pub fn as_str(self) -> &'static str {
        match self {
            GrafType::TypeI => "type_I",
            GrafType::TypeII => "type_II",
        }
    }
}

impl std::fmt::Display for GrafType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type I iff `alpha >= cutoff` (the boundary belongs to type I).
pub fn classify(alpha_deg: f64, cutoff_deg: f64) -> GrafType {
    if alpha_deg >= cutoff_deg {
        GrafType::TypeI
    } else {
        GrafType::TypeII
    }
}

pub const GRAF_CUTOFF_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    pub graf_cutoff_deg: f64,
    /// Reports whose alpha lies within this distance of the cutoff get a warning.
    pub cutoff_warning_band_deg: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            graf_cutoff_deg: GRAF_CUTOFF_DEG,
            cutoff_warning_band_deg: 0.1,
        }
    }
}

/// Weights of the composite score `λ1·maskrcnn + λ2·landmark + λ3·BR + λ4·SS`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: 0.5,
            lambda4: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub maskrcnn: f64,
    pub landmark: f64,
    pub br: f64,
    pub ss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementReport {
    pub base_line: Line2D,
    pub bony_roof_line: Line2D,
    pub cartilage_roof_line: Line2D,
    pub alpha: f64,
    pub beta: f64,
    pub graf_type: GrafType,
    pub standard_plane: bool,
    pub missing_structures: Vec<Structure>,
    pub landmarks_used: LandmarkSet,
    /// Landmarks read off the masks before fusion.
    pub mask_landmarks: PartialLandmarks,
    pub warnings: Vec<String>,
}

/// Mask-derived landmarks plus the ilium's lateral edge chain they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredLandmarks {
    pub landmarks: PartialLandmarks,
    pub lateral_edge: Vec<Point>,
    pub warnings: Vec<String>,
}

/// Leftmost foreground pixel of every row, top to bottom.
pub fn lateral_edge(mask: &BinaryMask) -> Vec<Point> {
    (0..mask.height())
        .filter_map(|y| {
            (0..mask.width())
                .find(|&x| mask.get(x, y))
                .map(|x| Point::new(x as f64, y as f64))
        })
        .collect()
}

fn present(s: &StructureSet, which: Structure) -> Option<&BinaryMask> {
    s.get(which).filter(|m| !m.is_blank())
}

/// P1: lowest point of the ilium's lateral edge. P2: topmost lower-limb pixel
/// (leftmost on ties). P3: labrum centroid. Each uses the structure's largest
/// component; absent structures leave their landmark empty.
pub fn infer_landmarks_from_masks(s: &StructureSet) -> Result<InferredLandmarks, MeasureError> {
    let ilium = present(s, Structure::FlatIlium)
        .ok_or(MeasureError::MissingStructure(Structure::FlatIlium))?;
    let mut warnings = Vec::new();
    let mut degenerate = |m: &BinaryMask, name: Structure| {
        if m.foreground_count() == 1 {
            warnings.push(format!("{name} is a single pixel"));
        }
    };

    let ilium = largest_component(ilium)?;
    degenerate(&ilium, Structure::FlatIlium);
    let edge = lateral_edge(&ilium);
    let p1 = edge
        .last()
        .map(|p| LandmarkPoint::new(p.x, p.y, LandmarkSource::MaskDerived));

    let p2 = match present(s, Structure::LowerLimb) {
        None => None,
        Some(m) => {
            let m = largest_component(m)?;
            degenerate(&m, Structure::LowerLimb);
            // row-major order is already (y, then x)
            let top = m.foreground().next();
            top.map(|(x, y)| LandmarkPoint::new(x as f64, y as f64, LandmarkSource::MaskDerived))
        }
    };

    let p3 = match present(s, Structure::Labrum) {
        None => None,
        Some(m) => {
            let m = largest_component(m)?;
            degenerate(&m, Structure::Labrum);
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
            for (x, y) in m.foreground() {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
            Some(LandmarkPoint::new(
                sx / n as f64,
                sy / n as f64,
                LandmarkSource::MaskDerived,
            ))
        }
    };

    Ok(InferredLandmarks {
        landmarks: PartialLandmarks {
            p1_bony_rim: p1,
            p2_lower_limb: p2,
            p3_labrum_mid: p3,
        },
        lateral_edge: edge,
        warnings,
    })
}

/// Averages mask-derived and predicted positions; a landmark with a single
/// source passes through unchanged (with a warning).
pub fn fuse_landmarks(
    mask_derived: &PartialLandmarks,
    predicted: &PartialLandmarks,
) -> Result<(LandmarkSet, Vec<String>), MeasureError> {
    let mut warnings = Vec::new();
    let mut fuse = |l: Landmark| -> Result<LandmarkPoint, MeasureError> {
        match (mask_derived.get(l), predicted.get(l)) {
            (Some(s), Some(k)) => Ok(LandmarkPoint::new(
                (s.x + k.x) / 2.0,
                (s.y + k.y) / 2.0,
                LandmarkSource::Fused,
            )),
            (Some(only), None) => {
                warnings.push(format!("{l}: no predicted position, using mask-derived"));
                Ok(only)
            }
            (None, Some(only)) => {
                warnings.push(format!("{l}: no mask-derived position, using predicted"));
                Ok(only)
            }
            (None, None) => Err(MeasureError::UnmeasurableLandmark(l)),
        }
    };
    let set = LandmarkSet {
        p1_bony_rim: fuse(Landmark::BonyRim)?,
        p2_lower_limb: fuse(Landmark::LowerLimbPoint)?,
        p3_labrum_mid: fuse(Landmark::LabrumMid)?,
    };
    Ok((set, warnings))
}

/// Euclidean distance between the mask-derived and the predicted bony rim.
pub fn br_distance(m: &LandmarkPoint, k: &LandmarkPoint) -> f64 {
    (m.x - k.x).hypot(m.y - k.y)
}

/// `-Σ y_i ln y'_i` for a one-hot label vector. A zero probability on the true
/// class yields `f64::INFINITY`.
pub fn landmark_ce(labels: &[f64], probs: &[f64]) -> Result<f64, MeasureError> {
    let bad = |m: String| MeasureError::InvalidProbabilities(m);
    if labels.is_empty() || labels.len() != probs.len() {
        return Err(bad(format!(
            "labels ({}) and probs ({}) must be non-empty and equally long",
            labels.len(),
            probs.len()
        )));
    }
    let hot: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y != 0.0)
        .map(|(i, _)| i)
        .collect();
    if hot.len() != 1 || labels[hot[0]] != 1.0 {
        return Err(bad("labels must be one-hot".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(bad("probabilities must lie in [0, 1]".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(bad(format!("probabilities sum to {sum}")));
    }
    let p = probs[hot[0]];
    Ok(if p == 0.0 { f64::INFINITY } else { -p.ln() })
}

pub fn composite_score(terms: &LossTerms, w: &LossWeights) -> Result<f64, MeasureError> {
    for (name, v) in [
        ("maskrcnn", terms.maskrcnn),
        ("landmark", terms.landmark),
        ("br", terms.br),
        ("ss", terms.ss),
        ("lambda1", w.lambda1),
        ("lambda2", w.lambda2),
        ("lambda3", w.lambda3),
        ("lambda4", w.lambda4),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(MeasureError::Domain(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    Ok(w.lambda1 * terms.maskrcnn
        + w.lambda2 * terms.landmark
        + w.lambda3 * terms.br
        + w.lambda4 * terms.ss)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandardPlane {
    pub standard: bool,
    pub missing: Vec<Structure>,
}

/// A standard plane shows all four structures; absent or empty masks are listed.
pub fn check_standard_plane(s: &StructureSet) -> StandardPlane {
    let missing: Vec<Structure> = Structure::ALL
        .into_iter()
        .filter(|&st| present(s, st).is_none())
        .collect();
    StandardPlane {
        standard: missing.is_empty(),
        missing,
    }
}

/// Full measurement of one scene in canonical (lateral = image-left) orientation.
///
/// * base line: TLS fit of the ilium's lateral edge chain;
/// * bony roof line: convex-hull support line of the ilium from fused P2, on the
///   side whose touching vertex lies nearest fused P1; falls back to P2–P1 when
///   P2 is inside the hull;
/// * cartilage roof line: fused P1 through fused P3.
pub fn measure_scene(
    s: &StructureSet,
    predicted: &PartialLandmarks,
    config: &MeasureConfig,
) -> Result<MeasurementReport, MeasureError> {
    let inferred = infer_landmarks_from_masks(s)?;
    let mut warnings = inferred.warnings.clone();
    let (used, fuse_warnings) = fuse_landmarks(&inferred.landmarks, predicted)?;
    warnings.extend(fuse_warnings);

    let p1 = used.p1_bony_rim.point();
    let p2 = used.p2_lower_limb.point();
    let p3 = used.p3_labrum_mid.point();

    let base_line = fit_line_tls(&inferred.lateral_edge)?;

    let ilium = present(s, Structure::FlatIlium).expect("checked by inference");
    let contour = extract_contours(ilium)?.swap_remove(0);
    let bony_roof_line = match (
        supporting_vertex(&contour, p2, Side::Clockwise),
        supporting_vertex(&contour, p2, Side::CounterClockwise),
    ) {
        (Ok(a), Ok(b)) => {
            let v = if a.dist(p1) <= b.dist(p1) { a } else { b };
            Line2D::through(p2, v)?
        }
        (Err(GeometryError::TangentUndefined { .. }), _)
        | (_, Err(GeometryError::TangentUndefined { .. })) => {
            warnings.push("lower limb point lies inside the ilium hull; bony roof line drawn through the bony rim".into());
            Line2D::through(p2, p1)?
        }
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    let cartilage_roof_line = Line2D::through(p1, p3)?;

    let alpha = angle_between(&base_line, &bony_roof_line);
    let beta = angle_between(&base_line, &cartilage_roof_line);
    let graf_type = classify(alpha, config.graf_cutoff_deg);
    if (alpha - config.graf_cutoff_deg).abs() < config.cutoff_warning_band_deg {
        warnings.push(format!(
            "alpha {alpha:.3} is within {} deg of the {} deg cutoff",
            config.cutoff_warning_band_deg, config.graf_cutoff_deg
        ));
    }
    if alpha == 0.0 || beta == 0.0 {
        warnings.push("degenerate zero angle".into());
    }

    let plane = check_standard_plane(s);
    if !plane.standard {
        let names: Vec<&str> = plane.missing.iter().map(|m| m.name()).collect();
        warnings.push(format!("not a standard plane: missing {}", names.join(", ")));
    }

    Ok(MeasurementReport {
        base_line,
        bony_roof_line,
        cartilage_roof_line,
        alpha,
        beta,
        graf_type,
        standard_plane: plane.standard,
        missing_structures: plane.missing,
        landmarks_used: used,
        mask_landmarks: inferred.landmarks,
        warnings,
    })
}

/// Per-scene loss terms and their weighted sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRecord {
    pub scene_id: String,
    pub ss: f64,
    pub br: f64,
    /// Summed landmark cross-entropy, when probability vectors were supplied.
    pub landmark: Option<f64>,
    pub maskrcnn: Option<f64>,
    pub composite: f64,
}

/// SS against the ground-truth masks, BR between the ilium-derived and the
/// predicted bony rim, optional landmark cross-entropy and the composite score
/// (absent terms count as zero).
pub fn scene_losses(
    record: &SceneRecord,
    fit: &FitConfig,
    weights: &LossWeights,
) -> Result<LossRecord, MeasureError> {
    let gt = record.ground_truth.as_ref().ok_or(MeasureError::NoGroundTruth)?;
    let ss = ss_score(&record.structures, &gt.structures, fit)?.total;
    let inferred = infer_landmarks_from_masks(&record.structures)?;
    let rim = inferred
        .landmarks
        .p1_bony_rim
        .ok_or(MeasureError::UnmeasurableLandmark(Landmark::BonyRim))?;
    let predicted = record
        .predicted_landmarks
        .p1_bony_rim
        .ok_or(MeasureError::UnmeasurableLandmark(Landmark::BonyRim))?;
    let br = br_distance(&rim, &predicted);
    let landmark = if record.landmark_probs.is_empty() {
        None
    } else {
        let mut sum = 0.0;
        for lp in &record.landmark_probs {
            sum += landmark_ce(&lp.labels, &lp.probs)?;
        }
        Some(sum)
    };
    let terms = LossTerms {
        maskrcnn: record.maskrcnn_loss.unwrap_or(0.0),
        landmark: landmark.unwrap_or(0.0),
        br,
        ss,
    };
    // an infinite cross-entropy is reported as such rather than rejected
    let composite = if terms.landmark.is_infinite() {
        f64::INFINITY
    } else {
        composite_score(&terms, weights)?
    };
    Ok(LossRecord {
        scene_id: record.scene_id.clone(),
        ss,
        br,
        landmark,
        maskrcnn: record.maskrcnn_loss,
        composite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lp(x: f64, y: f64) -> LandmarkPoint {
        LandmarkPoint::new(x, y, LandmarkSource::Predicted)
    }

    fn rect(w: usize, h: usize, x0: usize, x1: usize, y0: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (x0..=x1).contains(&x) && (y0..=y1).contains(&y)).unwrap()
    }

    #[test]
    fn p1_from_vertical_bar() {
        let s = StructureSet {
            flat_ilium: Some(rect(64, 64, 10, 13, 5, 44)),
            ..Default::default()
        };
        let inf = infer_landmarks_from_masks(&s).unwrap();
        let p1 = inf.landmarks.p1_bony_rim.unwrap();
        assert_eq!((p1.x, p1.y), (10.0, 44.0));
        assert_eq!(p1.source, LandmarkSource::MaskDerived);
        assert!(inf.landmarks.p2_lower_limb.is_none());
    }

    #[test]
    fn p3_centroid_of_square() {
        let s = StructureSet {
            flat_ilium: Some(rect(64, 64, 10, 13, 5, 44)),
            labrum: Some(rect(64, 64, 20, 24, 20, 24)),
            ..Default::default()
        };
        let p3 = infer_landmarks_from_masks(&s).unwrap().landmarks.p3_labrum_mid.unwrap();
        assert_eq!((p3.x, p3.y), (22.0, 22.0));
    }

    #[test]
    fn p2_matches_exhaustive_scan() {
        let limb = BinaryMask::from_fn(40, 40, |x, y| {
            let d = x as i64 - y as i64;
            (-3..=3).contains(&d) && (8..30).contains(&y)
        })
        .unwrap();
        // oracle: argmin over (y, x) of all foreground pixels
        let mut best = (usize::MAX, usize::MAX);
        for y in 0..40 {
            for x in 0..40 {
                if limb.get(x, y) && (y, x) < best {
                    best = (y, x);
                }
            }
        }
        let s = StructureSet {
            flat_ilium: Some(rect(40, 40, 1, 2, 1, 10)),
            lower_limb: Some(limb),
            ..Default::default()
        };
        let p2 = infer_landmarks_from_masks(&s).unwrap().landmarks.p2_lower_limb.unwrap();
        assert_eq!((p2.y as usize, p2.x as usize), best);
    }

    #[test]
    fn missing_or_empty_ilium() {
        let s = StructureSet::default();
        assert_eq!(
            infer_landmarks_from_masks(&s),
            Err(MeasureError::MissingStructure(Structure::FlatIlium))
        );
        let s = StructureSet {
            flat_ilium: Some(BinaryMask::new(8, 8).unwrap()),
            ..Default::default()
        };
        assert!(infer_landmarks_from_masks(&s).is_err());
    }

    #[test]
    fn single_pixel_structure_warns() {
        let mut px = BinaryMask::new(8, 8).unwrap();
        px.set(3, 3, true);
        let s = StructureSet {
            flat_ilium: Some(px),
            ..Default::default()
        };
        let inf = infer_landmarks_from_masks(&s).unwrap();
        assert_eq!(inf.warnings.len(), 1);
        assert!(inf.landmarks.p1_bony_rim.is_some());
    }

    #[test]
    fn fusion_examples() {
        let s = PartialLandmarks {
            p1_bony_rim: Some(lp(10., 10.)),
            p2_lower_limb: Some(lp(7., 3.)),
            p3_labrum_mid: None,
        };
        let k = PartialLandmarks {
            p1_bony_rim: Some(lp(20., 20.)),
            p2_lower_limb: None,
            p3_labrum_mid: Some(lp(1., 2.)),
        };
        let (set, warnings) = fuse_landmarks(&s, &k).unwrap();
        assert_eq!((set.p1_bony_rim.x, set.p1_bony_rim.y), (15., 15.));
        assert_eq!(set.p1_bony_rim.source, LandmarkSource::Fused);
        assert_eq!((set.p2_lower_limb.x, set.p2_lower_limb.y), (7., 3.));
        assert_eq!(warnings.len(), 2);
        let none = PartialLandmarks::default();
        assert_eq!(
            fuse_landmarks(&none, &k),
            Err(MeasureError::UnmeasurableLandmark(Landmark::LowerLimbPoint))
        );
    }

    #[test]
    fn br_examples() {
        assert_eq!(br_distance(&lp(3., 4.), &lp(3., 4.)), 0.0);
        assert_eq!(br_distance(&lp(0., 0.), &lp(3., 4.)), 5.0);
    }

    #[test]
    fn ce_examples() {
        assert_abs_diff_eq!(
            landmark_ce(&[0., 1., 0.], &[0.1, 0.8, 0.1]).unwrap(),
            -(0.8f64).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(landmark_ce(&[0., 1., 0.], &[0.1, 0.8, 0.1]).unwrap(), 0.2231, epsilon = 1e-4);
        assert_eq!(landmark_ce(&[1., 0.], &[1., 0.]).unwrap(), 0.0);
        assert_eq!(landmark_ce(&[1., 0.], &[0., 1.]).unwrap(), f64::INFINITY);
        assert!(landmark_ce(&[1., 1.], &[0.5, 0.5]).is_err());
        assert!(landmark_ce(&[1., 0.], &[0.5, 0.6]).is_err());
        assert!(landmark_ce(&[1.], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn composite_examples() {
        let ones = LossTerms { maskrcnn: 1., landmark: 1., br: 1., ss: 1. };
        assert_eq!(composite_score(&ones, &LossWeights::default()).unwrap(), 3.0);
        assert_eq!(composite_score(&LossTerms::default(), &LossWeights::default()).unwrap(), 0.0);
        let unit = LossWeights { lambda1: 1., lambda2: 1., lambda3: 1., lambda4: 1. };
        let t = LossTerms { maskrcnn: 2., landmark: 3., br: 4., ss: 5. };
        assert_eq!(composite_score(&t, &unit).unwrap(), 14.0);
        let t = LossTerms { maskrcnn: 0., landmark: 2., br: 4., ss: 6. };
        assert_eq!(composite_score(&t, &LossWeights::default()).unwrap(), 9.0);
        let neg = LossTerms { br: -1.0, ..Default::default() };
        assert!(matches!(composite_score(&neg, &unit), Err(MeasureError::Domain(_))));
    }

    #[test]
    fn standard_plane_rules() {
        let m = rect(16, 16, 2, 5, 2, 5);
        let full = StructureSet {
            flat_ilium: Some(m.clone()),
            lower_limb: Some(m.clone()),
            labrum: Some(m.clone()),
            co_junction: Some(m.clone()),
            ..Default::default()
        };
        assert_eq!(check_standard_plane(&full), StandardPlane { standard: true, missing: vec![] });
        let mut no_co = full.clone();
        no_co.co_junction = None;
        assert_eq!(check_standard_plane(&no_co).missing, vec![Structure::CoJunction]);
        let mut empty_ilium = full;
        empty_ilium.flat_ilium = Some(BinaryMask::new(16, 16).unwrap());
        let sp = check_standard_plane(&empty_ilium);
        assert!(!sp.standard);
        assert_eq!(sp.missing, vec![Structure::FlatIlium]);
    }

    #[test]
    fn classification_threshold() {
        assert_eq!(classify(60.0, 60.0), GrafType::TypeI);
        assert_eq!(classify(59.999, 60.0), GrafType::TypeII);
        assert_eq!(classify(59.0, 60.0), GrafType::TypeII);
    }

    /// Vertical ilium bar with the lower-limb tip placed so that the cartilage
    /// line P1→P3 runs at 45 deg.
    fn bar_scene() -> (StructureSet, PartialLandmarks) {
        let w = 256;
        let s = StructureSet {
            flat_ilium: Some(rect(w, w, 100, 130, 20, 100)),
            lower_limb: Some(rect(w, w, 170, 180, 60, 90)),
            labrum: Some(rect(w, w, 155, 165, 155, 165)),
            co_junction: Some(rect(w, w, 200, 210, 200, 210)),
            ..Default::default()
        };
        let k = PartialLandmarks {
            p1_bony_rim: Some(lp(100., 100.)),
            p2_lower_limb: Some(lp(170., 60.)),
            p3_labrum_mid: Some(lp(160., 160.)),
        };
        (s, k)
    }

    #[test]
    fn beta_forty_five_on_vertical_base() {
        let (s, k) = bar_scene();
        let r = measure_scene(&s, &k, &MeasureConfig::default()).unwrap();
        assert_abs_diff_eq!(r.beta, 45.0, epsilon = 1e-6);
        assert!(r.standard_plane);
        let lb = r.base_line.direction;
        assert_abs_diff_eq!(lb.x, 0.0, epsilon = 1e-12);
        // bony roof touches the bar's bottom-right corner seen from (170,60)
        let v = Point::new(130.0, 100.0);
        assert!(r.bony_roof_line.signed_distance(v).abs() < 1e-9);
    }

    #[test]
    fn missing_co_junction_still_measures() {
        let (mut s, k) = bar_scene();
        s.co_junction = None;
        let r = measure_scene(&s, &k, &MeasureConfig::default()).unwrap();
        assert!(!r.standard_plane);
        assert!(r.warnings.iter().any(|w| w.contains("standard plane")));
    }

    #[test]
    fn p2_inside_hull_falls_back_to_rim() {
        let (s, mut k) = bar_scene();
        let inside = PartialLandmarks {
            p2_lower_limb: Some(lp(115., 50.)),
            ..k
        };
        // predicted and mask-derived p2 both pulled inside the ilium
        let mut s2 = s.clone();
        s2.lower_limb = Some(rect(256, 256, 115, 118, 50, 55));
        k = inside;
        let r = measure_scene(&s2, &k, &MeasureConfig::default()).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("inside the ilium hull")));
        let p1 = r.landmarks_used.p1_bony_rim.point();
        assert!(r.bony_roof_line.signed_distance(p1).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn fused_point_is_midpoint(ax in -500.0f64..500.0, ay in -500.0f64..500.0, bx in -500.0f64..500.0, by in -500.0f64..500.0) {
            let s = PartialLandmarks { p1_bony_rim: Some(lp(ax, ay)), p2_lower_limb: Some(lp(0., 0.)), p3_labrum_mid: Some(lp(0., 0.)) };
            let k = PartialLandmarks { p1_bony_rim: Some(lp(bx, by)), ..s };
            let (set, _) = fuse_landmarks(&s, &k).unwrap();
            let da = br_distance(&set.p1_bony_rim, &lp(ax, ay));
            let db = br_distance(&set.p1_bony_rim, &lp(bx, by));
            prop_assert!((da - db).abs() <= 1e-9 * (1.0 + da));
        }

        #[test]
        fn br_matches_hypot_oracle(ax in -1e3f64..1e3, ay in -1e3f64..1e3, bx in -1e3f64..1e3, by in -1e3f64..1e3) {
            let oracle = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            prop_assert!((br_distance(&lp(ax, ay), &lp(bx, by)) - oracle).abs() < 1e-12 * (1.0 + oracle));
        }

        #[test]
        fn ce_matches_direct_summation(raw in proptest::collection::vec(0.01f64..1.0, 2..8), hot in any::<prop::sample::Index>()) {
            let z: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / z).collect();
            let k = hot.index(probs.len());
            let labels: Vec<f64> = (0..probs.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
            let oracle: f64 = -labels.iter().zip(&probs).filter(|(y, _)| **y > 0.0).map(|(y, p)| y * p.ln()).sum::<f64>();
            prop_assert!((landmark_ce(&labels, &probs).unwrap() - oracle).abs() < 1e-12);
        }

        #[test]
        fn composite_linear_and_monotone(t in proptest::array::uniform4(0.0f64..10.0), w in proptest::array::uniform4(0.0f64..3.0), bump in 0.0f64..2.0, k in 0usize..4) {
            let terms = LossTerms { maskrcnn: t[0], landmark: t[1], br: t[2], ss: t[3] };
            let weights = LossWeights { lambda1: w[0], lambda2: w[1], lambda3: w[2], lambda4: w[3] };
            let base = composite_score(&terms, &weights).unwrap();
            let mut w2 = w;
            w2[k] += bump;
            let heavier = LossWeights { lambda1: w2[0], lambda2: w2[1], lambda3: w2[2], lambda4: w2[3] };
            prop_assert!(composite_score(&terms, &heavier).unwrap() >= base);
            let doubled = LossTerms { maskrcnn: 2.0 * t[0], landmark: 2.0 * t[1], br: 2.0 * t[2], ss: 2.0 * t[3] };
            prop_assert!((composite_score(&doubled, &weights).unwrap() - 2.0 * base).abs() < 1e-9);
        }

        #[test]
        fn translation_leaves_angles_unchanged(dx in -40i64..40, dy in -15i64..15) {
            let (s, k) = bar_scene();
            let base = measure_scene(&s, &k, &MeasureConfig::default()).unwrap();
            let moved = measure_scene(&s.translated(dx, dy), &k.translated(dx as f64, dy as f64), &MeasureConfig::default()).unwrap();
            prop_assert!((base.alpha - moved.alpha).abs() < 1e-9);
            prop_assert!((base.beta - moved.beta).abs() < 1e-9);
            prop_assert_eq!(base.graf_type, moved.graf_type);
        }
    }
}
