//! Line-delimited JSON manifest: one scene per line.
//!
//! ```text
//! {"scene_id":"a","width":512,"height":512,"laterality":"left",
//!  "s1":{"png":"masks/a_s1.png"},"s2":{"rle":"0 4 ..."},"pk1":[201.5,300.0],
//!  "gt":{"s1":{...},"p1":[200,300],"alpha":61.2,"beta":54.0}}
//! ```
//!
//! PNG paths are resolved relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    decode_mask, decode_rle, BinaryMask, GroundTruth, ImgioError, Landmark, LandmarkPoint,
    LandmarkProbs, LandmarkSource, Laterality, PartialLandmarks, SceneRecord, Structure,
    StructureSet, DEFAULT_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Png(String),
    Rle(String),
}

/// Wire form of one manifest line. Every field is optional at the serde level so
/// that missing required keys can be reported by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laterality: Option<Laterality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s3: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s4: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pk1: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pk2: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pk3: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<ManifestTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maskrcnn_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark_probs: Option<Vec<LandmarkProbs>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestTruth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s3: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s4: Option<MaskSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p3: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl ManifestRecord {
    pub fn mask(&self, s: Structure) -> Option<&MaskSource> {
        match s {
            Structure::FlatIlium => self.s1.as_ref(),
            Structure::LowerLimb => self.s2.as_ref(),
            Structure::Labrum => self.s3.as_ref(),
            Structure::CoJunction => self.s4.as_ref(),
        }
    }

    pub fn set_mask(&mut self, s: Structure, m: Option<MaskSource>) {
        match s {
            Structure::FlatIlium => self.s1 = m,
            Structure::LowerLimb => self.s2 = m,
            Structure::Labrum => self.s3 = m,
            Structure::CoJunction => self.s4 = m,
        }
    }

    pub fn set_predicted(&mut self, l: Landmark, p: Option<[f64; 2]>) {
        match l {
            Landmark::BonyRim => self.pk1 = p,
            Landmark::LowerLimbPoint => self.pk2 = p,
            Landmark::LabrumMid => self.pk3 = p,
        }
    }

    fn predicted(&self, l: Landmark) -> Option<[f64; 2]> {
        match l {
            Landmark::BonyRim => self.pk1,
            Landmark::LowerLimbPoint => self.pk2,
            Landmark::LabrumMid => self.pk3,
        }
    }
}

impl ManifestTruth {
    pub fn mask(&self, s: Structure) -> Option<&MaskSource> {
        match s {
            Structure::FlatIlium => self.s1.as_ref(),
            Structure::LowerLimb => self.s2.as_ref(),
            Structure::Labrum => self.s3.as_ref(),
            Structure::CoJunction => self.s4.as_ref(),
        }
    }

    pub fn set_mask(&mut self, s: Structure, m: Option<MaskSource>) {
        match s {
            Structure::FlatIlium => self.s1 = m,
            Structure::LowerLimb => self.s2 = m,
            Structure::Labrum => self.s3 = m,
            Structure::CoJunction => self.s4 = m,
        }
    }

    pub fn set_point(&mut self, l: Landmark, p: Option<[f64; 2]>) {
        match l {
            Landmark::BonyRim => self.p1 = p,
            Landmark::LowerLimbPoint => self.p2 = p,
            Landmark::LabrumMid => self.p3 = p,
        }
    }

    fn point(&self, l: Landmark) -> Option<[f64; 2]> {
        match l {
            Landmark::BonyRim => self.p1,
            Landmark::LowerLimbPoint => self.p2,
            Landmark::LabrumMid => self.p3,
        }
    }
}

/// Reads a manifest file, returning `(line_number, text)` for each non-blank line.
pub fn read_manifest_lines(path: &Path) -> Result<Vec<(usize, String)>, ImgioError> {
    let text = fs::read_to_string(path).map_err(|source| ImgioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

/// Decodes a single manifest line into a canonical-orientation record.
pub fn parse_manifest_line(
    line_no: usize,
    text: &str,
    base_dir: &Path,
) -> Result<SceneRecord, ImgioError> {
    let raw: ManifestRecord = serde_json::from_str(text).map_err(|e| ImgioError::Json {
        line: line_no,
        message: e.to_string(),
    })?;
    resolve_record(line_no, &raw, base_dir)
}

pub fn resolve_record(
    line_no: usize,
    raw: &ManifestRecord,
    base_dir: &Path,
) -> Result<SceneRecord, ImgioError> {
    let missing = |field: &'static str| ImgioError::Schema {
        line: line_no,
        field,
    };
    let invalid = |message: String| ImgioError::Invalid {
        line: line_no,
        message,
    };

    let scene_id = raw.scene_id.clone().ok_or_else(|| missing("scene_id"))?;
    let width = raw.width.ok_or_else(|| missing("width"))?;
    let height = raw.height.ok_or_else(|| missing("height"))?;
    let laterality = raw.laterality.ok_or_else(|| missing("laterality"))?;
    if width == 0 || height == 0 {
        return Err(invalid(format!("zero scene dimensions {width}x{height}")));
    }

    let load = |src: Option<&MaskSource>, field: &str| -> Result<Option<BinaryMask>, ImgioError> {
        let Some(src) = src else { return Ok(None) };
        let mask = match src {
            MaskSource::Rle(text) => decode_rle(text, width, height),
            MaskSource::Png(rel) => {
                let path = resolve_path(base_dir, rel);
                let bytes = fs::read(&path).map_err(|source| ImgioError::Io {
                    path: path.clone(),
                    source,
                })?;
                decode_mask(&bytes, DEFAULT_THRESHOLD)
            }
        }
        .map_err(|e| invalid(format!("{field}: {e}")))?;
        if mask.dims() != (width, height) {
            return Err(invalid(format!(
                "{field}: mask is {}x{}, scene is {width}x{height}",
                mask.width(),
                mask.height()
            )));
        }
        Ok(Some(mask))
    };

    let mut structures = StructureSet {
        laterality,
        ..Default::default()
    };
    for s in Structure::ALL {
        *structures.slot_mut(s) = load(raw.mask(s), s.key())?;
    }

    let point = |xy: Option<[f64; 2]>,
                 field: &str,
                 source: LandmarkSource|
     -> Result<Option<LandmarkPoint>, ImgioError> {
        let Some([x, y]) = xy else { return Ok(None) };
        let p = LandmarkPoint::new(x, y, source);
        if !x.is_finite() || !y.is_finite() || !p.in_bounds(width, height) {
            return Err(invalid(format!(
                "{field}: ({x}, {y}) outside {width}x{height}"
            )));
        }
        Ok(Some(p))
    };

    let mut predicted = PartialLandmarks::default();
    for (l, key) in Landmark::ALL.into_iter().zip(["pk1", "pk2", "pk3"]) {
        *predicted.slot_mut(l) = point(raw.predicted(l), key, LandmarkSource::Predicted)?;
    }

    let ground_truth = match &raw.gt {
        None => None,
        Some(gt) => {
            let mut gs = StructureSet {
                laterality,
                ..Default::default()
            };
            for s in Structure::ALL {
                let field = format!("gt.{}", s.key());
                *gs.slot_mut(s) = load(gt.mask(s), &field)?;
            }
            let mut lm = PartialLandmarks::default();
            for (l, key) in Landmark::ALL.into_iter().zip(["gt.p1", "gt.p2", "gt.p3"]) {
                // Reference landmarks carry no inference route; tag them as predicted-grade input.
                *lm.slot_mut(l) = point(gt.point(l), key, LandmarkSource::Predicted)?;
            }
            for (name, angle) in [("gt.alpha", gt.alpha), ("gt.beta", gt.beta)] {
                if let Some(a) = angle {
                    if !(a > 0.0 && a < 180.0) {
                        return Err(invalid(format!("{name} = {a} outside (0, 180)")));
                    }
                }
            }
            Some(GroundTruth {
                structures: gs,
                landmarks: lm,
                alpha: gt.alpha,
                beta: gt.beta,
            })
        }
    };

    let record = SceneRecord {
        scene_id,
        width,
        height,
        structures,
        predicted_landmarks: predicted,
        ground_truth,
        maskrcnn_loss: raw.maskrcnn_loss,
        landmark_probs: raw.landmark_probs.clone().unwrap_or_default(),
    };
    Ok(match laterality {
        Laterality::Left => record,
        Laterality::Right => record.mirrored(),
    })
}

fn resolve_path(base_dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Fails on the first repeated scene id. `line_numbers` parallels `records`.
pub fn check_unique_ids(records: &[SceneRecord], line_numbers: &[usize]) -> Result<(), ImgioError> {
    let mut seen = HashSet::new();
    for (r, &line) in records.iter().zip(line_numbers) {
        if !seen.insert(r.scene_id.as_str()) {
            return Err(ImgioError::DuplicateScene {
                line,
                scene_id: r.scene_id.clone(),
            });
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Vec<SceneRecord>, ImgioError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let lines = read_manifest_lines(path)?;
    let records = lines
        .iter()
        .map(|(n, text)| parse_manifest_line(*n, text, base))
        .collect::<Result<Vec<_>, _>>()?;
    let numbers: Vec<usize> = lines.iter().map(|(n, _)| *n).collect();
    check_unique_ids(&records, &numbers)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), ImgioError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| ImgioError::Format(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| ImgioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::encode_rle;

    fn rle_of(ascii: &str) -> MaskSource {
        MaskSource::Rle(encode_rle(&BinaryMask::from_ascii(ascii).unwrap()))
    }

    fn complete(id: &str) -> ManifestRecord {
        let sq = "0000\n0110\n0110\n0000";
        ManifestRecord {
            scene_id: Some(id.into()),
            width: Some(4),
            height: Some(4),
            laterality: Some(Laterality::Left),
            s1: Some(rle_of(sq)),
            s2: Some(rle_of(sq)),
            s3: Some(rle_of(sq)),
            s4: Some(rle_of(sq)),
            ..Default::default()
        }
    }

    fn write(dir: &Path, recs: &[ManifestRecord]) -> PathBuf {
        let p = dir.join("m.jsonl");
        write_manifest(&p, recs).unwrap();
        p
    }

    #[test]
    fn loads_complete_record() {
        let dir = tempfile::tempdir().unwrap();
        let recs = load_manifest(&write(dir.path(), &[complete("a")])).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(Structure::ALL.iter().all(|&s| recs[0].structures.get(s).is_some()));
    }

    #[test]
    fn right_laterality_mirrors_landmarks() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ManifestRecord {
            scene_id: Some("r".into()),
            width: Some(512),
            height: Some(512),
            laterality: Some(Laterality::Right),
            pk1: Some([10.0, 20.0]),
            ..Default::default()
        };
        r.s1 = Some(MaskSource::Rle(format!("0 1 {}", 512 * 512 - 1)));
        let recs = load_manifest(&write(dir.path(), &[r])).unwrap();
        let p = recs[0].predicted_landmarks.p1_bony_rim.unwrap();
        assert_eq!((p.x, p.y), (501.0, 20.0));
        // the single foreground pixel at (0,0) moves to (511,0)
        assert!(recs[0].structures.flat_ilium.as_ref().unwrap().get(511, 0));
    }

    #[test]
    fn optional_co_junction() {
        let dir = tempfile::tempdir().unwrap();
        let mut third = complete("c");
        third.s4 = None;
        let recs = load_manifest(&write(dir.path(), &[complete("a"), complete("b"), third])).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs[2].structures.co_junction.is_none());
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = complete("b");
        bad.width = None;
        let err = load_manifest(&write(dir.path(), &[complete("a"), bad])).unwrap_err();
        match err {
            ImgioError::Schema { line, field } => {
                assert_eq!(line, 2);
                assert_eq!(field, "width");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_manifest(&write(dir.path(), &[complete("a"), complete("a")])).unwrap_err();
        assert!(matches!(err, ImgioError::DuplicateScene { line: 2, .. }));
    }

    #[test]
    fn png_paths_resolve_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_ascii("0000\n0110\n0110\n0000").unwrap();
        fs::write(dir.path().join("s1.png"), m.to_png().unwrap()).unwrap();
        let mut r = complete("p");
        r.s1 = Some(MaskSource::Png("s1.png".into()));
        let recs = load_manifest(&write(dir.path(), &[r])).unwrap();
        assert_eq!(recs[0].structures.flat_ilium.as_ref().unwrap(), &m);
    }

    #[test]
    fn gt_angle_range_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = complete("g");
        r.gt = Some(ManifestTruth {
            alpha: Some(190.0),
            ..Default::default()
        });
        assert!(matches!(
            load_manifest(&write(dir.path(), &[r])),
            Err(ImgioError::Invalid { line: 1, .. })
        ));
    }

    #[test]
    fn empty_manifest_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_manifest(&write(dir.path(), &[])).unwrap().is_empty());
    }

    #[test]
    fn mirroring_record_twice_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = complete("m");
        r.s1 = Some(rle_of("1000\n1100\n0000\n0001"));
        r.pk2 = Some([1.25, 3.0]);
        let recs = load_manifest(&write(dir.path(), &[r])).unwrap();
        assert_eq!(recs[0].mirrored().mirrored(), recs[0]);
    }
}
