//! Synthetic hip scenes with analytically known alpha and beta.
//!
//! Layout in canonical orientation (lateral side = image left, y down):
//!
//! ```text
//!   A ______ D
//!    |      |          ilium: quadrilateral A B C' D
//!    |      |          roof:  B -> C' along the bony roof direction
//!    |     C'   P2     lower limb: triangle hanging from P2
//!    |   /     /\
//!    | /      /__\
//!    B
//!  o               O   labrum disk (o) off B at beta; CO junction disk (O)
//! ```
//!
//! The lateral edge A–B is vertical, so the base line is exact. P2 and the
//! labrum centre sit on integer lattice points near the requested directions;
//! the realized angles are reported as the truth. C' is pulled slightly inside
//! the roof line so that the hull support line from P2 touches exactly B.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{angle_between, Line2D, Point};
use crate::imgio::{
    encode_rle, BinaryMask, ImgioError, Landmark, LandmarkPoint, LandmarkSet, LandmarkSource,
    Laterality, ManifestRecord, ManifestTruth, MaskSource, Structure, StructureSet,
};
use crate::metrics::squared_edt;

#[derive(Debug, thiserror::Error)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible phantom: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] ImgioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureScales {
    pub limb_height: f64,
    pub limb_half_width: f64,
    pub labrum_radius: f64,
    /// Distance from the bony rim to the labrum centre.
    pub labrum_distance: f64,
    pub co_radius: f64,
}

impl Default for StructureScales {
    fn default() -> Self {
        Self {
            limb_height: 60.0,
            limb_half_width: 22.0,
            labrum_radius: 14.0,
            labrum_distance: 130.0,
            co_radius: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Std of the per-vertex normal offset applied to every outline.
    pub edge_jitter_px: f64,
    /// Std of the per-coordinate offset applied to predicted landmarks.
    pub landmark_jitter_px: f64,
    /// Fraction of the boundary (by angle around the centroid) erased.
    pub dropout_fraction: f64,
    pub dropout_structures: Vec<Structure>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            edge_jitter_px: 0.0,
            landmark_jitter_px: 0.0,
            dropout_fraction: 0.0,
            dropout_structures: vec![Structure::Labrum],
        }
    }
}

impl NoiseSpec {
    pub fn jitter(px: f64) -> Self {
        Self {
            edge_jitter_px: px,
            landmark_jitter_px: px,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub alpha_true: f64,
    pub beta_true: f64,
    pub width: usize,
    pub height: usize,
    /// Horizontal extent of the ilium from the lateral edge to the roof end.
    pub ilium_thickness: f64,
    pub scales: StructureScales,
    pub noise: NoiseSpec,
    /// Rigid rotation of the whole scene about the bony rim before rasterization.
    pub rotation_deg: f64,
    /// Merge the lower limb into the ilium mask through a bridge at the roof end.
    pub fused: bool,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            alpha_true: 60.0,
            beta_true: 55.0,
            width: 512,
            height: 512,
            ilium_thickness: 120.0,
            scales: StructureScales::default(),
            noise: NoiseSpec::default(),
            rotation_deg: 0.0,
            fused: false,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::InvalidSpec(m));
        if !(40.0..=80.0).contains(&self.alpha_true) {
            return bad(format!("alpha_true {} outside [40, 80]", self.alpha_true));
        }
        if !(30.0..=90.0).contains(&self.beta_true) {
            return bad(format!("beta_true {} outside [30, 90]", self.beta_true));
        }
        if self.width < 128 || self.height < 128 {
            return bad(format!("canvas {}x{} below 128x128", self.width, self.height));
        }
        let n = &self.noise;
        if !(n.edge_jitter_px >= 0.0 && n.edge_jitter_px.is_finite())
            || !(n.landmark_jitter_px >= 0.0 && n.landmark_jitter_px.is_finite())
        {
            return bad("jitter must be finite and non-negative".into());
        }
        if !(0.0..0.5).contains(&n.dropout_fraction) {
            return bad(format!("dropout_fraction {} outside [0, 0.5)", n.dropout_fraction));
        }
        let s = &self.scales;
        for (name, v) in [
            ("ilium_thickness", self.ilium_thickness),
            ("limb_height", s.limb_height),
            ("limb_half_width", s.limb_half_width),
            ("labrum_radius", s.labrum_radius),
            ("labrum_distance", s.labrum_distance),
            ("co_radius", s.co_radius),
        ] {
            if !(v.is_finite() && v >= 4.0) {
                return bad(format!("{name} must be at least 4 px, got {v}"));
            }
        }
        if !self.rotation_deg.is_finite() || self.rotation_deg.abs() > 30.0 {
            return bad(format!("rotation_deg {} outside [-30, 30]", self.rotation_deg));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomScene {
    pub scene_id: String,
    /// Masks with noise applied (the "prediction").
    pub structures: StructureSet,
    /// Noiseless masks.
    pub truth_structures: StructureSet,
    pub landmarks_truth: LandmarkSet,
    pub predicted_landmarks: LandmarkSet,
    /// Angles realized by the construction, in degrees.
    pub alpha_true: f64,
    pub beta_true: f64,
    pub spec: PhantomSpec,
}

const GAP: f64 = 12.0;
const ROOF_INSET: f64 = 3.0;
const BRIDGE_HALF_WIDTH: f64 = 3.0;
const DENSIFY_STEP: f64 = 3.0;
const DROPOUT_DEPTH_SQ: f64 = 9.0;
const EPS: f64 = 1e-9;

/// Integer vector closest in direction to `len * (cos, sin)` of `dir`.
fn lattice_vector(dir: Point, len: f64) -> Point {
    let target = dir.scale(len);
    let (cx, cy) = (target.x.round() as i64, target.y.round() as i64);
    let mut best = (f64::INFINITY, f64::INFINITY, Point::default());
    for i in cx - 4..=cx + 4 {
        for j in cy - 4..=cy + 4 {
            let v = Point::new(i as f64, j as f64);
            if v.norm() == 0.0 {
                continue;
            }
            let ang = dir.cross(v).atan2(dir.dot(v)).abs();
            let dl = (v.norm() - len).abs();
            if ang < best.0 - 1e-15 || (ang <= best.0 + 1e-15 && dl < best.1) {
                best = (ang, dl, v);
            }
        }
    }
    best.2
}

fn disk(c: Point, r: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            Point::new(c.x + r * t.cos(), c.y + r * t.sin())
        })
        .collect()
}

struct Layout {
    ilium: Vec<Point>,
    limb: Vec<Point>,
    labrum: Vec<Point>,
    co: Vec<Point>,
    bridge: Vec<Point>,
    b: Point,
    p2: Point,
    q: Point,
    alpha: f64,
    beta: f64,
}

fn layout(spec: &PhantomSpec) -> Result<Layout, PhantomError> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let b = Point::new((0.39 * w).round(), (0.586 * h).round());
    let ytop = (0.08 * h).round();
    let s = &spec.scales;

    let a = spec.alpha_true.to_radians();
    let roof_len = spec.ilium_thickness / a.sin() + GAP;
    let roof = lattice_vector(Point::new(a.sin(), -a.cos()), roof_len);
    let u = roof.scale(1.0 / roof.norm());
    let p2 = b.add(roof);
    let inward = Point::new(u.y, -u.x);
    let c = b.add(u.scale(roof.norm() - GAP)).add(inward.scale(ROOF_INSET));
    let d = Point::new(c.x, ytop + 0.4 * spec.ilium_thickness);
    if d.y >= c.y - 1.0 {
        return Err(PhantomError::Infeasible("roof end rises above the ilium top".into()));
    }
    let ilium = vec![Point::new(b.x, ytop), b, c, d];

    let limb = vec![
        p2,
        Point::new(p2.x + s.limb_half_width, p2.y + s.limb_height),
        Point::new(p2.x - s.limb_half_width, p2.y + s.limb_height),
    ];

    let bt = spec.beta_true.to_radians();
    let lab = lattice_vector(Point::new(-bt.sin(), bt.cos()), s.labrum_distance);
    let q = b.add(lab);
    let labrum = disk(q, s.labrum_radius, 96);
    let co = disk(b.add(Point::new(130.0, 120.0)), s.co_radius, 64);

    let n = inward.scale(BRIDGE_HALF_WIDTH);
    let bridge = vec![c.add(n), p2.add(n), p2.sub(n), c.sub(n)];

    let vertical = Line2D::new(Point::default(), Point::new(0.0, 1.0)).expect("unit");
    let alpha = angle_between(&vertical, &Line2D::new(Point::default(), roof).expect("nonzero"));
    let beta = angle_between(&vertical, &Line2D::new(Point::default(), lab).expect("nonzero"));

    let mut l = Layout { ilium, limb, labrum, co, bridge, b, p2, q, alpha, beta };
    if spec.rotation_deg != 0.0 {
        let th = spec.rotation_deg.to_radians();
        let rot = |p: Point| b.add(p.sub(b).rotated(th));
        for poly in [&mut l.ilium, &mut l.limb, &mut l.labrum, &mut l.co, &mut l.bridge] {
            for p in poly.iter_mut() {
                *p = rot(*p);
            }
        }
        l.p2 = rot(l.p2);
        l.q = rot(l.q);
    }

    let margin = 2.0 + 4.0 * spec.noise.edge_jitter_px;
    for p in l.ilium.iter().chain(&l.limb).chain(&l.labrum).chain(&l.co) {
        if p.x < margin || p.y < margin || p.x > w - 1.0 - margin || p.y > h - 1.0 - margin {
            return Err(PhantomError::Infeasible(format!(
                "vertex ({:.1}, {:.1}) leaves the {}x{} canvas",
                p.x, p.y, spec.width, spec.height
            )));
        }
    }
    Ok(l)
}

/// Scanline fill of a polygon at pixel centres; centres on an edge are inside.
pub fn rasterize(poly: &[Point], width: usize, height: usize) -> BinaryMask {
    let mut m = BinaryMask::new(width, height).expect("canvas dims validated");
    let n = poly.len();
    if n < 3 {
        return m;
    }
    let miny = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let maxy = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let y0 = (miny - EPS).ceil().max(0.0) as usize;
    let y1 = (maxy + EPS).floor().min(height as f64 - 1.0);
    if y1 < 0.0 {
        return m;
    }
    let mut xs: Vec<f64> = Vec::new();
    let fill = |m: &mut BinaryMask, y: usize, xa: f64, xb: f64| {
        let a = (xa - EPS).ceil().max(0.0);
        let b = (xb + EPS).floor().min(width as f64 - 1.0);
        if b >= a {
            for x in a as usize..=b as usize {
                m.set(x, y, true);
            }
        }
    };
    for y in y0..=y1 as usize {
        let yc = y as f64;
        xs.clear();
        for i in 0..n {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            if (p.y <= yc && q.y > yc) || (q.y <= yc && p.y > yc) {
                xs.push(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            fill(&mut m, y, pair[0], pair[1]);
        }
    }
    // centres lying exactly on an edge (vertices, horizontal edges)
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (lo, hi) = (p.y.min(q.y), p.y.max(q.y));
        let ya = (lo - EPS).ceil().max(0.0);
        let yb = (hi + EPS).floor().min(height as f64 - 1.0);
        if yb < ya {
            continue;
        }
        for y in ya as usize..=yb as usize {
            let yc = y as f64;
            if (q.y - p.y).abs() < EPS {
                fill(&mut m, y, p.x.min(q.x), p.x.max(q.x));
                continue;
            }
            let x = p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y);
            let xr = x.round();
            if (x - xr).abs() < EPS && xr >= 0.0 && xr < width as f64 {
                m.set(xr as usize, y, true);
            }
        }
    }
    m
}

fn densify(poly: &[Point], step: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let k = (a.dist(b) / step).ceil().max(1.0) as usize;
        for j in 0..k {
            out.push(a.add(b.sub(a).scale(j as f64 / k as f64)));
        }
    }
    out
}

fn jitter_outline(poly: &[Point], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let pts = densify(poly, DENSIFY_STEP);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let n = pts.len();
    (0..n)
        .map(|i| {
            let t = pts[(i + 1) % n].sub(pts[(i + n - 1) % n]);
            let len = t.norm();
            let off = normal.sample(rng);
            if len == 0.0 {
                pts[i]
            } else {
                pts[i].add(Point::new(-t.y, t.x).scale(off / len))
            }
        })
        .collect()
}

/// Erases the boundary band (within 3 px of background) inside an angular
/// sector of `fraction * 360` degrees around the centroid.
pub fn apply_dropout(mask: &BinaryMask, fraction: f64, rng: &mut impl Rng) -> BinaryMask {
    let start = rng.random_range(0.0..TAU);
    if fraction <= 0.0 || mask.is_blank() {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let (mut cx, mut cy, mut n) = (0.0, 0.0, 0.0);
    for (x, y) in mask.foreground() {
        cx += x as f64;
        cy += y as f64;
        n += 1.0;
    }
    let (cx, cy) = (cx / n, cy / n);
    let background = BinaryMask::from_fn(w, h, |x, y| !mask.get(x, y)).expect("same dims");
    let depth = squared_edt(&background);
    let mut out = mask.clone();
    for (x, y) in mask.foreground() {
        let ang = (y as f64 - cy).atan2(x as f64 - cx);
        let rel = (ang - start).rem_euclid(TAU);
        if rel < TAU * fraction && depth[y * w + x] <= DROPOUT_DEPTH_SQ {
            out.set(x, y, false);
        }
    }
    out
}

fn clamp_point(p: Point, w: usize, h: usize) -> Point {
    Point::new(p.x.clamp(0.0, w as f64 - 1.0), p.y.clamp(0.0, h as f64 - 1.0))
}

/// Builds one scene; identical specs give identical scenes.
pub fn generate(spec: &PhantomSpec) -> Result<PhantomScene, PhantomError> {
    spec.validate()?;
    let l = layout(spec)?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut ilium_poly = vec![l.ilium.clone()];
    let mut limb_poly = l.limb.clone();
    if spec.fused {
        ilium_poly.push(l.bridge.clone());
        ilium_poly.push(l.limb.clone());
    }
    let raster_union = |polys: &[Vec<Point>]| {
        polys
            .iter()
            .map(|p| rasterize(p, w, h))
            .reduce(|a, b| a.union(&b).expect("same dims"))
            .expect("non-empty")
    };

    let truth = StructureSet {
        flat_ilium: Some(raster_union(&ilium_poly)),
        lower_limb: Some(rasterize(&limb_poly, w, h)),
        labrum: Some(rasterize(&l.labrum, w, h)),
        co_junction: Some(rasterize(&l.co, w, h)),
        laterality: Laterality::Left,
    };

    let sigma = spec.noise.edge_jitter_px;
    let mut noisy = if sigma > 0.0 {
        for p in ilium_poly.iter_mut() {
            *p = jitter_outline(p, sigma, &mut rng);
        }
        limb_poly = jitter_outline(&limb_poly, sigma, &mut rng);
        StructureSet {
            flat_ilium: Some(raster_union(&ilium_poly)),
            lower_limb: Some(rasterize(&limb_poly, w, h)),
            labrum: Some(rasterize(&jitter_outline(&l.labrum, sigma, &mut rng), w, h)),
            co_junction: Some(rasterize(&jitter_outline(&l.co, sigma, &mut rng), w, h)),
            laterality: Laterality::Left,
        }
    } else {
        truth.clone()
    };
    if spec.noise.dropout_fraction > 0.0 {
        for &s in &spec.noise.dropout_structures {
            if let Some(m) = noisy.slot_mut(s).as_mut() {
                *m = apply_dropout(m, spec.noise.dropout_fraction, &mut rng);
            }
        }
    }

    let lp = |p: Point, src| LandmarkPoint::new(p.x, p.y, src);
    let truth_pts = [l.b, l.p2, l.q];
    let landmarks_truth = LandmarkSet {
        p1_bony_rim: lp(truth_pts[0], LandmarkSource::MaskDerived),
        p2_lower_limb: lp(truth_pts[1], LandmarkSource::MaskDerived),
        p3_labrum_mid: lp(truth_pts[2], LandmarkSource::MaskDerived),
    };
    let lj = spec.noise.landmark_jitter_px;
    let mut predicted = truth_pts;
    if lj > 0.0 {
        let normal = Normal::new(0.0, lj).expect("sigma validated");
        for p in predicted.iter_mut() {
            let d = Point::new(normal.sample(&mut rng), normal.sample(&mut rng));
            *p = clamp_point(p.add(d), w, h);
        }
    }
    let predicted_landmarks = LandmarkSet {
        p1_bony_rim: lp(predicted[0], LandmarkSource::Predicted),
        p2_lower_limb: lp(predicted[1], LandmarkSource::Predicted),
        p3_labrum_mid: lp(predicted[2], LandmarkSource::Predicted),
    };

    Ok(PhantomScene {
        scene_id: "phantom-0000".into(),
        structures: noisy,
        truth_structures: truth,
        landmarks_truth,
        predicted_landmarks,
        alpha_true: l.alpha,
        beta_true: l.beta,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
}

impl Default for AngleRange {
    fn default() -> Self {
        Self {
            alpha: (45.0, 75.0),
            beta: (35.0, 80.0),
        }
    }
}

/// Per-scene ids and specs for a batch: angles drawn uniformly from `range`,
/// per-scene seeds derived from `seed`.
pub fn batch_specs(
    n: usize,
    base: &PhantomSpec,
    range: &AngleRange,
    seed: u64,
) -> Vec<(String, PhantomSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    (0..n)
        .map(|i| {
            let alpha_true = draw(&mut rng, range.alpha);
            let beta_true = draw(&mut rng, range.beta);
            let spec = PhantomSpec {
                alpha_true,
                beta_true,
                seed: rng.next_u64(),
                ..base.clone()
            };
            (format!("phantom-{i:04}"), spec)
        })
        .collect()
}

pub fn generate_with_id(id: String, spec: &PhantomSpec) -> Result<PhantomScene, PhantomError> {
    let mut s = generate(spec)?;
    s.scene_id = id;
    Ok(s)
}

pub fn generate_batch(
    n: usize,
    base: &PhantomSpec,
    range: &AngleRange,
    seed: u64,
) -> Result<Vec<PhantomScene>, PhantomError> {
    batch_specs(n, base, range, seed)
        .into_iter()
        .map(|(id, spec)| generate_with_id(id, &spec))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskFormat {
    Png,
    #[default]
    Rle,
}

fn pt(p: &LandmarkPoint) -> [f64; 2] {
    [p.x, p.y]
}

/// Manifest line for a scene: noisy masks and predicted landmarks as the
/// prediction, noiseless masks, truth landmarks and realized angles as `gt`.
/// In PNG mode masks are written under `<dir>/masks/`.
pub fn manifest_record(
    scene: &PhantomScene,
    format: MaskFormat,
    dir: &Path,
) -> Result<ManifestRecord, PhantomError> {
    let (w, h) = (scene.spec.width, scene.spec.height);
    let encode = |m: &BinaryMask, tag: &str| -> Result<MaskSource, PhantomError> {
        Ok(match format {
            MaskFormat::Rle => MaskSource::Rle(encode_rle(m)),
            MaskFormat::Png => {
                let rel = format!("masks/{}_{tag}.png", scene.scene_id);
                let path = dir.join(&rel);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|source| ImgioError::Io {
                        path: parent.to_path_buf(),
                        source,
                    })?;
                }
                fs::write(&path, m.to_png()?)
                    .map_err(|source| ImgioError::Io { path, source })?;
                MaskSource::Png(rel)
            }
        })
    };
    let mut rec = ManifestRecord {
        scene_id: Some(scene.scene_id.clone()),
        width: Some(w),
        height: Some(h),
        laterality: Some(Laterality::Left),
        ..Default::default()
    };
    let mut gt = ManifestTruth {
        alpha: Some(scene.alpha_true),
        beta: Some(scene.beta_true),
        ..Default::default()
    };
    for s in Structure::ALL {
        if let Some(m) = scene.structures.get(s) {
            rec.set_mask(s, Some(encode(m, s.key())?));
        }
        if let Some(m) = scene.truth_structures.get(s) {
            gt.set_mask(s, Some(encode(m, &format!("{}_gt", s.key()))?));
        }
    }
    for l in Landmark::ALL {
        rec.set_predicted(l, Some(pt(&scene.predicted_landmarks.get(l))));
        gt.set_point(l, Some(pt(&scene.landmarks_truth.get(l))));
    }
    rec.gt = Some(gt);
    Ok(rec)
}
