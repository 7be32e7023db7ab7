//! Shape similarity between predicted and reference boundaries.
//!
//! A structure's outer contour is cut into an upper and a lower curve at its
//! extreme-x points; each curve is fitted with a cubic by ridge least squares
//! and the non-constant coefficients `[a, b, c]` are compared with the absolute
//! cosine similarity. The per-scene score is `Σ_j (1 - cs_j)` over structures.

use crate::geometry::{extract_contours, Contour, GeometryError, Point};
use crate::imgio::{Structure, StructureSet};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { got: usize, need: usize },
    #[error("boundary spans only {extent} px horizontally (need >= 4)")]
    TooNarrow { extent: f64 },
    #[error("normal matrix is singular; add ridge regularization or more distinct x values")]
    SingularFit,
    #[error("cosine similarity undefined for a zero coefficient vector")]
    UndefinedSimilarity,
    #[error("{0} present in only one of the two structure sets")]
    Mismatch(Structure),
    #[error("non-finite input coordinates")]
    NonFinite,
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ridge fit settings: `xi` is the ridge weight in the normalized frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub xi: f64,
    pub min_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            xi: 1e-3,
            min_points: 4,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(FitError::Config(format!("xi must be >= 0, got {}", self.xi)));
        }
        if self.min_points < 4 {
            return Err(FitError::Config(format!(
                "min_points must be >= 4, got {}",
                self.min_points
            )));
        }
        Ok(())
    }
}

/// `C(t) = a t³ + b t² + c t + d` with `t = (x - x_center) / x_half_range`, so
/// the fitted x-range maps onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub x_center: f64,
    pub x_half_range: f64,
}

impl PolyCoeffs {
    /// Comparison vector `[a, b, c]` (constant term excluded).
    pub fn f_vector(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.x_center) / self.x_half_range;
        ((self.a * t + self.b) * t + self.c) * t + self.d
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }
}

/// Upper and lower boundary curves, each sorted by x with one point per column.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySplit {
    pub upper: Vec<Point>,
    pub lower: Vec<Point>,
}

/// The two contour arcs between the extreme-x cut points, `(upper, lower)`.
/// Both arcs contain both cut points; together they cover every contour point.
pub fn split_arcs(contour: &Contour) -> Result<(Vec<Point>, Vec<Point>), FitError> {
    let pts = &contour.points;
    if pts.len() < 8 {
        return Err(FitError::TooFewPoints {
            got: pts.len(),
            need: 8,
        });
    }
    if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let key_min = |p: &Point| (p.x, p.y);
    let i_min = argbest(pts, |a, b| {
        let (ka, kb) = (key_min(a), key_min(b));
        ka.0 < kb.0 || (ka.0 == kb.0 && ka.1 < kb.1)
    });
    let i_max = argbest(pts, |a, b| a.x > b.x || (a.x == b.x && a.y < b.y));
    let extent = pts[i_max].x - pts[i_min].x;
    if extent < 4.0 {
        return Err(FitError::TooNarrow { extent });
    }
    let n = pts.len();
    let walk = |from: usize, to: usize| {
        let mut arc = vec![pts[from]];
        let mut i = from;
        while i != to {
            i = (i + 1) % n;
            arc.push(pts[i]);
        }
        arc
    };
    let first = walk(i_min, i_max);
    let second = walk(i_max, i_min);
    let mean_y = |arc: &[Point]| arc.iter().map(|p| p.y).sum::<f64>() / arc.len() as f64;
    Ok(if mean_y(&first) <= mean_y(&second) {
        (first, second)
    } else {
        (second, first)
    })
}

fn argbest(pts: &[Point], better: impl Fn(&Point, &Point) -> bool) -> usize {
    let mut best = 0;
    for (i, p) in pts.iter().enumerate().skip(1) {
        if better(p, &pts[best]) {
            best = i;
        }
    }
    best
}

/// Cuts the contour at its extreme-x points (ties: smaller y) into upper and
/// lower curves. Columns with several points keep the extremal one: min y on
/// the upper curve, max y on the lower.
pub fn split_boundary(contour: &Contour) -> Result<BoundarySplit, FitError> {
    let (upper, lower) = split_arcs(contour)?;
    Ok(BoundarySplit {
        upper: column_extreme(upper, |new, old| new < old),
        lower: column_extreme(lower, |new, old| new > old),
    })
}

fn column_extreme(mut arc: Vec<Point>, prefer: impl Fn(f64, f64) -> bool) -> Vec<Point> {
    arc.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut out: Vec<Point> = Vec::with_capacity(arc.len());
    for p in arc {
        match out.last_mut() {
            Some(last) if last.x == p.x => {
                if prefer(p.y, last.y) {
                    last.y = p.y;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

/// Ridge least-squares cubic, `θ = (XᵀX + ξI)⁻¹ XᵀY`, with x normalized to `[-1, 1]`.
pub fn fit_cubic(points: &[Point], config: &FitConfig) -> Result<PolyCoeffs, FitError> {
    config.validate()?;
    if points.len() < config.min_points {
        return Err(FitError::TooFewPoints {
            got: points.len(),
            need: config.min_points,
        });
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.x), hi.max(p.x))
        });
    if hi <= lo {
        return Err(FitError::SingularFit);
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let mut ata = [[0.0f64; 4]; 4];
    let mut aty = [0.0f64; 4];
    for p in points {
        let t = (p.x - center) / half;
        let row = [t * t * t, t * t, t, 1.0];
        for i in 0..4 {
            aty[i] += row[i] * p.y;
            for j in 0..4 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in ata.iter_mut().enumerate() {
        r[i] += config.xi;
    }
    let theta = cholesky_solve(ata, aty).ok_or(FitError::SingularFit)?;
    Ok(PolyCoeffs {
        a: theta[0],
        b: theta[1],
        c: theta[2],
        d: theta[3],
        x_center: center,
        x_half_range: half,
    })
}

/// Solves `M θ = r` for symmetric positive definite 4x4 `M`; `None` when a pivot
/// collapses relative to the largest diagonal entry.
fn cholesky_solve(m: [[f64; 4]; 4], r: [f64; 4]) -> Option<[f64; 4]> {
    let scale = (0..4).map(|i| m[i][i]).fold(0.0, f64::max);
    let mut l = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 1e-13 * scale) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = [0.0f64; 4];
    for i in 0..4 {
        let mut s = r[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut x = [0.0f64; 4];
    for i in (0..4).rev() {
        let mut s = z[i];
        for k in i + 1..4 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `|<F1, F2>| / (|F1| |F2|)`.
pub fn cosine_similarity(f1: &[f64; 3], f2: &[f64; 3]) -> Result<f64, FitError> {
    let n1 = norm3(f1);
    let n2 = norm3(f2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(FitError::UndefinedSimilarity);
    }
    let dot = f1[0] * f2[0] + f1[1] * f2[1] + f1[2] * f2[2];
    Ok((dot.abs() / (n1 * n2)).min(1.0))
}

/// Below this norm a coefficient vector counts as a flat (straight horizontal) curve.
pub const FLAT_NORM: f64 = 1e-12;

/// Cosine similarity with the flat-curve convention: two flat curves score 1,
/// one flat curve against a shaped one scores 0.
pub fn curve_similarity(f1: &[f64; 3], f2: &[f64; 3]) -> f64 {
    match (norm3(f1) < FLAT_NORM, norm3(f2) < FLAT_NORM) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => cosine_similarity(f1, f2).expect("both norms positive"),
    }
}

fn norm3(f: &[f64; 3]) -> f64 {
    (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StructureSimilarity {
    Scored {
        cs_upper: f64,
        cs_lower: f64,
        /// Mean of the two curve similarities.
        cs: f64,
    },
    /// Structure absent from both sets.
    Skipped,
}

impl StructureSimilarity {
    /// Loss contribution `1 - cs` (0 when skipped).
    pub fn term(&self) -> f64 {
        match self {
            StructureSimilarity::Scored { cs, .. } => 1.0 - cs,
            StructureSimilarity::Skipped => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsScore {
    pub per_structure: [(Structure, StructureSimilarity); 4],
    pub total: f64,
}

/// Upper/lower cubic fits of the largest component's boundary.
pub fn fit_boundary(
    mask: &crate::imgio::BinaryMask,
    config: &FitConfig,
) -> Result<(PolyCoeffs, PolyCoeffs), FitError> {
    let contours = extract_contours(mask)?;
    let split = split_boundary(&contours[0])?;
    Ok((fit_cubic(&split.upper, config)?, fit_cubic(&split.lower, config)?))
}

/// Per-scene shape-similarity score over the four structures.
pub fn ss_score(
    pred: &StructureSet,
    truth: &StructureSet,
    config: &FitConfig,
) -> Result<SsScore, FitError> {
    let mut per = Structure::ALL.map(|s| (s, StructureSimilarity::Skipped));
    for (slot, s) in per.iter_mut().zip(Structure::ALL) {
        let sim = match (pred.get(s), truth.get(s)) {
            (None, None) => StructureSimilarity::Skipped,
            (Some(p), Some(t)) => {
                let (pu, pl) = fit_boundary(p, config)?;
                let (tu, tl) = fit_boundary(t, config)?;
                let cs_upper = curve_similarity(&pu.f_vector(), &tu.f_vector());
                let cs_lower = curve_similarity(&pl.f_vector(), &tl.f_vector());
                StructureSimilarity::Scored {
                    cs_upper,
                    cs_lower,
                    cs: 0.5 * (cs_upper + cs_lower),
                }
            }
            _ => return Err(FitError::Mismatch(s)),
        };
        slot.1 = sim;
    }
    let total = per.iter().map(|(_, s)| s.term()).sum();
    Ok(SsScore {
        per_structure: per,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::BinaryMask;
    use approx::assert_abs_diff_eq;

    fn cubic_points(a: f64, b: f64, c: f64, d: f64, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let t = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                Point::new(t, ((a * t + b) * t + c) * t + d)
            })
            .collect()
    }

    fn rect_contour() -> Contour {
        let m = BinaryMask::from_fn(20, 12, |x, y| (2..16).contains(&x) && (3..9).contains(&y)).unwrap();
        extract_contours(&m).unwrap().remove(0)
    }

    #[test]
    fn exact_cubic_recovered() {
        let pts = cubic_points(2.0, 0.0, -1.0, 5.0, 9);
        let f = fit_cubic(&pts, &FitConfig { xi: 0.0, min_points: 4 }).unwrap();
        assert_abs_diff_eq!(f.a, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.b, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.c, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.d, 5.0, epsilon = 1e-9);
        assert_eq!(f.f_vector(), [f.a, f.b, f.c]);
    }

    #[test]
    fn ridge_shrinks() {
        let pts = cubic_points(2.0, 0.0, -1.0, 5.0, 9);
        let plain = fit_cubic(&pts, &FitConfig { xi: 0.0, min_points: 4 }).unwrap();
        let ridge = fit_cubic(&pts, &FitConfig { xi: 10.0, min_points: 4 }).unwrap();
        assert!(ridge.norm() < plain.norm());
    }

    #[test]
    fn noisy_fit_matches_dense_normal_equations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point> = (0..20)
            .map(|i| {
                let x = 100.0 + i as f64 * 3.5;
                let t = (x - 133.25) / 33.25;
                Point::new(x, 0.7 * t * t * t - 1.5 * t * t + 0.2 * t + 40.0 + rng.random_range(-0.3..0.3))
            })
            .collect();
        let xi = 1e-3;
        let f = fit_cubic(&pts, &FitConfig { xi, min_points: 4 }).unwrap();

        // oracle: nalgebra LU on the explicitly formed normal equations
        let (lo, hi) = (100.0, 100.0 + 19.0 * 3.5);
        let xm = nalgebra::DMatrix::from_fn(pts.len(), 4, |r, c| {
            let t = (pts[r].x - 0.5 * (lo + hi)) / (0.5 * (hi - lo));
            t.powi(3 - c as i32)
        });
        let y = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| p.y));
        let lhs = xm.transpose() * &xm + nalgebra::DMatrix::identity(4, 4) * xi;
        let theta = lhs.lu().solve(&(xm.transpose() * y)).unwrap();
        for (got, want) in [f.a, f.b, f.c, f.d].iter().zip(theta.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn singular_without_ridge() {
        let pts: Vec<Point> = [0., 0., 1., 1., 2., 2.]
            .iter()
            .enumerate()
            .map(|(i, &x)| Point::new(x, i as f64))
            .collect();
        assert_eq!(
            fit_cubic(&pts, &FitConfig { xi: 0.0, min_points: 4 }),
            Err(FitError::SingularFit)
        );
        assert!(fit_cubic(&pts, &FitConfig { xi: 1e-3, min_points: 4 }).is_ok());
    }

    #[test]
    fn too_few_points() {
        let pts = cubic_points(1., 1., 1., 1., 3);
        assert!(matches!(
            fit_cubic(&pts, &FitConfig::default()),
            Err(FitError::TooFewPoints { got: 3, need: 4 })
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine_similarity(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine_similarity(&[1., 0., 0.], &[0., 1., 0.]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine_similarity(&[1., 1., 0.], &[1., 0., 0.]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(cosine_similarity(&[0., 0., 0.], &[1., 0., 0.]), Err(FitError::UndefinedSimilarity));
        assert_eq!(cosine_similarity(&[0., 1., 0.], &[0., -1., 0.]).unwrap(), 1.0);
    }

    #[test]
    fn flat_curve_convention() {
        assert_eq!(curve_similarity(&[0.; 3], &[0.; 3]), 1.0);
        assert_eq!(curve_similarity(&[0.; 3], &[0., 1., 0.]), 0.0);
    }

    #[test]
    fn rectangle_splits_into_top_and_bottom() {
        let s = split_boundary(&rect_contour()).unwrap();
        assert!(s.upper.iter().all(|p| p.y == 3.0));
        assert!(s.lower.iter().all(|p| p.y == 8.0));
        assert_eq!(s.upper.len(), 14);
        assert_eq!(s.lower.len(), 14);
        assert!(s.upper.windows(2).all(|w| w[0].x < w[1].x));
    }

    #[test]
    fn arcs_share_cut_points_and_cover_contour() {
        let c = rect_contour();
        let (up, lo) = split_arcs(&c).unwrap();
        assert_eq!(up.first(), lo.last());
        assert_eq!(up.last(), lo.first());
        assert_eq!(up.len() + lo.len(), c.len() + 2);
    }

    #[test]
    fn circle_splits_at_horizontal_extremes() {
        let m = BinaryMask::from_fn(31, 31, |x, y| {
            let (dx, dy) = (x as f64 - 15.0, y as f64 - 15.0);
            dx * dx + dy * dy <= 100.0
        })
        .unwrap();
        let c = extract_contours(&m).unwrap().remove(0);
        let s = split_boundary(&c).unwrap();
        assert_eq!(s.upper.first().unwrap().x, 5.0);
        assert_eq!(s.upper.last().unwrap().x, 25.0);
        assert_eq!(s.lower.first().unwrap().x, 5.0);
        assert!(s.upper.iter().all(|p| p.y <= 15.0));
        assert!(s.lower.iter().all(|p| p.y >= 15.0));
    }

    #[test]
    fn narrow_and_short_contours_rejected() {
        let m = BinaryMask::from_fn(10, 20, |x, y| (4..7).contains(&x) && (2..18).contains(&y)).unwrap();
        let c = extract_contours(&m).unwrap().remove(0);
        assert!(matches!(split_boundary(&c), Err(FitError::TooNarrow { .. })));
        let tiny = BinaryMask::from_ascii("0000\n0110\n0110\n0000").unwrap();
        let c = extract_contours(&tiny).unwrap().remove(0);
        assert!(matches!(split_boundary(&c), Err(FitError::TooFewPoints { .. })));
    }

    fn blob_set(dx: i64) -> StructureSet {
        let ellipse = |cx: f64, cy: f64, rx: f64, ry: f64| {
            BinaryMask::from_fn(96, 96, move |x, y| {
                let u = (x as f64 - cx) / rx;
                let v = (y as f64 - cy) / ry;
                u * u + v * v <= 1.0
            })
            .unwrap()
            .translated(dx, 0)
        };
        StructureSet {
            flat_ilium: Some(ellipse(30.0, 20.0, 14.0, 6.0)),
            lower_limb: Some(ellipse(60.0, 30.0, 8.0, 5.0)),
            labrum: Some(ellipse(25.0, 60.0, 9.0, 9.0)),
            co_junction: None,
            ..Default::default()
        }
    }

    #[test]
    fn identical_sets_score_zero() {
        let s = blob_set(0);
        let r = ss_score(&s, &s, &FitConfig::default()).unwrap();
        assert_abs_diff_eq!(r.total, 0.0, epsilon = 1e-12);
        assert_eq!(r.per_structure[3].1, StructureSimilarity::Skipped);
    }

    #[test]
    fn horizontal_translation_scores_zero() {
        let r = ss_score(&blob_set(5), &blob_set(0), &FitConfig::default()).unwrap();
        assert_abs_diff_eq!(r.total, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn one_sided_structure_is_mismatch() {
        let a = blob_set(0);
        let mut b = blob_set(0);
        b.labrum = None;
        assert_eq!(
            ss_score(&a, &b, &FitConfig::default()),
            Err(FitError::Mismatch(Structure::Labrum))
        );
    }

    #[test]
    fn sign_flipped_parabola_is_similar() {
        let up: Vec<Point> = (-10..=10).map(|i| Point::new(i as f64, (i * i) as f64)).collect();
        let down: Vec<Point> = up.iter().map(|p| Point::new(p.x, -p.y)).collect();
        let cfg = FitConfig { xi: 0.0, min_points: 4 };
        let fu = fit_cubic(&up, &cfg).unwrap().f_vector();
        let fd = fit_cubic(&down, &cfg).unwrap().f_vector();
        assert_abs_diff_eq!(curve_similarity(&fu, &fd), 1.0, epsilon = 1e-12);
    }
}
