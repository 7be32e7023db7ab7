//! Evaluation statistics: overlap and boundary metrics, landmark and angle
//! errors, batch summaries, Pearson correlation and the pooled two-sample t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::imgio::{BinaryMask, Landmark, LandmarkPoint, SceneRecord, Structure};
use crate::measure::{classify, measure_scene, GrafType, MeasureConfig, MeasureError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("{0}")]
    Dimension(String),
    #[error("distance to an empty mask is undefined")]
    EmptyMask,
    #[error("no records to summarize")]
    EmptyRecords,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("non-finite sample value")]
    NonFinite,
    #[error("scene has no ground truth")]
    NoGroundTruth,
    #[error("ground truth: {0}")]
    Truth(MeasureError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

fn same_dims(x: &BinaryMask, y: &BinaryMask) -> Result<(), MetricsError> {
    x.ensure_same_dims(y)
        .map_err(|e| MetricsError::Dimension(e.to_string()))
}

/// Dice coefficient. Two empty masks agree perfectly (1.0).
pub fn dsc(x: &BinaryMask, y: &BinaryMask) -> Result<f64, MetricsError> {
    same_dims(x, y)?;
    let (mut nx, mut ny, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in x.bits().iter().zip(y.bits()) {
        nx += a as usize;
        ny += b as usize;
        both += (a && b) as usize;
    }
    if nx + ny == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (nx + ny) as f64)
}

/// Exact squared Euclidean distance transform (Felzenszwalb–Huttenlocher):
/// for every pixel, the squared distance to the nearest foreground pixel.
/// Values are integers stored in `f64`; `f64::INFINITY` when the mask is empty.
pub fn squared_edt(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = mask.dims();
    let mut cols = vec![f64::INFINITY; w * h];
    let mut f = vec![0.0; h.max(w)];
    let mut d = vec![0.0; h.max(w)];
    for x in 0..w {
        for y in 0..h {
            f[y] = if mask.get(x, y) { 0.0 } else { f64::INFINITY };
        }
        edt_1d(&f[..h], &mut d[..h]);
        for y in 0..h {
            cols[y * w + x] = d[y];
        }
    }
    let mut out = vec![f64::INFINITY; w * h];
    for y in 0..h {
        f[..w].copy_from_slice(&cols[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut d[..w]);
        out[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    out
}

/// Lower envelope of parabolas rooted at the finite samples of `f`.
fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        while let Some(&p) = v.last() {
            let fp = f[p] + (p * p) as f64;
            let s = (fq - fp) / (2.0 * (q - p) as f64);
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                z.push(s);
                break;
            }
        }
        if v.is_empty() {
            z.clear();
            z.push(f64::NEG_INFINITY);
        }
        v.push(q);
    }
    if v.is_empty() {
        d.fill(f64::INFINITY);
        return;
    }
    z.push(f64::INFINITY);
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

fn directed_sq(from: &BinaryMask, to_edt: &[f64]) -> f64 {
    let w = from.width();
    from.foreground()
        .map(|(x, y)| to_edt[y * w + x])
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between the foreground pixel sets, exact.
pub fn hausdorff(x: &BinaryMask, y: &BinaryMask) -> Result<f64, MetricsError> {
    same_dims(x, y)?;
    if x.is_blank() || y.is_blank() {
        return Err(MetricsError::EmptyMask);
    }
    let ex = squared_edt(x);
    let ey = squared_edt(y);
    Ok(directed_sq(x, &ey).max(directed_sq(y, &ex)).sqrt())
}

pub fn landmark_error(pred: &LandmarkPoint, truth: &LandmarkPoint) -> f64 {
    (pred.x - truth.x).hypot(pred.y - truth.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleErrors {
    pub alpha_error: f64,
    pub beta_error: f64,
}

pub fn angle_errors(pred_alpha: f64, pred_beta: f64, true_alpha: f64, true_beta: f64) -> AngleErrors {
    AngleErrors {
        alpha_error: (pred_alpha - true_alpha).abs(),
        beta_error: (pred_beta - true_beta).abs(),
    }
}

/// Per-scene evaluation. Structure metrics are `None` when the structure is
/// absent from both prediction and truth (or, for HD, from either side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scene_id: String,
    pub dsc: [Option<f64>; 4],
    pub hd: [Option<f64>; 4],
    pub landmark_dist: [Option<f64>; 3],
    pub alpha_pred: f64,
    pub alpha_true: f64,
    pub beta_pred: f64,
    pub beta_true: f64,
    pub alpha_error: f64,
    pub beta_error: f64,
    pub predicted_type: GrafType,
    pub true_type: GrafType,
}

impl EvalRecord {
    pub fn dsc_of(&self, s: Structure) -> Option<f64> {
        self.dsc[s as usize]
    }

    pub fn hd_of(&self, s: Structure) -> Option<f64> {
        self.hd[s as usize]
    }

    pub fn landmark_of(&self, l: Landmark) -> Option<f64> {
        self.landmark_dist[l as usize]
    }
}

fn non_blank(m: Option<&BinaryMask>) -> Option<&BinaryMask> {
    m.filter(|m| !m.is_blank())
}

/// Measures the prediction and compares it with the ground truth. Reference
/// angles come from the manifest when given, otherwise from measuring the
/// ground-truth masks and landmarks.
pub fn evaluate_scene(record: &SceneRecord, config: &MeasureConfig) -> Result<EvalRecord, MetricsError> {
    let gt = record.ground_truth.as_ref().ok_or(MetricsError::NoGroundTruth)?;
    let pred = measure_scene(&record.structures, &record.predicted_landmarks, config)?;
    let (alpha_true, beta_true) = match (gt.alpha, gt.beta) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let r = measure_scene(&gt.structures, &gt.landmarks, config).map_err(MetricsError::Truth)?;
            (a.unwrap_or(r.alpha), b.unwrap_or(r.beta))
        }
    };
    let mut dsc_v = [None; 4];
    let mut hd_v = [None; 4];
    for (i, s) in Structure::ALL.into_iter().enumerate() {
        let (p, t) = (non_blank(record.structures.get(s)), non_blank(gt.structures.get(s)));
        dsc_v[i] = match (p, t) {
            (None, None) => None,
            (Some(p), Some(t)) => Some(dsc(p, t)?),
            _ => Some(0.0),
        };
        if let (Some(p), Some(t)) = (p, t) {
            hd_v[i] = Some(hausdorff(p, t)?);
        }
    }
    let landmark_dist = Landmark::ALL.map(|l| {
        gt.landmarks
            .get(l)
            .map(|t| landmark_error(&pred.landmarks_used.get(l), &t))
    });
    let errs = angle_errors(pred.alpha, pred.beta, alpha_true, beta_true);
    Ok(EvalRecord {
        scene_id: record.scene_id.clone(),
        dsc: dsc_v,
        hd: hd_v,
        landmark_dist,
        alpha_pred: pred.alpha,
        alpha_true,
        beta_pred: pred.beta,
        beta_true,
        alpha_error: errs.alpha_error,
        beta_error: errs.beta_error,
        predicted_type: pred.graf_type,
        true_type: classify(alpha_true, config.graf_cutoff_deg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdMode {
    /// Divide by n.
    #[default]
    Population,
    /// Divide by n − 1.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub success_deg: f64,
    pub poor_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            success_deg: 5.0,
            poor_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and standard deviation; `None` for an empty slice. A single sample in
/// sample mode reports std 0.
pub fn mean_std(xs: &[f64], mode: StdMode) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let div = match mode {
        StdMode::Population => n as f64,
        StdMode::Sample => (n.max(2) - 1) as f64,
    };
    Some(MeanStd {
        mean,
        std: (ss / div).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Pooled-variance (Student) two-sample t-test with a two-sided p-value.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<TTest, MetricsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricsError::TooFewSamples { need: 2, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
    }
    let df = a.len() + b.len() - 2;
    let ma = mean_std(a, StdMode::Sample).unwrap();
    let mb = mean_std(b, StdMode::Sample).unwrap();
    let pooled = ((a.len() - 1) as f64 * ma.std.powi(2) + (b.len() - 1) as f64 * mb.std.powi(2))
        / df as f64;
    let diff = ma.mean - mb.mean;
    if pooled == 0.0 {
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: f64::INFINITY.copysign(diff),
                p: 0.0,
                df,
            }
        });
    }
    let se = (pooled * (1.0 / a.len() as f64 + 1.0 / b.len() as f64)).sqrt();
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 2");
    // lower tail at -|t| avoids cancellation in 1 - cdf
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, p, df })
}

/// Pearson correlation; `None` for mismatched or too-short vectors or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Empirical CDF of absolute errors: `(error, fraction of samples <= error)`,
/// one entry per sample in ascending order.
pub fn error_cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &e)| (e, (i + 1) as f64 / n))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Misclassification {
    pub overall: f64,
    /// True type II measured as type I, over all records.
    pub false_negative: f64,
    /// True type I measured as type II, over all records.
    pub false_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSummary {
    pub error: MeanStd,
    pub success_rate: f64,
    pub poor_rate: f64,
    pub cdf: Vec<(f64, f64)>,
    pub pearson: Option<f64>,
    /// Predicted vs. true angle samples.
    pub t_test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    pub alpha: AngleSummary,
    pub beta: AngleSummary,
    pub dsc: [Option<MeanStd>; 4],
    pub hd: [Option<MeanStd>; 4],
    pub landmark: [Option<MeanStd>; 3],
    pub misclassification: Misclassification,
    pub std_mode: StdMode,
}

fn rate(count: usize, n: usize) -> f64 {
    count as f64 / n as f64
}

fn angle_summary(
    errors: &[f64],
    pred: &[f64],
    truth: &[f64],
    th: &Thresholds,
    mode: StdMode,
) -> AngleSummary {
    let n = errors.len();
    AngleSummary {
        error: mean_std(errors, mode).expect("non-empty"),
        success_rate: rate(errors.iter().filter(|&&e| e < th.success_deg).count(), n),
        poor_rate: rate(errors.iter().filter(|&&e| e > th.poor_deg).count(), n),
        cdf: error_cdf(errors),
        pearson: pearson(pred, truth),
        t_test: two_sample_t(pred, truth).ok(),
    }
}

pub fn summarize(
    records: &[EvalRecord],
    thresholds: &Thresholds,
    mode: StdMode,
) -> Result<EvalSummary, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let n = records.len();
    let col = |f: &dyn Fn(&EvalRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let alpha = angle_summary(
        &col(&|r| r.alpha_error),
        &col(&|r| r.alpha_pred),
        &col(&|r| r.alpha_true),
        thresholds,
        mode,
    );
    let beta = angle_summary(
        &col(&|r| r.beta_error),
        &col(&|r| r.beta_pred),
        &col(&|r| r.beta_true),
        thresholds,
        mode,
    );
    let present = |f: &dyn Fn(&EvalRecord) -> Option<f64>| {
        mean_std(&records.iter().filter_map(f).collect::<Vec<_>>(), mode)
    };
    let dsc = Structure::ALL.map(|s| present(&|r| r.dsc_of(s)));
    let hd = Structure::ALL.map(|s| present(&|r| r.hd_of(s)));
    let landmark = Landmark::ALL.map(|l| present(&|r| r.landmark_of(l)));

    let fneg = records
        .iter()
        .filter(|r| r.true_type == GrafType::TypeII && r.predicted_type == GrafType::TypeI)
        .count();
    let fpos = records
        .iter()
        .filter(|r| r.true_type == GrafType::TypeI && r.predicted_type == GrafType::TypeII)
        .count();
    Ok(EvalSummary {
        n,
        alpha,
        beta,
        dsc,
        hd,
        landmark,
        misclassification: Misclassification {
            overall: rate(fneg + fpos, n),
            false_negative: rate(fneg, n),
            false_positive: rate(fpos, n),
        },
        std_mode: mode,
    })
}
