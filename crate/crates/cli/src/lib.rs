//! Batch commands behind the `hipgraf` binary.
//!
//! Every command reads a line-delimited JSON manifest, processes scenes on a
//! worker pool and writes its outputs in input order, so results do not depend
//! on the number of workers.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;

use hipgraf_core::imgio::report::{
    loss_totals, render_loss_totals, render_summary, write_cdf, write_eval_records, write_losses,
    write_measurements,
};
use hipgraf_core::imgio::{read_manifest_lines, resolve_record, write_manifest, ManifestRecord};
use hipgraf_core::measure::scene_losses;
use hipgraf_core::metrics::{evaluate_scene, summarize, MetricsError};
use hipgraf_core::phantom::{
    batch_specs, generate_with_id, manifest_record, AngleRange, MaskFormat, NoiseSpec,
};
use hipgraf_core::{
    measure_scene, EvalSummary, FitConfig, LossWeights, MeasureConfig, PhantomSpec, SceneRecord,
    StdMode, Structure, Thresholds,
};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub fit: FitConfig,
    pub weights: LossWeights,
    pub thresholds: Thresholds,
    pub graf_cutoff_deg: f64,
    pub workers: usize,
    pub std_mode: StdMode,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            out: out.into(),
            fit: FitConfig::default(),
            weights: LossWeights::default(),
            thresholds: Thresholds::default(),
            graf_cutoff_deg: hipgraf_core::measure::GRAF_CUTOFF_DEG,
            workers: 1,
            std_mode: StdMode::Population,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        let t = &self.thresholds;
        ensure!(
            t.success_deg > 0.0 && t.poor_deg > 0.0 && self.graf_cutoff_deg > 0.0,
            "thresholds must be positive"
        );
        ensure!(self.workers >= 1, "--workers must be at least 1");
        let w = &self.weights;
        for v in [w.lambda1, w.lambda2, w.lambda3, w.lambda4] {
            ensure!(v.is_finite() && v >= 0.0, "loss weights must be finite and non-negative");
        }
        Ok(())
    }

    fn measure_config(&self) -> MeasureConfig {
        MeasureConfig {
            graf_cutoff_deg: self.graf_cutoff_deg,
            ..MeasureConfig::default()
        }
    }
}

/// Scenes processed and how many of them failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub scenes: usize,
    pub failed: usize,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 {
            0
        } else {
            1
        }
    }
}

/// A manifest line that parsed as JSON; decoding masks may still fail per scene.
struct Entry {
    id: String,
    decoded: std::result::Result<SceneRecord, String>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("failed to start worker pool")
}

fn load_entries(path: &Path, workers: usize) -> Result<Vec<Entry>> {
    let lines = read_manifest_lines(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut raws = Vec::with_capacity(lines.len());
    let mut seen = HashSet::new();
    for (line, text) in &lines {
        let raw: ManifestRecord = serde_json::from_str(text)
            .with_context(|| format!("{}: line {line} is not valid JSON", path.display()))?;
        if let Some(id) = &raw.scene_id {
            ensure!(seen.insert(id.clone()), "line {line}: duplicate scene_id {id:?}");
        }
        raws.push((*line, raw));
    }
    let entries = pool(workers)?.install(|| {
        raws.par_iter()
            .map(|(line, raw)| Entry {
                id: raw.scene_id.clone().unwrap_or_else(|| format!("line-{line}")),
                decoded: resolve_record(*line, raw, base).map_err(|e| e.to_string()),
            })
            .collect()
    });
    Ok(entries)
}

fn create_out(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Writes `measurements.csv`: one row per scene with angles, type, plane
/// check, fused landmarks and warnings.
pub fn cmd_measure(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let entries = load_entries(&cfg.manifest, cfg.workers)?;
    let mc = cfg.measure_config();
    let rows: Vec<_> = pool(cfg.workers)?.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let r = e.decoded.as_ref().map_err(Clone::clone).and_then(|rec| {
                    measure_scene(&rec.structures, &rec.predicted_landmarks, &mc)
                        .map_err(|err| err.to_string())
                });
                (e.id.clone(), r)
            })
            .collect()
    });
    prepare_out(&cfg.out)?;
    write_measurements(create_out(&cfg.out, "measurements.csv")?, &rows)?;
    let failed = rows.iter().filter(|(_, r)| r.is_err()).count();
    Ok(Outcome {
        scenes: rows.len(),
        failed,
    })
}

#[derive(Debug, Clone)]
pub struct EvaluateResult {
    pub outcome: Outcome,
    pub summary: EvalSummary,
    /// Scenes without ground truth.
    pub skipped: Vec<String>,
    /// Scenes that failed, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Writes `eval_records.csv`, `report.txt`, `cdf_alpha.csv` and `cdf_beta.csv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateResult> {
    cfg.validate()?;
    let entries = load_entries(&cfg.manifest, cfg.workers)?;
    let mc = cfg.measure_config();
    let results: Vec<_> = pool(cfg.workers)?.install(|| {
        entries
            .par_iter()
            .map(|e| match &e.decoded {
                Err(msg) => Err(Some(msg.clone())),
                Ok(rec) => match evaluate_scene(rec, &mc) {
                    Ok(r) => Ok(r),
                    Err(MetricsError::NoGroundTruth) => Err(None),
                    Err(err) => Err(Some(err.to_string())),
                },
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut failures = Vec::new();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(None) => skipped.push(e.id.clone()),
            Err(Some(msg)) => failures.push((e.id.clone(), msg)),
        }
    }
    if records.is_empty() {
        bail!(
            "empty evaluation: no scene could be evaluated ({} skipped without ground truth, {} failed)",
            skipped.len(),
            failures.len()
        );
    }
    let summary = summarize(&records, &cfg.thresholds, cfg.std_mode)?;

    prepare_out(&cfg.out)?;
    write_eval_records(create_out(&cfg.out, "eval_records.csv")?, &records)?;
    write_cdf(create_out(&cfg.out, "cdf_alpha.csv")?, &summary.alpha.cdf)?;
    write_cdf(create_out(&cfg.out, "cdf_beta.csv")?, &summary.beta.cdf)?;
    let mut report = render_summary(&summary);
    for id in &skipped {
        report.push_str(&format!("skipped {id}: no ground truth\n"));
    }
    for (id, msg) in &failures {
        report.push_str(&format!("failed {id}: {msg}\n"));
    }
    fs::write(cfg.out.join("report.txt"), report)?;
    for id in &skipped {
        eprintln!("warning: {id}: no ground truth, skipped");
    }

    Ok(EvaluateResult {
        outcome: Outcome {
            scenes: entries.len(),
            failed: failures.len(),
        },
        summary,
        skipped,
        failures,
    })
}

/// Writes `losses.csv` (per scene plus a TOTAL row) and `losses.txt`.
pub fn cmd_losses(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let entries = load_entries(&cfg.manifest, cfg.workers)?;
    let rows: Vec<_> = pool(cfg.workers)?.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let r = e.decoded.as_ref().map_err(Clone::clone).and_then(|rec| {
                    scene_losses(rec, &cfg.fit, &cfg.weights).map_err(|err| err.to_string())
                });
                (e.id.clone(), r)
            })
            .collect::<Vec<_>>()
    });
    prepare_out(&cfg.out)?;
    write_losses(create_out(&cfg.out, "losses.csv")?, &rows)?;
    let ok: Vec<_> = rows.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
    fs::write(cfg.out.join("losses.txt"), render_loss_totals(&loss_totals(&ok)))?;
    Ok(Outcome {
        scenes: rows.len(),
        failed: rows.len() - ok.len(),
    })
}

#[derive(Debug, Clone)]
pub struct PhantomArgs {
    pub out: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub range: AngleRange,
    pub base: PhantomSpec,
    pub format: MaskFormat,
    pub workers: usize,
}

impl PhantomArgs {
    pub fn new(out: impl Into<PathBuf>, n: usize, seed: u64) -> Self {
        Self {
            out: out.into(),
            n,
            seed,
            range: AngleRange::default(),
            base: PhantomSpec::default(),
            format: MaskFormat::Rle,
            workers: 1,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.base.noise = noise;
        self
    }
}

/// Writes `manifest.jsonl`, `truth.csv` and (PNG format) `masks/`; returns the
/// ground-truth angle table.
pub fn cmd_phantom(args: &PhantomArgs) -> Result<String> {
    ensure!(args.n >= 1, "--n must be at least 1");
    ensure!(args.workers >= 1, "--workers must be at least 1");
    let specs = batch_specs(args.n, &args.base, &args.range, args.seed);
    prepare_out(&args.out)?;
    let records: Vec<ManifestRecord> = pool(args.workers)?.install(|| {
        specs
            .par_iter()
            .map(|(id, spec)| -> Result<ManifestRecord> {
                let scene = generate_with_id(id.clone(), spec)?;
                Ok(manifest_record(&scene, args.format, &args.out)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_manifest(&args.out.join("manifest.jsonl"), &records)?;

    let mut table = String::from("scene_id,alpha_true,beta_true,seed\n");
    for ((id, spec), rec) in specs.iter().zip(&records) {
        let gt = rec.gt.as_ref().expect("phantoms carry ground truth");
        table.push_str(&format!(
            "{id},{:.6},{:.6},{}\n",
            gt.alpha.unwrap_or(f64::NAN),
            gt.beta.unwrap_or(f64::NAN),
            spec.seed
        ));
    }
    fs::write(args.out.join("truth.csv"), &table)?;
    Ok(table)
}

/// Names accepted by `--dropout-structures`.
pub fn parse_structure(name: &str) -> Result<Structure> {
    Structure::ALL
        .into_iter()
        .find(|s| s.name() == name || s.key() == name)
        .with_context(|| format!("unknown structure {name:?}"))
}
