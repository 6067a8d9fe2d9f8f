//! PSNR versus simplex order at a fixed pattern budget.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_image, pattern_budget_k, prepare_direct, prepare_simplex, Prepared};
use crate::camera::{measure, MeasurementMode, NoiseModel, SceneImage};
use crate::error::{invalid, Result};
use crate::recon::{psnr, reconstruct, Method};
use crate::sampling::BasisOrdering;

fn default_modes() -> Vec<MeasurementMode> {
    vec![
        MeasurementMode::DirectSingle,
        MeasurementMode::SimplexSingle,
    ]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub width: usize,
    pub height: usize,
    /// Total displayed patterns `K = k (1 + 1/p)`.
    pub budget: usize,
    pub p_list: Vec<usize>,
    /// Noise levels as `sigma / y_max`.
    pub noise_levels: Vec<f64>,
    /// File paths, or `synthetic:<n>` for generated scenes.
    pub images: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<MeasurementMode>,
    #[serde(default = "default_true")]
    pub binarize: bool,
    /// Defaults to the frequency-weighted inverse, which suits binarised patterns.
    #[serde(default = "Method::frequency_weighted")]
    pub method: Method,
    #[serde(default)]
    pub ordering: BasisOrdering,
    /// Fill `wall_ms`; off by default so repeated runs give identical CSVs.
    #[serde(default)]
    pub record_timing: bool,
}

impl SweepConfig {
    /// Desk-scale defaults: 64x64, `K = 500`, five synthetic scenes, three seeds.
    pub fn desk_scale() -> Self {
        Self {
            width: 64,
            height: 64,
            budget: 500,
            p_list: vec![1, 2, 3, 5, 10, 20, 50],
            noise_levels: vec![5e-3, 5e-4],
            images: (0..5).map(|i| format!("synthetic:{i}")).collect(),
            seeds: vec![1, 2, 3],
            modes: default_modes(),
            binarize: true,
            method: Method::frequency_weighted(),
            ordering: BasisOrdering::default(),
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return invalid("resolution must be positive");
        }
        if self.budget < 2 {
            return invalid("pattern budget must be at least 2");
        }
        if self.budget - 1 > self.width * self.height {
            return invalid("pattern budget exceeds the number of DCT functions");
        }
        if self.modes.iter().any(|m| m.is_simplex()) && self.p_list.is_empty() {
            return invalid("p-list must not be empty");
        }
        for &p in &self.p_list {
            pattern_budget_k(self.budget, p)?;
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|s| s.is_nan() || *s < 0.0)
        {
            return invalid("noise levels must be a non-empty list of non-negative ratios");
        }
        if self.images.is_empty() {
            return invalid("image list must not be empty");
        }
        if self.seeds.is_empty() {
            return invalid("seed list must not be empty");
        }
        if self.modes.is_empty() {
            return invalid("mode list must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub image: String,
    pub mode: MeasurementMode,
    /// 0 for direct modes.
    pub p: usize,
    pub sigma_ratio: f64,
    pub seed: u64,
    pub k: usize,
    /// `Err` holds the reason a configuration could not be evaluated.
    pub psnr_db: std::result::Result<f64, String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str = "image,mode,p,sigma_ratio,seed,k,psnr_db,wall_ms";

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let psnr = match &r.psnr_db {
                Ok(v) => format!("{v}"),
                Err(_) => "nan".to_owned(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.image, r.mode, r.p, r.sigma_ratio, r.seed, r.k, psnr, r.wall_ms
            )?;
        }
        w.flush()
    }

    /// Mean PSNR over images and seeds for one mode and noise level, per `p`.
    pub fn mean_psnr_by_p(&self, mode: MeasurementMode, sigma_ratio: f64) -> BTreeMap<usize, f64> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            if r.mode != mode || !same_level(r.sigma_ratio, sigma_ratio) {
                continue;
            }
            if let Ok(v) = r.psnr_db {
                let e = acc.entry(r.p).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        acc.into_iter()
            .map(|(p, (s, n))| (p, s / n as f64))
            .collect()
    }
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// `p` with the highest mean PSNR at `sigma_ratio`; ties go to the smaller `p`.
pub fn find_optimal_p(
    result: &SweepResult,
    mode: MeasurementMode,
    sigma_ratio: f64,
) -> Result<usize> {
    let means = result.mean_psnr_by_p(mode, sigma_ratio);
    let mut best: Option<(usize, f64)> = None;
    for (p, m) in means {
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((p, m));
        }
    }
    match best {
        Some((p, _)) => Ok(p),
        None => invalid(format!("no {mode} results at sigma/y_max = {sigma_ratio}")),
    }
}

/// Per-job noise seed; the same for every mode and `p` so configurations
/// are compared on common random numbers.
fn job_seed(seed: u64, image: usize, level: usize) -> u64 {
    let mut z = seed
        .wrapping_add((image as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((level as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Job<'a> {
    image_idx: usize,
    mode: MeasurementMode,
    prepared: &'a Prepared,
    level_idx: usize,
    seed: u64,
}

fn run_job(job: &Job<'_>, cfg: &SweepConfig, scene: &SceneImage) -> Result<f64> {
    let prepared = job.prepared;
    let y_max = prepared.peak_reading(scene);
    let sigma = cfg.noise_levels[job.level_idx] * y_max;
    let noise = NoiseModel::gaussian(sigma, job_seed(job.seed, job.image_idx, job.level_idx));
    let record = measure(
        &prepared.patterns,
        scene,
        &noise,
        job.mode.is_complementary(),
    )?;
    let out = reconstruct(&prepared.reconstructor, &record, cfg.width, cfg.height)?;
    psnr(scene.as_slice(), out.values.as_slice())
}

/// Runs every `(image, mode, p, noise level, seed)` combination.
///
/// Pattern sets and reconstructors are built once per `(mode family, p)` and
/// shared. Jobs run on the rayon pool; rows come back in configuration order.
/// An unreadable image produces error rows instead of aborting the sweep.
pub fn run_psnr_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let need_direct = cfg.modes.iter().any(|m| !m.is_simplex());
    let need_simplex = cfg.modes.iter().any(|m| m.is_simplex());

    let direct = if need_direct {
        Some(prepare_direct(
            cfg.width,
            cfg.height,
            cfg.budget - 1,
            cfg.ordering,
            cfg.binarize,
            cfg.method,
        )?)
    } else {
        None
    };
    let simplex: Vec<(usize, Prepared)> = if need_simplex {
        cfg.p_list
            .par_iter()
            .map(|&p| {
                let k = pattern_budget_k(cfg.budget, p)?;
                let prep = prepare_simplex(
                    cfg.width,
                    cfg.height,
                    k,
                    p,
                    cfg.ordering,
                    cfg.binarize,
                    cfg.method,
                )?;
                Ok((p, prep))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let scenes: Vec<std::result::Result<SceneImage, String>> = cfg
        .images
        .iter()
        .map(|name| load_image(name, cfg.width, cfg.height).map_err(|e| e.to_string()))
        .collect();

    let mut jobs = Vec::new();
    for image_idx in 0..cfg.images.len() {
        for &mode in &cfg.modes {
            let variants: Vec<(usize, &Prepared)> = if mode.is_simplex() {
                simplex.iter().map(|(p, prep)| (*p, prep)).collect()
            } else {
                vec![(0, direct.as_ref().expect("direct patterns prepared"))]
            };
            for (_, prepared) in variants {
                for level_idx in 0..cfg.noise_levels.len() {
                    for &seed in &cfg.seeds {
                        jobs.push(Job {
                            image_idx,
                            mode,
                            prepared,
                            level_idx,
                            seed,
                        });
                    }
                }
            }
        }
    }

    let rows = jobs
        .par_iter()
        .map(|job| {
            let start = Instant::now();
            let psnr_db = match &scenes[job.image_idx] {
                Ok(scene) => run_job(job, cfg, scene).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            if let Err(e) = &psnr_db {
                log::warn!("{} {}: {e}", cfg.images[job.image_idx], job.mode);
            }
            let wall_ms = if cfg.record_timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            SweepRow {
                image: cfg.images[job.image_idx].clone(),
                mode: job.mode,
                p: job.prepared.patterns.p().unwrap_or(0),
                sigma_ratio: cfg.noise_levels[job.level_idx],
                seed: job.seed,
                k: job.prepared.patterns.k(),
                psnr_db,
                wall_ms,
            }
        })
        .collect();
    Ok(SweepResult { rows })
}
