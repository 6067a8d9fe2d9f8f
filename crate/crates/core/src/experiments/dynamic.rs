//! Frame sequences measured under a time-varying ambient bias.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pattern_budget_k, prepare_direct, prepare_simplex, Prepared};
use crate::camera::{measure, BiasTrajectory, NoiseModel, SceneImage};
use crate::error::{invalid, Error, Result};
use crate::image_io::save_pgm;
use crate::recon::{psnr, reconstruct, Method};
use crate::sampling::BasisOrdering;

fn default_true() -> bool {
    true
}

/// Bias amplitudes and `sigma` are in units of `y_ref`, the largest total
/// scene intensity over the sequence (the all-ones detector reading).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicConfig {
    pub budget: usize,
    pub p: usize,
    #[serde(default)]
    pub sigma_ratio: f64,
    pub bias: BiasTrajectory,
    /// Second-detector bias; `None` shares `bias`.
    #[serde(default)]
    pub bias_b: Option<BiasTrajectory>,
    #[serde(default = "default_true")]
    pub binarize: bool,
    /// Defaults to the frequency-weighted inverse, which suits binarised patterns.
    #[serde(default = "Method::frequency_weighted")]
    pub method: Method,
    #[serde(default)]
    pub ordering: BasisOrdering,
    #[serde(default)]
    pub seed: u64,
}

impl DynamicConfig {
    /// Sinusoidal ambient light with a 30% weaker copy on detector B.
    pub fn desk_scale() -> Self {
        let period = 400.0;
        Self {
            budget: 500,
            p: 10,
            sigma_ratio: 1e-4,
            bias: BiasTrajectory::Sinusoidal {
                amplitude: 0.05,
                period,
                phase: 0.0,
            },
            bias_b: Some(BiasTrajectory::Sinusoidal {
                amplitude: 0.035,
                period,
                phase: 0.0,
            }),
            binarize: true,
            method: Method::frequency_weighted(),
            ordering: BasisOrdering::default(),
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 2 {
            return invalid("pattern budget must be at least 2");
        }
        pattern_budget_k(self.budget, self.p)?;
        if !(self.sigma_ratio >= 0.0 && self.sigma_ratio.is_finite()) {
            return invalid("sigma ratio must be finite and >= 0");
        }
        for b in std::iter::once(&self.bias).chain(&self.bias_b) {
            b.validate()?;
            if let BiasTrajectory::Sinusoidal { period, .. } = *b {
                if period <= (self.p + 1) as f64 {
                    return invalid(format!(
                        "bias period {period} must exceed one bundle of {} patterns",
                        self.p + 1
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult {
    pub frame: usize,
    pub direct_psnr: f64,
    pub simplex_psnr: f64,
}

impl FrameResult {
    pub fn margin(&self) -> f64 {
        self.simplex_psnr - self.direct_psnr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicResult {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<FrameResult>,
    pub reconstructions: Vec<FramePair>,
}

/// Direct and simplex reconstructions of one frame.
pub type FramePair = (Vec<f64>, Vec<f64>);

pub const DYNAMIC_CSV_HEADER: &str = "frame,direct_psnr_db,simplex_psnr_db";

impl DynamicResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{DYNAMIC_CSV_HEADER}")?;
        for f in &self.frames {
            writeln!(w, "{},{},{}", f.frame, f.direct_psnr, f.simplex_psnr)?;
        }
        w.flush()
    }

    pub fn median_margin(&self) -> f64 {
        let mut m: Vec<f64> = self.frames.iter().map(FrameResult::margin).collect();
        m.sort_by(f64::total_cmp);
        match m.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => m[n / 2],
            n => 0.5 * (m[n / 2 - 1] + m[n / 2]),
        }
    }

    /// Writes `frame_NNN_direct.pgm` and `frame_NNN_simplex.pgm` into `dir`.
    pub fn export_frames(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, (d, s)) in self.reconstructions.iter().enumerate() {
            save_pgm(
                dir.join(format!("frame_{i:03}_direct.pgm")),
                d,
                self.width,
                self.height,
            )?;
            save_pgm(
                dir.join(format!("frame_{i:03}_simplex.pgm")),
                s,
                self.width,
                self.height,
            )?;
        }
        Ok(())
    }
}

fn run_frame(
    prepared: &Prepared,
    scene: &SceneImage,
    frame: usize,
    cfg: &DynamicConfig,
    y_ref: f64,
) -> Result<(f64, Vec<f64>)> {
    let count = prepared.patterns.count() as u64;
    let noise = NoiseModel {
        sigma: cfg.sigma_ratio * y_ref,
        mu: 0.0,
        bias: cfg.bias.scaled(y_ref),
        bias_b: cfg.bias_b.as_ref().map(|b| b.scaled(y_ref)),
        seed: cfg.seed.wrapping_add(frame as u64),
        start_index: frame as u64 * count,
    };
    let record = measure(&prepared.patterns, scene, &noise, true)?;
    let out = reconstruct(
        &prepared.reconstructor,
        &record,
        scene.width(),
        scene.height(),
    )?;
    let values = out.values.as_slice().to_vec();
    Ok((psnr(scene.as_slice(), &values)?, values))
}

/// Measures each frame with complementary detectors, once with direct
/// mapping and once with simplex coding at the same pattern budget.
///
/// Frames are displayed back to back, so the bias trajectory continues from
/// one frame into the next.
pub fn run_dynamic_scene(frames: &[SceneImage], cfg: &DynamicConfig) -> Result<DynamicResult> {
    cfg.validate()?;
    if frames.len() < 2 {
        return invalid("a dynamic scene needs at least two frames");
    }
    let (width, height) = (frames[0].width(), frames[0].height());
    if frames
        .iter()
        .any(|f| f.width() != width || f.height() != height)
    {
        return invalid("all frames must share one resolution");
    }
    if cfg.budget - 1 > width * height {
        return invalid("pattern budget exceeds the number of DCT functions");
    }
    let k = pattern_budget_k(cfg.budget, cfg.p)?;
    let direct = prepare_direct(
        width,
        height,
        cfg.budget - 1,
        cfg.ordering,
        cfg.binarize,
        cfg.method,
    )?;
    let simplex = prepare_simplex(
        width,
        height,
        k,
        cfg.p,
        cfg.ordering,
        cfg.binarize,
        cfg.method,
    )?;
    let y_ref = frames.iter().map(|f| f.pixels().sum()).fold(0.0, f64::max);

    let per_frame: Vec<(FrameResult, FramePair)> = frames
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let (dp, dv) = run_frame(&direct, scene, i, cfg, y_ref)?;
            let (sp, sv) = run_frame(&simplex, scene, i, cfg, y_ref)?;
            Ok((
                FrameResult {
                    frame: i,
                    direct_psnr: dp,
                    simplex_psnr: sp,
                },
                (dv, sv),
            ))
        })
        .collect::<Result<_>>()?;
    let (frames, reconstructions) = per_frame.into_iter().unzip();
    Ok(DynamicResult {
        width,
        height,
        frames,
        reconstructions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::dynamic_frames;

    fn small(bias: BiasTrajectory, bias_b: Option<BiasTrajectory>) -> DynamicConfig {
        DynamicConfig {
            budget: 120,
            p: 3,
            sigma_ratio: 0.0,
            bias,
            bias_b,
            binarize: false,
            method: Method::default(),
            ordering: BasisOrdering::default(),
            seed: 7,
        }
    }

    #[test]
    fn bundle_constant_bias_leaves_simplex_untouched() {
        let frames = dynamic_frames(2, 3, 16, 16);
        let clean = run_dynamic_scene(&frames, &small(BiasTrajectory::None, None)).unwrap();
        let stepped = small(
            BiasTrajectory::BlockSteps {
                block: 4,
                step_std: 0.2,
            },
            Some(BiasTrajectory::BlockSteps {
                block: 4,
                step_std: 0.1,
            }),
        );
        let biased = run_dynamic_scene(&frames, &stepped).unwrap();
        for ((_, a), (_, b)) in clean.reconstructions.iter().zip(&biased.reconstructions) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_shared_bias_matches_stationary() {
        let frames = dynamic_frames(2, 2, 16, 16);
        let clean = run_dynamic_scene(&frames, &small(BiasTrajectory::None, None)).unwrap();
        let biased = run_dynamic_scene(
            &frames,
            &small(BiasTrajectory::Constant { value: 0.3 }, None),
        )
        .unwrap();
        for (a, b) in clean.frames.iter().zip(&biased.frames) {
            assert!((a.direct_psnr - b.direct_psnr).abs() < 0.1);
            assert!((a.simplex_psnr - b.simplex_psnr).abs() < 0.1);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let frames = dynamic_frames(2, 1, 8, 8);
        assert!(run_dynamic_scene(&frames, &small(BiasTrajectory::None, None)).is_err());
        let mut cfg = small(BiasTrajectory::None, None);
        cfg.bias = BiasTrajectory::Sinusoidal {
            amplitude: 1.0,
            period: 3.0,
            phase: 0.0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exports_and_csv() {
        let frames = dynamic_frames(1, 2, 8, 8);
        let mut cfg = small(BiasTrajectory::None, None);
        cfg.budget = 40;
        let res = run_dynamic_scene(&frames, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        res.export_frames(dir.path()).unwrap();
        assert!(dir.path().join("frame_001_simplex.pgm").exists());
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
