//! Desk-scale versions of the simplex-coding studies: PSNR versus `p` across
//! noise levels, and dynamic scenes under drifting ambient bias.

mod dynamic;
mod scenes;
mod sweep;

use crate::camera::SceneImage;
use crate::error::{invalid, Result};
use crate::image_io::load_scene;
use crate::recon::{Method, Reconstructor};
use crate::sampling::{
    binarize_error_diffusion, generate_dct_basis, to_direct_dmd, to_simplex_dmd, BasisOrdering,
    PatternSet, SamplingBasisSpec,
};

pub use dynamic::{
    run_dynamic_scene, DynamicConfig, DynamicResult, FrameResult, DYNAMIC_CSV_HEADER,
};
pub use scenes::{dynamic_frames, synthetic_scene};
pub use sweep::{find_optimal_p, run_psnr_sweep, SweepConfig, SweepResult, SweepRow, CSV_HEADER};

/// Signed measurements `k` that fit a budget of `K` displayed patterns:
/// `round(K p / (p + 1))` rounded down to a multiple of `p`.
pub fn pattern_budget_k(budget: usize, p: usize) -> Result<usize> {
    if p == 0 {
        return invalid("simplex order must be positive");
    }
    let k = ((budget * p) as f64 / (p + 1) as f64).round() as usize;
    let k = k / p * p;
    if k == 0 {
        return invalid(format!(
            "budget {budget} cannot hold a single bundle for p = {p}"
        ));
    }
    Ok(k)
}

/// Patterns ready for display plus their reconstructor.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub patterns: PatternSet,
    pub reconstructor: Reconstructor,
}

impl Prepared {
    /// Largest noise-free detector reading over the pattern set.
    pub fn peak_reading(&self, scene: &SceneImage) -> f64 {
        (self.patterns.matrix() * scene.pixels()).max()
    }
}

fn dct(width: usize, height: usize, k: usize, ordering: BasisOrdering) -> Result<PatternSet> {
    generate_dct_basis(&SamplingBasisSpec {
        width,
        height,
        count: k,
        ordering,
    })
}

fn finish(ps: PatternSet, binarize: bool, method: Method) -> Result<Prepared> {
    let patterns = if binarize {
        binarize_error_diffusion(&ps)?
    } else {
        ps
    };
    let reconstructor = Reconstructor::for_patterns(&patterns, method)?;
    Ok(Prepared {
        patterns,
        reconstructor,
    })
}

pub fn prepare_direct(
    width: usize,
    height: usize,
    k: usize,
    ordering: BasisOrdering,
    binarize: bool,
    method: Method,
) -> Result<Prepared> {
    finish(
        to_direct_dmd(&dct(width, height, k, ordering)?)?,
        binarize,
        method,
    )
}

pub fn prepare_simplex(
    width: usize,
    height: usize,
    k: usize,
    p: usize,
    ordering: BasisOrdering,
    binarize: bool,
    method: Method,
) -> Result<Prepared> {
    finish(
        to_simplex_dmd(&dct(width, height, k, ordering)?, p)?,
        binarize,
        method,
    )
}

/// Resolves `synthetic:<n>` names or loads an image file.
pub fn load_image(name: &str, width: usize, height: usize) -> Result<SceneImage> {
    match name.strip_prefix("synthetic:") {
        Some(idx) => match idx.parse::<u64>() {
            Ok(i) => Ok(synthetic_scene(i, width, height)),
            Err(_) => invalid(format!("bad synthetic image index in '{name}'")),
        },
        None => load_scene(name, width, height),
    }
}
