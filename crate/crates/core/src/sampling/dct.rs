use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Order in which 2-D DCT basis functions are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisOrdering {
    /// Sorted by `max(u, v)`, then `(u, v)` lexicographically.
    #[default]
    LowFrequencyFirst,
    /// JPEG-style anti-diagonal traversal.
    ZigZag,
}

/// Which DCT sampling functions to generate and at what resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingBasisSpec {
    pub width: usize,
    pub height: usize,
    pub count: usize,
    #[serde(default)]
    pub ordering: BasisOrdering,
}

impl SamplingBasisSpec {
    pub fn new(width: usize, height: usize, count: usize) -> Self {
        Self {
            width,
            height,
            count,
            ordering: BasisOrdering::LowFrequencyFirst,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return invalid(format!(
                "pattern resolution must be positive, got {}x{}",
                self.width, self.height
            ));
        }
        if self.count == 0 {
            return invalid("basis count must be positive");
        }
        if self.count > self.pixels() {
            return invalid(format!(
                "basis count {} exceeds pixel count {}",
                self.count,
                self.pixels()
            ));
        }
        Ok(())
    }
}

/// Frequency pairs `(u, v)` in selection order; `u` is horizontal.
pub fn frequency_order(
    width: usize,
    height: usize,
    ordering: BasisOrdering,
) -> Vec<(usize, usize)> {
    let mut freqs: Vec<(usize, usize)> = (0..width)
        .flat_map(|u| (0..height).map(move |v| (u, v)))
        .collect();
    match ordering {
        BasisOrdering::LowFrequencyFirst => freqs.sort_by_key(|&(u, v)| (u.max(v), u, v)),
        BasisOrdering::ZigZag => freqs.sort_by_key(|&(u, v)| {
            let diag = u + v;
            let along = if diag % 2 == 0 {
                u as isize
            } else {
                -(u as isize)
            };
            (diag, along)
        }),
    }
    freqs
}

/// Orthonormal 1-D DCT-II vector of length `len` at frequency `f`.
fn dct_vector(len: usize, f: usize) -> Vec<f64> {
    let norm = if f == 0 {
        (1.0 / len as f64).sqrt()
    } else {
        (2.0 / len as f64).sqrt()
    };
    (0..len)
        .map(|x| norm * (PI * (2 * x + 1) as f64 * f as f64 / (2 * len) as f64).cos())
        .collect()
}

/// `count x (width * height)` matrix of flattened basis functions, pixel
/// index `y * width + x`.
pub(crate) fn dct_matrix(spec: &SamplingBasisSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let horiz: Vec<Vec<f64>> = (0..w).map(|u| dct_vector(w, u)).collect();
    let vert: Vec<Vec<f64>> = (0..h).map(|v| dct_vector(h, v)).collect();
    let order = frequency_order(w, h, spec.ordering);
    let mut m = DMatrix::zeros(spec.count, w * h);
    for (row, &(u, v)) in order.iter().take(spec.count).enumerate() {
        for y in 0..h {
            for x in 0..w {
                m[(row, y * w + x)] = horiz[u][x] * vert[v][y];
            }
        }
    }
    Ok(m)
}
