//! Sampling functions and their displayable (DMD) forms.

mod dct;
pub mod dither;
mod file;

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::simplex::{encode_matrix, DecodeOperator};

pub use dct::{frequency_order, BasisOrdering, SamplingBasisSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    /// Signed sampling functions, not displayable.
    RawReal,
    /// `g * M + 0.5` followed by one all-ones pattern.
    DirectDmd,
    /// Simplex-coded `l (p + 1)` patterns.
    SimplexDmd,
}

/// An ordered stack of equally sized 2-D patterns.
///
/// Row `i` of [`PatternSet::matrix`] is pattern `i` flattened row-major.
#[derive(Debug, Clone)]
pub struct PatternSet {
    width: usize,
    height: usize,
    kind: PatternKind,
    binarized: bool,
    data: DMatrix<f64>,
    /// Rows of the underlying signed matrix `M`.
    k: usize,
    p: Option<usize>,
    l: Option<usize>,
    scale: Option<f64>,
    gain: Option<f64>,
    fingerprint: OnceLock<String>,
}

impl PatternSet {
    /// Wraps a signed `k x (width * height)` sampling matrix.
    pub fn raw(width: usize, height: usize, m: DMatrix<f64>) -> Result<Self> {
        if width == 0 || height == 0 || m.ncols() != width * height {
            return invalid(format!(
                "matrix with {} columns does not fit {}x{} patterns",
                m.ncols(),
                width,
                height
            ));
        }
        if m.nrows() == 0 {
            return invalid("pattern set must contain at least one pattern");
        }
        if m.iter().any(|x| !x.is_finite()) {
            return invalid("raw patterns must be finite");
        }
        let k = m.nrows();
        Ok(Self::assemble(
            width,
            height,
            PatternKind::RawReal,
            false,
            m,
            k,
        ))
    }

    fn assemble(
        width: usize,
        height: usize,
        kind: PatternKind,
        binarized: bool,
        data: DMatrix<f64>,
        k: usize,
    ) -> Self {
        Self {
            width,
            height,
            kind,
            binarized,
            data,
            k,
            p: None,
            l: None,
            scale: None,
            gain: None,
            fingerprint: OnceLock::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn binarized(&self) -> bool {
        self.binarized
    }

    /// Number of signed measurements `k` the set encodes.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> Option<usize> {
        self.p
    }

    pub fn l(&self) -> Option<usize> {
        self.l
    }

    /// Simplex encoding scale `s` (`Q M' = M / s`).
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    /// Overall factor `g'` between decoded readings and `M x`.
    pub fn gain(&self) -> Option<f64> {
        self.gain
    }

    pub fn has_all_ones_pattern(&self) -> bool {
        self.kind == PatternKind::DirectDmd
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Pattern `i` as a row-major pixel vector.
    pub fn pattern(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// Decode operator for a simplex-coded set.
    pub fn decode_operator(&self) -> Result<DecodeOperator> {
        match (self.kind, self.p) {
            (PatternKind::SimplexDmd, Some(p)) => DecodeOperator::for_rows(p, self.k),
            _ => invalid("decode operator requires a simplex-coded pattern set"),
        }
    }

    /// The signed matrix the displayed patterns actually realise: `Q M'` for
    /// simplex sets and `M_DMD[..k] - 0.5` for direct sets.
    pub fn effective_matrix(&self) -> Result<DMatrix<f64>> {
        match self.kind {
            PatternKind::RawReal => Ok(self.data.clone()),
            PatternKind::DirectDmd => Ok(self.data.rows(0, self.k).map(|v| v - 0.5)),
            PatternKind::SimplexDmd => self.decode_operator()?.apply_matrix(&self.data),
        }
    }

    /// SHA-256 over the header fields and pixel data; identifies the exact
    /// matrix a reconstructor was built from.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint.get_or_init(|| {
            let mut hasher = Sha256::new();
            let header = serde_json::to_string(&file::PatternHeader::from_set(self))
                .expect("header serialises");
            hasher.update(header.as_bytes());
            for r in 0..self.data.nrows() {
                for c in 0..self.data.ncols() {
                    hasher.update(self.data[(r, c)].to_le_bytes());
                }
            }
            hex::encode(hasher.finalize())
        })
    }
}

/// First `count` DCT-II basis functions in the requested order.
pub fn generate_dct_basis(spec: &SamplingBasisSpec) -> Result<PatternSet> {
    let m = dct::dct_matrix(spec)?;
    PatternSet::raw(spec.width, spec.height, m)
}

/// Maps signed patterns to `[0, 1]` as `x g + 0.5` with `g = 0.5 / max|x|`
/// and appends an all-ones pattern.
pub fn to_direct_dmd(raw: &PatternSet) -> Result<PatternSet> {
    if raw.kind != PatternKind::RawReal {
        return invalid("direct mapping expects raw patterns");
    }
    let peak = raw.data.amax();
    if peak == 0.0 {
        return invalid("cannot map an all-zero pattern set");
    }
    let gain = 0.5 / peak;
    let (k, n) = raw.data.shape();
    let mut data = DMatrix::from_element(k + 1, n, 1.0);
    data.rows_mut(0, k)
        .copy_from(&raw.data.map(|v| (v * gain + 0.5).clamp(0.0, 1.0)));
    let mut set = PatternSet::assemble(
        raw.width,
        raw.height,
        PatternKind::DirectDmd,
        false,
        data,
        k,
    );
    set.gain = Some(gain);
    Ok(set)
}

/// Simplex-codes signed patterns into `l (p + 1)` non-negative patterns.
pub fn to_simplex_dmd(raw: &PatternSet, p: usize) -> Result<PatternSet> {
    if raw.kind != PatternKind::RawReal {
        return invalid("simplex mapping expects raw patterns");
    }
    let enc = encode_matrix(&raw.data, p)?;
    let mut set = PatternSet::assemble(
        raw.width,
        raw.height,
        PatternKind::SimplexDmd,
        false,
        enc.data,
        enc.k,
    );
    set.p = Some(p);
    set.l = Some(enc.l);
    set.scale = Some(enc.scale);
    set.gain = Some(1.0 / enc.scale);
    Ok(set)
}

/// Dithers every pattern to `{0, 1}` independently.
pub fn binarize_error_diffusion(ps: &PatternSet) -> Result<PatternSet> {
    if ps.kind == PatternKind::RawReal {
        return invalid("only DMD pattern sets can be binarised");
    }
    if ps.data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return invalid("pattern values must lie in [0, 1] for binarisation");
    }
    let (w, h) = (ps.width, ps.height);
    let rows: Vec<Vec<f64>> = (0..ps.count())
        .into_par_iter()
        .map(|i| dither::floyd_steinberg(&ps.pattern(i), w, h))
        .collect();
    let data = DMatrix::from_fn(ps.count(), w * h, |r, c| rows[r][c]);
    let mut out = PatternSet::assemble(w, h, ps.kind, true, data, ps.k);
    out.p = ps.p;
    out.l = ps.l;
    out.scale = ps.scale;
    out.gain = ps.gain;
    Ok(out)
}
