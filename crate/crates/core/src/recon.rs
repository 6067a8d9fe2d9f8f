//! Linear image reconstruction from detector signals.
//!
//! A reconstructor is a generalized inverse `P` of the effective signed
//! matrix of the displayed patterns. For simplex-coded patterns it is fused
//! with the decode operator, `P' = P Q`, so a reconstruction is a single
//! matrix-vector product on the raw readings.
//!
//! Besides truncated-SVD and Tikhonov inverses there is a frequency-weighted
//! minimum-norm inverse in the spirit of Fourier-domain regularised inversion
//! (FDRI). It needs the image shape, so it is only reachable through pattern
//! sets or [`generalized_inverse_2d`]. Everything downstream is agnostic to
//! how `P` was obtained.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{decode_direct, second_detector, MeasurementRecord, SceneImage};
use crate::error::{invalid, Error, Result};
use crate::sampling::{PatternKind, PatternSet};
use crate::simplex::DecodeOperator;

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_TIKHONOV_LAMBDA: f64 = 1e-6;
pub const DEFAULT_FREQUENCY_MU: f64 = 1000.0;
pub const DEFAULT_FREQUENCY_LAMBDA: f64 = 1e-9;

/// How the generalized inverse is regularised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    /// Keep singular values above `rank_tolerance * sigma_max`.
    TruncatedSvd { rank_tolerance: f64 },
    /// `P = M^T (M M^T + lambda sigma_max^2 I)^-1`.
    Tikhonov { lambda: f64 },
    /// `P = W M^T (M W M^T + lambda sigma_max^2 I)^-1` with `W` diagonal in
    /// the 2-D DCT domain, `w(u, v) = 1 / (1 + mu ((u/width)^2 + (v/height)^2))`.
    /// Among all images consistent with the data it picks the one with the
    /// least high-frequency energy, which keeps dither structure of binarised
    /// patterns out of the reconstruction.
    FrequencyWeighted { mu: f64, lambda: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Tikhonov {
            lambda: DEFAULT_TIKHONOV_LAMBDA,
        }
    }
}

impl Method {
    pub fn truncated_svd() -> Self {
        Method::TruncatedSvd {
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
    }

    pub fn tikhonov() -> Self {
        Method::default()
    }

    pub fn frequency_weighted() -> Self {
        Method::FrequencyWeighted {
            mu: DEFAULT_FREQUENCY_MU,
            lambda: DEFAULT_FREQUENCY_LAMBDA,
        }
    }

    /// Parses `"tsvd"`/`"truncated-svd"`, `"tikhonov"` or
    /// `"frequency-weighted"`/`"fdri"` with an optional parameter (the
    /// method default otherwise; `mu` for the frequency-weighted inverse).
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        match name {
            "fdri" | "frequency-weighted" => Ok(Method::FrequencyWeighted {
                mu: param.unwrap_or(DEFAULT_FREQUENCY_MU),
                lambda: DEFAULT_FREQUENCY_LAMBDA,
            }),
            "tsvd" | "truncated-svd" => Ok(Method::TruncatedSvd {
                rank_tolerance: param.unwrap_or(DEFAULT_RANK_TOLERANCE),
            }),
            "tikhonov" => Ok(Method::Tikhonov {
                lambda: param.unwrap_or(DEFAULT_TIKHONOV_LAMBDA),
            }),
            other => invalid(format!("unknown reconstruction method '{other}'")),
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Method::TruncatedSvd { rank_tolerance } => rank_tolerance,
            Method::Tikhonov { lambda } => lambda,
            Method::FrequencyWeighted { mu, .. } => mu,
        }
    }

    fn validate(&self) -> Result<()> {
        let params = match *self {
            Method::FrequencyWeighted { mu, lambda } => [mu, lambda],
            _ => [self.param(), 0.0],
        };
        for p in params {
            if !(p.is_finite() && p >= 0.0) {
                return invalid(format!(
                    "regularisation parameter must be finite and >= 0, got {p}"
                ));
            }
        }
        Ok(())
    }
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
fn largest_eigenvalue(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 1e-3);
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..2000 {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= 1e-14 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Generalized inverse `P` (`n x k`) of a `k x n` matrix.
///
/// The frequency-weighted method needs the image shape; use
/// [`generalized_inverse_2d`] for it.
pub fn generalized_inverse(m: &DMatrix<f64>, method: Method) -> Result<DMatrix<f64>> {
    inverse_with_shape(m, method, None)
}

/// Generalized inverse of a matrix whose rows are `width x height` images.
pub fn generalized_inverse_2d(
    m: &DMatrix<f64>,
    method: Method,
    width: usize,
    height: usize,
) -> Result<DMatrix<f64>> {
    inverse_with_shape(m, method, Some((width, height)))
}

fn inverse_with_shape(
    m: &DMatrix<f64>,
    method: Method,
    shape: Option<(usize, usize)>,
) -> Result<DMatrix<f64>> {
    method.validate()?;
    if m.is_empty() {
        return invalid("cannot invert an empty matrix");
    }
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("effective matrix contains non-finite entries");
    }
    if m.amax() == 0.0 {
        return invalid("effective matrix has rank 0");
    }
    match method {
        Method::TruncatedSvd { rank_tolerance } => {
            let svd = m.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let cutoff = rank_tolerance * smax;
            let u = svd.u.as_ref().expect("u requested");
            let vt = svd.v_t.as_ref().expect("v_t requested");
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > cutoff)
                .collect();
            if keep.is_empty() {
                return invalid("effective matrix has rank 0");
            }
            let mut v_scaled = vt.select_rows(&keep).transpose();
            for (col, &i) in keep.iter().enumerate() {
                v_scaled.column_mut(col).unscale_mut(svd.singular_values[i]);
            }
            Ok(v_scaled * u.select_columns(&keep).transpose())
        }
        Method::Tikhonov { lambda } => {
            let mut gram = m * m.transpose();
            let smax_sq = largest_eigenvalue(&gram);
            let ridge = lambda * smax_sq;
            for i in 0..gram.nrows() {
                gram[(i, i)] += ridge;
            }
            Ok(solve_gram(gram, m)?.transpose())
        }
        Method::FrequencyWeighted { mu, lambda } => match shape {
            Some((width, height)) => frequency_weighted_inverse(m, mu, lambda, width, height),
            None => invalid("the frequency-weighted inverse needs the image shape"),
        },
    }
}

fn solve_gram(gram: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = gram.cholesky().ok_or_else(|| {
        Error::InvalidArgument(
            "regularised Gram matrix is not positive definite; increase lambda".into(),
        )
    })?;
    Ok(chol.solve(rhs))
}

/// Orthonormal DCT-II matrix; row `f` is frequency `f`.
fn dct_1d(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |f, i| {
        let alpha = if f == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * f as f64 / (2 * n) as f64).cos()
    })
}

/// Applies the separable 2-D transform `ch R cw^T` to each row of `m`,
/// with rows read as row-major `height x width` images.
fn transform_rows(m: &DMatrix<f64>, ch: &DMatrix<f64>, cw: &DMatrix<f64>) -> DMatrix<f64> {
    let (height, width) = (ch.nrows(), cw.nrows());
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .into_par_iter()
        .map(|i| {
            let img = DMatrix::from_row_iterator(height, width, m.row(i).iter().copied());
            let out = ch * img * cw.transpose();
            out.transpose().as_slice().to_vec()
        })
        .collect();
    DMatrix::from_row_iterator(m.nrows(), m.ncols(), rows.into_iter().flatten())
}

fn frequency_weighted_inverse(
    m: &DMatrix<f64>,
    mu: f64,
    lambda: f64,
    width: usize,
    height: usize,
) -> Result<DMatrix<f64>> {
    if width * height != m.ncols() {
        return invalid(format!(
            "{width}x{height} does not match {} matrix columns",
            m.ncols()
        ));
    }
    let (cw, ch) = (dct_1d(width), dct_1d(height));
    let weights = DVector::from_fn(width * height, |j, _| {
        let (u, v) = (
            (j % width) as f64 / width as f64,
            (j / width) as f64 / height as f64,
        );
        1.0 / (1.0 + mu * (u * u + v * v))
    });
    let a = transform_rows(m, &ch, &cw);
    let mut aw = a.clone();
    for (j, mut col) in aw.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    let mut gram = &aw * a.transpose();
    let ridge = lambda * largest_eigenvalue(&gram);
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    let coeffs = solve_gram(gram, &aw)?;
    // Rows of `coeffs` are DCT-domain columns of P; take them back to pixels.
    Ok(transform_rows(&coeffs, &ch.transpose(), &cw.transpose()).transpose())
}

/// What the reconstructor applies its matrix to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalPath {
    /// `P` applied to an already decoded signed signal of length `k`.
    Decoded,
    /// `P'` applied to raw simplex-coded readings of length `l (p + 1)`.
    Fused,
}

/// A precomputed linear map from detector signals to images.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    fingerprint: String,
    method: Method,
    path: SignalPath,
    /// `n x k` generalized inverse, when known.
    inverse: Option<DMatrix<f64>>,
    /// `n x l(p+1)` fused matrix `P Q` for simplex patterns.
    fused: Option<DMatrix<f64>>,
    decode: Option<DecodeOperator>,
}

fn matrix_fingerprint(m: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((m.nrows() as u64).to_le_bytes());
    hasher.update((m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Reconstructor for a signed effective matrix `M_eff` (`k x n`).
pub fn build_reconstructor(m_eff: &DMatrix<f64>, method: Method) -> Result<Reconstructor> {
    direct_reconstructor(m_eff, method, None)
}

fn direct_reconstructor(
    m_eff: &DMatrix<f64>,
    method: Method,
    shape: Option<(usize, usize)>,
) -> Result<Reconstructor> {
    let inverse = inverse_with_shape(m_eff, method, shape)?;
    Ok(Reconstructor {
        fingerprint: matrix_fingerprint(m_eff),
        method,
        path: SignalPath::Decoded,
        inverse: Some(inverse),
        fused: None,
        decode: None,
    })
}

/// Reconstructor for displayed simplex-coded patterns `M'_DMD`: inverts
/// `M_eff = Q M'_DMD` and fuses the result with `Q`.
pub fn build_simplex_reconstructor(
    mprime_dmd: &DMatrix<f64>,
    q: &DecodeOperator,
    method: Method,
) -> Result<Reconstructor> {
    simplex_reconstructor(mprime_dmd, q, method, None)
}

fn simplex_reconstructor(
    mprime_dmd: &DMatrix<f64>,
    q: &DecodeOperator,
    method: Method,
    shape: Option<(usize, usize)>,
) -> Result<Reconstructor> {
    let m_eff = q.apply_matrix(mprime_dmd)?;
    let inverse = inverse_with_shape(&m_eff, method, shape)?;
    let fused = q.right_apply(&inverse)?;
    Ok(Reconstructor {
        fingerprint: matrix_fingerprint(mprime_dmd),
        method,
        path: SignalPath::Fused,
        inverse: Some(inverse),
        fused: Some(fused),
        decode: Some(q.clone()),
    })
}

impl Reconstructor {
    /// Builds from the patterns actually displayed (binarised or not) and
    /// ties the result to the pattern set's fingerprint.
    pub fn for_patterns(ps: &PatternSet, method: Method) -> Result<Self> {
        let shape = Some((ps.width(), ps.height()));
        let mut rec = match ps.kind() {
            PatternKind::SimplexDmd => {
                simplex_reconstructor(ps.matrix(), &ps.decode_operator()?, method, shape)?
            }
            PatternKind::DirectDmd => direct_reconstructor(&ps.effective_matrix()?, method, shape)?,
            PatternKind::RawReal => return invalid("raw patterns are never displayed"),
        };
        rec.fingerprint = ps.fingerprint().to_owned();
        Ok(rec)
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn path(&self) -> SignalPath {
        self.path
    }

    /// `P`, unless this reconstructor was loaded from a fused cache.
    pub fn generalized_inverse(&self) -> Option<&DMatrix<f64>> {
        self.inverse.as_ref()
    }

    pub fn fused(&self) -> Option<&DMatrix<f64>> {
        self.fused.as_ref()
    }

    /// The matrix applied to incoming signals.
    pub fn operator(&self) -> &DMatrix<f64> {
        match self.path {
            SignalPath::Fused => self.fused.as_ref().expect("fused path has P'"),
            SignalPath::Decoded => self.inverse.as_ref().expect("decoded path has P"),
        }
    }

    pub fn pixels(&self) -> usize {
        self.operator().nrows()
    }

    /// `P y` or `P' y'` depending on the signal path.
    pub fn apply(&self, signal: &[f64]) -> Result<DVector<f64>> {
        let op = self.operator();
        if signal.len() != op.ncols() {
            return invalid(format!(
                "reconstructor expects {} signal entries, got {}",
                op.ncols(),
                signal.len()
            ));
        }
        Ok(op * DVector::from_column_slice(signal))
    }
}

/// Unclipped estimate plus its display form.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub width: usize,
    pub height: usize,
    pub values: DVector<f64>,
}

impl Reconstruction {
    /// Negative pixels clipped to zero.
    pub fn clipped(&self) -> SceneImage {
        SceneImage::new(
            self.width,
            self.height,
            self.values.iter().map(|v| v.max(0.0)).collect(),
        )
        .expect("clipped finite values form a valid scene")
    }
}

/// Reconstructs the scene behind `record`.
///
/// Complementary simplex readings are combined as `0.5 (y'_A - y'_B)` so that
/// single and complementary records of the same scene reconstruct to the same
/// intensity scale.
pub fn reconstruct(
    rec: &Reconstructor,
    record: &MeasurementRecord,
    width: usize,
    height: usize,
) -> Result<Reconstruction> {
    if record.pattern_fingerprint != rec.fingerprint {
        return invalid("record was measured with different patterns than the reconstructor");
    }
    if width * height != rec.pixels() {
        return invalid(format!(
            "{width}x{height} does not match reconstructor with {} pixels",
            rec.pixels()
        ));
    }
    let values = match (rec.path, record.mode.is_simplex()) {
        (SignalPath::Fused, true) => {
            if record.mode.is_complementary() {
                let yb = second_detector(record)?;
                let half_diff = (&record.yprime - yb) * 0.5;
                rec.apply(half_diff.as_slice())?
            } else {
                rec.apply(record.yprime.as_slice())?
            }
        }
        (SignalPath::Decoded, false) => rec.apply(decode_direct(record)?.as_slice())?,
        _ => {
            return invalid(format!(
                "reconstructor cannot handle {} records",
                record.mode
            ))
        }
    };
    Ok(Reconstruction {
        width,
        height,
        values,
    })
}

/// `10 log10(n max(x)^2 / ||x - x~||^2)`; `+inf` for a perfect estimate.
pub fn psnr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() || reference.is_empty() {
        return invalid(format!(
            "psnr needs equal non-empty sizes, got {} and {}",
            reference.len(),
            estimate.len()
        ));
    }
    let peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return invalid("psnr reference must not be all zero");
    }
    let err: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (reference.len() as f64 * peak * peak / err).log10())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheHeader {
    fingerprint: String,
    method: Method,
    path: SignalPath,
    rows: usize,
    cols: usize,
    p: Option<usize>,
    k: Option<usize>,
}

impl Reconstructor {
    /// JSON header line, then the applied matrix (`P'` or `P`) row-major as
    /// little-endian `f64`.
    pub fn write_cache<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let op = self.operator();
        let header = CacheHeader {
            fingerprint: self.fingerprint.clone(),
            method: self.method,
            path: self.path,
            rows: op.nrows(),
            cols: op.ncols(),
            p: self.decode.as_ref().map(|q| q.p()),
            k: self.decode.as_ref().map(|q| q.rows()),
        };
        w.write_all(serde_json::to_string(&header)?.as_bytes())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(op.ncols() * 8);
        for r in 0..op.nrows() {
            buf.clear();
            for c in 0..op.ncols() {
                buf.extend_from_slice(&op[(r, c)].to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_cache(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_cache(BufReader::new(f), path)
    }

    pub fn read_cache<R: BufRead>(mut r: R, origin: &Path) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| Error::io(origin, e))?;
        let h: CacheHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::format(origin, format!("bad header: {e}")))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io(origin, e))?;
        if bytes.len() != h.rows * h.cols * 8 {
            return Err(Error::format(origin, "matrix size does not match header"));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let op = DMatrix::from_row_slice(h.rows, h.cols, &values);
        let (inverse, fused, decode) = match (h.path, h.p, h.k) {
            (SignalPath::Fused, Some(p), Some(k)) => {
                let q = DecodeOperator::for_rows(p, k)?;
                if q.cols() != h.cols {
                    return Err(Error::format(
                        origin,
                        "fused matrix width disagrees with p and k",
                    ));
                }
                (None, Some(op), Some(q))
            }
            (SignalPath::Decoded, _, _) => (Some(op), None, None),
            _ => return Err(Error::format(origin, "fused cache lacks p or k")),
        };
        Ok(Self {
            fingerprint: h.fingerprint,
            method: h.method,
            path: h.path,
            inverse,
            fused,
            decode,
        })
    }
}
