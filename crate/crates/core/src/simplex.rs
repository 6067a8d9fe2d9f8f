//! Regular simplex geometry and simplex coding of measurement matrices.
//!
//! A real `k x n` measurement matrix is cut into bundles of `p` rows. Every
//! column of a bundle is a point in `p`-dimensional space, which is written as
//! a non-negative combination of `p` of the `p + 1` vertices of a regular
//! simplex (the vertex furthest from the point is left out). The resulting
//! matrix has `l (p + 1)` rows with entries in `[0, 1]` and is decoded back
//! with the block-diagonal operator `Q = I_l ⊗ V`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// Largest simplex order accepted by [`SimplexVertices::new`].
pub const MAX_ORDER: usize = 1024;

/// Coefficients this far below zero are rounding noise and get clamped.
const CLAMP_TOLERANCE: f64 = 1e-12;

/// Vertex coordinates of a regular `p`-simplex centred at the origin.
///
/// Column `i` of the `p x (p + 1)` matrix is the unit vector `v_i`. Distinct
/// vertices have dot product `-1/p` and the vertices sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVertices {
    order: usize,
    coords: DMatrix<f64>,
}

impl SimplexVertices {
    /// Builds the vertices by recursive embedding: at step `i` the existing
    /// vertices are shrunk by `sqrt(1 - 1/i^2)` in the first `i - 1`
    /// coordinates, pushed to `-1/i` along axis `i`, and `e_i` is appended.
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_ORDER {
            return invalid(format!("simplex order must be in 1..={MAX_ORDER}, got {p}"));
        }
        let mut coords = DMatrix::<f64>::zeros(p, p + 1);
        for i in 1..=p {
            let fi = i as f64;
            let shrink = (1.0 - 1.0 / (fi * fi)).sqrt();
            for col in 0..i {
                for row in 0..i - 1 {
                    coords[(row, col)] *= shrink;
                }
                coords[(i - 1, col)] = -1.0 / fi;
            }
            coords[(i - 1, i)] = 1.0;
        }
        Ok(Self { order: p, coords })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The `p x (p + 1)` coordinate matrix, one vertex per column.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn vertex(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.coords.column(i)
    }
}

/// Decomposes points over the simplex vertices, caching the inverse of each
/// `p x p` vertex subsystem the first time it is needed.
#[derive(Debug)]
pub struct SimplexCoder {
    vertices: SimplexVertices,
    inverses: Vec<OnceLock<std::result::Result<DMatrix<f64>, String>>>,
}

impl SimplexCoder {
    pub fn new(vertices: SimplexVertices) -> Self {
        let inverses = (0..=vertices.order).map(|_| OnceLock::new()).collect();
        Self { vertices, inverses }
    }

    pub fn vertices(&self) -> &SimplexVertices {
        &self.vertices
    }

    /// Index of the vertex furthest from `point`; ties go to the smaller index.
    pub fn furthest_vertex(&self, point: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::NEG_INFINITY;
        for q in 0..=self.vertices.order {
            let dist: f64 = self
                .vertices
                .vertex(q)
                .iter()
                .zip(point)
                .map(|(a, b)| (b - a) * (b - a))
                .sum();
            if dist > best_dist {
                best_dist = dist;
                best = q;
            }
        }
        best
    }

    fn subsystem_inverse(&self, removed: usize) -> Result<&DMatrix<f64>> {
        let cell = self.inverses[removed].get_or_init(|| {
            let p = self.vertices.order;
            let m = self.vertices.coords.ncols();
            let kept: Vec<usize> = (0..m).filter(|&c| c != removed).collect();
            let basis = self.vertices.coords.select_columns(&kept);
            basis.try_inverse().ok_or_else(|| {
                format!("vertex subsystem without column {removed} is singular (p = {p})")
            })
        });
        cell.as_ref().map_err(|e| Error::Internal(e.clone()))
    }

    /// Writes the `p + 1` non-negative coefficients of `point` into `out`.
    /// The coefficient of the furthest vertex is exactly zero; an all-zero
    /// point yields all zeros.
    pub fn decompose_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        let p = self.vertices.order;
        debug_assert_eq!(point.len(), p);
        debug_assert_eq!(out.len(), p + 1);
        out.fill(0.0);
        let norm_sq: f64 = point.iter().map(|x| x * x).sum();
        if norm_sq <= 0.0 {
            return Ok(());
        }
        let q = self.furthest_vertex(point);
        let inv = self.subsystem_inverse(q)?;
        let tolerance = CLAMP_TOLERANCE * norm_sq.sqrt().max(1.0);
        for j in 0..p {
            let mut c = 0.0;
            for (i, x) in point.iter().enumerate() {
                c += inv[(j, i)] * x;
            }
            if c < 0.0 {
                if c < -tolerance {
                    return Err(Error::Internal(format!(
                        "negative simplex coefficient {c:e} for removed vertex {q}"
                    )));
                }
                c = 0.0;
            }
            let slot = if j < q { j } else { j + 1 };
            out[slot] = c;
        }
        Ok(())
    }

    pub fn decompose(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.vertices.order + 1];
        self.decompose_into(point, &mut out)?;
        Ok(out)
    }
}

/// Non-negative simplex-coded matrix with entries in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct EncodedMatrix {
    pub p: usize,
    /// Number of bundles, `ceil(k / p)`.
    pub l: usize,
    /// Row count of the source matrix before zero padding.
    pub k: usize,
    pub n: usize,
    /// `l (p + 1) x n`.
    pub data: DMatrix<f64>,
    /// `Q * data = M / scale` (padded rows excluded).
    pub scale: f64,
}

/// Encodes a real `k x n` matrix over the vertices of a regular `p`-simplex.
///
/// When `k` is not a multiple of `p` the matrix is padded with zero rows.
/// Columns are processed in parallel; each column is independent, so the
/// output does not depend on scheduling.
pub fn encode_matrix(m: &DMatrix<f64>, p: usize) -> Result<EncodedMatrix> {
    let vertices = SimplexVertices::new(p)?;
    let (k, n) = m.shape();
    if k == 0 || n == 0 {
        return invalid(format!("measurement matrix must be non-empty, got {k}x{n}"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return invalid("measurement matrix contains non-finite entries");
    }
    let coder = SimplexCoder::new(vertices);
    let l = k.div_ceil(p);
    let rows_out = l * (p + 1);

    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut col = vec![0.0; rows_out];
            let mut point = vec![0.0; p];
            for bundle in 0..l {
                for (i, slot) in point.iter_mut().enumerate() {
                    let row = bundle * p + i;
                    *slot = if row < k { m[(row, c)] } else { 0.0 };
                }
                let out = &mut col[bundle * (p + 1)..(bundle + 1) * (p + 1)];
                coder.decompose_into(&point, out)?;
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;

    let mut data = DMatrix::from_vec(rows_out, n, columns.concat());
    let max = data.max();
    let scale = if max > 0.0 { max } else { 1.0 };
    data /= scale;
    Ok(EncodedMatrix {
        p,
        l,
        k,
        n,
        data,
        scale,
    })
}

/// The decode operator `Q = I_l ⊗ V`, restricted to the first `k` output rows
/// so zero-padded rows of the source matrix are dropped.
#[derive(Debug, Clone)]
pub struct DecodeOperator {
    vertices: SimplexVertices,
    l: usize,
    k: usize,
}

impl DecodeOperator {
    /// Full operator with `k = l p` output rows.
    pub fn new(p: usize, l: usize) -> Result<Self> {
        if l == 0 {
            return invalid("decode operator needs at least one bundle");
        }
        let vertices = SimplexVertices::new(p)?;
        Ok(Self {
            vertices,
            l,
            k: l * p,
        })
    }

    /// Operator for a source matrix of `k` rows (`l = ceil(k/p)` bundles).
    pub fn for_rows(p: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("decode operator needs at least one row");
        }
        let mut q = Self::new(p, k.div_ceil(p))?;
        q.k = k;
        Ok(q)
    }

    pub fn p(&self) -> usize {
        self.vertices.order
    }

    pub fn bundles(&self) -> usize {
        self.l
    }

    /// Output length.
    pub fn rows(&self) -> usize {
        self.k
    }

    /// Input length, `l (p + 1)`.
    pub fn cols(&self) -> usize {
        self.l * (self.vertices.order + 1)
    }

    pub fn vertices(&self) -> &SimplexVertices {
        &self.vertices
    }

    pub fn apply(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.cols() {
            return invalid(format!(
                "decode expects {} readings, got {}",
                self.cols(),
                y.len()
            ));
        }
        let p = self.p();
        let v = &self.vertices.coords;
        let mut out = DVector::zeros(self.k);
        for (row, o) in out.iter_mut().enumerate() {
            let bundle = row / p;
            let i = row % p;
            let base = bundle * (p + 1);
            let mut acc = 0.0;
            for j in 0..=p {
                acc += v[(i, j)] * y[base + j];
            }
            *o = acc;
        }
        Ok(out)
    }

    /// `Q * a` for a matrix with `l (p + 1)` rows.
    pub fn apply_matrix(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.cols() {
            return invalid(format!(
                "decode expects {} rows, got {}",
                self.cols(),
                a.nrows()
            ));
        }
        let p = self.p();
        let v = &self.vertices.coords;
        let mut out = DMatrix::zeros(self.k, a.ncols());
        for bundle in 0..self.l {
            let rows = (p).min(self.k - bundle * p);
            let block = a.rows(bundle * (p + 1), p + 1);
            let decoded = v.rows(0, rows) * block;
            out.rows_mut(bundle * p, rows).copy_from(&decoded);
        }
        Ok(out)
    }

    /// `b * Q` for a matrix with `k` columns.
    pub fn right_apply(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.ncols() != self.k {
            return invalid(format!(
                "right-multiplication expects {} columns, got {}",
                self.k,
                b.ncols()
            ));
        }
        let p = self.p();
        let v = &self.vertices.coords;
        let mut out = DMatrix::zeros(b.nrows(), self.cols());
        for bundle in 0..self.l {
            let rows = p.min(self.k - bundle * p);
            let block = b.columns(bundle * p, rows) * v.rows(0, rows);
            out.columns_mut(bundle * (p + 1), p + 1).copy_from(&block);
        }
        Ok(out)
    }

    /// Dense `k x l (p + 1)` form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.apply_matrix(&DMatrix::identity(self.cols(), self.cols()))
            .expect("identity has matching rows")
    }
}

/// Decodes simplex-coded readings: `y = Q y'`.
pub fn decode_measurement(q: &DecodeOperator, yprime: &[f64]) -> Result<DVector<f64>> {
    q.apply(yprime)
}

/// Difference of the two detector signals of a complementary measurement.
pub fn complementary_combine(ya: &[f64], yb: &[f64]) -> Result<DVector<f64>> {
    if ya.len() != yb.len() {
        return invalid(format!(
            "complementary signals differ in length: {} vs {}",
            ya.len(),
            yb.len()
        ));
    }
    Ok(DVector::from_iterator(
        ya.len(),
        ya.iter().zip(yb).map(|(a, b)| a - b),
    ))
}
