//! Pattern-set files: one JSON header line, then row-major little-endian
//! `f32` pixels with the patterns concatenated in display order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{PatternKind, PatternSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct PatternHeader {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub kind: PatternKind,
    pub binarized: bool,
    pub p: Option<usize>,
    pub l: Option<usize>,
    pub scale: Option<f64>,
    pub gain: Option<f64>,
    pub k: usize,
}

impl PatternHeader {
    pub fn from_set(set: &PatternSet) -> Self {
        Self {
            count: set.count(),
            width: set.width,
            height: set.height,
            kind: set.kind,
            binarized: set.binarized,
            p: set.p,
            l: set.l,
            scale: set.scale,
            gain: set.gain,
            k: set.k,
        }
    }
}

impl PatternSet {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = serde_json::to_string(&PatternHeader::from_set(self))?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.pixels() * 4);
        for r in 0..self.count() {
            buf.clear();
            for c in 0..self.pixels() {
                buf.extend_from_slice(&(self.data[(r, c)] as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f), path)
    }

    /// `origin` is only used in error messages.
    pub fn read_from<R: BufRead>(mut r: R, origin: &Path) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| Error::io(origin, e))?;
        let h: PatternHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::format(origin, format!("bad header: {e}")))?;
        validate_header(&h).map_err(|reason| Error::format(origin, reason))?;

        let n = h.width * h.height;
        let mut bytes = vec![0u8; h.count * n * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::format(origin, format!("truncated pixel data: {e}")))?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::io(origin, e))?;
        if !rest.is_empty() {
            return Err(Error::format(
                origin,
                format!("{} trailing bytes", rest.len()),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let data = DMatrix::from_row_slice(h.count, n, &values);
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(origin, "non-finite pixel values"));
        }
        if h.kind != PatternKind::RawReal && data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::format(origin, "DMD pattern values outside [0, 1]"));
        }
        if h.binarized && data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::format(origin, "binarised patterns must be 0 or 1"));
        }

        let mut set = PatternSet::assemble(h.width, h.height, h.kind, h.binarized, data, h.k);
        set.p = h.p;
        set.l = h.l;
        set.scale = h.scale;
        set.gain = h.gain;
        Ok(set)
    }
}

fn validate_header(h: &PatternHeader) -> std::result::Result<(), String> {
    if h.width == 0 || h.height == 0 || h.count == 0 {
        return Err("empty pattern set".into());
    }
    match h.kind {
        PatternKind::RawReal if h.k != h.count => Err("raw set must have k = count".into()),
        PatternKind::DirectDmd if h.k + 1 != h.count => {
            Err("direct set must have k + 1 patterns".into())
        }
        PatternKind::SimplexDmd => match (h.p, h.l, h.scale) {
            (Some(p), Some(l), Some(s)) if p > 0 && s > 0.0 => {
                if l * (p + 1) != h.count || h.k == 0 || h.k.div_ceil(p) != l {
                    Err(format!("inconsistent simplex layout p={p} l={l} k={}", h.k))
                } else {
                    Ok(())
                }
            }
            _ => Err("simplex set needs p, l and a positive scale".into()),
        },
        _ => Ok(()),
    }
}
