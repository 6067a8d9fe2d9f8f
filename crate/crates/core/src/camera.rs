//! Single-pixel camera simulation: one or two bucket detectors reading the
//! inner products of displayed patterns with a scene, plus Gaussian noise and
//! slowly varying ambient bias.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampling::{PatternKind, PatternSet};
use crate::simplex::{complementary_combine, DecodeOperator};

const STREAM_NOISE_A: u64 = 0;
const STREAM_NOISE_B: u64 = 1;
const STREAM_BIAS_A: u64 = 2;
const STREAM_BIAS_B: u64 = 3;

/// Non-negative linear-intensity image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    width: usize,
    height: usize,
    pixels: DVector<f64>,
}

impl SceneImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return invalid(format!(
                "{} pixels do not form a {width}x{height} image",
                pixels.len()
            ));
        }
        if pixels.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("scene pixels must be finite and non-negative");
        }
        Ok(Self {
            width,
            height,
            pixels: DVector::from_vec(pixels),
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: DVector::zeros(width * height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &DVector<f64> {
        &self.pixels
    }

    pub fn as_slice(&self) -> &[f64] {
        self.pixels.as_slice()
    }

    pub fn max(&self) -> f64 {
        self.pixels.max()
    }
}

/// Additive ambient bias as a function of the sample index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BiasTrajectory {
    #[default]
    None,
    Constant {
        value: f64,
    },
    LinearDrift {
        start: f64,
        slope: f64,
    },
    Sinusoidal {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    RandomWalk {
        step_std: f64,
    },
    /// Random walk that only moves at multiples of `block` samples, so the
    /// bias is constant within each block.
    BlockSteps {
        block: usize,
        step_std: f64,
    },
}

impl BiasTrajectory {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BiasTrajectory::None => true,
            BiasTrajectory::Constant { value } => value.is_finite(),
            BiasTrajectory::LinearDrift { start, slope } => start.is_finite() && slope.is_finite(),
            BiasTrajectory::Sinusoidal {
                amplitude,
                period,
                phase,
            } => amplitude.is_finite() && phase.is_finite() && period > 0.0,
            BiasTrajectory::RandomWalk { step_std } => step_std >= 0.0,
            BiasTrajectory::BlockSteps { block, step_std } => block > 0 && step_std >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid bias trajectory {self:?}"))
        }
    }

    /// The same trajectory with every level multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Self {
        match *self {
            BiasTrajectory::None => BiasTrajectory::None,
            BiasTrajectory::Constant { value } => BiasTrajectory::Constant { value: value * f },
            BiasTrajectory::LinearDrift { start, slope } => BiasTrajectory::LinearDrift {
                start: start * f,
                slope: slope * f,
            },
            BiasTrajectory::Sinusoidal {
                amplitude,
                period,
                phase,
            } => BiasTrajectory::Sinusoidal {
                amplitude: amplitude * f,
                period,
                phase,
            },
            BiasTrajectory::RandomWalk { step_std } => BiasTrajectory::RandomWalk {
                step_std: step_std * f.abs(),
            },
            BiasTrajectory::BlockSteps { block, step_std } => BiasTrajectory::BlockSteps {
                block,
                step_std: step_std * f.abs(),
            },
        }
    }

    /// Bias at sample indices `start .. start + count`.
    pub fn sample(&self, start: u64, count: usize, seed: u64, stream: u64) -> Vec<f64> {
        let idx = |i: usize| (start + i as u64) as f64;
        match *self {
            BiasTrajectory::None => vec![0.0; count],
            BiasTrajectory::Constant { value } => vec![value; count],
            BiasTrajectory::LinearDrift { start: b0, slope } => {
                (0..count).map(|i| b0 + slope * idx(i)).collect()
            }
            BiasTrajectory::Sinusoidal {
                amplitude,
                period,
                phase,
            } => (0..count)
                .map(|i| amplitude * (2.0 * std::f64::consts::PI * idx(i) / period + phase).sin())
                .collect(),
            BiasTrajectory::RandomWalk { step_std } => {
                let mut rng = stream_rng(seed, stream);
                let mut level = 0.0;
                let mut out = Vec::with_capacity(count);
                for i in 0..start + count as u64 {
                    let step: f64 = rng.sample(StandardNormal);
                    level += step_std * step;
                    if i >= start {
                        out.push(level);
                    }
                }
                out
            }
            BiasTrajectory::BlockSteps { block, step_std } => {
                let mut rng = stream_rng(seed, stream);
                let last_block = (start + count as u64).div_ceil(block as u64);
                let mut levels = Vec::with_capacity(last_block as usize);
                let mut level = 0.0;
                for _ in 0..last_block {
                    let step: f64 = rng.sample(StandardNormal);
                    level += step_std * step;
                    levels.push(level);
                }
                (0..count)
                    .map(|i| levels[((start + i as u64) / block as u64) as usize])
                    .collect()
            }
        }
    }
}

/// Detector noise `N(mu, sigma^2)` plus ambient bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub bias: BiasTrajectory,
    /// Separate trajectory for the second detector; `None` shares `bias`.
    #[serde(default)]
    pub bias_b: Option<BiasTrajectory>,
    #[serde(default)]
    pub seed: u64,
    /// Global index of the first displayed pattern, so bias trajectories can
    /// continue across consecutive measurements.
    #[serde(default)]
    pub start_index: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            mu: 0.0,
            bias: BiasTrajectory::None,
            bias_b: None,
            seed: 0,
            start_index: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            ..Self::noiseless()
        }
    }

    pub fn with_bias(mut self, bias: BiasTrajectory) -> Self {
        self.bias = bias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !self.mu.is_finite() {
            return invalid("mu must be finite");
        }
        self.bias.validate()?;
        if let Some(b) = &self.bias_b {
            b.validate()?;
        }
        Ok(())
    }

    /// Readings of one detector's noise and bias for `count` patterns.
    fn disturbance(&self, count: usize, detector_b: bool) -> Vec<f64> {
        let (noise_stream, bias) = if detector_b {
            match &self.bias_b {
                Some(b) => (
                    STREAM_NOISE_B,
                    b.sample(self.start_index, count, self.seed, STREAM_BIAS_B),
                ),
                None => (
                    STREAM_NOISE_B,
                    self.bias
                        .sample(self.start_index, count, self.seed, STREAM_BIAS_A),
                ),
            }
        } else {
            (
                STREAM_NOISE_A,
                self.bias
                    .sample(self.start_index, count, self.seed, STREAM_BIAS_A),
            )
        };
        let mut rng = stream_rng(self.seed, noise_stream);
        bias.into_iter()
            .map(|b| {
                let xi: f64 = rng.sample(StandardNormal);
                b + self.mu + self.sigma * xi
            })
            .collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    DirectSingle,
    SimplexSingle,
    DirectComplementary,
    SimplexComplementary,
}

impl MeasurementMode {
    pub fn is_simplex(self) -> bool {
        matches!(self, Self::SimplexSingle | Self::SimplexComplementary)
    }

    pub fn is_complementary(self) -> bool {
        matches!(self, Self::DirectComplementary | Self::SimplexComplementary)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DirectSingle => "direct-single",
            Self::SimplexSingle => "simplex-single",
            Self::DirectComplementary => "direct-complementary",
            Self::SimplexComplementary => "simplex-complementary",
        }
    }
}

impl std::fmt::Display for MeasurementMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MeasurementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct-single" => Ok(Self::DirectSingle),
            "simplex-single" => Ok(Self::SimplexSingle),
            "direct-complementary" => Ok(Self::DirectComplementary),
            "simplex-complementary" => Ok(Self::SimplexComplementary),
            other => invalid(format!("unknown measurement mode '{other}'")),
        }
    }
}

/// Detector readings plus everything needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub mode: MeasurementMode,
    pub yprime: DVector<f64>,
    pub yprime_b: Option<DVector<f64>>,
    pub k: usize,
    pub p: Option<usize>,
    pub l: Option<usize>,
    pub scale: Option<f64>,
    pub gain: Option<f64>,
    pub pattern_fingerprint: String,
    pub noise: NoiseModel,
}

/// Displays every pattern of `ps` on `scene` and records the detector output.
///
/// Detector A reads `<pattern, x> + bias(i) + mu + sigma xi_i`. In
/// complementary mode detector B simultaneously reads the complement
/// `<1 - pattern, x>` with its own noise stream.
pub fn measure(
    ps: &PatternSet,
    scene: &SceneImage,
    noise: &NoiseModel,
    complementary: bool,
) -> Result<MeasurementRecord> {
    if ps.width() != scene.width || ps.height() != scene.height {
        return invalid(format!(
            "pattern resolution {}x{} does not match scene {}x{}",
            ps.width(),
            ps.height(),
            scene.width,
            scene.height
        ));
    }
    noise.validate()?;
    let mode = match (ps.kind(), complementary) {
        (PatternKind::DirectDmd, false) => MeasurementMode::DirectSingle,
        (PatternKind::DirectDmd, true) => MeasurementMode::DirectComplementary,
        (PatternKind::SimplexDmd, false) => MeasurementMode::SimplexSingle,
        (PatternKind::SimplexDmd, true) => MeasurementMode::SimplexComplementary,
        (PatternKind::RawReal, _) => return invalid("raw patterns cannot be displayed"),
    };

    let clean = ps.matrix() * &scene.pixels;
    let count = clean.len();
    let yprime = clean.clone() + DVector::from_vec(noise.disturbance(count, false));
    let yprime_b = complementary.then(|| {
        let total = scene.pixels.sum();
        let clean_b = clean.map(|v| total - v);
        clean_b + DVector::from_vec(noise.disturbance(count, true))
    });

    Ok(MeasurementRecord {
        mode,
        yprime,
        yprime_b,
        k: ps.k(),
        p: ps.p(),
        l: ps.l(),
        scale: ps.scale(),
        gain: ps.gain(),
        pattern_fingerprint: ps.fingerprint().to_owned(),
        noise: noise.clone(),
    })
}

/// Recovers `g M x` from a direct-mapped measurement.
///
/// Single detector: `y_i = y'_i - 0.5 y'_k`, using the all-ones reading to
/// remove the half-intensity offset. Complementary: `y_i = 0.5 (y'_A - y'_B)_i`,
/// which already cancels the offset and any bias common to both detectors.
pub fn decode_direct(record: &MeasurementRecord) -> Result<DVector<f64>> {
    let k = record.k;
    if record.yprime.len() != k + 1 {
        return invalid(format!(
            "direct record needs {} readings, has {}",
            k + 1,
            record.yprime.len()
        ));
    }
    match record.mode {
        MeasurementMode::DirectSingle => {
            let ones = record.yprime[k];
            Ok(DVector::from_fn(k, |i, _| record.yprime[i] - 0.5 * ones))
        }
        MeasurementMode::DirectComplementary => {
            let yb = second_detector(record)?;
            let diff = complementary_combine(record.yprime.as_slice(), yb.as_slice())?;
            Ok(diff.rows(0, k) * 0.5)
        }
        other => invalid(format!("decode_direct cannot handle {other} records")),
    }
}

/// `Q y'` for a single detector, `Q (y'_A - y'_B)` for a complementary pair.
pub fn decode_simplex(record: &MeasurementRecord, q: &DecodeOperator) -> Result<DVector<f64>> {
    match record.mode {
        MeasurementMode::SimplexSingle => q.apply(record.yprime.as_slice()),
        MeasurementMode::SimplexComplementary => {
            let yb = second_detector(record)?;
            let diff = complementary_combine(record.yprime.as_slice(), yb.as_slice())?;
            q.apply(diff.as_slice())
        }
        other => invalid(format!("decode_simplex cannot handle {other} records")),
    }
}

pub(crate) fn second_detector(record: &MeasurementRecord) -> Result<&DVector<f64>> {
    record
        .yprime_b
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("complementary record lacks detector B".into()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordHeader {
    mode: MeasurementMode,
    count: usize,
    complementary: bool,
    k: usize,
    p: Option<usize>,
    l: Option<usize>,
    scale: Option<f64>,
    gain: Option<f64>,
    pattern_fingerprint: String,
    seed: u64,
    noise: NoiseModel,
}

impl MeasurementRecord {
    /// JSON header line, then `y'` (and `y'_B`) as little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = RecordHeader {
            mode: self.mode,
            count: self.yprime.len(),
            complementary: self.yprime_b.is_some(),
            k: self.k,
            p: self.p,
            l: self.l,
            scale: self.scale,
            gain: self.gain,
            pattern_fingerprint: self.pattern_fingerprint.clone(),
            seed: self.noise.seed,
            noise: self.noise.clone(),
        };
        w.write_all(serde_json::to_string(&header)?.as_bytes())?;
        w.write_all(b"\n")?;
        for v in self
            .yprime
            .iter()
            .chain(self.yprime_b.iter().flat_map(|b| b.iter()))
        {
            w.write_all(&v.to_le_bytes())?;
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

    pub fn read_from<R: BufRead>(mut r: R, origin: &Path) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| Error::io(origin, e))?;
        let h: RecordHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::format(origin, format!("bad header: {e}")))?;
        if h.complementary != h.mode.is_complementary() {
            return Err(Error::format(origin, "mode and detector count disagree"));
        }
        let vectors = if h.complementary { 2 } else { 1 };
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io(origin, e))?;
        if bytes.len() != vectors * h.count * 8 {
            return Err(Error::format(
                origin,
                format!(
                    "expected {} data bytes, found {}",
                    vectors * h.count * 8,
                    bytes.len()
                ),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let yprime = DVector::from_column_slice(&values[..h.count]);
        let yprime_b = h
            .complementary
            .then(|| DVector::from_column_slice(&values[h.count..]));
        Ok(Self {
            mode: h.mode,
            yprime,
            yprime_b,
            k: h.k,
            p: h.p,
            l: h.l,
            scale: h.scale,
            gain: h.gain,
            pattern_fingerprint: h.pattern_fingerprint,
            noise: h.noise,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{generate_dct_basis, to_direct_dmd, to_simplex_dmd, SamplingBasisSpec};

    fn scene(w: usize, h: usize, seed: u64) -> SceneImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SceneImage::new(
            w,
            h,
            (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn raw(w: usize, h: usize, k: usize) -> PatternSet {
        generate_dct_basis(&SamplingBasisSpec::new(w, h, k)).unwrap()
    }

    #[test]
    fn scene_validation() {
        assert!(SceneImage::new(2, 2, vec![0.0, 1.0, -0.1, 0.0]).is_err());
        assert!(SceneImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(SceneImage::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn noiseless_simplex_round_trip() {
        let raw = raw(8, 8, 12);
        let x = scene(8, 8, 1);
        for p in [1, 3, 4] {
            let ps = to_simplex_dmd(&raw, p).unwrap();
            let rec = measure(&ps, &x, &NoiseModel::noiseless(), false).unwrap();
            let y = decode_simplex(&rec, &ps.decode_operator().unwrap()).unwrap();
            let want = raw.matrix() * x.pixels();
            assert!((y * rec.scale.unwrap() - want).amax() < 1e-9);
        }
    }

    #[test]
    fn constant_bias_is_removed_by_simplex_decode() {
        let raw = raw(8, 8, 10);
        let ps = to_simplex_dmd(&raw, 5).unwrap();
        let q = ps.decode_operator().unwrap();
        let x = scene(8, 8, 2);
        let clean = decode_simplex(
            &measure(&ps, &x, &NoiseModel::noiseless(), false).unwrap(),
            &q,
        )
        .unwrap();
        let biased_noise =
            NoiseModel::noiseless().with_bias(BiasTrajectory::Constant { value: 3.7 });
        let biased = decode_simplex(&measure(&ps, &x, &biased_noise, false).unwrap(), &q).unwrap();
        assert!((clean - biased).amax() < 1e-12);
    }

    #[test]
    fn zero_scene_reads_bias_plus_mu() {
        let ps = to_simplex_dmd(&raw(4, 4, 6), 2).unwrap();
        let noise = NoiseModel {
            mu: 0.25,
            bias: BiasTrajectory::LinearDrift {
                start: 1.0,
                slope: 0.5,
            },
            ..NoiseModel::noiseless()
        };
        let rec = measure(&ps, &SceneImage::zeros(4, 4), &noise, false).unwrap();
        let want: Vec<f64> = (0..ps.count())
            .map(|i| 1.0 + 0.5 * i as f64 + 0.25)
            .collect();
        assert_eq!(rec.yprime.as_slice(), &want[..]);
    }

    #[test]
    fn direct_decode_noiseless_and_biased() {
        let raw = raw(8, 8, 7);
        let ps = to_direct_dmd(&raw).unwrap();
        let x = scene(8, 8, 3);
        let want = (raw.matrix() * x.pixels()) * ps.gain().unwrap();
        let rec = measure(&ps, &x, &NoiseModel::noiseless(), false).unwrap();
        assert!((decode_direct(&rec).unwrap() - &want).amax() < 1e-9);

        let b = 2.0;
        let noise = NoiseModel::noiseless().with_bias(BiasTrajectory::Constant { value: b });
        let rec = measure(&ps, &x, &noise, false).unwrap();
        let off = decode_direct(&rec).unwrap() - &want;
        assert!(off.iter().all(|d| (d - 0.5 * b).abs() < 1e-9));

        let rec = measure(&ps, &x, &noise, true).unwrap();
        assert!((decode_direct(&rec).unwrap() - &want).amax() < 1e-9);

        let zero = measure(
            &ps,
            &SceneImage::zeros(8, 8),
            &NoiseModel::noiseless(),
            false,
        )
        .unwrap();
        assert!(decode_direct(&zero).unwrap().amax() == 0.0);
    }

    #[test]
    fn decoders_reject_wrong_mode() {
        let raw = raw(4, 4, 4);
        let x = scene(4, 4, 4);
        let direct = measure(
            &to_direct_dmd(&raw).unwrap(),
            &x,
            &NoiseModel::noiseless(),
            false,
        )
        .unwrap();
        let sx = to_simplex_dmd(&raw, 2).unwrap();
        let simplex = measure(&sx, &x, &NoiseModel::noiseless(), false).unwrap();
        assert!(decode_direct(&simplex).is_err());
        assert!(decode_simplex(&direct, &sx.decode_operator().unwrap()).is_err());
    }

    #[test]
    fn resolution_mismatch_rejected() {
        let ps = to_simplex_dmd(&raw(4, 4, 4), 2).unwrap();
        assert!(measure(
            &ps,
            &SceneImage::zeros(4, 5),
            &NoiseModel::noiseless(),
            false
        )
        .is_err());
        assert!(measure(
            &raw(4, 4, 4),
            &SceneImage::zeros(4, 4),
            &NoiseModel::noiseless(),
            false
        )
        .is_err());
    }

    #[test]
    fn measurement_is_deterministic_and_detector_streams_independent() {
        let ps = to_simplex_dmd(&raw(8, 8, 9), 3).unwrap();
        let x = scene(8, 8, 5);
        let noise = NoiseModel {
            sigma: 0.3,
            mu: 1.0,
            bias: BiasTrajectory::RandomWalk { step_std: 0.1 },
            seed: 77,
            ..NoiseModel::noiseless()
        };
        let a = measure(&ps, &x, &noise, false).unwrap();
        let b = measure(&ps, &x, &noise, false).unwrap();
        assert_eq!(a, b);
        let c = measure(&ps, &x, &noise, true).unwrap();
        assert_eq!(a.yprime, c.yprime);
        assert_ne!(c.yprime_b.as_ref().unwrap(), &c.yprime);
    }

    #[test]
    fn trajectories_continue_across_offsets() {
        for traj in [
            BiasTrajectory::RandomWalk { step_std: 1.0 },
            BiasTrajectory::BlockSteps {
                block: 4,
                step_std: 1.0,
            },
            BiasTrajectory::Sinusoidal {
                amplitude: 2.0,
                period: 9.0,
                phase: 0.3,
            },
            BiasTrajectory::LinearDrift {
                start: 1.0,
                slope: -0.1,
            },
        ] {
            let whole = traj.sample(0, 30, 5, 2);
            let tail = traj.sample(12, 18, 5, 2);
            assert_eq!(&whole[12..], &tail[..], "{traj:?}");
        }
        let steps = BiasTrajectory::BlockSteps {
            block: 4,
            step_std: 1.0,
        }
        .sample(0, 12, 1, 2);
        for chunk in steps.chunks(4) {
            assert!(chunk.iter().all(|&v| v == chunk[0]));
        }
        assert_ne!(steps[0], steps[4]);
    }

    #[test]
    fn record_file_round_trip() {
        let ps = to_simplex_dmd(&raw(4, 4, 6), 3).unwrap();
        let rec = measure(&ps, &scene(4, 4, 6), &NoiseModel::gaussian(0.1, 3), true).unwrap();
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        let back = MeasurementRecord::read_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, rec);
        assert!(MeasurementRecord::read_from(&buf[..buf.len() - 8], Path::new("mem")).is_err());
    }
}
