//! Command-line front end.
//!
//! Every subcommand reads its parameters from an optional TOML table named
//! after it (`[gen]`, `[simulate]`, ...) and lets flags override them. All
//! parameters are validated before any computation starts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use crate::camera::{measure, BiasTrajectory, MeasurementMode, MeasurementRecord, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::experiments::{
    dynamic_frames, find_optimal_p, load_image, run_dynamic_scene, run_psnr_sweep, DynamicConfig,
    SweepConfig,
};
use crate::image_io::save_pgm;
use crate::recon::{psnr, reconstruct, Method, Reconstructor};
use crate::sampling::{
    binarize_error_diffusion, generate_dct_basis, to_direct_dmd, to_simplex_dmd, BasisOrdering,
    PatternSet, SamplingBasisSpec,
};

#[derive(Debug, Parser)]
#[command(
    name = "simplex-spi",
    version,
    about = "Simplex-coded single-pixel imaging toolkit"
)]
pub struct Cli {
    /// Noise seed; for `sweep` it replaces the seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with one table per subcommand. Flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (or directory for `dynamic`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a DCT pattern set mapped for a DMD.
    Gen(GenArgs),
    /// Measure a scene with a pattern set.
    Simulate(SimulateArgs),
    /// Reconstruct an image from a measurement record.
    Reconstruct(ReconstructArgs),
    /// PSNR versus simplex order across noise levels.
    Sweep(SweepArgs),
    /// Direct versus simplex coding on a frame sequence under drifting bias.
    Dynamic(DynamicArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// `N` or `WxH`.
    #[arg(long)]
    pub res: Option<String>,
    /// Number of signed DCT measurements.
    #[arg(long)]
    pub k: Option<usize>,
    /// Simplex order.
    #[arg(long)]
    pub p: Option<usize>,
    /// Direct mapping instead of simplex coding.
    #[arg(long)]
    pub direct: bool,
    /// Binarize with error diffusion.
    #[arg(long)]
    pub binarize: bool,
    /// `low-frequency-first` or `zig-zag`.
    #[arg(long)]
    pub ordering: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    /// Image file or `synthetic:<n>`.
    #[arg(long)]
    pub image: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Add a second detector reading the complementary patterns.
    #[arg(long)]
    pub complementary: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// `frequency-weighted` (alias `fdri`), `tikhonov` or `tsvd`.
    #[arg(long)]
    pub method: Option<String>,
    /// Method parameter: `mu`, `lambda` or the rank tolerance.
    #[arg(long)]
    pub param: Option<f64>,
    /// Ground-truth image for a PSNR score.
    #[arg(long)]
    pub reference: Option<String>,
    /// Reconstructor cache file, reused when it matches the patterns.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub res: Option<String>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Comma-separated simplex orders.
    #[arg(long)]
    pub p_list: Option<String>,
    /// Comma-separated `sigma / y_max` ratios.
    #[arg(long)]
    pub noise_levels: Option<String>,
    /// Comma-separated image files or `synthetic:<n>` names.
    #[arg(long)]
    pub images: Option<String>,
    /// Comma-separated measurement modes.
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub param: Option<f64>,
    /// Use continuous patterns.
    #[arg(long)]
    pub no_binarize: bool,
    /// Record per-row wall time.
    #[arg(long)]
    pub timing: bool,
    /// Print the optimal `p` per mode and noise level.
    #[arg(long)]
    pub summarize: bool,
}

#[derive(Debug, Args)]
pub struct DynamicArgs {
    #[arg(long)]
    pub res: Option<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Synthetic scene index for the generated sequence.
    #[arg(long)]
    pub scene: Option<u64>,
    /// Comma-separated frame images, used instead of a synthetic sequence.
    #[arg(long)]
    pub images: Option<String>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Noise in units of the brightest frame's total intensity.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub param: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    gen: GenSection,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    reconstruct: ReconstructSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    dynamic: DynamicSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenSection {
    resolution: Option<String>,
    k: Option<usize>,
    p: Option<usize>,
    direct: Option<bool>,
    binarize: Option<bool>,
    ordering: Option<BasisOrdering>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateSection {
    patterns: Option<PathBuf>,
    image: Option<String>,
    sigma: Option<f64>,
    mu: Option<f64>,
    complementary: Option<bool>,
    bias: Option<BiasTrajectory>,
    bias_b: Option<BiasTrajectory>,
    start_index: Option<u64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReconstructSection {
    patterns: Option<PathBuf>,
    record: Option<PathBuf>,
    method: Option<String>,
    param: Option<f64>,
    reference: Option<String>,
    cache: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    resolution: Option<String>,
    budget: Option<usize>,
    p_list: Option<Vec<usize>>,
    noise_levels: Option<Vec<f64>>,
    images: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    modes: Option<Vec<MeasurementMode>>,
    binarize: Option<bool>,
    method: Option<String>,
    param: Option<f64>,
    ordering: Option<BasisOrdering>,
    record_timing: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicSection {
    resolution: Option<String>,
    frames: Option<usize>,
    scene: Option<u64>,
    images: Option<Vec<String>>,
    budget: Option<usize>,
    p: Option<usize>,
    sigma_ratio: Option<f64>,
    bias: Option<BiasTrajectory>,
    bias_b: Option<BiasTrajectory>,
    binarize: Option<bool>,
    method: Option<String>,
    param: Option<f64>,
    ordering: Option<BasisOrdering>,
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// `"64"` is square; `"64x48"` is width by height.
pub fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let parse = |t: &str| t.trim().parse::<usize>().ok().filter(|&v| v > 0);
    let dims = match s.split_once(['x', 'X']) {
        Some((w, h)) => parse(w).zip(parse(h)),
        None => parse(s).map(|n| (n, n)),
    };
    match dims {
        Some(d) => Ok(d),
        None => invalid(format!("bad resolution '{s}', expected N or WxH")),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().or_else(|_| invalid(format!("bad {what} '{t}'"))))
        .collect()
}

fn parse_ordering(s: &str) -> Result<BasisOrdering> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .or_else(|_| invalid(format!("unknown basis ordering '{s}'")))
}

fn resolve_method(name: Option<String>, param: Option<f64>) -> Result<Method> {
    match name {
        Some(n) => Method::from_name(&n, param),
        None => Method::from_name("frequency-weighted", param),
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.map_or_else(
        || invalid(format!("missing required parameter '{name}'")),
        Ok,
    )
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return invalid("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    let config = load_config(cli.config.as_deref())?;
    let out = cli.out;
    match cli.command {
        Command::Gen(a) => gen(a, config.gen, out),
        Command::Simulate(a) => simulate(a, config.simulate, cli.seed, out),
        Command::Reconstruct(a) => reconstruct_cmd(a, config.reconstruct, out),
        Command::Sweep(a) => sweep(a, config.sweep, cli.seed, out),
        Command::Dynamic(a) => dynamic(a, config.dynamic, cli.seed, out),
    }
}

fn gen(a: GenArgs, c: GenSection, out: Option<PathBuf>) -> Result<()> {
    let (width, height) = parse_resolution(&a.res.or(c.resolution).unwrap_or_else(|| "64".into()))?;
    let k = required(a.k.or(c.k), "k")?;
    let direct = a.direct || c.direct.unwrap_or(false);
    let p = a.p.or(c.p);
    let binarize = a.binarize || c.binarize.unwrap_or(false);
    let ordering = match a.ordering {
        Some(s) => parse_ordering(&s)?,
        None => c.ordering.unwrap_or_default(),
    };
    let spec = SamplingBasisSpec {
        width,
        height,
        count: k,
        ordering,
    };
    spec.validate()?;
    let out = out.unwrap_or_else(|| "patterns.spi".into());

    let raw = generate_dct_basis(&spec)?;
    let mapped = match (direct, p) {
        (true, Some(_)) => return invalid("--direct and --p are mutually exclusive"),
        (true, None) => to_direct_dmd(&raw)?,
        (false, Some(p)) => to_simplex_dmd(&raw, p)?,
        (false, None) => return invalid("either --p or --direct is required"),
    };
    let set = if binarize {
        binarize_error_diffusion(&mapped)?
    } else {
        mapped
    };
    set.save(&out)?;
    let fmt_opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    println!(
        "count={} k={} p={} l={} scale={}",
        set.count(),
        set.k(),
        fmt_opt(set.p().map(|v| v.to_string())),
        fmt_opt(set.l().map(|v| v.to_string())),
        fmt_opt(set.scale().map(|v| v.to_string())),
    );
    info!("wrote {}", out.display());
    Ok(())
}

fn simulate(
    a: SimulateArgs,
    c: SimulateSection,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let patterns = required(a.patterns.or(c.patterns), "patterns")?;
    let image = required(a.image.or(c.image), "image")?;
    let noise = NoiseModel {
        sigma: a.sigma.or(c.sigma).unwrap_or(0.0),
        mu: a.mu.or(c.mu).unwrap_or(0.0),
        bias: c.bias.unwrap_or_default(),
        bias_b: c.bias_b,
        seed: seed.or(c.seed).unwrap_or(0),
        start_index: c.start_index.unwrap_or(0),
    };
    noise.validate()?;
    let complementary = a.complementary || c.complementary.unwrap_or(false);
    let out = out.unwrap_or_else(|| "record.spr".into());

    let ps = PatternSet::load(&patterns)?;
    let scene = load_image(&image, ps.width(), ps.height())?;
    let record = measure(&ps, &scene, &noise, complementary)?;
    record.save(&out)?;
    println!("mode={} readings={}", record.mode, record.yprime.len());
    info!("wrote {}", out.display());
    Ok(())
}

fn cached_reconstructor(
    ps: &PatternSet,
    method: Method,
    cache: Option<&Path>,
) -> Result<Reconstructor> {
    if let Some(path) = cache {
        if path.exists() {
            let rec = Reconstructor::load_cache(path)?;
            if rec.fingerprint() == ps.fingerprint() && rec.method() == method {
                info!("cache hit: {}", path.display());
                return Ok(rec);
            }
            info!(
                "cache {} does not match these patterns, rebuilding",
                path.display()
            );
        }
    }
    let rec = Reconstructor::for_patterns(ps, method)?;
    if let Some(path) = cache {
        rec.save_cache(path)?;
        info!("cache written: {}", path.display());
    }
    Ok(rec)
}

fn reconstruct_cmd(a: ReconstructArgs, c: ReconstructSection, out: Option<PathBuf>) -> Result<()> {
    let patterns = required(a.patterns.or(c.patterns), "patterns")?;
    let record_path = required(a.record.or(c.record), "record")?;
    let method = resolve_method(a.method.or(c.method), a.param.or(c.param))?;
    let reference = a.reference.or(c.reference);
    let cache = a.cache.or(c.cache);
    let out = out.unwrap_or_else(|| "recon.pgm".into());

    let ps = PatternSet::load(&patterns)?;
    let record = MeasurementRecord::load(&record_path)?;
    let rec = cached_reconstructor(&ps, method, cache.as_deref())?;
    let result = reconstruct(&rec, &record, ps.width(), ps.height())?;
    save_pgm(&out, result.values.as_slice(), ps.width(), ps.height())?;
    if let Some(r) = reference {
        let scene = load_image(&r, ps.width(), ps.height())?;
        println!(
            "psnr_db={}",
            psnr(scene.as_slice(), result.values.as_slice())?
        );
    }
    info!("wrote {}", out.display());
    Ok(())
}

fn sweep(a: SweepArgs, c: SweepSection, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = SweepConfig::desk_scale();
    if let Some(r) = a.res.or(c.resolution) {
        (cfg.width, cfg.height) = parse_resolution(&r)?;
    }
    if let Some(b) = a.budget.or(c.budget) {
        cfg.budget = b;
    }
    match a.p_list {
        Some(s) => cfg.p_list = parse_list(&s, "simplex order")?,
        None => cfg.p_list = c.p_list.unwrap_or(cfg.p_list),
    }
    match a.noise_levels {
        Some(s) => cfg.noise_levels = parse_list(&s, "noise level")?,
        None => cfg.noise_levels = c.noise_levels.unwrap_or(cfg.noise_levels),
    }
    match a.images {
        Some(s) => cfg.images = parse_list(&s, "image")?,
        None => cfg.images = c.images.unwrap_or(cfg.images),
    }
    match a.modes {
        Some(s) => cfg.modes = parse_list(&s, "mode")?,
        None => cfg.modes = c.modes.unwrap_or(cfg.modes),
    }
    match seed {
        Some(s) => cfg.seeds = vec![s],
        None => cfg.seeds = c.seeds.unwrap_or(cfg.seeds),
    }
    cfg.binarize = !a.no_binarize && c.binarize.unwrap_or(true);
    cfg.record_timing = a.timing || c.record_timing.unwrap_or(false);
    cfg.ordering = c.ordering.unwrap_or(cfg.ordering);
    cfg.method = resolve_method(a.method.or(c.method), a.param.or(c.param))?;
    cfg.validate()?;

    let result = run_psnr_sweep(&cfg)?;
    let mut summary: Box<dyn Write> = match &out {
        Some(path) => {
            result
                .write_csv(create(path)?)
                .map_err(|e| Error::io(path, e))?;
            info!("wrote {}", path.display());
            Box::new(std::io::stdout())
        }
        None => {
            result
                .write_csv(std::io::stdout().lock())
                .map_err(|e| Error::io("<stdout>", e))?;
            Box::new(std::io::stderr())
        }
    };
    if a.summarize {
        let stdio = |e| Error::io("<stdout>", e);
        for &mode in &cfg.modes {
            for &level in &cfg.noise_levels {
                let means = result.mean_psnr_by_p(mode, level);
                if mode.is_simplex() {
                    let p = find_optimal_p(&result, mode, level)?;
                    writeln!(
                        summary,
                        "mode={mode} sigma_ratio={level} optimal_p={p} mean_psnr_db={:.3}",
                        means[&p]
                    )
                    .map_err(stdio)?;
                } else if let Some(m) = means.values().next() {
                    writeln!(
                        summary,
                        "mode={mode} sigma_ratio={level} mean_psnr_db={m:.3}"
                    )
                    .map_err(stdio)?;
                }
            }
        }
    }
    Ok(())
}

fn dynamic(
    a: DynamicArgs,
    c: DynamicSection,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = DynamicConfig::desk_scale();
    let (width, height) = parse_resolution(&a.res.or(c.resolution).unwrap_or_else(|| "64".into()))?;
    cfg.budget = a.budget.or(c.budget).unwrap_or(cfg.budget);
    cfg.p = a.p.or(c.p).unwrap_or(cfg.p);
    cfg.sigma_ratio = a.sigma.or(c.sigma_ratio).unwrap_or(cfg.sigma_ratio);
    if let Some(b) = c.bias {
        cfg.bias = b;
        cfg.bias_b = c.bias_b;
    } else if c.bias_b.is_some() {
        cfg.bias_b = c.bias_b;
    }
    cfg.binarize = c.binarize.unwrap_or(cfg.binarize);
    cfg.ordering = c.ordering.unwrap_or(cfg.ordering);
    cfg.seed = seed.or(c.seed).unwrap_or(cfg.seed);
    cfg.method = resolve_method(a.method.or(c.method), a.param.or(c.param))?;
    cfg.validate()?;
    let images = match a.images {
        Some(s) => Some(parse_list::<String>(&s, "image")?),
        None => c.images,
    };
    let frames = match images {
        Some(list) => list
            .iter()
            .map(|n| load_image(n, width, height))
            .collect::<Result<Vec<_>>>()?,
        None => dynamic_frames(
            a.scene.or(c.scene).unwrap_or(0),
            a.frames.or(c.frames).unwrap_or(10),
            width,
            height,
        ),
    };
    let dir = out.unwrap_or_else(|| "dynamic_out".into());

    let result = run_dynamic_scene(&frames, &cfg)?;
    result.export_frames(&dir)?;
    let csv = dir.join("frames.csv");
    result
        .write_csv(create(&csv)?)
        .map_err(|e| Error::io(&csv, e))?;
    for f in &result.frames {
        println!(
            "frame={} direct_psnr_db={:.3} simplex_psnr_db={:.3}",
            f.frame, f.direct_psnr, f.simplex_psnr
        );
    }
    println!("median_margin_db={:.3}", result.median_margin());
    info!("wrote {}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolutions() {
        assert_eq!(parse_resolution("64").unwrap(), (64, 64));
        assert_eq!(parse_resolution("32x16").unwrap(), (32, 16));
        assert!(parse_resolution("0").is_err());
        assert!(parse_resolution("8x").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("1, 2,5", "p").unwrap(), vec![1, 2, 5]);
        assert!(parse_list::<usize>("", "p").unwrap().is_empty());
        assert!(parse_list::<usize>("1,x", "p").is_err());
        let modes: Vec<MeasurementMode> = parse_list("simplex-single", "mode").unwrap();
        assert_eq!(modes, vec![MeasurementMode::SimplexSingle]);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(toml::from_str::<ConfigFile>("[gen]\nk = 5\n").is_ok());
        assert!(toml::from_str::<ConfigFile>("[gen]\nkk = 5\n").is_err());
        assert!(toml::from_str::<ConfigFile>("[other]\n").is_err());
        let c: ConfigFile = toml::from_str(
            "[simulate]\nbias = { type = \"sinusoidal\", amplitude = 1.0, period = 50.0 }\n",
        )
        .unwrap();
        assert!(matches!(
            c.simulate.bias,
            Some(BiasTrajectory::Sinusoidal { .. })
        ));
    }

    #[test]
    fn orderings() {
        assert_eq!(parse_ordering("zig-zag").unwrap(), BasisOrdering::ZigZag);
        assert!(parse_ordering("spiral").is_err());
    }
}
