use simplex_spi::camera::{measure, MeasurementMode, NoiseModel};
use simplex_spi::experiments::{run_psnr_sweep, synthetic_scene, SweepConfig};
use simplex_spi::recon::{psnr, reconstruct, Method, Reconstructor};
use simplex_spi::sampling::{generate_dct_basis, to_direct_dmd, to_simplex_dmd, SamplingBasisSpec};

fn small_sweep() -> SweepConfig {
    SweepConfig {
        width: 16,
        height: 16,
        budget: 60,
        p_list: vec![1, 2, 3, 5],
        noise_levels: vec![0.0, 1e-2],
        images: vec!["synthetic:0".into(), "synthetic:1".into()],
        seeds: vec![1, 2],
        modes: vec![
            MeasurementMode::DirectSingle,
            MeasurementMode::SimplexSingle,
        ],
        binarize: false,
        method: Method::truncated_svd(),
        ordering: Default::default(),
        record_timing: false,
    }
}

#[test]
fn noise_free_direct_and_simplex_agree_at_equal_k() {
    let x = synthetic_scene(6, 16, 16);
    let raw = generate_dct_basis(&SamplingBasisSpec::new(16, 16, 60)).unwrap();
    let score = |ps| {
        let rec = Reconstructor::for_patterns(&ps, Method::tikhonov()).unwrap();
        let record = measure(&ps, &x, &NoiseModel::noiseless(), false).unwrap();
        let out = reconstruct(&rec, &record, 16, 16).unwrap();
        psnr(x.as_slice(), out.values.as_slice()).unwrap()
    };
    let direct = score(to_direct_dmd(&raw).unwrap());
    for p in [1, 3, 4] {
        let simplex = score(to_simplex_dmd(&raw, p).unwrap());
        assert!(
            (simplex - direct).abs() < 0.01,
            "p = {p}: {simplex} vs {direct}"
        );
    }
}

#[test]
fn compressive_residual_is_unsampled_energy() {
    let x = synthetic_scene(2, 16, 16);
    let raw = generate_dct_basis(&SamplingBasisSpec::new(16, 16, 45)).unwrap();
    let ps = to_simplex_dmd(&raw, 5).unwrap();
    let rec = Reconstructor::for_patterns(&ps, Method::truncated_svd()).unwrap();
    let out = reconstruct(
        &rec,
        &measure(&ps, &x, &NoiseModel::noiseless(), false).unwrap(),
        16,
        16,
    )
    .unwrap();
    let residual = (x.pixels() - &out.values).norm_squared();
    let sampled = (raw.matrix() * x.pixels()).norm_squared();
    assert!((residual - (x.pixels().norm_squared() - sampled)).abs() < 1e-8);
}

#[test]
fn noise_free_sweep_is_the_projection_score() {
    let result = run_psnr_sweep(&small_sweep()).unwrap();
    for image in ["synthetic:0", "synthetic:1"] {
        let x = synthetic_scene(image[10..].parse().unwrap(), 16, 16);
        let mut last = f64::NEG_INFINITY;
        let mut rows: Vec<_> = result
            .rows
            .iter()
            .filter(|r| {
                r.image == image && r.mode == MeasurementMode::SimplexSingle && r.sigma_ratio == 0.0
            })
            .collect();
        rows.sort_by_key(|r| r.k);
        for r in rows {
            let m = generate_dct_basis(&SamplingBasisSpec::new(16, 16, r.k)).unwrap();
            let proj = m.matrix().transpose() * (m.matrix() * x.pixels());
            let want = psnr(x.as_slice(), proj.as_slice()).unwrap();
            let got = *r.psnr_db.as_ref().unwrap();
            assert!(
                (got - want).abs() < 1e-6,
                "{image} k={}: {got} vs {want}",
                r.k
            );
            assert!(got >= last - 1e-9);
            last = got;
        }
    }
}

#[test]
fn sweep_csv_is_reproducible_and_ordered() {
    let cfg = small_sweep();
    let run = || {
        let mut buf = Vec::new();
        run_psnr_sweep(&cfg).unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    let a = run();
    assert_eq!(a, run());
    let text = String::from_utf8(a).unwrap();
    // 2 images x (1 direct + 4 simplex) x 2 levels x 2 seeds.
    assert_eq!(text.lines().count(), 1 + 2 * 5 * 2 * 2);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("synthetic:0,direct-single,0,0,1,59,"));
    assert!(!text.contains('\r'));
}

#[test]
fn unreadable_image_yields_error_rows() {
    let mut cfg = small_sweep();
    cfg.images.push("/no/such/image.pgm".into());
    let result = run_psnr_sweep(&cfg).unwrap();
    let (bad, good): (Vec<_>, Vec<_>) = result.rows.iter().partition(|r| r.image.starts_with('/'));
    assert!(!bad.is_empty() && bad.iter().all(|r| r.psnr_db.is_err()));
    assert!(good.iter().all(|r| r.psnr_db.is_ok()));
}

#[test]
fn budget_is_never_exceeded() {
    let result = run_psnr_sweep(&small_sweep()).unwrap();
    for r in &result.rows {
        let displayed = r.k + r.k.checked_div(r.p).unwrap_or(1);
        assert!(displayed <= 60, "{r:?}");
    }
}
