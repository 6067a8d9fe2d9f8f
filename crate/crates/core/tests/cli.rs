use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_simplex-spi"));
    c.env("RUST_LOG", "info");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_simulate_reconstruct_roundtrip_with_cache() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = run(
        &[
            "gen",
            "--res",
            "16",
            "--k",
            "30",
            "--p",
            "3",
            "--binarize",
            "--out",
            "p.spi",
        ],
        d,
    );
    assert!(g.status.success(), "{}", stderr(&g));
    let line = stdout(&g);
    assert!(line.starts_with("count=40 k=30 p=3 l=10 scale="), "{line}");

    let s = run(
        &[
            "simulate",
            "--patterns",
            "p.spi",
            "--image",
            "synthetic:1",
            "--sigma",
            "0.01",
            "--seed",
            "5",
            "--out",
            "r.spr",
        ],
        d,
    );
    assert!(s.status.success(), "{}", stderr(&s));
    assert!(stdout(&s).contains("mode=simplex-single readings=40"));

    let args = [
        "reconstruct",
        "--patterns",
        "p.spi",
        "--record",
        "r.spr",
        "--reference",
        "synthetic:1",
        "--cache",
        "p.cache",
        "--out",
        "x.pgm",
    ];
    let first = run(&args, d);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(!stderr(&first).contains("cache hit"));
    let psnr: f64 = stdout(&first)
        .trim()
        .strip_prefix("psnr_db=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(psnr.is_finite() && psnr > 10.0, "{psnr}");
    assert!(std::fs::read(d.join("x.pgm")).unwrap().starts_with(b"P5"));

    let second = run(&args, d);
    assert!(second.status.success());
    assert!(stderr(&second).contains("cache hit"), "{}", stderr(&second));
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn direct_complementary_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(
        &["gen", "--res", "8x4", "--k", "10", "--direct", "--out", "d.spi"],
        d
    )
    .status
    .success());
    let s = run(
        &[
            "simulate",
            "--patterns",
            "d.spi",
            "--image",
            "synthetic:0",
            "--complementary",
            "--out",
            "r.spr",
        ],
        d,
    );
    assert!(
        stdout(&s).contains("mode=direct-complementary readings=11"),
        "{}",
        stderr(&s)
    );
    let r = run(
        &[
            "reconstruct",
            "--patterns",
            "d.spi",
            "--record",
            "r.spr",
            "--method",
            "tikhonov",
            "--out",
            "x.pgm",
        ],
        d,
    );
    assert!(r.status.success(), "{}", stderr(&r));
}

#[test]
fn missing_pattern_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "simulate",
            "--patterns",
            "nope.spi",
            "--image",
            "synthetic:0",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.spi"));
}

#[test]
fn invalid_parameters_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let empty = run(&["sweep", "--p-list", ""], d);
    assert_eq!(empty.status.code(), Some(1));
    assert!(stderr(&empty).contains("p-list"));
    let both = run(&["gen", "--k", "4", "--p", "2", "--direct"], d);
    assert_eq!(both.status.code(), Some(1));
    std::fs::write(d.join("bad.toml"), "[gen]\nwidth = 4\n").unwrap();
    let unknown = run(&["--config", "bad.toml", "gen", "--k", "4", "--direct"], d);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("width"));
}

#[test]
fn config_file_supplies_parameters_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "[gen]\nresolution = \"8\"\nk = 12\np = 4\n",
    )
    .unwrap();
    let from_file = run(&["--config", "run.toml", "gen", "--out", "a.spi"], d);
    assert!(
        stdout(&from_file).starts_with("count=15 k=12 p=4 l=3"),
        "{}",
        stderr(&from_file)
    );
    let overridden = run(
        &["--config", "run.toml", "gen", "--p", "2", "--out", "b.spi"],
        d,
    );
    assert!(stdout(&overridden).starts_with("count=18 k=12 p=2 l=6"));
}

#[test]
fn sweep_writes_reproducible_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "--threads",
        "2",
        "--seed",
        "3",
        "sweep",
        "--res",
        "16",
        "--budget",
        "60",
        "--p-list",
        "1,3",
        "--noise-levels",
        "0.01",
        "--images",
        "synthetic:0",
        "--summarize",
        "--out",
    ];
    let a = bin()
        .args(args)
        .arg("a.csv")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(a.status.success(), "{}", stderr(&a));
    let b = bin()
        .args(args)
        .arg("b.csv")
        .current_dir(d)
        .output()
        .unwrap();
    let (ca, cb) = (
        std::fs::read(d.join("a.csv")).unwrap(),
        std::fs::read(d.join("b.csv")).unwrap(),
    );
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("image,mode,p,sigma_ratio,seed,k,psnr_db,wall_ms\n"));
    assert_eq!(text.lines().count(), 4);
    assert!(stdout(&a).contains("mode=simplex-single sigma_ratio=0.01 optimal_p="));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn dynamic_exports_frames() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(
        &[
            "dynamic", "--res", "16", "--frames", "3", "--budget", "60", "--p", "3", "--out", "dyn",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("median_margin_db="));
    assert!(d.join("dyn/frames.csv").exists());
    assert!(d.join("dyn/frame_002_simplex.pgm").exists());
}
