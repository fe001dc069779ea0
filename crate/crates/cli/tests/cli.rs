use std::path::Path;
use std::process::{Command, Output};

use bokeh_core::dataset::directory_digest;
use bokeh_core::{io, Disparity, Image};

fn bokeh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bokeh"))
        .args(args)
        .env("BOKEH_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bokeh(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_inputs(dir: &Path) {
    let img = Image::from_fn(30, 20, |x, y| {
        [x as f32 / 30.0, y as f32 / 20.0, ((x * y) % 5) as f32 / 5.0]
    })
    .unwrap();
    io::save_linear_png(&img, &dir.join("img.png")).unwrap();
    let d = Disparity::from_fn(30, 20, |x, _| x as f32 / 29.0).unwrap();
    io::save_field16(&d, &dir.join("disp.png")).unwrap();
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in [
        "render",
        "synth",
        "bench",
        "degrade",
        "eval",
        "verify",
        "demo-assets",
        "serve",
    ] {
        let out = bokeh(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
    }
    assert_eq!(bokeh(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_and_runtime_errors() {
    let out = bokeh(&["synth", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bokeh(&[]).status.code(), Some(2));
    assert_eq!(bokeh(&["render", "--k", "abc"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = bokeh(&[
        "render",
        "--image",
        "missing.png",
        "--disparity",
        "missing.png",
        "--k",
        "2",
        "--df",
        "0.5",
        "--out",
        s(&dir.path().join("o.png")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: ") && err.contains("missing.png"));
}

#[test]
fn zero_blur_render_reproduces_the_input() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let out = dir.path().join("out.png");
    ok(&[
        "render",
        "--image",
        s(&dir.path().join("img.png")),
        "--disparity",
        s(&dir.path().join("disp.png")),
        "--k",
        "0",
        "--df",
        "0.3",
        "--out",
        s(&out),
    ]);
    let a = io::load_encoded::<f32>(&dir.path().join("img.png")).unwrap();
    let b = io::load_encoded::<f32>(&out).unwrap();
    assert_eq!(a, b);
}

#[test]
fn render_by_focus_point_writes_defocus_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let (out, def, mask) = (
        dir.path().join("o.png"),
        dir.path().join("d.png"),
        dir.path().join("m.png"),
    );
    let stdout = ok(&[
        "render",
        "--image",
        s(&dir.path().join("img.png")),
        "--disparity",
        s(&dir.path().join("disp.png")),
        "--k",
        "8",
        "--focus-x",
        "0",
        "--focus-y",
        "3",
        "--out",
        s(&out),
        "--defocus-out",
        s(&def),
        "--mask-out",
        s(&mask),
    ]);
    assert!(stdout.contains("df=0"));
    let (_, sidecar) = bokeh_core::defocus::import_defocus(&def).unwrap();
    assert_eq!(sidecar.focal_disparity, 0.0);
    let (w, _, codes) = io::load_u16_codes(&mask).unwrap();
    // Radius 8·x/29 < 1 for x ≤ 3.
    assert!(codes[..w].iter().enumerate().all(|(x, &c)| (c > 0) == (x <= 3)));

    let bad = bokeh(&[
        "render",
        "--image",
        s(&dir.path().join("img.png")),
        "--disparity",
        s(&dir.path().join("disp.png")),
        "--k",
        "8",
        "--focus-x",
        "30",
        "--focus-y",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn synth_is_reproducible_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("assets");
    ok(&["demo-assets", "--out", s(&assets), "--size", "64"]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "synth",
            "--assets",
            s(&assets),
            "--out",
            s(out),
            "--count",
            "10",
            "--seed",
            "7",
            "--size",
            "48",
        ]);
    }
    assert_eq!(directory_digest(&a).unwrap(), directory_digest(&b).unwrap());
    assert!(ok(&["verify", "--dataset", s(&a)]).contains("10 samples verified"));

    // A different thread count must not change a byte.
    let c = dir.path().join("c");
    let out = Command::new(env!("CARGO_BIN_EXE_bokeh"))
        .args([
            "--threads",
            "1",
            "synth",
            "--assets",
            s(&assets),
            "--out",
            s(&c),
            "--count",
            "10",
            "--seed",
            "7",
            "--size",
            "48",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(directory_digest(&a).unwrap(), directory_digest(&c).unwrap());
}

#[test]
fn bench_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    for i in 0..3 {
        let img = Image::from_fn(24, 24, |x, y| [((x + i) % 6) as f32 / 6.0, y as f32 / 24.0, 0.5]).unwrap();
        io::save_linear_png(&img, &corpus.join(format!("p{i}.png"))).unwrap();
    }
    let out = dir.path().join("bench");
    assert!(ok(&["bench", "--corpus", s(&corpus), "--out", s(&out), "--seed", "1"]).contains("3 LQ/HQ pairs"));

    let json = ok(&[
        "eval",
        "--pred",
        s(&out.join("hq")),
        "--ref",
        s(&out.join("hq")),
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["mean_psnr"], 99.0);
    assert_eq!(v["mean_ssim"], 1.0);
    assert_eq!(v["count"], 3);

    let (csv, summary) = (dir.path().join("m.csv"), dir.path().join("s.json"));
    ok(&[
        "eval",
        "--pred",
        s(&out.join("lq")),
        "--ref",
        s(&out.join("hq")),
        "--manifest",
        s(&out.join("manifest.jsonl")),
        "--csv",
        s(&csv),
        "--summary",
        s(&summary),
    ]);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 4);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(summary).unwrap()).unwrap();
    assert!(v["mean_psnr"].as_f64().unwrap() < 99.0);

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(
        bokeh(&["bench", "--corpus", s(&empty), "--out", s(&out), "--seed", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn degrade_writes_a_replayable_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let (out, trace) = (dir.path().join("lq.png"), dir.path().join("t.json"));
    ok(&[
        "degrade",
        "--input",
        s(&dir.path().join("img.png")),
        "--out",
        s(&out),
        "--seed",
        "3",
        "--trace",
        s(&trace),
    ]);
    let t: bokeh_core::degrade::DegradationTrace = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    let hq = io::load_linear::<f32>(&dir.path().join("img.png")).unwrap();
    let replayed = bokeh_core::degrade::replay(&hq, &t).unwrap();
    assert_eq!(io::encode_linear_png(&replayed).unwrap(), std::fs::read(&out).unwrap());
}
