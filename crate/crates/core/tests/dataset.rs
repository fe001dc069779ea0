use std::collections::BTreeSet;
use std::path::Path;

use bokeh_core::dataset::bench::read_bench_manifest;
use bokeh_core::dataset::scene::{ramp_code, MAX_BLUR_INTENSITY};
use bokeh_core::dataset::synth::{read_manifest, MANIFEST_FILE};
use bokeh_core::dataset::*;
use bokeh_core::defocus::{binarize_focus, compute_defocus, DEFAULT_FOCUS_THRESHOLD};
use bokeh_core::degrade::{DegradationConfig, Preset};
use bokeh_core::render::visible_disparity;
use bokeh_core::{io, Error, Image};

fn catalog(dir: &Path, bgs: usize, fgs: usize) -> AssetCatalog {
    write_procedural_catalog(dir, bgs, fgs, 48, 3).unwrap()
}

#[test]
fn scene_sampling_is_deterministic_and_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(dir.path(), 3, 4);
    assert_eq!(
        sample_scene(11, &cat, (32, 24)).unwrap(),
        sample_scene(11, &cat, (32, 24)).unwrap()
    );
    let (mut kmin, mut kmax) = (f32::MAX, f32::MIN);
    for seed in 0..1000 {
        let s = sample_scene(seed, &cat, (32, 24)).unwrap();
        s.validate().unwrap();
        kmin = kmin.min(s.blur_intensity);
        kmax = kmax.max(s.blur_intensity);
        let mut layer_codes: Vec<u16> = (0..24).map(|y| ramp_code(s.ramp_codes, y, 24)).collect();
        layer_codes.extend(s.foregrounds.iter().map(|f| f.disparity_code));
        assert!(layer_codes.contains(&s.focal_code), "seed {seed}");
    }
    assert!(kmin >= 0.0 && kmax <= MAX_BLUR_INTENSITY);
    assert!(kmin < 1.0 && kmax > 31.0);
}

#[test]
fn forced_asset_choice() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(dir.path(), 1, 2);
    for seed in 0..50 {
        let s = sample_scene(seed, &cat, (16, 16)).unwrap();
        assert_eq!(s.background_id, "bg000");
        let ids: BTreeSet<_> = s.foregrounds.iter().map(|f| f.asset_id.as_str()).collect();
        assert_eq!(ids, BTreeSet::from(["fg000", "fg001"]));
    }
}

#[test]
fn insufficient_catalog_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(dir.path(), 1, 1);
    assert!(matches!(
        sample_scene(0, &cat, (16, 16)),
        Err(Error::InsufficientAssets(_))
    ));
}

fn identity_cfg() -> DegradationConfig {
    DegradationConfig::preset(Preset::Identity, 0)
}

#[test]
fn zero_blur_sample_has_identical_bokeh_and_sharp_images() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(&dir.path().join("assets"), 1, 2);
    let mut spec = sample_scene(5, &cat, (40, 32)).unwrap();
    spec.blur_intensity = 0.0;
    let out = dir.path().join("out");
    let rec = synthesize(&cat, &spec, &identity_cfg(), &out, "a").unwrap();
    let bokeh = std::fs::read(out.join(&rec.files.hq_bokeh)).unwrap();
    let sharp = std::fs::read(out.join(&rec.files.hq_allinfocus)).unwrap();
    assert_eq!(bokeh, sharp);
}

#[test]
fn foreground_focus_mask_matches_visibility() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(&dir.path().join("assets"), 1, 2);
    let mut spec = (0..)
        .map(|s| sample_scene(s, &cat, (48, 40)).unwrap())
        .find(|s| matches!(s.focus, FocusTarget::Foreground { index: 1 }))
        .unwrap();
    // Make every other layer at least 2 px out of focus.
    spec.ramp_codes = (0, 1000);
    spec.foregrounds[0].disparity_code = 20000;
    spec.foregrounds[1].disparity_code = 60000;
    spec.focal_code = 60000;
    spec.blur_intensity = 30.0;
    spec.validate().unwrap();
    let scene = spec.compose(&cat).unwrap();
    let visible = visible_disparity(&scene).unwrap();
    let front = io::dequantize_u16::<f32>(60000);
    let out = dir.path().join("out");
    let rec = synthesize(&cat, &spec, &identity_cfg(), &out, "m").unwrap();
    let (w, h, codes) = io::load_u16_codes(&out.join(&rec.files.focus_mask)).unwrap();
    assert_eq!((w, h), (48, 40));
    let mut ones = 0;
    for y in 0..h {
        for x in 0..w {
            let expect = visible.get(x, y) == front;
            assert_eq!(codes[y * w + x] > 0, expect, "({x},{y})");
            ones += usize::from(expect);
        }
    }
    assert!(ones > 0);
}

#[test]
fn sample_replay_is_bitwise_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(&dir.path().join("assets"), 2, 3);
    let spec = sample_scene(99, &cat, (40, 40)).unwrap();
    let cfg = DegradationConfig::preset(Preset::Standard, 1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = synthesize(&cat, &spec, &cfg, &a, "x").unwrap();
    let rb = synthesize(&cat, &spec, &cfg, &b, "x").unwrap();
    assert_eq!(ra, rb);
    assert_eq!(directory_digest(&a).unwrap(), directory_digest(&b).unwrap());
    assert!(verify_sample(&a, &ra).unwrap().ok());

    // The stored defocus is exactly what the stored disparity implies.
    let d = io::load_field::<f32>(&a.join(&ra.files.disparity)).unwrap();
    let r = compute_defocus(&d, &spec.lens()).unwrap().value;
    let mask = binarize_focus(&r, DEFAULT_FOCUS_THRESHOLD);
    let (_, _, codes) = io::load_u16_codes(&a.join(&ra.files.focus_mask)).unwrap();
    assert!(codes.iter().zip(mask.bits()).all(|(&c, &b)| (c > 0) == b));

    // Corrupting the mask is detected.
    let flipped: Vec<u8> = codes.iter().map(|&c| if c > 0 { 0 } else { 255 }).collect();
    std::fs::write(
        a.join(&ra.files.focus_mask),
        io::encode_png_gray8(40, 40, &flipped).unwrap(),
    )
    .unwrap();
    assert!(!verify_sample(&a, &ra).unwrap().mask_matches);
}

#[test]
fn dataset_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cat = catalog(&dir.path().join("assets"), 2, 3);
    let out = dir.path().join("ds");
    let opts = SynthOptions {
        canvas: (32, 32),
        ..SynthOptions::new(4, 7)
    };
    let records = synthesize_dataset(&cat, &out, &opts).unwrap();
    let (header, read) = read_manifest(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(header.root_seed, 7);
    assert_eq!(header.count, 4);
    assert_eq!(read, records);
    assert_eq!(
        records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
        ["s000000", "s000001", "s000002", "s000003"]
    );
    for r in &records {
        assert!(verify_sample(&out, r).unwrap().ok());
    }
}

fn write_corpus(dir: &Path, n: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let img = Image::from_fn(24, 20, |x, y| [(x * (i + 1)) as f32 / 80.0, y as f32 / 20.0, 0.4]).unwrap();
        io::save_linear_png(&img, &dir.join(format!("img{i:02}.png"))).unwrap();
    }
}

#[test]
fn benchmark_build_and_self_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    write_corpus(&corpus, 5);
    std::fs::create_dir_all(corpus.join("labels")).unwrap();
    std::fs::copy(corpus.join("img01.png"), corpus.join("labels/img01.png")).unwrap();
    let cfg = DegradationConfig::preset(Preset::Benchmark, 4);
    let out = dir.path().join("bench");
    let entries = build_benchmark(&corpus, &out, &cfg).unwrap();
    assert_eq!(entries.len(), 5);
    assert!(entries[1].label.is_some() && entries[0].label.is_none());
    for e in &entries {
        assert_eq!(
            std::fs::read(out.join(&e.hq)).unwrap(),
            std::fs::read(corpus.join(e.hq.file_name().unwrap())).unwrap()
        );
    }
    let (header, read) = read_bench_manifest(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!((header.count, read), (5, entries));

    let again = dir.path().join("bench2");
    build_benchmark(&corpus, &again, &cfg).unwrap();
    assert_eq!(directory_digest(&out).unwrap(), directory_digest(&again).unwrap());

    let same = evaluate_dirs(&out.join("hq"), &out.join("hq"), None).unwrap();
    assert_eq!(same.summary.mean_psnr, 99.0);
    assert!((same.summary.mean_ssim - 1.0).abs() < 1e-12);
    let lq = evaluate_dirs(&out.join("lq"), &out.join("hq"), Some(&out.join(MANIFEST_FILE))).unwrap();
    assert_eq!(lq.rows.len(), 5);
    assert!(lq.summary.mean_psnr < 99.0 && lq.summary.mean_psnr > 15.0);
    let csv = lq.to_csv().unwrap();
    assert!(csv.starts_with("id,psnr,ssim\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn benchmark_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let cfg = DegradationConfig::preset(Preset::Benchmark, 0);
    assert!(matches!(
        build_benchmark(&empty, &dir.path().join("o"), &cfg),
        Err(Error::EmptyCorpus)
    ));

    let corpus = dir.path().join("c");
    write_corpus(&corpus, 2);
    std::fs::write(corpus.join("listing.txt"), "img00.png\nnope.png\nimg01.png\ngone.jpg\n").unwrap();
    match build_benchmark(&corpus, &dir.path().join("o"), &cfg) {
        Err(Error::MissingFiles(v)) => {
            assert_eq!(v.len(), 2);
            assert!(v[0].ends_with("nope.png") && v[1].ends_with("gone.jpg"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_reports_missing_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("ref"), 3);
    write_corpus(&dir.path().join("pred"), 2);
    assert!(matches!(
        evaluate_dirs(&dir.path().join("pred"), &dir.path().join("ref"), None),
        Err(Error::MissingFiles(v)) if v.len() == 1
    ));
}
