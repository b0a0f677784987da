use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inpaint::io::*;
use inpaint_core::{HoleMask, PlaneImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_inpaint"));
    c.env_clear();
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

/// Small textured scene with all pipeline inputs on disk.
fn scene(dir: &Path, w: usize, h: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = PlaneImage::from_fn(w, h, 3, |x, y, c| {
        let v = 0.5 + 0.3 * ((x as f32 * 0.4 + c as f32).sin() * (y as f32 * 0.3).cos());
        v + rng.gen_range(-0.03..0.03)
    });
    let mask = HoleMask::with_rect(w, h, w / 3, h / 3, w / 4, h / 4);
    write_png(&dir.join("image.png"), &img).unwrap();
    write_mask(&dir.join("mask.png"), &mask).unwrap();
    let cw = 128;
    let ch = (h * cw + w / 2) / w;
    write_png(&dir.join("coarse.png"), &PlaneImage::filled(cw, ch, 3, 0.5)).unwrap();
    write_pfm(&dir.join("depth.pfm"), &PlaneImage::from_fn(w, h, 1, |_, y, _| 1.0 + y as f32)).unwrap();
    write_png(&dir.join("seg.png"), &PlaneImage::from_fn(w, h, 3, |x, _, _| if x < w / 2 { 1.0 / 255.0 } else { 2.0 / 255.0 })).unwrap();
    let p = |n: &str| dir.join(n).display().to_string();
    vec![
        "pipeline".into(),
        "--image".into(),
        p("image.png"),
        "--mask".into(),
        p("mask.png"),
        "--coarse".into(),
        p("coarse.png"),
        "--depth".into(),
        p("depth.pfm"),
        "--segmentation".into(),
        p("seg.png"),
        "--structure".into(),
        "auto".into(),
    ]
}

#[test]
fn pipeline_writes_winner_manifest_and_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = scene(dir.path(), 120, 96);
    let out = dir.path().join("out");
    args.extend(["--out".into(), out.display().to_string(), "--save-candidates".into(), "--dump-nnf".into()]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("resolved configuration"));
    let winner = read_rgb(&out.join("winner.png")).unwrap();
    assert_eq!(winner.dims(), (120, 96));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let cands = m["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 8);
    let names = ["none", "s", "d", "sd", "g", "sg", "dg", "sdg"];
    for (i, c) in cands.iter().enumerate() {
        let file = format!("candidate_{i}_{}.png", names[i]);
        assert_eq!(c["file"], file.as_str());
        assert!(out.join(&file).is_file());
    }
    let matrix = m["curation"]["matrix"].as_array().unwrap();
    for i in 0..8 {
        for j in 0..8 {
            assert_eq!(matrix[i][j].as_f64().unwrap(), -matrix[j][i].as_f64().unwrap());
        }
    }
    assert!(out.join("timings.json").is_file());
    let (w, h, _) = read_nnf(&out.join("nnf.bin")).unwrap();
    assert_eq!((w, h), (120, 96));
    // Pixels outside the hole are untouched.
    let input = read_rgb(&dir.path().join("image.png")).unwrap();
    let mask = read_mask(&dir.path().join("mask.png")).unwrap();
    for y in 0..96 {
        for x in 0..120 {
            if !mask.is_hole(x, y) {
                assert_eq!(input.pixel(x, y), winner.pixel(x, y));
            }
        }
    }
}

#[test]
fn missing_flag_and_bad_inputs_exit_with_input_error() {
    let o = run(&["pipeline", "--image", "a.png", "--mask", "m.png"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--coarse"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let mut args = scene(dir.path(), 64, 48);
    let i = args.iter().position(|a| a == "--depth").unwrap();
    args[i + 1] = dir.path().join("nope.pfm").display().to_string();
    let o = bin().args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.pfm"), "{}", stderr(&o));

    let mut args = scene(dir.path(), 64, 48);
    write_mask(&dir.path().join("small.png"), &HoleMask::with_rect(60, 48, 1, 1, 2, 2)).unwrap();
    let i = args.iter().position(|a| a == "--mask").unwrap();
    args[i + 1] = dir.path().join("small.png").display().to_string();
    let o = bin().args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("small.png"), "{}", stderr(&o));
}

#[test]
fn dry_run_prints_resolved_config_with_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = scene(dir.path(), 64, 48);
    std::fs::write(dir.path().join("run.conf"), "seed = 5\npatch_size = 9\nvote = weighted\n").unwrap();
    args.extend([
        "--config".into(),
        dir.path().join("run.conf").display().to_string(),
        "--seed".into(),
        "11".into(),
        "--dry-run".into(),
    ]);
    let o = bin().args(&args).env("INPAINT_PATCH_SIZE", "5").output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("seed = 11"));
    assert!(text.contains("patch_size = 5"));
    assert!(text.contains("vote = weighted"));
    assert!(!dir.path().join("out").exists());

    let o = bin().args(&args).env("INPAINT_PATCHSIZE", "5").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("INPAINT_PATCHSIZE"), "{}", stderr(&o));
}

fn candidates(dir: &Path, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mask = HoleMask::with_rect(48, 48, 16, 16, 16, 16);
    write_mask(&dir.join("cmask.png"), &mask).unwrap();
    (0..n)
        .map(|i| {
            let img = PlaneImage::from_fn(48, 48, 3, |_, _, _| rng.gen());
            let p = dir.join(format!("c{i}.png"));
            write_png(&p, &img).unwrap();
            p.display().to_string()
        })
        .collect()
}

#[test]
fn curate_with_command_scorer_prefers_left() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("calls.log");
    let scorer = script(
        dir.path(),
        "left.sh",
        &format!(
            "test -f \"$1/left.png\" && test -f \"$1/right.png\" && test -f \"$1/mask.png\" || exit 9\necho x >> {}\necho '0.7 0.2 0.1'",
            log.display()
        ),
    );
    let mut args = vec!["curate".to_string()];
    args.extend(candidates(dir.path(), 4));
    let report = dir.path().join("r.json");
    args.extend([
        "--mask".into(),
        dir.path().join("cmask.png").display().to_string(),
        "--scorer".into(),
        format!("cmd:{}", scorer.display()),
        "--report".into(),
        report.display().to_string(),
    ]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("winner 0 "));
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 6);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!((r["matrix"][0][1].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn curate_two_candidates_follows_the_single_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let scorer = script(dir.path(), "right.sh", "echo '0.1 0.3 0.6'");
    let mut args = vec!["curate".to_string()];
    args.extend(candidates(dir.path(), 2));
    args.extend([
        "--mask".into(),
        dir.path().join("cmask.png").display().to_string(),
        "--scorer".into(),
        format!("cmd:{}", scorer.display()),
    ]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("winner 1 "));
}

#[test]
fn scorer_failures_exit_with_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    let cands = candidates(dir.path(), 3);
    for (name, body) in [("fail.sh", "exit 1"), ("bad.sh", "echo '0.5 0.5'"), ("sum.sh", "echo '0.5 0.5 0.5'")] {
        let s = script(dir.path(), name, body);
        let mut args = vec!["curate".to_string()];
        args.extend(cands.clone());
        args.extend([
            "--mask".into(),
            dir.path().join("cmask.png").display().to_string(),
            "--scorer".into(),
            format!("cmd:{}", s.display()),
        ]);
        let o = bin().args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(3), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains("scorer failed on pair (0, 1)"), "{name}: {}", stderr(&o));
    }
}

#[test]
fn parse_verdict_renormalizes_within_tolerance() {
    use inpaint::scorer::parse_verdict;
    let v = parse_verdict("0.5 0.3 0.2005\n").unwrap();
    assert!((v.o1 + v.o2 + v.o3 - 1.0).abs() < 1e-12);
    assert!(parse_verdict("0.5 0.3 0.21").is_err());
    assert!(parse_verdict("0.5 -0.1 0.6").is_err());
    assert!(parse_verdict("a b c").is_err());
}

#[test]
fn holegen_and_rtv_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("masks");
    let o = run(&["holegen", "--kind", "freeform", "--count", "3", "--seed", "4", "--width", "256", "--height", "192", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_mask(&out.join("mask_002.png")).unwrap();
    assert_eq!(m.dims(), (256, 192));
    assert!(m.hole_count() > 0);
    let o = run(&["holegen", "--kind", "object", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let img = PlaneImage::from_fn(40, 30, 3, |x, _, _| if x < 20 { 0.2 } else { 0.8 });
    write_png(&dir.path().join("in.png"), &img).unwrap();
    let s = dir.path().join("s.png");
    let o = run(&["rtv", dir.path().join("in.png").to_str().unwrap(), "--lambda", "0.01", "--out", s.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_image(&s).unwrap().dims(), (40, 30));
}

#[test]
fn bench_reports_sentinel_for_ground_truth_and_lists_missing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    std::fs::create_dir_all(d.join("gt")).unwrap();
    std::fs::create_dir_all(d.join("copy")).unwrap();
    let mut entries = Vec::new();
    for id in ["b", "a"] {
        let img = PlaneImage::from_fn(300, 280, 3, |_, _, _| rng.gen());
        write_png(&d.join(format!("{id}.png")), &img).unwrap();
        write_mask(&d.join(format!("{id}_m.png")), &HoleMask::with_rect(300, 280, 100, 100, 50, 40)).unwrap();
        write_png(&d.join("gt").join(format!("{id}.png")), &img).unwrap();
        write_png(&d.join("copy").join(format!("{id}.png")), &img).unwrap();
        entries.push(serde_json::json!({"image": format!("{id}.png"), "mask": format!("{id}_m.png"), "id": id}));
    }
    std::fs::write(d.join("corpus.json"), serde_json::to_string(&entries).unwrap()).unwrap();
    let out = d.join("report");
    let o = run(&[
        "bench", "--manifest", d.join("corpus.json").to_str().unwrap(), "--methods", d.join("gt").to_str().unwrap(),
        d.join("copy").to_str().unwrap(), "--mode", "patch", "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for s in r["summary"].as_array().unwrap() {
        assert_eq!(s["mean_psnr"], 99.0);
        assert_eq!(s["mean_ssim"], 1.0);
    }
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("a,copy,patch,99.0,1.0"), "{csv}");

    std::fs::remove_file(d.join("gt").join("a.png")).unwrap();
    std::fs::remove_file(d.join("copy").join("b.png")).unwrap();
    let o = run(&[
        "bench", "--manifest", d.join("corpus.json").to_str().unwrap(), "--methods", d.join("gt").to_str().unwrap(),
        d.join("copy").to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("2 missing") && e.contains("gt/a.png") && e.contains("copy/b.png"), "{e}");
}
