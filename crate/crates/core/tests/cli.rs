use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use latent_spread::io::{read_latents, read_report};
use latent_spread::tensor::{DistanceMode, LatentShape};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-spread"))
        .args(args)
        .env_remove("LATENT_SPREAD_PROVIDER")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solid(dir: &Path, name: &str, rgb: [u8; 3]) -> PathBuf {
    let p = dir.join(name);
    RgbImage::from_pixel(8, 8, Rgb(rgb)).save(&p).unwrap();
    p
}

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
    p
}

#[test]
fn baseline_sample_writes_batch_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["sample", "--strategy", "baseline", "-B", "3", "--npy", "--out", s(dir.path())]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["runs"][0]["trace"]["slots"].as_array().unwrap().len(), 3);
    let (header, batch) = read_latents(dir.path().join("baseline_b3_0.dlt")).unwrap();
    assert_eq!(batch.len(), 3);
    assert_eq!(header.shape, LatentShape::default());
    assert!(dir.path().join("baseline_b3_0.npy").exists());
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"strategy\": \"baseline\""));
}

#[test]
fn same_arguments_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["sample", "-B", "3,5", "--batches", "2", "--seed", "17", "--npy", "--out", s(d.path())]);
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn pooling_cap_batch_of_fifty() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "--strategy", "pooling_cap", "--preset", "standard", "-B", "50", "--out", s(dir.path())]);
    let (_, batch) = read_latents(dir.path().join("pooling_cap_b50_0.dlt")).unwrap();
    assert_eq!(batch.len(), 50);
    let mode = DistanceMode::PooledL2 { kernel: 8 };
    for i in 0..50 {
        for j in i + 1..50 {
            assert!(mode.distance(&batch[i], &batch[j]).unwrap() >= 3.1);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sample", "--strategy", "cap", "-B", "3", "--d-min", "1000", "--attempt-budget", "100",
        "--shape", "1x8x8", "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("attempt budget of 100 exhausted"));

    assert_eq!(run(&["sample", "--strategy", "latin", "--out", s(dir.path())]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    let out = run(&["analyze-color", "--manifest", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn large_cap_batches_print_guidance() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["sample", "--strategy", "cap", "-B", "51", "--d-min", "0", "--shape", "1x8x8", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pooling_max is recommended"));
}

#[test]
fn color_report_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (r, g, b) = (solid(d, "r.png", [200, 10, 10]), solid(d, "g.png", [10, 200, 10]), solid(d, "b.png", [10, 10, 200]));
    let gray = solid(d, "gray.png", [90, 90, 90]);
    let manifest = serde_json::json!({ "batches": [
        { "id": "m0", "items": [s(&r), s(&g), s(&b)], "strategy": "pooling_max" },
        { "id": "m1", "items": [s(&b), s(&g), s(&r)], "strategy": "pooling_max" },
        { "id": "b0", "items": [s(&gray), s(&gray), s(&r)], "strategy": "baseline" },
        { "id": "b1", "items": [s(&gray), s(&g), s(&r)], "strategy": "baseline" },
        { "id": "g0", "items": [s(&gray), s(&gray)] },
    ]});
    let mpath = d.join("manifest.json");
    fs::write(&mpath, manifest.to_string()).unwrap();
    let out_dir = d.join("color");
    ok(&["analyze-color", "--manifest", s(&mpath), "--baseline", "baseline", "--context", "preset=standard", "--out", s(&out_dir)]);

    let report = read_report(out_dir.join("report.json")).unwrap();
    for k in ["1", "1.1", "1.2"] {
        assert_eq!(report.get("pooling_max", &format!("K={k}/c3")).unwrap().value, 1.0);
        assert_eq!(report.get("untagged", &format!("K={k}/avg")).unwrap().value, 0.0);
        assert_eq!(report.get("baseline", &format!("K={k}/c2")).unwrap().value, 0.5);
    }
    assert_eq!(report.context["preset"], "standard");
    let imp = fs::read_to_string(out_dir.join("improvements.csv")).unwrap();
    assert!(imp.lines().any(|l| l == "pooling_max,K=1/c2,0.5,1,2"), "{imp}");
    assert!(imp.lines().any(|l| l == "pooling_max,K=1/c3,0,1,n/a"), "{imp}");
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("group,metric,kind,value,half_width,n\n"));

    fs::write(d.join("junk.png"), b"nope").unwrap();
    let bad = serde_json::json!({ "batches": [{ "id": "x", "items": [s(&d.join("junk.png"))] }] });
    fs::write(&mpath, bad.to_string()).unwrap();
    let out = run(&["analyze-color", "--manifest", s(&mpath), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("junk.png"));
}

#[test]
fn pairwise_with_stub_and_builtin_providers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let imgs: Vec<PathBuf> = (1..=3).map(|i| solid(d, &format!("{i}.png"), [i * 40, 0, 0])).collect();
    let stub = script(
        d,
        "stub.sh",
        r#"awk -F'\t' '{ n = split($1, p, "/"); m = split($2, q, "/"); print (p[n] + 0) + (q[m] + 0) - 2 }' "$1" > "$2""#,
    );
    let manifest = serde_json::json!({ "batches": [
        { "id": "a", "items": [s(&imgs[0]), s(&imgs[1]), s(&imgs[2])], "prompt": "red" },
    ]});
    let mpath = d.join("m.json");
    fs::write(&mpath, manifest.to_string()).unwrap();
    let out_dir = d.join("pw");
    ok(&["pairwise", "--manifest", s(&mpath), "--provider", s(&stub), "--prompt-pairs", "10", "--out", s(&out_dir)]);
    let report = read_report(out_dir.join("report.json")).unwrap();
    assert_eq!(report.get("untagged", "avg_pairwise").unwrap().value, 2.0);
    assert_eq!(report.get("untagged", "batch/a").unwrap().value, 2.0);

    // Same provider through the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_latent-spread"))
        .args(["pairwise", "--manifest", s(&mpath), "--out", s(&out_dir)])
        .env("LATENT_SPREAD_PROVIDER", s(&stub))
        .output()
        .unwrap();
    assert!(out.status.success());

    let dup = serde_json::json!({ "batches": [{ "id": "d", "items": [s(&imgs[0]), s(&imgs[0])] }] });
    fs::write(&mpath, dup.to_string()).unwrap();
    ok(&["pairwise", "--manifest", s(&mpath), "--builtin", "--out", s(&out_dir)]);
    let report = read_report(out_dir.join("report.json")).unwrap();
    assert_eq!(report.get("untagged", "avg_pairwise").unwrap().value, 0.0);

    let failing = script(d, "fail.sh", "echo 'weights not found' >&2\nexit 1");
    let out = run(&["pairwise", "--manifest", s(&mpath), "--provider", s(&failing), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights not found"));

    let out = run(&["pairwise", "--manifest", s(&mpath), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn coverage_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut full = String::from("batch_id,image_id,gender,ethnicity\n");
    for (i, g) in ["male", "female"].iter().enumerate() {
        for (j, e) in ["black", "asian", "hispanic", "white-or-middle-eastern"].iter().enumerate() {
            full.push_str(&format!("b0,{i}{j},{g},{e}\n"));
        }
    }
    full.push_str("b1,x,male,asian\n");
    let method_labels = d.join("method.csv");
    fs::write(&method_labels, &full).unwrap();
    let base_labels = d.join("base.csv");
    fs::write(&base_labels, "batch_id,image_id,gender,ethnicity\nb0,1,male,asian\nb1,2,female,black\nb1,3,female,asian\n").unwrap();

    ok(&["coverage", "--labels", s(&method_labels), "--group", "pooling_max", "--out", s(&d.join("m"))]);
    ok(&["coverage", "--labels", s(&base_labels), "--group", "baseline", "--out", s(&d.join("b"))]);
    let m = read_report(d.join("m/report.json")).unwrap();
    assert_eq!(m.get("pooling_max", "all_pairs").unwrap().value, 0.5);

    let mj = d.join("m/report.json");
    let bj = d.join("b/report.json");
    let out = ok(&["compare", "--method", s(&mj), "--baseline", s(&bj), "--out", s(&d.join("c"))]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("pooling_max,all_pairs,0,0.5,n/a"), "{table}");
    assert!(table.contains("pooling_max,at_least_2,0.5,0.5,1"), "{table}");

    let out = ok(&["compare", "--method", s(&mj), "--baseline", s(&mj), "--out", s(&d.join("c"))]);
    let table = String::from_utf8(out.stdout).unwrap();
    for line in table.lines().skip(1) {
        let ratio = line.rsplit(',').next().unwrap();
        assert!(ratio == "1" || ratio == "n/a", "{line}");
    }

    ok(&["coverage", "--labels", s(&base_labels), "--group", "baseline", "--context", "preset=long", "--out", s(&d.join("l"))]);
    let lj = d.join("l/report.json");
    let out = run(&["compare", "--method", s(&mj), "--baseline", s(&lj), "--out", s(&d.join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    ok(&["compare", "--method", s(&mj), "--baseline", s(&lj), "--force", "--out", s(&d.join("c"))]);

    // A baseline missing one metric key.
    let mut trimmed = read_report(&bj).unwrap();
    trimmed.groups.get_mut("baseline").unwrap().remove("all_pairs");
    latent_spread::io::write_report(&trimmed, d.join("trimmed.json")).unwrap();
    let out = run(&["compare", "--method", s(&mj), "--baseline", s(&d.join("trimmed.json")), "--out", s(&d.join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("all_pairs"));

    fs::write(&base_labels, "batch_id,image_id,gender,ethnicity\nb0,1,male,asian\nb0,2,robot,asian\n").unwrap();
    let out = run(&["coverage", "--labels", s(&base_labels), "--out", s(&d.join("b"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("robot"), "{err}");
}
