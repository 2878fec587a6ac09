use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rustic::eval::binarize;
use rustic::io::{decode_png_gray, read_decomposition, Checkpoint, TensorFile};
use rustic::simdata::SceneSpec;
use rustic::video::Masks;

fn rustic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rustic")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rustic(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    rustic(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: u64) -> PathBuf {
    let scene = dir.join(format!("scene{seed}"));
    ok(&["simulate", "--seed", &seed.to_string(), "--out", s(&scene)]);
    scene
}

fn write_spec(dir: &Path, name: &str, spec: &SceneSpec) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(spec).unwrap()).unwrap();
    path
}

fn train_small(dir: &Path, scene: &Path, weights: Option<&Path>, out: &Path) {
    let cfg = dir.join("train.json");
    fs::write(&cfg, r#"{"total_patches": 6, "phase_boundary": 3, "plan": {"patch": 24, "stride": 12}}"#).unwrap();
    let mut args = vec![
        "train",
        "--scene",
        s(scene),
        "--variant",
        "after",
        "--depth",
        "2",
        "--config",
        s(&cfg),
        "--target-iters",
        "20",
        "--out",
        s(out),
    ];
    if let Some(w) = weights {
        args.extend(["--weights", s(w)]);
    }
    ok(&args);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["bogus"]), 1);
    assert_eq!(code(&["simulate"]), 1);
    assert_eq!(code(&["train", "--scene", "x", "--variant", "sideways", "--out", "y"]), 1);
    assert_eq!(code(&["radar-process", "--scene", "x", "--mode", "loud", "--out", "y"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["infer", "--help"]), 0);
}

#[test]
fn simulate_writes_a_reproducible_scene() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("nested/deeper/a");
    let b = dir.path().join("b");
    ok(&["simulate", "--seed", "4", "--out", s(&a)]);
    ok(&["simulate", "--seed", "4", "--out", s(&b)]);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["camera.tnsr", "gt.tnsr", "manifest.json", "radar.tnsr"]);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn simulate_rejects_bad_specs_as_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SceneSpec::desk();
    spec.shadow_gain = 2.0;
    let bad = write_spec(dir.path(), "bad.json", &spec);
    let out = dir.path().join("out");
    assert_eq!(code(&["simulate", "--spec", s(&bad), "--out", s(&out)]), 2);
    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{ not json").unwrap();
    assert_eq!(code(&["simulate", "--spec", s(&garbled), "--out", s(&out)]), 2);
    assert_eq!(code(&["simulate", "--spec", s(&dir.path().join("absent.json")), "--out", s(&out)]), 2);
}

#[test]
fn radar_process_peaks_at_the_target_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SceneSpec::desk();
    spec.targets.truncate(1);
    spec.clutter.clear();
    let spec_path = write_spec(dir.path(), "one.json", &spec);
    let scene = dir.path().join("scene");
    ok(&["simulate", "--spec", s(&spec_path), "--seed", "2", "--out", s(&scene)]);

    let w1 = dir.path().join("w1.tnsr");
    let w2 = dir.path().join("w2.tnsr");
    let heat = dir.path().join("heat");
    ok(&["radar-process", "--scene", s(&scene), "--out", s(&w1), "--heatmaps", s(&heat)]);
    ok(&["radar-process", "--scene", s(&scene), "--out", s(&w2)]);
    assert_eq!(fs::read(&w1).unwrap(), fs::read(&w2).unwrap());
    assert_eq!(fs::read_dir(&heat).unwrap().count(), spec.frames);
    assert!(dir.path().join("w1.json").exists());

    let weights = TensorFile::read(&w1).unwrap().to_weights().unwrap();
    for m in 0..spec.frames {
        let row = weights.row(m);
        let argmax = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
        let want = spec.projected_column(&spec.targets[0], m).unwrap();
        assert!((argmax as f64 - want).abs() <= 2.0, "frame {m}: {argmax} vs {want:.1}");
    }
}

#[test]
fn radar_process_gives_flat_weights_for_a_static_scene() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SceneSpec::desk();
    spec.targets.clear();
    spec.radar_noise_std = 0.0;
    let spec_path = write_spec(dir.path(), "static.json", &spec);
    let scene = dir.path().join("scene");
    ok(&["simulate", "--spec", s(&spec_path), "--out", s(&scene)]);
    let w = dir.path().join("w.tnsr");
    ok(&["radar-process", "--scene", s(&scene), "--out", s(&w)]);
    let weights = TensorFile::read(&w).unwrap().to_weights().unwrap();
    let lo = weights.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo < 1e-6, "spread {}", hi - lo);
}

#[test]
fn rista_with_unit_weights_reproduces_ista() {
    let dir = tempfile::tempdir().unwrap();
    let scene = simulate(dir.path(), 1);
    let (a, b) = (dir.path().join("ista"), dir.path().join("rista"));
    ok(&["ista", "--scene", s(&scene), "--iters", "15", "--out", s(&a)]);
    ok(&["rista", "--scene", s(&scene), "--iters", "15", "--out", s(&b)]);
    for name in ["low_rank.tnsr", "sparse.tnsr"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let dec = read_decomposition(&a).unwrap();
    assert_eq!(dec.sparse.dims(), (30, 48, 64));
    assert_eq!(code(&["ista", "--scene", s(&scene), "--iters", "0", "--out", s(&a)]), 1);
    assert_eq!(code(&["ista", "--scene", s(&dir.path().join("nowhere")), "--out", s(&a)]), 2);
}

#[test]
fn train_infer_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scene = simulate(dir.path(), 5);
    let w = dir.path().join("w.tnsr");
    ok(&["radar-process", "--scene", s(&scene), "--out", s(&w)]);
    let ckpt = dir.path().join("model.ckpt");
    train_small(dir.path(), &scene, Some(&w), &ckpt);
    assert!(scene.join("targets/sparse.tnsr").exists());

    let bytes = fs::read(&ckpt).unwrap();
    let loaded = Checkpoint::decode(&bytes).unwrap();
    assert_eq!(loaded.encode(), bytes);
    assert_eq!(loaded.model.depth(), 2);
    assert_eq!(loaded.model.parameter_count(), 314);
    let trace = fs::read_to_string(dir.path().join("model.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("step,mse,cosine,lr"));
    assert_eq!(trace.lines().count(), 7);

    let (o1, o2) = (dir.path().join("inf1"), dir.path().join("inf2"));
    let infer = |out: &Path| {
        ok(&[
            "infer",
            "--ckpt",
            s(&ckpt),
            "--scene",
            s(&scene),
            "--weights",
            s(&w),
            "--patch",
            "32",
            "--stride",
            "16",
            "--out",
            s(out),
            "--masks",
            "0.05",
        ]);
    };
    infer(&o1);
    infer(&o2);
    for name in ["low_rank.tnsr", "sparse.tnsr", "masks.tnsr", "masks/frame_0007.png"] {
        assert_eq!(fs::read(o1.join(name)).unwrap(), fs::read(o2.join(name)).unwrap(), "{name}");
    }
    let dec = read_decomposition(&o1).unwrap();
    let masks = binarize(&dec.sparse, 0.05);
    assert_eq!(TensorFile::read(&o1.join("masks.tnsr")).unwrap().to_masks().unwrap(), masks);
    for m in [0, 13, 29] {
        let (h, wd, px) = decode_png_gray(&fs::read(o1.join(format!("masks/frame_{m:04}.png"))).unwrap()).unwrap();
        assert_eq!((h, wd), (48, 64));
        let want: Vec<u8> = masks.frame(m).iter().map(|&b| if b { 255 } else { 0 }).collect();
        assert_eq!(px, want);
    }

    let curve = dir.path().join("curve.csv");
    ok(&["eval", "--pred", s(&o1), "--gt", s(&scene.join("gt.tnsr")), "--out", s(&curve)]);
    let text = fs::read_to_string(&curve).unwrap();
    assert_eq!(text.lines().next(), Some("threshold,precision,recall,f"));
    assert_eq!(text.lines().count(), 65);

    assert_eq!(code(&["infer", "--ckpt", s(&ckpt), "--scene", s(&scene), "--patch", "100", "--out", s(&o1)]), 1);
    assert_eq!(code(&["infer", "--ckpt", s(&dir.path().join("none")), "--scene", s(&scene), "--out", s(&o1)]), 2);
}

#[test]
fn eval_of_a_perfect_prediction_peaks_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let scene = simulate(dir.path(), 6);
    let gt = TensorFile::read(&scene.join("gt.tnsr")).unwrap().to_masks().unwrap();
    let pred = dir.path().join("pred");
    fs::create_dir_all(&pred).unwrap();
    TensorFile::from_video(&gt.to_video()).write(&pred.join("sparse.tnsr")).unwrap();
    let curve = dir.path().join("curve.csv");
    let out =
        ok(&["eval", "--pred", s(&pred), "--gt", s(&scene.join("gt.tnsr")), "--out", s(&curve), "--thresholds", "5"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("peak F 1.0000"));
    let text = fs::read_to_string(&curve).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().any(|r| r[3] == 1.0));

    let wrong = dir.path().join("wrong.tnsr");
    TensorFile::from_masks(&Masks::empty(2, 3, 4)).write(&wrong).unwrap();
    assert_eq!(code(&["eval", "--pred", s(&pred), "--gt", s(&wrong), "--out", s(&curve)]), 2);
}

#[test]
fn non_finite_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let scene = simulate(dir.path(), 7);
    let cfg = dir.path().join("wild.json");
    fs::write(
        &cfg,
        r#"{"total_patches": 40, "phase_boundary": 40, "lr_phase1": 1e300, "plan": {"patch": 24, "stride": 12}}"#,
    )
    .unwrap();
    let out = rustic(&[
        "train",
        "--scene",
        s(&scene),
        "--config",
        s(&cfg),
        "--target-iters",
        "10",
        "--out",
        s(&dir.path().join("m.ckpt")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn bench_reports_statistics_over_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let scene = simulate(dir.path(), 8);
    let ckpt = dir.path().join("model.ckpt");
    train_small(dir.path(), &scene, None, &ckpt);
    let report = dir.path().join("bench.json");
    ok(&[
        "bench",
        "--ckpt",
        s(&ckpt),
        "--scene",
        s(&scene),
        "--repeats",
        "3",
        "--ista-iters",
        "5",
        "--patch",
        "32",
        "--stride",
        "16",
        "--out",
        s(&report),
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let methods = json["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 2);
    for m in methods {
        assert_eq!(m["repeats"], 3);
        assert!(m["mean_seconds"].as_f64().unwrap() > 0.0);
        assert!(m["std_seconds"].as_f64().unwrap() >= 0.0);
    }
    assert!(json["speedup"].as_f64().unwrap() > 0.0);
    assert_eq!(code(&["bench", "--ckpt", s(&ckpt), "--scene", s(&scene), "--repeats", "2"]), 1);
}
