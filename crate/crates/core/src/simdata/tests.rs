use super::*;
use crate::io::load_scene;
use crate::numerics::svd;
use crate::radar::{process_sequence, range_fft, suppress_clutter, WeightMode};

fn quiet(mut spec: SceneSpec) -> SceneSpec {
    spec.noise_std = 0.0;
    spec.radar_noise_std = 0.0;
    spec
}

fn single_target_spec() -> SceneSpec {
    let mut spec = SceneSpec::desk();
    spec.targets.truncate(1);
    spec.clutter.clear();
    spec
}

#[test]
fn pinhole_examples() {
    let intr = CameraIntrinsics { focal: 100.0, center_col: 160.0, width: 320, height: 180 };
    assert_eq!(pinhole_project(0.0, 3.0, &intr).unwrap(), 160.0);
    assert_eq!(pinhole_project(1.0, 2.0, &intr).unwrap(), 210.0);
    assert_eq!(pinhole_project(2.0, 4.0, &intr).unwrap(), 210.0);
    assert!(pinhole_project(1.0, 0.0, &intr).is_err());
    assert!(pinhole_project(1.0, -1.0, &intr).is_err());
}

#[test]
fn background_only_scene_is_rank_one() {
    let mut spec = quiet(SceneSpec::desk());
    spec.targets.clear();
    let (video, gt) = render_camera(&spec, 4).unwrap();
    for m in 1..spec.frames {
        assert_eq!(video.frame(m), video.frame(0));
    }
    assert_eq!(gt.count(), 0);
    let sigma = svd(&video.to_stacked()).unwrap().sigma;
    assert!(sigma[1] / sigma[0] < 1e-10);
}

#[test]
fn rigid_targets_keep_their_pixel_count() {
    let mut spec = single_target_spec();
    spec.shadow_gain = 0.0;
    let (_, gt) = render_camera(&spec, 1).unwrap();
    let t = &spec.targets[0];
    for m in 0..spec.frames {
        assert_eq!(gt.frame_count(m), t.pixel_height * t.pixel_width);
    }
}

#[test]
fn shadows_darken_but_are_not_foreground() {
    let spec = quiet(SceneSpec::desk());
    let layers = render_camera_layers(&spec, 2).unwrap();
    let mut plain = spec.clone();
    plain.targets.clear();
    let (bg, _) = render_camera(&plain, 2).unwrap();
    assert!(layers.shadow.count() > 0);
    for (i, (&s, &g)) in layers.shadow.as_slice().iter().zip(layers.ground_truth.as_slice()).enumerate() {
        assert!(!(s && g), "pixel {i} is both shadow and target");
        if s {
            assert!(layers.video.as_slice()[i] < bg.as_slice()[i]);
        }
    }
}

#[test]
fn sleeping_targets_hold_still() {
    let mut spec = single_target_spec();
    spec.targets[0].sleep = vec![[10, 16]];
    let t = &spec.targets[0];
    let still = t.position(9, spec.frames);
    for m in 10..16 {
        assert_eq!(t.position(m, spec.frames), still);
        assert_eq!(t.velocity(m, spec.frames, 0.1), [0.0, 0.0]);
    }
    assert_eq!(t.position(spec.frames - 1, spec.frames), t.end);
    let (_, gt) = render_camera(&spec, 3).unwrap();
    for m in 10..16 {
        assert_eq!(gt.frame(m), gt.frame(9));
    }
    assert_ne!(gt.frame(17), gt.frame(9));
}

#[test]
fn static_scatterer_is_removed_by_clutter_suppression() {
    let mut spec = quiet(SceneSpec::desk());
    spec.targets.clear();
    spec.clutter = vec![StaticScatterer { x: 0.7, z: 3.0, amplitude: 1.0 }];
    let cube = render_radar(&spec, 0).unwrap();
    for frame in cube.frames() {
        let residual = suppress_clutter(&range_fft(frame)).unwrap().norm();
        assert!(residual < 1e-9 * frame.norm(), "{residual}");
    }
}

#[test]
fn amplitude_scales_the_range_spectrum() {
    let mut spec = quiet(single_target_spec());
    let a = render_radar(&spec, 0).unwrap();
    spec.targets[0].amplitude *= 2.0;
    let b = render_radar(&spec, 0).unwrap();
    let peak = |f: &crate::radar::RadarFrame| range_fft(f).as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        let (pa, pb) = (peak(fa), peak(fb));
        assert!((pb - 2.0 * pa).abs() <= 1e-9 * pb);
    }
}

#[test]
fn radar_peak_follows_the_projected_column() {
    let spec = single_target_spec();
    let cube = render_radar(&spec, 11).unwrap();
    let weights = process_sequence(&cube, &spec.radar, &spec.intrinsics, WeightMode::Direct).unwrap();
    for m in 0..spec.frames {
        let row = weights.row(m);
        let argmax = (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b });
        let want = spec.projected_column(&spec.targets[0], m).unwrap();
        assert!((argmax as f64 - want).abs() <= 2.0, "frame {m}: peak {argmax}, projected {want:.1}");
    }
}

#[test]
fn rendering_is_deterministic_and_seeded() {
    let spec = SceneSpec::desk();
    let a = render_scene(&spec, 5).unwrap();
    assert_eq!(a, render_scene(&spec, 5).unwrap());
    let b = render_scene(&spec, 6).unwrap();
    assert_ne!(a.camera, b.camera);
    assert_ne!(a.radar, b.radar);
}

#[test]
fn export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec::desk();
    let written = export_scene(&spec, 9, dir.path()).unwrap();
    let mut names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["camera.tnsr", "gt.tnsr", "manifest.json", "radar.tnsr"]);
    let loaded = load_scene(dir.path()).unwrap();
    assert_eq!(loaded, written);
    assert_eq!(loaded.manifest.seed, 9);

    let again = tempfile::tempdir().unwrap();
    export_scene(&spec, 9, again.path()).unwrap();
    for name in &names {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = SceneSpec::desk();
    spec.targets[0].end = [20.0, 3.0];
    assert!(matches!(spec.validate(), Err(Error::InvalidArgument(_))));
    let mut spec = SceneSpec::desk();
    spec.shadow_gain = 1.0;
    assert!(spec.validate().is_err());
    let mut spec = SceneSpec::desk();
    spec.targets[0].sleep = vec![[5, 3]];
    assert!(spec.validate().is_err());
    let mut spec = SceneSpec::desk();
    spec.frames = 0;
    assert!(spec.validate().is_err());
    assert!(SceneSpec::desk().validate().is_ok());
}

#[test]
fn spec_json_round_trips() {
    let spec = SceneSpec::desk();
    let text = serde_json::to_string_pretty(&spec).unwrap();
    let back: SceneSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
}
