use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use camprior::io;
use camprior::priors::{build_prior_set, PriorConfig};
use camprior::CameraRig;

fn camprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camprior"))
        .args(args)
        .env_remove("CAMPRIOR_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = camprior(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(camprior(&[]).status.code(), Some(1));
    assert_eq!(camprior(&["rig"]).status.code(), Some(1));
    assert_eq!(camprior(&["render", "--scene", "x.ply"]).status.code(), Some(1));
    assert_eq!(camprior(&["--version"]).status.code(), Some(0));
    for sub in [
        &["--help"][..],
        &["rig", "show", "--help"],
        &["rig", "export", "--help"],
        &["priors", "ground", "--help"],
        &["priors", "build", "--help"],
        &["sfm", "run", "--help"],
        &["sfm", "init-weights", "--help"],
        &["scene", "build", "--help"],
        &["scene", "append", "--help"],
        &["render", "--help"],
        &["augment", "sample", "--help"],
        &["augment", "resize", "--help"],
        &["metrics", "nds-star", "--help"],
    ] {
        let out = camprior(sub);
        assert_eq!(out.status.code(), Some(0), "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn data_errors_exit_2_with_one_line() {
    let out = camprior(&["priors", "ground", "--rig", "nuscenes", "--camera", "roof", "-o", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("UnknownCamera"));
    let out = camprior(&["rig", "show", "/definitely/missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rig_show_and_export_round_trip() {
    let table = ok(&["rig", "show", "nuscenes"]);
    assert_eq!(table.lines().count(), 7);
    assert!(table.lines().nth(1).unwrap().contains("65.24"));
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("rig.json");
    ok(&["rig", "export", "waymo", "-o", p(&file)]);
    assert_eq!(CameraRig::load(&file).unwrap(), camprior::camera::preset_rig(camprior::Preset::Waymo));
    assert_eq!(ok(&["rig", "show", p(&file)]), ok(&["rig", "show", "waymo"]));
}

#[test]
fn priors_build_matches_library_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stack");
    ok(&[
        "--threads",
        "1",
        "priors",
        "build",
        "--rig",
        "nuscenes",
        "--camera",
        "front_left",
        "--out-w",
        "88",
        "--out-h",
        "50",
        "-o",
        p(&out),
    ]);
    let (stack, manifest) = io::load_stack(&out).unwrap();
    assert_eq!(stack.shape(), (9, 50, 88));
    assert_eq!(manifest.channels[0].name, "m_if");
    assert_eq!(manifest.extra["normalization"]["depth"], 25.0);

    let cam = camprior::camera::preset_rig(camprior::Preset::NuScenes).camera("front_left").unwrap().clone();
    let set = build_prior_set(&cam.intrinsics, &cam.extrinsics, 88, 50, &PriorConfig::default()).unwrap();
    let mut expected = Vec::new();
    let plane = set.raw_stack();
    io::write_pfm(&mut expected, 88, 50, plane.plane(2)).unwrap();
    assert_eq!(fs::read(out.join("002_m_gg.pfm")).unwrap(), expected);

    // reproducible across runs and thread counts
    let again = dir.path().join("again");
    ok(&[
        "--threads",
        "3",
        "priors",
        "build",
        "--rig",
        "nuscenes",
        "--camera",
        "front_left",
        "--out-w",
        "88",
        "--out-h",
        "50",
        "-o",
        p(&again),
    ]);
    for ch in &manifest.channels {
        assert_eq!(fs::read(out.join(&ch.file)).unwrap(), fs::read(again.join(&ch.file)).unwrap());
    }
}

#[test]
fn priors_ground_outputs_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("camprior.toml");
    fs::write(&cfg, "max_depth = 40.0\nlog_level = \"error\"\n").unwrap();
    let out = dir.path().join("ground");
    ok(&[
        "--config",
        p(&cfg),
        "priors",
        "ground",
        "--rig",
        "nuscenes",
        "--camera",
        "front",
        "--scale",
        "0.05",
        "-o",
        p(&out),
    ]);
    let gd = io::load_pfm(out.join("ground_depth.pfm")).unwrap();
    assert_eq!((gd.width, gd.height), (80, 45));
    assert!(gd.data.iter().all(|&z| z > 0.0 && z <= 40.0));
    assert!(gd.data.contains(&40.0));
    let info: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ground.json")).unwrap()).unwrap();
    assert_eq!(info["max_depth"], 40.0);
    let pgm = fs::read(out.join("valid.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n80 45\n255\n"));
    // flag beats config
    ok(&[
        "--config",
        p(&cfg),
        "--max-depth",
        "70",
        "priors",
        "ground",
        "--rig",
        "nuscenes",
        "--camera",
        "front",
        "--scale",
        "0.05",
        "-o",
        p(&out),
    ]);
    let gd = io::load_pfm(out.join("ground_depth.pfm")).unwrap();
    assert!(gd.data.contains(&70.0));
    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(camprior(&["--config", p(&cfg), "rig", "show", "nuscenes"]).status.code(), Some(2));
}

#[test]
fn sfm_run_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    ok(&["--seed", "5", "sfm", "init-weights", "--c-out", "4", "-o", p(&weights)]);
    let feat = dir.path().join("feat");
    let f = camprior::FeatureTensor::from_vec(4, 18, 32, (0..4 * 18 * 32).map(|i| (i % 13) as f64).collect()).unwrap();
    let names: Vec<String> = (0..4).map(|c| format!("c{c}")).collect();
    io::save_stack(&feat, &f, &names, Default::default()).unwrap();
    let out = dir.path().join("sfm");
    ok(&[
        "sfm",
        "run",
        "--rig",
        "nuscenes",
        "--camera",
        "front",
        "--feature",
        p(&feat),
        "--weights",
        p(&weights),
        "-o",
        p(&out),
    ]);
    assert_eq!(io::load_stack(out.join("f1")).unwrap().0.shape(), (4, 18, 32));
    assert_eq!(io::load_stack(out.join("f2")).unwrap().0.shape(), (4, 18, 32));
    let (f3, m) = io::load_stack(out.join("f3")).unwrap();
    assert_eq!(f3.shape(), (13, 18, 32));
    assert_eq!(m.channels[9].name, "f2_000");

    let wrong = dir.path().join("w3.bin");
    ok(&["sfm", "init-weights", "--c-out", "3", "-o", p(&wrong)]);
    let out = camprior(&[
        "sfm",
        "run",
        "--rig",
        "nuscenes",
        "--camera",
        "front",
        "--feature",
        p(&feat),
        "--weights",
        p(&wrong),
        "-o",
        p(&dir.path().join("bad")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WeightDimMismatch"));
}

fn write_frames(dir: &Path, rig: &CameraRig) {
    for cam in rig.cameras() {
        let (w, h) = (cam.intrinsics.width(), cam.intrinsics.height());
        let sub = dir.join(&cam.name);
        fs::create_dir_all(&sub).unwrap();
        image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x * 7) as u8, (y * 11) as u8, 128]))
            .save(sub.join("rgb.png"))
            .unwrap();
        let depth: Vec<f64> = (0..w * h).map(|k| 3.0 + f64::from(k % 17)).collect();
        io::save_pfm(sub.join("depth.pfm"), w as usize, h as usize, &depth).unwrap();
    }
}

#[test]
fn scene_build_render_append() {
    let dir = tempfile::tempdir().unwrap();
    let rig_file = dir.path().join("small.json");
    ok(&["rig", "export", "nuscenes", "--scale", "0.04", "-o", p(&rig_file)]);
    let rig = CameraRig::load(&rig_file).unwrap();
    let frames = dir.path().join("frames");
    write_frames(&frames, &rig);
    let scene = dir.path().join("scene.ply");
    ok(&["scene", "build", "--rig", p(&rig_file), "--frames", p(&frames), "-o", p(&scene)]);
    let pixels: usize = rig.cameras().iter().map(|c| (c.intrinsics.width() * c.intrinsics.height()) as usize).sum();
    assert_eq!(io::ply_vertex_count(&scene).unwrap(), pixels);

    let views = dir.path().join("views");
    ok(&["--threads", "1", "render", "--scene", p(&scene), "--rig", p(&rig_file), "--bg", "0,0,255", "-o", p(&views)]);
    for cam in rig.cameras() {
        let png = image::open(views.join(format!("{}.png", cam.name))).unwrap().to_rgb8();
        assert_eq!(png.dimensions(), (cam.intrinsics.width(), cam.intrinsics.height()));
        let depth = io::load_pfm(views.join(format!("{}_depth.pfm", cam.name))).unwrap();
        assert!(depth.data.iter().filter(|&&z| z > 0.0).count() > depth.data.len() / 2);
    }
    let again = dir.path().join("again");
    ok(&[
        "--threads",
        "1",
        "render",
        "--scene",
        p(&scene),
        "--rig",
        p(&rig_file),
        "--camera",
        "back",
        "--bg",
        "0,0,255",
        "-o",
        p(&again),
    ]);
    assert_eq!(fs::read(views.join("back.png")).unwrap(), fs::read(again.join("back.png")).unwrap());
    assert_eq!(fs::read(views.join("back_depth.pfm")).unwrap(), fs::read(again.join("back_depth.pfm")).unwrap());
    assert!(!again.join("front.png").exists());
    assert_eq!(
        camprior(&["render", "--scene", p(&scene), "--rig", "nuscenes", "--bg", "0,0", "-o", p(&again)]).status.code(),
        Some(2)
    );

    let fg = dir.path().join("fg.ply");
    fs::write(
        &fg,
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n5 0 1 255 0 0\n6 1 1 0 255 0\n",
    )
    .unwrap();
    let merged = dir.path().join("merged.ply");
    ok(&["scene", "append", "-i", p(&scene), "--points", p(&fg), "--foreground", "-o", p(&merged)]);
    let s = io::load_scene_ply(&merged).unwrap();
    assert_eq!(s.len(), pixels + 2);
    assert_eq!(s.radii[pixels], 0.0025);
    assert!(s.foreground[pixels + 1]);
    assert_eq!(s.colors[pixels], [1.0, 0.0, 0.0]);
}

#[test]
fn augment_sample_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"focal_scale_range": [0.8, 1.2], "tz_range": [1.6, 1.6]}"#).unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "--seed",
            seed,
            "augment",
            "sample",
            "--rig",
            "lyft_fleet1",
            "--spec",
            p(&spec),
            "--count",
            "3",
            "-o",
            p(&out),
        ]);
        out
    };
    let (a, b, c) = (run("7", "a"), run("7", "b"), run("8", "c"));
    for k in 0..3 {
        let file = format!("rig_{k:04}.json");
        let rig = CameraRig::load(a.join(&file)).unwrap();
        assert!(rig.cameras().iter().all(|cam| cam.extrinsics.height() == 1.6));
        assert_eq!(fs::read(a.join(&file)).unwrap(), fs::read(b.join(&file)).unwrap());
        assert_ne!(fs::read(a.join(&file)).unwrap(), fs::read(c.join(&file)).unwrap());
    }
    let samples: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("samples.json")).unwrap()).unwrap();
    assert_eq!(samples["samples"].as_array().unwrap().len(), 3 * 6);
    fs::write(&spec, r#"{"focal_scale_range": [1.2, 0.8]}"#).unwrap();
    assert_eq!(
        camprior(&["augment", "sample", "--rig", "waymo", "--spec", p(&spec), "-o", p(&dir.path().join("d"))])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn augment_resize_writes_image_and_intrinsics() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.png");
    image::RgbImage::from_fn(40, 30, |x, _| image::Rgb([if x % 4 < 2 { 255 } else { 0 }; 3])).save(&img).unwrap();
    let intr = dir.path().join("intr.json");
    fs::write(&intr, r#"{"fu": 50, "fv": 50, "width": 40, "height": 30}"#).unwrap();
    let (out, intr_out, mask) = (dir.path().join("out.png"), dir.path().join("i2.json"), dir.path().join("m.pgm"));
    ok(&[
        "augment",
        "resize",
        "--image",
        p(&img),
        "--intr",
        p(&intr),
        "--scale",
        "0.8",
        "-o",
        p(&out),
        "--intr-out",
        p(&intr_out),
        "--mask-out",
        p(&mask),
    ]);
    assert_eq!(image::open(&out).unwrap().to_rgb8().dimensions(), (40, 30));
    let scaled: serde_json::Value = serde_json::from_str(&fs::read_to_string(&intr_out).unwrap()).unwrap();
    assert_eq!(scaled["fu"], 40.0);
    assert_eq!(scaled["cu"], 20.0);
    let pgm = fs::read(&mask).unwrap();
    assert!(pgm.ends_with(&[0]));
    let bad = camprior(&["augment", "resize", "--image", p(&img), "--intr", p(&intr), "--scale", "0", "-o", p(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn metrics_single_and_table() {
    assert_eq!(
        ok(&["metrics", "nds-star", "--map", "0.381", "--mate", "0.687", "--mase", "0.220", "--maoe", "0.155"]).trim(),
        "0.5135"
    );
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/tables.csv");
    let report = ok(&["metrics", "nds-star", "--csv", table]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 39);
    assert_eq!(lines.iter().filter(|l| l.starts_with("PASS")).count(), 35);
    assert_eq!(lines.iter().filter(|l| l.starts_with("FAIL")).count(), 3);
    assert_eq!(
        camprior(&["metrics", "nds-star", "--map", "1.5", "--mate", "0", "--mase", "0", "--maoe", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn threads_env_var_is_accepted() {
    let out = Command::new(env!("CARGO_BIN_EXE_camprior"))
        .args(["rig", "show", "waymo"])
        .env("CAMPRIOR_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_camprior"))
        .args(["rig", "show", "waymo"])
        .env("CAMPRIOR_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
