use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use camprior::augment::{focal_resize, sample_params, AugmentSpec};
use camprior::camera::{horizontal_fov, vertical_fov};
use camprior::ground::{
    fit_ground_plane, ground_depth_map, ground_gradient_map, initial_ground_depth, DEFAULT_GROUND_SAMPLES,
};
use camprior::io;
use camprior::metrics::{check_rows, nds_star, read_table_csv, DetectionScores};
use camprior::modulation::{run_pipeline, ProjectorWeights};
use camprior::priors::{build_prior_set, DEPTH_NORM, FOCAL_NORM, GRADIENT_NORM, PRIOR_CHANNELS};
use camprior::render::{render, RenderOptions};
use camprior::scene::{GaussianScene, RgbdFrame};
use camprior::{Camera, CameraIntrinsics, CameraRig, FeatureTensor};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Settings;
use crate::{
    AugmentCommand, CameraSelect, Command, MetricsCommand, PriorsCommand, RenderArgs, RigCommand, SceneCommand,
    SfmCommand,
};

pub fn run(command: Command, settings: &Settings) -> Result<()> {
    match command {
        Command::Rig(c) => rig(c),
        Command::Priors(c) => priors(c, settings),
        Command::Sfm(c) => sfm(c, settings),
        Command::Scene(c) => scene(c),
        Command::Render(a) => render_views(a),
        Command::Augment(c) => augment(c, settings),
        Command::Metrics(c) => metrics(c),
    }
}

fn load_rig(spec: &str) -> Result<CameraRig> {
    CameraRig::from_preset_or_file(spec).with_context(|| format!("rig {spec}"))
}

fn select_camera(select: &CameraSelect) -> Result<Camera> {
    Ok(load_rig(&select.rig)?.camera(&select.camera)?.clone())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn extra(value: Value) -> BTreeMap<String, Value> {
    match value {
        Value::Object(map) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

fn rig(command: RigCommand) -> Result<()> {
    match command {
        RigCommand::Show { rig } => {
            let rig = load_rig(&rig)?;
            println!(
                "{:<14} {:>11} {:>9} {:>9} {:>8} {:>8} {:>7} {:>7} {:>7} {:>7} {:>6} {:>7}",
                "camera", "size", "fu", "fv", "cu", "cv", "hfov", "vfov", "x", "y", "z", "yaw"
            );
            for cam in rig.cameras() {
                let (i, t) = (&cam.intrinsics, cam.extrinsics.translation());
                println!(
                    "{:<14} {:>11} {:>9.2} {:>9.2} {:>8.2} {:>8.2} {:>7.2} {:>7.2} {:>7.3} {:>7.3} {:>6.3} {:>7.2}",
                    cam.name,
                    format!("{}x{}", i.width(), i.height()),
                    i.fu(),
                    i.fv(),
                    i.cu(),
                    i.cv(),
                    horizontal_fov(i),
                    vertical_fov(i),
                    t.x,
                    t.y,
                    t.z,
                    cam.extrinsics.yaw().to_degrees()
                );
            }
        }
        RigCommand::Export { rig, output, scale } => {
            let mut rig = load_rig(&rig)?;
            if scale != 1.0 {
                rig = rig.rescaled(scale)?;
            }
            rig.save(&output).with_context(|| format!("writing {}", output.display()))?;
            log::info!("wrote {} cameras to {}", rig.len(), output.display());
        }
    }
    Ok(())
}

fn priors(command: PriorsCommand, settings: &Settings) -> Result<()> {
    match command {
        PriorsCommand::Ground { select, scale, output } => {
            let cam = select_camera(&select)?;
            let i = &cam.intrinsics;
            ensure!(scale > 0.0 && scale.is_finite(), "scale must be positive, got {scale}");
            let w = (f64::from(i.width()) * scale).round().max(1.0) as usize;
            let h = (f64::from(i.height()) * scale).round().max(1.0) as usize;
            let plane = fit_ground_plane(&cam.extrinsics, DEFAULT_GROUND_SAMPLES)?;
            let gd = ground_depth_map(i, &plane, w, h, settings.max_depth)?;
            let gg = ground_gradient_map(&gd)?;
            fs::create_dir_all(&output)?;
            io::save_pfm(output.join("ground_depth.pfm"), w, h, &gd.values)?;
            io::save_pfm(output.join("ground_gradient.pfm"), w, h, &gg.values)?;
            let mask: Vec<bool> = gd.valid.iter().zip(&gg.valid).map(|(a, b)| *a && *b).collect();
            io::save_mask_pgm(output.join("valid.pgm"), w, h, &mask)?;
            let info = json!({
                "camera": cam.name,
                "width": w,
                "height": h,
                "max_depth": settings.max_depth,
                "plane": [plane.a, plane.b, plane.c, plane.d],
                "camera_height": cam.extrinsics.height(),
                "initial_ground_depth": initial_ground_depth(cam.extrinsics.height(), vertical_fov(i)).ok(),
            });
            write_json(&output.join("ground.json"), &info)?;
        }
        PriorsCommand::Build { select, out_w, out_h, unit_directions, output } => {
            let cam = select_camera(&select)?;
            let set = build_prior_set(
                &cam.intrinsics,
                &cam.extrinsics,
                out_w,
                out_h,
                &settings.prior_config(unit_directions),
            )?;
            let names: Vec<String> = PRIOR_CHANNELS.iter().map(|s| s.to_string()).collect();
            let info = json!({
                "camera": cam.name,
                "focal": set.focal,
                "focal_channel_mode": set.focal_channel_mode,
                "max_depth": settings.max_depth,
                "unit_directions": unit_directions,
                "normalization": { "focal": FOCAL_NORM, "depth": DEPTH_NORM, "gradient": GRADIENT_NORM },
            });
            io::save_stack(&output, &set.raw_stack(), &names, extra(info))?;
            io::save_mask_pgm(output.join("valid.pgm"), out_w, out_h, &set.valid)?;
        }
    }
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|c| format!("{prefix}{c:03}")).collect()
}

fn sfm(command: SfmCommand, settings: &Settings) -> Result<()> {
    match command {
        SfmCommand::Run { select, feature, weights, output } => {
            let cam = select_camera(&select)?;
            let (f, _) = io::load_stack(&feature).with_context(|| format!("feature stack {}", feature.display()))?;
            let w = ProjectorWeights::load(&weights).with_context(|| format!("weights {}", weights.display()))?;
            let set = build_prior_set(
                &cam.intrinsics,
                &cam.extrinsics,
                f.width(),
                f.height(),
                &settings.prior_config(false),
            )?;
            let (f1, f2, f3) = run_pipeline(&f, &set, &w)?;
            let c = f.channels();
            let mut f3_names: Vec<String> = PRIOR_CHANNELS.iter().map(|s| s.to_string()).collect();
            f3_names.extend(numbered("f2_", c));
            let stages: [(&str, &FeatureTensor, Vec<String>); 3] =
                [("f1", &f1, numbered("f1_", c)), ("f2", &f2, numbered("f2_", c)), ("f3", &f3, f3_names)];
            for (stage, tensor, names) in stages {
                let info = json!({ "stage": stage, "camera": cam.name, "focal": set.focal });
                io::save_stack(output.join(stage), tensor, &names, extra(info))?;
            }
        }
        SfmCommand::InitWeights { c_out, zeros, output } => {
            ensure!(c_out > 0, "c_out must be positive");
            let w = if zeros {
                ProjectorWeights::zeros(c_out)
            } else {
                ProjectorWeights::xavier_uniform(c_out, settings.seed)
            };
            w.save(&output).with_context(|| format!("writing {}", output.display()))?;
        }
    }
    Ok(())
}

fn scene(command: SceneCommand) -> Result<()> {
    match command {
        SceneCommand::Build { rig, frames, output } => {
            let rig = load_rig(&rig)?;
            let mut loaded = Vec::new();
            for cam in rig.cameras() {
                let dir = frames.join(&cam.name);
                let (rgb_path, depth_path) = (dir.join("rgb.png"), dir.join("depth.pfm"));
                if !rgb_path.exists() && !depth_path.exists() {
                    log::warn!("no frame for camera {}", cam.name);
                    continue;
                }
                let rgb = image::open(&rgb_path).with_context(|| format!("reading {}", rgb_path.display()))?.to_rgb8();
                let depth = io::load_pfm(&depth_path).with_context(|| format!("reading {}", depth_path.display()))?;
                ensure!(
                    rgb.dimensions() == (depth.width as u32, depth.height as u32),
                    "{}: rgb is {:?} but depth is {}x{}",
                    cam.name,
                    rgb.dimensions(),
                    depth.width,
                    depth.height
                );
                // frames may be stored at a different resolution than the rig
                let intr = cam.intrinsics.rescaled(rgb.width(), rgb.height())?;
                let z: Vec<f64> = depth.data.iter().map(|v| f64::from(*v)).collect();
                loaded.push((rgb, z, intr, cam.extrinsics));
            }
            if loaded.is_empty() {
                bail!("no <camera>/rgb.png + depth.pfm frames under {}", frames.display());
            }
            let views: Vec<RgbdFrame> = loaded
                .iter()
                .map(|(rgb, depth, intrinsics, extrinsics)| RgbdFrame { rgb, depth, intrinsics, extrinsics })
                .collect();
            let scene = GaussianScene::from_rgbd(&views)?;
            io::save_scene_ply(&output, &scene)?;
            log::info!("{} Gaussians from {} frames", scene.len(), views.len());
        }
        SceneCommand::Append { input, points, foreground, output } => {
            let scene = io::load_scene_ply(&input).with_context(|| format!("scene {}", input.display()))?;
            let pts = io::load_points_ply(&points).with_context(|| format!("points {}", points.display()))?;
            let scene = scene.append_points(&pts, foreground)?;
            io::save_scene_ply(output.as_ref().unwrap_or(&input), &scene)?;
        }
    }
    Ok(())
}

fn parse_bg(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    ensure!(parts.len() == 3, "background must be r,g,b, got {s:?}");
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        let v: u8 = p.parse().with_context(|| format!("background component {p:?} is not 0-255"))?;
        *o = f64::from(v) / 255.0;
    }
    Ok(out)
}

fn render_views(args: RenderArgs) -> Result<()> {
    let bg = parse_bg(&args.bg)?;
    let mut rig = load_rig(&args.rig)?;
    if args.scale != 1.0 {
        rig = rig.rescaled(args.scale)?;
    }
    let cameras: Vec<&Camera> = match &args.camera {
        Some(name) => vec![rig.camera(name)?],
        None => rig.cameras().iter().collect(),
    };
    ensure!(args.tile_size > 0, "tile size must be positive");
    let scene = io::load_scene_ply(&args.scene).with_context(|| format!("scene {}", args.scene.display()))?;
    let opts = RenderOptions { z_near: args.z_near, tile_size: args.tile_size, frustum_culling: true };
    fs::create_dir_all(&args.output)?;
    for cam in cameras {
        let target = render(&scene, &cam.intrinsics, &cam.extrinsics, bg, &opts);
        let png = args.output.join(format!("{}.png", cam.name));
        target.to_rgb_image().save(&png).with_context(|| format!("writing {}", png.display()))?;
        io::save_pfm(args.output.join(format!("{}_depth.pfm", cam.name)), target.width, target.height, &target.depth)?;
        log::info!("{}: {} of {} pixels hit", cam.name, target.hit_count(), target.width * target.height);
    }
    Ok(())
}

/// Intrinsics JSON used by `augment resize`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsFile {
    fu: f64,
    fv: f64,
    #[serde(default)]
    cu: Option<f64>,
    #[serde(default)]
    cv: Option<f64>,
    width: u32,
    height: u32,
}

impl IntrinsicsFile {
    fn to_intrinsics(&self) -> camprior::Result<CameraIntrinsics> {
        let cu = self.cu.unwrap_or(f64::from(self.width) / 2.0);
        let cv = self.cv.unwrap_or(f64::from(self.height) / 2.0);
        CameraIntrinsics::new(self.fu, self.fv, cu, cv, self.width, self.height)
    }

    fn from_intrinsics(i: &CameraIntrinsics) -> Self {
        Self { fu: i.fu(), fv: i.fv(), cu: Some(i.cu()), cv: Some(i.cv()), width: i.width(), height: i.height() }
    }
}

fn augment(command: AugmentCommand, settings: &Settings) -> Result<()> {
    match command {
        AugmentCommand::Sample { rig, spec, count, output } => {
            let rig = load_rig(&rig)?;
            let spec = match &spec {
                Some(path) => AugmentSpec::from_json_str(&fs::read_to_string(path)?)
                    .with_context(|| format!("spec {}", path.display()))?,
                None => AugmentSpec::default(),
            };
            fs::create_dir_all(&output)?;
            let n = rig.len() as u64;
            let mut log_rows = Vec::new();
            for k in 0..count {
                let sampled = camprior::augment::sample_rig(&rig, &spec, settings.seed, k)?;
                let mut cams = Vec::with_capacity(sampled.len());
                for (i, (cam, branch)) in sampled.into_iter().enumerate() {
                    let params = sample_params(&spec, settings.seed, k * n + i as u64)?;
                    log_rows.push(json!({ "draw": k, "camera": cam.name, "branch": branch, "params": params }));
                    cams.push(cam);
                }
                CameraRig::new(cams)?.save(output.join(format!("rig_{k:04}.json")))?;
            }
            let summary = json!({ "seed": settings.seed, "count": count, "spec": spec, "samples": log_rows });
            write_json(&output.join("samples.json"), &summary)?;
        }
        AugmentCommand::Resize { image, intr, scale, output, intr_out, mask_out } => {
            let img = image::open(&image).with_context(|| format!("reading {}", image.display()))?.to_rgb8();
            let file: IntrinsicsFile = serde_json::from_str(&fs::read_to_string(&intr)?)
                .with_context(|| format!("intrinsics {}", intr.display()))?;
            let base = file.to_intrinsics()?;
            ensure!(
                img.dimensions() == (base.width(), base.height()),
                "image is {:?} but intrinsics describe {}x{}",
                img.dimensions(),
                base.width(),
                base.height()
            );
            let out = focal_resize(&img, &base, scale)?;
            out.image.save(&output).with_context(|| format!("writing {}", output.display()))?;
            if let Some(path) = intr_out {
                write_json(&path, &IntrinsicsFile::from_intrinsics(&out.intrinsics))?;
            }
            if let Some(path) = mask_out {
                io::save_mask_pgm(path, img.width() as usize, img.height() as usize, &out.coverage)?;
            }
        }
    }
    Ok(())
}

fn metrics(command: MetricsCommand) -> Result<()> {
    let MetricsCommand::NdsStar { map, mate, mase, maoe, csv, tolerance } = command;
    if let Some(path) = csv {
        let file = fs::File::open(&path).with_context(|| format!("reading {}", path.display()))?;
        let checks = check_rows(&read_table_csv(file)?, tolerance)?;
        let passed = checks.iter().filter(|c| c.pass).count();
        for c in &checks {
            println!(
                "{} table {} {} {}: computed {:.4} reported {:.3} diff {:+.4}",
                if c.pass { "PASS" } else { "FAIL" },
                c.row.table,
                c.row.setting,
                c.row.method,
                c.computed,
                c.row.nds,
                c.diff()
            );
        }
        println!("{passed}/{} rows within {tolerance}", checks.len());
        return Ok(());
    }
    let (Some(map), Some(mate), Some(mase), Some(maoe)) = (map, mate, mase, maoe) else {
        bail!("need --map, --mate, --mase and --maoe");
    };
    println!("{:.4}", nds_star(&DetectionScores { map, mate, mase, maoe })?);
    Ok(())
}
