use camprior::augment::focal_resize;
use camprior::camera::{preset_rig, rot_x, rot_y, rot_z, Preset};
use camprior::ground::{fit_ground_plane, ground_depth_map, ground_gradient_map};
use camprior::io::{load_stack, read_scene_ply, save_stack, write_scene_ply};
use camprior::metrics::{nds_star, DetectionScores};
use camprior::modulation::modulate_focal;
use camprior::priors::{build_prior_set, inverse_focal_map, plucker_raymap, PriorConfig, PRIOR_CHANNELS};
use camprior::render::{render, RenderOptions};
use camprior::scene::{radius_schedule, GaussianScene, RgbdFrame};
use camprior::{project, unproject, CameraExtrinsics, CameraIntrinsics, FeatureTensor};
use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use proptest::prelude::*;

fn camera(fu: f64, aspect: f64, yaw: f64, pitch: f64, height: f64) -> (CameraIntrinsics, CameraExtrinsics) {
    let intr = CameraIntrinsics::new(fu, fu * aspect, 400.0, 225.0, 800, 450).unwrap();
    let r = rot_z(yaw) * camprior::camera::forward_camera_basis() * rot_x(pitch);
    (intr, CameraExtrinsics::new(r, Vector3::new(1.0, 0.3, height)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn project_unproject_round_trip(
        fu in 200.0..2000.0f64, aspect in 0.8..1.25f64, yaw in -3.1..3.1f64, pitch in -0.3..0.3f64,
        u in 0.0..800.0f64, v in 0.0..450.0f64, z in 0.2..150.0f64,
    ) {
        let (i, e) = camera(fu, aspect, yaw, pitch, 1.6);
        let p = unproject(&i, &e, u, v, z).unwrap();
        let back = project(&i, &e, &p).unwrap();
        prop_assert!((back.u - u).abs() < 1e-8 && (back.v - v).abs() < 1e-8);
        prop_assert!((back.z - z).abs() <= 1e-12 * z.max(1.0));
    }

    #[test]
    fn ground_depth_scales_with_height(yaw in -3.1..3.1f64, pitch in -0.1..0.2f64, h in 1.0..2.5f64) {
        let (i, e1) = camera(1000.0, 1.0, yaw, pitch, h);
        let e2 = CameraExtrinsics::new(*e1.rotation(), Vector3::new(1.0, 0.3, 2.0 * h)).unwrap();
        let p1 = fit_ground_plane(&e1, 16).unwrap();
        let p2 = fit_ground_plane(&e2, 16).unwrap();
        let a = ground_depth_map(&i, &p1, 80, 45, 1e6).unwrap();
        let b = ground_depth_map(&i, &p2, 80, 45, 1e6).unwrap();
        for k in 0..a.values.len() {
            prop_assert_eq!(a.valid[k], b.valid[k]);
            if a.valid[k] {
                prop_assert!((b.values[k] - 2.0 * a.values[k]).abs() <= 1e-9 * b.values[k]);
            }
        }
        // depth grows toward the horizon within every column
        for col in 0..80 {
            for row in 1..45 {
                let (up, down) = ((row - 1) * 80 + col, row * 80 + col);
                if a.valid[up] && a.valid[down] {
                    prop_assert!(a.values[up] > a.values[down]);
                }
            }
        }
        let g = ground_gradient_map(&a).unwrap();
        prop_assert!(g.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn plucker_invariant_under_joint_rescale(yaw in -3.1..3.1f64, s in 1usize..5) {
        let (i, e) = camera(900.0, 1.0, yaw, 0.05, 1.5);
        let coarse = plucker_raymap(&i, &e, 32, 18, false).unwrap();
        let fine = plucker_raymap(&i, &e, 32 * s, 18 * s, false).unwrap();
        // coarse pixel (x, y) and fine pixel (s·x, s·y) see the same ray
        for y in 0..18 {
            for x in 0..32 {
                for c in 0..6 {
                    let a = coarse.get(c, y, x);
                    let b = fine.get(c, y * s, x * s);
                    prop_assert!((a - b).abs() < 1e-12, "channel {} at ({}, {}): {} vs {}", c, x, y, a, b);
                }
            }
        }
        let inv = inverse_focal_map(&i, 32, 18).unwrap();
        let f = 900.0 * 32.0 / 800.0;
        prop_assert!(inv.as_slice().iter().all(|&v| v == 1.0 / (f * f)));
    }

    #[test]
    fn focal_modulation_invariance(k in 0.25..4.0f64, vals in prop::collection::vec(-5.0..5.0f64, 24)) {
        let f = FeatureTensor::from_vec(2, 3, 4, vals).unwrap();
        let m = FeatureTensor::filled(1, 3, 4, 1.0 / 1250.0f64.powi(2));
        let scaled_f = f.map(|v| v * k * k);
        let scaled_m = m.map(|v| v / (k * k));
        let a = modulate_focal(&scaled_f, &scaled_m).unwrap();
        let b = modulate_focal(&f, &m).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-15 * y.abs().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn radius_schedule_monotone(z1 in -5.0..20.0f64, dz in 0.0..10.0f64) {
        prop_assert!(radius_schedule(z1 + dz, false) <= radius_schedule(z1, false));
        prop_assert_eq!(radius_schedule(z1, true), radius_schedule(z1 + dz, true));
    }

    #[test]
    fn nds_star_monotone(map in 0.0..0.9f64, e in 0.0..2.0f64, d in 0.0..0.1f64) {
        let s = DetectionScores { map, mate: e, mase: 0.3, maoe: 0.2 };
        let more_map = DetectionScores { map: map + d, ..s };
        let worse = DetectionScores { mate: e + d, ..s };
        let base = nds_star(&s).unwrap();
        prop_assert!(nds_star(&more_map).unwrap() >= base);
        prop_assert!(nds_star(&worse).unwrap() <= base);
        prop_assert!((0.0..=1.0).contains(&base));
        let clamped = DetectionScores { mate: 1.0 + e, ..s };
        prop_assert_eq!(nds_star(&clamped).unwrap(), nds_star(&DetectionScores { mate: 1.0, ..s }).unwrap());
    }

    #[test]
    fn scene_ply_round_trip(pts in prop::collection::vec(
        (-50.0..50.0f64, -50.0..50.0f64, -2.0..12.0f64, 0.0..=1.0f64, 1e-4..0.5f64, any::<bool>()), 0..40)
    ) {
        let mut scene = GaussianScene::new();
        for (x, y, z, c, r, fg) in pts {
            scene.push(Vector3::new(x, y, z), r, [c, 1.0 - c, c * c], fg);
        }
        let mut buf = Vec::new();
        write_scene_ply(&mut buf, &scene).unwrap();
        prop_assert_eq!(read_scene_ply(&buf[..]).unwrap(), scene);
    }
}

fn random_scene(n: usize, seed: u64) -> GaussianScene {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut scene = GaussianScene::new();
    for _ in 0..n {
        let p = Vector3::new(rng.random_range(-5.0..40.0), rng.random_range(-15.0..15.0), rng.random_range(-0.5..5.0));
        scene.push(p, rng.random_range(0.005..0.3), [rng.random(), rng.random(), rng.random()], false);
    }
    scene
}

#[test]
fn render_independent_of_threads_and_culling() {
    let scene = random_scene(20_000, 3);
    let (i, e) = camera(500.0, 1.0, 0.1, 0.02, 1.6);
    let reference = render(&scene, &i, &e, [0.0; 3], &RenderOptions::default());
    assert!(reference.hit_count() > 1000);
    for threads in [1, 2, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| render(&scene, &i, &e, [0.0; 3], &RenderOptions::default()));
        assert_eq!(out, reference, "{threads} threads");
    }
    let no_cull = RenderOptions { frustum_culling: false, ..Default::default() };
    assert_eq!(render(&scene, &i, &e, [0.0; 3], &no_cull), reference);
}

#[test]
fn render_disk_radius_linear_in_focal() {
    let mut scene = GaussianScene::new();
    scene.push(Vector3::new(5.0, 0.0, 1.5), 0.2, [1.0; 3], false);
    let widths: Vec<usize> = [300.0, 600.0]
        .iter()
        .map(|&f| {
            let i = CameraIntrinsics::new(f, f, 100.0, 100.0, 201, 201).unwrap();
            let e = CameraExtrinsics::from_yaw(0.0, Vector3::new(0.0, 0.0, 1.5));
            let t = render(&scene, &i, &e, [0.0; 3], &RenderOptions::default());
            (0..201).filter(|&x| t.hit[100 * 201 + x]).count()
        })
        .collect();
    // 2·(f·r/z) + 1 covered centres on the middle row: 25 and 49
    assert_eq!(widths, vec![25, 49]);
}

#[test]
fn rgbd_reprojects_to_source_pixels() {
    let rig = preset_rig(Preset::Waymo).rescaled(0.1).unwrap();
    let cam = &rig.cameras()[3];
    let (w, h) = (cam.intrinsics.width(), cam.intrinsics.height());
    let depth: Vec<f64> = (0..w * h).map(|k| 0.5 + f64::from(k % 97) * 1.7).collect();
    let rgb = RgbImage::from_fn(w, h, |x, y| Rgb([x as u8, y as u8, 9]));
    let scene = GaussianScene::from_rgbd(&[RgbdFrame {
        rgb: &rgb,
        depth: &depth,
        intrinsics: &cam.intrinsics,
        extrinsics: &cam.extrinsics,
    }])
    .unwrap();
    let valid = depth.iter().filter(|&&z| z > 0.1 && z < 200.0).count();
    assert_eq!(scene.len(), valid);
    let mut k = 0;
    for (p, &z) in depth.iter().enumerate() {
        if !(z > 0.1 && z < 200.0) {
            continue;
        }
        let px = cam.project(&scene.centers[k]).unwrap();
        let (col, row) = ((p % w as usize) as f64, (p / w as usize) as f64);
        assert!((px.u - col).abs() < 0.5 && (px.v - row).abs() < 0.5);
        assert!((px.z - z).abs() <= 1e-6 * z);
        k += 1;
    }
}

#[test]
fn focal_resize_magnifies_checkerboard() {
    let (w, h) = (128u32, 96u32);
    let intr = CameraIntrinsics::new(100.0, 100.0, 64.0, 48.0, w, h).unwrap();
    let period = 8u32;
    let board = RgbImage::from_fn(w, h, |x, y| {
        if ((x / (period / 2)) + (y / (period / 2))).is_multiple_of(2) {
            Rgb([255; 3])
        } else {
            Rgb([0; 3])
        }
    });
    let out = focal_resize(&board, &intr, 2.0).unwrap();
    assert_eq!(out.intrinsics.fu(), 200.0);
    assert_eq!((out.intrinsics.cu(), out.intrinsics.cv()), (64.0, 48.0));
    // count black/white transitions along the principal row: half as many after 2x zoom
    let transitions = |img: &RgbImage| {
        (1..w).filter(|&x| (img.get_pixel(x, 48).0[0] > 127) != (img.get_pixel(x - 1, 48).0[0] > 127)).count()
    };
    let before = transitions(&board);
    let after = transitions(&out.image);
    assert_eq!(before, 2 * (w / period) as usize - 1);
    assert!(after.abs_diff(before / 2) <= 1, "{before} -> {after}");
    assert!(out.coverage.iter().all(|&c| c));
    // shrinking leaves uncovered borders filled with black
    let small = focal_resize(&board, &intr, 0.5).unwrap();
    assert!(small.coverage.iter().any(|&c| !c));
    for (k, &c) in small.coverage.iter().enumerate() {
        if !c {
            assert_eq!(small.image.get_pixel(k as u32 % w, k as u32 / w).0, [0; 3]);
        }
    }
}

#[test]
fn prior_stack_directory_round_trip() {
    let rig = preset_rig(Preset::NuScenes);
    let cam = rig.camera("front").unwrap();
    let priors = build_prior_set(&cam.intrinsics, &cam.extrinsics, 44, 24, &PriorConfig::default()).unwrap();
    let stack = priors.raw_stack();
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = PRIOR_CHANNELS.iter().map(|s| s.to_string()).collect();
    save_stack(dir.path(), &stack, &names, Default::default()).unwrap();
    let (back, manifest) = load_stack(dir.path()).unwrap();
    assert_eq!(manifest.channels.len(), 9);
    assert_eq!(back.shape(), stack.shape());
    for (a, b) in back.as_slice().iter().zip(stack.as_slice()) {
        assert_eq!(*a, f64::from(*b as f32));
    }
}

#[test]
fn yaw_rotates_plucker_channels_only() {
    let (i, e) = camera(800.0, 1.0, 0.0, 0.0, 1.6);
    let r0 = rot_z(0.7) * rot_y(0.0);
    let e2 = CameraExtrinsics::new(r0 * e.rotation(), r0 * e.translation()).unwrap();
    let a = build_prior_set(&i, &e, 40, 22, &PriorConfig::default()).unwrap();
    let b = build_prior_set(&i, &e2, 40, 22, &PriorConfig::default()).unwrap();
    assert_eq!(a.m_if, b.m_if);
    for (x, y) in a.m_gd.as_slice().iter().zip(b.m_gd.as_slice()) {
        assert!((x - y).abs() < 1e-9);
    }
    for p in 0..a.m_pr.plane_len() {
        let get = |t: &FeatureTensor, c0: usize| Vector3::new(t.plane(c0)[p], t.plane(c0 + 1)[p], t.plane(c0 + 2)[p]);
        assert!((r0 * get(&a.m_pr, 0) - get(&b.m_pr, 0)).norm() < 1e-12);
        assert!((r0 * get(&a.m_pr, 3) - get(&b.m_pr, 3)).norm() < 1e-12);
    }
}
