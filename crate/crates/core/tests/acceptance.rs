//! Acceptance suite: one test and one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use common::*;
use fskimg_core::fsk::run_broadband;
use fskimg_core::io::{encode_cube, write_cloud_csv, write_cloud_ply, write_cube};
use fskimg_core::metrics::{comparison_csv, ComparisonSetup};
use fskimg_core::scene::HandParams;
use fskimg_core::*;
use num_complex::Complex64;
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fsk2_plan() -> FrequencyPlan {
    FrequencyPlan::fsk2(82e9, 81.8e9).unwrap()
}

fn hand_lateral() -> LateralGrid {
    LateralGrid::centered(0.0, 0.0, 0.03, 0.001).unwrap()
}

fn hand_scene() -> Scene {
    make_surface_scene(SurfaceKind::HandSilhouette(HandParams::default()), hand_lateral()).unwrap()
}

/// Two-tone coherent focus magnitude on boresight at depth `z`, summed
/// directly from the cube samples.
fn focus_magnitude(cube: &DataCube, x: f64, y: f64, z: f64) -> f64 {
    let (n_tx, n_rx, n_f) = cube.dims();
    let c = SPEED_OF_LIGHT;
    let mut sum = Complex64::new(0.0, 0.0);
    for f in 0..n_f {
        let freq = cube.plan().frequencies()[f];
        for t in 0..n_tx {
            let a = cube.array().tx()[t];
            let dt = ((a.x - x).powi(2) + (a.y - y).powi(2) + (a.z - z).powi(2)).sqrt();
            for r in 0..n_rx {
                let b = cube.array().rx()[r];
                let dr = ((b.x - x).powi(2) + (b.y - y).powi(2) + (b.z - z).powi(2)).sqrt();
                let s = cube.get(t, r, f);
                let k = Complex64::from_polar(1.0, 2.0 * PI * freq * (dt + dr) / c);
                sum += Complex64::new(s.re as f64, s.im as f64) * k;
            }
        }
    }
    sum.norm()
}

/// Depth maximizing the focus magnitude: 0.5 mm sweep then ternary search.
fn oracle_depth(cube: &DataCube, lo: f64, hi: f64) -> f64 {
    let step = 5e-4;
    let n = ((hi - lo) / step).ceil() as usize;
    let best = (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|z| (z, focus_magnitude(cube, 0.0, 0.0, z)))
        .fold((lo, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
        .0;
    let (mut a, mut b) = (best - step, best + step);
    while b - a > 1e-8 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if focus_magnitude(cube, 0.0, 0.0, m1) < focus_magnitude(cube, 0.0, 0.0, m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    0.5 * (a + b)
}

/// Phase difference at the central pixel between the high and low tone
/// images reconstructed at `z_e`.
fn center_phase(cube: &DataCube, z_e: f64) -> f64 {
    let lateral = LateralGrid::centered(0.0, 0.0, 0.001, 0.001).unwrap();
    let grid = ImageGrid::new(lateral, z_e).unwrap();
    let high = reconstruct_image(cube, 0, &grid).unwrap();
    let low = reconstruct_image(cube, 1, &grid).unwrap();
    let centre = lateral.nearest_cell(0.0, 0.0).unwrap();
    complex_difference(&high, &low).unwrap().get(centre).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let array = desk_array();
    let plan = fsk2_plan();
    let z_e = 0.45;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let delta: f64 = rng.gen_range(-0.3..0.3);
        let cube = simulate(
            &make_point_scene(Point3::new(0.0, 0.0, z_e + delta), 1.0).unwrap(),
            &array,
            &plan,
            AmplitudeModel::Unit,
        )
        .unwrap();
        let estimate = depth_from_phase(center_phase(&cube, z_e), 200e6).unwrap();
        let oracle = oracle_depth(&cube, z_e - 0.37, z_e + 0.37) - z_e;
        let tol = 0.01 * delta.abs() + 10e-6;
        ensure(
            (oracle - delta).abs() < 1e-6,
            format!("oracle focus {oracle} disagrees with scene offset {delta}"),
        )?;
        ensure(
            (estimate - oracle).abs() <= tol,
            format!("delta {delta:.6} m: phase estimate {estimate:.6} vs oracle {oracle:.6}"),
        )?;
        worst = worst.max((estimate - oracle).abs() / tol);
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, format!("took {elapsed:.1} s"))?;
    Ok(format!("100 offsets, worst error {:.2} of tolerance, {elapsed:.1} s", worst))
}

fn criterion_2() -> Outcome {
    let array = desk_array();
    let plan = fsk2_plan();
    let span = unambiguous_span(200e6).unwrap();
    // a distant z_e keeps the off-boresight path deviation negligible
    let z_e = 3.0;
    let phase_at = |delta: f64| {
        let scene = make_point_scene(Point3::new(0.0, 0.0, z_e + delta), 1.0).unwrap();
        center_phase(&simulate(&scene, &array, &plan, AmplitudeModel::Unit).unwrap(), z_e)
    };
    let full = phase_at(span);
    let half = phase_at(span / 2.0);
    ensure(full.abs() < 1e-3, format!("full-span phase {full}"))?;
    ensure((half.abs() - PI).abs() < 1e-3, format!("half-span phase {half}"))?;
    Ok(format!("span {span:.5} m: dphi {full:.2e} rad, half span |dphi| - pi = {:.2e} rad", half.abs() - PI))
}

fn criterion_3() -> Outcome {
    let scene = hand_scene();
    let setup = ComparisonSetup {
        array: desk_array(),
        fsk_plan: fsk3_plan(),
        broadband_plan: None,
        grid: ImageGrid::new(hand_lateral(), 0.45).unwrap(),
        volume: VolumeSpec::new(hand_lateral(), 0.280, 0.320, 0.001).unwrap(),
        fsk: FskConfig::default(),
        sota_threshold_db: -13.0,
        amplitude_model: AmplitudeModel::Unit,
        methods: vec![Method::Fsk2, Method::Fsk3, Method::NarrowbandSota],
    };
    let seeds: Vec<u64> = (0..50).collect();
    let rows = compare_methods(&scene, &setup, &[Some(20.0)], &seeds).map_err(|e| e.to_string())?;
    let mae = |m: Method| -> Vec<f64> { rows.iter().filter(|r| r.method == m).map(|r| r.metrics.mae_mm).collect() };
    let (m2, m3, mn) = (mae(Method::Fsk2), mae(Method::Fsk3), mae(Method::NarrowbandSota));
    let beats_2 = m3.iter().zip(&m2).filter(|(a, b)| a < b).count();
    let beats_n = m3.iter().zip(&mn).filter(|(a, b)| a < b).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let detail = format!(
        "3fsk beats 2fsk {beats_2}/50, narrowband {beats_n}/50; mean MAE 2fsk {:.2} mm, 3fsk {:.2} mm, narrowband {:.2} mm",
        mean(&m2),
        mean(&m3),
        mean(&mn)
    );
    ensure(beats_2 * 100 >= 95 * 50 && beats_n * 100 >= 95 * 50, detail.clone())?;
    Ok(detail)
}

fn criterion_4() -> Outcome {
    let array = desk_array();
    let plan = fsk3_plan();
    let scene = make_point_scene(Point3::new(0.0, 0.0, 0.3), 1.0).unwrap();
    let clean = simulate(&scene, &array, &plan, AmplitudeModel::Unit).unwrap();
    let grid = ImageGrid::new(LateralGrid::centered(0.0, 0.0, 0.01, 0.001).unwrap(), 0.45).unwrap();
    let fsk = FskConfig::default();
    let (mut c2, mut c3) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let cube = add_noise(&clean, 20.0, seed).unwrap();
        c2.push(run_2fsk(&cube, &grid, &fsk).unwrap().cloud);
        c3.push(run_3fsk(&cube, &grid, &fsk).unwrap().cloud);
    }
    let s2 = precision(&c2).unwrap().std_z_strongest_mm;
    let s3 = precision(&c3).unwrap().std_z_strongest_mm;
    let ratio = s2 / s3;
    let detail = format!("std 2fsk {s2:.4} mm, 3fsk {s3:.4} mm, ratio {ratio:.2}");
    ensure((6.0..=25.0).contains(&ratio), detail.clone())?;
    Ok(detail)
}

fn criterion_5() -> Outcome {
    let array = desk_array();
    let plan = FrequencyPlan::broadband(72e9, 82e9, 16).unwrap();
    let lateral = LateralGrid::centered(0.0, 0.0, 0.02, 0.001).unwrap();
    let scene = make_surface_scene(SurfaceKind::Plane { z: 0.30 }, lateral).unwrap();
    let cube = simulate(&scene, &array, &plan, AmplitudeModel::Unit).unwrap();
    let volume = VolumeSpec::new(lateral, 0.245, 0.325, 0.001).unwrap();
    let out = run_broadband(&cube, &volume, -13.0).map_err(|e| e.to_string())?;
    let m = accuracy(&out.cloud, scene.ground_truth().unwrap()).unwrap();
    let detail = format!("MAE {:.3} mm over {} cells", m.mae_mm, m.n_compared);
    ensure(m.mae_mm <= 1.0, detail.clone())?;
    Ok(detail)
}

fn criterion_6() -> Outcome {
    let array = desk_array();
    let plan = fsk3_plan();
    let grid = ImageGrid::new(hand_lateral(), 0.45).unwrap();
    let fsk = FskConfig::default();
    let clean = simulate(&hand_scene(), &array, &plan, AmplitudeModel::Unit).unwrap();
    let mut details = Vec::new();
    for (label, cube) in [("noiseless", clean.clone()), ("20 dB", add_noise(&clean, 20.0, 3).unwrap())] {
        let out = run_3fsk(&cube, &grid, &fsk).unwrap();
        let t = &out.telemetry;
        let image = reconstruct_image(&cube, 0, &grid.at_depth(t.final_z_e).unwrap()).unwrap();
        let n_t = count_target_pixels(&image, fsk.threshold_db).unwrap();
        ensure(t.n_t == n_t, format!("{label}: telemetry N_T {} vs recount {n_t}", t.n_t))?;
        ensure(
            t.fine_point_backprojections == 3 * n_t && t.fine_phase_evaluations == 2 * n_t,
            format!(
                "{label}: {} point backprojections and {} phase evaluations for N_T = {n_t}",
                t.fine_point_backprojections, t.fine_phase_evaluations
            ),
        )?;
        details.push(format!("{label} N_T {n_t}"));
    }
    Ok(format!("{}; 3 N_T backprojections and 2 N_T phase evaluations", details.join(", ")))
}

struct Artifacts {
    cube_bytes: Vec<u8>,
    cube_file: Vec<u8>,
    cloud_csv: Vec<u8>,
    cloud_ply: Vec<u8>,
    telemetry: String,
    report: String,
    comparison: String,
}

fn telemetry_counts(t: &Telemetry) -> String {
    let mut t = t.clone();
    t.stages.clear();
    t.to_key_value()
}

fn produce(dir: &Path) -> Artifacts {
    let scene = hand_scene();
    let array = desk_array();
    let clean = simulate(&scene, &array, &fsk3_plan(), AmplitudeModel::Unit).unwrap();
    let cube = add_noise(&clean, 20.0, 11).unwrap();
    let cube_path = dir.join("cube.fskcube");
    write_cube(&cube_path, &cube).unwrap();
    let grid = ImageGrid::new(hand_lateral(), 0.45).unwrap();
    let out = run_3fsk(&cube, &grid, &FskConfig::default()).unwrap();
    write_cloud_csv(&dir.join("cloud.csv"), &out.cloud).unwrap();
    write_cloud_ply(&dir.join("cloud.ply"), &out.cloud).unwrap();
    let report = accuracy(&out.cloud, scene.ground_truth().unwrap()).unwrap();
    let small = LateralGrid::centered(0.0, 0.0, 0.01, 0.001).unwrap();
    let setup = ComparisonSetup {
        array,
        fsk_plan: fsk3_plan(),
        broadband_plan: Some(FrequencyPlan::broadband(72e9, 82e9, 4).unwrap()),
        grid: ImageGrid::new(small, 0.45).unwrap(),
        volume: VolumeSpec::new(small, 0.29, 0.31, 0.001).unwrap(),
        fsk: FskConfig::default(),
        sota_threshold_db: -13.0,
        amplitude_model: AmplitudeModel::Unit,
        methods: Method::ALL.to_vec(),
    };
    let plane = make_surface_scene(SurfaceKind::Plane { z: 0.3 }, small).unwrap();
    let rows = compare_methods(&plane, &setup, &[None, Some(20.0)], &[5, 6]).unwrap();
    Artifacts {
        cube_bytes: encode_cube(&cube),
        cube_file: std::fs::read(&cube_path).unwrap(),
        cloud_csv: std::fs::read(dir.join("cloud.csv")).unwrap(),
        cloud_ply: std::fs::read(dir.join("cloud.ply")).unwrap(),
        telemetry: telemetry_counts(&out.telemetry),
        report: report.to_key_value(),
        comparison: comparison_csv(&rows),
    }
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fskimg-acceptance-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn criterion_7() -> Outcome {
    let mut runs = Vec::new();
    for (tag, threads) in [("a", 1), ("b", 4), ("c", 1), ("d", 3)] {
        let dir = scratch_dir(tag);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        runs.push(pool.install(|| produce(&dir)));
        std::fs::remove_dir_all(&dir).ok();
    }
    let first = &runs[0];
    ensure(first.cube_bytes == first.cube_file, "cube file differs from its encoding")?;
    for (i, r) in runs.iter().enumerate().skip(1) {
        let same = [
            ("cube", r.cube_file == first.cube_file),
            ("cloud csv", r.cloud_csv == first.cloud_csv),
            ("cloud ply", r.cloud_ply == first.cloud_ply),
            ("telemetry", r.telemetry == first.telemetry),
            ("report", r.report == first.report),
            ("comparison", r.comparison == first.comparison),
        ];
        if let Some((what, _)) = same.iter().find(|(_, ok)| !ok) {
            return Err(format!("{what} differs in run {i}"));
        }
    }
    Ok("cube, cloud CSV/PLY, telemetry and reports bit-identical across 4 runs with 1, 4, 1, 3 workers".into())
}

fn property<S: Strategy>(name: &str, cases: u32, strategy: S, check: impl Fn(S::Value) -> Check) -> std::result::Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, check).map_err(|e| format!("{name}: {e}"))
}

fn criterion_8() -> Outcome {
    use proptest::collection::vec;
    let start = Instant::now();
    property("phase range", 256, vec((complex(), complex()), 1..16), |p| check_phase_range(&p))?;
    property("linearity", 48, (scatterer(), scatterer()), |(a, b)| check_linearity(a, b))?;
    property("scaling", 48, (scatterer(), 0.0f64..10.0, -8i32..8), |(s, k, p)| check_scaling(s, k, p))?;
    property("grid/point equivalence", 48, (scatterer(), 0.2f64..0.6, 0usize..3), |(s, z, f)| {
        check_grid_point_equivalence(s, z, f)
    })?;
    property("phase consistency", 48, scatterer(), check_phase_consistency)?;
    property(
        "argmax focus",
        24,
        (-20i32..=20, -20i32..=20, -0.3f64..0.3, -0.3f64..0.3, 0.2f64..0.4),
        |(ix, iy, dx, dy, z)| check_argmax_focus(ix, iy, dx, dy, z),
    )?;
    property("filter mask", 256, masked_field(), |(nx, ny, v, k)| check_filter_mask(nx, ny, &v, k))?;
    property("config round trip", 256, run_config(), |c| check_config_round_trip(&c))?;
    property("cube round trip", 256, vec((-1e6f32..1e6, -1e6f32..1e6), 1..12), |s| check_cube_round_trip(&s))?;
    property("accuracy symmetry", 256, (0.1f64..1.0, vec(-0.01f64..0.01, 1..25)), |(z, b)| {
        check_accuracy_symmetry(z, &b)
    })?;
    property("precision shift", 256, (vec(0.29f64..0.31, 2..12), -0.05f64..0.05), |(z, o)| {
        check_precision_shift(&z, o)
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 300.0, format!("took {elapsed:.1} s"))?;
    Ok(format!("11 properties, {elapsed:.1} s"))
}

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs one criterion, writes its result line past the output capture, and
/// fails the test on FAIL. Criteria run one at a time so their timing
/// budgets are not shared.
fn run_criterion(number: usize, name: &str, run: fn() -> Outcome) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let line = format!("criterion {number} {status} [{name}] {detail} ({secs:.1} s)\n");
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).ok();
    out.flush().ok();
    if let Err(detail) = outcome {
        panic!("criterion {number} failed: {detail}");
    }
}

#[test]
fn criterion_1_phase_to_depth_oracle() {
    run_criterion(1, "phase-to-depth oracle equivalence", criterion_1);
}

#[test]
fn criterion_2_unambiguous_range_wrap() {
    run_criterion(2, "unambiguous-range wrap", criterion_2);
}

#[test]
fn criterion_3_refinement_ordering() {
    run_criterion(3, "refinement ordering on hand scene", criterion_3);
}

#[test]
fn criterion_4_precision_ratio() {
    run_criterion(4, "precision ratio on point target", criterion_4);
}

#[test]
fn criterion_5_broadband_baseline() {
    run_criterion(5, "broadband plane baseline", criterion_5);
}

#[test]
fn criterion_6_cost_accounting() {
    run_criterion(6, "fine-stage cost accounting", criterion_6);
}

#[test]
fn criterion_7_determinism() {
    run_criterion(7, "determinism across worker counts", criterion_7);
}

#[test]
fn criterion_8_invariant_suite() {
    run_criterion(8, "invariant property suite", criterion_8);
}
