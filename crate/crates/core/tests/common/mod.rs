//! Property checks shared by the property tests and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::PI;

use fskimg_core::array::elements_per_line;
use fskimg_core::filter::box_filter_valid;
use fskimg_core::fsk::arg;
use fskimg_core::io::{decode_cube, encode_cube};
use fskimg_core::metrics::accuracy;
use fskimg_core::*;
use num_complex::{Complex32, Complex64};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = std::result::Result<(), TestCaseError>;

pub fn desk_array() -> AntennaArray {
    build_uniform_array(0.048, 0.003, ArrayLayout::Cross).unwrap()
}

/// 5 elements per line, cheap enough for hundreds of cases.
pub fn small_array() -> AntennaArray {
    build_uniform_array(0.012, 0.003, ArrayLayout::Cross).unwrap()
}

pub fn fsk3_plan() -> FrequencyPlan {
    FrequencyPlan::fsk3(82e9, 81.8e9, 79.5e9).unwrap()
}

fn point_cube(array: &AntennaArray, plan: &FrequencyPlan, p: Point3, refl: f64) -> DataCube {
    simulate(&make_point_scene(p, refl).unwrap(), array, plan, AmplitudeModel::Unit).unwrap()
}

pub fn complex() -> impl Strategy<Value = Complex64> {
    prop_oneof![
        (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(re, im)| Complex64::new(re, im)),
        // exact negative real axis and other branch-cut cases
        (-1e3f64..0.0).prop_map(|re| Complex64::new(re, 0.0)),
        (-1e3f64..0.0).prop_map(|re| Complex64::new(re, -0.0)),
        Just(Complex64::new(0.0, 0.0)),
    ]
}

/// Every valid phase difference lies in (−π, π].
pub fn check_phase_range(pairs: &[(Complex64, Complex64)]) -> Check {
    let lateral = LateralGrid::new(0.0, 0.003, 0.0, 0.003, 0.001).unwrap();
    let n = lateral.len();
    let grid = ImageGrid::new(lateral, 0.3).unwrap();
    let take = |f: fn(&(Complex64, Complex64)) -> Complex64| -> Vec<Complex64> {
        (0..n).map(|i| f(&pairs[i % pairs.len()])).collect()
    };
    let a = ComplexImage::new(grid, 82e9, take(|p| p.0)).unwrap();
    let b = ComplexImage::new(grid, 81.8e9, take(|p| p.1)).unwrap();
    let map = complex_difference(&a, &b).unwrap();
    for i in 0..n {
        let zero = a.pixels[i].norm() == 0.0 || b.pixels[i].norm() == 0.0;
        prop_assert_eq!(map.get(i).is_none(), zero);
        if let Some(phi) = map.get(i) {
            prop_assert!(phi > -PI && phi <= PI, "phase {} out of range", phi);
        }
    }
    for (z, _) in pairs {
        if z.norm() > 0.0 {
            let phi = arg(*z);
            prop_assert!(phi > -PI && phi <= PI);
        }
    }
    Ok(())
}

pub fn scatterer() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-0.02f64..0.02, -0.02f64..0.02, 0.2f64..0.4, 0.1f64..2.0)
}

/// simulate(A ∪ B) = simulate(A) + simulate(B), up to single-precision
/// storage of each cube.
pub fn check_linearity(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> Check {
    let array = small_array();
    let plan = fsk3_plan();
    let sa = make_point_scene(Point3::new(a.0, a.1, a.2), a.3).unwrap();
    let sb = make_point_scene(Point3::new(b.0, b.1, b.2), b.3).unwrap();
    let ca = simulate(&sa, &array, &plan, AmplitudeModel::Unit).unwrap();
    let cb = simulate(&sb, &array, &plan, AmplitudeModel::Unit).unwrap();
    let cab = simulate(&sa.merged(&sb), &array, &plan, AmplitudeModel::Unit).unwrap();
    let tol = 4.0 * f32::EPSILON as f64 * (a.3 + b.3);
    for ((x, y), z) in ca.samples().iter().zip(cb.samples()).zip(cab.samples()) {
        let sum = Complex64::new(x.re as f64 + y.re as f64, x.im as f64 + y.im as f64);
        let got = Complex64::new(z.re as f64, z.im as f64);
        prop_assert!((sum - got).norm() <= tol, "{} vs {}", sum, got);
    }
    Ok(())
}

/// Scaling all reflectivities by k scales every sample by k; exactly for
/// powers of two.
pub fn check_scaling(s: (f64, f64, f64, f64), k: f64, pow2: i32) -> Check {
    let array = small_array();
    let plan = fsk3_plan();
    let scene = make_point_scene(Point3::new(s.0, s.1, s.2), s.3).unwrap();
    let base = simulate(&scene, &array, &plan, AmplitudeModel::Unit).unwrap();
    let scaled = simulate(&scene.scaled(k).unwrap(), &array, &plan, AmplitudeModel::Unit).unwrap();
    let tol = 2.0 * f32::EPSILON as f64 * s.3 * k.abs();
    for (x, y) in base.samples().iter().zip(scaled.samples()) {
        let want = Complex64::new(x.re as f64 * k, x.im as f64 * k);
        let got = Complex64::new(y.re as f64, y.im as f64);
        prop_assert!((want - got).norm() <= tol);
    }
    let k2 = 2f64.powi(pow2);
    let exact = simulate(&scene.scaled(k2).unwrap(), &array, &plan, AmplitudeModel::Unit).unwrap();
    for (x, y) in base.samples().iter().zip(exact.samples()) {
        prop_assert_eq!(*x * k2 as f32, *y);
    }
    Ok(())
}

/// reconstruct_points on all pixel centers reproduces reconstruct_image
/// bit for bit.
pub fn check_grid_point_equivalence(s: (f64, f64, f64, f64), z_e: f64, freq: usize) -> Check {
    let array = small_array();
    let plan = fsk3_plan();
    let cube = point_cube(&array, &plan, Point3::new(s.0, s.1, s.2), s.3);
    let lateral = LateralGrid::centered(s.0, s.1, 0.003, 0.001).unwrap();
    let grid = ImageGrid::new(lateral, z_e).unwrap();
    let image = reconstruct_image(&cube, freq, &grid).unwrap();
    let points: Vec<Point3> = (0..lateral.len())
        .map(|i| {
            let (x, y) = lateral.center(i);
            Point3::new(x, y, z_e)
        })
        .collect();
    let values = reconstruct_points(&cube, freq, &points).unwrap();
    prop_assert_eq!(values, image.pixels);
    Ok(())
}

/// The strongest pixel of a focused image is the grid cell nearest to the
/// scatterer. Positions stay within 0.3 pitch of a cell center so the
/// nearest cell is unambiguous.
pub fn check_argmax_focus(ix: i32, iy: i32, dx: f64, dy: f64, z: f64) -> Check {
    let array = desk_array();
    let plan = fsk3_plan();
    let pitch = 0.001;
    let (x, y) = (ix as f64 * pitch + dx * pitch, iy as f64 * pitch + dy * pitch);
    let cube = point_cube(&array, &plan, Point3::new(x, y, z), 1.0);
    let lateral = LateralGrid::centered(ix as f64 * pitch, iy as f64 * pitch, 0.005, pitch).unwrap();
    let image = reconstruct_image(&cube, 0, &ImageGrid::new(lateral, z).unwrap()).unwrap();
    let (best, _) = image.argmax();
    prop_assert_eq!(Some(best), lateral.nearest_cell(x, y));
    Ok(())
}

/// At the true target point every frequency reconstructs with zero phase.
pub fn check_phase_consistency(s: (f64, f64, f64, f64)) -> Check {
    let array = small_array();
    let plan = fsk3_plan();
    let p = Point3::new(s.0, s.1, s.2);
    let cube = point_cube(&array, &plan, p, s.3);
    for f in 0..plan.len() {
        let v = reconstruct_points(&cube, f, &[p]).unwrap()[0];
        prop_assert!(arg(v).abs() < 1e-6, "phase {} at tone {}", arg(v), f);
        let coherent = (array.channels() as f64) * s.3;
        prop_assert!((v.norm() - coherent).abs() < 1e-5 * coherent);
    }
    Ok(())
}

pub fn masked_field() -> impl Strategy<Value = (usize, usize, Vec<Option<f64>>, usize)> {
    (2usize..9, 2usize..9, prop_oneof![Just(1usize), Just(3), Just(5)]).prop_flat_map(|(nx, ny, k)| {
        let cell = prop_oneof![1 => Just(None), 3 => (0.1f64..1.0).prop_map(Some)];
        (Just(nx), Just(ny), proptest::collection::vec(cell, nx * ny), Just(k))
    })
}

/// Invalid cells stay invalid and are excluded from every mean; valid cells
/// get the mean of their valid neighbors.
pub fn check_filter_mask(nx: usize, ny: usize, values: &[Option<f64>], kernel: usize) -> Check {
    let p = 0.001;
    let grid = LateralGrid::new(0.0, (nx - 1) as f64 * p, 0.0, (ny - 1) as f64 * p, p).unwrap();
    prop_assert_eq!((grid.nx(), grid.ny()), (nx, ny));
    let out = box_filter_valid(&grid, values, kernel).unwrap();
    let h = (kernel / 2) as isize;
    for iy in 0..ny as isize {
        for ix in 0..nx as isize {
            let i = (iy * nx as isize + ix) as usize;
            prop_assert_eq!(out[i].is_some(), values[i].is_some());
            if values[i].is_none() {
                continue;
            }
            let mut acc = Vec::new();
            for jy in iy - h..=iy + h {
                for jx in ix - h..=ix + h {
                    if jx >= 0 && jy >= 0 && jx < nx as isize && jy < ny as isize {
                        if let Some(v) = values[(jy * nx as isize + jx) as usize] {
                            acc.push(v);
                        }
                    }
                }
            }
            let mean = acc.iter().sum::<f64>() / acc.len() as f64;
            prop_assert!((out[i].unwrap() - mean).abs() < 1e-12);
        }
    }
    // a constant field is a fixed point
    let constant: Vec<Option<f64>> = values.iter().map(|v| v.map(|_| 0.25)).collect();
    let fixed = box_filter_valid(&grid, &constant, kernel).unwrap();
    for (a, b) in fixed.iter().zip(&constant) {
        prop_assert_eq!(a.map(|v| (v - 0.25).abs() < 1e-15), b.map(|_| true));
    }
    Ok(())
}

pub fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        (0.01f64..0.2, 1usize..4, 0usize..3, 0usize..4),
        (0.2f64..0.6, -30.0f64..-1.0, 0usize..4, 1usize..4),
        (proptest::option::of(-10.0f64..60.0), proptest::collection::vec(0u64..1000, 1..4)),
        (0.2f64..0.4, -0.2f64..0.2, 2usize..200),
    )
        .prop_map(|(a, b, c, d)| {
            let mut cfg = RunConfig::default();
            cfg.aperture_length = a.0;
            cfg.array_pitch = a.0 / (3 * a.1) as f64;
            cfg.layout = [ArrayLayout::Cross, ArrayLayout::ParallelLines, ArrayLayout::Grid][a.2];
            cfg.method = Method::ALL[a.3];
            cfg.fsk.initial_z_e = b.0;
            cfg.fsk.threshold_db = b.1;
            cfg.fsk.smoothing_kernel_2d = 2 * b.2 + 1;
            cfg.fsk.max_coarse_iterations = b.3;
            cfg.snr_db = c.0;
            cfg.seeds = c.1;
            cfg.scene.z = d.0;
            cfg.scene.slope_x = d.1;
            cfg.broadband_steps = d.2;
            cfg
        })
}

/// parse(serialize(config)) = config.
pub fn check_config_round_trip(cfg: &RunConfig) -> Check {
    let text = cfg.to_ini_string();
    let back = RunConfig::from_ini_str(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&back, cfg);
    Ok(())
}

/// Cube files decode to the cube that was encoded.
pub fn check_cube_round_trip(samples: &[(f32, f32)]) -> Check {
    let array = AntennaArray::new(
        vec![Point3::new(-0.01, 0.0, 0.0), Point3::new(0.01, 0.0, 0.0)],
        vec![Point3::new(0.0, -0.01, 0.0), Point3::new(0.0, 0.01, 0.0)],
    )
    .unwrap();
    let plan = fsk3_plan();
    let data: Vec<Complex32> = (0..12)
        .map(|i| {
            let (re, im) = samples[i % samples.len()];
            Complex32::new(re, im)
        })
        .collect();
    let cube = DataCube::new(array, plan, data).unwrap();
    let bytes = encode_cube(&cube);
    prop_assert_eq!(decode_cube(&bytes).unwrap(), cube);
    Ok(())
}

fn plane_truth(z: f64) -> DepthMap {
    let grid = LateralGrid::centered(0.0, 0.0, 0.002, 0.001).unwrap();
    DepthMap::new(grid, vec![Some(z); grid.len()], vec![1.0; grid.len()]).unwrap()
}

fn shifted_cloud(truth: &DepthMap, bias: &[f64]) -> SurfacePointCloud {
    let points: Vec<Point3> = truth
        .points()
        .zip(bias.iter().cycle())
        .map(|((x, y, z, _), b)| Point3::new(x, y, z + b))
        .collect();
    let n = points.len();
    SurfacePointCloud::new(points, vec![1.0; n], Method::Fsk3).unwrap()
}

/// MAE is symmetric in the sign of the error and zero iff all compared
/// cells match.
pub fn check_accuracy_symmetry(z: f64, bias: &[f64]) -> Check {
    let truth = plane_truth(z);
    let neg: Vec<f64> = bias.iter().map(|b| -b).collect();
    let up = accuracy(&shifted_cloud(&truth, bias), &truth).unwrap();
    let down = accuracy(&shifted_cloud(&truth, &neg), &truth).unwrap();
    prop_assert!((up.mae_mm - down.mae_mm).abs() < 1e-9);
    prop_assert!((up.max_ae_mm - down.max_ae_mm).abs() < 1e-9);
    let zero = accuracy(&shifted_cloud(&truth, &[0.0]), &truth).unwrap();
    prop_assert_eq!(zero.mae_mm, 0.0);
    prop_assert_eq!(zero.relative_accuracy, 100.0);
    if bias.iter().any(|b| (z + b) != z) {
        prop_assert!(up.mae_mm > 0.0);
    }
    Ok(())
}

/// The strongest-point standard deviation ignores a common depth offset.
pub fn check_precision_shift(zs: &[f64], offset: f64) -> Check {
    let cloud = |z: f64| SurfacePointCloud::new(vec![Point3::new(0.0, 0.0, z)], vec![1.0], Method::Fsk2).unwrap();
    let base: Vec<_> = zs.iter().map(|&z| cloud(z)).collect();
    let moved: Vec<_> = zs.iter().map(|&z| cloud(z + offset)).collect();
    let a = precision(&base).unwrap().std_z_strongest_mm;
    let b = precision(&moved).unwrap().std_z_strongest_mm;
    prop_assert!((a - b).abs() < 1e-6 * (1.0 + a), "{} vs {}", a, b);
    Ok(())
}

/// elements_per_line matches the closed form for exact multiples.
pub fn check_elements_per_line(n: usize, pitch_um: u32) -> Check {
    let pitch = pitch_um as f64 * 1e-6;
    prop_assert_eq!(elements_per_line(n as f64 * pitch, pitch), n + 1);
    Ok(())
}
