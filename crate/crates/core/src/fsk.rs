//! Multi-tone FSK surface reconstruction.
//!
//! Two single-tone images reconstructed at a hypothesized depth `z_e` differ
//! in phase by `Δφ = 4π Δf Δz / c`, where `Δz` is the offset of the true
//! surface from `z_e`. A small tone step (FSK2) gives a long unambiguous span
//! for localization; two large steps (FSK3) give fine depth sensitivity for
//! refining the coarse surface point by point.
//!
//! Phase differences are always taken as `arg(v_low · conj(v_high))` with
//! `Δf = f_high - f_low > 0`, which makes `Δφ` grow with `Δz` under the
//! negative propagation phase of [`crate::sim`].

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::backprojection::{
    db_ratio, max_intensity_projection, reconstruct_image, reconstruct_points,
    reconstruct_volume, reconstruct_volume_narrowband, ComplexImage,
};
use crate::error::{Error, Result};
use crate::filter::box_filter_valid;
use crate::geometry::Point3;
use crate::grid::{DepthMap, ImageGrid, LateralGrid, VolumeSpec};
use crate::plan::PlanRole;
use crate::sim::DataCube;
use crate::SPEED_OF_LIGHT;

/// Fraction of the half unambiguous span beyond which a fine correction is
/// flagged as possibly aliased.
pub const ALIAS_WARN_FRACTION: f64 = 0.95;

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// `arg(z)` on the branch `(-π, π]`.
pub fn arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Depth offset `Δz = c Δφ / (4π Δf)`.
pub fn depth_from_phase(delta_phi: f64, delta_f: f64) -> Result<f64> {
    if !(delta_f > 0.0 && delta_f.is_finite()) {
        return Err(Error::invalid(format!("frequency step must be positive, got {delta_f}")));
    }
    if !(delta_phi > -PI && delta_phi <= PI) {
        return Err(Error::invalid(format!("phase {delta_phi} outside (-π, π]")));
    }
    Ok(SPEED_OF_LIGHT * delta_phi / (4.0 * PI * delta_f))
}

/// Total depth span `c / (2 Δf)` covered by `Δφ ∈ (-π, π]`.
pub fn unambiguous_span(delta_f: f64) -> Result<f64> {
    if !(delta_f > 0.0 && delta_f.is_finite()) {
        return Err(Error::invalid(format!("frequency step must be positive, got {delta_f}")));
    }
    Ok(SPEED_OF_LIGHT / (2.0 * delta_f))
}

/// Factor by which the depth noise of a tone pair with step `delta_f_b`
/// exceeds that of a pair with step `delta_f_a` for equal phase noise.
pub fn sensitivity_ratio(delta_f_a: f64, delta_f_b: f64) -> Result<f64> {
    if !(delta_f_a > 0.0 && delta_f_b > 0.0) {
        return Err(Error::invalid("frequency steps must be positive"));
    }
    Ok(delta_f_a / delta_f_b)
}

/// Per-pixel phase difference between two single-tone images.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub grid: LateralGrid,
    pub delta_phi: Vec<f64>,
    pub valid: Vec<bool>,
}

impl PhaseMap {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then_some(self.delta_phi[i])
    }
}

/// `Δφ = arg(b · conj(a))` per pixel; pixels where either image vanishes are
/// invalid. Pass the higher-frequency image as `img_a` to get `Δφ` that
/// grows with depth.
pub fn complex_difference(img_a: &ComplexImage, img_b: &ComplexImage) -> Result<PhaseMap> {
    if img_a.grid != img_b.grid {
        return Err(Error::invalid("images are reconstructed on different grids"));
    }
    let (delta_phi, valid) = img_a
        .pixels
        .iter()
        .zip(&img_b.pixels)
        .map(|(a, b)| {
            if a.norm() == 0.0 || b.norm() == 0.0 {
                (0.0, false)
            } else {
                (arg(b * a.conj()), true)
            }
        })
        .unzip();
    Ok(PhaseMap {
        grid: img_a.grid.lateral,
        delta_phi,
        valid,
    })
}

/// Number of pixels within `|threshold_db|` of the strongest pixel.
pub fn count_target_pixels(image: &ComplexImage, threshold_db: f64) -> Result<usize> {
    let mags = image.magnitudes();
    let max = mags.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::EmptyScene("image has no signal".into()));
    }
    let cutoff = max * db_ratio(threshold_db);
    Ok(mags.iter().filter(|&&m| m >= cutoff).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fsk2,
    Fsk3,
    Broadband,
    NarrowbandSota,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Fsk2,
        Method::Fsk3,
        Method::Broadband,
        Method::NarrowbandSota,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Fsk2 => "2fsk",
            Method::Fsk3 => "3fsk",
            Method::Broadband => "broadband",
            Method::NarrowbandSota => "narrowband-sota",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Reconstructed surface points with their amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointCloud {
    points: Vec<Point3>,
    amplitudes: Vec<f64>,
    method: Method,
}

impl SurfacePointCloud {
    pub fn new(points: Vec<Point3>, amplitudes: Vec<f64>, method: Method) -> Result<Self> {
        if points.len() != amplitudes.len() {
            return Err(Error::invalid("one amplitude per point required"));
        }
        if points.iter().any(|p| !(p.is_finite() && p.z > 0.0)) {
            return Err(Error::Invariant("cloud point is non-finite or behind the array".into()));
        }
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Invariant("cloud amplitude is negative or non-finite".into()));
        }
        Ok(SurfacePointCloud {
            points,
            amplitudes,
            method,
        })
    }

    pub fn from_depth_map(map: &DepthMap, method: Method) -> Result<Self> {
        let (points, amplitudes) = map
            .points()
            .map(|(x, y, z, a)| (Point3::new(x, y, z), a))
            .unzip();
        Self::new(points, amplitudes, method)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The point with the largest amplitude; the first one wins ties.
    pub fn strongest(&self) -> Option<(Point3, f64)> {
        self.points
            .iter()
            .zip(&self.amplitudes)
            .fold(None, |best: Option<(Point3, f64)>, (p, &a)| match best {
                Some((_, b)) if b >= a => best,
                _ => Some((*p, a)),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FskConfig {
    pub initial_z_e: f64,
    /// Detection threshold relative to the strongest pixel, dB (negative).
    pub threshold_db: f64,
    /// Window of the coarse depth-map boxcar, pixels per axis.
    pub smoothing_kernel_2d: usize,
    /// Window of the final cloud boxcar, neighbors per axis.
    pub smoothing_kernel_cloud: usize,
    /// Global adjust-and-re-reconstruct cycles before per-pixel evaluation.
    pub max_coarse_iterations: usize,
}

impl Default for FskConfig {
    fn default() -> Self {
        FskConfig {
            initial_z_e: 0.45,
            threshold_db: -10.0,
            smoothing_kernel_2d: 5,
            smoothing_kernel_cloud: 5,
            max_coarse_iterations: 1,
        }
    }
}

impl FskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_z_e > 0.0 && self.initial_z_e.is_finite()) {
            return Err(Error::invalid("initial z_e must be positive"));
        }
        if !(self.threshold_db < 0.0) {
            return Err(Error::invalid("threshold must be negative dB"));
        }
        for k in [self.smoothing_kernel_2d, self.smoothing_kernel_cloud] {
            if k == 0 || k % 2 == 0 {
                return Err(Error::invalid(format!("smoothing kernel {k} must be odd and >= 1")));
            }
        }
        if self.max_coarse_iterations == 0 {
            return Err(Error::invalid("at least one coarse iteration is required"));
        }
        Ok(())
    }
}

/// Work counters and timings of one pipeline run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Telemetry {
    /// Target pixels after the coarse stage.
    pub n_t: usize,
    pub coarse_iterations: usize,
    pub image_reconstructions: usize,
    pub coarse_phase_evaluations: usize,
    pub fine_point_backprojections: usize,
    pub fine_phase_evaluations: usize,
    /// Fine corrections within 5% of the wrap boundary.
    pub aliasing_flags: usize,
    pub final_z_e: f64,
    pub stages: Vec<(String, Duration)>,
}

impl Telemetry {
    /// `key=value` lines; durations in seconds.
    pub fn to_key_value(&self) -> String {
        let mut out = format!(
            "n_t={}\ncoarse_iterations={}\nimage_reconstructions={}\ncoarse_phase_evaluations={}\n\
             fine_point_backprojections={}\nfine_phase_evaluations={}\naliasing_flags={}\nfinal_z_e={}\n",
            self.n_t,
            self.coarse_iterations,
            self.image_reconstructions,
            self.coarse_phase_evaluations,
            self.fine_point_backprojections,
            self.fine_phase_evaluations,
            self.aliasing_flags,
            self.final_z_e,
        );
        for (name, d) in &self.stages {
            out.push_str(&format!("time_{name}_s={:.6}\n", d.as_secs_f64()));
        }
        out
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.stages.push((stage.to_string(), start.elapsed()));
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct FskOutput {
    pub cloud: SurfacePointCloud,
    pub telemetry: Telemetry,
}

/// Two tones of the plan ordered by frequency.
#[derive(Debug, Clone, Copy)]
struct TonePair {
    high: usize,
    low: usize,
    delta_f: f64,
}

impl TonePair {
    fn new(cube: &DataCube, a: usize, b: usize) -> Self {
        let f = cube.plan().frequencies();
        let (high, low) = if f[a] > f[b] { (a, b) } else { (b, a) };
        TonePair {
            high,
            low,
            delta_f: f[high] - f[low],
        }
    }

    /// Depth offset from values at the two tones, indexed by tone.
    fn depth(&self, values: &[Complex64]) -> Result<f64> {
        let phi = arg(values[self.low] * values[self.high].conj());
        depth_from_phase(phi, self.delta_f)
    }
}

/// Coarse surface from the small tone step (tones 0 and 1).
struct CoarseSurface {
    map: DepthMap,
    z_e: f64,
}

fn coarse_stage(cube: &DataCube, grid: &ImageGrid, config: &FskConfig, tm: &mut Telemetry) -> Result<CoarseSurface> {
    let pair = TonePair::new(cube, 0, 1);
    let span = unambiguous_span(pair.delta_f)?;
    let reconstruct_pair = |z_e: f64, tm: &mut Telemetry| -> Result<(ComplexImage, ComplexImage)> {
        let g = grid.at_depth(z_e)?;
        tm.image_reconstructions += 2;
        Ok((reconstruct_image(cube, 0, &g)?, reconstruct_image(cube, 1, &g)?))
    };

    let mut z_e = config.initial_z_e;
    for _ in 0..config.max_coarse_iterations {
        let (img0, img1) = reconstruct_pair(z_e, tm)?;
        let (peak, amp) = img0.argmax();
        if amp == 0.0 {
            return Err(Error::EmptyScene("no signal in the single-tone images".into()));
        }
        let dz = pair.depth(&[img0.pixels[peak], img1.pixels[peak]])?;
        tm.coarse_phase_evaluations += 1;
        debug_assert!(dz.abs() <= span / 2.0 + 1e-12);
        z_e += dz;
        tm.coarse_iterations += 1;
        if !(z_e > 0.0) {
            return Err(Error::EmptyScene(format!("coarse depth estimate {z_e} m left the scene")));
        }
    }

    let (img0, img1) = reconstruct_pair(z_e, tm)?;
    let n_t = count_target_pixels(&img0, config.threshold_db)?;
    let (high, low) = if pair.high == 0 { (&img0, &img1) } else { (&img1, &img0) };
    let phase = complex_difference(high, low)?;
    let mags = img0.magnitudes();
    let cutoff = mags.iter().copied().fold(0.0, f64::max) * db_ratio(config.threshold_db);

    let lateral = grid.lateral;
    let mut raw = vec![None; lateral.len()];
    for (i, m) in mags.iter().enumerate() {
        if *m >= cutoff {
            if let Some(phi) = phase.get(i) {
                raw[i] = Some(z_e + depth_from_phase(phi, pair.delta_f)?);
                tm.coarse_phase_evaluations += 1;
            }
        }
    }
    let smoothed = box_filter_valid(&lateral, &raw, config.smoothing_kernel_2d)?;
    let mut map = DepthMap::empty(lateral);
    for (i, z) in smoothed.iter().enumerate() {
        if let Some(z) = z {
            if !(*z > 0.0) {
                return Err(Error::Invariant(format!("coarse depth {z} m at pixel {i}")));
            }
            map.set(i, *z, mags[i]);
        }
    }
    if map.valid_count() != n_t {
        return Err(Error::Invariant(format!(
            "coarse map holds {} targets, threshold counted {n_t}",
            map.valid_count()
        )));
    }
    tm.n_t = n_t;
    tm.final_z_e = z_e;
    Ok(CoarseSurface { map, z_e })
}

fn check_fsk_role(cube: &DataCube, allowed: &[PlanRole]) -> Result<()> {
    let role = cube.plan().role();
    if !allowed.contains(&role) {
        return Err(Error::RoleMismatch {
            expected: allowed.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" or "),
            found: role.to_string(),
        });
    }
    Ok(())
}

/// Two-tone surface reconstruction from tones `f1`, `f2`.
///
/// Reconstructs both single-tone images at `config.initial_z_e`, moves `z_e`
/// by the depth offset measured at the strongest pixel, reconstructs again,
/// converts the phase difference of every pixel above the threshold into a
/// depth, and smooths the resulting depth map.
pub fn run_2fsk(cube: &DataCube, grid: &ImageGrid, config: &FskConfig) -> Result<FskOutput> {
    check_fsk_role(cube, &[PlanRole::Fsk2, PlanRole::Fsk3])?;
    config.validate()?;
    let mut tm = Telemetry::default();
    let coarse = tm.time("coarse", |tm| coarse_stage(cube, grid, config, tm))?;
    let cloud = SurfacePointCloud::from_depth_map(&coarse.map, Method::Fsk2)?;
    Ok(FskOutput { cloud, telemetry: tm })
}

/// Three-tone reconstruction: the two-tone coarse surface, refined per point
/// with the large steps `f3 - f1` and `f3 - f2`.
pub fn run_3fsk(cube: &DataCube, grid: &ImageGrid, config: &FskConfig) -> Result<FskOutput> {
    check_fsk_role(cube, &[PlanRole::Fsk3])?;
    config.validate()?;
    let mut tm = Telemetry::default();
    let coarse = tm.time("coarse", |tm| coarse_stage(cube, grid, config, tm))?;
    let lateral = grid.lateral;

    let cells: Vec<usize> = (0..lateral.len()).filter(|&i| coarse.map.depth()[i].is_some()).collect();
    let points: Vec<Point3> = cells
        .iter()
        .map(|&i| {
            let (x, y) = lateral.center(i);
            Point3::new(x, y, coarse.map.depth()[i].unwrap_or(coarse.z_e))
        })
        .collect();

    let (z_fine, amps) = tm.time("fine", |tm| {
        let values: Vec<Vec<Complex64>> = (0..3)
            .map(|f| reconstruct_points(cube, f, &points))
            .collect::<Result<_>>()?;
        tm.fine_point_backprojections += 3 * points.len();

        let pair31 = TonePair::new(cube, 0, 2);
        let pair32 = TonePair::new(cube, 1, 2);
        let limit31 = ALIAS_WARN_FRACTION * unambiguous_span(pair31.delta_f)? / 2.0;
        let limit32 = ALIAS_WARN_FRACTION * unambiguous_span(pair32.delta_f)? / 2.0;
        let mut z = Vec::with_capacity(points.len());
        let mut amps = Vec::with_capacity(points.len());
        for (j, p) in points.iter().enumerate() {
            let v = [values[0][j], values[1][j], values[2][j]];
            let dz31 = pair31.depth(&v)?;
            let dz32 = pair32.depth(&v)?;
            tm.fine_phase_evaluations += 2;
            if dz31.abs() > limit31 || dz32.abs() > limit32 {
                tm.aliasing_flags += 1;
            }
            z.push(p.z + 0.5 * (dz31 + dz32));
            amps.push((v[0].norm() + v[1].norm() + v[2].norm()) / 3.0);
        }
        Ok((z, amps))
    })?;

    let cloud = tm.time("smoothing", |_| {
        let mut values = vec![None; lateral.len()];
        for (&cell, &z) in cells.iter().zip(&z_fine) {
            values[cell] = Some(z);
        }
        let smoothed = box_filter_valid(&lateral, &values, config.smoothing_kernel_cloud)?;
        let pts = cells
            .iter()
            .zip(&points)
            .map(|(&cell, p)| Point3::new(p.x, p.y, smoothed[cell].unwrap_or(p.z)))
            .collect();
        SurfacePointCloud::new(pts, amps.clone(), Method::Fsk3)
    })?;
    Ok(FskOutput { cloud, telemetry: tm })
}

/// Broadband baseline: volume backprojection over all tones followed by a
/// maximum intensity projection.
pub fn run_broadband(cube: &DataCube, spec: &VolumeSpec, threshold_db: f64) -> Result<FskOutput> {
    run_volume(cube, spec, threshold_db, Method::Broadband)
}

/// The same volume baseline restricted to the few tones of an FSK plan.
pub fn run_narrowband_sota(cube: &DataCube, spec: &VolumeSpec, threshold_db: f64) -> Result<FskOutput> {
    run_volume(cube, spec, threshold_db, Method::NarrowbandSota)
}

fn run_volume(cube: &DataCube, spec: &VolumeSpec, threshold_db: f64, method: Method) -> Result<FskOutput> {
    let mut tm = Telemetry::default();
    let volume = tm.time("volume", |_| match method {
        Method::Broadband => reconstruct_volume(cube, spec),
        _ => reconstruct_volume_narrowband(cube, spec),
    })?;
    let map = tm.time("mip", |_| max_intensity_projection(&volume, threshold_db))?;
    if map.valid_count() == 0 {
        return Err(Error::EmptyScene("volume holds no signal".into()));
    }
    tm.n_t = map.valid_count();
    let cloud = SurfacePointCloud::from_depth_map(&map, method)?;
    Ok(FskOutput { cloud, telemetry: tm })
}
