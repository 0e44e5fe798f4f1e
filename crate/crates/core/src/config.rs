//! Run configuration as flat, sectioned `key = value` text.
//!
//! Defaults reproduce the full-size measurement setup: a 14 cm cross array at
//! 3 mm pitch, tones 82 / 81.8 / 79.5 GHz, a ±0.15 m image grid at 1 mm,
//! `z_e = 0.45 m`, −10 dB FSK threshold, and a 72–82 GHz broadband sweep with
//! 128 steps reconstructed over `z ∈ [0.245, 0.325] m` with a −13 dB MIP
//! threshold. [`RunConfig::desk`] shrinks the array and grids to something a
//! laptop evaluates in seconds.

use std::path::{Path, PathBuf};

use ini::Ini;

use crate::array::{build_uniform_array, AntennaArray, ArrayLayout};
use crate::error::{Error, Result};
use crate::fsk::{FskConfig, Method};
use crate::geometry::Point3;
use crate::grid::{ImageGrid, LateralGrid, VolumeSpec};
use crate::metrics::ComparisonSetup;
use crate::plan::FrequencyPlan;
use crate::scene::{make_point_scene, make_surface_scene_with_reflectivity, HandParams, Scene, SurfaceKind};
use crate::sim::AmplitudeModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Point,
    Plane,
    TiltedPlane,
    HandSilhouette,
}

impl SceneKind {
    fn name(&self) -> &'static str {
        match self {
            SceneKind::Point => "point",
            SceneKind::Plane => "plane",
            SceneKind::TiltedPlane => "tilted_plane",
            SceneKind::HandSilhouette => "hand_silhouette",
        }
    }
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SceneKind::Point, SceneKind::Plane, SceneKind::TiltedPlane, SceneKind::HandSilhouette]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scene kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Point position / hand center, meters.
    pub x: f64,
    pub y: f64,
    /// Point depth, plane depth, or tilted-plane depth at the origin.
    pub z: f64,
    pub slope_x: f64,
    pub slope_y: f64,
    pub hand_size: f64,
    pub finger_z: f64,
    pub palm_z: f64,
    /// Surfaces are rasterized over `[-half_extent, half_extent]²`.
    pub half_extent: f64,
    pub pitch: f64,
    pub reflectivity: f64,
}

impl SceneSpec {
    pub fn build(&self) -> Result<Scene> {
        let grid = || LateralGrid::centered(0.0, 0.0, self.half_extent, self.pitch);
        match self.kind {
            SceneKind::Point => make_point_scene(Point3::new(self.x, self.y, self.z), self.reflectivity),
            SceneKind::Plane => {
                make_surface_scene_with_reflectivity(SurfaceKind::Plane { z: self.z }, grid()?, self.reflectivity)
            }
            SceneKind::TiltedPlane => make_surface_scene_with_reflectivity(
                SurfaceKind::TiltedPlane {
                    z0: self.z,
                    slope_x: self.slope_x,
                    slope_y: self.slope_y,
                },
                grid()?,
                self.reflectivity,
            ),
            SceneKind::HandSilhouette => make_surface_scene_with_reflectivity(
                SurfaceKind::HandSilhouette(HandParams {
                    size: self.hand_size,
                    center_x: self.x,
                    center_y: self.y,
                    finger_z: self.finger_z,
                    palm_z: self.palm_z,
                }),
                grid()?,
                self.reflectivity,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scene: SceneSpec,
    pub aperture_length: f64,
    pub array_pitch: f64,
    pub layout: ArrayLayout,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub broadband_start: f64,
    pub broadband_stop: f64,
    pub broadband_steps: usize,
    pub grid: LateralGrid,
    pub volume_z_min: f64,
    pub volume_z_max: f64,
    pub volume_z_pitch: f64,
    pub method: Method,
    pub amplitude_model: AmplitudeModel,
    pub sota_threshold_db: f64,
    pub fsk: FskConfig,
    /// `None` simulates a noiseless measurement.
    pub snr_db: Option<f64>,
    /// Run `i` of a sweep uses seed `seeds[i]`; when a single seed is given,
    /// run `i` uses `seeds[0] + i`.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: SceneSpec {
                kind: SceneKind::Plane,
                x: 0.0,
                y: 0.0,
                z: 0.30,
                slope_x: 0.0,
                slope_y: 0.0,
                hand_size: 0.18,
                finger_z: 0.295,
                palm_z: 0.305,
                half_extent: 0.05,
                pitch: 0.001,
                reflectivity: 1.0,
            },
            aperture_length: 0.14,
            array_pitch: 0.003,
            layout: ArrayLayout::Cross,
            f1: 82e9,
            f2: 81.8e9,
            f3: 79.5e9,
            broadband_start: 72e9,
            broadband_stop: 82e9,
            broadband_steps: 128,
            grid: LateralGrid {
                x_min: -0.15,
                x_max: 0.15,
                y_min: -0.15,
                y_max: 0.15,
                pitch: 0.001,
            },
            volume_z_min: 0.245,
            volume_z_max: 0.325,
            volume_z_pitch: 0.001,
            method: Method::Fsk3,
            amplitude_model: AmplitudeModel::Unit,
            sota_threshold_db: -13.0,
            fsk: FskConfig::default(),
            snr_db: None,
            seeds: vec![1],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// 4.8 cm aperture (17 elements per line), ±3 cm grid, 16-step broadband
    /// sweep, 6 cm hand.
    pub fn desk() -> Self {
        let mut c = RunConfig::default();
        c.aperture_length = 0.048;
        c.grid = LateralGrid {
            x_min: -0.03,
            x_max: 0.03,
            y_min: -0.03,
            y_max: 0.03,
            pitch: 0.001,
        };
        c.broadband_steps = 16;
        c.scene.half_extent = 0.03;
        c.scene.hand_size = 0.06;
        c
    }

    pub fn array(&self) -> Result<AntennaArray> {
        build_uniform_array(self.aperture_length, self.array_pitch, self.layout)
    }

    /// Tones transmitted for the configured method.
    pub fn plan(&self) -> Result<FrequencyPlan> {
        self.plan_for(self.method)
    }

    pub fn plan_for(&self, method: Method) -> Result<FrequencyPlan> {
        match method {
            Method::Fsk2 => FrequencyPlan::fsk2(self.f1, self.f2),
            Method::Fsk3 | Method::NarrowbandSota => FrequencyPlan::fsk3(self.f1, self.f2, self.f3),
            Method::Broadband => {
                FrequencyPlan::broadband(self.broadband_start, self.broadband_stop, self.broadband_steps)
            }
        }
    }

    pub fn image_grid(&self) -> Result<ImageGrid> {
        ImageGrid::new(self.grid, self.fsk.initial_z_e)
    }

    pub fn volume(&self) -> Result<VolumeSpec> {
        VolumeSpec::new(self.grid, self.volume_z_min, self.volume_z_max, self.volume_z_pitch)
    }

    /// Seed of run `index` under the splitting rule documented on `seeds`.
    pub fn seed_for_run(&self, index: usize) -> u64 {
        match self.seeds.as_slice() {
            [single] => single.wrapping_add(index as u64),
            many => many[index % many.len().max(1)],
        }
    }

    pub fn comparison_setup(&self, methods: Vec<Method>) -> Result<ComparisonSetup> {
        Ok(ComparisonSetup {
            array: self.array()?,
            fsk_plan: self.plan_for(Method::Fsk3)?,
            broadband_plan: Some(self.plan_for(Method::Broadband)?),
            grid: self.image_grid()?,
            volume: self.volume()?,
            fsk: self.fsk,
            sota_threshold_db: self.sota_threshold_db,
            amplitude_model: self.amplitude_model,
            methods,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.array().map_err(cfg)?;
        self.plan().map_err(cfg)?;
        self.image_grid().map_err(cfg)?;
        self.volume().map_err(cfg)?;
        self.fsk.validate().map_err(cfg)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::Config("snr_db must be finite or 'none'".into()));
        }
        Ok(())
    }

    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        let s = &self.scene;
        ini.with_section(Some("scene"))
            .set("kind", s.kind.name())
            .set("x", s.x.to_string())
            .set("y", s.y.to_string())
            .set("z", s.z.to_string())
            .set("slope_x", s.slope_x.to_string())
            .set("slope_y", s.slope_y.to_string())
            .set("hand_size", s.hand_size.to_string())
            .set("finger_z", s.finger_z.to_string())
            .set("palm_z", s.palm_z.to_string())
            .set("half_extent", s.half_extent.to_string())
            .set("pitch", s.pitch.to_string())
            .set("reflectivity", s.reflectivity.to_string());
        ini.with_section(Some("array"))
            .set("aperture_length", self.aperture_length.to_string())
            .set("pitch", self.array_pitch.to_string())
            .set("layout", self.layout.name());
        ini.with_section(Some("plan"))
            .set("f1", self.f1.to_string())
            .set("f2", self.f2.to_string())
            .set("f3", self.f3.to_string())
            .set("broadband_start", self.broadband_start.to_string())
            .set("broadband_stop", self.broadband_stop.to_string())
            .set("broadband_steps", self.broadband_steps.to_string());
        ini.with_section(Some("grid"))
            .set("x_min", self.grid.x_min.to_string())
            .set("x_max", self.grid.x_max.to_string())
            .set("y_min", self.grid.y_min.to_string())
            .set("y_max", self.grid.y_max.to_string())
            .set("pitch", self.grid.pitch.to_string());
        ini.with_section(Some("volume"))
            .set("z_min", self.volume_z_min.to_string())
            .set("z_max", self.volume_z_max.to_string())
            .set("z_pitch", self.volume_z_pitch.to_string());
        ini.with_section(Some("method"))
            .set("name", self.method.name())
            .set(
                "amplitude_model",
                match self.amplitude_model {
                    AmplitudeModel::Unit => "unit",
                    AmplitudeModel::InverseDistance => "inverse_distance",
                },
            )
            .set("sota_threshold_db", self.sota_threshold_db.to_string());
        ini.with_section(Some("fsk"))
            .set("initial_z_e", self.fsk.initial_z_e.to_string())
            .set("threshold_db", self.fsk.threshold_db.to_string())
            .set("smoothing_kernel_2d", self.fsk.smoothing_kernel_2d.to_string())
            .set("smoothing_kernel_cloud", self.fsk.smoothing_kernel_cloud.to_string())
            .set("max_coarse_iterations", self.fsk.max_coarse_iterations.to_string());
        ini.with_section(Some("noise"))
            .set("snr_db", self.snr_db.map_or_else(|| "none".to_string(), |s| s.to_string()))
            .set(
                "seeds",
                self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
            );
        ini.with_section(Some("output"))
            .set("dir", self.output_dir.to_string_lossy());
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("config text is UTF-8")
    }

    /// Parses config text; absent keys keep their [`RunConfig::default`]
    /// values, unknown sections or keys are errors.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        Self::from_ini_str_with_base(text, RunConfig::default())
    }

    pub fn from_ini_str_with_base(text: &str, base: RunConfig) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = base;
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                c.apply(section, key, value.trim())?;
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("[{section}] {key} = '{value}' is not valid"));
        let f = || value.parse::<f64>().map_err(|_| bad());
        let u = || value.parse::<usize>().map_err(|_| bad());
        let s = &mut self.scene;
        match (section, key) {
            ("scene", "kind") => s.kind = value.parse()?,
            ("scene", "x") => s.x = f()?,
            ("scene", "y") => s.y = f()?,
            ("scene", "z") => s.z = f()?,
            ("scene", "slope_x") => s.slope_x = f()?,
            ("scene", "slope_y") => s.slope_y = f()?,
            ("scene", "hand_size") => s.hand_size = f()?,
            ("scene", "finger_z") => s.finger_z = f()?,
            ("scene", "palm_z") => s.palm_z = f()?,
            ("scene", "half_extent") => s.half_extent = f()?,
            ("scene", "pitch") => s.pitch = f()?,
            ("scene", "reflectivity") => s.reflectivity = f()?,
            ("array", "aperture_length") => self.aperture_length = f()?,
            ("array", "pitch") => self.array_pitch = f()?,
            ("array", "layout") => self.layout = value.parse().map_err(|_| bad())?,
            ("plan", "f1") => self.f1 = f()?,
            ("plan", "f2") => self.f2 = f()?,
            ("plan", "f3") => self.f3 = f()?,
            ("plan", "broadband_start") => self.broadband_start = f()?,
            ("plan", "broadband_stop") => self.broadband_stop = f()?,
            ("plan", "broadband_steps") => self.broadband_steps = u()?,
            ("grid", "x_min") => self.grid.x_min = f()?,
            ("grid", "x_max") => self.grid.x_max = f()?,
            ("grid", "y_min") => self.grid.y_min = f()?,
            ("grid", "y_max") => self.grid.y_max = f()?,
            ("grid", "pitch") => self.grid.pitch = f()?,
            ("volume", "z_min") => self.volume_z_min = f()?,
            ("volume", "z_max") => self.volume_z_max = f()?,
            ("volume", "z_pitch") => self.volume_z_pitch = f()?,
            ("method", "name") => self.method = value.parse().map_err(|_| bad())?,
            ("method", "amplitude_model") => {
                self.amplitude_model = match value {
                    "unit" => AmplitudeModel::Unit,
                    "inverse_distance" => AmplitudeModel::InverseDistance,
                    _ => return Err(bad()),
                }
            }
            ("method", "sota_threshold_db") => self.sota_threshold_db = f()?,
            ("fsk", "initial_z_e") => self.fsk.initial_z_e = f()?,
            ("fsk", "threshold_db") => self.fsk.threshold_db = f()?,
            ("fsk", "smoothing_kernel_2d") => self.fsk.smoothing_kernel_2d = u()?,
            ("fsk", "smoothing_kernel_cloud") => self.fsk.smoothing_kernel_cloud = u()?,
            ("fsk", "max_coarse_iterations") => self.fsk.max_coarse_iterations = u()?,
            ("noise", "snr_db") => {
                self.snr_db = match value {
                    "none" | "inf" => None,
                    _ => Some(f()?),
                }
            }
            ("noise", "seeds") => {
                self.seeds = value
                    .split(',')
                    .map(|v| v.trim().parse::<u64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            ("output", "dir") => self.output_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key [{section}] {key}"))),
        }
        Ok(())
    }
}
