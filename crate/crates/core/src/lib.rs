//! Near-field MIMO radar simulation and surface reconstruction from a few
//! continuous-wave tones.
//!
//! The crate covers the whole experiment chain:
//!
//! ```text
//! array + plan + scene -> simulate -> DataCube -> backprojection -> FSK pipeline -> point cloud -> metrics
//! ```
//!
//! Two-tone (FSK2) reconstruction localizes the surface with a small frequency
//! step; three-tone (FSK3) reconstruction refines every coarse point with two
//! large frequency steps. A broadband volume backprojection with maximum
//! intensity projection serves as the conventional baseline.

pub mod array;
pub mod backprojection;
pub mod config;
pub mod error;
pub mod filter;
pub mod fsk;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod plan;
pub mod scene;
pub mod sim;

pub use array::{build_uniform_array, AntennaArray, ArrayLayout};
pub use backprojection::{
    max_intensity_projection, reconstruct_image, reconstruct_points, reconstruct_volume,
    reconstruct_volume_narrowband, ComplexImage, Volume,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use fsk::{
    complex_difference, count_target_pixels, depth_from_phase, run_2fsk, run_3fsk,
    sensitivity_ratio, unambiguous_span, FskConfig, FskOutput, Method, PhaseMap,
    SurfacePointCloud, Telemetry,
};
pub use geometry::Point3;
pub use grid::{DepthMap, ImageGrid, LateralGrid, VolumeSpec};
pub use metrics::{accuracy, compare_methods, precision, MetricsReport, PrecisionReport};
pub use plan::{FrequencyPlan, PlanRole};
pub use scene::{make_point_scene, make_surface_scene, Scatterer, Scene, SurfaceKind};
pub use sim::{add_noise, simulate, AmplitudeModel, DataCube};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
