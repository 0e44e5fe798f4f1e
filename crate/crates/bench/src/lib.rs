//! Fixtures shared by the reconstruction benchmarks.

use fskimg_core::config::SceneKind;
use fskimg_core::{simulate, DataCube, Error, ImageGrid, Method, Point3, RunConfig, VolumeSpec};

/// Desk-scale hand scene simulated for one method.
pub struct Fixture {
    pub config: RunConfig,
    pub cube: DataCube,
    pub grid: ImageGrid,
    pub volume: VolumeSpec,
}

impl Fixture {
    pub fn desk(method: Method) -> Result<Self, Error> {
        let mut config = RunConfig::desk();
        config.scene.kind = SceneKind::HandSilhouette;
        let scene = config.scene.build()?;
        let cube = simulate(&scene, &config.array()?, &config.plan_for(method)?, config.amplitude_model)?;
        Ok(Self {
            grid: config.image_grid()?,
            volume: config.volume()?,
            config,
            cube,
        })
    }

    /// One point per lateral cell on the 0.3 m plane.
    pub fn plane_points(&self) -> Vec<Point3> {
        let lateral = self.grid.lateral;
        (0..lateral.len())
            .map(|i| {
                let (x, y) = lateral.center(i);
                Point3::new(x, y, 0.3)
            })
            .collect()
    }
}
