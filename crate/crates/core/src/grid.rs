//! Lateral pixel grids, reconstruction depths, and depth maps.

use crate::error::{Error, Result};

/// Regular lateral sampling of the `x`/`y` plane; cell centers sit at
/// `min + i * pitch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub pitch: f64,
}

impl LateralGrid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, pitch: f64) -> Result<Self> {
        let grid = LateralGrid {
            x_min,
            x_max,
            y_min,
            y_max,
            pitch,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Square grid `[-half_extent, half_extent]²` centered on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, half_extent: f64, pitch: f64) -> Result<Self> {
        Self::new(
            cx - half_extent,
            cx + half_extent,
            cy - half_extent,
            cy + half_extent,
            pitch,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.pitch]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max || self.pitch <= 0.0 {
            return Err(Error::invalid(format!("degenerate lateral grid {self:?}")));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.pitch).round() as usize + 1
    }

    pub fn ny(&self) -> usize {
        ((self.y_max - self.y_min) / self.pitch).round() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.pitch
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.pitch
    }

    /// Row-major (`y` outer, `x` inner) linear index.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx() + ix
    }

    /// `(x, y)` center of the cell at linear index `i`.
    pub fn center(&self, i: usize) -> (f64, f64) {
        let nx = self.nx();
        (self.x(i % nx), self.y(i / nx))
    }

    /// Cell containing `(x, y)`, or `None` when the point is more than half a
    /// pitch outside the grid.
    pub fn nearest_cell(&self, x: f64, y: f64) -> Option<usize> {
        let locate = |v: f64, min: f64, n: usize| -> Option<usize> {
            let f = ((v - min) / self.pitch).round();
            if f < 0.0 || f >= n as f64 {
                return None;
            }
            let i = f as usize;
            let center = min + i as f64 * self.pitch;
            ((v - center).abs() <= 0.5 * self.pitch * (1.0 + 1e-9)).then_some(i)
        };
        let ix = locate(x, self.x_min, self.nx())?;
        let iy = locate(y, self.y_min, self.ny())?;
        Some(self.index(ix, iy))
    }
}

/// A lateral grid reconstructed at a fixed depth `z_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub lateral: LateralGrid,
    pub z_e: f64,
}

impl ImageGrid {
    pub fn new(lateral: LateralGrid, z_e: f64) -> Result<Self> {
        lateral.validate()?;
        if !(z_e.is_finite() && z_e > 0.0) {
            return Err(Error::invalid(format!("reconstruction depth must be positive, got {z_e}")));
        }
        Ok(ImageGrid { lateral, z_e })
    }

    pub fn at_depth(&self, z_e: f64) -> Result<Self> {
        Self::new(self.lateral, z_e)
    }
}

/// Sampling of a 3D reconstruction volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSpec {
    pub lateral: LateralGrid,
    pub z_min: f64,
    pub z_max: f64,
    pub z_pitch: f64,
}

impl VolumeSpec {
    pub fn new(lateral: LateralGrid, z_min: f64, z_max: f64, z_pitch: f64) -> Result<Self> {
        lateral.validate()?;
        if !(z_min > 0.0 && z_min < z_max && z_pitch > 0.0 && z_max.is_finite()) {
            return Err(Error::invalid(format!(
                "degenerate depth sampling [{z_min}, {z_max}] step {z_pitch}"
            )));
        }
        Ok(VolumeSpec {
            lateral,
            z_min,
            z_max,
            z_pitch,
        })
    }

    pub fn nz(&self) -> usize {
        ((self.z_max - self.z_min) / self.z_pitch).round() as usize + 1
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.z_min + iz as f64 * self.z_pitch
    }

    pub fn len(&self) -> usize {
        self.lateral.len() * self.nz()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Estimated (or true) surface depth per lateral cell. `None` marks cells
/// without a target.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub grid: LateralGrid,
    depth: Vec<Option<f64>>,
    amplitude: Vec<f64>,
}

impl DepthMap {
    pub fn new(grid: LateralGrid, depth: Vec<Option<f64>>, amplitude: Vec<f64>) -> Result<Self> {
        if depth.len() != grid.len() || amplitude.len() != grid.len() {
            return Err(Error::invalid(format!(
                "depth map has {} depths and {} amplitudes for {} cells",
                depth.len(),
                amplitude.len(),
                grid.len()
            )));
        }
        if depth.iter().flatten().any(|z| !(z.is_finite() && *z > 0.0)) {
            return Err(Error::invalid("depth map holds a non-finite or non-positive depth"));
        }
        if amplitude.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("depth map holds a negative or non-finite amplitude"));
        }
        Ok(DepthMap {
            grid,
            depth,
            amplitude,
        })
    }

    pub fn empty(grid: LateralGrid) -> Self {
        let n = grid.len();
        DepthMap {
            grid,
            depth: vec![None; n],
            amplitude: vec![0.0; n],
        }
    }

    pub fn depth(&self) -> &[Option<f64>] {
        &self.depth
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn set(&mut self, index: usize, depth: f64, amplitude: f64) {
        self.depth[index] = Some(depth);
        self.amplitude[index] = amplitude;
    }

    /// Depth of the cell nearest to `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        self.grid.nearest_cell(x, y).and_then(|i| self.depth[i])
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_some()).count()
    }

    /// `(x, y, z, amplitude)` for every cell holding a target.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.depth.iter().enumerate().filter_map(move |(i, d)| {
            d.map(|z| {
                let (x, y) = self.grid.center(i);
                (x, y, z, self.amplitude[i])
            })
        })
    }
}
