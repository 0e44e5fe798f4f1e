//! Synthetic target scenes with analytic ground truth.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::{DepthMap, LateralGrid};

/// Maximum distance between a scatterer and the ground-truth surface.
pub const GROUND_TRUTH_DEPTH_TOLERANCE: f64 = 1e-6;

/// Isotropic point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Point3,
    pub reflectivity: f64,
}

impl Scatterer {
    pub fn new(position: Point3, reflectivity: f64) -> Result<Self> {
        if !position.is_finite() {
            return Err(Error::invalid("scatterer position is not finite"));
        }
        if !(reflectivity.is_finite() && reflectivity >= 0.0) {
            return Err(Error::invalid(format!(
                "reflectivity must be non-negative, got {reflectivity}"
            )));
        }
        Ok(Scatterer {
            position,
            reflectivity,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    scatterers: Vec<Scatterer>,
    ground_truth: Option<DepthMap>,
}

impl Scene {
    pub fn new(scatterers: Vec<Scatterer>, ground_truth: Option<DepthMap>) -> Result<Self> {
        if let Some(truth) = &ground_truth {
            for s in &scatterers {
                let p = s.position;
                let z = truth.sample(p.x, p.y).ok_or_else(|| {
                    Error::invalid(format!("scatterer at {p:?} has no ground-truth depth"))
                })?;
                if (z - p.z).abs() > GROUND_TRUTH_DEPTH_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "scatterer at {p:?} is {} m off the ground truth",
                        (z - p.z).abs()
                    )));
                }
            }
        }
        Ok(Scene {
            scatterers,
            ground_truth,
        })
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn ground_truth(&self) -> Option<&DepthMap> {
        self.ground_truth.as_ref()
    }

    /// Union of two scenes; the ground truth of `self` is kept.
    pub fn merged(&self, other: &Scene) -> Scene {
        let mut scatterers = self.scatterers.clone();
        scatterers.extend_from_slice(&other.scatterers);
        Scene {
            scatterers,
            ground_truth: self.ground_truth.clone(),
        }
    }

    /// Copy with every reflectivity multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Scene> {
        let scatterers = self
            .scatterers
            .iter()
            .map(|s| Scatterer::new(s.position, s.reflectivity * k))
            .collect::<Result<_>>()?;
        Ok(Scene {
            scatterers,
            ground_truth: self.ground_truth.clone(),
        })
    }
}

/// Single scatterer; the ground truth is a 3×3 mm patch whose center cell
/// holds the scatterer depth.
pub fn make_point_scene(position: Point3, reflectivity: f64) -> Result<Scene> {
    let scatterer = Scatterer::new(position, reflectivity)?;
    let grid = LateralGrid::centered(position.x, position.y, 0.001, 0.001)?;
    let mut truth = DepthMap::empty(grid);
    if position.z > 0.0 {
        truth.set(grid.index(1, 1), position.z, reflectivity);
        Scene::new(vec![scatterer], Some(truth))
    } else {
        Scene::new(vec![scatterer], None)
    }
}

/// Parameters of the hand-like two-level silhouette.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandParams {
    /// Hand height (wrist to fingertip) in meters; all outlines scale with it.
    pub size: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Depth of the extended fingers and thumb.
    pub finger_z: f64,
    /// Depth of the palm.
    pub palm_z: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        HandParams {
            size: 0.06,
            center_x: 0.0,
            center_y: 0.0,
            finger_z: 0.295,
            palm_z: 0.305,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    Plane { z: f64 },
    TiltedPlane { z0: f64, slope_x: f64, slope_y: f64 },
    HandSilhouette(HandParams),
}

pub type Polygon = Vec<(f64, f64)>;

/// Palm and finger outlines in units of the hand size, origin at the hand
/// center. Fingers take precedence where they overlap the palm.
pub fn hand_outlines() -> (Polygon, Vec<Polygon>) {
    let rect = |x0: f64, x1: f64, y0: f64, y1: f64| vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let palm = vec![
        (-0.25, -0.42),
        (-0.18, -0.5),
        (0.18, -0.5),
        (0.25, -0.42),
        (0.25, 0.05),
        (-0.25, 0.05),
    ];
    let fingers = vec![
        rect(-0.24, -0.10, 0.05, 0.44),
        rect(-0.07, 0.07, 0.05, 0.5),
        rect(0.10, 0.24, 0.05, 0.46),
        // thumb, angled away from the palm
        vec![(0.25, -0.34), (0.25, -0.12), (0.46, 0.04), (0.46, -0.16)],
    ];
    (palm, fingers)
}

/// Even-odd ray casting test.
pub(crate) fn point_in_polygon(px: f64, py: f64, polygon: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = polygon.len() - 1;
    for i in 0..polygon.len() {
        let (xi, yi) = polygon[i];
        let (xj, yj) = polygon[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl SurfaceKind {
    /// Surface depth at `(x, y)`, or `None` outside the silhouette.
    pub fn depth_at(&self, x: f64, y: f64) -> Option<f64> {
        match *self {
            SurfaceKind::Plane { z } => Some(z),
            SurfaceKind::TiltedPlane {
                z0,
                slope_x,
                slope_y,
            } => Some(z0 + slope_x * x + slope_y * y),
            SurfaceKind::HandSilhouette(p) => {
                let u = (x - p.center_x) / p.size;
                let v = (y - p.center_y) / p.size;
                let (palm, fingers) = hand_outlines();
                if fingers.iter().any(|f| point_in_polygon(u, v, f)) {
                    Some(p.finger_z)
                } else if point_in_polygon(u, v, &palm) {
                    Some(p.palm_z)
                } else {
                    None
                }
            }
        }
    }
}

/// Rasterizes an analytic surface: one unit-reflectivity scatterer per grid
/// cell inside the silhouette, plus the matching ground-truth depth map.
pub fn make_surface_scene(kind: SurfaceKind, grid: LateralGrid) -> Result<Scene> {
    make_surface_scene_with_reflectivity(kind, grid, 1.0)
}

pub fn make_surface_scene_with_reflectivity(
    kind: SurfaceKind,
    grid: LateralGrid,
    reflectivity: f64,
) -> Result<Scene> {
    grid.validate()?;
    if let SurfaceKind::HandSilhouette(p) = kind {
        if !(p.size > 0.0 && p.size.is_finite()) {
            return Err(Error::invalid("hand size must be positive"));
        }
    }
    let mut truth = DepthMap::empty(grid);
    let mut scatterers = Vec::new();
    for i in 0..grid.len() {
        let (x, y) = grid.center(i);
        let Some(z) = kind.depth_at(x, y) else {
            continue;
        };
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::invalid(format!(
                "surface at ({x}, {y}) lies at z = {z}, not in front of the array"
            )));
        }
        scatterers.push(Scatterer::new(Point3::new(x, y, z), reflectivity)?);
        truth.set(i, z, reflectivity);
    }
    if scatterers.is_empty() {
        return Err(Error::invalid("surface does not intersect the grid"));
    }
    Scene::new(scatterers, Some(truth))
}
