//! CSV tables and ASCII PLY export.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsk::{Method, SurfacePointCloud};
use crate::geometry::Point3;
use crate::grid::{DepthMap, LateralGrid};
use crate::scene::Scene;

use super::write_file;

/// Fallback lateral pitch when a table has a single distinct coordinate.
const DEFAULT_PITCH: f64 = 0.001;

pub fn write_scene_csv(path: &Path, scene: &Scene) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "x,y,z,reflectivity")?;
        for s in scene.scatterers() {
            let p = s.position;
            writeln!(w, "{},{},{},{}", p.x, p.y, p.z, s.reflectivity)?;
        }
        Ok(())
    })
}

/// Cells without a target are omitted.
pub fn write_depth_map_csv(path: &Path, map: &DepthMap) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "x_m,y_m,z_m,amplitude")?;
        for (x, y, z, a) in map.points() {
            writeln!(w, "{x},{y},{z},{a}")?;
        }
        Ok(())
    })
}

pub fn write_cloud_csv(path: &Path, cloud: &SurfacePointCloud) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "x_m,y_m,z_m,amplitude,method")?;
        for (p, a) in cloud.points().iter().zip(cloud.amplitudes()) {
            writeln!(w, "{},{},{},{},{}", p.x, p.y, p.z, a, cloud.method())?;
        }
        Ok(())
    })
}

/// Vertex-only ASCII PLY with an `amplitude` float property.
pub fn write_cloud_ply(path: &Path, cloud: &SurfacePointCloud) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "comment method {}", cloud.method())?;
        writeln!(w, "element vertex {}", cloud.len())?;
        for prop in ["x", "y", "z", "amplitude"] {
            writeln!(w, "property float {prop}")?;
        }
        writeln!(w, "end_header")?;
        for (p, a) in cloud.points().iter().zip(cloud.amplitudes()) {
            writeln!(w, "{} {} {} {}", p.x, p.y, p.z, a)?;
        }
        Ok(())
    })
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let found = reader.headers().map_err(|e| parse_err(path, e.to_string()))?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(path, format!("expected header {}", header.join(","))));
    }
    reader
        .records()
        .map(|r| r.map_err(|e| parse_err(path, e.to_string())))
        .collect()
}

fn field(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<f64> {
    let line = rec.position().map_or(0, |p| p.line());
    rec[i]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, format!("line {line}: '{}' is not a number", &rec[i])))
}

pub fn read_cloud_csv(path: &Path) -> Result<SurfacePointCloud> {
    let rows = read_rows(path, &["x_m", "y_m", "z_m", "amplitude", "method"])?;
    let mut points = Vec::with_capacity(rows.len());
    let mut amps = Vec::with_capacity(rows.len());
    let mut method = None;
    for rec in &rows {
        points.push(Point3::new(field(path, rec, 0)?, field(path, rec, 1)?, field(path, rec, 2)?));
        amps.push(field(path, rec, 3)?);
        let m: Method = rec[4].trim().parse()?;
        if method.is_some_and(|prev| prev != m) {
            return Err(parse_err(path, "mixed methods in one cloud file"));
        }
        method = Some(m);
    }
    let method = method.ok_or_else(|| parse_err(path, "empty cloud file"))?;
    SurfacePointCloud::new(points, amps, method)
}

/// Smallest gap between distinct sorted coordinates.
fn infer_pitch(mut coords: Vec<f64>) -> Option<f64> {
    coords.sort_by(f64::total_cmp);
    coords
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 1e-9)
        .min_by(f64::total_cmp)
}

/// Rebuilds a depth map from its CSV; the grid spans the listed cells and the
/// pitch is the smallest coordinate gap.
pub fn read_depth_map_csv(path: &Path) -> Result<DepthMap> {
    let rows = read_rows(path, &["x_m", "y_m", "z_m", "amplitude"])?;
    if rows.is_empty() {
        return Err(parse_err(path, "depth map has no cells"));
    }
    let mut cells = Vec::with_capacity(rows.len());
    for rec in &rows {
        cells.push((field(path, rec, 0)?, field(path, rec, 1)?, field(path, rec, 2)?, field(path, rec, 3)?));
    }
    let xs: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let ys: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let pitch = match (infer_pitch(xs.clone()), infer_pitch(ys.clone())) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => DEFAULT_PITCH,
    };
    let (x_min, x_max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (y_min, y_max) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    // pad degenerate axes by one cell so the grid stays valid
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - pitch, hi + pitch) };
    let (x_min, x_max) = pad(x_min, x_max);
    let (y_min, y_max) = pad(y_min, y_max);
    let grid = LateralGrid::new(x_min, x_max, y_min, y_max, pitch)?;
    let mut map = DepthMap::empty(grid);
    for (x, y, z, a) in cells {
        if !(z > 0.0 && z.is_finite() && a >= 0.0 && a.is_finite()) {
            return Err(parse_err(path, format!("invalid cell ({x}, {y}, {z}, {a})")));
        }
        let i = grid
            .nearest_cell(x, y)
            .ok_or_else(|| parse_err(path, format!("cell ({x}, {y}) is off the inferred grid")))?;
        map.set(i, z, a);
    }
    Ok(map)
}
