//! Boxcar averaging restricted to valid cells.

use crate::error::{Error, Result};
use crate::grid::LateralGrid;

/// Replaces every valid cell by the mean of the valid cells in the
/// `kernel × kernel` window around it. Invalid cells stay invalid and never
/// contribute to a mean.
pub fn box_filter_valid(grid: &LateralGrid, values: &[Option<f64>], kernel: usize) -> Result<Vec<Option<f64>>> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::invalid(format!("smoothing kernel must be odd and >= 1, got {kernel}")));
    }
    if values.len() != grid.len() {
        return Err(Error::invalid("value count does not match grid"));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let half = kernel / 2;
    let mut out = vec![None; values.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            if values[iy * nx + ix].is_none() {
                continue;
            }
            let mut sum = 0.0;
            let mut n = 0usize;
            for jy in iy.saturating_sub(half)..(iy + half + 1).min(ny) {
                for jx in ix.saturating_sub(half)..(ix + half + 1).min(nx) {
                    if let Some(v) = values[jy * nx + jx] {
                        sum += v;
                        n += 1;
                    }
                }
            }
            out[iy * nx + ix] = Some(sum / n as f64);
        }
    }
    Ok(out)
}
