//! Antenna array geometry.

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Arrangement of Tx and Rx element lines produced by [`build_uniform_array`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrayLayout {
    /// Mills-type cross: Tx on two horizontal lines at `y = ±pitch/2`, Rx on
    /// two vertical lines at `x = ±pitch/2`. The paired lines are shifted by
    /// half a pitch against each other along their axis.
    Cross,
    /// Square boundary: Tx on the two horizontal edges `y = ±L/2`, Rx on the
    /// two vertical edges `x = ±L/2`.
    ParallelLines,
    /// Tx and Rx each on a full `n × n` grid, offset from each other by half
    /// a pitch in both axes.
    Grid,
}

impl ArrayLayout {
    pub fn name(&self) -> &'static str {
        match self {
            ArrayLayout::Cross => "cross",
            ArrayLayout::ParallelLines => "parallel_lines",
            ArrayLayout::Grid => "grid",
        }
    }
}

impl std::str::FromStr for ArrayLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross" => Ok(ArrayLayout::Cross),
            "parallel_lines" => Ok(ArrayLayout::ParallelLines),
            "grid" => Ok(ArrayLayout::Grid),
            other => Err(Error::invalid(format!("unknown array layout '{other}'"))),
        }
    }
}

/// Positions of all transmit and receive elements, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaArray {
    pub(crate) tx: Vec<Point3>,
    pub(crate) rx: Vec<Point3>,
}

impl AntennaArray {
    pub fn new(tx: Vec<Point3>, rx: Vec<Point3>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::invalid("array needs at least one Tx and one Rx element"));
        }
        if tx.iter().chain(rx.iter()).any(|p| !p.is_finite()) {
            return Err(Error::invalid("array element position is not finite"));
        }
        check_distinct(&tx, "Tx")?;
        check_distinct(&rx, "Rx")?;

        let all = || tx.iter().chain(rx.iter());
        let extent = |f: fn(&Point3) -> f64| {
            let (lo, hi) = all().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            hi - lo
        };
        if extent(|p| p.x) <= 0.0 || extent(|p| p.y) <= 0.0 {
            return Err(Error::invalid("array aperture has zero lateral extent"));
        }
        Ok(AntennaArray { tx, rx })
    }

    pub fn tx(&self) -> &[Point3] {
        &self.tx
    }

    pub fn rx(&self) -> &[Point3] {
        &self.rx
    }

    /// Number of Tx/Rx channel pairs.
    pub fn channels(&self) -> usize {
        self.tx.len() * self.rx.len()
    }

    /// Mean position over all elements.
    pub fn centroid(&self) -> Point3 {
        let n = (self.tx.len() + self.rx.len()) as f64;
        let sum = self
            .tx
            .iter()
            .chain(self.rx.iter())
            .fold(Point3::default(), |acc, p| acc + *p);
        Point3::new(sum.x / n, sum.y / n, sum.z / n)
    }
}

fn check_distinct(points: &[Point3], what: &str) -> Result<()> {
    let mut sorted: Vec<&Point3> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
    });
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("two {what} elements coincide")));
    }
    Ok(())
}

/// Number of elements on one line of length `aperture_length` sampled at `pitch`.
pub fn elements_per_line(aperture_length: f64, pitch: f64) -> usize {
    // The small slack keeps exact ratios like 0.048 / 0.003 from flooring to 15.
    (aperture_length / pitch + 1e-9).floor() as usize + 1
}

/// Builds an array of uniformly spaced lines centered on the origin in the
/// `z = 0` plane.
pub fn build_uniform_array(
    aperture_length: f64,
    pitch: f64,
    layout: ArrayLayout,
) -> Result<AntennaArray> {
    if !(aperture_length > 0.0 && aperture_length.is_finite()) {
        return Err(Error::invalid(format!(
            "aperture length must be positive, got {aperture_length}"
        )));
    }
    if !(pitch > 0.0 && pitch <= aperture_length) {
        return Err(Error::invalid(format!(
            "pitch must be in (0, {aperture_length}], got {pitch}"
        )));
    }

    let n = elements_per_line(aperture_length, pitch);
    let line = |shift: f64| -> Vec<f64> {
        let center = (n - 1) as f64 / 2.0;
        (0..n).map(|i| (i as f64 - center) * pitch + shift).collect()
    };

    let (tx, rx) = match layout {
        ArrayLayout::Cross => {
            let half = pitch / 2.0;
            let quarter = pitch / 4.0;
            let mut tx = Vec::with_capacity(2 * n);
            let mut rx = Vec::with_capacity(2 * n);
            for (offset, shift) in [(half, -quarter), (-half, quarter)] {
                tx.extend(line(shift).into_iter().map(|x| Point3::new(x, offset, 0.0)));
                rx.extend(line(shift).into_iter().map(|y| Point3::new(offset, y, 0.0)));
            }
            (tx, rx)
        }
        ArrayLayout::ParallelLines => {
            let edge = (n - 1) as f64 * pitch / 2.0;
            let mut tx = Vec::with_capacity(2 * n);
            let mut rx = Vec::with_capacity(2 * n);
            for offset in [-edge, edge] {
                tx.extend(line(0.0).into_iter().map(|x| Point3::new(x, offset, 0.0)));
                rx.extend(line(0.0).into_iter().map(|y| Point3::new(offset, y, 0.0)));
            }
            (tx, rx)
        }
        ArrayLayout::Grid => {
            let quarter = pitch / 4.0;
            let grid = |shift: f64| -> Vec<Point3> {
                let coords = line(shift);
                coords
                    .iter()
                    .flat_map(|&y| coords.iter().map(move |&x| Point3::new(x, y, 0.0)))
                    .collect()
            };
            (grid(-quarter), grid(quarter))
        }
    };
    AntennaArray::new(tx, rx)
}
