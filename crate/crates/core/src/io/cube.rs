//! Binary cube (`FSKCUBE1`) and complex image (`FSKIMG01`) files.
//!
//! Cube layout, all little-endian:
//!
//! ```text
//! "FSKCUBE1" | n_tx n_rx n_f : u64 | freqs : f64 × n_f
//! | tx : (f64 x, y, z) × n_tx | rx : (f64 x, y, z) × n_rx
//! | samples : (f32 re, im) × n_tx·n_rx·n_f in [tx][rx][freq] order
//! ```
//!
//! Image layout: `"FSKIMG01" | nx ny : u64 | x_min x_max y_min y_max pitch z_e freq : f64
//! | pixels : (f32 re, im) × nx·ny`, `y` outer and `x` inner.

use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::array::AntennaArray;
use crate::backprojection::ComplexImage;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grid::{ImageGrid, LateralGrid};
use crate::plan::FrequencyPlan;
use crate::sim::DataCube;

pub const CUBE_MAGIC: &[u8; 8] = b"FSKCUBE1";
pub const IMAGE_MAGIC: &[u8; 8] = b"FSKIMG01";

fn put_point(buf: &mut Vec<u8>, p: &Point3) {
    for v in [p.x, p.y, p.z] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_cube(cube: &DataCube) -> Vec<u8> {
    let (n_tx, n_rx, n_f) = cube.dims();
    let mut buf = Vec::with_capacity(32 + 8 * (n_f + 3 * (n_tx + n_rx)) + 8 * cube.samples().len());
    buf.extend_from_slice(CUBE_MAGIC);
    for n in [n_tx, n_rx, n_f] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for f in cube.plan().frequencies() {
        buf.extend_from_slice(&f.to_le_bytes());
    }
    cube.array().tx().iter().for_each(|p| put_point(&mut buf, p));
    cube.array().rx().iter().for_each(|p| put_point(&mut buf, p));
    for s in cube.samples() {
        buf.extend_from_slice(&s.re.to_le_bytes());
        buf.extend_from_slice(&s.im.to_le_bytes());
    }
    buf
}

/// Offset-tracking reader over a byte slice.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        let start = self.pos;
        if self.take(8, "magic")? != magic {
            self.pos = start;
            return Err(self.fail(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
        }
        Ok(())
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn point(&mut self, what: &str) -> Result<Point3> {
        Ok(Point3::new(self.f64(what)?, self.f64(what)?, self.f64(what)?))
    }

    fn count(&mut self, what: &str, elem_size: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u64(what)?;
        let remaining = (self.bytes.len() - self.pos) as u64;
        if n.checked_mul(elem_size as u64).map_or(true, |b| b > remaining) {
            return Err(Error::Format {
                offset: at as u64,
                msg: format!("{what} = {n} exceeds file size"),
            });
        }
        Ok(n as usize)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode_cube(bytes: &[u8]) -> Result<DataCube> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(CUBE_MAGIC)?;
    let n_tx = r.count("n_tx", 24)?;
    let n_rx = r.count("n_rx", 24)?;
    let n_f = r.count("n_f", 8)?;
    let expected = n_tx
        .checked_mul(n_rx)
        .and_then(|n| n.checked_mul(n_f))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| r.fail("cube dimensions overflow"))?;
    if (bytes.len() - r.pos) < expected {
        return Err(r.fail("file too short for declared dimensions"));
    }

    let freq_at = r.pos;
    let freqs = (0..n_f).map(|_| r.f64("frequency")).collect::<Result<Vec<_>>>()?;
    let plan = FrequencyPlan::from_frequencies(freqs).map_err(|e| Error::Format {
        offset: freq_at as u64,
        msg: e.to_string(),
    })?;
    let geom_at = r.pos;
    let tx = (0..n_tx).map(|_| r.point("tx position")).collect::<Result<Vec<_>>>()?;
    let rx = (0..n_rx).map(|_| r.point("rx position")).collect::<Result<Vec<_>>>()?;
    let array = AntennaArray::new(tx, rx).map_err(|e| Error::Format {
        offset: geom_at as u64,
        msg: e.to_string(),
    })?;
    let mut samples = Vec::with_capacity(n_tx * n_rx * n_f);
    for _ in 0..n_tx * n_rx * n_f {
        let at = r.pos;
        let s = Complex32::new(r.f32("sample")?, r.f32("sample")?);
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::Format {
                offset: at as u64,
                msg: "non-finite sample".into(),
            });
        }
        samples.push(s);
    }
    r.finish()?;
    DataCube::new(array, plan, samples)
}

pub fn write_cube(path: &Path, cube: &DataCube) -> Result<()> {
    std::fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: &Path) -> Result<DataCube> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn encode_image(image: &ComplexImage) -> Vec<u8> {
    let g = image.grid.lateral;
    let mut buf = Vec::with_capacity(80 + 8 * image.pixels.len());
    buf.extend_from_slice(IMAGE_MAGIC);
    for n in [g.nx(), g.ny()] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in [g.x_min, g.x_max, g.y_min, g.y_max, g.pitch, image.grid.z_e, image.freq] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for p in &image.pixels {
        buf.extend_from_slice(&(p.re as f32).to_le_bytes());
        buf.extend_from_slice(&(p.im as f32).to_le_bytes());
    }
    buf
}

pub fn decode_image(bytes: &[u8]) -> Result<ComplexImage> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IMAGE_MAGIC)?;
    let nx = r.count("nx", 0)?;
    let ny = r.count("ny", 0)?;
    let grid_at = r.pos;
    let mut vals = [0.0; 7];
    for v in vals.iter_mut() {
        *v = r.f64("grid parameter")?;
    }
    let [x_min, x_max, y_min, y_max, pitch, z_e, freq] = vals;
    let grid = LateralGrid::new(x_min, x_max, y_min, y_max, pitch)
        .and_then(|l| ImageGrid::new(l, z_e))
        .map_err(|e| Error::Format {
            offset: grid_at as u64,
            msg: e.to_string(),
        })?;
    if grid.lateral.nx() != nx || grid.lateral.ny() != ny {
        return Err(Error::Format {
            offset: 8,
            msg: format!("declared {nx}×{ny} pixels disagree with grid parameters"),
        });
    }
    let mut pixels = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        pixels.push(Complex64::new(r.f32("pixel")? as f64, r.f32("pixel")? as f64));
    }
    r.finish()?;
    ComplexImage::new(grid, freq, pixels)
}

pub fn write_image(path: &Path, image: &ComplexImage) -> Result<()> {
    std::fs::write(path, encode_image(image)).map_err(|e| Error::io(path, e))
}

pub fn read_image(path: &Path) -> Result<ComplexImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}
