//! File formats: binary cubes and images, CSV tables, PLY point clouds.

pub mod cube;
pub mod tables;

pub use cube::{decode_cube, decode_image, encode_cube, encode_image, read_cube, read_image, write_cube, write_image};
pub use tables::{
    read_cloud_csv, read_depth_map_csv, write_cloud_csv, write_cloud_ply, write_depth_map_csv,
    write_scene_csv,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
