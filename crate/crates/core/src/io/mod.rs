//! On-disk formats: `CTT1` arrays, `CTW1` checkpoints and PNG.

pub mod ctt;
pub mod ctw;
pub mod png;

use std::io::Write;
use std::path::Path;

pub use ctt::{encode_ctt, load_ctt, load_image, load_sinogram, read_ctt, save_ctt, save_image, save_sinogram, write_ctt};
pub use ctw::{encode_checkpoint, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, NamedTensor};
pub use png::{ingest_image, save_png, save_png_grid, to_gray8};

use crate::error::Result;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
