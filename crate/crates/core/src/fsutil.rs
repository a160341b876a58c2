//! Small filesystem helpers shared across the crate.

use std::fs;
use std::io::Write;
use std::path::Path;

/// Writes bytes to a sibling temporary file and renames it into place, so
/// a crash mid-write never leaves a truncated file at the target path.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let directory = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    fs::create_dir_all(directory)?;
    let mut temp = tempfile::NamedTempFile::new_in(directory)?;
    temp.write_all(bytes)?;
    temp.flush()?;
    temp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
