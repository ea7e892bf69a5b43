//! Result emission: all outputs are built in a staging directory next to the
//! target and swapped in with a rename, so a results directory either holds a
//! complete run or the previous one — never a torn write.

use std::path::Path;

use crate::CliError;

/// Build a directory's contents in a staging area, then atomically replace
/// `target` with it. The staging directory lives in `target`'s parent so the
/// final rename stays on one filesystem.
pub fn stage_and_swap(
    target: &Path,
    build: impl FnOnce(&Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let parent = target.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(parent) = parent {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Unwritable {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(parent.unwrap_or(Path::new(".")))
        .map_err(|source| CliError::Unwritable {
            path: target.to_path_buf(),
            source,
        })?;
    build(staging.path())?;
    if target.exists() {
        std::fs::remove_dir_all(target).map_err(|source| CliError::Unwritable {
            path: target.to_path_buf(),
            source,
        })?;
    }
    // Consume the TempDir so its cleanup does not race the rename.
    let staged = staging.keep();
    std::fs::rename(&staged, target).map_err(|source| CliError::Unwritable {
        path: target.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}
