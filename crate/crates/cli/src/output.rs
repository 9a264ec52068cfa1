//! Output helpers that never leave partial results behind.

use std::fs;
use std::path::Path;

use evdet::events::{decode_binary, read_text, EventFormat, EventStream};

use crate::error::{invalid, CliError, CliResult};

/// Reads an event file, using `format` when given, else the extension,
/// else the `EVT1` magic.
pub fn read_events_auto(path: &Path, format: Option<EventFormat>) -> CliResult<EventStream> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let format = format
        .or_else(|| EventFormat::from_path(path))
        .unwrap_or(if bytes.starts_with(evdet::events::BINARY_MAGIC) {
            EventFormat::Binary
        } else {
            EventFormat::Text
        });
    let stream = match format {
        EventFormat::Binary => decode_binary(&bytes),
        EventFormat::Text => read_text(&bytes[..]),
    };
    stream.map_err(|e| match e {
        evdet::Error::Io(_) => CliError::Io(format!("{}: {e}", path.display())),
        other => invalid(format!("{}: {other}", path.display())),
    })
}

/// Output format for an event file from `--format` or the extension.
pub fn output_format(path: &Path, format: Option<EventFormat>) -> CliResult<EventFormat> {
    format
        .or_else(|| EventFormat::from_path(path))
        .ok_or_else(|| invalid(format!("cannot infer event format of {}; use .evt, .evb or --format", path.display())))
}

/// Writes `files` into `dir` via a staging directory next to it; on any
/// failure nothing is left in `dir`.
pub fn write_dir(dir: &Path, files: &[(String, Vec<u8>)]) -> CliResult<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    let staging = tempfile::Builder::new()
        .prefix(".evdet-staging")
        .tempdir_in(parent)
        .map_err(|e| CliError::Io(format!("staging directory in {}: {e}", parent.display())))?;
    for (name, bytes) in files {
        let path = staging.path().join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if !dir.exists() {
        let staged = staging.keep();
        return fs::rename(&staged, dir).map_err(|e| {
            let _ = fs::remove_dir_all(&staged);
            CliError::Io(format!("{}: {e}", dir.display()))
        });
    }
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{} exists and is not a directory", dir.display())));
    }
    for (name, _) in files {
        fs::rename(staging.path().join(name), dir.join(name))
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.join(name).display())))?;
    }
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    evdet::io_util::write_atomic(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
