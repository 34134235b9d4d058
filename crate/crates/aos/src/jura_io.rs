use std::path::Path;

use aos_core::jura::JuraTable;
use aos_core::AosError;

use crate::error::{CliError, Result};

/// Reads and parses a Jura table. Parse errors carry the file path along
/// with the row and column.
pub fn load_jura(path: &Path) -> Result<JuraTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    JuraTable::parse(&text).map_err(|e| match e {
        AosError::Ingest { .. } | AosError::Input(_) => CliError::format(path, e),
        other => CliError::Run(other),
    })
}
