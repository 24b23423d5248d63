//! Scenario resolution and crash-safe output files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use rhino_core::skillspec::{builtin_scenario, builtin_scenarios, load_scenario, Scenario};

/// A path to a scenario document, or the name of a built-in scenario.
pub fn scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        let bytes = fs::read(path).with_context(|| format!("reading {arg}"))?;
        return load_scenario(&bytes).with_context(|| format!("loading {arg}"));
    }
    builtin_scenario(arg).ok_or_else(|| {
        let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
        anyhow!(
            "`{arg}` is neither a scenario file nor a built-in scenario ({})",
            names.join(", ")
        )
    })
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes through a temporary file in the same directory, so readers see
/// either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // Temporary files default to 0600; outputs should get the usual umask.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o666));
    }
    let mut tmp = builder
        .tempfile_in(dir)
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|()| tmp.as_file().sync_all())
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
