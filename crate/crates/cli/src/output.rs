//! Output directory handling. Files are written to temporaries in the
//! target directory and renamed into place only after every one of them
//! has been written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use spinsense::engine::SeedRegistry;
use tempfile::NamedTempFile;

pub const REGISTRY_FILE: &str = "seeds.json";

/// Creates `dir` if needed and checks that files can be created in it.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    NamedTempFile::new_in(dir).with_context(|| format!("output directory {} is not writable", dir.display()))?;
    Ok(())
}

pub fn load_registry(dir: &Path) -> Result<SeedRegistry> {
    let path = dir.join(REGISTRY_FILE);
    if !path.exists() {
        return Ok(SeedRegistry::default());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read seed registry {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("seed registry {} is malformed", path.display()))
}

/// Writes `(file name, contents)` pairs into `dir` all-or-nothing as far
/// as the filesystem allows: nothing is renamed until every temporary is
/// complete.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let target = dir.join(name);
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot stage {}", target.display()))?;
        tmp.write_all(contents.as_bytes())
            .and_then(|_| tmp.as_file().sync_all())
            .with_context(|| format!("cannot write {}", target.display()))?;
        staged.push((tmp, target));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, target) in staged {
        tmp.persist(&target)
            .with_context(|| format!("cannot move output into place at {}", target.display()))?;
        written.push(target);
    }
    Ok(written)
}
