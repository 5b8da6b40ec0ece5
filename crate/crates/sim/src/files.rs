//! Pattern files, their optional site-set sidecars, and small write helpers.

use std::fs;
use std::path::{Path, PathBuf};

use slabfix_core::constructions::{build_figure7, Figure7Pattern};
use slabfix_core::Pattern;

use crate::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn read_pattern(path: &Path) -> Result<Pattern> {
    Ok(Pattern::parse(&read_text(path)?)?)
}

/// `figure7.pat` → `figure7.sets`.
pub fn sidecar_path(pattern: &Path) -> PathBuf {
    pattern.with_extension("sets")
}

/// A pattern plus, when a sidecar sits next to it, the designated site sets.
#[derive(Clone, Debug)]
pub struct PatternFile {
    pub pattern: Pattern,
    pub sets: Option<Figure7Pattern>,
}

pub fn load_pattern_file(path: &Path) -> Result<PatternFile> {
    let text = read_text(path)?;
    let side = sidecar_path(path);
    if side.exists() {
        let fig = Figure7Pattern::from_assets(&text, &read_text(&side)?)?;
        Ok(PatternFile {
            pattern: fig.pattern.clone(),
            sets: Some(fig),
        })
    } else {
        Ok(PatternFile {
            pattern: Pattern::parse(&text)?,
            sets: None,
        })
    }
}

/// Writes `figure7.pat` and `figure7.sets` into `dir`.
pub fn export_figure7(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let fig = build_figure7()?;
    let pat = dir.join("figure7.pat");
    let sets = dir.join("figure7.sets");
    write_text(&pat, &fig.pattern.to_text())?;
    write_text(&sets, &fig.sets_to_text())?;
    Ok((pat, sets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure7_export_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let (pat, sets) = export_figure7(dir.path()).unwrap();
        assert_eq!(sidecar_path(&pat), sets);
        let loaded = load_pattern_file(&pat).unwrap();
        let fig = build_figure7().unwrap();
        assert_eq!(loaded.pattern, fig.pattern);
        let s = loaded.sets.unwrap();
        assert_eq!(
            (s.flipping, s.fixed.len(), s.unspecified.len()),
            (fig.flipping, 380, 288)
        );
    }

    #[test]
    fn plain_pattern_without_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("block.pat");
        write_text(&p, "pattern 2 1 2\n+- ??\n").unwrap();
        let loaded = load_pattern_file(&p).unwrap();
        assert!(loaded.sets.is_none());
        assert_eq!(loaded.pattern.count_specified(), 2);
        assert!(read_pattern(&dir.path().join("missing.pat")).is_err());
    }
}
