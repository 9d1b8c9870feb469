//! All-or-nothing output: files and directories are assembled under a
//! temporary sibling name and renamed into place once complete.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

fn staging_path(target: &Path) -> Result<PathBuf> {
    let name = target
        .file_name()
        .with_context(|| format!("{}: not a file or directory name", target.display()))?;
    let tmp = format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id());
    Ok(target.with_file_name(tmp))
}

fn ensure_parent(target: &Path) -> Result<()> {
    match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).with_context(|| format!("{}", p.display()))
        }
        _ => Ok(()),
    }
}

pub fn write_file(target: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(target)?;
    let tmp = staging_path(target)?;
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, target));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("{}", target.display()))
}

pub fn write_json<T: serde::Serialize>(target: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(target, text.as_bytes())
}

/// A directory being filled; dropped without [`StagedDir::commit`] it is removed.
pub struct StagedDir {
    tmp: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagedDir {
    /// The target must not exist or be an empty directory.
    pub fn new(target: &Path) -> Result<Self> {
        if target.exists() {
            let empty = target.is_dir()
                && fs::read_dir(target)
                    .with_context(|| format!("{}", target.display()))?
                    .next()
                    .is_none();
            if !empty {
                bail!("{}: output already exists", target.display());
            }
        }
        ensure_parent(target)?;
        let tmp = staging_path(target)?;
        if tmp.exists() {
            fs::remove_dir_all(&tmp).with_context(|| format!("{}", tmp.display()))?;
        }
        fs::create_dir(&tmp).with_context(|| format!("{}", tmp.display()))?;
        Ok(Self {
            tmp,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    pub fn commit(mut self) -> Result<()> {
        if self.target.is_dir() {
            fs::remove_dir(&self.target).with_context(|| format!("{}", self.target.display()))?;
        }
        fs::rename(&self.tmp, &self.target).with_context(|| format!("{}", self.target.display()))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_directory_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        {
            let staged = StagedDir::new(&target).unwrap();
            fs::write(staged.path().join("a"), b"x").unwrap();
        }
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_moves_into_place() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        fs::create_dir(&target).unwrap();
        let staged = StagedDir::new(&target).unwrap();
        fs::write(staged.path().join("a"), b"x").unwrap();
        staged.commit().unwrap();
        assert_eq!(fs::read(target.join("a")).unwrap(), b"x");
        assert!(StagedDir::new(&target).is_err());
    }

    #[test]
    fn file_write_replaces_whole() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("sub/f.json");
        write_file(&target, b"one").unwrap();
        write_file(&target, b"two").unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"two");
        assert_eq!(fs::read_dir(root.path().join("sub")).unwrap().count(), 1);
    }
}
