use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

/// Full-precision decimal form; parses back to the same double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text: a `#` comment line, a header, then rows.
pub fn csv_document(comment: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut buf = format!("# {comment}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Output files staged as temporaries in the target directory and renamed
/// into place together by [`Outputs::commit`]. Dropping without committing
/// deletes the temporaries.
pub struct Outputs {
    dir: PathBuf,
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn stage(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(contents)?;
        tmp.as_file().sync_all()?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            // temporaries are created owner-only
            tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
        }
        self.staged.push((tmp, self.dir.join(name)));
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::new();
        for (tmp, target) in self.staged {
            if let Err(e) = tmp.persist(&target) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.error).with_context(|| format!("writing {}", target.display()));
            }
            done.push(target);
        }
        Ok(done)
    }
}
