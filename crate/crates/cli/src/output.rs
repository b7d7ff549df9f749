//! Atomic output files with a config-hash header and a completion marker.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Files belonging to one command invocation. Each file is written to a
/// temporary name and renamed into place. [`OutputSet::finish`] writes the
/// `.done` marker; dropping an unfinished set removes what it wrote.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
    finished: bool,
}

impl OutputSet {
    pub fn create(dir: &Path, hash: impl Into<String>) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.into(), written: Vec::new(), finished: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn write_atomic(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let result = (|| -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(CliError::Runtime(format!("writing {}: {e}", path.display())));
        }
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `# config_hash=<hex>` followed by the CSV produced by `body`.
    pub fn write_csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>) -> mmlab_core::Result<()>,
    ) -> CliResult<PathBuf> {
        let mut buf = format!("# config_hash={}\n", self.hash).into_bytes();
        body(&mut buf)?;
        self.write_atomic(name, &buf)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.write_atomic(name, text.as_bytes())
    }

    /// Writes `<marker>.done` listing the files of the set.
    pub fn finish(mut self, marker: &str) -> CliResult<Vec<PathBuf>> {
        let mut listing = format!("config_hash={}\n", self.hash);
        for p in &self.written {
            listing.push_str(&p.file_name().expect("named file").to_string_lossy());
            listing.push('\n');
        }
        self.write_atomic(&format!("{marker}.done"), listing.as_bytes())?;
        self.finished = true;
        Ok(std::mem::take(&mut self.written))
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.finished {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Strips the leading `# config_hash=` line, if present.
pub fn csv_body(text: &str) -> &str {
    match text.strip_prefix("# config_hash=") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_header_and_marker() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::create(dir.path(), "abc").unwrap();
        out.write_csv("x.csv", |b| {
            b.extend_from_slice(b"t,v\n0,1\n");
            Ok(())
        })
        .unwrap();
        let files = out.finish("x").unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[1].ends_with("x.done"));
        let text = fs::read_to_string(dir.path().join("x.csv")).unwrap();
        assert_eq!(text, "# config_hash=abc\nt,v\n0,1\n");
        assert_eq!(csv_body(&text), "t,v\n0,1\n");
        let done = fs::read_to_string(dir.path().join("x.done")).unwrap();
        assert!(done.contains("x.csv"));
        assert!(!dir.path().join(".x.csv.tmp").exists());
    }

    #[test]
    fn unfinished_set_is_removed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut out = OutputSet::create(dir.path(), "abc").unwrap();
            out.write_text("a.svg", "<svg/>").unwrap();
            assert!(dir.path().join("a.svg").exists());
        }
        assert!(!dir.path().join("a.svg").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
