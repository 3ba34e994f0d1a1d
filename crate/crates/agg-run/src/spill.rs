use std::cell::Cell;
use std::io;
use std::path::{Path, PathBuf};

/// Environment variable naming the directory for spill files.
pub const SPILL_ENV: &str = "AGGBENCH_TMP";

/// A private directory for run files, removed on drop.
#[derive(Debug)]
pub struct SpillDir {
    dir: tempfile::TempDir,
    seq: Cell<u64>,
}

impl SpillDir {
    /// Creates the directory under `$AGGBENCH_TMP`, or the system temp dir.
    pub fn new() -> io::Result<Self> {
        match std::env::var_os(SPILL_ENV) {
            Some(p) if !p.is_empty() => Self::within(Path::new(&p)),
            _ => Self::wrap(tempfile::Builder::new().prefix("aggspill-").tempdir()?),
        }
    }

    pub fn within(parent: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(parent)?;
        Self::wrap(tempfile::Builder::new().prefix("aggspill-").tempdir_in(parent)?)
    }

    fn wrap(dir: tempfile::TempDir) -> io::Result<Self> {
        Ok(Self { dir, seq: Cell::new(0) })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn next_path(&self) -> PathBuf {
        let n = self.seq.get();
        self.seq.set(n + 1);
        self.dir.path().join(format!("run-{n:06}.spill"))
    }

    /// Number of run files currently on disk.
    pub fn live_files(&self) -> usize {
        std::fs::read_dir(self.dir.path()).map(|d| d.count()).unwrap_or(0)
    }
}
