//! Checkpoint persistence. Names sort in write order: a running counter,
//! then the session's event sequence number, then the phase.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use classplay_core::phase::PhaseId;

pub trait CheckpointStore: Send {
    fn save(&mut self, name: &str, bytes: &[u8]) -> io::Result<()>;
    fn load(&self, name: &str) -> io::Result<Option<Vec<u8>>>;
    /// All names, oldest first.
    fn list(&self) -> io::Result<Vec<String>>;
}

pub fn checkpoint_name(counter: usize, event_seq: u64, phase: PhaseId) -> String {
    format!("{counter:06}-{event_seq:08}-{}", phase.as_str())
}

/// Resolves `latest`, a phase name (latest checkpoint taken in that phase)
/// or an exact checkpoint name against `names` (oldest first).
pub fn resolve_name<'a>(names: &'a [String], query: &str) -> Option<&'a String> {
    if query == "latest" {
        return names.last();
    }
    if let Some(n) = names.iter().find(|n| *n == query) {
        return Some(n);
    }
    names
        .iter()
        .rev()
        .find(|n| n.splitn(3, '-').nth(2) == Some(query))
}

/// Checkpoints held in memory. Clones share the same entries, so a copy
/// kept aside outlives the room that wrote them.
#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    entries: Arc<Mutex<BTreeMap<String, Vec<u8>>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CheckpointStore for MemoryStore {
    fn save(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        self.entries
            .lock()
            .expect("store lock")
            .insert(name.to_owned(), bytes.to_vec());
        Ok(())
    }

    fn load(&self, name: &str) -> io::Result<Option<Vec<u8>>> {
        Ok(self.entries.lock().expect("store lock").get(name).cloned())
    }

    fn list(&self) -> io::Result<Vec<String>> {
        Ok(self
            .entries
            .lock()
            .expect("store lock")
            .keys()
            .cloned()
            .collect())
    }
}

/// One directory per room holding `<name>.clpk` files. Each write goes to a
/// temporary file, is fsync'd, renamed into place and the directory synced.
#[derive(Debug, Clone)]
pub struct DirStore {
    dir: PathBuf,
}

const EXT: &str = "clpk";

impl DirStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Writes `bytes` to `path` durably: temp file, fsync, rename, fsync dir.
pub fn write_durable(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        File::open(parent)?.sync_all()?;
    }
    Ok(())
}

impl CheckpointStore for DirStore {
    fn save(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        write_durable(&self.dir.join(format!("{name}.{EXT}")), bytes)
    }

    fn load(&self, name: &str) -> io::Result<Option<Vec<u8>>> {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Ok(None);
        }
        match fs::read(self.dir.join(format!("{name}.{EXT}"))) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn list(&self) -> io::Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(EXT) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    names.push(stem.to_owned());
                }
            }
        }
        names.sort();
        Ok(names)
    }
}
