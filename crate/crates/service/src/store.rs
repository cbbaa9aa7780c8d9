use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use adabal_core::engine::ALSession;
use adabal_core::{Error, Result};

/// One JSON file per session, replaced atomically on every write.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

impl SnapshotStore {
    pub fn open(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes to a temporary file, syncs it and renames it over the old snapshot.
    pub fn save(&self, session: &ALSession) -> io::Result<()> {
        let body = session.to_json().map_err(io::Error::other)?;
        let tmp = self.dir.join(format!("{}.json.tmp", session.id));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path_for(&session.id))
    }

    /// Every readable snapshot, sorted by id. Leftover temporary files are ignored.
    pub fn load_all(&self) -> Result<Vec<ALSession>> {
        let read_dir = fs::read_dir(&self.dir).map_err(|source| Error::Io { path: self.dir.clone(), source })?;
        let mut out = Vec::new();
        for item in read_dir {
            let path = item.map_err(|source| Error::Io { path: self.dir.clone(), source })?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
            match ALSession::from_json(&text) {
                Ok(s) => out.push(s),
                Err(e) => log::warn!("ignoring unreadable snapshot {}: {e}", path.display()),
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }
}
