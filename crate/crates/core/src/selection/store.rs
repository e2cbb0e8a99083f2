use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::SelectionError;
use crate::crypto::{hash_tagged, CryptoError, Digest, DomainTag};

/// Content identifier: hex of `Hash_CREDENTIAL(blob)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentId(Digest);

impl ContentId {
    pub fn of(blob: &[u8]) -> Self {
        Self(hash_tagged(DomainTag::Credential, blob))
    }

    pub fn digest(&self) -> &Digest {
        &self.0
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentId({})", self.0)
    }
}

impl FromStr for ContentId {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self(s.parse()?))
    }
}

/// Local content-addressed blob store, optionally mirrored to a directory
/// as `<dir>/<cid>.json`. Every read re-derives the id from the bytes.
#[derive(Debug, Default)]
pub struct ContentStore {
    dir: Option<PathBuf>,
    blobs: RwLock<BTreeMap<ContentId, Vec<u8>>>,
}

impl ContentStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SelectionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| SelectionError::Io(e.to_string()))?;
        Ok(Self {
            dir: Some(dir),
            blobs: RwLock::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn blob_path(&self, id: &ContentId) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    pub fn put(&self, blob: &[u8]) -> Result<ContentId, SelectionError> {
        let id = ContentId::of(blob);
        if let Some(path) = self.blob_path(&id) {
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, blob)
                .and_then(|_| fs::rename(&tmp, &path))
                .map_err(|e| SelectionError::Io(e.to_string()))?;
        } else {
            self.blobs
                .write()
                .expect("store lock poisoned")
                .insert(id, blob.to_vec());
        }
        Ok(id)
    }

    pub fn get(&self, id: &ContentId) -> Result<Vec<u8>, SelectionError> {
        let blob = match self.blob_path(id) {
            Some(path) => match fs::read(&path) {
                Ok(b) => b,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    return Err(SelectionError::ContentNotFound(*id))
                }
                Err(e) => return Err(SelectionError::Io(e.to_string())),
            },
            None => self
                .blobs
                .read()
                .expect("store lock poisoned")
                .get(id)
                .cloned()
                .ok_or(SelectionError::ContentNotFound(*id))?,
        };
        if ContentId::of(&blob) != *id {
            return Err(SelectionError::ContentTampered(*id));
        }
        Ok(blob)
    }

    #[cfg(test)]
    pub(crate) fn overwrite_unchecked(&self, id: ContentId, blob: Vec<u8>) {
        self.blobs.write().unwrap().insert(id, blob);
    }
}
