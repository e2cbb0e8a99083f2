//! A CA's on-disk state: `authority.json` names its dimension and DID, and
//! `credentials/<id>.json` holds every score credential it has issued. The
//! signing key stays in a separate key file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scholar_core::authority::CredentialAuthority;
use scholar_core::crypto::KeyPair;
use scholar_core::identity::{Did, VerifiableCredential};

use crate::env::{read_json, write_json};
use crate::error::{CliError, CliResult};

const AUTHORITY_FILE: &str = "authority.json";
const CREDENTIALS_DIR: &str = "credentials";

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AuthorityFile {
    dimension: String,
    did: Did,
}

pub struct AuthorityDir {
    dir: PathBuf,
}

impl AuthorityDir {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    /// Open the CA served from this directory, creating it when
    /// `dimension` is given and the directory is new.
    pub fn open(&self, key: KeyPair, dimension: Option<&str>) -> CliResult<CredentialAuthority> {
        let path = self.dir.join(AUTHORITY_FILE);
        let did = Did::for_key(&key.public);
        let file = if path.exists() {
            let file: AuthorityFile = read_json(&path)?;
            if file.did != did {
                return Err(CliError::new(
                    "bad-key",
                    format!("{} belongs to {}, not {did}", self.dir.display(), file.did),
                ));
            }
            if let Some(d) = dimension.filter(|d| *d != file.dimension) {
                return Err(CliError::new(
                    "config",
                    format!("{} serves dimension {:?}, not {d:?}", self.dir.display(), file.dimension),
                ));
            }
            file
        } else {
            let dimension = dimension.ok_or_else(|| {
                CliError::new(
                    "usage",
                    format!("{} is not a CA directory; pass --dimension to create it", self.dir.display()),
                )
            })?;
            let file = AuthorityFile {
                dimension: dimension.to_string(),
                did,
            };
            write_json(&path, &file)?;
            file
        };

        let ca = CredentialAuthority::new(file.dimension, key);
        for vc_path in self.credential_paths()? {
            let vc: VerifiableCredential = read_json(&vc_path)?;
            ca.load_score_vc(vc)
                .map_err(|e| CliError::new("malformed-input", format!("{}: {e}", vc_path.display())))?;
        }
        Ok(ca)
    }

    pub fn store(&self, vc: &VerifiableCredential) -> CliResult<PathBuf> {
        let path = self.dir.join(CREDENTIALS_DIR).join(format!("{}.json", vc.id));
        write_json(&path, vc)?;
        Ok(path)
    }

    fn credential_paths(&self) -> CliResult<Vec<PathBuf>> {
        let dir = self.dir.join(CREDENTIALS_DIR);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        Ok(paths)
    }
}
