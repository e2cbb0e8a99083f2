//! Per-invocation environment: file locations, the advisory lock, logical
//! time, and seeded randomness.

use std::fs::{self, File, TryLockError};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use scholar_core::circuits::{OracleBackend, OracleSnapshot, ProofSystem};
use scholar_core::crypto::{keygen, KeyPair};
use scholar_core::identity::parse_rfc3339;
use scholar_core::ledger::Ledger;
use scholar_core::selection::ContentStore;
use scholar_core::Timestamp;

use crate::error::{CliError, CliResult};

const LOCK_FILE: &str = ".lock";
const SEED_LEN: usize = 32;

pub struct Env {
    pub ledger_dir: PathBuf,
    pub store_dir: PathBuf,
    pub oracle_path: PathBuf,
    pub seed: Option<u64>,
    pub time: Option<Timestamp>,
}

/// Held for the lifetime of a command; the OS drops the lock on close.
pub struct LockGuard {
    _file: File,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

impl Env {
    /// Exclusive for mutations, shared for reads. Never blocks: a busy
    /// ledger is reported, not waited on.
    pub fn lock(&self, access: Access) -> CliResult<LockGuard> {
        fs::create_dir_all(&self.ledger_dir).map_err(|e| CliError::io(&self.ledger_dir, e))?;
        let path = self.ledger_dir.join(LOCK_FILE);
        let file = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        let res = match access {
            Access::Read => file.try_lock_shared(),
            Access::Write => file.try_lock(),
        };
        match res {
            Ok(()) => Ok(LockGuard { _file: file }),
            Err(TryLockError::WouldBlock) => Err(CliError::new(
                "locked",
                format!("{} is held by another invocation", path.display()),
            )),
            Err(TryLockError::Error(e)) => Err(CliError::io(&path, e)),
        }
    }

    pub fn now(&self) -> Timestamp {
        self.time.unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
    }

    /// Seeded runs derive an independent stream per `context`, so the
    /// same command with the same inputs draws the same bytes.
    pub fn rng(&self, context: &str) -> ChaCha20Rng {
        match self.seed {
            Some(seed) => {
                let derived: [u8; 32] = Sha256::new()
                    .chain_update(b"scholar-cli/rng")
                    .chain_update(seed.to_be_bytes())
                    .chain_update(context.as_bytes())
                    .finalize()
                    .into();
                ChaCha20Rng::from_seed(derived)
            }
            None => ChaCha20Rng::from_entropy(),
        }
    }

    pub fn backend(&self) -> CliResult<Arc<OracleBackend>> {
        if self.oracle_path.exists() {
            let snapshot: OracleSnapshot = read_json(&self.oracle_path)?;
            Ok(Arc::new(OracleBackend::restore(snapshot)))
        } else {
            Ok(Arc::new(OracleBackend::from_rng(&mut self.rng("oracle"))))
        }
    }

    pub fn save_backend(&self, backend: &OracleBackend) -> CliResult<()> {
        write_json(&self.oracle_path, &backend.snapshot())
    }

    pub fn ledger(&self, backend: &Arc<OracleBackend>) -> CliResult<Ledger> {
        let backend: Arc<dyn ProofSystem> = backend.clone();
        Ok(Ledger::load(&self.ledger_dir, backend)?)
    }

    pub fn save_ledger(&self, ledger: &Ledger) -> CliResult<()> {
        Ok(ledger.save(&self.ledger_dir)?)
    }

    pub fn store(&self) -> CliResult<ContentStore> {
        Ok(ContentStore::open(&self.store_dir)?)
    }
}

/// Integer seconds or RFC 3339.
pub fn parse_time(s: &str) -> Result<Timestamp, String> {
    s.parse::<Timestamp>()
        .ok()
        .or_else(|| parse_rfc3339(s))
        .ok_or_else(|| format!("{s:?} is neither integer seconds nor RFC 3339"))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::malformed(path, e))
}

/// Pretty JSON with a trailing newline; field order is fixed by the types,
/// so output is stable.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new("io", e.to_string()))?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// A key file holds the hex of a 32-byte seed; the keypair is derived by
/// `keygen`.
pub fn read_key(path: &Path) -> CliResult<KeyPair> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let seed = hex::decode(text.trim()).map_err(|e| CliError::new("bad-key", format!("{}: {e}", path.display())))?;
    if seed.len() != SEED_LEN {
        return Err(CliError::new(
            "bad-key",
            format!("{}: seed is {} bytes, expected {SEED_LEN}", path.display(), seed.len()),
        ));
    }
    keygen(&seed).map_err(|e| CliError::new("bad-key", format!("{}: {e}", path.display())))
}

pub fn write_key(path: &Path, seed: &[u8; SEED_LEN]) -> CliResult<()> {
    if path.exists() {
        return Err(CliError::new("exists", format!("{} already exists", path.display())));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut options = File::options();
    options.write(true).create_new(true);
    #[cfg(unix)]
    std::os::unix::fs::OpenOptionsExt::mode(&mut options, 0o600);
    let mut file = options.open(path).map_err(|e| CliError::io(path, e))?;
    writeln!(file, "{}", hex::encode(seed)).map_err(|e| CliError::io(path, e))
}
