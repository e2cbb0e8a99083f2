//! Simulated single-writer ledger hosting the scholarship contract, the DID
//! and CA registries, award roots, and an append-only event log.
//!
//! Every state change goes through [`LedgerState::apply`], both for live
//! calls and for replay, so a log replayed into a fresh state reproduces it.

mod audit;
mod config;
mod events;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::circuits::{AggregatePublics, ProofSystem};
use crate::crypto::{Digest, KeyPair, PublicKey, MAX_WEIGHTED_SCORE};
use crate::identity::{
    issue_credential, ClaimValue, Did, DidDocument, DidRegistry, IdentityError, VerifiableCredential,
};
use crate::selection::{self, verify_membership, ContentId};
use crate::student::{AggregateApplication, ClaimRequest};
use crate::Timestamp;

pub use audit::{audit_scholarship, AuditOutcome, AuditReport, TierAudit};
pub use config::{DimensionConfig, PrizeTier, ScholarshipConfig, ScholarshipId};
pub use events::{EventKind, EventPayload, LedgerEvent};

/// Credential template id of scholarship VCs.
pub const SCHOLARSHIP_CPTID: u32 = 1014;
/// Validity of an issued scholarship VC: four years of days.
pub const SCHOLARSHIP_VC_VALIDITY: Timestamp = 1461 * 86_400;

pub const STATE_FILE: &str = "state.json";
pub const EVENTS_FILE: &str = "events.json";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("config: {0}")]
    Config(String),
    #[error("scholarship {0} does not exist")]
    UnknownScholarship(ScholarshipId),
    #[error("scholarship {0} already deployed")]
    DuplicateScholarship(ScholarshipId),
    #[error("{0} is not registered")]
    NotRegistered(Did),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error("outside the application window")]
    WindowClosed,
    #[error("expected {expected} public inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("public key at position {0} is not the registered CA key for that dimension")]
    UnknownCaKey(usize),
    #[error("total {0} outside 0..=10000")]
    TotalOutOfRange(u32),
    #[error("aggregate proof does not verify")]
    ProofInvalid,
    #[error("{0} already applied")]
    DuplicateApplication(Did),
    #[error("award roots cannot be set before end_time")]
    TooEarly,
    #[error("caller is not the scholarship administrator")]
    NotAdmin,
    #[error("award root for tier {0:?} already set")]
    AlreadySet(String),
    #[error("unknown tier {0:?}")]
    UnknownTier(String),
    #[error("award root for tier {0:?} not set")]
    RootsNotSet(String),
    #[error("claim does not verify against the tier root")]
    BadProof,
    #[error("leaf already claimed")]
    AlreadyClaimed,
    #[error("event log is inconsistent: {0}")]
    Replay(String),
    #[error("persistence: {0}")]
    Io(String),
}

impl LedgerError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::Config(_) => "config",
            LedgerError::UnknownScholarship(_) => "unknown-scholarship",
            LedgerError::DuplicateScholarship(_) => "duplicate-scholarship",
            LedgerError::NotRegistered(_) => "not-registered",
            LedgerError::Identity(_) => "identity",
            LedgerError::WindowClosed => "window-closed",
            LedgerError::ArityMismatch { .. } => "arity-mismatch",
            LedgerError::UnknownCaKey(_) => "unknown-ca-key",
            LedgerError::TotalOutOfRange(_) => "total-out-of-range",
            LedgerError::ProofInvalid => "proof-invalid",
            LedgerError::DuplicateApplication(_) => "duplicate-application",
            LedgerError::TooEarly => "too-early",
            LedgerError::NotAdmin => "not-admin",
            LedgerError::AlreadySet(_) => "already-set",
            LedgerError::UnknownTier(_) => "unknown-tier",
            LedgerError::RootsNotSet(_) => "roots-not-set",
            LedgerError::BadProof => "bad-proof",
            LedgerError::AlreadyClaimed => "already-claimed",
            LedgerError::Replay(_) => "replay",
            LedgerError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplicationRecord {
    pub student: Did,
    pub total: u32,
    pub accepted_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AwardRootEntry {
    pub tier: String,
    pub root: Digest,
    pub list_cid: ContentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScholarshipState {
    pub config: ScholarshipConfig,
    pub admin: Did,
    /// Accepted applications in submission order.
    pub applications: Vec<ApplicationRecord>,
    pub award_roots: BTreeMap<String, AwardRootEntry>,
    /// Leaves already redeemed.
    pub claimed: BTreeSet<Digest>,
}

impl ScholarshipState {
    pub fn application(&self, student: &Did) -> Option<&ApplicationRecord> {
        self.applications.iter().find(|r| &r.student == student)
    }
}

/// Everything the contract knows. Contains totals and roots only, never a
/// per-dimension score.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerState {
    pub dids: DidRegistry,
    pub cas: BTreeMap<Did, PublicKey>,
    pub scholarships: BTreeMap<ScholarshipId, ScholarshipState>,
    pub height: u64,
}

impl LedgerState {
    pub fn scholarship(&self, id: ScholarshipId) -> Result<&ScholarshipState, LedgerError> {
        self.scholarships.get(&id).ok_or(LedgerError::UnknownScholarship(id))
    }

    fn scholarship_mut(&mut self, id: ScholarshipId) -> Result<&mut ScholarshipState, LedgerError> {
        self.scholarships.get_mut(&id).ok_or(LedgerError::UnknownScholarship(id))
    }

    pub fn did_document(&self, did: &Did) -> Option<&DidDocument> {
        self.dids.resolve(did)
    }

    pub fn ca_key(&self, did: &Did) -> Option<&PublicKey> {
        self.cas.get(did)
    }

    /// The single mutation point. Checks structural preconditions that must
    /// also hold on replay; policy checks (window, proofs) happen before.
    pub fn apply(&mut self, payload: &EventPayload) -> Result<(), LedgerError> {
        match payload {
            EventPayload::DidRegistered { document } => {
                if self.dids.contains(&document.did) {
                    return Err(LedgerError::Replay(format!("{} registered twice", document.did)));
                }
                let stored = self
                    .dids
                    .register(document.public_key, document.kyc_complete, document.registered_at)?;
                if &stored != document {
                    return Err(LedgerError::Replay(format!("document for {} does not match its key", document.did)));
                }
            }
            EventPayload::CaRegistered { did, public_key } => {
                let doc = self.dids.resolve(did).ok_or_else(|| LedgerError::NotRegistered(did.clone()))?;
                if &doc.public_key != public_key {
                    return Err(LedgerError::Replay(format!("CA key for {did} differs from its DID document")));
                }
                self.cas.insert(did.clone(), *public_key);
            }
            EventPayload::Deployed { config, admin } => {
                config.validate()?;
                if self.scholarships.contains_key(&config.id) {
                    return Err(LedgerError::DuplicateScholarship(config.id));
                }
                if !self.dids.contains(admin) {
                    return Err(LedgerError::NotRegistered(admin.clone()));
                }
                for d in &config.dimensions {
                    if self.cas.get(&d.ca) != Some(&d.ca_public_key) {
                        return Err(LedgerError::Config(format!(
                            "CA for dimension {:?} is not registered with that key",
                            d.dimension
                        )));
                    }
                }
                self.scholarships.insert(
                    config.id,
                    ScholarshipState {
                        config: config.clone(),
                        admin: admin.clone(),
                        applications: Vec::new(),
                        award_roots: BTreeMap::new(),
                        claimed: BTreeSet::new(),
                    },
                );
            }
            EventPayload::Applied { scholarship, record } => {
                let s = self.scholarship_mut(*scholarship)?;
                if record.total > MAX_WEIGHTED_SCORE {
                    return Err(LedgerError::TotalOutOfRange(record.total));
                }
                if s.application(&record.student).is_some() {
                    return Err(LedgerError::DuplicateApplication(record.student.clone()));
                }
                s.applications.push(record.clone());
            }
            EventPayload::Rejected { scholarship, .. } => {
                self.scholarship(*scholarship)?;
            }
            EventPayload::RootsSet { scholarship, entries } => {
                let s = self.scholarship_mut(*scholarship)?;
                let mut seen = BTreeSet::new();
                for e in entries {
                    if s.config.tier(&e.tier).is_none() {
                        return Err(LedgerError::UnknownTier(e.tier.clone()));
                    }
                    if s.award_roots.contains_key(&e.tier) || !seen.insert(e.tier.as_str()) {
                        return Err(LedgerError::AlreadySet(e.tier.clone()));
                    }
                }
                for e in entries {
                    s.award_roots.insert(e.tier.clone(), e.clone());
                }
            }
            EventPayload::Claimed { scholarship, tier, leaf, .. } => {
                let s = self.scholarship_mut(*scholarship)?;
                if !s.award_roots.contains_key(tier) {
                    return Err(LedgerError::RootsNotSet(tier.clone()));
                }
                if !s.claimed.insert(*leaf) {
                    return Err(LedgerError::AlreadyClaimed);
                }
            }
            EventPayload::CredentialIssued { scholarship, .. } => {
                self.scholarship(*scholarship)?;
            }
        }
        self.height += 1;
        Ok(())
    }
}

/// The ledger: state, log, and the proof backend used to verify
/// applications. Mutating calls take `&mut self`; wrap in a lock to share.
pub struct Ledger {
    state: LedgerState,
    events: Vec<LedgerEvent>,
    backend: Arc<dyn ProofSystem>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("height", &self.state.height)
            .field("scheme", &self.backend.scheme())
            .finish()
    }
}

impl Ledger {
    pub fn new(backend: Arc<dyn ProofSystem>) -> Self {
        Self {
            state: LedgerState::default(),
            events: Vec::new(),
            backend,
        }
    }

    /// Rebuild a ledger by applying `events` to an empty state.
    pub fn replay(backend: Arc<dyn ProofSystem>, events: Vec<LedgerEvent>) -> Result<Self, LedgerError> {
        let mut state = LedgerState::default();
        for (i, ev) in events.iter().enumerate() {
            if ev.height != i as u64 + 1 {
                return Err(LedgerError::Replay(format!("height {} at position {i}", ev.height)));
            }
            if ev.payload_size != payload_size(&ev.payload) {
                return Err(LedgerError::Replay(format!("payload size mismatch at height {}", ev.height)));
            }
            state
                .apply(&ev.payload)
                .map_err(|e| LedgerError::Replay(format!("height {}: {e}", ev.height)))?;
        }
        Ok(Self { state, events, backend })
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn backend(&self) -> &Arc<dyn ProofSystem> {
        &self.backend
    }

    pub fn height(&self) -> u64 {
        self.state.height
    }

    pub fn snapshot(&self) -> LedgerState {
        self.state.clone()
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// Events with height strictly greater than `since`.
    pub fn get_events(&self, since: u64) -> &[LedgerEvent] {
        let start = usize::try_from(since).unwrap_or(usize::MAX).min(self.events.len());
        &self.events[start..]
    }

    fn append(&mut self, time: Timestamp, payload: EventPayload) -> Result<u64, LedgerError> {
        self.state.apply(&payload)?;
        let event = LedgerEvent {
            height: self.state.height,
            time,
            payload_size: payload_size(&payload),
            payload,
        };
        self.events.push(event);
        Ok(self.state.height)
    }

    /// Register the DID controlled by `public_key`; idempotent per key.
    pub fn register_did(
        &mut self,
        public_key: PublicKey,
        kyc_complete: bool,
        now: Timestamp,
    ) -> Result<DidDocument, LedgerError> {
        let did = Did::for_key(&public_key);
        if let Some(doc) = self.state.dids.resolve(&did) {
            return Ok(doc.clone());
        }
        let document = DidRegistry::default().register(public_key, kyc_complete, now)?;
        self.append(now, EventPayload::DidRegistered { document: document.clone() })?;
        Ok(document)
    }

    /// Register a DID and record its key in the CA registry.
    pub fn register_ca(&mut self, public_key: PublicKey, now: Timestamp) -> Result<Did, LedgerError> {
        let did = self.register_did(public_key, true, now)?.did;
        if self.state.cas.get(&did) != Some(&public_key) {
            self.append(
                now,
                EventPayload::CaRegistered {
                    did: did.clone(),
                    public_key,
                },
            )?;
        }
        Ok(did)
    }

    pub fn deploy(&mut self, config: ScholarshipConfig, admin: &Did, now: Timestamp) -> Result<ScholarshipId, LedgerError> {
        let scheme = self.backend.scheme();
        if config.weighted_vk.scheme != scheme || config.aggregate_vk.scheme != scheme {
            return Err(LedgerError::Config(format!("verifying keys must use the {scheme:?} backend")));
        }
        let id = config.id;
        self.append(
            now,
            EventPayload::Deployed {
                config,
                admin: admin.clone(),
            },
        )?;
        Ok(id)
    }

    /// Verify and record an application. Rejections for an existing
    /// scholarship are logged as events and returned as errors.
    pub fn submit_application(
        &mut self,
        app: &AggregateApplication,
        now: Timestamp,
    ) -> Result<ApplicationRecord, LedgerError> {
        let id = app.scholarship_id;
        self.state.scholarship(id)?;
        match self.check_application(app, now) {
            Ok(()) => {
                let record = ApplicationRecord {
                    student: app.student.clone(),
                    total: app.total,
                    accepted_at: now,
                };
                self.append(
                    now,
                    EventPayload::Applied {
                        scholarship: id,
                        record: record.clone(),
                    },
                )?;
                Ok(record)
            }
            Err(err) => {
                self.append(
                    now,
                    EventPayload::Rejected {
                        scholarship: id,
                        student: app.student.clone(),
                        reason: err.code().to_string(),
                    },
                )?;
                Err(err)
            }
        }
    }

    fn check_application(&self, app: &AggregateApplication, now: Timestamp) -> Result<(), LedgerError> {
        let s = self.state.scholarship(app.scholarship_id)?;
        let config = &s.config;
        if !config.window_open(now) {
            return Err(LedgerError::WindowClosed);
        }
        if !self.state.dids.contains(&app.student) {
            return Err(LedgerError::NotRegistered(app.student.clone()));
        }
        if app.publics.len() != config.dimension_count() {
            return Err(LedgerError::ArityMismatch {
                expected: config.dimension_count(),
                got: app.publics.len(),
            });
        }
        if let Some(i) = app
            .publics
            .iter()
            .zip(&config.dimensions)
            .position(|(p, d)| p.pk != d.ca_public_key)
        {
            return Err(LedgerError::UnknownCaKey(i));
        }
        if app.total > MAX_WEIGHTED_SCORE {
            return Err(LedgerError::TotalOutOfRange(app.total));
        }
        if s.application(&app.student).is_some() {
            return Err(LedgerError::DuplicateApplication(app.student.clone()));
        }
        let publics = AggregatePublics {
            entries: app.publics.clone(),
            total: app.total,
            bound_student: config.bind_student.then(|| app.student.to_string()),
        };
        if !self
            .backend
            .verify_aggregate_claim(&config.aggregate_vk, &app.aggregate_proof, &publics)
        {
            return Err(LedgerError::ProofInvalid);
        }
        Ok(())
    }

    pub fn set_award_roots(
        &mut self,
        id: ScholarshipId,
        entries: Vec<AwardRootEntry>,
        admin: &Did,
        now: Timestamp,
    ) -> Result<(), LedgerError> {
        let s = self.state.scholarship(id)?;
        if now <= s.config.end_time {
            return Err(LedgerError::TooEarly);
        }
        if &s.admin != admin {
            return Err(LedgerError::NotAdmin);
        }
        self.append(now, EventPayload::RootsSet { scholarship: id, entries })?;
        Ok(())
    }

    /// Verify a Merkle claim and issue the scholarship credential. The leaf
    /// is recomputed from the student's recorded total, so a claim can only
    /// redeem the student's own accepted application.
    pub fn claim_scholarship<R: RngCore + ?Sized>(
        &mut self,
        id: ScholarshipId,
        claim: &ClaimRequest,
        admin: &KeyPair,
        now: Timestamp,
        rng: &mut R,
    ) -> Result<VerifiableCredential, LedgerError> {
        let s = self.state.scholarship(id)?;
        if !s.admin.is_controlled_by(&admin.public) {
            return Err(LedgerError::NotAdmin);
        }
        if s.config.tier(&claim.tier).is_none() {
            return Err(LedgerError::UnknownTier(claim.tier.clone()));
        }
        let root = s
            .award_roots
            .get(&claim.tier)
            .ok_or_else(|| LedgerError::RootsNotSet(claim.tier.clone()))?
            .root;
        let record = s.application(&claim.student).ok_or(LedgerError::BadProof)?;
        let expected = selection::leaf(&claim.student, record.total).map_err(|_| LedgerError::BadProof)?;
        if expected != claim.leaf || !verify_membership(&root, &claim.leaf, &claim.merkle_proof) {
            return Err(LedgerError::BadProof);
        }
        if s.claimed.contains(&claim.leaf) {
            return Err(LedgerError::AlreadyClaimed);
        }

        let claims = scholarship_claims(&s.config, &claim.tier, &claim.student, record.total, now)?;
        let vc = issue_credential(
            admin,
            &claim.student,
            claims,
            SCHOLARSHIP_CPTID,
            now,
            now + SCHOLARSHIP_VC_VALIDITY,
            rng,
        )?;
        self.append(
            now,
            EventPayload::Claimed {
                scholarship: id,
                tier: claim.tier.clone(),
                student: claim.student.clone(),
                leaf: claim.leaf,
            },
        )?;
        self.append(
            now,
            EventPayload::CredentialIssued {
                scholarship: id,
                credential_id: vc.id.clone(),
                subject: vc.subject.clone(),
                digest: vc.digest()?,
            },
        )?;
        Ok(vc)
    }

    pub fn list_applications(&self, id: ScholarshipId) -> Result<&[ApplicationRecord], LedgerError> {
        Ok(&self.state.scholarship(id)?.applications)
    }

    /// Write `state.json` and `events.json` as canonical JSON.
    pub fn save(&self, dir: &Path) -> Result<(), LedgerError> {
        fs::create_dir_all(dir).map_err(io_err)?;
        write_atomic(&dir.join(STATE_FILE), &canonical_bytes(&self.state)?)?;
        write_atomic(&dir.join(EVENTS_FILE), &canonical_bytes(&self.events)?)?;
        Ok(())
    }

    /// Load by replaying `events.json`, then check the result against
    /// `state.json`. A missing directory yields an empty ledger.
    pub fn load(dir: &Path, backend: Arc<dyn ProofSystem>) -> Result<Self, LedgerError> {
        let events_path = dir.join(EVENTS_FILE);
        if !events_path.exists() {
            return Ok(Self::new(backend));
        }
        let events: Vec<LedgerEvent> = read_json(&events_path)?;
        let ledger = Self::replay(backend, events)?;
        let stored: LedgerState = read_json(&dir.join(STATE_FILE))?;
        if stored != ledger.state {
            return Err(LedgerError::Replay("state.json disagrees with the replayed event log".into()));
        }
        Ok(ledger)
    }
}

/// Fixed claim schema of a scholarship VC.
pub fn scholarship_claims(
    config: &ScholarshipConfig,
    tier: &str,
    student: &Did,
    total: u32,
    now: Timestamp,
) -> Result<BTreeMap<String, ClaimValue>, LedgerError> {
    let claim_time = crate::identity::rfc3339(now)
        .get(..10)
        .map(str::to_owned)
        .ok_or_else(|| LedgerError::Config(format!("time {now} is not representable")))?;
    let scholarship_id =
        i64::try_from(config.id).map_err(|_| LedgerError::Config("scholarship id exceeds i64".into()))?;
    Ok(BTreeMap::from([
        ("applyScore".to_string(), ClaimValue::Decimal(f64::from(total) / 100.0)),
        ("claimTime".to_string(), ClaimValue::Text(claim_time)),
        ("level".to_string(), ClaimValue::Text(tier.to_string())),
        ("scholarshipID".to_string(), ClaimValue::Integer(scholarship_id)),
        ("scholarshipName".to_string(), ClaimValue::Text(config.name.clone())),
        ("studentDID".to_string(), ClaimValue::Text(student.to_string())),
    ]))
}

fn payload_size(payload: &EventPayload) -> u64 {
    canonical::to_canonical_vec(payload).map_or(0, |v| v.len() as u64)
}

fn canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, LedgerError> {
    canonical::to_canonical_vec(value).map_err(|e| LedgerError::Io(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, LedgerError> {
    let bytes = fs::read(path).map_err(io_err)?;
    serde_json::from_slice(&bytes).map_err(|e| LedgerError::Io(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LedgerError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path)).map_err(io_err)
}

fn io_err(e: std::io::Error) -> LedgerError {
    LedgerError::Io(e.to_string())
}
