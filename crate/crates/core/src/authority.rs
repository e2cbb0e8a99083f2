//! Credential Authority: holds per-dimension score credentials and turns an
//! authorized request into a signed proof tuple `(pi, w, s_w, h, sigma, pk)`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::RwLock;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{signed_digest, tuple_hash, CircuitError, Proof, ProofSystem, ProvingKey};
use crate::crypto::{self, hash_tagged_parts, Digest, DomainTag, KeyPair, PublicKey, Signature, MAX_SCORE};
use crate::identity::{
    issue_credential, verify_credential, ClaimValue, Did, DisclosedCredential, IdentityError, VerifiableCredential,
};
use crate::ledger::{LedgerState, ScholarshipId};
use crate::Timestamp;

/// Claim key carrying the raw score in a dimension credential.
pub const SCORE_CLAIM: &str = "score";
/// Template id of per-dimension score credentials.
pub const SCORE_CPTID: u32 = 1013;
/// Template id of student identity credentials.
pub const IDENTITY_CPTID: u32 = 1012;

const REQUEST_LABEL: &[u8] = b"authorization-request/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthorityError {
    #[error("authorization denied: {0}")]
    AuthorizationDenied(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("outside the application window")]
    WindowClosed,
    #[error("invalid score credential: {0}")]
    InvalidScore(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

impl AuthorityError {
    pub fn code(&self) -> &'static str {
        match self {
            AuthorityError::AuthorizationDenied(_) => "authorization-denied",
            AuthorityError::NotFound(_) => "not-found",
            AuthorityError::WindowClosed => "window-closed",
            AuthorityError::InvalidScore(_) => "invalid-score",
            AuthorityError::Identity(_) => "identity",
            AuthorityError::Circuit(_) => "circuit",
        }
    }
}

/// `T_i` as returned to the student.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofTuple {
    pub proof: Proof,
    #[serde(rename = "w")]
    pub weight: u32,
    #[serde(rename = "sw")]
    pub weighted_score: u32,
    #[serde(rename = "h")]
    pub tuple_hash: Digest,
    #[serde(rename = "sigma")]
    pub ca_signature: Signature,
    #[serde(rename = "pk")]
    pub ca_public_key: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuthorizationRequest {
    pub student: Did,
    pub identity_vc: DisclosedCredential,
    pub score_vc_id: String,
    pub scholarship_id: ScholarshipId,
    pub student_signature: Signature,
}

fn length_prefixed(bytes: &[u8]) -> Vec<u8> {
    let mut out = (bytes.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(bytes);
    out
}

/// Digest the student signs: binds the request to one scholarship and one
/// dimension so it cannot be replayed elsewhere.
pub fn request_digest(student: &Did, score_vc_id: &str, scholarship_id: ScholarshipId, dimension: &str) -> Digest {
    hash_tagged_parts(
        DomainTag::Claim,
        &[
            REQUEST_LABEL,
            &length_prefixed(student.to_string().as_bytes()),
            &length_prefixed(score_vc_id.as_bytes()),
            &scholarship_id.to_be_bytes(),
            &length_prefixed(dimension.as_bytes()),
        ],
    )
}

impl AuthorizationRequest {
    pub fn new(
        student: &KeyPair,
        identity_vc: DisclosedCredential,
        score_vc_id: &str,
        scholarship_id: ScholarshipId,
        dimension: &str,
    ) -> Self {
        let did = Did::for_key(&student.public);
        let student_signature = student.sign(&request_digest(&did, score_vc_id, scholarship_id, dimension));
        Self {
            student: did,
            identity_vc,
            score_vc_id: score_vc_id.to_string(),
            scholarship_id,
            student_signature,
        }
    }

    pub fn digest(&self, dimension: &str) -> Digest {
        request_digest(&self.student, &self.score_vc_id, self.scholarship_id, dimension)
    }
}

/// One CA serving one dimension. The score store takes concurrent reads;
/// writes happen while loading fixtures.
#[derive(Debug)]
pub struct CredentialAuthority {
    dimension: String,
    keypair: KeyPair,
    did: Did,
    store: RwLock<BTreeMap<(Did, String), VerifiableCredential>>,
    trusted_issuers: BTreeSet<Did>,
}

impl CredentialAuthority {
    pub fn new(dimension: impl Into<String>, keypair: KeyPair) -> Self {
        let did = Did::for_key(&keypair.public);
        Self {
            dimension: dimension.into(),
            keypair,
            did,
            store: RwLock::default(),
            trusted_issuers: BTreeSet::new(),
        }
    }

    /// Accept identity credentials issued by `issuer`.
    pub fn trust_issuer(&mut self, issuer: Did) {
        self.trusted_issuers.insert(issuer);
    }

    pub fn dimension(&self) -> &str {
        &self.dimension
    }

    pub fn did(&self) -> &Did {
        &self.did
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public
    }

    pub fn score_credentials(&self) -> Vec<VerifiableCredential> {
        self.store.read().expect("store lock poisoned").values().cloned().collect()
    }

    /// Issue and store a score credential `{score: s}` for `subject`.
    pub fn issue_score_vc<R: RngCore + ?Sized>(
        &self,
        subject: &Did,
        score: u32,
        issuance: Timestamp,
        expiration: Timestamp,
        rng: &mut R,
    ) -> Result<VerifiableCredential, AuthorityError> {
        if score > MAX_SCORE {
            return Err(AuthorityError::InvalidScore(format!("score {score} exceeds {MAX_SCORE}")));
        }
        let claims = BTreeMap::from([(SCORE_CLAIM.to_string(), ClaimValue::Integer(i64::from(score)))]);
        let vc = issue_credential(&self.keypair, subject, claims, SCORE_CPTID, issuance, expiration, rng)?;
        self.load_score_vc(vc.clone())?;
        Ok(vc)
    }

    /// Store a previously issued score credential after checking it is ours.
    pub fn load_score_vc(&self, vc: VerifiableCredential) -> Result<(), AuthorityError> {
        if vc.issuer != self.did {
            return Err(AuthorityError::InvalidScore(format!("issued by {}, not this CA", vc.issuer)));
        }
        extract_score(&vc)?;
        self.store
            .write()
            .expect("store lock poisoned")
            .insert((vc.subject.clone(), vc.id.clone()), vc);
        Ok(())
    }

    /// Authorize, look up the score, prove `s_w = s * w`, hash, and sign.
    /// Deterministic for a deterministic backend.
    pub fn handle_authorization(
        &self,
        req: &AuthorizationRequest,
        ledger: &LedgerState,
        backend: &dyn ProofSystem,
        weighted_pk: &ProvingKey,
        now: Timestamp,
    ) -> Result<ProofTuple, AuthorityError> {
        let denied = |why: &str| AuthorityError::AuthorizationDenied(why.to_string());
        let student_doc = ledger
            .did_document(&req.student)
            .ok_or_else(|| denied("student DID is not registered"))?;
        if !crypto::verify(&student_doc.public_key, &req.digest(&self.dimension), &req.student_signature) {
            return Err(denied("request signature does not verify"));
        }
        let id_vc = &req.identity_vc;
        if id_vc.subject != req.student {
            return Err(denied("identity credential subject differs from requester"));
        }
        if !self.trusted_issuers.contains(&id_vc.issuer) {
            return Err(denied("identity credential issuer is not trusted"));
        }
        let issuer_key = ledger
            .did_document(&id_vc.issuer)
            .map(|d| d.public_key)
            .ok_or_else(|| denied("identity credential issuer is not registered"))?;
        if !verify_credential(id_vc, &issuer_key, now) {
            return Err(denied("identity credential does not verify at this time"));
        }

        let scholarship = ledger
            .scholarship(req.scholarship_id)
            .map_err(|_| AuthorityError::NotFound(format!("scholarship {}", req.scholarship_id)))?;
        let config = &scholarship.config;
        if !config.window_open(now) {
            return Err(AuthorityError::WindowClosed);
        }
        let dim = config
            .dimension(&self.dimension)
            .filter(|d| d.ca == self.did && d.ca_public_key == self.keypair.public)
            .ok_or_else(|| denied("this CA does not serve the scholarship's dimension"))?;
        if weighted_pk.key_id != config.weighted_vk.key_id {
            return Err(CircuitError::KeyMismatch.into());
        }

        let score = {
            let store = self.store.read().expect("store lock poisoned");
            let vc = store
                .get(&(req.student.clone(), req.score_vc_id.clone()))
                .ok_or_else(|| AuthorityError::NotFound(format!("score credential {}", req.score_vc_id)))?;
            extract_score(vc)?
        };

        let (proof, weighted_score) = backend.prove_weighted(weighted_pk, score, dim.weight)?;
        let h = tuple_hash(&proof.bytes, dim.weight, weighted_score)?;
        let bound = config.bind_student.then(|| req.student.to_string());
        let ca_signature = self.keypair.sign(&signed_digest(&h, bound.as_deref()));
        Ok(ProofTuple {
            proof,
            weight: dim.weight,
            weighted_score,
            tuple_hash: h,
            ca_signature,
            ca_public_key: self.keypair.public,
        })
    }
}

fn extract_score(vc: &VerifiableCredential) -> Result<u32, AuthorityError> {
    match vc.claims.get(SCORE_CLAIM) {
        Some(ClaimValue::Integer(s)) => u32::try_from(*s)
            .ok()
            .filter(|s| *s <= MAX_SCORE)
            .ok_or_else(|| AuthorityError::InvalidScore(format!("score {s} outside 0..={MAX_SCORE}"))),
        _ => Err(AuthorityError::InvalidScore(format!("missing integer {SCORE_CLAIM:?} claim"))),
    }
}
