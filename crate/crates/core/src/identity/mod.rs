//! Decentralized identifiers, the on-ledger DID registry, and salted-claim
//! verifiable credentials.

mod credential;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crypto::{hash_tagged, DomainTag, PublicKey};
use crate::Timestamp;

pub use credential::{
    claim_digest, credential_digest, disclose, issue_credential, verify_credential, ClaimValue, DisclosedClaim,
    DisclosedCredential, VerifiableCredential, PROOF_TYPE, SALT_LEN, parse_rfc3339, rfc3339,
};

pub const DID_METHOD: &str = "weid";
pub const DID_NETWORK: &str = "666";
pub const DID_ID_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("registration refused: KYC not complete")]
    KycIncomplete,
    #[error("malformed verification key")]
    MalformedKey,
    #[error("malformed DID: {0}")]
    MalformedDid(String),
    #[error("credential must carry at least one claim")]
    EmptyClaims,
    #[error("expiration must be later than issuance")]
    InvalidValidity,
    #[error("claim {0:?} has no salt")]
    MissingSalt(String),
    #[error("unknown claim key {0:?}")]
    UnknownClaim(String),
    #[error("invalid claim {0:?}")]
    InvalidClaim(String),
}

impl IdentityError {
    pub fn code(&self) -> &'static str {
        match self {
            IdentityError::KycIncomplete => "kyc-incomplete",
            IdentityError::MalformedKey => "malformed-key",
            IdentityError::MalformedDid(_) => "malformed-did",
            IdentityError::EmptyClaims => "empty-claims",
            IdentityError::InvalidValidity => "invalid-validity",
            IdentityError::MissingSalt(_) => "missing-salt",
            IdentityError::UnknownClaim(_) => "unknown-claim",
            IdentityError::InvalidClaim(_) => "invalid-claim",
        }
    }
}

/// `did:<method>:<network>:0x<40 hex>`
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Did {
    method: String,
    network: String,
    id: [u8; DID_ID_LEN],
}

impl Did {
    /// The DID controlled by `key`: the first 20 bytes of
    /// `Hash_CREDENTIAL(pk)` under the default method and network.
    pub fn for_key(key: &PublicKey) -> Self {
        Self::with_method(DID_METHOD, DID_NETWORK, key)
    }

    pub fn with_method(method: &str, network: &str, key: &PublicKey) -> Self {
        let digest = hash_tagged(DomainTag::Credential, key.as_bytes());
        let mut id = [0u8; DID_ID_LEN];
        id.copy_from_slice(&digest.as_bytes()[..DID_ID_LEN]);
        Self {
            method: method.to_string(),
            network: network.to_string(),
            id,
        }
    }

    pub fn id(&self) -> &[u8; DID_ID_LEN] {
        &self.id
    }

    /// Whether `key` controls this identifier, regardless of method/network.
    pub fn is_controlled_by(&self, key: &PublicKey) -> bool {
        Self::for_key(key).id == self.id
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "did:{}:{}:0x{}", self.method, self.network, hex::encode(self.id))
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({self})")
    }
}

impl FromStr for Did {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdentityError::MalformedDid(s.to_string());
        let mut parts = s.split(':');
        if parts.next() != Some("did") {
            return Err(bad());
        }
        let method = parts.next().filter(|m| !m.is_empty()).ok_or_else(bad)?;
        let network = parts.next().filter(|n| !n.is_empty()).ok_or_else(bad)?;
        let id_hex = parts.next().and_then(|i| i.strip_prefix("0x")).ok_or_else(bad)?;
        if parts.next().is_some() || id_hex.len() != DID_ID_LEN * 2 {
            return Err(bad());
        }
        let mut id = [0u8; DID_ID_LEN];
        hex::decode_to_slice(id_hex, &mut id).map_err(|_| bad())?;
        Ok(Self {
            method: method.to_string(),
            network: network.to_string(),
            id,
        })
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidDocument {
    pub did: Did,
    pub public_key: PublicKey,
    pub kyc_complete: bool,
    pub registered_at: Timestamp,
}

/// DID -> document map. Lives inside the ledger state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidRegistry {
    documents: BTreeMap<Did, DidDocument>,
}

impl DidRegistry {
    /// Register the DID controlled by `public_key`. Idempotent per key:
    /// re-registering returns the stored document unchanged.
    pub fn register(
        &mut self,
        public_key: PublicKey,
        kyc_complete: bool,
        now: Timestamp,
    ) -> Result<DidDocument, IdentityError> {
        if !public_key.is_valid() {
            return Err(IdentityError::MalformedKey);
        }
        if !kyc_complete {
            return Err(IdentityError::KycIncomplete);
        }
        let did = Did::for_key(&public_key);
        let doc = self.documents.entry(did.clone()).or_insert(DidDocument {
            did,
            public_key,
            kyc_complete,
            registered_at: now,
        });
        Ok(doc.clone())
    }

    pub fn resolve(&self, did: &Did) -> Option<&DidDocument> {
        self.documents.get(did)
    }

    pub fn contains(&self, did: &Did) -> bool {
        self.documents.contains_key(did)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}
