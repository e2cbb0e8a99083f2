use serde::{Deserialize, Serialize};

use super::{ApplicationRecord, AwardRootEntry, ScholarshipConfig, ScholarshipId};
use crate::crypto::{Digest, PublicKey};
use crate::identity::{Did, DidDocument};
use crate::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    DidRegistered,
    CaRegistered,
    Deployed,
    Applied,
    Rejected,
    RootsSet,
    Claimed,
    CredentialIssued,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventPayload {
    DidRegistered {
        document: DidDocument,
    },
    CaRegistered {
        did: Did,
        #[serde(rename = "publicKey")]
        public_key: PublicKey,
    },
    Deployed {
        config: ScholarshipConfig,
        admin: Did,
    },
    Applied {
        scholarship: ScholarshipId,
        record: ApplicationRecord,
    },
    Rejected {
        scholarship: ScholarshipId,
        student: Did,
        reason: String,
    },
    RootsSet {
        scholarship: ScholarshipId,
        entries: Vec<AwardRootEntry>,
    },
    Claimed {
        scholarship: ScholarshipId,
        tier: String,
        student: Did,
        leaf: Digest,
    },
    CredentialIssued {
        scholarship: ScholarshipId,
        #[serde(rename = "credentialId")]
        credential_id: String,
        subject: Did,
        digest: Digest,
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::DidRegistered { .. } => EventKind::DidRegistered,
            EventPayload::CaRegistered { .. } => EventKind::CaRegistered,
            EventPayload::Deployed { .. } => EventKind::Deployed,
            EventPayload::Applied { .. } => EventKind::Applied,
            EventPayload::Rejected { .. } => EventKind::Rejected,
            EventPayload::RootsSet { .. } => EventKind::RootsSet,
            EventPayload::Claimed { .. } => EventKind::Claimed,
            EventPayload::CredentialIssued { .. } => EventKind::CredentialIssued,
        }
    }
}

/// One entry of the append-only log. `payload_size` is the canonical JSON
/// length of the payload and stands in for gas accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerEvent {
    pub height: u64,
    pub time: Timestamp,
    pub payload_size: u64,
    pub payload: EventPayload,
}

impl LedgerEvent {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}
