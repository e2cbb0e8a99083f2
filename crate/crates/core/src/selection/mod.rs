//! Off-chain result selection: ranking, tier allocation, per-tier Merkle
//! trees over `Hash_LEAF(DID || total)`, and publication of awardee lists to
//! a content-addressed store.

mod merkle;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::crypto::{check_range, hash_tagged_parts, Digest, DomainTag, MAX_WEIGHTED_SCORE};
use crate::identity::Did;
use crate::ledger::{ApplicationRecord, AwardRootEntry, PrizeTier};

pub use merkle::{build_tree, node_hash, prove_membership, verify_membership, MerkleProof, MerkleTree, ProofStep, Side};
pub use store::{ContentId, ContentStore};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("total {0} outside 0..=10000")]
    TotalOutOfRange(u32),
    #[error("cannot build a Merkle tree over zero leaves")]
    EmptyTree,
    #[error("leaf index {index} out of range for {count} leaves")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("content {0} not found")]
    ContentNotFound(ContentId),
    #[error("content {0} does not match its id")]
    ContentTampered(ContentId),
    #[error("awardee list is malformed: {0}")]
    MalformedList(String),
    #[error("store I/O: {0}")]
    Io(String),
}

impl SelectionError {
    pub fn code(&self) -> &'static str {
        match self {
            SelectionError::TotalOutOfRange(_) => "total-out-of-range",
            SelectionError::EmptyTree => "empty-tree",
            SelectionError::IndexOutOfRange { .. } => "index-out-of-range",
            SelectionError::ContentNotFound(_) => "content-not-found",
            SelectionError::ContentTampered(_) => "content-tampered",
            SelectionError::MalformedList(_) => "malformed-list",
            SelectionError::Io(_) => "store-io",
        }
    }
}

/// `Hash_LEAF(UTF-8 DID || u32 BE total)`.
pub fn leaf(did: &Did, total: u32) -> Result<Digest, SelectionError> {
    check_range("s_total", total, MAX_WEIGHTED_SCORE).map_err(|_| SelectionError::TotalOutOfRange(total))?;
    Ok(hash_tagged_parts(
        DomainTag::Leaf,
        &[did.to_string().as_bytes(), &total.to_be_bytes()],
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwardeeEntry {
    pub did: Did,
    pub total: u32,
    pub leaf: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwardeeList {
    pub tier: String,
    pub entries: Vec<AwardeeEntry>,
}

impl AwardeeList {
    pub fn leaves(&self) -> Vec<Digest> {
        self.entries.iter().map(|e| e.leaf).collect()
    }

    pub fn tree(&self) -> Result<MerkleTree, SelectionError> {
        MerkleTree::build(&self.leaves())
    }

    /// Leaves recomputed from `(did, total)` match the stored ones, and
    /// entries are in ranking order.
    pub fn validate(&self) -> Result<(), SelectionError> {
        for e in &self.entries {
            if leaf(&e.did, e.total)? != e.leaf {
                return Err(SelectionError::MalformedList(format!("leaf mismatch for {}", e.did)));
            }
        }
        let in_order = self
            .entries
            .windows(2)
            .all(|w| ranking_key(&w[0].did, w[0].total) <= ranking_key(&w[1].did, w[1].total));
        if !in_order {
            return Err(SelectionError::MalformedList("entries not in ranking order".into()));
        }
        Ok(())
    }

    pub fn position(&self, did: &Did, total: u32) -> Option<usize> {
        self.entries.iter().position(|e| &e.did == did && e.total == total)
    }
}

fn ranking_key(did: &Did, total: u32) -> (std::cmp::Reverse<u32>, String) {
    (std::cmp::Reverse(total), did.to_string())
}

/// Sort by descending total (ties: ascending DID string) and hand out tiers
/// best-first by quota. Records past the last quota get no tier.
pub fn rank_and_allocate(
    records: &[ApplicationRecord],
    prize_counts: &[PrizeTier],
) -> Result<Vec<AwardeeList>, SelectionError> {
    let mut ranked: Vec<&ApplicationRecord> = records.iter().collect();
    ranked.sort_by_cached_key(|r| ranking_key(&r.student, r.total));
    let mut remaining = ranked.into_iter();
    prize_counts
        .iter()
        .map(|quota| {
            let entries = remaining
                .by_ref()
                .take(quota.count as usize)
                .map(|r| {
                    Ok(AwardeeEntry {
                        did: r.student.clone(),
                        total: r.total,
                        leaf: leaf(&r.student, r.total)?,
                    })
                })
                .collect::<Result<_, SelectionError>>()?;
            Ok(AwardeeList {
                tier: quota.tier.clone(),
                entries,
            })
        })
        .collect()
}

/// The exact bytes stored and hashed for a list.
pub fn list_blob(list: &AwardeeList) -> Vec<u8> {
    canonical::to_canonical_vec(list).expect("awardee list always serializes")
}

pub fn publish_list(store: &ContentStore, list: &AwardeeList) -> Result<ContentId, SelectionError> {
    store.put(&list_blob(list))
}

/// Fetch, id-check, parse and validate a published list.
pub fn fetch_list(store: &ContentStore, id: &ContentId) -> Result<AwardeeList, SelectionError> {
    let blob = store.get(id)?;
    let list: AwardeeList =
        serde_json::from_slice(&blob).map_err(|e| SelectionError::MalformedList(e.to_string()))?;
    list.validate()?;
    Ok(list)
}

/// Off-chain finalization: rank, allocate, publish each non-empty list and
/// return the root entries to store on the ledger. Empty tiers get no root.
pub fn prepare_award_roots(
    store: &ContentStore,
    records: &[ApplicationRecord],
    prize_counts: &[PrizeTier],
) -> Result<(Vec<AwardeeList>, Vec<AwardRootEntry>), SelectionError> {
    let lists = rank_and_allocate(records, prize_counts)?;
    let mut entries = Vec::new();
    for list in lists.iter().filter(|l| !l.entries.is_empty()) {
        entries.push(AwardRootEntry {
            tier: list.tier.clone(),
            root: list.tree()?.root(),
            list_cid: publish_list(store, list)?,
        });
    }
    Ok((lists, entries))
}
