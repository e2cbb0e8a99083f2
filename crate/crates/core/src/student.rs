//! Student-side logic: check CA tuples, aggregate them into one
//! application that reveals only the total, and build Merkle claims.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authority::ProofTuple;
use crate::circuits::{
    signed_digest, tuple_hash, AggregatePublic, AggregatePublics, AggregateTuple, AggregateWitness, CircuitError,
    Proof, ProofSystem, ProvingKey, VerifyingKey,
};
use crate::crypto::{self, Digest, PublicKey};
use crate::identity::Did;
use crate::ledger::{LedgerState, ScholarshipId, ScholarshipState};
use crate::selection::{self, fetch_list, AwardeeList, ContentStore, MerkleProof, SelectionError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StudentError {
    #[error("no tuples to aggregate")]
    EmptyTuples,
    #[error("weighted scores overflow")]
    Overflow,
    #[error("scholarship {0} does not exist")]
    UnknownScholarship(ScholarshipId),
    #[error("expected {expected} tuples, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("no tuple from the CA of dimension {0:?}")]
    MissingDimension(String),
    #[error("tuple for dimension {0:?} does not verify")]
    TupleInvalid(String),
    #[error("{0} has no accepted application")]
    NotApplied(Did),
    #[error("not awarded")]
    NotAwarded,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

impl StudentError {
    pub fn code(&self) -> &'static str {
        match self {
            StudentError::EmptyTuples => "empty-tuples",
            StudentError::Overflow => "overflow",
            StudentError::UnknownScholarship(_) => "unknown-scholarship",
            StudentError::Arity { .. } => "arity-mismatch",
            StudentError::MissingDimension(_) => "missing-dimension",
            StudentError::TupleInvalid(_) => "tuple-invalid",
            StudentError::NotApplied(_) => "not-applied",
            StudentError::NotAwarded => "not-awarded",
            StudentError::Circuit(_) => "circuit",
            StudentError::Selection(_) => "selection",
        }
    }
}

/// `(pi_agg, {pk_i, h_i}, s_total)` plus routing fields. Publics follow the
/// scholarship's dimension order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateApplication {
    #[serde(rename = "did")]
    pub student: Did,
    #[serde(rename = "scholarshipId")]
    pub scholarship_id: ScholarshipId,
    #[serde(rename = "piAgg")]
    pub aggregate_proof: Proof,
    pub publics: Vec<AggregatePublic>,
    #[serde(rename = "sTotal")]
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClaimRequest {
    pub student: Did,
    pub tier: String,
    pub leaf: Digest,
    pub merkle_proof: MerkleProof,
}

/// Registered key, recomputed hash, CA signature, and the weighted proof.
/// `bound_student` must match the scholarship's binding mode.
pub fn verify_tuple(
    backend: &dyn ProofSystem,
    t: &ProofTuple,
    registered_pk: &PublicKey,
    weighted_vk: &VerifyingKey,
    bound_student: Option<&Did>,
) -> bool {
    if &t.ca_public_key != registered_pk {
        return false;
    }
    match tuple_hash(&t.proof.bytes, t.weight, t.weighted_score) {
        Ok(h) if h == t.tuple_hash => {}
        _ => return false,
    }
    let bound = bound_student.map(Did::to_string);
    crypto::verify(registered_pk, &signed_digest(&t.tuple_hash, bound.as_deref()), &t.ca_signature)
        && backend.verify_weighted(weighted_vk, &t.proof, t.weight, t.weighted_score)
}

/// `s_total = sum of s_w_i`.
pub fn total_score(tuples: &[ProofTuple]) -> Result<u32, StudentError> {
    if tuples.is_empty() {
        return Err(StudentError::EmptyTuples);
    }
    tuples
        .iter()
        .try_fold(0u32, |acc, t| acc.checked_add(t.weighted_score))
        .ok_or(StudentError::Overflow)
}

/// Order tuples by the scholarship's dimensions, verify each against the
/// ledger's CA registry, and prove the aggregate statement.
pub fn build_application(
    backend: &dyn ProofSystem,
    student: &Did,
    scholarship_id: ScholarshipId,
    tuples: &[ProofTuple],
    ledger: &LedgerState,
    aggregate_pk: &ProvingKey,
) -> Result<AggregateApplication, StudentError> {
    let config = &ledger
        .scholarship(scholarship_id)
        .map_err(|_| StudentError::UnknownScholarship(scholarship_id))?
        .config;
    if tuples.len() != config.dimension_count() {
        return Err(StudentError::Arity {
            expected: config.dimension_count(),
            got: tuples.len(),
        });
    }
    if aggregate_pk.key_id != config.aggregate_vk.key_id {
        return Err(CircuitError::KeyMismatch.into());
    }
    let bound = config.bind_student.then_some(student);

    let mut ordered = Vec::with_capacity(tuples.len());
    for dim in &config.dimensions {
        let t = tuples
            .iter()
            .find(|t| t.ca_public_key == dim.ca_public_key)
            .ok_or_else(|| StudentError::MissingDimension(dim.dimension.clone()))?;
        let registered = ledger
            .ca_key(&dim.ca)
            .ok_or_else(|| StudentError::TupleInvalid(dim.dimension.clone()))?;
        if !verify_tuple(backend, t, registered, &config.weighted_vk, bound) {
            return Err(StudentError::TupleInvalid(dim.dimension.clone()));
        }
        ordered.push(t.clone());
    }

    let total = total_score(&ordered)?;
    let publics = AggregatePublics {
        entries: ordered
            .iter()
            .map(|t| AggregatePublic {
                pk: t.ca_public_key,
                h: t.tuple_hash,
            })
            .collect(),
        total,
        bound_student: bound.map(Did::to_string),
    };
    let witness = AggregateWitness {
        tuples: ordered
            .iter()
            .map(|t| AggregateTuple {
                proof: t.proof.bytes.clone(),
                weight: t.weight,
                weighted_score: t.weighted_score,
                signature: t.ca_signature.clone(),
            })
            .collect(),
    };
    let aggregate_proof = backend.prove_aggregate_claim(aggregate_pk, &witness, &publics)?;
    Ok(AggregateApplication {
        student: student.clone(),
        scholarship_id,
        aggregate_proof,
        publics: publics.entries,
        total,
    })
}

/// Recompute the own leaf and its sibling path in `list`.
pub fn build_claim(list: &AwardeeList, student: &Did, total: u32) -> Result<ClaimRequest, StudentError> {
    let index = list.position(student, total).ok_or(StudentError::NotAwarded)?;
    let leaf = selection::leaf(student, total)?;
    let merkle_proof = list.tree()?.prove(index)?;
    Ok(ClaimRequest {
        student: student.clone(),
        tier: list.tier.clone(),
        leaf,
        merkle_proof,
    })
}

/// Find the student's tier among the published lists of a scholarship and
/// build the claim for it.
pub fn find_claim(
    scholarship: &ScholarshipState,
    store: &ContentStore,
    student: &Did,
) -> Result<ClaimRequest, StudentError> {
    let total = scholarship
        .application(student)
        .ok_or_else(|| StudentError::NotApplied(student.clone()))?
        .total;
    for entry in scholarship.award_roots.values() {
        let list = fetch_list(store, &entry.list_cid)?;
        if list.position(student, total).is_some() {
            return build_claim(&list, student, total);
        }
    }
    Err(StudentError::NotAwarded)
}
