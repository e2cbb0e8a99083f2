//! Weighted-score and aggregation circuits.
//!
//! Both circuits are written as explicit, ordered constraint lists
//! ([`weighted_constraints`], [`aggregate_constraints`]) that any backend
//! must enforce. The [`ProofSystem`] trait is the backend seam; the only
//! backend shipped here is the transparent [`OracleBackend`].
//!
//! Weighted-score circuit: private `s`, public `(w, s_w)`:
//! `0 <= s <= 100`, `0 <= w <= 100`, `s_w = s * w`, `0 <= s_w <= 10000`.
//!
//! Aggregation circuit at arity `n`: private `(pi_i, w_i, s_w_i, sigma_i)`,
//! public `(pk_i, h_i)` and `s_total`. Every tuple must hash to its `h_i`,
//! every `sigma_i` must verify under `pk_i`, and the weighted scores must sum
//! to `s_total`. A tuple that fails its checks fails the whole statement; it
//! is never silently skipped.

mod oracle;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::crypto::{
    self, encode_weighted, hash_tagged_parts, Digest, DomainTag, PublicKey, Signature,
    MAX_SCORE, MAX_WEIGHT, MAX_WEIGHTED_SCORE,
};

pub use oracle::{OracleBackend, OracleSnapshot, ORACLE_PROOF_LEN, ORACLE_SCHEME};

/// Largest supported number of dimensions in one aggregate statement.
pub const MAX_AGGREGATE_ARITY: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitKind {
    WeightedScore,
    Aggregate,
}

impl CircuitKind {
    fn label(self) -> &'static str {
        match self {
            CircuitKind::WeightedScore => "weighted-score",
            CircuitKind::Aggregate => "aggregate",
        }
    }

    fn byte(self) -> u8 {
        match self {
            CircuitKind::WeightedScore => 1,
            CircuitKind::Aggregate => 2,
        }
    }
}

/// A circuit together with its arity (always 1 for the weighted circuit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitShape {
    pub kind: CircuitKind,
    pub arity: u8,
}

impl CircuitShape {
    pub fn weighted() -> Self {
        Self {
            kind: CircuitKind::WeightedScore,
            arity: 1,
        }
    }

    pub fn aggregate(n: usize) -> Result<Self, CircuitError> {
        if !(1..=MAX_AGGREGATE_ARITY).contains(&n) {
            return Err(CircuitError::Usage(format!(
                "aggregate arity {n} outside 1..={MAX_AGGREGATE_ARITY}"
            )));
        }
        Ok(Self {
            kind: CircuitKind::Aggregate,
            arity: n as u8,
        })
    }

    /// Public-input schema identifier.
    pub fn schema_id(&self) -> Digest {
        let out: [u8; 32] = Sha256::new()
            .chain_update(b"circuit-schema/v1")
            .chain_update(self.kind.label().as_bytes())
            .chain_update([self.arity])
            .finalize()
            .into();
        Digest::from_bytes(out)
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        match self.kind {
            CircuitKind::WeightedScore => weighted_constraints().to_vec(),
            CircuitKind::Aggregate => aggregate_constraints(self.arity as usize),
        }
    }
}

/// One named constraint of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    ScoreRange,
    WeightRange,
    WeightedProduct,
    WeightedRange,
    Arity,
    TupleHash(usize),
    CaSignature(usize),
    TotalSum,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::ScoreRange => f.write_str("0 <= s <= 100"),
            Constraint::WeightRange => f.write_str("0 <= w <= 100"),
            Constraint::WeightedProduct => f.write_str("s_w = s * w"),
            Constraint::WeightedRange => f.write_str("0 <= s_w <= maxScore"),
            Constraint::Arity => f.write_str("statement arity"),
            Constraint::TupleHash(i) => write!(f, "h_{i} = Hash(pi_{i} || Encode(w_{i}, s_w_{i}))"),
            Constraint::CaSignature(i) => write!(f, "Verify(pk_{i}, h_{i}, sigma_{i}) = 1"),
            Constraint::TotalSum => f.write_str("sum(s_w_i) = s_total"),
        }
    }
}

pub fn weighted_constraints() -> [Constraint; 4] {
    [
        Constraint::ScoreRange,
        Constraint::WeightRange,
        Constraint::WeightedProduct,
        Constraint::WeightedRange,
    ]
}

pub fn aggregate_constraints(n: usize) -> Vec<Constraint> {
    let mut out = vec![Constraint::Arity];
    for i in 0..n {
        out.push(Constraint::TupleHash(i));
        out.push(Constraint::CaSignature(i));
    }
    out.push(Constraint::TotalSum);
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("constraint violated: {0}")]
    Unsatisfied(Constraint),
    #[error("key does not match this circuit or backend")]
    KeyMismatch,
    #[error("{0}")]
    Usage(String),
}

impl CircuitError {
    pub fn code(&self) -> &'static str {
        match self {
            CircuitError::Unsatisfied(_) => "unsatisfied",
            CircuitError::KeyMismatch => "key-mismatch",
            CircuitError::Usage(_) => "circuit-usage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedWitness {
    pub score: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedPublics {
    pub weight: u32,
    pub weighted_score: u32,
}

/// Private half of one aggregation input: `(pi_i, w_i, s_w_i, sigma_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateTuple {
    #[serde(with = "hex_bytes")]
    pub proof: Vec<u8>,
    pub weight: u32,
    pub weighted_score: u32,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateWitness {
    pub tuples: Vec<AggregateTuple>,
}

/// Public half of one aggregation input: `(pk_i, h_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregatePublic {
    pub pk: PublicKey,
    pub h: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatePublics {
    pub entries: Vec<AggregatePublic>,
    pub total: u32,
    /// When set, CA signatures cover [`signed_digest`] of `h_i` and this DID
    /// instead of `h_i` itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_student: Option<String>,
}

/// `h = Hash_TUPLE(pi || Encode(w, s_w))`.
pub fn tuple_hash(proof: &[u8], weight: u32, weighted_score: u32) -> Result<Digest, CircuitError> {
    let encoded = encode_weighted(weight, weighted_score)
        .map_err(|e| CircuitError::Usage(e.to_string()))?;
    Ok(hash_tagged_parts(DomainTag::TupleHash, &[proof, &encoded]))
}

/// The digest a CA actually signs for a tuple hash.
pub fn signed_digest(tuple_hash: &Digest, bound_student: Option<&str>) -> Digest {
    match bound_student {
        None => *tuple_hash,
        Some(did) => hash_tagged_parts(DomainTag::TupleHash, &[tuple_hash.as_bytes(), did.as_bytes()]),
    }
}

/// Fixed-width tagged encoding of a private raw score as it enters the
/// witness. Privacy checks scan serialized artifacts for this pattern.
pub fn score_witness_encoding(score: u32) -> [u8; 5] {
    let mut out = [0u8; 5];
    out[0] = b's';
    out[1..].copy_from_slice(&score.to_be_bytes());
    out
}

/// Evaluate the weighted-score constraints in order.
pub fn check_weighted(witness: &WeightedWitness, publics: &WeightedPublics) -> Result<(), Constraint> {
    if witness.score > MAX_SCORE {
        return Err(Constraint::ScoreRange);
    }
    if publics.weight > MAX_WEIGHT {
        return Err(Constraint::WeightRange);
    }
    if u64::from(witness.score) * u64::from(publics.weight) != u64::from(publics.weighted_score) {
        return Err(Constraint::WeightedProduct);
    }
    if publics.weighted_score > MAX_WEIGHTED_SCORE {
        return Err(Constraint::WeightedRange);
    }
    Ok(())
}

/// Evaluate the aggregation constraints in order at arity `n`.
pub fn check_aggregate(
    n: usize,
    witness: &AggregateWitness,
    publics: &AggregatePublics,
) -> Result<(), Constraint> {
    check_aggregate_inner(n, witness, publics, true)
}

/// Hash and sum constraints only. Signature constraints are checked once,
/// when a proof is produced.
pub(crate) fn check_aggregate_arithmetic(
    n: usize,
    witness: &AggregateWitness,
    publics: &AggregatePublics,
) -> Result<(), Constraint> {
    check_aggregate_inner(n, witness, publics, false)
}

fn check_aggregate_inner(
    n: usize,
    witness: &AggregateWitness,
    publics: &AggregatePublics,
    with_signatures: bool,
) -> Result<(), Constraint> {
    if witness.tuples.len() != n || publics.entries.len() != n {
        return Err(Constraint::Arity);
    }
    let mut sum = 0u64;
    for (i, (tuple, public)) in witness.tuples.iter().zip(&publics.entries).enumerate() {
        match tuple_hash(&tuple.proof, tuple.weight, tuple.weighted_score) {
            Ok(h) if h == public.h => {}
            _ => return Err(Constraint::TupleHash(i)),
        }
        if with_signatures {
            let msg = signed_digest(&public.h, publics.bound_student.as_deref());
            if !crypto::verify(&public.pk, &msg, &tuple.signature) {
                return Err(Constraint::CaSignature(i));
            }
        }
        sum += u64::from(tuple.weighted_score);
    }
    if sum != u64::from(publics.total) {
        return Err(Constraint::TotalSum);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProvingKey {
    pub scheme: String,
    pub shape: CircuitShape,
    pub key_id: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyingKey {
    pub scheme: String,
    pub shape: CircuitShape,
    pub key_id: Digest,
}

/// A proof: scheme label, opaque bytes, and the schema id of the public
/// inputs it is bound to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub scheme: String,
    pub bytes: Vec<u8>,
    pub shape: CircuitShape,
}

impl Proof {
    pub fn schema_id(&self) -> Digest {
        self.shape.schema_id()
    }
}

#[derive(Serialize, Deserialize)]
struct ProofEnvelope {
    scheme: String,
    proof: String,
    publics: EnvelopePublics,
}

#[derive(Serialize, Deserialize)]
struct EnvelopePublics {
    circuit: CircuitKind,
    arity: u8,
    schema: Digest,
}

impl Serialize for Proof {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ProofEnvelope {
            scheme: self.scheme.clone(),
            proof: hex::encode(&self.bytes),
            publics: EnvelopePublics {
                circuit: self.shape.kind,
                arity: self.shape.arity,
                schema: self.shape.schema_id(),
            },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Proof {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let env = ProofEnvelope::deserialize(deserializer)?;
        let shape = CircuitShape {
            kind: env.publics.circuit,
            arity: env.publics.arity,
        };
        if shape.schema_id() != env.publics.schema {
            return Err(serde::de::Error::custom("schema id does not match circuit shape"));
        }
        let bytes = hex::decode(&env.proof).map_err(serde::de::Error::custom)?;
        Ok(Proof {
            scheme: env.scheme,
            bytes,
            shape,
        })
    }
}

/// A proving backend for both circuits.
///
/// The `*_claim` methods take fully general statements (including a claimed
/// `s_w` that may be wrong) and are what backends implement; the remaining
/// methods are the everyday entry points.
pub trait ProofSystem: Send + Sync {
    fn scheme(&self) -> &'static str;

    fn setup(&self, shape: CircuitShape) -> (ProvingKey, VerifyingKey);

    fn prove_weighted_claim(
        &self,
        pk: &ProvingKey,
        witness: &WeightedWitness,
        publics: &WeightedPublics,
    ) -> Result<Proof, CircuitError>;

    fn verify_weighted_claim(&self, vk: &VerifyingKey, proof: &Proof, publics: &WeightedPublics) -> bool;

    fn prove_aggregate_claim(
        &self,
        pk: &ProvingKey,
        witness: &AggregateWitness,
        publics: &AggregatePublics,
    ) -> Result<Proof, CircuitError>;

    fn verify_aggregate_claim(&self, vk: &VerifyingKey, proof: &Proof, publics: &AggregatePublics) -> bool;

    fn setup_weighted(&self) -> (ProvingKey, VerifyingKey) {
        self.setup(CircuitShape::weighted())
    }

    fn setup_aggregate(&self, n: usize) -> Result<(ProvingKey, VerifyingKey), CircuitError> {
        Ok(self.setup(CircuitShape::aggregate(n)?))
    }

    /// Prove `s_w = s * w` for a private score; returns the proof and `s_w`.
    fn prove_weighted(&self, pk: &ProvingKey, score: u32, weight: u32) -> Result<(Proof, u32), CircuitError> {
        let weighted_score = u32::try_from(u64::from(score) * u64::from(weight)).unwrap_or(u32::MAX);
        let publics = WeightedPublics {
            weight,
            weighted_score,
        };
        let proof = self.prove_weighted_claim(pk, &WeightedWitness { score }, &publics)?;
        Ok((proof, weighted_score))
    }

    fn verify_weighted(&self, vk: &VerifyingKey, proof: &Proof, weight: u32, weighted_score: u32) -> bool {
        self.verify_weighted_claim(
            vk,
            proof,
            &WeightedPublics {
                weight,
                weighted_score,
            },
        )
    }

    fn prove_aggregate(
        &self,
        pk: &ProvingKey,
        tuples: &[AggregateTuple],
        publics: &[AggregatePublic],
        total: u32,
    ) -> Result<Proof, CircuitError> {
        self.prove_aggregate_claim(
            pk,
            &AggregateWitness {
                tuples: tuples.to_vec(),
            },
            &AggregatePublics {
                entries: publics.to_vec(),
                total,
                bound_student: None,
            },
        )
    }

    fn verify_aggregate(&self, vk: &VerifyingKey, proof: &Proof, publics: &[AggregatePublic], total: u32) -> bool {
        self.verify_aggregate_claim(
            vk,
            proof,
            &AggregatePublics {
                entries: publics.to_vec(),
                total,
                bound_student: None,
            },
        )
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
