//! Transparent constraint-oracle backend.
//!
//! A proof is a fixed-length commitment envelope
//! `magic || kind || arity || key_id || binding`, where `binding` hashes the
//! full witness and public inputs under a blinder derived from the backend
//! seed. The backend keeps a registry `binding -> (witness, publics digest)`
//! that only grows when every constraint holds.
//!
//! Verification looks up the binding, checks that the presented public
//! inputs are exactly the ones that were proven, and replays the circuit's
//! arithmetic against the stored witness. CA signature checks run once at
//! proving time, so verification cost does not grow with ECDSA work per
//! dimension.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::{
    check_aggregate, check_aggregate_arithmetic, check_weighted, score_witness_encoding, AggregatePublics,
    AggregateWitness, CircuitError, CircuitKind, CircuitShape, Proof, ProofSystem, ProvingKey, VerifyingKey,
    WeightedPublics, WeightedWitness,
};
use crate::crypto::{encode_weighted, Digest};

pub const ORACLE_SCHEME: &str = "oracle";
const PROOF_MAGIC: u8 = 0x4f;
/// `magic || kind || arity || key_id || binding`
pub const ORACLE_PROOF_LEN: usize = 3 + 32 + 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "circuit", rename_all = "kebab-case")]
enum StoredWitness {
    Weighted(WeightedWitness),
    Aggregate(AggregateWitness),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WitnessRecord {
    binding: Digest,
    key_id: Digest,
    publics_digest: Digest,
    witness: StoredWitness,
}

/// Persistable form of an [`OracleBackend`]: its seed and witness registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSnapshot {
    seed: Digest,
    records: Vec<WitnessRecord>,
}

pub struct OracleBackend {
    seed: [u8; 32],
    registry: RwLock<HashMap<Digest, WitnessRecord>>,
}

impl std::fmt::Debug for OracleBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleBackend")
            .field("records", &self.len())
            .finish_non_exhaustive()
    }
}

impl OracleBackend {
    pub fn new(seed: [u8; 32]) -> Self {
        Self {
            seed,
            registry: RwLock::new(HashMap::new()),
        }
    }

    pub fn from_rng<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::new(seed)
    }

    pub fn len(&self) -> usize {
        self.registry.read().expect("registry lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> OracleSnapshot {
        let registry = self.registry.read().expect("registry lock poisoned");
        let mut records: Vec<_> = registry.values().cloned().collect();
        records.sort_by_key(|r| r.binding);
        OracleSnapshot {
            seed: Digest::from_bytes(self.seed),
            records,
        }
    }

    pub fn restore(snapshot: OracleSnapshot) -> Self {
        let registry = snapshot.records.into_iter().map(|r| (r.binding, r)).collect();
        Self {
            seed: *snapshot.seed.as_bytes(),
            registry: RwLock::new(registry),
        }
    }

    fn key_id(shape: &CircuitShape) -> Digest {
        let out: [u8; 32] = Sha256::new()
            .chain_update(b"oracle-key/v1")
            .chain_update(shape.schema_id().as_bytes())
            .finalize()
            .into();
        Digest::from_bytes(out)
    }

    fn check_key(&self, scheme: &str, key_shape: &CircuitShape, key_id: &Digest, kind: CircuitKind) -> bool {
        scheme == ORACLE_SCHEME && key_shape.kind == kind && *key_id == Self::key_id(key_shape)
    }

    fn publics_digest(key_id: &Digest, publics: &[u8]) -> Digest {
        let out: [u8; 32] = Sha256::new()
            .chain_update(b"oracle-publics/v1")
            .chain_update(key_id.as_bytes())
            .chain_update(publics)
            .finalize()
            .into();
        Digest::from_bytes(out)
    }

    fn commit(
        &self,
        shape: CircuitShape,
        key_id: Digest,
        witness_bytes: &[u8],
        publics_bytes: &[u8],
        witness: StoredWitness,
    ) -> Proof {
        let blinder: [u8; 32] = Sha256::new()
            .chain_update(b"oracle-blinder/v1")
            .chain_update(self.seed)
            .chain_update(key_id.as_bytes())
            .chain_update(witness_bytes)
            .chain_update(publics_bytes)
            .finalize()
            .into();
        let binding = Digest::from_bytes(
            Sha256::new()
                .chain_update(b"oracle-binding/v1")
                .chain_update(blinder)
                .chain_update(key_id.as_bytes())
                .chain_update(witness_bytes)
                .chain_update(publics_bytes)
                .finalize()
                .into(),
        );
        let record = WitnessRecord {
            binding,
            key_id,
            publics_digest: Self::publics_digest(&key_id, publics_bytes),
            witness,
        };
        self.registry
            .write()
            .expect("registry lock poisoned")
            .insert(binding, record);

        let mut bytes = Vec::with_capacity(ORACLE_PROOF_LEN);
        bytes.extend_from_slice(&[PROOF_MAGIC, shape.kind.byte(), shape.arity]);
        bytes.extend_from_slice(key_id.as_bytes());
        bytes.extend_from_slice(binding.as_bytes());
        Proof {
            scheme: ORACLE_SCHEME.to_string(),
            bytes,
            shape,
        }
    }

    /// Parse the envelope and return the registered record if the proof is
    /// well-formed for `vk` and bound to exactly `publics_bytes`.
    fn lookup(&self, vk: &VerifyingKey, proof: &Proof, kind: CircuitKind, publics_bytes: &[u8]) -> Option<WitnessRecord> {
        if !self.check_key(&vk.scheme, &vk.shape, &vk.key_id, kind) {
            return None;
        }
        if proof.scheme != ORACLE_SCHEME || proof.shape != vk.shape || proof.bytes.len() != ORACLE_PROOF_LEN {
            return None;
        }
        let b = &proof.bytes;
        if b[0] != PROOF_MAGIC || b[1] != vk.shape.kind.byte() || b[2] != vk.shape.arity {
            return None;
        }
        if &b[3..35] != vk.key_id.as_bytes() {
            return None;
        }
        let binding = Digest::from_slice(&b[35..67]).ok()?;
        let record = self
            .registry
            .read()
            .expect("registry lock poisoned")
            .get(&binding)
            .cloned()?;
        if record.key_id != vk.key_id || record.publics_digest != Self::publics_digest(&vk.key_id, publics_bytes) {
            return None;
        }
        Some(record)
    }
}

fn weighted_publics_bytes(publics: &WeightedPublics) -> Option<[u8; 6]> {
    encode_weighted(publics.weight, publics.weighted_score).ok()
}

fn aggregate_witness_bytes(witness: &AggregateWitness) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(witness.tuples.len() as u32).to_be_bytes());
    for t in &witness.tuples {
        out.extend_from_slice(&(t.proof.len() as u32).to_be_bytes());
        out.extend_from_slice(&t.proof);
        out.extend_from_slice(&t.weight.to_be_bytes());
        out.extend_from_slice(&t.weighted_score.to_be_bytes());
        out.extend_from_slice(&(t.signature.as_bytes().len() as u32).to_be_bytes());
        out.extend_from_slice(t.signature.as_bytes());
    }
    out
}

fn aggregate_publics_bytes(publics: &AggregatePublics) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + publics.entries.len() * 65 + 8);
    out.extend_from_slice(&(publics.entries.len() as u32).to_be_bytes());
    for e in &publics.entries {
        out.extend_from_slice(e.pk.as_bytes());
        out.extend_from_slice(e.h.as_bytes());
    }
    out.extend_from_slice(&publics.total.to_be_bytes());
    match &publics.bound_student {
        None => out.push(0),
        Some(did) => {
            out.push(1);
            out.extend_from_slice(&(did.len() as u32).to_be_bytes());
            out.extend_from_slice(did.as_bytes());
        }
    }
    out
}

impl ProofSystem for OracleBackend {
    fn scheme(&self) -> &'static str {
        ORACLE_SCHEME
    }

    fn setup(&self, shape: CircuitShape) -> (ProvingKey, VerifyingKey) {
        let key_id = Self::key_id(&shape);
        (
            ProvingKey {
                scheme: ORACLE_SCHEME.to_string(),
                shape,
                key_id,
            },
            VerifyingKey {
                scheme: ORACLE_SCHEME.to_string(),
                shape,
                key_id,
            },
        )
    }

    fn prove_weighted_claim(
        &self,
        pk: &ProvingKey,
        witness: &WeightedWitness,
        publics: &WeightedPublics,
    ) -> Result<Proof, CircuitError> {
        if !self.check_key(&pk.scheme, &pk.shape, &pk.key_id, CircuitKind::WeightedScore) {
            return Err(CircuitError::KeyMismatch);
        }
        check_weighted(witness, publics).map_err(CircuitError::Unsatisfied)?;
        let publics_bytes = weighted_publics_bytes(publics).expect("ranges checked above");
        Ok(self.commit(
            pk.shape,
            pk.key_id,
            &score_witness_encoding(witness.score),
            &publics_bytes,
            StoredWitness::Weighted(witness.clone()),
        ))
    }

    fn verify_weighted_claim(&self, vk: &VerifyingKey, proof: &Proof, publics: &WeightedPublics) -> bool {
        let Some(publics_bytes) = weighted_publics_bytes(publics) else {
            return false;
        };
        match self.lookup(vk, proof, CircuitKind::WeightedScore, &publics_bytes) {
            Some(WitnessRecord {
                witness: StoredWitness::Weighted(w),
                ..
            }) => check_weighted(&w, publics).is_ok(),
            _ => false,
        }
    }

    fn prove_aggregate_claim(
        &self,
        pk: &ProvingKey,
        witness: &AggregateWitness,
        publics: &AggregatePublics,
    ) -> Result<Proof, CircuitError> {
        if !self.check_key(&pk.scheme, &pk.shape, &pk.key_id, CircuitKind::Aggregate) {
            return Err(CircuitError::KeyMismatch);
        }
        check_aggregate(pk.shape.arity as usize, witness, publics).map_err(CircuitError::Unsatisfied)?;
        Ok(self.commit(
            pk.shape,
            pk.key_id,
            &aggregate_witness_bytes(witness),
            &aggregate_publics_bytes(publics),
            StoredWitness::Aggregate(witness.clone()),
        ))
    }

    fn verify_aggregate_claim(&self, vk: &VerifyingKey, proof: &Proof, publics: &AggregatePublics) -> bool {
        if publics.entries.len() != vk.shape.arity as usize {
            return false;
        }
        match self.lookup(vk, proof, CircuitKind::Aggregate, &aggregate_publics_bytes(publics)) {
            Some(WitnessRecord {
                witness: StoredWitness::Aggregate(w),
                ..
            }) => check_aggregate_arithmetic(vk.shape.arity as usize, &w, publics).is_ok(),
            _ => false,
        }
    }
}
