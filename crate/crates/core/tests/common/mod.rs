//! Shared fixture: the two-student, four-CA worked example, driven through
//! the public API with fixed seeds and logical times.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use scholar_core::authority::{AuthorizationRequest, CredentialAuthority, ProofTuple, IDENTITY_CPTID};
use scholar_core::circuits::{OracleBackend, ProofSystem, ProvingKey};
use scholar_core::crypto::{keygen, KeyPair};
use scholar_core::identity::{disclose, issue_credential, ClaimValue, Did, VerifiableCredential};
use scholar_core::ledger::{DimensionConfig, Ledger, PrizeTier, ScholarshipConfig};
use scholar_core::selection::{prepare_award_roots, AwardeeList, ContentStore};
use scholar_core::student::{build_application, find_claim, AggregateApplication};
use scholar_core::Timestamp;

pub const REGISTERED_AT: Timestamp = 1_748_649_600; // 2025-05-31T00:00:00Z
pub const START: Timestamp = 1_748_736_000; // 2025-06-01T00:00:00Z
pub const APPLY_AT: Timestamp = 1_749_513_600; // 2025-06-10T00:00:00Z
pub const END: Timestamp = 1_750_377_600; // 2025-06-20T00:00:00Z
pub const FINALIZE_AT: Timestamp = 1_750_464_000; // 2025-06-21T00:00:00Z
pub const CLAIM_AT: Timestamp = 1_750_953_770; // 2025-06-26T16:02:50Z
pub const FOUR_YEARS: Timestamp = 1461 * 86_400;

pub const SCHOLARSHIP_ID: u64 = 5;
pub const SCHOLARSHIP_NAME: &str = "Academic Scholarship";
pub const DIMENSIONS: [(&str, u32); 4] = [
    ("percentageScore", 60),
    ("researchOutput", 20),
    ("volunteerService", 10),
    ("competitionPerformance", 10),
];
pub const ALICE_SCORES: [u32; 4] = [95, 85, 40, 92];
pub const BOB_SCORES: [u32; 4] = [80, 90, 60, 90];

/// Keypair from `SHA-256(name)` as seed.
pub fn named_key(name: &str) -> KeyPair {
    let seed: [u8; 32] = Sha256::digest(name.as_bytes()).into();
    keygen(&seed).unwrap()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub struct Student {
    pub name: String,
    pub key: KeyPair,
    pub did: Did,
    pub identity_vc: VerifiableCredential,
    pub score_vcs: Vec<VerifiableCredential>,
}

pub struct World {
    pub backend: Arc<OracleBackend>,
    pub ledger: Ledger,
    pub store: ContentStore,
    pub admin: KeyPair,
    pub admin_did: Did,
    pub cas: Vec<CredentialAuthority>,
    pub students: Vec<Student>,
    pub weighted_pk: ProvingKey,
    pub aggregate_pk: ProvingKey,
    pub rng: ChaCha20Rng,
}

pub struct Options {
    pub seed: u64,
    pub bind_student: bool,
    pub dimensions: Vec<(String, u32)>,
    pub tiers: Vec<(String, u32)>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            seed: 7,
            bind_student: false,
            dimensions: DIMENSIONS.iter().map(|(d, w)| (d.to_string(), *w)).collect(),
            tiers: vec![("firstPrize".into(), 1), ("secondPrize".into(), 1)],
        }
    }
}

impl World {
    /// Registered admin and CAs, deployed scholarship, no students yet.
    pub fn deployed(opts: &Options) -> Self {
        let mut rng = rng(opts.seed);
        let backend = Arc::new(OracleBackend::from_rng(&mut rng));
        let dyn_backend: Arc<dyn ProofSystem> = backend.clone();
        let mut ledger = Ledger::new(dyn_backend);
        let admin = named_key("admin");
        let admin_did = ledger.register_did(admin.public, true, REGISTERED_AT).unwrap().did;

        let mut cas = Vec::new();
        let mut dims = Vec::new();
        for (i, (label, weight)) in opts.dimensions.iter().enumerate() {
            let key = named_key(&format!("ca{}", i + 1));
            let did = ledger.register_ca(key.public, REGISTERED_AT).unwrap();
            dims.push(DimensionConfig {
                dimension: label.clone(),
                weight: *weight,
                ca: did,
                ca_public_key: key.public,
            });
            let mut ca = CredentialAuthority::new(label.clone(), key);
            ca.trust_issuer(admin_did.clone());
            cas.push(ca);
        }

        let (weighted_pk, weighted_vk) = backend.setup_weighted();
        let (aggregate_pk, aggregate_vk) = backend.setup_aggregate(dims.len()).unwrap();
        let config = ScholarshipConfig {
            id: SCHOLARSHIP_ID,
            name: SCHOLARSHIP_NAME.into(),
            prize_counts: opts
                .tiers
                .iter()
                .map(|(t, c)| PrizeTier {
                    tier: t.clone(),
                    count: *c,
                })
                .collect(),
            dimensions: dims,
            start_time: START,
            end_time: END,
            weighted_vk,
            aggregate_vk,
            bind_student: opts.bind_student,
        };
        ledger.deploy(config, &admin_did, REGISTERED_AT).unwrap();

        Self {
            backend,
            ledger,
            store: ContentStore::in_memory(),
            admin,
            admin_did,
            cas,
            students: Vec::new(),
            weighted_pk,
            aggregate_pk,
            rng,
        }
    }

    /// Register a student, issue the identity credential and one score
    /// credential per dimension.
    pub fn enroll(&mut self, name: &str, scores: &[u32]) -> usize {
        let key = named_key(name);
        let did = self.ledger.register_did(key.public, true, REGISTERED_AT).unwrap().did;
        let identity_claims = BTreeMap::from([
            ("name".to_string(), ClaimValue::from(name)),
            ("enrolled".to_string(), ClaimValue::Integer(1)),
            ("studentDID".to_string(), ClaimValue::Text(did.to_string())),
        ]);
        let identity_vc = issue_credential(
            &self.admin,
            &did,
            identity_claims,
            IDENTITY_CPTID,
            REGISTERED_AT,
            REGISTERED_AT + FOUR_YEARS,
            &mut self.rng,
        )
        .unwrap();
        let score_vcs = self
            .cas
            .iter()
            .zip(scores)
            .map(|(ca, s)| {
                ca.issue_score_vc(&did, *s, REGISTERED_AT, REGISTERED_AT + FOUR_YEARS, &mut self.rng)
                    .unwrap()
            })
            .collect();
        self.students.push(Student {
            name: name.to_string(),
            key,
            did,
            identity_vc,
            score_vcs,
        });
        self.students.len() - 1
    }

    pub fn request(&self, student: usize, dim: usize) -> AuthorizationRequest {
        let s = &self.students[student];
        let disclosed = disclose(&s.identity_vc, ["studentDID"]).unwrap();
        AuthorizationRequest::new(
            &s.key,
            disclosed,
            &s.score_vcs[dim].id,
            SCHOLARSHIP_ID,
            self.cas[dim].dimension(),
        )
    }

    pub fn tuples(&self, student: usize, now: Timestamp) -> Vec<ProofTuple> {
        (0..self.cas.len())
            .map(|d| {
                self.cas[d]
                    .handle_authorization(
                        &self.request(student, d),
                        self.ledger.state(),
                        self.backend.as_ref(),
                        &self.weighted_pk,
                        now,
                    )
                    .unwrap()
            })
            .collect()
    }

    pub fn application(&self, student: usize, tuples: &[ProofTuple]) -> AggregateApplication {
        build_application(
            self.backend.as_ref(),
            &self.students[student].did,
            SCHOLARSHIP_ID,
            tuples,
            self.ledger.state(),
            &self.aggregate_pk,
        )
        .unwrap()
    }

    pub fn apply(&mut self, student: usize, now: Timestamp) -> AggregateApplication {
        let tuples = self.tuples(student, now);
        let app = self.application(student, &tuples);
        self.ledger.submit_application(&app, now).unwrap();
        app
    }

    pub fn finalize(&mut self, now: Timestamp) -> Vec<AwardeeList> {
        let s = self.ledger.state().scholarship(SCHOLARSHIP_ID).unwrap();
        let (lists, entries) =
            prepare_award_roots(&self.store, &s.applications, &s.config.prize_counts).unwrap();
        let admin = self.admin_did.clone();
        self.ledger.set_award_roots(SCHOLARSHIP_ID, entries, &admin, now).unwrap();
        lists
    }

    pub fn claim(&mut self, student: usize, now: Timestamp) -> VerifiableCredential {
        let s = self.ledger.state().scholarship(SCHOLARSHIP_ID).unwrap();
        let claim = find_claim(s, &self.store, &self.students[student].did).unwrap();
        self.ledger
            .claim_scholarship(SCHOLARSHIP_ID, &claim, &self.admin, now, &mut self.rng)
            .unwrap()
    }
}

pub struct GoldenRun {
    pub world: World,
    pub applications: Vec<AggregateApplication>,
    pub tuples: Vec<Vec<ProofTuple>>,
    pub lists: Vec<AwardeeList>,
    pub vcs: Vec<VerifiableCredential>,
}

/// The full worked example: Alice and Bob apply, the admin finalizes, both
/// claim.
pub fn golden(opts: &Options) -> GoldenRun {
    let mut world = World::deployed(opts);
    let alice = world.enroll("alice", &ALICE_SCORES);
    let bob = world.enroll("bob", &BOB_SCORES);
    let mut applications = Vec::new();
    let mut tuples = Vec::new();
    for s in [alice, bob] {
        let t = world.tuples(s, APPLY_AT);
        let app = world.application(s, &t);
        world.ledger.submit_application(&app, APPLY_AT).unwrap();
        applications.push(app);
        tuples.push(t);
    }
    let lists = world.finalize(FINALIZE_AT);
    let vcs = vec![world.claim(alice, CLAIM_AT), world.claim(bob, CLAIM_AT)];
    GoldenRun {
        world,
        applications,
        tuples,
        lists,
        vcs,
    }
}

/// Every fixed-width encoding of a private score or weighted score that
/// must never appear on the wire: tagged witness form, 4-byte BE, and the
/// hex of each.
pub fn forbidden_encodings(scores: &[u32], weighted: &[u32]) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for &s in scores {
        let mut tagged = b"s".to_vec();
        tagged.extend_from_slice(&s.to_be_bytes());
        out.push((format!("tagged s={s}"), tagged.clone()));
        out.push((format!("hex tagged s={s}"), hex::encode(&tagged).into_bytes()));
    }
    for &v in scores.iter().chain(weighted) {
        let be = v.to_be_bytes();
        out.push((format!("u32be {v}"), be.to_vec()));
        out.push((format!("hex u32be {v}"), hex::encode(be).into_bytes()));
    }
    out
}

pub fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
