use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, SecondsFormat, Utc};
use rand::{Rng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Did, IdentityError};
use crate::crypto::{self, hash_tagged_parts, Digest, DomainTag, KeyPair, PublicKey, Signature};
use crate::Timestamp;

pub const SALT_LEN: usize = 5;
pub const PROOF_TYPE: &str = "Secp256k1";
const SALT_ALPHABET: &[u8; 62] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

/// A claim value. Numbers keep the type they were issued with, so `81.0`
/// and `81` are distinct values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClaimValue {
    Integer(i64),
    Decimal(f64),
    Text(String),
}

impl ClaimValue {
    /// Type-tagged canonical bytes: `'s' || utf8` for strings, `'n' ||`
    /// shortest decimal rendering for numbers.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let (tag, body) = match self {
            ClaimValue::Text(s) => (b's', s.clone()),
            ClaimValue::Integer(i) => (b'n', i.to_string()),
            ClaimValue::Decimal(f) => (b'n', serde_json::to_string(f).unwrap_or_default()),
        };
        let mut out = Vec::with_capacity(body.len() + 1);
        out.push(tag);
        out.extend_from_slice(body.as_bytes());
        out
    }

    fn is_well_formed(&self) -> bool {
        match self {
            ClaimValue::Decimal(f) => f.is_finite(),
            _ => true,
        }
    }
}

impl From<&str> for ClaimValue {
    fn from(s: &str) -> Self {
        ClaimValue::Text(s.to_string())
    }
}

impl From<String> for ClaimValue {
    fn from(s: String) -> Self {
        ClaimValue::Text(s)
    }
}

impl From<i64> for ClaimValue {
    fn from(i: i64) -> Self {
        ClaimValue::Integer(i)
    }
}

impl From<f64> for ClaimValue {
    fn from(f: f64) -> Self {
        ClaimValue::Decimal(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifiableCredential {
    pub id: String,
    pub cptid: u32,
    pub issuer: Did,
    pub subject: Did,
    pub claims: BTreeMap<String, ClaimValue>,
    pub salts: BTreeMap<String, String>,
    pub issuance: Timestamp,
    pub expiration: Timestamp,
    pub signature: Signature,
    pub proof_type: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisclosedClaim {
    Revealed { value: ClaimValue, salt: String },
    Hidden { digest: Digest },
}

/// A credential in which each claim is either revealed with its salt or
/// replaced by its per-claim digest.
#[derive(Debug, Clone, PartialEq)]
pub struct DisclosedCredential {
    pub id: String,
    pub cptid: u32,
    pub issuer: Did,
    pub subject: Did,
    pub claims: BTreeMap<String, DisclosedClaim>,
    pub issuance: Timestamp,
    pub expiration: Timestamp,
    pub signature: Signature,
    pub proof_type: String,
}

impl DisclosedCredential {
    pub fn revealed(&self, key: &str) -> Option<&ClaimValue> {
        match self.claims.get(key)? {
            DisclosedClaim::Revealed { value, .. } => Some(value),
            DisclosedClaim::Hidden { .. } => None,
        }
    }
}

impl VerifiableCredential {
    /// Every claim revealed.
    pub fn to_disclosed(&self) -> Result<DisclosedCredential, IdentityError> {
        let mut claims = BTreeMap::new();
        for (key, value) in &self.claims {
            let salt = self
                .salts
                .get(key)
                .ok_or_else(|| IdentityError::MissingSalt(key.clone()))?;
            claims.insert(
                key.clone(),
                DisclosedClaim::Revealed {
                    value: value.clone(),
                    salt: salt.clone(),
                },
            );
        }
        Ok(DisclosedCredential {
            id: self.id.clone(),
            cptid: self.cptid,
            issuer: self.issuer.clone(),
            subject: self.subject.clone(),
            claims,
            issuance: self.issuance,
            expiration: self.expiration,
            signature: self.signature.clone(),
            proof_type: self.proof_type.clone(),
        })
    }

    pub fn digest(&self) -> Result<Digest, IdentityError> {
        credential_digest(&self.to_disclosed()?)
    }
}

fn length_prefixed(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len() + 4);
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
    out
}

/// `Hash_CLAIM(key || salt || canonical value)`, each part length-prefixed.
pub fn claim_digest(key: &str, salt: &str, value: &ClaimValue) -> Digest {
    hash_tagged_parts(
        DomainTag::Claim,
        &[
            &length_prefixed(key.as_bytes()),
            &length_prefixed(salt.as_bytes()),
            &length_prefixed(&value.canonical_bytes()),
        ],
    )
}

/// `Hash_CREDENTIAL(issuer || cptid || issuance || expiration || subject ||
/// claim digests in key order)`. Hidden claims contribute their carried digest.
pub fn credential_digest(dc: &DisclosedCredential) -> Result<Digest, IdentityError> {
    let mut payload = Vec::new();
    payload.extend(length_prefixed(dc.issuer.to_string().as_bytes()));
    payload.extend_from_slice(&dc.cptid.to_be_bytes());
    payload.extend_from_slice(&dc.issuance.to_be_bytes());
    payload.extend_from_slice(&dc.expiration.to_be_bytes());
    payload.extend(length_prefixed(dc.subject.to_string().as_bytes()));
    payload.extend_from_slice(&(dc.claims.len() as u32).to_be_bytes());
    for (key, claim) in &dc.claims {
        let d = match claim {
            DisclosedClaim::Revealed { value, salt } => {
                if salt.is_empty() {
                    return Err(IdentityError::MissingSalt(key.clone()));
                }
                claim_digest(key, salt, value)
            }
            DisclosedClaim::Hidden { digest } => *digest,
        };
        payload.extend_from_slice(d.as_bytes());
    }
    Ok(crypto::hash_tagged(DomainTag::Credential, &payload))
}

fn random_salt<R: RngCore + ?Sized>(rng: &mut R) -> String {
    (0..SALT_LEN)
        .map(|_| SALT_ALPHABET[rng.gen_range(0..SALT_ALPHABET.len())] as char)
        .collect()
}

fn random_id<R: RngCore + ?Sized>(rng: &mut R) -> String {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    uuid::Builder::from_random_bytes(bytes).into_uuid().to_string()
}

/// Issue a credential with fresh base62 salts drawn from `rng`.
pub fn issue_credential<R: RngCore + ?Sized>(
    issuer: &KeyPair,
    subject: &Did,
    claims: BTreeMap<String, ClaimValue>,
    cptid: u32,
    issuance: Timestamp,
    expiration: Timestamp,
    rng: &mut R,
) -> Result<VerifiableCredential, IdentityError> {
    if claims.is_empty() {
        return Err(IdentityError::EmptyClaims);
    }
    if expiration <= issuance {
        return Err(IdentityError::InvalidValidity);
    }
    if let Some((key, _)) = claims.iter().find(|(k, v)| k.is_empty() || !v.is_well_formed()) {
        return Err(IdentityError::InvalidClaim(key.clone()));
    }
    let id = random_id(rng);
    let salts = claims.keys().map(|k| (k.clone(), random_salt(rng))).collect();
    let mut vc = VerifiableCredential {
        id,
        cptid,
        issuer: Did::for_key(&issuer.public),
        subject: subject.clone(),
        claims,
        salts,
        issuance,
        expiration,
        signature: Signature::from_bytes(Vec::new()),
        proof_type: PROOF_TYPE.to_string(),
    };
    vc.signature = issuer.sign(&vc.digest()?);
    Ok(vc)
}

/// Signature over the credential digest, issuer/key binding, and
/// `issuance <= now <= expiration`.
pub fn verify_credential(dc: &DisclosedCredential, issuer_key: &PublicKey, now: Timestamp) -> bool {
    if dc.proof_type != PROOF_TYPE || !dc.issuer.is_controlled_by(issuer_key) {
        return false;
    }
    if now < dc.issuance || now > dc.expiration {
        return false;
    }
    match credential_digest(dc) {
        Ok(d) => crypto::verify(issuer_key, &d, &dc.signature),
        Err(_) => false,
    }
}

/// Reveal exactly the claims in `reveal`; the rest become digests.
pub fn disclose<'a, I>(vc: &VerifiableCredential, reveal: I) -> Result<DisclosedCredential, IdentityError>
where
    I: IntoIterator<Item = &'a str>,
{
    let reveal: BTreeSet<&str> = reveal.into_iter().collect();
    if let Some(unknown) = reveal.iter().find(|k| !vc.claims.contains_key(**k)) {
        return Err(IdentityError::UnknownClaim(unknown.to_string()));
    }
    let mut dc = vc.to_disclosed()?;
    for (key, claim) in dc.claims.iter_mut() {
        if reveal.contains(key.as_str()) {
            continue;
        }
        if let DisclosedClaim::Revealed { value, salt } = claim {
            *claim = DisclosedClaim::Hidden {
                digest: claim_digest(key, salt, value),
            };
        }
    }
    Ok(dc)
}

/// RFC 3339 UTC rendering of a logical timestamp, to the second.
pub fn rfc3339(ts: Timestamp) -> String {
    i64::try_from(ts)
        .ok()
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_default()
}

pub fn parse_rfc3339(s: &str) -> Option<Timestamp> {
    let dt = DateTime::parse_from_rfc3339(s).ok()?;
    u64::try_from(dt.timestamp()).ok()
}

// Wire form, mirroring the familiar credential JSON layout.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireClaim {
    Hidden(HiddenClaim),
    Value(ClaimValue),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HiddenClaim {
    digest: Digest,
}

#[derive(Serialize, Deserialize)]
struct WireProof {
    created: String,
    creator: Did,
    salt: BTreeMap<String, String>,
    #[serde(rename = "signatureValue")]
    signature_value: Signature,
    #[serde(rename = "type")]
    proof_type: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireCredential {
    claim: BTreeMap<String, WireClaim>,
    cptid: u32,
    expiration_date: String,
    id: String,
    issuance_date: String,
    issuer: Did,
    subject: Did,
    proof: WireProof,
    #[serde(rename = "type")]
    kind: Vec<String>,
}

impl Serialize for DisclosedCredential {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut claim = BTreeMap::new();
        let mut salt = BTreeMap::new();
        for (key, c) in &self.claims {
            match c {
                DisclosedClaim::Revealed { value, salt: s } => {
                    claim.insert(key.clone(), WireClaim::Value(value.clone()));
                    salt.insert(key.clone(), s.clone());
                }
                DisclosedClaim::Hidden { digest } => {
                    claim.insert(key.clone(), WireClaim::Hidden(HiddenClaim { digest: *digest }));
                }
            }
        }
        WireCredential {
            claim,
            cptid: self.cptid,
            expiration_date: rfc3339(self.expiration),
            id: self.id.clone(),
            issuance_date: rfc3339(self.issuance),
            issuer: self.issuer.clone(),
            subject: self.subject.clone(),
            proof: WireProof {
                created: rfc3339(self.issuance),
                creator: self.issuer.clone(),
                salt,
                signature_value: self.signature.clone(),
                proof_type: self.proof_type.clone(),
            },
            kind: vec!["VerifiableCredential".into(), "original".into()],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DisclosedCredential {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = WireCredential::deserialize(deserializer)?;
        let mut salts = wire.proof.salt;
        let mut claims = BTreeMap::new();
        for (key, c) in wire.claim {
            let entry = match c {
                WireClaim::Hidden(h) => DisclosedClaim::Hidden { digest: h.digest },
                WireClaim::Value(value) => {
                    let salt = salts
                        .remove(&key)
                        .ok_or_else(|| D::Error::custom(format!("claim {key:?} has no salt")))?;
                    DisclosedClaim::Revealed { value, salt }
                }
            };
            claims.insert(key, entry);
        }
        if let Some(orphan) = salts.keys().next() {
            return Err(D::Error::custom(format!("salt for unknown claim {orphan:?}")));
        }
        let issuance = parse_rfc3339(&wire.issuance_date).ok_or_else(|| D::Error::custom("bad issuanceDate"))?;
        let expiration =
            parse_rfc3339(&wire.expiration_date).ok_or_else(|| D::Error::custom("bad expirationDate"))?;
        Ok(DisclosedCredential {
            id: wire.id,
            cptid: wire.cptid,
            issuer: wire.issuer,
            subject: wire.subject,
            claims,
            issuance,
            expiration,
            signature: wire.proof.signature_value,
            proof_type: wire.proof.proof_type,
        })
    }
}

impl Serialize for VerifiableCredential {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_disclosed()
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VerifiableCredential {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dc = DisclosedCredential::deserialize(deserializer)?;
        let mut claims = BTreeMap::new();
        let mut salts = BTreeMap::new();
        for (key, c) in dc.claims {
            match c {
                DisclosedClaim::Revealed { value, salt } => {
                    salts.insert(key.clone(), salt);
                    claims.insert(key, value);
                }
                DisclosedClaim::Hidden { .. } => {
                    return Err(serde::de::Error::custom(format!(
                        "claim {key:?} is hidden; a full credential reveals every claim"
                    )))
                }
            }
        }
        Ok(VerifiableCredential {
            id: dc.id,
            cptid: dc.cptid,
            issuer: dc.issuer,
            subject: dc.subject,
            claims,
            salts,
            issuance: dc.issuance,
            expiration: dc.expiration,
            signature: dc.signature,
            proof_type: dc.proof_type,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    const ISSUED: Timestamp = 1_750_953_770;
    const EXPIRES: Timestamp = 1_877_184_170;

    fn claims() -> BTreeMap<String, ClaimValue> {
        BTreeMap::from([
            ("applyScore".to_string(), ClaimValue::from(87.2)),
            ("level".to_string(), ClaimValue::from("firstPrize")),
            ("scholarshipID".to_string(), ClaimValue::from(5i64)),
        ])
    }

    fn issue(seed: u64) -> (KeyPair, VerifiableCredential) {
        let issuer = keygen(&[7u8; 32]).unwrap();
        let subject = Did::for_key(&keygen(&[8u8; 32]).unwrap().public);
        let mut rng = StdRng::seed_from_u64(seed);
        let vc = issue_credential(&issuer, &subject, claims(), 1014, ISSUED, EXPIRES, &mut rng).unwrap();
        (issuer, vc)
    }

    #[test]
    fn salts_are_five_base62_chars() {
        let (_, vc) = issue(1);
        assert_eq!(vc.salts.len(), vc.claims.len());
        for salt in vc.salts.values() {
            assert_eq!(salt.len(), SALT_LEN);
            assert!(salt.bytes().all(|b| b.is_ascii_alphanumeric()));
        }
    }

    #[test]
    fn deterministic_with_seeded_rng() {
        let a = serde_json::to_vec(&issue(42).1).unwrap();
        let b = serde_json::to_vec(&issue(42).1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn numbers_render_shortest() {
        assert_eq!(ClaimValue::from(87.2).canonical_bytes(), b"n87.2");
        assert_eq!(ClaimValue::from(81.0).canonical_bytes(), b"n81.0");
        assert_eq!(ClaimValue::from(5i64).canonical_bytes(), b"n5");
        assert_eq!(ClaimValue::from("5").canonical_bytes(), b"s5");
    }

    #[test]
    fn full_and_disclosed_digests_agree() {
        let (_, vc) = issue(3);
        let full = vc.to_disclosed().unwrap();
        assert_eq!(credential_digest(&full).unwrap(), vc.digest().unwrap());
        for key in vc.claims.keys() {
            let others: Vec<&str> = vc.claims.keys().filter(|k| *k != key).map(String::as_str).collect();
            let dc = disclose(&vc, others).unwrap();
            assert_eq!(credential_digest(&dc).unwrap(), vc.digest().unwrap());
        }
    }

    #[test]
    fn salt_change_changes_digest() {
        let (_, mut vc) = issue(4);
        let before = vc.digest().unwrap();
        let salt = vc.salts.get_mut("level").unwrap();
        let first = salt.remove(0);
        salt.insert(0, if first == 'A' { 'B' } else { 'A' });
        assert_ne!(vc.digest().unwrap(), before);
    }

    #[test]
    fn verification_window_and_tamper() {
        let (issuer, vc) = issue(5);
        let dc = disclose(&vc, ["level"]).unwrap();
        assert!(verify_credential(&dc, &issuer.public, ISSUED));
        assert!(verify_credential(&dc, &issuer.public, EXPIRES));
        assert!(!verify_credential(&dc, &issuer.public, EXPIRES + 1));
        assert!(!verify_credential(&dc, &issuer.public, ISSUED - 1));

        let mut tampered = dc.clone();
        if let Some(DisclosedClaim::Revealed { value, .. }) = tampered.claims.get_mut("level") {
            *value = ClaimValue::from("secondPrize");
        }
        assert!(!verify_credential(&tampered, &issuer.public, ISSUED));

        let stranger = keygen(&[9u8; 32]).unwrap();
        assert!(!verify_credential(&dc, &stranger.public, ISSUED));
    }

    #[test]
    fn issuance_preconditions() {
        let issuer = keygen(&[7u8; 32]).unwrap();
        let subject = Did::for_key(&issuer.public);
        let mut rng = StdRng::seed_from_u64(0);
        assert_eq!(
            issue_credential(&issuer, &subject, BTreeMap::new(), 1, 0, 10, &mut rng).unwrap_err(),
            IdentityError::EmptyClaims
        );
        assert_eq!(
            issue_credential(&issuer, &subject, claims(), 1, 10, 10, &mut rng).unwrap_err(),
            IdentityError::InvalidValidity
        );
        let nan = BTreeMap::from([("x".to_string(), ClaimValue::from(f64::NAN))]);
        assert!(matches!(
            issue_credential(&issuer, &subject, nan, 1, 0, 10, &mut rng),
            Err(IdentityError::InvalidClaim(_))
        ));
    }

    #[test]
    fn unknown_disclosure_key_rejected() {
        let (_, vc) = issue(6);
        assert_eq!(
            disclose(&vc, ["gpa"]).unwrap_err(),
            IdentityError::UnknownClaim("gpa".into())
        );
    }

    #[test]
    fn wire_shape_and_round_trip() {
        let (issuer, vc) = issue(7);
        let json: serde_json::Value = serde_json::to_value(&vc).unwrap();
        assert_eq!(json["claim"]["applyScore"], serde_json::json!(87.2));
        assert_eq!(json["cptid"], 1014);
        assert_eq!(json["issuanceDate"], "2025-06-26T16:02:50Z");
        assert_eq!(json["proof"]["type"], "Secp256k1");
        assert_eq!(json["proof"]["salt"].as_object().unwrap().len(), 3);
        let back: VerifiableCredential = serde_json::from_value(json).unwrap();
        assert_eq!(back, vc);

        let dc = disclose(&vc, ["level"]).unwrap();
        let text = serde_json::to_string(&dc).unwrap();
        let parsed: DisclosedCredential = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, dc);
        assert!(verify_credential(&parsed, &issuer.public, ISSUED));
        assert!(serde_json::from_str::<VerifiableCredential>(&text).is_err());
    }

    #[test]
    fn hidden_claims_leak_neither_value_nor_salt() {
        let (_, vc) = issue(8);
        let dc = disclose(&vc, ["level"]).unwrap();
        let text = serde_json::to_string(&dc).unwrap();
        assert!(!text.contains("87.2"));
        assert!(!text.contains(&vc.salts["applyScore"]));
        assert!(!text.contains(&vc.salts["scholarshipID"]));
        assert!(text.contains("firstPrize"));
    }
}
