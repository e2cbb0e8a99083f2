//! Hashing, fixed-width encodings and secp256k1 signatures shared by every
//! other module.
//!
//! All protocol hashes are SHA-256 over a one-byte [`DomainTag`] followed by
//! the payload. Signatures are deterministic (RFC 6979) ECDSA over secp256k1
//! and always cover a 32-byte [`Digest`], never raw message bytes.

use std::fmt;
use std::str::FromStr;

use k256::ecdsa::signature::hazmat::{PrehashSigner, PrehashVerifier};
use k256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 33;
pub const SIGNATURE_LEN: usize = 64;
pub const SEED_LEN: usize = 32;

/// Upper bound of a raw per-dimension score.
pub const MAX_SCORE: u32 = 100;
/// Upper bound of a weight expressed in percent.
pub const MAX_WEIGHT: u32 = 100;
/// Upper bound of a weighted score (and therefore of a total).
pub const MAX_WEIGHTED_SCORE: u32 = MAX_SCORE * MAX_WEIGHT;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("unknown domain tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("{field} = {value} is out of range 0..={max}")]
    OutOfRange {
        field: &'static str,
        value: u64,
        max: u64,
    },
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("malformed key material")]
    MalformedKey,
    #[error("invalid hex: {0}")]
    Hex(String),
}

/// A 32-byte SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().map_err(|_| CryptoError::Length {
            expected: DIGEST_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl FromStr for Digest {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = decode_hex(s)?;
        Self::from_slice(&bytes)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Hash context prefixes. The byte values are part of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DomainTag {
    Leaf = 0x00,
    Node = 0x01,
    TupleHash = 0x02,
    Claim = 0x03,
    Credential = 0x04,
}

impl DomainTag {
    pub const ALL: [DomainTag; 5] = [
        DomainTag::Leaf,
        DomainTag::Node,
        DomainTag::TupleHash,
        DomainTag::Claim,
        DomainTag::Credential,
    ];

    pub fn byte(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for DomainTag {
    type Error = CryptoError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::ALL
            .into_iter()
            .find(|t| t.byte() == value)
            .ok_or(CryptoError::UnknownTag(value))
    }
}

/// `SHA-256(tag || payload)`.
pub fn hash_tagged(tag: DomainTag, payload: &[u8]) -> Digest {
    hash_tagged_parts(tag, &[payload])
}

/// Same as [`hash_tagged`] over the concatenation of `parts`.
pub fn hash_tagged_parts(tag: DomainTag, parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update([tag.byte()]);
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

/// [`hash_tagged`] for a tag supplied as a raw byte, e.g. read off the wire.
pub fn hash_tagged_raw(tag: u8, payload: &[u8]) -> Result<Digest, CryptoError> {
    Ok(hash_tagged(DomainTag::try_from(tag)?, payload))
}

/// 2-byte big-endian weight followed by 4-byte big-endian weighted score.
pub fn encode_weighted(weight: u32, weighted_score: u32) -> Result<[u8; 6], CryptoError> {
    check_range("w", weight, MAX_WEIGHT)?;
    check_range("s_w", weighted_score, MAX_WEIGHTED_SCORE)?;
    let mut out = [0u8; 6];
    out[..2].copy_from_slice(&(weight as u16).to_be_bytes());
    out[2..].copy_from_slice(&weighted_score.to_be_bytes());
    Ok(out)
}

pub(crate) fn check_range(field: &'static str, value: u32, max: u32) -> Result<(), CryptoError> {
    if value > max {
        return Err(CryptoError::OutOfRange {
            field,
            value: value.into(),
            max: max.into(),
        });
    }
    Ok(())
}

/// SEC1 compressed secp256k1 verification key.
///
/// Only the length is checked on construction; curve membership is checked
/// by [`PublicKey::is_valid`] and implicitly by [`verify`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; PUBLIC_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::Length {
            expected: PUBLIC_KEY_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn is_valid(&self) -> bool {
        VerifyingKey::from_sec1_bytes(&self.0).is_ok()
    }
}

impl FromStr for PublicKey {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_slice(&decode_hex(s)?)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Signing key. Deliberately not serializable.
#[derive(Clone)]
pub struct SecretKey(SigningKey);

impl SecretKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        SigningKey::from_slice(bytes)
            .map(Self)
            .map_err(|_| CryptoError::MalformedKey)
    }

    pub fn public_key(&self) -> PublicKey {
        let point = self.0.verifying_key().to_encoded_point(true);
        PublicKey::from_slice(point.as_bytes()).expect("compressed point is 33 bytes")
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

impl KeyPair {
    pub fn from_secret(secret: SecretKey) -> Self {
        let public = secret.public_key();
        Self { secret, public }
    }

    pub fn sign(&self, digest: &Digest) -> Signature {
        sign(&self.secret, digest)
    }
}

/// Derive a keypair deterministically from 32 bytes of entropy.
///
/// The scalar is `SHA-256("keygen" || seed || counter)` for the first counter
/// value that yields a valid non-zero scalar.
pub fn keygen(seed: &[u8]) -> Result<KeyPair, CryptoError> {
    if seed.len() != SEED_LEN {
        return Err(CryptoError::Length {
            expected: SEED_LEN,
            actual: seed.len(),
        });
    }
    for counter in 0u32.. {
        let candidate: [u8; 32] = Sha256::new()
            .chain_update(b"keygen")
            .chain_update(seed)
            .chain_update(counter.to_be_bytes())
            .finalize()
            .into();
        if let Ok(secret) = SecretKey::from_bytes(&candidate) {
            return Ok(KeyPair::from_secret(secret));
        }
    }
    unreachable!("scalar search exhausted")
}

/// 64-byte compact `r || s` signature. Arbitrary bytes are representable so
/// that malformed values coming off the wire verify as `false`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(Vec<u8>);

impl Signature {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Self(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl FromStr for Signature {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self(decode_hex(s)?))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

pub fn sign(secret: &SecretKey, digest: &Digest) -> Signature {
    let sig: EcdsaSignature = secret
        .0
        .sign_prehash(digest.as_bytes())
        .expect("32-byte prehash is always accepted");
    Signature(sig.to_bytes().to_vec())
}

pub fn verify(public: &PublicKey, digest: &Digest, sig: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_sec1_bytes(public.as_bytes()) else {
        return false;
    };
    let Ok(sig) = EcdsaSignature::from_slice(sig.as_bytes()) else {
        return false;
    };
    key.verify_prehash(digest.as_bytes(), &sig).is_ok()
}

fn decode_hex(s: &str) -> Result<Vec<u8>, CryptoError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    hex::decode(s).map_err(|e| CryptoError::Hex(e.to_string()))
}

macro_rules! hex_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_serde!(Digest);
hex_serde!(PublicKey);
hex_serde!(Signature);
