//! Key material, signatures, digests and the hybrid envelope.
//!
//! Two disjoint key families exist and are never mixed:
//! - [`SigningKeyPair`] (Ed25519) controls ledger accounts;
//! - [`EncryptionKeyPair`] (X25519) receives [`SealedEnvelope`]s.
//!
//! An envelope wraps a fresh random AES-256-GCM data key under a key-encryption
//! key derived (HKDF-SHA256) from an ephemeral X25519 exchange with the
//! recipient, then encrypts the payload under the data key.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use ed25519_dalek::{Signer, Verifier};
use hkdf::Hkdf;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::ledger::AccountId;

pub const DIGEST_LEN: usize = 32;
pub const USER_HASH_LEN: usize = 16;
/// Largest payload [`seal`] accepts.
pub const MAX_PAYLOAD: usize = 1 << 20;

pub const ENVELOPE_VERSION: u8 = 1;
const WRAP_INFO: &[u8] = b"certchain/envelope/v1/key-wrap";
const EPHEMERAL_LEN: usize = 32;
const TAG_LEN: usize = 16;
const NONCE_LEN: usize = 12;
/// Ephemeral public key followed by the GCM-wrapped 32-byte data key.
const WRAPPED_KEY_LEN: usize = EPHEMERAL_LEN + 32 + TAG_LEN;

pub type Digest256 = [u8; DIGEST_LEN];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    /// Wrong key or tampered envelope; the two are deliberately not distinguished.
    #[error("envelope could not be decrypted")]
    DecryptFailed,
    #[error("payload of {0} bytes exceeds the 1 MiB envelope limit")]
    PayloadTooLarge(usize),
    #[error("malformed key material: {0}")]
    MalformedKey(&'static str),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(#[from] DecodeError),
    #[error("encryption failed")]
    EncryptFailed,
}

/// SHA-256.
pub fn digest256(data: &[u8]) -> Digest256 {
    Sha256::digest(data).into()
}

/// Ed25519 keypair controlling a ledger account.
#[derive(Clone)]
pub struct SigningKeyPair {
    key: ed25519_dalek::SigningKey,
}

impl std::fmt::Debug for SigningKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKeyPair")
            .field("public_key", &hex::encode(self.public_key()))
            .finish_non_exhaustive()
    }
}

impl SigningKeyPair {
    pub fn generate() -> Self {
        Self {
            key: ed25519_dalek::SigningKey::generate(&mut OsRng),
        }
    }

    pub fn from_secret_bytes(secret: &[u8; 32]) -> Self {
        Self {
            key: ed25519_dalek::SigningKey::from_bytes(secret),
        }
    }

    pub fn from_secret_hex(secret: &str) -> Result<Self, CryptoError> {
        let bytes: [u8; 32] =
            hex::FromHex::from_hex(secret).map_err(|_| CryptoError::MalformedKey("signing secret"))?;
        Ok(Self::from_secret_bytes(&bytes))
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }

    pub fn account_id(&self) -> AccountId {
        AccountId(self.public_key())
    }

    pub fn sign(&self, message: &[u8]) -> [u8; 64] {
        self.key.sign(message).to_bytes()
    }
}

/// Verifies an Ed25519 signature. Malformed public keys simply fail.
pub fn verify_signature(public_key: &[u8; 32], message: &[u8], signature: &[u8; 64]) -> bool {
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(public_key) else {
        return false;
    };
    vk.verify(message, &ed25519_dalek::Signature::from_bytes(signature))
        .is_ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncryptionPublicKey(#[serde(with = "hex::serde")] pub [u8; 32]);

impl EncryptionPublicKey {
    /// Digest used as the envelope's recipient hint.
    pub fn fingerprint(&self) -> Digest256 {
        digest256(&self.0)
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub struct EncryptionPrivateKey(#[serde(with = "hex::serde")] [u8; 32]);

impl std::fmt::Debug for EncryptionPrivateKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("EncryptionPrivateKey(..)")
    }
}

impl EncryptionPrivateKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        hex::FromHex::from_hex(s)
            .map(Self)
            .map_err(|_| CryptoError::MalformedKey("encryption private key"))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn public_key(&self) -> EncryptionPublicKey {
        let secret = x25519_dalek::StaticSecret::from(self.0);
        EncryptionPublicKey(x25519_dalek::PublicKey::from(&secret).to_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct EncryptionKeyPair {
    pub public_key: EncryptionPublicKey,
    pub private_key: EncryptionPrivateKey,
}

impl EncryptionKeyPair {
    pub fn generate() -> Self {
        let mut secret = [0u8; 32];
        OsRng.fill_bytes(&mut secret);
        let private_key = EncryptionPrivateKey(secret);
        Self {
            public_key: private_key.public_key(),
            private_key,
        }
    }
}

/// Hybrid-encrypted payload addressed to one [`EncryptionPublicKey`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedEnvelope {
    pub wrapped_key: Vec<u8>,
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
    pub recipient_hint: Digest256,
}

impl Canonical for SealedEnvelope {
    fn encode(&self, w: &mut Writer) {
        w.u8(ENVELOPE_VERSION)
            .bytes(&self.wrapped_key)
            .fixed(&self.nonce)
            .bytes(&self.ciphertext)
            .fixed(&self.tag)
            .fixed(&self.recipient_hint);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let version = r.u8()?;
        if version != ENVELOPE_VERSION {
            return Err(DecodeError::UnknownTag {
                what: "envelope version",
                tag: version,
            });
        }
        Ok(Self {
            wrapped_key: r.bytes()?,
            nonce: r.array()?,
            ciphertext: r.bytes()?,
            tag: r.array()?,
            recipient_hint: r.array()?,
        })
    }
}

impl SealedEnvelope {
    pub fn to_hex(&self) -> String {
        hex::encode(self.to_canonical_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = hex::decode(s).map_err(|_| DecodeError::Invalid("envelope hex"))?;
        Ok(Self::from_canonical_bytes(&bytes)?)
    }

    fn payload_aad(&self) -> Vec<u8> {
        let mut aad = Vec::with_capacity(1 + self.wrapped_key.len() + DIGEST_LEN);
        aad.push(ENVELOPE_VERSION);
        aad.extend_from_slice(&self.recipient_hint);
        aad.extend_from_slice(&self.wrapped_key);
        aad
    }
}

impl Serialize for SealedEnvelope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for SealedEnvelope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

fn key_wrap_cipher(
    shared: &x25519_dalek::SharedSecret,
    ephemeral: &[u8; 32],
    recipient: &EncryptionPublicKey,
) -> Aes256Gcm {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(&recipient.0);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared.as_bytes());
    let mut kek = [0u8; 32];
    hk.expand(WRAP_INFO, &mut kek)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    Aes256Gcm::new(&kek.into())
}

/// Encrypts `payload` so that only the holder of `recipient`'s private key can read it.
pub fn seal(payload: &[u8], recipient: &EncryptionPublicKey) -> Result<SealedEnvelope, CryptoError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(CryptoError::PayloadTooLarge(payload.len()));
    }
    let recipient_hint = recipient.fingerprint();

    let ephemeral = x25519_dalek::EphemeralSecret::random_from_rng(OsRng);
    let ephemeral_pub = x25519_dalek::PublicKey::from(&ephemeral).to_bytes();
    let shared = ephemeral.diffie_hellman(&x25519_dalek::PublicKey::from(recipient.0));
    if !shared.was_contributory() {
        return Err(CryptoError::MalformedKey("low-order recipient key"));
    }

    let mut data_key = [0u8; 32];
    OsRng.fill_bytes(&mut data_key);
    // The wrapping key is single-use, so a fixed nonce is safe here.
    let wrapped = key_wrap_cipher(&shared, &ephemeral_pub, recipient)
        .encrypt(
            Nonce::from_slice(&[0u8; NONCE_LEN]),
            Payload {
                msg: &data_key,
                aad: &recipient_hint,
            },
        )
        .map_err(|_| CryptoError::EncryptFailed)?;
    let mut wrapped_key = ephemeral_pub.to_vec();
    wrapped_key.extend_from_slice(&wrapped);

    let mut nonce = [0u8; NONCE_LEN];
    OsRng.fill_bytes(&mut nonce);
    let mut env = SealedEnvelope {
        wrapped_key,
        nonce,
        ciphertext: Vec::new(),
        tag: [0u8; TAG_LEN],
        recipient_hint,
    };
    let mut sealed = Aes256Gcm::new(&data_key.into())
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: payload,
                aad: &env.payload_aad(),
            },
        )
        .map_err(|_| CryptoError::EncryptFailed)?;
    let tag_start = sealed.len() - TAG_LEN;
    env.tag.copy_from_slice(&sealed[tag_start..]);
    sealed.truncate(tag_start);
    env.ciphertext = sealed;
    Ok(env)
}

/// Authenticates and decrypts an envelope. Every failure is [`CryptoError::DecryptFailed`].
pub fn open(env: &SealedEnvelope, private_key: &EncryptionPrivateKey) -> Result<Vec<u8>, CryptoError> {
    let recipient = private_key.public_key();
    if env.recipient_hint != recipient.fingerprint() || env.wrapped_key.len() != WRAPPED_KEY_LEN {
        return Err(CryptoError::DecryptFailed);
    }
    let mut ephemeral_pub = [0u8; 32];
    ephemeral_pub.copy_from_slice(&env.wrapped_key[..EPHEMERAL_LEN]);
    let secret = x25519_dalek::StaticSecret::from(private_key.0);
    let shared = secret.diffie_hellman(&x25519_dalek::PublicKey::from(ephemeral_pub));
    if !shared.was_contributory() {
        return Err(CryptoError::DecryptFailed);
    }

    let data_key = key_wrap_cipher(&shared, &ephemeral_pub, &recipient)
        .decrypt(
            Nonce::from_slice(&[0u8; NONCE_LEN]),
            Payload {
                msg: &env.wrapped_key[EPHEMERAL_LEN..],
                aad: &env.recipient_hint,
            },
        )
        .map_err(|_| CryptoError::DecryptFailed)?;
    let data_key: [u8; 32] = data_key
        .try_into()
        .map_err(|_| CryptoError::DecryptFailed)?;

    let mut sealed = Vec::with_capacity(env.ciphertext.len() + TAG_LEN);
    sealed.extend_from_slice(&env.ciphertext);
    sealed.extend_from_slice(&env.tag);
    Aes256Gcm::new(&data_key.into())
        .decrypt(
            Nonce::from_slice(&env.nonce),
            Payload {
                msg: &sealed,
                aad: &env.payload_aad(),
            },
        )
        .map_err(|_| CryptoError::DecryptFailed)
}

/// The 16-byte identifier placed in a transfer's ledger memo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserHash(#[serde(with = "hex::serde")] pub [u8; USER_HASH_LEN]);

impl UserHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        hex::FromHex::from_hex(s).ok().map(Self)
    }
}

impl std::fmt::Display for UserHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Canonical preimage of a user hash: length-prefixed test id, then the raw
/// 32-byte source and destination account keys, then the raw 16-byte nonce.
pub fn user_hash_preimage(
    test_id: &str,
    source: &AccountId,
    destination: &AccountId,
    nonce: &[u8; 16],
) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(test_id)
        .fixed(&source.0)
        .fixed(&destination.0)
        .fixed(nonce);
    w.into_bytes()
}

/// First 16 bytes of the digest of the canonical preimage.
pub fn derive_user_hash(
    test_id: &str,
    source: &AccountId,
    destination: &AccountId,
    nonce: &[u8; 16],
) -> UserHash {
    let digest = digest256(&user_hash_preimage(test_id, source, destination, nonce));
    let mut out = [0u8; USER_HASH_LEN];
    out.copy_from_slice(&digest[..USER_HASH_LEN]);
    UserHash(out)
}

pub fn random_nonce() -> [u8; 16] {
    let mut nonce = [0u8; 16];
    OsRng.fill_bytes(&mut nonce);
    nonce
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn sign_verify_round_trip_and_foreign_key_rejects() {
        let a = SigningKeyPair::generate();
        let b = SigningKeyPair::generate();
        assert_ne!(a.public_key(), b.public_key());
        let sig = a.sign(b"payment");
        assert!(verify_signature(&a.public_key(), b"payment", &sig));
        assert!(!verify_signature(&b.public_key(), b"payment", &sig));
        assert!(!verify_signature(&a.public_key(), b"paymenT", &sig));
    }

    #[test]
    fn signing_key_survives_secret_export() {
        let a = SigningKeyPair::generate();
        let b = SigningKeyPair::from_secret_hex(&hex::encode(a.secret_bytes())).unwrap();
        assert_eq!(a.public_key(), b.public_key());
    }

    #[test]
    fn digest_of_empty_string_matches_published_vector() {
        assert_eq!(
            hex::encode(digest256(b"")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hex::encode(digest256(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn one_byte_change_changes_digest() {
        let mut rng = rand::thread_rng();
        for _ in 0..100 {
            let mut data = vec![0u8; rng.gen_range(1..256)];
            rng.fill(&mut data[..]);
            let mut other = data.clone();
            let i = rng.gen_range(0..other.len());
            other[i] ^= rng.gen_range(1..=255u8);
            assert_ne!(digest256(&data), digest256(&other));
        }
    }

    #[test]
    fn envelope_round_trips_and_rejects_foreign_key() {
        let a = EncryptionKeyPair::generate();
        let b = EncryptionKeyPair::generate();
        let payload = vec![7u8; 10 * 1024];
        let env = seal(&payload, &a.public_key).unwrap();
        assert_eq!(open(&env, &a.private_key).unwrap(), payload);
        assert_eq!(open(&env, &b.private_key), Err(CryptoError::DecryptFailed));
    }

    #[test]
    fn empty_payload_seals() {
        let a = EncryptionKeyPair::generate();
        let env = seal(b"", &a.public_key).unwrap();
        assert!(env.ciphertext.is_empty());
        assert_eq!(open(&env, &a.private_key).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn oversized_payload_is_refused() {
        let a = EncryptionKeyPair::generate();
        let payload = vec![0u8; MAX_PAYLOAD + 1];
        assert_eq!(
            seal(&payload, &a.public_key),
            Err(CryptoError::PayloadTooLarge(MAX_PAYLOAD + 1))
        );
        let payload = vec![1u8; MAX_PAYLOAD];
        let env = seal(&payload, &a.public_key).unwrap();
        assert_eq!(open(&env, &a.private_key).unwrap(), payload);
    }

    #[test]
    fn sealing_is_randomized() {
        let a = EncryptionKeyPair::generate();
        let e1 = seal(b"same", &a.public_key).unwrap();
        let e2 = seal(b"same", &a.public_key).unwrap();
        assert_ne!(e1.wrapped_key, e2.wrapped_key);
        assert_ne!(e1.nonce, e2.nonce);
        assert_ne!(e1.ciphertext, e2.ciphertext);
    }

    #[test]
    fn ciphertext_flip_fails() {
        let a = EncryptionKeyPair::generate();
        let mut env = seal(b"negative", &a.public_key).unwrap();
        env.ciphertext[0] ^= 1;
        assert_eq!(open(&env, &a.private_key), Err(CryptoError::DecryptFailed));
    }

    #[test]
    fn wire_format_layout() {
        let a = EncryptionKeyPair::generate();
        let env = seal(b"abc", &a.public_key).unwrap();
        let bytes = env.to_canonical_bytes();
        // version, len+wrapped(80), nonce(12), len+ct(3), tag(16), hint(32)
        assert_eq!(bytes.len(), 1 + 4 + 80 + 12 + 4 + 3 + 16 + 32);
        assert_eq!(bytes[0], ENVELOPE_VERSION);
        assert_eq!(&bytes[bytes.len() - 32..], &a.public_key.fingerprint());
        assert_eq!(SealedEnvelope::from_canonical_bytes(&bytes).unwrap(), env);
    }

    #[test]
    fn user_hash_is_prefix_of_digest() {
        let src = AccountId([1u8; 32]);
        let dst = AccountId([2u8; 32]);
        let nonce = [3u8; 16];
        let h = derive_user_hash("test-1", &src, &dst, &nonce);
        let full = digest256(&user_hash_preimage("test-1", &src, &dst, &nonce));
        assert_eq!(h.0, full[..16]);
        assert_eq!(h, derive_user_hash("test-1", &src, &dst, &nonce));
        assert_ne!(h, derive_user_hash("test-1", &src, &dst, &random_nonce()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn envelope_round_trip_any_payload(payload in proptest::collection::vec(any::<u8>(), 0..4096)) {
            let k = EncryptionKeyPair::generate();
            let env = seal(&payload, &k.public_key).unwrap();
            let wire = SealedEnvelope::from_canonical_bytes(&env.to_canonical_bytes()).unwrap();
            prop_assert_eq!(open(&wire, &k.private_key).unwrap(), payload);
        }
    }
}
