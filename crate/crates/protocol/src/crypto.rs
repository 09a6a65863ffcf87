//! Device keys, hybrid encryption of recordings, signatures and password digests.
//!
//! A device key is a pair: an X25519 key that receives wrapped sample keys and
//! an Ed25519 key that signs verdicts. The public half travels as 64 bytes,
//! X25519 first.
//!
//! Sealing a payload for a device:
//!
//! 1. draw a fresh AES-256 key `K` and a 12-byte nonce, encrypt the payload
//!    with AES-256-GCM;
//! 2. draw an ephemeral X25519 key `e`, derive `KEK = HKDF-SHA256(ikm =
//!    X25519(e, device), salt = e_pub ‖ device_pub, info = "earshot key wrap")`;
//! 3. `wrapped_key = e_pub ‖ AES-256-GCM(KEK, nonce = 0¹², K)`.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use argon2::password_hash::{PasswordHash, PasswordHasher as _, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::wire::{b64_decode, b64_encode, EncryptedSample};
use crate::{ProtocolError, Result};

pub const PUBLIC_KEY_LEN: usize = 64;
pub const WRAPPED_KEY_LEN: usize = 32 + 32 + 16;
pub const NONCE_LEN: usize = 12;

const WRAP_INFO: &[u8] = b"earshot key wrap";
const VERDICT_DOMAIN: &[u8] = b"earshot verdict v1\0";
const HELLO_DOMAIN: &[u8] = b"earshot hello v1\0";

/// Private half of a device identity. Never serialized onto the wire.
#[derive(Clone)]
pub struct DeviceKeys {
    agreement: StaticSecret,
    signing: SigningKey,
}

impl std::fmt::Debug for DeviceKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeviceKeys")
            .field("public", &self.public().to_base64())
            .finish_non_exhaustive()
    }
}

impl DeviceKeys {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let agreement = StaticSecret::from(seed);
        rng.fill_bytes(&mut seed);
        let signing = SigningKey::from_bytes(&seed);
        Self { agreement, signing }
    }

    /// Secret bytes for local persistence: X25519 scalar then Ed25519 seed.
    pub fn to_secret_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.agreement.to_bytes());
        out[32..].copy_from_slice(&self.signing.to_bytes());
        out
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self> {
        let bytes: &[u8; 64] = bytes
            .try_into()
            .map_err(|_| ProtocolError::InvalidKey(format!("{} secret bytes", bytes.len())))?;
        let mut a = [0u8; 32];
        let mut s = [0u8; 32];
        a.copy_from_slice(&bytes[..32]);
        s.copy_from_slice(&bytes[32..]);
        Ok(Self {
            agreement: StaticSecret::from(a),
            signing: SigningKey::from_bytes(&s),
        })
    }

    pub fn public(&self) -> DevicePublicKey {
        DevicePublicKey {
            agreement: PublicKey::from(&self.agreement),
            verifying: self.signing.verifying_key(),
        }
    }

    /// Unwraps the sample key and decrypts the payload.
    pub fn open(&self, es: &EncryptedSample) -> Result<Vec<u8>> {
        if es.wrapped_key.len() != WRAPPED_KEY_LEN || es.nonce.len() != NONCE_LEN {
            return Err(ProtocolError::DecryptFail);
        }
        let mut eph = [0u8; 32];
        eph.copy_from_slice(&es.wrapped_key[..32]);
        let eph = PublicKey::from(eph);
        let shared = self.agreement.diffie_hellman(&eph);
        if !shared.was_contributory() {
            return Err(ProtocolError::DecryptFail);
        }
        let kek = wrap_key(shared.as_bytes(), &eph, &self.public().agreement);
        let key = Aes256Gcm::new(&kek.into())
            .decrypt(Nonce::from_slice(&[0u8; NONCE_LEN]), &es.wrapped_key[32..])
            .map_err(|_| ProtocolError::DecryptFail)?;
        let key: [u8; 32] = key.try_into().map_err(|_| ProtocolError::DecryptFail)?;
        Aes256Gcm::new(&key.into())
            .decrypt(Nonce::from_slice(&es.nonce), es.ciphertext.as_slice())
            .map_err(|_| ProtocolError::DecryptFail)
    }

    pub fn sign_verdict(
        &self,
        session_id: &str,
        accepted: bool,
        reason: &str,
        score: Option<f64>,
    ) -> String {
        let msg = verdict_bytes(session_id, accepted, reason, score);
        b64_encode(&self.signing.sign(&msg).to_bytes())
    }

    pub fn sign_hello(&self, username: &str, timestamp: i64) -> String {
        b64_encode(
            &self
                .signing
                .sign(&hello_bytes(username, timestamp))
                .to_bytes(),
        )
    }
}

/// Public half of a device identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DevicePublicKey {
    agreement: PublicKey,
    verifying: VerifyingKey,
}

impl DevicePublicKey {
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out[..32].copy_from_slice(self.agreement.as_bytes());
        out[32..].copy_from_slice(self.verifying.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PUBLIC_KEY_LEN {
            return Err(ProtocolError::InvalidKey(format!(
                "{} public key bytes",
                bytes.len()
            )));
        }
        let mut a = [0u8; 32];
        let mut v = [0u8; 32];
        a.copy_from_slice(&bytes[..32]);
        v.copy_from_slice(&bytes[32..]);
        let verifying =
            VerifyingKey::from_bytes(&v).map_err(|e| ProtocolError::InvalidKey(e.to_string()))?;
        Ok(Self {
            agreement: PublicKey::from(a),
            verifying,
        })
    }

    pub fn to_base64(&self) -> String {
        b64_encode(&self.to_bytes())
    }

    pub fn from_base64(s: &str) -> Result<Self> {
        let bytes = b64_decode(s).map_err(|e| ProtocolError::InvalidKey(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    /// Hybrid-encrypts `plaintext` so only the holder of the matching
    /// [`DeviceKeys`] can read it.
    pub fn seal<R: RngCore + CryptoRng>(&self, plaintext: &[u8], rng: &mut R) -> EncryptedSample {
        let mut key = [0u8; 32];
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut key);
        rng.fill_bytes(&mut nonce);
        let ciphertext = Aes256Gcm::new(&key.into())
            .encrypt(Nonce::from_slice(&nonce), plaintext)
            .expect("AES-GCM encryption of an in-memory buffer");

        let mut eph_seed = [0u8; 32];
        rng.fill_bytes(&mut eph_seed);
        let eph = StaticSecret::from(eph_seed);
        let eph_pub = PublicKey::from(&eph);
        let shared = eph.diffie_hellman(&self.agreement);
        let kek = wrap_key(shared.as_bytes(), &eph_pub, &self.agreement);
        let wrapped = Aes256Gcm::new(&kek.into())
            .encrypt(Nonce::from_slice(&[0u8; NONCE_LEN]), key.as_slice())
            .expect("AES-GCM encryption of a 32-byte key");

        let mut wrapped_key = Vec::with_capacity(WRAPPED_KEY_LEN);
        wrapped_key.extend_from_slice(eph_pub.as_bytes());
        wrapped_key.extend_from_slice(&wrapped);
        EncryptedSample {
            wrapped_key,
            nonce: nonce.to_vec(),
            ciphertext,
        }
    }

    pub fn verify_verdict(
        &self,
        session_id: &str,
        accepted: bool,
        reason: &str,
        score: Option<f64>,
        signature: &str,
    ) -> Result<()> {
        let msg = verdict_bytes(session_id, accepted, reason, score);
        self.verify(&msg, signature)
    }

    pub fn verify_hello(&self, username: &str, timestamp: i64, signature: &str) -> Result<()> {
        self.verify(&hello_bytes(username, timestamp), signature)
    }

    fn verify(&self, msg: &[u8], signature: &str) -> Result<()> {
        let sig = b64_decode(signature).map_err(|_| ProtocolError::BadSignature)?;
        let sig = Signature::from_slice(&sig).map_err(|_| ProtocolError::BadSignature)?;
        self.verifying
            .verify(msg, &sig)
            .map_err(|_| ProtocolError::BadSignature)
    }
}

fn wrap_key(shared: &[u8; 32], eph: &PublicKey, recipient: &PublicKey) -> [u8; 32] {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph.as_bytes());
    salt[32..].copy_from_slice(recipient.as_bytes());
    let mut kek = [0u8; 32];
    Hkdf::<Sha256>::new(Some(&salt), shared)
        .expand(WRAP_INFO, &mut kek)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    kek
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Canonical bytes covered by a verdict signature.
pub fn verdict_bytes(
    session_id: &str,
    accepted: bool,
    reason: &str,
    score: Option<f64>,
) -> Vec<u8> {
    let mut out = VERDICT_DOMAIN.to_vec();
    push_str(&mut out, session_id);
    out.push(accepted as u8);
    push_str(&mut out, reason);
    match score {
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&s.to_bits().to_be_bytes());
        }
        None => out.push(0),
    }
    out
}

fn hello_bytes(username: &str, timestamp: i64) -> Vec<u8> {
    let mut out = HELLO_DOMAIN.to_vec();
    push_str(&mut out, username);
    out.extend_from_slice(&timestamp.to_be_bytes());
    out
}

/// Salted Argon2id password digests in PHC string form.
#[derive(Debug, Clone, Default)]
pub struct PasswordDigester {
    argon: Argon2<'static>,
}

impl PasswordDigester {
    /// Cheap parameters for tests and model checking.
    pub fn light() -> Self {
        let params = Params::new(Params::MIN_M_COST, 1, 1, None).expect("valid argon2 params");
        Self {
            argon: Argon2::new(Algorithm::Argon2id, Version::V0x13, params),
        }
    }

    pub fn digest<R: RngCore + CryptoRng>(&self, password: &str, rng: &mut R) -> String {
        let salt = SaltString::generate(rng);
        self.argon
            .hash_password(password.as_bytes(), &salt)
            .expect("argon2 hashing with valid params")
            .to_string()
    }

    /// Verifies against a stored digest; the digest's own parameters apply.
    pub fn verify(&self, password: &str, digest: &str) -> bool {
        PasswordHash::new(digest)
            .map(|h| self.argon.verify_password(password.as_bytes(), &h).is_ok())
            .unwrap_or(false)
    }
}
