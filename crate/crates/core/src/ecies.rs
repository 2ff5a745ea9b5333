//! ECIES over secp256r1.
//!
//! KEM: an ephemeral keypair `(k_e, K)` and the x-coordinate of `k_e * pub`.
//! KDF: HKDF-SHA-256 with an empty salt over `shared_x || K`, expanded under
//! the info string [`KDF_INFO`] into a 32-byte AES key followed by a 12-byte
//! nonce. DEM: AES-256-GCM. The sealed form is `K || C || T`.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use p256::elliptic_curve::sec1::ToEncodedPoint;
pub use p256::{PublicKey, SecretKey};
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use thiserror::Error;

pub const KDF_INFO: &[u8] = b"latentseal-v1";
/// Compressed SEC1 point length.
pub const EPHEMERAL_LEN: usize = 33;
pub const TAG_LEN: usize = 16;
/// Bytes added to every plaintext by sealing.
pub const OVERHEAD: usize = EPHEMERAL_LEN + TAG_LEN;

const KEY_LEN: usize = 32;
const NONCE_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EciesError {
    #[error("authentication failed: ciphertext was modified or the private key does not match")]
    AuthFailure,
    #[error("ephemeral key is not a valid curve point")]
    InvalidPoint,
    #[error("invalid public key")]
    InvalidPublicKey,
    #[error("invalid private key")]
    InvalidPrivateKey,
    #[error("ciphertext too short: {0} bytes, need at least {OVERHEAD}")]
    Truncated(usize),
    #[error("plaintext must not be empty")]
    EmptyPlaintext,
    #[error("entropy source failure: {0}")]
    EntropyFailure(String),
    #[error("malformed key file: {0}")]
    KeyFormat(String),
}

/// A private scalar in `[1, n)` and its public point.
#[derive(Clone)]
pub struct EciesKeypair {
    secret: SecretKey,
    public: PublicKey,
}

impl std::fmt::Debug for EciesKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EciesKeypair")
            .field("public", &self.public_hex())
            .finish_non_exhaustive()
    }
}

impl EciesKeypair {
    pub fn from_private_bytes(bytes: &[u8; 32]) -> Result<Self, EciesError> {
        let secret = SecretKey::from_slice(bytes).map_err(|_| EciesError::InvalidPrivateKey)?;
        let public = secret.public_key();
        Ok(Self { secret, public })
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    /// 32-byte big-endian scalar.
    pub fn private_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    pub fn private_hex(&self) -> String {
        hex::encode(self.private_bytes())
    }

    pub fn public_hex(&self) -> String {
        public_to_hex(&self.public)
    }
}

/// Fresh keypair from system entropy, or a deterministic one from `seed`.
pub fn keygen(seed: Option<[u8; 32]>) -> Result<EciesKeypair, EciesError> {
    match seed {
        Some(seed) => keygen_with_rng(&mut ChaCha20Rng::from_seed(seed)),
        None => keygen_with_rng(&mut OsRng),
    }
}

pub fn keygen_with_rng<R: RngCore + CryptoRng>(rng: &mut R) -> Result<EciesKeypair, EciesError> {
    let candidates = std::iter::from_fn(|| {
        let mut candidate = [0u8; 32];
        match rng.try_fill_bytes(&mut candidate) {
            Ok(()) => Some(Ok(candidate)),
            Err(e) => Some(Err(EciesError::EntropyFailure(e.to_string()))),
        }
    });
    scalar_from_candidates(candidates)
}

/// First candidate that is a valid scalar in `[1, n)`; zero and values at or
/// above the group order are skipped.
pub(crate) fn scalar_from_candidates<I>(candidates: I) -> Result<EciesKeypair, EciesError>
where
    I: IntoIterator<Item = Result<[u8; 32], EciesError>>,
{
    for candidate in candidates {
        if let Ok(pair) = EciesKeypair::from_private_bytes(&candidate?) {
            return Ok(pair);
        }
    }
    Err(EciesError::EntropyFailure(
        "candidate stream exhausted".into(),
    ))
}

/// The `{K, C, T}` tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EciesCiphertext {
    pub ephemeral: [u8; EPHEMERAL_LEN],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl EciesCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&self.ephemeral);
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EciesError> {
        if bytes.len() < OVERHEAD {
            return Err(EciesError::Truncated(bytes.len()));
        }
        let (ephemeral, rest) = bytes.split_at(EPHEMERAL_LEN);
        let (ciphertext, tag) = rest.split_at(rest.len() - TAG_LEN);
        Ok(Self {
            ephemeral: ephemeral.try_into().expect("split at EPHEMERAL_LEN"),
            ciphertext: ciphertext.to_vec(),
            tag: tag.try_into().expect("split at TAG_LEN"),
        })
    }

    pub fn serialized_len(&self) -> usize {
        OVERHEAD + self.ciphertext.len()
    }
}

pub fn ecies_encrypt(
    plaintext: &[u8],
    public: &PublicKey,
    eph_seed: Option<[u8; 32]>,
) -> Result<EciesCiphertext, EciesError> {
    ecies_encrypt_with_aad(plaintext, &[], public, eph_seed)
}

pub fn ecies_decrypt(ct: &EciesCiphertext, secret: &SecretKey) -> Result<Vec<u8>, EciesError> {
    ecies_decrypt_with_aad(ct, &[], secret)
}

/// Sealing with caller-supplied associated data bound into the tag.
pub fn ecies_encrypt_with_aad(
    plaintext: &[u8],
    aad: &[u8],
    public: &PublicKey,
    eph_seed: Option<[u8; 32]>,
) -> Result<EciesCiphertext, EciesError> {
    if plaintext.is_empty() {
        return Err(EciesError::EmptyPlaintext);
    }
    let ephemeral = keygen(eph_seed)?;
    let ephemeral_bytes = compress(ephemeral.public());
    let shared =
        p256::ecdh::diffie_hellman(ephemeral.secret().to_nonzero_scalar(), public.as_affine());
    let (key, nonce) = derive(&shared.raw_secret_bytes()[..], &ephemeral_bytes);

    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let mut sealed = cipher
        .encrypt(
            &Nonce::from(nonce),
            Payload {
                msg: plaintext,
                aad,
            },
        )
        .map_err(|_| EciesError::AuthFailure)?;
    let tag_start = sealed.len() - TAG_LEN;
    let tag: [u8; TAG_LEN] = sealed[tag_start..].try_into().expect("gcm tag");
    sealed.truncate(tag_start);

    Ok(EciesCiphertext {
        ephemeral: ephemeral_bytes,
        ciphertext: sealed,
        tag,
    })
}

pub fn ecies_decrypt_with_aad(
    ct: &EciesCiphertext,
    aad: &[u8],
    secret: &SecretKey,
) -> Result<Vec<u8>, EciesError> {
    let ephemeral =
        PublicKey::from_sec1_bytes(&ct.ephemeral).map_err(|_| EciesError::InvalidPoint)?;
    let shared = p256::ecdh::diffie_hellman(secret.to_nonzero_scalar(), ephemeral.as_affine());
    let (key, nonce) = derive(&shared.raw_secret_bytes()[..], &ct.ephemeral);

    let mut sealed = Vec::with_capacity(ct.ciphertext.len() + TAG_LEN);
    sealed.extend_from_slice(&ct.ciphertext);
    sealed.extend_from_slice(&ct.tag);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    cipher
        .decrypt(&Nonce::from(nonce), Payload { msg: &sealed, aad })
        .map_err(|_| EciesError::AuthFailure)
}

fn derive(shared_x: &[u8], ephemeral: &[u8; EPHEMERAL_LEN]) -> ([u8; KEY_LEN], [u8; NONCE_LEN]) {
    let mut ikm = Vec::with_capacity(shared_x.len() + EPHEMERAL_LEN);
    ikm.extend_from_slice(shared_x);
    ikm.extend_from_slice(ephemeral);
    let hk = Hkdf::<Sha256>::new(Some(&[]), &ikm);
    let mut okm = [0u8; KEY_LEN + NONCE_LEN];
    hk.expand(KDF_INFO, &mut okm)
        .expect("44 bytes is a valid HKDF length");
    let mut key = [0u8; KEY_LEN];
    let mut nonce = [0u8; NONCE_LEN];
    key.copy_from_slice(&okm[..KEY_LEN]);
    nonce.copy_from_slice(&okm[KEY_LEN..]);
    (key, nonce)
}

fn compress(public: &PublicKey) -> [u8; EPHEMERAL_LEN] {
    public
        .to_encoded_point(true)
        .as_bytes()
        .try_into()
        .expect("compressed P-256 point is 33 bytes")
}

pub fn public_to_hex(public: &PublicKey) -> String {
    hex::encode(compress(public))
}

/// Parse a public key file: 66 hex characters (compressed point).
pub fn public_from_hex(text: &str) -> Result<PublicKey, EciesError> {
    let text = text.trim();
    if text.len() != 2 * EPHEMERAL_LEN {
        return Err(EciesError::KeyFormat(format!(
            "public key must be {} hex characters, got {}",
            2 * EPHEMERAL_LEN,
            text.len()
        )));
    }
    let bytes = hex::decode(text).map_err(|e| EciesError::KeyFormat(e.to_string()))?;
    PublicKey::from_sec1_bytes(&bytes).map_err(|_| EciesError::InvalidPublicKey)
}

/// Parse a private key file: 64 hex characters (big-endian scalar).
pub fn keypair_from_hex(text: &str) -> Result<EciesKeypair, EciesError> {
    let text = text.trim();
    if text.len() != 64 {
        return Err(EciesError::KeyFormat(format!(
            "private key must be 64 hex characters, got {}",
            text.len()
        )));
    }
    let mut bytes = [0u8; 32];
    hex::decode_to_slice(text, &mut bytes).map_err(|e| EciesError::KeyFormat(e.to_string()))?;
    EciesKeypair::from_private_bytes(&bytes)
}
