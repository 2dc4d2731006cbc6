//! Sealed-box encryption to an X25519 public key.
//!
//! Layout: `ephemeral public key (32) | nonce (12) | ChaCha20-Poly1305 ciphertext+tag`.
//! The symmetric key is HKDF-SHA256 over the ephemeral/recipient shared
//! secret, salted with both public keys.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{EphemeralSecret, PublicKey, StaticSecret};

use super::DeliveryError;

const EPHEMERAL_LEN: usize = 32;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;
const KDF_INFO: &[u8] = b"newstrad envelope v1";

/// Bytes added to every sealed file.
pub const ENVELOPE_OVERHEAD: usize = EPHEMERAL_LEN + NONCE_LEN + TAG_LEN;

fn derive_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> Key {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 32];
    hk.expand(KDF_INFO, &mut okm).expect("32 bytes is a valid HKDF length");
    okm.into()
}

fn recipient_key(bytes: &[u8]) -> Result<[u8; 32], DeliveryError> {
    bytes.try_into().map_err(|_| DeliveryError::MalformedKey)
}

/// Seals `plaintext` so only the holder of the matching private key can open it.
pub fn encrypt_for<R: RngCore + CryptoRng>(
    recipient_public_key: &[u8],
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, DeliveryError> {
    if plaintext.is_empty() {
        return Err(DeliveryError::EmptyFile);
    }
    let recipient = recipient_key(recipient_public_key)?;
    let ephemeral = EphemeralSecret::random_from_rng(&mut *rng);
    let ephemeral_pub = PublicKey::from(&ephemeral).to_bytes();
    let shared = ephemeral.diffie_hellman(&PublicKey::from(recipient));
    if !shared.was_contributory() {
        return Err(DeliveryError::MalformedKey);
    }
    let key = derive_key(shared.as_bytes(), &ephemeral_pub, &recipient);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let sealed = ChaCha20Poly1305::new(&key)
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: &ephemeral_pub,
            },
        )
        .map_err(|_| DeliveryError::DecryptionFailure)?;
    let mut out = Vec::with_capacity(plaintext.len() + ENVELOPE_OVERHEAD);
    out.extend_from_slice(&ephemeral_pub);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&sealed);
    Ok(out)
}

/// Opens a sealed file. Any tampering or a wrong key yields `DecryptionFailure`.
pub fn open(sealed: &[u8], secret: &StaticSecret) -> Result<Vec<u8>, DeliveryError> {
    if sealed.len() < ENVELOPE_OVERHEAD {
        return Err(DeliveryError::DecryptionFailure);
    }
    let (ephemeral_pub, rest) = sealed.split_at(EPHEMERAL_LEN);
    let (nonce, body) = rest.split_at(NONCE_LEN);
    let ephemeral_pub: [u8; 32] = ephemeral_pub.try_into().expect("split at 32");
    let recipient = PublicKey::from(secret).to_bytes();
    let shared = secret.diffie_hellman(&PublicKey::from(ephemeral_pub));
    if !shared.was_contributory() {
        return Err(DeliveryError::DecryptionFailure);
    }
    let key = derive_key(shared.as_bytes(), &ephemeral_pub, &recipient);
    ChaCha20Poly1305::new(&key)
        .decrypt(
            Nonce::from_slice(nonce),
            Payload {
                msg: body,
                aad: &ephemeral_pub,
            },
        )
        .map_err(|_| DeliveryError::DecryptionFailure)
}
