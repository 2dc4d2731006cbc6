//! Pseudonymous identities.
//!
//! A pseudonym is the digest of (timestamp, nonce, random text, salt). It is
//! what the ledger records. Each identity also owns two key pairs: an Ed25519
//! pair that signs transactions and an X25519 pair that receives sealed files.
//! Neither private key, nor the random text, is ever serialized.

use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use thiserror::Error;
use x25519_dalek::{PublicKey as SealingPublicKey, StaticSecret};

use crate::digest::{Canonical, Digest};
use crate::Tick;

/// Ledger-visible identity of an actor.
pub type Pseudonym = Digest;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("signature inputs need a nonempty random text")]
    EmptyText,
    #[error("public key bytes do not decode")]
    MalformedKey,
}

/// The four inputs a pseudonym is derived from.
#[derive(Clone, PartialEq, Eq)]
pub struct SignatureInputs {
    pub timestamp: Tick,
    pub nonce: u64,
    /// User-supplied random text. Secret; only its digest leaves the actor.
    pub text: Vec<u8>,
    /// Caller-provided salt digest.
    pub salt: Digest,
}

impl fmt::Debug for SignatureInputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignatureInputs")
            .field("timestamp", &self.timestamp)
            .field("nonce", &self.nonce)
            .field("text", &"<redacted>")
            .field("salt", &self.salt)
            .finish()
    }
}

impl SignatureInputs {
    pub fn pseudonym(&self) -> Pseudonym {
        Canonical::new()
            .u64(self.timestamp)
            .u64(self.nonce)
            .bytes(&self.text)
            .digest(&self.salt)
            .hash()
    }
}

pub struct PseudonymousId {
    pseudonym: Pseudonym,
    signing: SigningKey,
    sealing: StaticSecret,
}

impl fmt::Debug for PseudonymousId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PseudonymousId")
            .field("pseudonym", &self.pseudonym)
            .finish_non_exhaustive()
    }
}

/// Derives the pseudonym from `inputs` and binds fresh key pairs drawn from `rng`.
pub fn generate_identity<R: RngCore + CryptoRng>(
    inputs: &SignatureInputs,
    rng: &mut R,
) -> Result<PseudonymousId, IdentityError> {
    if inputs.text.is_empty() {
        return Err(IdentityError::EmptyText);
    }
    Ok(PseudonymousId {
        pseudonym: inputs.pseudonym(),
        signing: SigningKey::generate(rng),
        sealing: StaticSecret::random_from_rng(rng),
    })
}

impl PseudonymousId {
    pub fn pseudonym(&self) -> Pseudonym {
        self.pseudonym
    }

    /// Ed25519 verifying key.
    pub fn public_key(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    /// X25519 key files are sealed to.
    pub fn sealing_public_key(&self) -> [u8; 32] {
        SealingPublicKey::from(&self.sealing).to_bytes()
    }

    pub(crate) fn sealing_secret(&self) -> &StaticSecret {
        &self.sealing
    }

    /// Raw private key bytes, for leak scanning in tests and audits.
    pub fn private_key_material(&self) -> [[u8; 32]; 2] {
        [self.signing.to_bytes(), self.sealing.to_bytes()]
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.signing.sign(message).to_bytes().to_vec()
    }
}

/// Checks an Ed25519 signature. A malformed key is an error; a malformed or
/// mismatching signature is simply `false`.
pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> Result<bool, IdentityError> {
    let key: [u8; 32] = public_key.try_into().map_err(|_| IdentityError::MalformedKey)?;
    let key = VerifyingKey::from_bytes(&key).map_err(|_| IdentityError::MalformedKey)?;
    let Ok(sig) = Signature::from_slice(signature) else {
        return Ok(false);
    };
    Ok(key.verify(message, &sig).is_ok())
}
