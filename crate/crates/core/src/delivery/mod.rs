//! Encrypted, chunked file delivery from seller to buyer through file miners.
//!
//! The seller seals the file to the buyer's public key, the sealed bytes are
//! chopped along an allocation plan and stored with the planned miners, and
//! the seller hands the buyer a [`DeliveryContract`] listing the chunk
//! addresses in order. The buyer collects and joins the chunks, which starts
//! each chunk's deletion timer, then opens the envelope. Issuing the contract
//! and completing the decryption are the two ledger events an auditor looks
//! for.

mod envelope;
mod store;

pub use envelope::{encrypt_for, open, ENVELOPE_OVERHEAD};
pub use store::{chop, Chunk, ChunkAddress, ChunkStore};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{hex_key, Canonical, Digest};
use crate::identity::{Pseudonym, PseudonymousId};
use crate::ledger::{Chain, LedgerError, Payload, Transaction, TxKind};
use crate::Tick;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeliveryError {
    #[error("recipient key is malformed")]
    MalformedKey,
    #[error("cannot deliver an empty file")]
    EmptyFile,
    #[error("decryption failed")]
    DecryptionFailure,
    #[error("plan covers {planned} bytes but the sealed file has {actual}")]
    SizeMismatch { planned: u64, actual: u64 },
    #[error("miner {0} lacks space for its chunk")]
    MinerFull(String),
    #[error("miner {0} is not registered with the store")]
    UnknownMiner(String),
    #[error("a contract needs at least one chunk address")]
    EmptyContract,
    #[error("contract digest does not match its contents")]
    ContractDigestMismatch,
    #[error("no ContractIssued record for contract {0}")]
    UnknownContract(Digest),
    #[error("chunk {0} is missing")]
    ChunkMissing(Digest),
    #[error("chunk {0} expired")]
    ChunkExpired(Digest),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// The tuple a seller hands the buyer: whom the file is sealed to, where its
/// chunks live (in join order), and who receives it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryContract {
    #[serde(with = "hex_key")]
    pub recipient_public_key: [u8; 32],
    pub chunk_addresses: Vec<ChunkAddress>,
    pub recipient_address: Pseudonym,
    pub contract_digest: Digest,
}

impl DeliveryContract {
    pub fn new(
        recipient_public_key: [u8; 32],
        chunk_addresses: Vec<ChunkAddress>,
        recipient_address: Pseudonym,
    ) -> Result<Self, DeliveryError> {
        if chunk_addresses.is_empty() {
            return Err(DeliveryError::EmptyContract);
        }
        let mut c = DeliveryContract {
            recipient_public_key,
            chunk_addresses,
            recipient_address,
            contract_digest: Digest::ZERO,
        };
        c.contract_digest = c.compute_digest();
        Ok(c)
    }

    pub fn compute_digest(&self) -> Digest {
        let mut c = Canonical::new();
        c.bytes(&self.recipient_public_key)
            .u64(self.chunk_addresses.len() as u64);
        for a in &self.chunk_addresses {
            c.str(&a.miner_id).digest(&a.chunk_digest).u64(a.length);
        }
        c.digest(&self.recipient_address);
        c.hash()
    }

    pub fn is_intact(&self) -> bool {
        self.compute_digest() == self.contract_digest
    }

    /// Total sealed size the chunks add up to.
    pub fn sealed_len(&self) -> u64 {
        self.chunk_addresses.iter().map(|a| a.length).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("contracts always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Builds the contract and records a `ContractIssued` transaction for it.
pub fn issue_contract(
    seller: &PseudonymousId,
    recipient_public_key: [u8; 32],
    addresses: Vec<ChunkAddress>,
    recipient_address: Pseudonym,
    listing_id: Digest,
    chain: &mut Chain,
    now: Tick,
) -> Result<DeliveryContract, DeliveryError> {
    let contract = DeliveryContract::new(recipient_public_key, addresses, recipient_address)?;
    let tx = Transaction::signed(
        seller,
        TxKind::ContractIssued,
        Some(recipient_address),
        Payload::Contract {
            contract_digest: contract.contract_digest,
            listing_id,
        },
        now,
    );
    chain.append_block(vec![tx], now)?;
    Ok(contract)
}

/// Collects the chunks in address order and joins them. Each collected
/// chunk's deletion timer starts at `now + t_d`.
pub fn retrieve_and_join(
    contract: &DeliveryContract,
    store: &mut ChunkStore,
    now: Tick,
    t_d: Tick,
) -> Result<Vec<u8>, DeliveryError> {
    if !contract.is_intact() {
        return Err(DeliveryError::ContractDigestMismatch);
    }
    let mut joined = Vec::with_capacity(contract.sealed_len() as usize);
    for address in &contract.chunk_addresses {
        let bytes = store.fetch(address, now)?;
        store.start_timer(address, now.saturating_add(t_d));
        joined.extend_from_slice(&bytes);
    }
    Ok(joined)
}

/// Opens the joined file with the recipient's key and records a
/// `DeliveryCompleted` transaction.
pub fn decrypt(
    sealed: &[u8],
    recipient: &PseudonymousId,
    contract: &DeliveryContract,
    chain: &mut Chain,
    now: Tick,
) -> Result<Vec<u8>, DeliveryError> {
    if recipient.sealing_public_key() != contract.recipient_public_key {
        return Err(DeliveryError::DecryptionFailure);
    }
    let (seller, listing_id) = chain
        .transactions()
        .find_map(|tx| match (&tx.kind, &tx.payload) {
            (
                TxKind::ContractIssued,
                Payload::Contract {
                    contract_digest,
                    listing_id,
                },
            ) if *contract_digest == contract.contract_digest => Some((tx.actor, *listing_id)),
            _ => None,
        })
        .ok_or(DeliveryError::UnknownContract(contract.contract_digest))?;
    let plaintext = open(sealed, recipient.sealing_secret())?;
    let tx = Transaction::signed(
        recipient,
        TxKind::DeliveryCompleted,
        Some(seller),
        Payload::Delivery {
            contract_digest: contract.contract_digest,
            listing_id,
        },
        now,
    );
    chain.append_block(vec![tx], now)?;
    Ok(plaintext)
}
