//! Append-only hash-chained ledger.
//!
//! Every protocol event is a signed [`Transaction`]. Transactions are grouped
//! into [`Block`]s whose hash covers the previous block hash, so any edit to
//! recorded history is detectable by [`verify_chain`].

mod chain;
mod transaction;

pub use chain::{dump_jsonl, parse_jsonl, verify_chain, Block, Chain, HistoryFilter, VerificationReport};
pub use transaction::{
    BalanceEffects, ComplaintKind, ListingRecord, MinerRole, Payload, Reference, Transaction,
    TxKind,
};

use thiserror::Error;

use crate::digest::Digest;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("listing {0} is already recorded")]
    DuplicateContent(Digest),
    #[error("transaction {0} carries a bad signature or an unknown signer")]
    BadSignature(Digest),
    #[error("transaction id {0} does not match its contents")]
    IdMismatch(Digest),
    #[error("a block must carry at least one transaction")]
    EmptyBatch,
    #[error("ledger dump line {line}: {message}")]
    BadFormat { line: usize, message: String },
}
