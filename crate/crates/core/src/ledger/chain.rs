use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::transaction::{Payload, Transaction, TxKind};
use super::LedgerError;
use crate::digest::{Canonical, Digest};
use crate::identity::{self, Pseudonym, PseudonymousId};
use crate::Tick;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Digest,
    pub timestamp: Tick,
    pub transactions: Vec<Transaction>,
    pub block_hash: Digest,
}

impl Block {
    /// Digest over index, previous hash, timestamp and transaction ids in order.
    pub fn compute_hash(&self) -> Digest {
        let mut c = Canonical::new();
        c.u64(self.index)
            .digest(&self.prev_hash)
            .u64(self.timestamp)
            .u64(self.transactions.len() as u64);
        for tx in &self.transactions {
            c.digest(&tx.tx_id);
        }
        c.hash()
    }

    fn genesis() -> Self {
        let mut b = Block {
            index: 0,
            prev_hash: Digest::ZERO,
            timestamp: 0,
            transactions: vec![Transaction::genesis()],
            block_hash: Digest::ZERO,
        };
        b.block_hash = b.compute_hash();
        b
    }

    /// True when the stored hash and every stored transaction id match
    /// their contents.
    fn is_self_consistent(&self) -> bool {
        self.transactions.iter().all(|tx| tx.compute_id() == tx.tx_id)
            && self.compute_hash() == self.block_hash
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub first_bad_index: Option<u64>,
}

/// Recomputes every transaction id, block hash and link. Never fails; the
/// report names the first block that does not check out.
pub fn verify_chain(blocks: &[Block]) -> VerificationReport {
    let genesis = Block::genesis();
    for (i, block) in blocks.iter().enumerate() {
        let expected_prev = match i {
            0 => Digest::ZERO,
            _ => blocks[i - 1].block_hash,
        };
        let ok = block.index == i as u64
            && block.prev_hash == expected_prev
            && block.is_self_consistent()
            && (i != 0 || *block == genesis);
        if !ok {
            return VerificationReport {
                valid: false,
                first_bad_index: Some(i as u64),
            };
        }
    }
    if blocks.is_empty() {
        return VerificationReport {
            valid: false,
            first_bad_index: Some(0),
        };
    }
    VerificationReport {
        valid: true,
        first_bad_index: None,
    }
}

/// Conjunction of optional criteria; `None` fields match everything.
#[derive(Clone, Debug, Default)]
pub struct HistoryFilter {
    pub actor: Option<Pseudonym>,
    pub kind: Option<TxKind>,
    pub listing: Option<Digest>,
    /// Inclusive tick interval.
    pub time_range: Option<(Tick, Tick)>,
}

impl HistoryFilter {
    pub fn kind(kind: TxKind) -> Self {
        HistoryFilter {
            kind: Some(kind),
            ..Default::default()
        }
    }

    pub fn matches(&self, tx: &Transaction) -> bool {
        self.actor.is_none_or(|a| tx.actor == a)
            && self.kind.is_none_or(|k| tx.kind == k)
            && self.listing.is_none_or(|l| tx.listing() == Some(l))
            && self
                .time_range
                .is_none_or(|(lo, hi)| (lo..=hi).contains(&tx.timestamp))
    }
}

/// The block store plus the indexes needed to validate appends.
#[derive(Clone, Debug)]
pub struct Chain {
    blocks: Vec<Block>,
    seen_digests: BTreeSet<Digest>,
    directory: BTreeMap<Pseudonym, [u8; 32]>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    /// A chain holding only the fixed genesis block.
    pub fn new() -> Self {
        Chain {
            blocks: vec![Block::genesis()],
            seen_digests: BTreeSet::new(),
            directory: BTreeMap::new(),
        }
    }

    /// Rebuilds a chain from stored blocks. No validation happens here; run
    /// [`verify_chain`] on the result.
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        let seen_digests = blocks
            .iter()
            .flat_map(|b| &b.transactions)
            .filter_map(|tx| match (&tx.kind, &tx.payload) {
                (TxKind::ListingPosted, Payload::Listing(l)) => Some(l.listing_id),
                _ => None,
            })
            .collect();
        Chain {
            blocks,
            seen_digests,
            directory: BTreeMap::new(),
        }
    }

    /// Registers the verifying key appends will check `id`'s signatures against.
    pub fn enroll(&mut self, id: &PseudonymousId) {
        self.directory.insert(id.pseudonym(), id.public_key());
    }

    pub fn public_key_of(&self, who: &Pseudonym) -> Option<&[u8; 32]> {
        self.directory.get(who)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn has_listing(&self, listing_id: &Digest) -> bool {
        self.seen_digests.contains(listing_id)
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().flat_map(|b| &b.transactions)
    }

    pub fn contains_tx(&self, tx_id: &Digest) -> bool {
        self.transactions().any(|tx| tx.tx_id == *tx_id)
    }

    /// Validates `txs` and seals them into a new block on top of the tip.
    /// On error the chain is left untouched.
    pub fn append_block(&mut self, txs: Vec<Transaction>, now: Tick) -> Result<&Block, LedgerError> {
        if txs.is_empty() {
            return Err(LedgerError::EmptyBatch);
        }
        let mut fresh = BTreeSet::new();
        for tx in &txs {
            if tx.compute_id() != tx.tx_id {
                return Err(LedgerError::IdMismatch(tx.tx_id));
            }
            let key = self
                .directory
                .get(&tx.actor)
                .ok_or(LedgerError::BadSignature(tx.tx_id))?;
            if !identity::verify(key, &tx.signing_bytes(), &tx.signature).unwrap_or(false) {
                return Err(LedgerError::BadSignature(tx.tx_id));
            }
            if let (TxKind::ListingPosted, Payload::Listing(l)) = (&tx.kind, &tx.payload) {
                if self.seen_digests.contains(&l.listing_id) || !fresh.insert(l.listing_id) {
                    return Err(LedgerError::DuplicateContent(l.listing_id));
                }
            }
        }
        let tip = self.tip();
        let mut block = Block {
            index: tip.index + 1,
            prev_hash: tip.block_hash,
            timestamp: now,
            transactions: txs,
            block_hash: Digest::ZERO,
        };
        block.block_hash = block.compute_hash();
        self.seen_digests.extend(fresh);
        self.blocks.push(block);
        Ok(self.tip())
    }

    pub fn verify(&self) -> VerificationReport {
        verify_chain(&self.blocks)
    }

    /// All transactions matching `filter`, in chain order.
    pub fn query_history(&self, filter: &HistoryFilter) -> Vec<&Transaction> {
        self.transactions().filter(|tx| filter.matches(tx)).collect()
    }

    /// One JSON object per block, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        dump_jsonl(&self.blocks)
    }
}

pub fn dump_jsonl(blocks: &[Block]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(&serde_json::to_string(b).expect("blocks always serialize"));
        out.push('\n');
    }
    out
}

/// Parses a block-per-line dump. Blank lines are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<Block>, LedgerError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LedgerError::BadFormat {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
