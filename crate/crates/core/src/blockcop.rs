//! Fraud auditing over ledger history.
//!
//! A sale is suspicious when a payment is on record but either the contract
//! issue or the delivery completion is missing. The first audit of such a
//! case posts a zero-amount notice with a deadline; an audit after the
//! deadline penalizes the seller and refunds the buyer out of the seller's
//! balance. File miners that lose chunks they were paid to hold are
//! penalized directly. Every notice and penalty lives on the chain, so
//! re-auditing a settled case is a no-op.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest;
use crate::identity::{Pseudonym, PseudonymousId};
use crate::ledger::{Chain, LedgerError, Payload, Reference, Transaction, TxKind};
pub use crate::ledger::ComplaintKind;
use crate::num::coin_serde;
use crate::{Coin, Tick};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("no payment on record for this complaint")]
    NoSuchPayment,
    #[error("the accused file miner was never paid for this listing")]
    NoSuchService,
    #[error("complaint kind does not match the audit")]
    WrongKind,
    #[error("complainant and accused must differ")]
    SelfComplaint,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complaint {
    pub complainant: Pseudonym,
    pub accused: Pseudonym,
    pub listing_id: Digest,
    pub filed_at: Tick,
    pub kind: ComplaintKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome")]
pub enum Outcome {
    Clean,
    NoticePending {
        deadline: Tick,
    },
    Penalized {
        #[serde(with = "coin_serde")]
        penalty: Coin,
        #[serde(with = "coin_serde")]
        refund: Coin,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    /// Ids of the ledger transactions the verdict rests on.
    pub evidence: Vec<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditPolicy {
    pub deadline_window: Tick,
    pub penalty_multiplier: Coin,
}

impl Default for AuditPolicy {
    fn default() -> Self {
        AuditPolicy {
            deadline_window: 50,
            penalty_multiplier: crate::num::coin(2),
        }
    }
}

/// A fetch that failed because a paid miner no longer held the chunk
/// before its deletion timer ran out. Recorded off-ledger by the collector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceFailure {
    pub miner: Pseudonym,
    pub chunk_digest: Digest,
    pub at: Tick,
}

fn check_complaint(complaint: &Complaint, expected: ComplaintKind) -> Result<(), AuditError> {
    if complaint.kind != expected {
        return Err(AuditError::WrongKind);
    }
    if complaint.complainant == complaint.accused {
        return Err(AuditError::SelfComplaint);
    }
    Ok(())
}

fn find(chain: &Chain, pred: impl Fn(&Transaction) -> bool) -> Option<&Transaction> {
    chain.transactions().find(|tx| pred(tx))
}

/// A penalty already imposed for this complaint, with any matching refund.
fn prior_penalty(chain: &Chain, complaint: &Complaint) -> Option<(Coin, Coin, Vec<Digest>)> {
    let penalty = find(chain, |tx| {
        tx.kind == TxKind::PenaltyImposed
            && tx.counterparty == Some(complaint.accused)
            && matches!(&tx.payload, Payload::Penalty { listing_id, claimant, grounds, .. }
                if *listing_id == complaint.listing_id
                    && *claimant == complaint.complainant
                    && *grounds == complaint.kind)
    })?;
    let mut evidence = vec![penalty.tx_id];
    let refund = find(chain, |tx| {
        tx.kind == TxKind::Refund
            && tx.counterparty == Some(complaint.complainant)
            && tx.listing() == Some(complaint.listing_id)
            && matches!(&tx.payload, Payload::Transfer { source: Some(s), .. } if *s == complaint.accused)
    });
    let refund_amount = match refund {
        Some(tx) => {
            evidence.push(tx.tx_id);
            tx.amount().cloned().unwrap_or_else(Coin::zero)
        }
        None => Coin::zero(),
    };
    let amount = penalty.amount().cloned().unwrap_or_else(Coin::zero);
    Some((amount, refund_amount, evidence))
}

/// Audits a buyer's claim that a seller took payment without delivering.
pub fn audit_sale(
    cop: &PseudonymousId,
    chain: &mut Chain,
    complaint: &Complaint,
    now: Tick,
    policy: &AuditPolicy,
) -> Result<Verdict, AuditError> {
    check_complaint(complaint, ComplaintKind::SellerNoDelivery)?;
    let (buyer, seller, listing) = (complaint.complainant, complaint.accused, complaint.listing_id);
    // purchases only; storage fees also reference the listing
    let payment = find(chain, |tx| {
        tx.kind == TxKind::Payment
            && tx.actor == buyer
            && tx.counterparty == Some(seller)
            && matches!(&tx.payload, Payload::Transfer { reference: Reference::Listing { listing_id }, .. }
                if *listing_id == listing)
    })
    .ok_or(AuditError::NoSuchPayment)?;
    let price = payment.amount().cloned().unwrap_or_else(Coin::zero);
    let mut evidence = vec![payment.tx_id];

    let issued = find(chain, |tx| {
        tx.kind == TxKind::ContractIssued
            && tx.actor == seller
            && tx.counterparty == Some(buyer)
            && tx.listing() == Some(listing)
    });
    let completed = find(chain, |tx| {
        tx.kind == TxKind::DeliveryCompleted
            && tx.actor == buyer
            && tx.counterparty == Some(seller)
            && tx.listing() == Some(listing)
    });
    if let (Some(i), Some(c)) = (issued, completed) {
        evidence.extend([i.tx_id, c.tx_id]);
        return Ok(Verdict {
            outcome: Outcome::Clean,
            evidence,
        });
    }

    if let Some((penalty, refund, ids)) = prior_penalty(chain, complaint) {
        evidence.extend(ids);
        return Ok(Verdict {
            outcome: Outcome::Penalized { penalty, refund },
            evidence,
        });
    }

    let notice = find(chain, |tx| {
        tx.kind == TxKind::PenaltyImposed
            && tx.counterparty == Some(seller)
            && matches!(&tx.payload, Payload::Notice { listing_id, claimant, grounds, .. }
                if *listing_id == listing
                    && *claimant == buyer
                    && *grounds == ComplaintKind::SellerNoDelivery)
    })
    .map(|tx| match tx.payload {
        Payload::Notice { deadline, .. } => (tx.tx_id, deadline),
        _ => unreachable!("matched on Notice above"),
    });

    match notice {
        Some((notice_id, deadline)) if now <= deadline => {
            evidence.push(notice_id);
            Ok(Verdict {
                outcome: Outcome::NoticePending { deadline },
                evidence,
            })
        }
        Some((notice_id, _)) => {
            evidence.push(notice_id);
            let penalty = policy.penalty_multiplier.clone() * price.clone();
            let fine = Transaction::signed(
                cop,
                TxKind::PenaltyImposed,
                Some(seller),
                Payload::Penalty {
                    amount: penalty.clone(),
                    listing_id: listing,
                    claimant: buyer,
                    grounds: ComplaintKind::SellerNoDelivery,
                },
                now,
            );
            let refund = Transaction::signed(
                cop,
                TxKind::Refund,
                Some(buyer),
                Payload::Transfer {
                    amount: price.clone(),
                    reference: Reference::Listing { listing_id: listing },
                    source: Some(seller),
                },
                now,
            );
            evidence.extend([fine.tx_id, refund.tx_id]);
            chain.append_block(vec![fine, refund], now)?;
            Ok(Verdict {
                outcome: Outcome::Penalized {
                    penalty,
                    refund: price,
                },
                evidence,
            })
        }
        None => {
            let deadline = now.saturating_add(policy.deadline_window);
            let tx = Transaction::signed(
                cop,
                TxKind::PenaltyImposed,
                Some(seller),
                Payload::Notice {
                    listing_id: listing,
                    claimant: buyer,
                    grounds: ComplaintKind::SellerNoDelivery,
                    deadline,
                },
                now,
            );
            evidence.push(tx.tx_id);
            chain.append_block(vec![tx], now)?;
            Ok(Verdict {
                outcome: Outcome::NoticePending { deadline },
                evidence,
            })
        }
    }
}

/// Audits a claim that a file miner dropped chunks it was paid to keep.
/// The penalty is `penalty_multiplier` times the storage fees the miner
/// received for the listing.
pub fn audit_file_miner(
    cop: &PseudonymousId,
    chain: &mut Chain,
    complaint: &Complaint,
    now: Tick,
    failures: &[ServiceFailure],
    policy: &AuditPolicy,
) -> Result<Verdict, AuditError> {
    check_complaint(complaint, ComplaintKind::FileMinerNoService)?;
    let miner = complaint.accused;
    let paid: Vec<(Digest, Digest, Coin)> = chain
        .transactions()
        .filter(|tx| tx.kind == TxKind::Payment && tx.counterparty == Some(miner))
        .filter_map(|tx| match &tx.payload {
            Payload::Transfer {
                amount,
                reference: Reference::Storage { listing_id, chunk_digest },
                ..
            } if *listing_id == complaint.listing_id => Some((tx.tx_id, *chunk_digest, amount.clone())),
            _ => None,
        })
        .collect();
    if paid.is_empty() {
        return Err(AuditError::NoSuchService);
    }
    let mut evidence: Vec<Digest> = paid.iter().map(|(id, _, _)| *id).collect();

    if let Some((penalty, refund, ids)) = prior_penalty(chain, complaint) {
        evidence.extend(ids);
        return Ok(Verdict {
            outcome: Outcome::Penalized { penalty, refund },
            evidence,
        });
    }

    let failed = failures
        .iter()
        .any(|f| f.miner == miner && paid.iter().any(|(_, chunk, _)| *chunk == f.chunk_digest));
    if !failed {
        return Ok(Verdict {
            outcome: Outcome::Clean,
            evidence,
        });
    }

    let fees = paid.iter().fold(Coin::zero(), |acc, (_, _, a)| acc + a);
    let penalty = policy.penalty_multiplier.clone() * fees;
    let tx = Transaction::signed(
        cop,
        TxKind::PenaltyImposed,
        Some(miner),
        Payload::Penalty {
            amount: penalty.clone(),
            listing_id: complaint.listing_id,
            claimant: complaint.complainant,
            grounds: ComplaintKind::FileMinerNoService,
        },
        now,
    );
    evidence.push(tx.tx_id);
    chain.append_block(vec![tx], now)?;
    Ok(Verdict {
        outcome: Outcome::Penalized {
            penalty,
            refund: Coin::zero(),
        },
        evidence,
    })
}
