use serde::{Deserialize, Serialize};

use crate::digest::{hex_bytes, hex_key, Canonical, Digest};
use crate::identity::{Pseudonym, PseudonymousId};
use crate::num::{coin_serde, format_coin};
use crate::{Coin, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TxKind {
    Genesis,
    ListingPosted,
    Payment,
    ContractIssued,
    DeliveryCompleted,
    RewardGranted,
    PenaltyImposed,
    Refund,
    MinerRegistered,
    QueryServed,
}

impl TxKind {
    pub const ALL: [TxKind; 10] = [
        TxKind::Genesis,
        TxKind::ListingPosted,
        TxKind::Payment,
        TxKind::ContractIssued,
        TxKind::DeliveryCompleted,
        TxKind::RewardGranted,
        TxKind::PenaltyImposed,
        TxKind::Refund,
        TxKind::MinerRegistered,
        TxKind::QueryServed,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TxKind::Genesis => "Genesis",
            TxKind::ListingPosted => "ListingPosted",
            TxKind::Payment => "Payment",
            TxKind::ContractIssued => "ContractIssued",
            TxKind::DeliveryCompleted => "DeliveryCompleted",
            TxKind::RewardGranted => "RewardGranted",
            TxKind::PenaltyImposed => "PenaltyImposed",
            TxKind::Refund => "Refund",
            TxKind::MinerRegistered => "MinerRegistered",
            TxKind::QueryServed => "QueryServed",
        }
    }
}

/// Grounds of a fraud complaint, recorded on notices and penalties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplaintKind {
    SellerNoDelivery,
    FileMinerNoService,
}

impl ComplaintKind {
    fn tag(self) -> &'static str {
        match self {
            ComplaintKind::SellerNoDelivery => "SellerNoDelivery",
            ComplaintKind::FileMinerNoService => "FileMinerNoService",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MinerRole {
    News,
    File,
}

/// The public part of a listing. Full content never appears here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingRecord {
    pub listing_id: Digest,
    pub headline: String,
    pub teaser: String,
    pub category: String,
    pub price: u64,
    pub full_content_size: u64,
}

/// What a coin movement pays for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ref", rename_all = "snake_case")]
pub enum Reference {
    Listing { listing_id: Digest },
    Query { query_digest: Digest },
    Storage { listing_id: Digest, chunk_digest: Digest },
}

impl Reference {
    pub fn listing(&self) -> Option<Digest> {
        match self {
            Reference::Listing { listing_id } | Reference::Storage { listing_id, .. } => {
                Some(*listing_id)
            }
            Reference::Query { .. } => None,
        }
    }

    fn encode(&self, c: &mut Canonical) {
        match self {
            Reference::Listing { listing_id } => {
                c.str("listing").digest(listing_id);
            }
            Reference::Query { query_digest } => {
                c.str("query").digest(query_digest);
            }
            Reference::Storage {
                listing_id,
                chunk_digest,
            } => {
                c.str("storage").digest(listing_id).digest(chunk_digest);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Marker {
        note: String,
    },
    Listing(ListingRecord),
    /// A coin movement. `source` is the debited party when it is not the
    /// transaction's actor (fee-funded rewards, seller-funded refunds).
    Transfer {
        #[serde(with = "coin_serde")]
        amount: Coin,
        reference: Reference,
        source: Option<Pseudonym>,
    },
    Contract {
        contract_digest: Digest,
        listing_id: Digest,
    },
    Delivery {
        contract_digest: Digest,
        listing_id: Digest,
    },
    /// Zero-amount fraud notice carried on a `PenaltyImposed` transaction.
    Notice {
        listing_id: Digest,
        claimant: Pseudonym,
        grounds: ComplaintKind,
        deadline: Tick,
    },
    Penalty {
        #[serde(with = "coin_serde")]
        amount: Coin,
        listing_id: Digest,
        claimant: Pseudonym,
        grounds: ComplaintKind,
    },
    Registration {
        role: MinerRole,
        #[serde(with = "hex_key")]
        sealing_key: [u8; 32],
        free_space: u64,
    },
    Query {
        query_digest: Digest,
        served: Vec<Digest>,
    },
}

impl Payload {
    fn encode(&self, c: &mut Canonical) {
        match self {
            Payload::Marker { note } => {
                c.str("marker").str(note);
            }
            Payload::Listing(l) => {
                c.str("listing")
                    .digest(&l.listing_id)
                    .str(&l.headline)
                    .str(&l.teaser)
                    .str(&l.category)
                    .u64(l.price)
                    .u64(l.full_content_size);
            }
            Payload::Transfer {
                amount,
                reference,
                source,
            } => {
                c.str("transfer").str(&format_coin(amount));
                reference.encode(c);
                c.opt_digest(source.as_ref());
            }
            Payload::Contract {
                contract_digest,
                listing_id,
            } => {
                c.str("contract").digest(contract_digest).digest(listing_id);
            }
            Payload::Delivery {
                contract_digest,
                listing_id,
            } => {
                c.str("delivery").digest(contract_digest).digest(listing_id);
            }
            Payload::Notice {
                listing_id,
                claimant,
                grounds,
                deadline,
            } => {
                c.str("notice")
                    .digest(listing_id)
                    .digest(claimant)
                    .str(grounds.tag())
                    .u64(*deadline);
            }
            Payload::Penalty {
                amount,
                listing_id,
                claimant,
                grounds,
            } => {
                c.str("penalty")
                    .str(&format_coin(amount))
                    .digest(listing_id)
                    .digest(claimant)
                    .str(grounds.tag());
            }
            Payload::Registration {
                role,
                sealing_key,
                free_space,
            } => {
                let role = match role {
                    MinerRole::News => "news",
                    MinerRole::File => "file",
                };
                c.str("registration")
                    .str(role)
                    .bytes(sealing_key)
                    .u64(*free_space);
            }
            Payload::Query {
                query_digest,
                served,
            } => {
                c.str("query").digest(query_digest).u64(served.len() as u64);
                for d in served {
                    c.digest(d);
                }
            }
        }
    }

    /// Listing this payload concerns, if any.
    pub fn listing(&self) -> Option<Digest> {
        match self {
            Payload::Listing(l) => Some(l.listing_id),
            Payload::Transfer { reference, .. } => reference.listing(),
            Payload::Contract { listing_id, .. }
            | Payload::Delivery { listing_id, .. }
            | Payload::Notice { listing_id, .. }
            | Payload::Penalty { listing_id, .. } => Some(*listing_id),
            Payload::Marker { .. } | Payload::Registration { .. } | Payload::Query { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: Digest,
    pub kind: TxKind,
    pub actor: Pseudonym,
    pub counterparty: Option<Pseudonym>,
    pub payload: Payload,
    pub timestamp: Tick,
    #[serde(with = "hex_bytes")]
    pub signature: Vec<u8>,
}

/// Signed balance changes caused by one transaction.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct BalanceEffects {
    pub deltas: Vec<(Pseudonym, Coin)>,
    pub minted: Coin,
    pub burned: Coin,
}

impl Transaction {
    /// Builds and signs a transaction as `signer`.
    pub fn signed(
        signer: &PseudonymousId,
        kind: TxKind,
        counterparty: Option<Pseudonym>,
        payload: Payload,
        timestamp: Tick,
    ) -> Self {
        let mut tx = Transaction {
            tx_id: Digest::ZERO,
            kind,
            actor: signer.pseudonym(),
            counterparty,
            payload,
            timestamp,
            signature: Vec::new(),
        };
        tx.signature = signer.sign(&tx.signing_bytes());
        tx.tx_id = tx.compute_id();
        tx
    }

    pub(crate) fn genesis() -> Self {
        let mut tx = Transaction {
            tx_id: Digest::ZERO,
            kind: TxKind::Genesis,
            actor: Digest::ZERO,
            counterparty: None,
            payload: Payload::Marker {
                note: "newstrad genesis".into(),
            },
            timestamp: 0,
            signature: Vec::new(),
        };
        tx.tx_id = tx.compute_id();
        tx
    }

    /// Canonical bytes covered by the signature: every field except
    /// `tx_id` and `signature`.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut c = Canonical::new();
        c.str(self.kind.tag())
            .digest(&self.actor)
            .opt_digest(self.counterparty.as_ref());
        self.payload.encode(&mut c);
        c.u64(self.timestamp);
        c.into_bytes()
    }

    /// Digest over every field other than `tx_id`.
    pub fn compute_id(&self) -> Digest {
        Canonical::new()
            .bytes(&self.signing_bytes())
            .bytes(&self.signature)
            .hash()
    }

    pub fn listing(&self) -> Option<Digest> {
        self.payload.listing()
    }

    pub fn amount(&self) -> Option<&Coin> {
        match &self.payload {
            Payload::Transfer { amount, .. } | Payload::Penalty { amount, .. } => Some(amount),
            _ => None,
        }
    }

    pub fn balance_effects(&self) -> BalanceEffects {
        let mut fx = BalanceEffects::default();
        match (&self.kind, &self.payload) {
            (TxKind::Payment, Payload::Transfer { amount, .. }) => {
                if let Some(to) = self.counterparty {
                    fx.deltas.push((self.actor, -amount.clone()));
                    fx.deltas.push((to, amount.clone()));
                }
            }
            (TxKind::RewardGranted, Payload::Transfer { amount, source, .. }) => {
                fx.deltas.push((self.actor, amount.clone()));
                match source {
                    Some(payer) => fx.deltas.push((*payer, -amount.clone())),
                    None => fx.minted = amount.clone(),
                }
            }
            (TxKind::Refund, Payload::Transfer { amount, source, .. }) => {
                if let Some(to) = self.counterparty {
                    fx.deltas.push((to, amount.clone()));
                    match source {
                        Some(payer) => fx.deltas.push((*payer, -amount.clone())),
                        None => fx.minted = amount.clone(),
                    }
                }
            }
            (TxKind::PenaltyImposed, Payload::Penalty { amount, .. }) => {
                if let Some(offender) = self.counterparty {
                    fx.deltas.push((offender, -amount.clone()));
                    fx.burned = amount.clone();
                }
            }
            _ => {}
        }
        fx
    }
}
