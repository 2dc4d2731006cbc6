//! Listings, the news-miner race, buyer queries and purchases.
//!
//! "First" in a race means lowest latency; equal latencies go to the
//! lexicographically smallest miner id, so every race is reproducible.

use std::collections::BTreeSet;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{Canonical, Digest};
use crate::identity::{Pseudonym, PseudonymousId};
use crate::ledger::{
    Block, Chain, LedgerError, ListingRecord, Payload, Reference, Transaction, TxKind,
};
use crate::num::{coin_from_u64, coin_serde, format_coin};
use crate::{Coin, Tick};

pub type MinerId = String;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarketError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("no eligible news miner")]
    NoMinersAvailable,
    #[error("listing {0} is not on the chain")]
    UnknownListing(Digest),
    #[error("balance {available} cannot cover price {needed}")]
    InsufficientFunds { needed: String, available: String },
    #[error("a fresh query must carry a positive coin")]
    ZeroCoin,
    #[error("listing seller does not match the posting identity")]
    SellerMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewsListing {
    pub listing_id: Digest,
    pub seller: Pseudonym,
    pub headline: String,
    /// The part of the story the seller chooses to expose.
    pub teaser: String,
    pub category: String,
    pub price: u64,
    pub full_content_size: u64,
}

impl NewsListing {
    /// Keys the listing by the digest of its full content. The content itself
    /// stays with the seller.
    pub fn from_content(
        seller: Pseudonym,
        headline: impl Into<String>,
        teaser: impl Into<String>,
        category: impl Into<String>,
        price: u64,
        content: &[u8],
    ) -> Self {
        NewsListing {
            listing_id: Digest::of(content),
            seller,
            headline: headline.into(),
            teaser: teaser.into(),
            category: category.into(),
            price,
            full_content_size: content.len() as u64,
        }
    }

    pub fn record(&self) -> ListingRecord {
        ListingRecord {
            listing_id: self.listing_id,
            headline: self.headline.clone(),
            teaser: self.teaser.clone(),
            category: self.category.clone(),
            price: self.price,
            full_content_size: self.full_content_size,
        }
    }
}

pub struct NewsMiner {
    pub miner_id: MinerId,
    pub latency: Tick,
    pub stored_listings: BTreeSet<Digest>,
    identity: PseudonymousId,
}

impl NewsMiner {
    pub fn pseudonym(&self) -> Pseudonym {
        self.identity.pseudonym()
    }

    pub fn identity(&self) -> &PseudonymousId {
        &self.identity
    }
}

#[derive(Default)]
pub struct MinerPool {
    miners: Vec<NewsMiner>,
}

impl MinerPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, miner_id: impl Into<MinerId>, latency: Tick, identity: PseudonymousId) {
        self.miners.push(NewsMiner {
            miner_id: miner_id.into(),
            latency,
            stored_listings: BTreeSet::new(),
            identity,
        });
    }

    pub fn miners(&self) -> &[NewsMiner] {
        &self.miners
    }

    pub fn get(&self, miner_id: &str) -> Option<&NewsMiner> {
        self.miners.iter().find(|m| m.miner_id == miner_id)
    }

    /// Position of the race winner among miners accepted by `eligible`.
    fn fastest(&self, eligible: impl Fn(&NewsMiner) -> bool) -> Option<usize> {
        self.miners
            .iter()
            .enumerate()
            .filter(|(_, m)| eligible(m))
            .min_by(|(_, a), (_, b)| {
                a.latency
                    .cmp(&b.latency)
                    .then_with(|| a.miner_id.cmp(&b.miner_id))
            })
            .map(|(i, _)| i)
    }
}

/// Validates and records a new listing. The fastest miner appends the block
/// and is rewarded with `reward` freshly minted coin; every miner keeps the
/// listing for later queries.
pub fn post_listing(
    seller: &PseudonymousId,
    listing: &NewsListing,
    pool: &mut MinerPool,
    chain: &mut Chain,
    now: Tick,
    reward: &Coin,
) -> Result<(MinerId, Block), MarketError> {
    if listing.seller != seller.pseudonym() {
        return Err(MarketError::SellerMismatch);
    }
    if chain.has_listing(&listing.listing_id) {
        return Err(LedgerError::DuplicateContent(listing.listing_id).into());
    }
    let winner = pool.fastest(|_| true).ok_or(MarketError::NoMinersAvailable)?;
    let miner = &pool.miners[winner];
    let posted = Transaction::signed(
        seller,
        TxKind::ListingPosted,
        None,
        Payload::Listing(listing.record()),
        now,
    );
    let rewarded = Transaction::signed(
        &miner.identity,
        TxKind::RewardGranted,
        None,
        Payload::Transfer {
            amount: reward.clone(),
            reference: Reference::Listing {
                listing_id: listing.listing_id,
            },
            source: None,
        },
        now,
    );
    let block = chain.append_block(vec![posted, rewarded], now)?.clone();
    let winner_id = miner.miner_id.clone();
    for m in &mut pool.miners {
        m.stored_listings.insert(listing.listing_id);
    }
    Ok((winner_id, block))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub buyer: Pseudonym,
    pub text: String,
    pub category: Option<String>,
    #[serde(with = "coin_serde")]
    pub coin: Coin,
    pub issued_at: Tick,
    pub excluded_miners: BTreeSet<MinerId>,
    /// Set on re-queries, which ride on the coin already paid.
    pub requery: bool,
}

impl Query {
    pub fn new(
        buyer: Pseudonym,
        text: impl Into<String>,
        category: Option<String>,
        coin: Coin,
        issued_at: Tick,
    ) -> Self {
        Query {
            buyer,
            text: text.into(),
            category,
            coin,
            issued_at,
            excluded_miners: BTreeSet::new(),
            requery: false,
        }
    }

    /// Identifies the query across its re-queries.
    pub fn digest(&self) -> Digest {
        Canonical::new()
            .digest(&self.buyer)
            .str(&self.text)
            .str(self.category.as_deref().unwrap_or(""))
            .str(&format_coin(&self.coin))
            .u64(self.issued_at)
            .hash()
    }

    pub fn matches(&self, listing: &ListingRecord) -> bool {
        let needle = self.text.to_lowercase();
        let text_hit = listing.headline.to_lowercase().contains(&needle)
            || listing.teaser.to_lowercase().contains(&needle);
        let category_hit = self
            .category
            .as_ref()
            .is_none_or(|c| *c == listing.category);
        text_hit && category_hit
    }
}

/// What a buyer sees before purchase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingTeaser {
    pub listing_id: Digest,
    pub headline: String,
    pub teaser: String,
    pub category: String,
    pub price: u64,
}

impl From<&ListingRecord> for ListingTeaser {
    fn from(l: &ListingRecord) -> Self {
        ListingTeaser {
            listing_id: l.listing_id,
            headline: l.headline.clone(),
            teaser: l.teaser.clone(),
            category: l.category.clone(),
            price: l.price,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryOutcome {
    pub result: Vec<ListingTeaser>,
    pub serving_miner: MinerId,
}

/// Looks up a posted listing and its seller.
pub fn find_listing<'a>(chain: &'a Chain, listing_id: &Digest) -> Option<(Pseudonym, &'a ListingRecord)> {
    chain.transactions().find_map(|tx| match (&tx.kind, &tx.payload) {
        (TxKind::ListingPosted, Payload::Listing(l)) if l.listing_id == *listing_id => {
            Some((tx.actor, l))
        }
        _ => None,
    })
}

/// Serves a query from the fastest non-excluded miner.
///
/// Miners holding at least one match take precedence; when no eligible
/// miner holds a match, the fastest eligible miner answers with an empty
/// result. The serving miner is credited with the query coin, debited from
/// the buyer on a fresh query and minted on a re-query.
pub fn execute_query(
    q: &Query,
    pool: &MinerPool,
    chain: &mut Chain,
    now: Tick,
) -> Result<QueryOutcome, MarketError> {
    if !q.requery && q.coin <= Coin::zero() {
        return Err(MarketError::ZeroCoin);
    }
    let eligible = |m: &NewsMiner| !q.excluded_miners.contains(&m.miner_id);
    let matches_of = |m: &NewsMiner| -> Vec<&ListingRecord> {
        m.stored_listings
            .iter()
            .filter_map(|id| find_listing(chain, id).map(|(_, l)| l))
            .filter(|l| q.matches(l))
            .collect()
    };
    let server = pool
        .fastest(|m| eligible(m) && !matches_of(m).is_empty())
        .or_else(|| pool.fastest(eligible))
        .ok_or(MarketError::NoMinersAvailable)?;
    let miner = &pool.miners[server];
    let result: Vec<ListingTeaser> = matches_of(miner).into_iter().map(Into::into).collect();

    let query_digest = q.digest();
    let served = Transaction::signed(
        &miner.identity,
        TxKind::QueryServed,
        Some(q.buyer),
        Payload::Query {
            query_digest,
            served: result.iter().map(|t| t.listing_id).collect(),
        },
        now,
    );
    let reward = Transaction::signed(
        &miner.identity,
        TxKind::RewardGranted,
        Some(q.buyer),
        Payload::Transfer {
            amount: q.coin.clone(),
            reference: Reference::Query { query_digest },
            source: (!q.requery).then_some(q.buyer),
        },
        now,
    );
    chain.append_block(vec![served, reward], now)?;
    Ok(QueryOutcome {
        result,
        serving_miner: miner.miner_id.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RequeryDecision {
    /// Re-issue with the prior miner excluded, on the same coin.
    Requery(Query),
    StayWithResult,
}

/// Re-query rule: an unsatisfied buyer still inside the window (`t_c <= t_r`)
/// may ask again for free, excluding the miner that served last time.
pub fn requery(q: &Query, satisfied: bool, t_c: Tick, t_r: Tick, prior_miner: &str) -> RequeryDecision {
    if !satisfied && t_c <= t_r {
        let mut next = q.clone();
        next.excluded_miners.insert(prior_miner.to_string());
        next.requery = true;
        RequeryDecision::Requery(next)
    } else {
        RequeryDecision::StayWithResult
    }
}

/// Records a buyer's payment for a listing. `balance` is the buyer's current
/// coin position as tracked by the caller.
pub fn purchase(
    buyer: &PseudonymousId,
    listing_id: &Digest,
    chain: &mut Chain,
    balance: &Coin,
    now: Tick,
) -> Result<Transaction, MarketError> {
    let (seller, listing) =
        find_listing(chain, listing_id).ok_or(MarketError::UnknownListing(*listing_id))?;
    let price = coin_from_u64(listing.price);
    if *balance < price {
        return Err(MarketError::InsufficientFunds {
            needed: format_coin(&price),
            available: format_coin(balance),
        });
    }
    let tx = Transaction::signed(
        buyer,
        TxKind::Payment,
        Some(seller),
        Payload::Transfer {
            amount: price,
            reference: Reference::Listing {
                listing_id: *listing_id,
            },
            source: None,
        },
        now,
    );
    chain.append_block(vec![tx.clone()], now)?;
    Ok(tx)
}
