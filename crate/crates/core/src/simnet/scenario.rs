use serde::{Deserialize, Serialize};

use super::SimError;
use crate::ledger::ComplaintKind;
use crate::num::coin_serde;
use crate::{Coin, Tick};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Seller,
    Buyer,
    NewsMiner,
    FileMiner,
    BlockCop,
}

/// A scripted simulation: who takes part and what happens when.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub actors: Vec<ActorSpec>,
    #[serde(default)]
    pub miners: Vec<MinerSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::BadScenario {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub name: String,
    pub role: Role,
    #[serde(default = "zero", with = "coin_serde")]
    pub balance: Coin,
    /// Random text the pseudonym is derived from. Drawn from the seed when absent.
    #[serde(default)]
    pub secret: Option<String>,
    #[serde(default)]
    pub nonce: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MinerSpec {
    News {
        name: String,
        latency: Tick,
        #[serde(default)]
        secret: Option<String>,
    },
    File {
        name: String,
        #[serde(with = "coin_serde")]
        fee: Coin,
        free_space: u64,
        #[serde(default)]
        secret: Option<String>,
    },
}

impl MinerSpec {
    pub fn name(&self) -> &str {
        match self {
            MinerSpec::News { name, .. } | MinerSpec::File { name, .. } => name,
        }
    }

    pub fn secret(&self) -> Option<&str> {
        match self {
            MinerSpec::News { secret, .. } | MinerSpec::File { secret, .. } => secret.as_deref(),
        }
    }
}

fn zero() -> Coin {
    crate::num::coin(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub at: Tick,
    #[serde(flatten)]
    pub action: Action,
}

/// One scripted step. Names refer to actors and miners; labels name
/// listings, queries and complaints for later events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "args", rename_all = "snake_case")]
pub enum Action {
    PostListing {
        seller: String,
        label: String,
        headline: String,
        teaser: String,
        category: String,
        price: u64,
        content: String,
    },
    Query {
        buyer: String,
        label: String,
        text: String,
        #[serde(default)]
        category: Option<String>,
        #[serde(with = "coin_serde")]
        coin: Coin,
    },
    Requery {
        query: String,
        satisfied: bool,
    },
    Purchase {
        buyer: String,
        listing: String,
    },
    Deliver {
        seller: String,
        buyer: String,
        listing: String,
        #[serde(with = "coin_serde")]
        budget: Coin,
        #[serde(default)]
        threshold: Option<usize>,
    },
    Retrieve {
        buyer: String,
        listing: String,
    },
    Complain {
        label: String,
        complainant: String,
        accused: String,
        listing: String,
        kind: ComplaintKind,
    },
    Audit {
        complaint: String,
    },
    /// Scripted misbehavior: a file miner silently drops everything it holds.
    DropChunks {
        miner: String,
    },
    PurgeExpired,
}

impl Action {
    pub fn op(&self) -> &'static str {
        match self {
            Action::PostListing { .. } => "post_listing",
            Action::Query { .. } => "query",
            Action::Requery { .. } => "requery",
            Action::Purchase { .. } => "purchase",
            Action::Deliver { .. } => "deliver",
            Action::Retrieve { .. } => "retrieve",
            Action::Complain { .. } => "complain",
            Action::Audit { .. } => "audit",
            Action::DropChunks { .. } => "drop_chunks",
            Action::PurgeExpired => "purge_expired",
        }
    }
}
