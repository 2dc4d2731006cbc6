//! Scenarios shipped with the crate.

use crate::simnet::{Scenario, SimError};

/// `(name, JSON source)` for every bundled scenario.
pub const BUNDLED: [(&str, &str); 4] = [
    ("honest_trade", include_str!("../scenarios/honest_trade.json")),
    ("fraud_seller", include_str!("../scenarios/fraud_seller.json")),
    ("vanishing_miner", include_str!("../scenarios/vanishing_miner.json")),
    ("requery_chain", include_str!("../scenarios/requery_chain.json")),
];

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Option<Result<Scenario, SimError>> {
    source(name).map(Scenario::from_json)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}
