use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use super::Role;
use crate::blockcop::{Complaint, ServiceFailure, Verdict};
use crate::digest::{hex_key, Digest};
use crate::identity::Pseudonym;
use crate::ledger::Block;
use crate::num::{coin_serde, format_coin};
use crate::{Coin, Tick};

fn coin_map<S: Serializer>(map: &BTreeMap<Pseudonym, Coin>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(map.iter().map(|(k, v)| (k.to_hex(), format_coin(v))))
}

/// Everything a run produced. Participants appear only by pseudonym.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub seed: u64,
    pub final_tick: Tick,
    pub chain_valid: bool,
    pub first_bad_index: Option<u64>,
    pub participants: Vec<ParticipantRecord>,
    #[serde(serialize_with = "coin_map")]
    pub initial_balances: BTreeMap<Pseudonym, Coin>,
    #[serde(serialize_with = "coin_map")]
    pub balances: BTreeMap<Pseudonym, Coin>,
    #[serde(with = "coin_serde")]
    pub minted: Coin,
    #[serde(with = "coin_serde")]
    pub burned: Coin,
    pub negative_balances: Vec<Pseudonym>,
    pub listings: Vec<ListingEvent>,
    pub queries: Vec<QueryEvent>,
    pub allocations: Vec<AllocationEvent>,
    pub deliveries: Vec<DeliveryEvent>,
    pub verdicts: Vec<VerdictEvent>,
    pub service_failures: Vec<ServiceFailure>,
    pub errors: Vec<EventError>,
    pub invariant_failures: Vec<String>,
    pub chain: Vec<Block>,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn is_clean(&self) -> bool {
        self.invariant_failures.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParticipantRecord {
    pub pseudonym: Pseudonym,
    pub role: Role,
    #[serde(with = "hex_key")]
    pub verifying_key: [u8; 32],
    #[serde(with = "hex_key")]
    pub sealing_key: [u8; 32],
}

#[derive(Clone, Debug, Serialize)]
pub struct ListingEvent {
    pub at: Tick,
    pub listing_id: Digest,
    pub seller: Pseudonym,
    pub validated_by: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryEvent {
    pub at: Tick,
    pub query_digest: Digest,
    pub buyer: Pseudonym,
    pub requery: bool,
    pub serving_miner: Option<String>,
    pub results: Vec<Digest>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanLine {
    pub miner_id: String,
    pub allotted: u64,
    #[serde(with = "coin_serde")]
    pub fee: Coin,
}

#[derive(Clone, Debug, Serialize)]
pub struct AllocationEvent {
    pub at: Tick,
    pub listing_id: Digest,
    pub file_size: u64,
    #[serde(with = "coin_serde")]
    pub budget: Coin,
    pub entries: Vec<PlanLine>,
    #[serde(with = "coin_serde")]
    pub total_cost: Coin,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeliveryEvent {
    pub at: Tick,
    pub listing_id: Digest,
    pub recipient: Pseudonym,
    pub plaintext_digest: Digest,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictEvent {
    pub at: Tick,
    pub complaint: Complaint,
    pub verdict: Option<Verdict>,
    pub dismissed: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EventError {
    pub at: Tick,
    pub op: String,
    pub message: String,
}
