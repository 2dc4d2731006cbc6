//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use serde_json::Value;

use newstrad::ledger::Block;
use newstrad::simnet::{Action, EventSpec, SimConfig, Simulation};
use newstrad::storage::{AllocationRequest, FileMinerProfile};
use newstrad::{scenarios, Coin};

pub fn rat(n: i64, d: i64) -> Coin {
    Coin::new(BigInt::from(n), BigInt::from(d))
}

pub fn count(n: u64) -> Coin {
    Coin::from_integer(BigInt::from(n))
}

/// A random allocation instance. Fees are small rationals; sizes span
/// 1 byte to 1 MB on a log scale.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_miners: usize,
) -> (Vec<FileMinerProfile<Coin>>, AllocationRequest<Coin>) {
    let exponent = rng.gen_range(0..=6u32);
    let file_size = rng.gen_range(1..=10u64.pow(exponent)).min(1_000_000);
    let n = rng.gen_range(1..=max_miners);
    let share = (2 * file_size / n as u64).max(1);
    let miners = (0..n)
        .map(|i| FileMinerProfile {
            miner_id: format!("m{i:02}"),
            fee: rat(rng.gen_range(0..=40), rng.gen_range(1..=8)),
            free_space: if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=share) },
        })
        .collect();
    let unit = rat(rng.gen_range(0..=40), rng.gen_range(1..=8));
    let request = AllocationRequest {
        file_size,
        budget: unit * count(file_size),
        threshold: rng.gen_range(1..=max_miners),
    };
    (miners, request)
}

/// Registry order scan without dividing: `fee * S <= B`.
pub fn candidate_oracle(
    miners: &[FileMinerProfile<Coin>],
    request: &AllocationRequest<Coin>,
) -> Vec<FileMinerProfile<Coin>> {
    let mut out = Vec::new();
    for m in miners {
        if out.len() == request.threshold {
            break;
        }
        if m.free_space > 0 && m.fee.clone() * count(request.file_size) <= request.budget {
            out.push(m.clone());
        }
    }
    out
}

/// Cheapest cost of storing `size` bytes on any subset of `candidates`,
/// filling each subset cheapest-first. `None` when no subset has room.
pub fn brute_force_min_cost(candidates: &[FileMinerProfile<Coin>], size: u64) -> Option<Coin> {
    assert!(candidates.len() <= 16, "oracle is exponential");
    let mut best: Option<Coin> = None;
    for mask in 1u32..(1 << candidates.len()) {
        let mut subset: Vec<&FileMinerProfile<Coin>> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, m)| m)
            .collect();
        if subset.iter().map(|m| m.free_space).sum::<u64>() < size {
            continue;
        }
        subset.sort_by(|a, b| a.fee.cmp(&b.fee));
        let mut left = size;
        let mut cost = Coin::zero();
        for m in subset {
            let take = left.min(m.free_space);
            cost += count(take) * m.fee.clone();
            left -= take;
        }
        if best.as_ref().is_none_or(|b| cost < *b) {
            best = Some(cost);
        }
    }
    best
}

/// The honest bundled trade plus a few extra queries: at least ten blocks of
/// assorted transaction kinds.
pub fn ten_block_chain() -> Vec<Block> {
    static BLOCKS: std::sync::OnceLock<Vec<Block>> = std::sync::OnceLock::new();
    BLOCKS.get_or_init(build_ten_blocks).clone()
}

fn build_ten_blocks() -> Vec<Block> {
    let mut scenario = scenarios::load("honest_trade").unwrap().unwrap();
    for (i, text) in ["council", "terminal", "spring"].iter().enumerate() {
        scenario.events.push(EventSpec {
            at: 30 + i as u64,
            action: Action::Query {
                buyer: "tomas".into(),
                label: format!("extra-{i}"),
                text: text.to_string(),
                category: None,
                coin: count(1),
            },
        });
    }
    let mut sim = Simulation::new(&scenario, SimConfig::default()).unwrap();
    sim.run_to_end();
    let blocks = sim.chain().blocks().to_vec();
    assert!(blocks.len() >= 10, "fixture has {} blocks", blocks.len());
    blocks[..10].to_vec()
}

fn leaves(v: &Value, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                path.push(k.clone());
                leaves(child, path, out);
                path.pop();
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                path.push(i.to_string());
                leaves(child, path, out);
                path.pop();
            }
        }
        Value::String(_) | Value::Number(_) | Value::Bool(_) => out.push(path.clone()),
        Value::Null => {}
    }
}

fn leaf_mut<'a>(v: &'a mut Value, path: &[String]) -> &'a mut Value {
    path.iter().fold(v, |node, key| match node {
        Value::Object(map) => map.get_mut(key).unwrap(),
        Value::Array(items) => &mut items[key.parse::<usize>().unwrap()],
        _ => unreachable!(),
    })
}

fn mutate_leaf<R: Rng>(leaf: &mut Value, rng: &mut R) {
    const HEX: &[u8] = b"0123456789abcdef";
    match leaf {
        Value::Number(n) => {
            let old = n.as_u64().unwrap_or(0);
            *leaf = Value::from(old ^ (1 << rng.gen_range(0..16)));
        }
        Value::Bool(b) => *b = !*b,
        Value::String(s) if !s.is_empty() => {
            let mut bytes = s.clone().into_bytes();
            let i = rng.gen_range(0..bytes.len());
            let is_hex = bytes.len() % 2 == 0 && bytes.iter().all(|c| HEX.contains(c));
            let pool: &[u8] = if is_hex { HEX } else { b"abcdefghijklmnopqrstuvwxyz0123456789 " };
            let old = bytes[i];
            while bytes[i] == old {
                bytes[i] = pool[rng.gen_range(0..pool.len())];
            }
            *s = String::from_utf8(bytes).unwrap();
        }
        Value::String(s) => s.push('x'),
        _ => unreachable!(),
    }
}

/// Changes one hashed leaf of block `index`. Retries until the edited block
/// still parses and actually differs from the original.
pub fn mutate_block<R: Rng>(blocks: &[Block], index: usize, rng: &mut R) -> Vec<Block> {
    let original = serde_json::to_value(&blocks[index]).unwrap();
    let mut paths = Vec::new();
    leaves(&original, &mut Vec::new(), &mut paths);
    loop {
        let mut edited = original.clone();
        let path = &paths[rng.gen_range(0..paths.len())];
        mutate_leaf(leaf_mut(&mut edited, path), rng);
        let Ok(block) = serde_json::from_value::<Block>(edited) else {
            continue;
        };
        if block == blocks[index] {
            continue;
        }
        let mut out = blocks.to_vec();
        out[index] = block;
        return out;
    }
}

use newstrad::delivery::{self, ChunkStore, DeliveryContract, DeliveryError};
use newstrad::identity::generate_identity;
use newstrad::storage::PlanEntry;
use newstrad::{Chain, Digest, PseudonymousId, SignatureInputs, Tick};

pub fn identity<R: rand::RngCore + rand::CryptoRng>(label: &str, rng: &mut R) -> PseudonymousId {
    let inputs = SignatureInputs {
        timestamp: 0,
        nonce: 0,
        text: label.as_bytes().to_vec(),
        salt: Digest::ZERO,
    };
    generate_identity(&inputs, rng).unwrap()
}

/// Seller, buyer, a chain that knows both, and a chunk store.
pub struct DeliveryRig {
    pub chain: Chain,
    pub store: ChunkStore,
    pub seller: PseudonymousId,
    pub buyer: PseudonymousId,
    next_miner: usize,
}

impl DeliveryRig {
    pub fn new<R: rand::RngCore + rand::CryptoRng>(rng: &mut R) -> Self {
        let seller = identity("rig seller", rng);
        let buyer = identity("rig buyer", rng);
        let mut chain = Chain::new();
        chain.enroll(&seller);
        chain.enroll(&buyer);
        DeliveryRig { chain, store: ChunkStore::new(), seller, buyer, next_miner: 0 }
    }

    /// Splits `sealed_len` into `parts` random non-empty allotments and
    /// registers one miner per allotment with exactly that much room.
    pub fn random_plan<R: Rng>(&mut self, sealed_len: u64, parts: usize, rng: &mut R) -> Vec<PlanEntry<Coin>> {
        let parts = parts.clamp(1, sealed_len as usize);
        let mut cuts: Vec<u64> = (0..parts - 1).map(|_| rng.gen_range(1..sealed_len)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut bounds = vec![0];
        bounds.extend(cuts);
        bounds.push(sealed_len);
        let base = self.next_miner;
        self.next_miner += bounds.len() - 1;
        bounds
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let miner_id = format!("fm-{}", base + i);
                self.store.register_miner(miner_id.clone(), w[1] - w[0]);
                PlanEntry { miner_id, allotted: w[1] - w[0], fee: Coin::zero() }
            })
            .collect()
    }

    /// encrypt, chop, store, contract
    pub fn ship<R: rand::RngCore + rand::CryptoRng>(
        &mut self,
        file: &[u8],
        parts: usize,
        now: Tick,
        rng: &mut R,
    ) -> Result<(DeliveryContract, Vec<u8>), DeliveryError> {
        let sealed = delivery::encrypt_for(&self.buyer.sealing_public_key(), file, rng)?;
        let plan = self.random_plan(sealed.len() as u64, parts, rng);
        let chunks = delivery::chop(&sealed, &plan)?;
        let addresses = self.store.store_chunks(&chunks)?;
        let contract = delivery::issue_contract(
            &self.seller,
            self.buyer.sealing_public_key(),
            addresses,
            self.buyer.pseudonym(),
            Digest::of(file),
            &mut self.chain,
            now,
        )?;
        Ok((contract, sealed))
    }

    /// retrieve, join, decrypt
    pub fn collect(&mut self, contract: &DeliveryContract, now: Tick, t_d: Tick) -> Result<Vec<u8>, DeliveryError> {
        let sealed = delivery::retrieve_and_join(contract, &mut self.store, now, t_d)?;
        delivery::decrypt(&sealed, &self.buyer, contract, &mut self.chain, now)
    }
}
