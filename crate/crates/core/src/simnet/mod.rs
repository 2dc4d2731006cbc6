//! Deterministic discrete-event simulation of the whole marketplace.
//!
//! A [`Simulation`] is built from a [`Scenario`] and a [`SimConfig`]. Events
//! run in `(at, seq)` order on a logical clock, and every coin balance is
//! derived from ledger transactions as blocks are appended. Failures inside
//! an event are recorded in the report instead of aborting the run.

mod report;
mod scenario;

pub use report::{
    AllocationEvent, DeliveryEvent, EventError, ListingEvent, ParticipantRecord, PlanLine,
    QueryEvent, SimulationReport, VerdictEvent,
};
pub use scenario::{Action, ActorSpec, EventSpec, MinerSpec, Role, Scenario};

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::blockcop::{self, AuditError, AuditPolicy, Complaint, ComplaintKind, ServiceFailure};
use crate::delivery::{self, DeliveryContract, DeliveryError};
use crate::digest::{Canonical, Digest};
use crate::identity::{generate_identity, Pseudonym, PseudonymousId, SignatureInputs};
use crate::ledger::{Chain, LedgerError, MinerRole, Payload, Reference, Transaction, TxKind};
use crate::market::{self, MarketError, MinerId, MinerPool, NewsListing, Query, RequeryDecision};
use crate::num::{coin, coin_from_u64, format_coin};
use crate::storage::{self, AllocationError, AllocationRequest, FileMinerProfile};
use crate::{Coin, Tick};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("scenario line {line}, column {column}: {message}")]
    BadScenario {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("event at tick {at} is before the current tick {now}")]
    PastEvent { at: Tick, now: Tick },
    #[error("no participant with pseudonym {0}")]
    UnknownActor(Pseudonym),
}

/// Tunable protocol parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Overrides the scenario's own seed when set.
    pub seed: Option<u64>,
    pub t_r: Tick,
    pub t_d: Tick,
    pub deadline_window: Tick,
    pub penalty_multiplier: Coin,
    pub listing_reward: Coin,
    pub default_threshold: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: None,
            t_r: 100,
            t_d: 1000,
            deadline_window: 50,
            penalty_multiplier: coin(2),
            listing_reward: coin(1),
            default_threshold: 8,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.t_r == 0 || self.t_d == 0 || self.deadline_window == 0 {
            return bad("tick values must be at least 1");
        }
        if self.penalty_multiplier < Coin::one() {
            return bad("penalty multiplier must be at least 1");
        }
        if self.listing_reward < Coin::zero() {
            return bad("listing reward must be non-negative");
        }
        if self.default_threshold == 0 {
            return bad("threshold must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
enum ActionError {
    #[error("unknown participant {0:?}")]
    UnknownName(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label {0:?} is already in use")]
    DuplicateLabel(String),
    #[error("{0:?} cannot take part in this step")]
    WrongRole(String),
    #[error("{0:?} did not post this listing")]
    NotSeller(String),
    #[error("no delivery contract for this buyer and listing")]
    NoContract,
    #[error("balance {available} cannot cover {needed}")]
    InsufficientFunds { needed: String, available: String },
    #[error("allocation failed: {}", .0.name())]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Delivery(#[from] DeliveryError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

struct Participant {
    role: Role,
    pseudonym: Pseudonym,
    /// `None` for news miners, whose identity lives in the miner pool.
    identity: Option<PseudonymousId>,
    secret: String,
}

struct ListingState {
    listing_id: Digest,
    seller: String,
    content: Vec<u8>,
}

struct QueryState {
    query: Query,
    serving_miner: MinerId,
}

struct FileMinerState {
    miner_id: String,
    fee: Coin,
    capacity: u64,
}

pub struct Simulation {
    scenario_name: String,
    seed: u64,
    config: SimConfig,
    policy: AuditPolicy,
    clock: Tick,
    seq: u64,
    queue: BTreeMap<(Tick, u64), Action>,
    rng: ChaCha20Rng,
    chain: Chain,
    participants: BTreeMap<String, Participant>,
    cop: String,
    pool: MinerPool,
    file_miners: Vec<FileMinerState>,
    store: delivery::ChunkStore,
    initial: BTreeMap<Pseudonym, Coin>,
    balances: BTreeMap<Pseudonym, Coin>,
    applied_blocks: usize,
    minted: Coin,
    burned: Coin,
    negative: BTreeSet<Pseudonym>,
    listings: BTreeMap<String, ListingState>,
    queries: BTreeMap<String, QueryState>,
    contracts: BTreeMap<(Digest, Pseudonym), DeliveryContract>,
    complaints: BTreeMap<String, Complaint>,
    failures: Vec<ServiceFailure>,
    listing_log: Vec<ListingEvent>,
    query_log: Vec<QueryEvent>,
    allocation_log: Vec<AllocationEvent>,
    delivery_log: Vec<DeliveryEvent>,
    verdict_log: Vec<VerdictEvent>,
    errors: Vec<EventError>,
    running_failures: Vec<String>,
}

fn lookup<'a>(people: &'a BTreeMap<String, Participant>, name: &str) -> Result<&'a Participant, ActionError> {
    people.get(name).ok_or_else(|| ActionError::UnknownName(name.to_string()))
}

fn identity_of<'a>(
    people: &'a BTreeMap<String, Participant>,
    name: &str,
) -> Result<&'a PseudonymousId, ActionError> {
    lookup(people, name)?
        .identity
        .as_ref()
        .ok_or_else(|| ActionError::WrongRole(name.to_string()))
}

fn trader<'a>(people: &'a BTreeMap<String, Participant>, name: &str) -> Result<&'a PseudonymousId, ActionError> {
    let p = lookup(people, name)?;
    match p.role {
        Role::Seller | Role::Buyer => identity_of(people, name),
        _ => Err(ActionError::WrongRole(name.to_string())),
    }
}

impl Simulation {
    pub fn new(scenario: &Scenario, config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let seed = config.seed.or(scenario.seed).unwrap_or(0);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let salt = Canonical::new().str("newstrad simulation").u64(seed).hash();
        let policy = AuditPolicy {
            deadline_window: config.deadline_window,
            penalty_multiplier: config.penalty_multiplier.clone(),
        };

        let cops = scenario.actors.iter().filter(|a| a.role == Role::BlockCop).count();
        if cops > 1 {
            return Err(SimError::InvalidScenario("at most one BlockCop may be declared".into()));
        }
        let mut specs: Vec<ActorSpec> = scenario.actors.clone();
        if let Some(a) = scenario.actors.iter().find(|a| matches!(a.role, Role::NewsMiner | Role::FileMiner)) {
            return Err(SimError::InvalidScenario(format!(
                "{:?}: miners belong in the miners section",
                a.name
            )));
        }
        if let Some(a) = scenario.actors.iter().find(|a| a.balance < Coin::zero()) {
            return Err(SimError::InvalidScenario(format!("{:?}: negative initial balance", a.name)));
        }
        for m in &scenario.miners {
            let role = match m {
                MinerSpec::News { .. } => Role::NewsMiner,
                MinerSpec::File { fee, .. } => {
                    if *fee < Coin::zero() {
                        return Err(SimError::InvalidScenario(format!("{:?}: negative fee", m.name())));
                    }
                    Role::FileMiner
                }
            };
            specs.push(ActorSpec {
                name: m.name().to_string(),
                role,
                balance: Coin::zero(),
                secret: m.secret().map(str::to_string),
                nonce: None,
            });
        }
        let cop = match scenario.actors.iter().find(|a| a.role == Role::BlockCop) {
            Some(a) => a.name.clone(),
            None => {
                let name = "block-cop".to_string();
                specs.push(ActorSpec {
                    name: name.clone(),
                    role: Role::BlockCop,
                    balance: Coin::zero(),
                    secret: None,
                    nonce: None,
                });
                name
            }
        };

        let mut participants = BTreeMap::new();
        let mut taken = BTreeSet::new();
        for (index, ActorSpec { name, role, secret, nonce, .. }) in specs.iter().enumerate() {
            if !taken.insert(name.clone()) {
                return Err(SimError::InvalidScenario(format!("duplicate name {name:?}")));
            }
            let secret = match secret {
                Some(s) if !s.is_empty() => s.clone(),
                Some(_) => return Err(SimError::InvalidScenario(format!("{name:?}: empty secret"))),
                None => {
                    let mut raw = [0u8; 16];
                    rng.fill_bytes(&mut raw);
                    hex::encode(raw)
                }
            };
            let inputs = SignatureInputs {
                timestamp: 0,
                nonce: nonce.unwrap_or(index as u64),
                text: secret.clone().into_bytes(),
                salt,
            };
            let identity = generate_identity(&inputs, &mut rng).expect("secret is non-empty");
            participants.insert(
                name.clone(),
                Participant {
                    role: *role,
                    pseudonym: identity.pseudonym(),
                    identity: Some(identity),
                    secret,
                },
            );
        }
        let pseudonyms: BTreeSet<Pseudonym> = participants.values().map(|p| p.pseudonym).collect();
        if pseudonyms.len() != participants.len() {
            return Err(SimError::InvalidScenario("two participants share a pseudonym".into()));
        }

        let mut chain = Chain::new();
        for p in participants.values() {
            chain.enroll(p.identity.as_ref().expect("all identities present at setup"));
        }
        let mut registrations = Vec::new();
        let mut store = delivery::ChunkStore::new();
        let mut file_miners = Vec::new();
        for m in &scenario.miners {
            let p = &participants[m.name()];
            let id = p.identity.as_ref().expect("present at setup");
            let (role, free_space) = match m {
                MinerSpec::News { .. } => (MinerRole::News, 0),
                MinerSpec::File { fee, free_space, .. } => {
                    let miner_id = p.pseudonym.to_hex();
                    store.register_miner(miner_id.clone(), *free_space);
                    file_miners.push(FileMinerState {
                        miner_id,
                        fee: fee.clone(),
                        capacity: *free_space,
                    });
                    (MinerRole::File, *free_space)
                }
            };
            registrations.push(Transaction::signed(
                id,
                TxKind::MinerRegistered,
                None,
                Payload::Registration {
                    role,
                    sealing_key: id.sealing_public_key(),
                    free_space,
                },
                0,
            ));
        }
        if !registrations.is_empty() {
            chain
                .append_block(registrations, 0)
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        }
        let mut pool = MinerPool::new();
        for m in &scenario.miners {
            if let MinerSpec::News { name, latency, .. } = m {
                let p = participants.get_mut(name).expect("inserted above");
                let id = p.identity.take().expect("present at setup");
                pool.add(p.pseudonym.to_hex(), *latency, id);
            }
        }

        let initial: BTreeMap<Pseudonym, Coin> = specs
            .iter()
            .map(|a| (participants[&a.name].pseudonym, a.balance.clone()))
            .collect();
        let mut sim = Simulation {
            scenario_name: scenario.name.clone(),
            seed,
            config,
            policy,
            clock: 0,
            seq: 0,
            queue: BTreeMap::new(),
            rng,
            chain,
            participants,
            cop,
            pool,
            file_miners,
            store,
            balances: initial.clone(),
            initial,
            applied_blocks: 0,
            minted: Coin::zero(),
            burned: Coin::zero(),
            negative: BTreeSet::new(),
            listings: BTreeMap::new(),
            queries: BTreeMap::new(),
            contracts: BTreeMap::new(),
            complaints: BTreeMap::new(),
            failures: Vec::new(),
            listing_log: Vec::new(),
            query_log: Vec::new(),
            allocation_log: Vec::new(),
            delivery_log: Vec::new(),
            verdict_log: Vec::new(),
            errors: Vec::new(),
            running_failures: Vec::new(),
        };
        sim.settle();
        for e in &scenario.events {
            sim.schedule(e.at, e.action.clone())?;
        }
        Ok(sim)
    }

    pub fn now(&self) -> Tick {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn store(&self) -> &delivery::ChunkStore {
        &self.store
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn pseudonym_of(&self, name: &str) -> Option<Pseudonym> {
        self.participants.get(name).map(|p| p.pseudonym)
    }

    pub fn role_of(&self, name: &str) -> Option<Role> {
        self.participants.get(name).map(|p| p.role)
    }

    /// Name of the file miner's store vault, which is its pseudonym in hex.
    pub fn vault_id(&self, name: &str) -> Option<String> {
        self.participants
            .get(name)
            .filter(|p| p.role == Role::FileMiner)
            .map(|p| p.pseudonym.to_hex())
    }

    pub fn listing_id(&self, label: &str) -> Option<Digest> {
        self.listings.get(label).map(|l| l.listing_id)
    }

    pub fn contract(&self, listing: &Digest, buyer: &Pseudonym) -> Option<&DeliveryContract> {
        self.contracts.get(&(*listing, *buyer))
    }

    pub fn balance_of(&self, who: &Pseudonym) -> Result<Coin, SimError> {
        self.balances.get(who).cloned().ok_or(SimError::UnknownActor(*who))
    }

    /// Every secret that must never surface in an output: the random texts
    /// behind the pseudonyms and all private key bytes.
    pub fn secrets(&self) -> (Vec<String>, Vec<[u8; 32]>) {
        let texts = self.participants.values().map(|p| p.secret.clone()).collect();
        let mut keys: Vec<[u8; 32]> = self
            .participants
            .values()
            .filter_map(|p| p.identity.as_ref())
            .flat_map(|id| id.private_key_material())
            .collect();
        keys.extend(self.pool.miners().iter().flat_map(|m| m.identity().private_key_material()));
        (texts, keys)
    }

    pub fn schedule(&mut self, at: Tick, action: Action) -> Result<(), SimError> {
        if at < self.clock {
            return Err(SimError::PastEvent { at, now: self.clock });
        }
        self.queue.insert((at, self.seq), action);
        self.seq += 1;
        Ok(())
    }

    /// Runs every queued event with `at <= until` and reports the state.
    pub fn run(&mut self, until: Tick) -> SimulationReport {
        while let Some(entry) = self.queue.first_entry() {
            let (at, _) = *entry.key();
            if at > until {
                break;
            }
            let action = entry.remove();
            self.clock = at;
            let op = action.op();
            if let Err(e) = self.apply(action) {
                self.errors.push(EventError {
                    at,
                    op: op.to_string(),
                    message: e.to_string(),
                });
            }
            self.settle();
            self.check_conservation();
        }
        if until != Tick::MAX {
            self.clock = self.clock.max(until);
        }
        self.report()
    }

    /// Runs the whole queue.
    pub fn run_to_end(&mut self) -> SimulationReport {
        self.run(Tick::MAX)
    }

    /// Applies the balance effects of blocks appended since the last call.
    fn settle(&mut self) {
        for block in &self.chain.blocks()[self.applied_blocks..] {
            for tx in &block.transactions {
                let fx = tx.balance_effects();
                for (who, delta) in fx.deltas {
                    let entry = self.balances.entry(who).or_insert_with(Coin::zero);
                    *entry += delta;
                    if *entry < Coin::zero() {
                        self.negative.insert(who);
                    }
                }
                self.minted += fx.minted;
                self.burned += fx.burned;
            }
        }
        self.applied_blocks = self.chain.len();
    }

    fn check_conservation(&mut self) {
        let total: Coin = self.balances.values().cloned().sum();
        let initial: Coin = self.initial.values().cloned().sum();
        let expected = initial + self.minted.clone() - self.burned.clone();
        if total != expected {
            self.running_failures.push(format!(
                "conservation broken at tick {}: total {} expected {}",
                self.clock,
                format_coin(&total),
                format_coin(&expected)
            ));
        }
    }

    fn spendable(&self, who: &Pseudonym) -> Coin {
        self.balances.get(who).cloned().unwrap_or_else(Coin::zero)
    }

    fn ensure_funds(&self, who: &Pseudonym, needed: &Coin) -> Result<(), ActionError> {
        let available = self.spendable(who);
        if available < *needed {
            return Err(ActionError::InsufficientFunds {
                needed: format_coin(needed),
                available: format_coin(&available),
            });
        }
        Ok(())
    }

    fn apply(&mut self, action: Action) -> Result<(), ActionError> {
        let now = self.clock;
        match action {
            Action::PostListing {
                seller,
                label,
                headline,
                teaser,
                category,
                price,
                content,
            } => {
                if self.listings.contains_key(&label) {
                    return Err(ActionError::DuplicateLabel(label));
                }
                let id = trader(&self.participants, &seller)?;
                let listing = NewsListing::from_content(
                    id.pseudonym(),
                    headline,
                    teaser,
                    category,
                    price,
                    content.as_bytes(),
                );
                let (winner, _) = market::post_listing(
                    id,
                    &listing,
                    &mut self.pool,
                    &mut self.chain,
                    now,
                    &self.config.listing_reward,
                )?;
                self.listing_log.push(ListingEvent {
                    at: now,
                    listing_id: listing.listing_id,
                    seller: listing.seller,
                    validated_by: winner,
                });
                self.listings.insert(
                    label,
                    ListingState {
                        listing_id: listing.listing_id,
                        seller,
                        content: content.into_bytes(),
                    },
                );
            }
            Action::Query {
                buyer,
                label,
                text,
                category,
                coin,
            } => {
                if self.queries.contains_key(&label) {
                    return Err(ActionError::DuplicateLabel(label));
                }
                let who = trader(&self.participants, &buyer)?.pseudonym();
                self.ensure_funds(&who, &coin)?;
                let q = Query::new(who, text, category, coin, now);
                let outcome = market::execute_query(&q, &self.pool, &mut self.chain, now)?;
                self.log_query(&q, Some(&outcome));
                self.queries.insert(
                    label,
                    QueryState {
                        query: q,
                        serving_miner: outcome.serving_miner,
                    },
                );
            }
            Action::Requery { query, satisfied } => {
                let state = self
                    .queries
                    .get(&query)
                    .ok_or_else(|| ActionError::UnknownLabel(query.clone()))?;
                let elapsed = now - state.query.issued_at;
                let decision = market::requery(
                    &state.query,
                    satisfied,
                    elapsed,
                    self.config.t_r,
                    &state.serving_miner,
                );
                if let RequeryDecision::Requery(next) = decision {
                    let outcome = market::execute_query(&next, &self.pool, &mut self.chain, now);
                    match outcome {
                        Ok(outcome) => {
                            self.log_query(&next, Some(&outcome));
                            self.queries.insert(
                                query,
                                QueryState {
                                    query: next,
                                    serving_miner: outcome.serving_miner,
                                },
                            );
                        }
                        Err(e) => {
                            self.log_query(&next, None);
                            return Err(e.into());
                        }
                    }
                }
            }
            Action::Purchase { buyer, listing } => {
                let state = self
                    .listings
                    .get(&listing)
                    .ok_or_else(|| ActionError::UnknownLabel(listing.clone()))?;
                let id = trader(&self.participants, &buyer)?;
                let balance = self.spendable(&id.pseudonym());
                market::purchase(id, &state.listing_id, &mut self.chain, &balance, now)?;
            }
            Action::Deliver {
                seller,
                buyer,
                listing,
                budget,
                threshold,
            } => self.deliver(&seller, &buyer, &listing, budget, threshold)?,
            Action::Retrieve { buyer, listing } => self.retrieve(&buyer, &listing)?,
            Action::Complain {
                label,
                complainant,
                accused,
                listing,
                kind,
            } => {
                if self.complaints.contains_key(&label) {
                    return Err(ActionError::DuplicateLabel(label));
                }
                let listing_id = self
                    .listings
                    .get(&listing)
                    .ok_or_else(|| ActionError::UnknownLabel(listing.clone()))?
                    .listing_id;
                let complaint = Complaint {
                    complainant: lookup(&self.participants, &complainant)?.pseudonym,
                    accused: lookup(&self.participants, &accused)?.pseudonym,
                    listing_id,
                    filed_at: now,
                    kind,
                };
                self.complaints.insert(label, complaint.clone());
                self.audit(complaint)?;
            }
            Action::Audit { complaint } => {
                let c = self
                    .complaints
                    .get(&complaint)
                    .ok_or(ActionError::UnknownLabel(complaint))?
                    .clone();
                self.audit(c)?;
            }
            Action::DropChunks { miner } => {
                let p = lookup(&self.participants, &miner)?;
                if p.role != Role::FileMiner {
                    return Err(ActionError::WrongRole(miner));
                }
                let vault = p.pseudonym.to_hex();
                self.store.wipe_miner(&vault);
            }
            Action::PurgeExpired => {
                self.store.purge_expired(now);
            }
        }
        Ok(())
    }

    fn log_query(&mut self, q: &Query, outcome: Option<&market::QueryOutcome>) {
        self.query_log.push(QueryEvent {
            at: self.clock,
            query_digest: q.digest(),
            buyer: q.buyer,
            requery: q.requery,
            serving_miner: outcome.map(|o| o.serving_miner.clone()),
            results: outcome
                .map(|o| o.result.iter().map(|t| t.listing_id).collect())
                .unwrap_or_default(),
        });
    }

    fn deliver(
        &mut self,
        seller: &str,
        buyer: &str,
        listing: &str,
        budget: Coin,
        threshold: Option<usize>,
    ) -> Result<(), ActionError> {
        let now = self.clock;
        let state = self
            .listings
            .get(listing)
            .ok_or_else(|| ActionError::UnknownLabel(listing.to_string()))?;
        if state.seller != seller {
            return Err(ActionError::NotSeller(seller.to_string()));
        }
        let listing_id = state.listing_id;
        let seller_id = trader(&self.participants, seller)?;
        let buyer_id = trader(&self.participants, buyer)?;
        let recipient_key = buyer_id.sealing_public_key();
        let sealed = delivery::encrypt_for(&recipient_key, &state.content, &mut self.rng)?;

        let registry: Vec<FileMinerProfile<Coin>> = self
            .file_miners
            .iter()
            .map(|m| FileMinerProfile {
                miner_id: m.miner_id.clone(),
                fee: m.fee.clone(),
                free_space: self.store.free_space(&m.miner_id).unwrap_or(0),
            })
            .collect();
        let request = AllocationRequest {
            file_size: sealed.len() as u64,
            budget: budget.clone(),
            threshold: threshold.unwrap_or(self.config.default_threshold),
        };
        let plan = storage::allocate(&registry, &request)?;
        self.allocation_log.push(AllocationEvent {
            at: now,
            listing_id,
            file_size: request.file_size,
            budget,
            entries: plan
                .entries
                .iter()
                .map(|e| PlanLine {
                    miner_id: e.miner_id.clone(),
                    allotted: e.allotted,
                    fee: e.fee.clone(),
                })
                .collect(),
            total_cost: plan.total_cost.clone(),
        });
        let seller_pseudonym = seller_id.pseudonym();
        if self.spendable(&seller_pseudonym) < plan.total_cost {
            return Err(ActionError::InsufficientFunds {
                needed: format_coin(&plan.total_cost),
                available: format_coin(&self.spendable(&seller_pseudonym)),
            });
        }

        let chunks = delivery::chop(&sealed, &plan.entries)?;
        let addresses = self.store.store_chunks(&chunks)?;
        let fees: Vec<Transaction> = plan
            .entries
            .iter()
            .zip(&addresses)
            .map(|(entry, addr)| {
                let miner: Pseudonym = entry.miner_id.parse().expect("vault ids are pseudonym hex");
                Transaction::signed(
                    seller_id,
                    TxKind::Payment,
                    Some(miner),
                    Payload::Transfer {
                        amount: coin_from_u64(entry.allotted) * entry.fee.clone(),
                        reference: Reference::Storage {
                            listing_id,
                            chunk_digest: addr.chunk_digest,
                        },
                        source: None,
                    },
                    now,
                )
            })
            .collect();
        if let Err(e) = self.chain.append_block(fees, now) {
            for addr in &addresses {
                self.store.delete(addr);
            }
            return Err(e.into());
        }
        let contract = delivery::issue_contract(
            seller_id,
            recipient_key,
            addresses,
            buyer_id.pseudonym(),
            listing_id,
            &mut self.chain,
            now,
        )?;
        self.contracts.insert((listing_id, buyer_id.pseudonym()), contract);
        Ok(())
    }

    fn retrieve(&mut self, buyer: &str, listing: &str) -> Result<(), ActionError> {
        let now = self.clock;
        let listing_id = self
            .listings
            .get(listing)
            .ok_or_else(|| ActionError::UnknownLabel(listing.to_string()))?
            .listing_id;
        let buyer_id = trader(&self.participants, buyer)?;
        let contract = self
            .contracts
            .get(&(listing_id, buyer_id.pseudonym()))
            .ok_or(ActionError::NoContract)?;
        let sealed = match delivery::retrieve_and_join(contract, &mut self.store, now, self.config.t_d) {
            Ok(sealed) => sealed,
            Err(DeliveryError::ChunkMissing(digest)) => {
                if let Some(addr) = contract.chunk_addresses.iter().find(|a| a.chunk_digest == digest) {
                    if let Ok(miner) = addr.miner_id.parse() {
                        self.failures.push(ServiceFailure {
                            miner,
                            chunk_digest: digest,
                            at: now,
                        });
                    }
                }
                return Err(DeliveryError::ChunkMissing(digest).into());
            }
            Err(e) => return Err(e.into()),
        };
        let plaintext = delivery::decrypt(&sealed, buyer_id, contract, &mut self.chain, now)?;
        self.delivery_log.push(DeliveryEvent {
            at: now,
            listing_id,
            recipient: buyer_id.pseudonym(),
            plaintext_digest: Digest::of(&plaintext),
        });
        Ok(())
    }

    fn audit(&mut self, complaint: Complaint) -> Result<(), ActionError> {
        let now = self.clock;
        let cop = identity_of(&self.participants, &self.cop)?;
        let result = match complaint.kind {
            ComplaintKind::SellerNoDelivery => {
                blockcop::audit_sale(cop, &mut self.chain, &complaint, now, &self.policy)
            }
            ComplaintKind::FileMinerNoService => blockcop::audit_file_miner(
                cop,
                &mut self.chain,
                &complaint,
                now,
                &self.failures,
                &self.policy,
            ),
        };
        match result {
            Ok(verdict) => {
                self.verdict_log.push(VerdictEvent {
                    at: now,
                    complaint,
                    verdict: Some(verdict),
                    dismissed: None,
                });
                Ok(())
            }
            Err(AuditError::Ledger(e)) => Err(e.into()),
            Err(e) => {
                self.verdict_log.push(VerdictEvent {
                    at: now,
                    complaint,
                    verdict: None,
                    dismissed: Some(format!("{e:?}")),
                });
                Ok(())
            }
        }
    }

    /// Balances recomputed from the initial endowments and the chain alone.
    pub fn replay_balances(&self) -> BTreeMap<Pseudonym, Coin> {
        let mut balances = self.initial.clone();
        for tx in self.chain.transactions() {
            for (who, delta) in tx.balance_effects().deltas {
                *balances.entry(who).or_insert_with(Coin::zero) += delta;
            }
        }
        balances
    }

    fn invariant_failures(&self) -> Vec<String> {
        let mut out = self.running_failures.clone();
        let verdict = self.chain.verify();
        if !verdict.valid {
            out.push(format!("chain invalid at block {:?}", verdict.first_bad_index));
        }
        if self.replay_balances() != self.balances {
            out.push("balances disagree with the ledger".into());
        }
        for a in &self.allocation_log {
            if a.total_cost > a.budget {
                out.push(format!("allocation for {} exceeds its budget", a.listing_id));
            }
            if a.entries.iter().map(|e| e.allotted).sum::<u64>() != a.file_size {
                out.push(format!("allocation for {} does not cover the file", a.listing_id));
            }
        }
        for d in &self.delivery_log {
            if d.plaintext_digest != d.listing_id {
                out.push(format!("delivery of {} does not match the listing", d.listing_id));
            }
        }
        for m in &self.file_miners {
            let free = self.store.free_space(&m.miner_id).unwrap_or(0);
            if free + self.store.stored_bytes(&m.miner_id) != m.capacity {
                out.push(format!("space accounting broken for miner {}", m.miner_id));
            }
        }
        let dump = self.chain.to_jsonl();
        let (texts, keys) = self.secrets();
        if texts.iter().any(|t| dump.contains(t.as_str()))
            || keys.iter().any(|k| dump.contains(&hex::encode(k)))
        {
            out.push("ledger dump exposes identity secrets".into());
        }
        out
    }

    pub fn report(&self) -> SimulationReport {
        let verification = self.chain.verify();
        let mut participants: Vec<ParticipantRecord> = self
            .participants
            .values()
            .map(|p| {
                let (verifying_key, sealing_key) = match &p.identity {
                    Some(id) => (id.public_key(), id.sealing_public_key()),
                    None => {
                        let hex = p.pseudonym.to_hex();
                        let m = self.pool.get(&hex).expect("news miners live in the pool");
                        (m.identity().public_key(), m.identity().sealing_public_key())
                    }
                };
                ParticipantRecord {
                    pseudonym: p.pseudonym,
                    role: p.role,
                    verifying_key,
                    sealing_key,
                }
            })
            .collect();
        participants.sort_by_key(|p| p.pseudonym);
        SimulationReport {
            scenario: self.scenario_name.clone(),
            seed: self.seed,
            final_tick: self.clock,
            chain_valid: verification.valid,
            first_bad_index: verification.first_bad_index,
            participants,
            initial_balances: self.initial.clone(),
            balances: self.balances.clone(),
            minted: self.minted.clone(),
            burned: self.burned.clone(),
            negative_balances: self.negative.iter().copied().collect(),
            listings: self.listing_log.clone(),
            queries: self.query_log.clone(),
            allocations: self.allocation_log.clone(),
            deliveries: self.delivery_log.clone(),
            verdicts: self.verdict_log.clone(),
            service_failures: self.failures.clone(),
            errors: self.errors.clone(),
            invariant_failures: self.invariant_failures(),
            chain: self.chain.blocks().to_vec(),
        }
    }
}
