//! A pseudonymous news marketplace on an append-only hash-chained ledger.
//!
//! Sellers post priced listings that news miners race to validate, buyers
//! query and purchase them, and purchased files travel encrypted through a
//! budget-optimized set of file miners. A fraud auditor walks the ledger to
//! penalize sellers who take payment without delivering and file miners who
//! drop chunks they were paid to hold. Everything runs on a deterministic
//! discrete-event simulator.
//!
//! The storage allocator is generic over the scalar used for fees and budgets
//! (see [`num::Scalar`]); the rest of the crate settles on exact rationals
//! through the [`Coin`] alias.

pub mod blockcop;
pub mod delivery;
pub mod digest;
pub mod identity;
pub mod ledger;
pub mod market;
pub mod num;
pub mod scenarios;
pub mod simnet;
pub mod storage;

/// Exact coin amount. Fees, budgets, prices and balances all use it.
pub type Coin = num_rational::BigRational;

/// Allocation over exact rationals; the `T_p <= B` bound holds without rounding.
pub type ExactPlan = storage::AllocationPlan<Coin>;
pub type ExactMinerProfile = storage::FileMinerProfile<Coin>;
pub type ExactRequest = storage::AllocationRequest<Coin>;

/// Allocation over machine floats, for quick estimates only.
pub type FloatPlan = storage::AllocationPlan<f64>;
pub type FloatMinerProfile = storage::FileMinerProfile<f64>;
pub type FloatRequest = storage::AllocationRequest<f64>;

/// Logical simulation time.
pub type Tick = u64;

pub use digest::Digest;
pub use identity::{PseudonymousId, SignatureInputs};
pub use ledger::{Block, Chain, Transaction, TxKind};
