//! Budget-constrained placement of a file across file miners.
//!
//! The pipeline is: derive the per-byte budget `b = B / S`, scan the miner
//! registry in order for up to `T` miners charging at most `b` with free
//! space, sort those by fee, keep the cheapest prefix that covers the file,
//! and fill each kept miner to capacity except the last, which takes the
//! remainder. Because every kept fee is at most `b` and the allotments sum to
//! `S`, the total price never exceeds `B`.
//!
//! All routines are generic over [`Scalar`]; use rationals for exact
//! accounting.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{coin_serde, format_coin, Scalar};
use crate::Coin;

#[derive(Clone, Debug, PartialEq)]
pub struct FileMinerProfile<F> {
    pub miner_id: String,
    /// Coin per byte.
    pub fee: F,
    pub free_space: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationRequest<F> {
    pub file_size: u64,
    pub budget: F,
    /// Maximum number of candidates collected before finalization.
    pub threshold: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanEntry<F> {
    pub miner_id: String,
    pub allotted: u64,
    pub fee: F,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationPlan<F> {
    pub entries: Vec<PlanEntry<F>>,
    pub total_cost: F,
}

impl<F> AllocationPlan<F> {
    pub fn allotted_total(&self) -> u64 {
        self.entries.iter().map(|e| e.allotted).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AllocationError {
    #[error("file size must be positive")]
    ZeroFileSize,
    #[error("no file miner charges within the unit budget and has free space")]
    NoCandidates,
    #[error("selected miners lack {remaining} bytes of capacity")]
    InsufficientCapacity { remaining: u64 },
    #[error("invalid allocation request: {0}")]
    InvalidRequest(&'static str),
}

impl AllocationError {
    pub fn name(&self) -> &'static str {
        match self {
            AllocationError::ZeroFileSize => "ZeroFileSize",
            AllocationError::NoCandidates => "NoCandidates",
            AllocationError::InsufficientCapacity { .. } => "InsufficientCapacity",
            AllocationError::InvalidRequest(_) => "InvalidRequest",
        }
    }
}

/// Budget per byte, `budget / file_size`.
pub fn unit_budget<F: Scalar>(budget: &F, file_size: u64) -> Result<F, AllocationError> {
    if file_size == 0 {
        return Err(AllocationError::ZeroFileSize);
    }
    Ok(budget.clone() / F::from_count(file_size))
}

/// First-come scan of the registry: keeps miners with `fee <= unit_budget`
/// and some free space, stopping once `threshold` are collected.
pub fn select_candidates<F: Scalar>(
    miners: &[FileMinerProfile<F>],
    unit_budget: &F,
    threshold: usize,
) -> Result<Vec<FileMinerProfile<F>>, AllocationError> {
    if threshold == 0 {
        return Err(AllocationError::InvalidRequest("threshold must be at least 1"));
    }
    let picked: Vec<_> = miners
        .iter()
        .filter(|m| m.fee <= *unit_budget && m.free_space > 0)
        .take(threshold)
        .cloned()
        .collect();
    if picked.is_empty() {
        return Err(AllocationError::NoCandidates);
    }
    Ok(picked)
}

fn by_fee_then_id<F: Scalar>(a: &FileMinerProfile<F>, b: &FileMinerProfile<F>) -> Ordering {
    a.fee.order(&b.fee).then_with(|| a.miner_id.cmp(&b.miner_id))
}

/// Sorts candidates by ascending fee (ties by miner id) and keeps the
/// shortest prefix whose free space covers `file_size`.
pub fn finalize<F: Scalar>(
    mut candidates: Vec<FileMinerProfile<F>>,
    file_size: u64,
) -> Result<Vec<FileMinerProfile<F>>, AllocationError> {
    candidates.sort_by(by_fee_then_id);
    let mut remaining = i128::from(file_size);
    let mut kept = Vec::new();
    for miner in candidates {
        remaining -= i128::from(miner.free_space);
        kept.push(miner);
        if remaining <= 0 {
            return Ok(kept);
        }
    }
    Err(AllocationError::InsufficientCapacity {
        remaining: remaining as u64,
    })
}

/// Fills each miner to capacity in order; the miner that would overflow
/// takes only what is left.
///
/// Expects `finalized` to come from [`finalize`]. Miners past the point where
/// the file is covered get nothing and are left out.
pub fn allot<F: Scalar>(finalized: &[FileMinerProfile<F>], file_size: u64) -> Vec<PlanEntry<F>> {
    let mut remaining = file_size;
    let mut entries = Vec::with_capacity(finalized.len());
    for miner in finalized {
        if remaining == 0 {
            break;
        }
        let allotted = if remaining < miner.free_space {
            remaining
        } else {
            miner.free_space
        };
        remaining -= allotted;
        entries.push(PlanEntry {
            miner_id: miner.miner_id.clone(),
            allotted,
            fee: miner.fee.clone(),
        });
    }
    entries
}

/// Total price: sum of allotted bytes times per-byte fee.
pub fn plan_cost<F: Scalar>(entries: &[PlanEntry<F>]) -> F {
    entries.iter().fold(F::zero(), |acc, e| {
        acc + F::from_count(e.allotted) * e.fee.clone()
    })
}

/// Runs the whole pipeline.
pub fn allocate<F: Scalar>(
    miners: &[FileMinerProfile<F>],
    request: &AllocationRequest<F>,
) -> Result<AllocationPlan<F>, AllocationError> {
    if request.budget < F::zero() {
        return Err(AllocationError::InvalidRequest("budget must be non-negative"));
    }
    let b = unit_budget(&request.budget, request.file_size)?;
    let candidates = select_candidates(miners, &b, request.threshold)?;
    let finalized = finalize(candidates, request.file_size)?;
    let entries = allot(&finalized, request.file_size);
    let total_cost = plan_cost(&entries);
    Ok(AllocationPlan {
        entries,
        total_cost,
    })
}

/// One line of a miner registry file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub miner_id: String,
    #[serde(with = "coin_serde")]
    pub fee: Coin,
    pub free_space: u64,
}

#[derive(Debug, Error)]
#[error("registry line {line}: {message}")]
pub struct RegistryError {
    pub line: usize,
    pub message: String,
}

/// Parses a JSON-lines miner registry, preserving line order.
pub fn parse_registry(text: &str) -> Result<Vec<FileMinerProfile<Coin>>, RegistryError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RegistryRecord = serde_json::from_str(line).map_err(|e| RegistryError {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.fee < Coin::from_count(0) {
            return Err(RegistryError {
                line: i + 1,
                message: "fee must be non-negative".into(),
            });
        }
        out.push(FileMinerProfile {
            miner_id: rec.miner_id,
            fee: rec.fee,
            free_space: rec.free_space,
        });
    }
    Ok(out)
}

/// JSON form of an exact plan: coins as canonical strings.
pub fn plan_to_json(plan: &AllocationPlan<Coin>) -> serde_json::Value {
    serde_json::json!({
        "entries": plan.entries.iter().map(|e| serde_json::json!({
            "miner_id": e.miner_id,
            "allotted": e.allotted,
            "fee": format_coin(&e.fee),
        })).collect::<Vec<_>>(),
        "total_cost": format_coin(&plan.total_cost),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{coin, parse_coin};
    use num_rational::Ratio;

    fn m(id: &str, fee: &str, space: u64) -> FileMinerProfile<Coin> {
        FileMinerProfile {
            miner_id: id.into(),
            fee: parse_coin(fee).unwrap(),
            free_space: space,
        }
    }

    fn registry() -> Vec<FileMinerProfile<Coin>> {
        vec![m("M1", "3", 50), m("M2", "1", 40), m("M3", "2", 100), m("M4", "2.5", 0)]
    }

    fn ids<F>(v: &[FileMinerProfile<F>]) -> Vec<&str> {
        v.iter().map(|m| m.miner_id.as_str()).collect()
    }

    fn shape<F>(v: &[PlanEntry<F>]) -> Vec<(&str, u64)> {
        v.iter().map(|e| (e.miner_id.as_str(), e.allotted)).collect()
    }

    #[test]
    fn unit_budget_cases() {
        assert_eq!(unit_budget(&coin(1000), 500).unwrap(), coin(2));
        assert_eq!(unit_budget(&coin(0), 100).unwrap(), coin(0));
        assert_eq!(unit_budget(&coin(100), 0).unwrap_err(), AllocationError::ZeroFileSize);
        assert_eq!(unit_budget(&coin(1), 3).unwrap(), parse_coin("1/3").unwrap());
    }

    #[test]
    fn candidate_scan() {
        let b = parse_coin("2.5").unwrap();
        assert_eq!(ids(&select_candidates(&registry(), &b, 3).unwrap()), ["M2", "M3"]);
        assert_eq!(ids(&select_candidates(&registry(), &b, 1).unwrap()), ["M2"]);
        assert_eq!(
            select_candidates(&registry(), &parse_coin("0.5").unwrap(), 3).unwrap_err(),
            AllocationError::NoCandidates
        );
    }

    #[test]
    fn candidate_scan_follows_registry_order() {
        let b = coin(10);
        let mut reg = vec![m("Z", "5", 10), m("A", "1", 10), m("B", "1", 10)];
        assert_eq!(ids(&select_candidates(&reg, &b, 2).unwrap()), ["Z", "A"]);
        reg.reverse();
        assert_eq!(ids(&select_candidates(&reg, &b, 2).unwrap()), ["B", "A"]);
    }

    #[test]
    fn finalize_cases() {
        let got = finalize(vec![m("M3", "2", 100), m("M2", "1", 40)], 100).unwrap();
        assert_eq!(ids(&got), ["M2", "M3"]);
        assert_eq!(
            finalize(vec![m("M2", "1", 40)], 100).unwrap_err(),
            AllocationError::InsufficientCapacity { remaining: 60 }
        );
        assert_eq!(ids(&finalize(vec![m("A", "1", 100)], 100).unwrap()), ["A"]);
        // equal fees fall back to miner id
        let got = finalize(vec![m("b", "1", 10), m("a", "1", 10)], 20).unwrap();
        assert_eq!(ids(&got), ["a", "b"]);
    }

    #[test]
    fn allot_cases() {
        let fsfm = vec![m("M2", "1", 40), m("M3", "2", 100)];
        assert_eq!(shape(&allot(&fsfm, 100)), [("M2", 40), ("M3", 60)]);
        assert_eq!(shape(&allot(&[m("A", "1", 100)], 100)), [("A", 100)]);
        let fsfm = vec![m("A", "1", 30), m("B", "1", 30), m("C", "1", 90)];
        assert_eq!(shape(&allot(&fsfm, 75)), [("A", 30), ("B", 30), ("C", 15)]);
    }

    #[test]
    fn cost_cases() {
        let entries = allot(&[m("M2", "1", 40), m("M3", "2", 100)], 100);
        assert_eq!(plan_cost(&entries), coin(160));
        assert_eq!(plan_cost(&allot(&[m("A", "0", 100)], 100)), coin(0));
        let uniform = allot(&[m("A", "3/7", 10), m("B", "3/7", 10), m("C", "3/7", 10)], 25);
        assert_eq!(plan_cost(&uniform), coin(25) * parse_coin("3/7").unwrap());
    }

    #[test]
    fn allocate_cases() {
        let req = AllocationRequest {
            file_size: 100,
            budget: coin(250),
            threshold: 3,
        };
        let plan = allocate(&registry(), &req).unwrap();
        assert_eq!(shape(&plan.entries), [("M2", 40), ("M3", 60)]);
        assert_eq!(plan.total_cost, coin(160));

        let broke = AllocationRequest {
            budget: coin(0),
            ..req.clone()
        };
        assert_eq!(allocate(&registry(), &broke).unwrap_err(), AllocationError::NoCandidates);

        let single = vec![m("solo", "1", 1000)];
        let exact = AllocationRequest {
            file_size: 100,
            budget: coin(100),
            threshold: 3,
        };
        let plan = allocate(&single, &exact).unwrap();
        assert_eq!(shape(&plan.entries), [("solo", 100)]);
        assert_eq!(plan.total_cost, coin(100));
    }

    #[test]
    fn generic_over_scalars() {
        let reg: Vec<FileMinerProfile<f64>> = registry()
            .into_iter()
            .map(|p| FileMinerProfile {
                miner_id: p.miner_id,
                fee: p.fee.numer().to_string().parse::<f64>().unwrap()
                    / p.fee.denom().to_string().parse::<f64>().unwrap(),
                free_space: p.free_space,
            })
            .collect();
        let plan = allocate(
            &reg,
            &AllocationRequest {
                file_size: 100,
                budget: 250.0,
                threshold: 3,
            },
        )
        .unwrap();
        assert_eq!(plan.total_cost, 160.0);

        let reg: Vec<FileMinerProfile<Ratio<i64>>> = vec![
            FileMinerProfile { miner_id: "x".into(), fee: Ratio::new(1, 3), free_space: 9 },
            FileMinerProfile { miner_id: "y".into(), fee: Ratio::new(1, 2), free_space: 9 },
        ];
        let plan = allocate(
            &reg,
            &AllocationRequest { file_size: 12, budget: Ratio::new(6, 1), threshold: 2 },
        )
        .unwrap();
        assert_eq!(plan.total_cost, Ratio::new(9 * 2 + 3 * 3, 6));
    }

    #[test]
    fn registry_parsing() {
        let text = "{\"miner_id\":\"M1\",\"fee\":3,\"free_space\":50}\n\n{\"miner_id\":\"M4\",\"fee\":\"5/2\",\"free_space\":0}\n";
        let reg = parse_registry(text).unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg[1].fee, parse_coin("2.5").unwrap());
        let err = parse_registry("{\"miner_id\":\"M1\",\"fee\":-1,\"free_space\":5}").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(parse_registry("nope").is_err());
    }

    #[test]
    fn plan_json_shape() {
        let plan = allocate(
            &registry(),
            &AllocationRequest { file_size: 100, budget: coin(250), threshold: 3 },
        )
        .unwrap();
        let v = plan_to_json(&plan);
        assert_eq!(v["total_cost"], "160");
        assert_eq!(v["entries"][1]["allotted"], 60);
    }
}
