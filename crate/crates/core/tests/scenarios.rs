use newstrad::blockcop::Outcome;
use newstrad::ledger::{HistoryFilter, Payload, TxKind};
use newstrad::num::coin;
use newstrad::scenarios;
use newstrad::simnet::{SimConfig, Simulation, SimulationReport};
use newstrad::Chain;

fn run(name: &str) -> (Simulation, SimulationReport) {
    let scenario = scenarios::load(name).unwrap().unwrap();
    let mut sim = Simulation::new(&scenario, SimConfig::default()).unwrap();
    let report = sim.run_to_end();
    (sim, report)
}

fn count(chain: &Chain, kind: TxKind) -> usize {
    chain.query_history(&HistoryFilter::kind(kind)).len()
}

fn penalties(chain: &Chain) -> usize {
    chain
        .query_history(&HistoryFilter::kind(TxKind::PenaltyImposed))
        .iter()
        .filter(|tx| matches!(tx.payload, Payload::Penalty { .. }))
        .count()
}

#[test]
fn honest_trade_delivers_the_file() {
    let (sim, report) = run("honest_trade");
    assert!(report.is_clean(), "{:?}", report.invariant_failures);
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    let listing = sim.listing_id("harbour").unwrap();
    let chain = sim.chain();
    assert_eq!(count(chain, TxKind::ContractIssued), 1);
    assert_eq!(count(chain, TxKind::DeliveryCompleted), 1);
    assert!(chain
        .query_history(&HistoryFilter::kind(TxKind::Payment))
        .iter()
        .any(|tx| tx.listing() == Some(listing) && tx.counterparty == sim.pseudonym_of("nadia")));
    assert_eq!(report.deliveries.len(), 1);
    assert_eq!(report.deliveries[0].plaintext_digest, listing);
    assert_eq!(report.allocations.len(), 1);
    assert!(report.allocations[0].total_cost <= report.allocations[0].budget);
    assert_eq!(penalties(chain), 0);
    assert!(report
        .verdicts
        .iter()
        .all(|v| matches!(v.verdict.as_ref().map(|v| &v.outcome), Some(Outcome::Clean) | None)));
    // the purge after t_D returned every byte to the file miners
    for m in ["f-cheap", "f-mid"] {
        let vault = sim.vault_id(m).unwrap();
        assert_eq!(sim.store().stored_bytes(&vault), 0);
    }
}

#[test]
fn fraud_seller_is_penalized_once() {
    let (sim, report) = run("fraud_seller");
    assert!(report.is_clean(), "{:?}", report.invariant_failures);
    let chain = sim.chain();
    assert_eq!(penalties(chain), 1);
    assert_eq!(count(chain, TxKind::Refund), 1);
    let outcomes: Vec<_> = report
        .verdicts
        .iter()
        .map(|v| v.verdict.as_ref().unwrap().outcome.clone())
        .collect();
    assert_eq!(outcomes[0], Outcome::NoticePending { deadline: 60 });
    assert_eq!(outcomes[1], Outcome::NoticePending { deadline: 60 });
    let penalized = Outcome::Penalized {
        penalty: coin(120),
        refund: coin(60),
    };
    assert_eq!(outcomes[2], penalized);
    assert_eq!(outcomes[3], penalized);
    // the buyer paid 60 for the story plus 1 for the query, and got 60 back
    let buyer = sim.pseudonym_of("omar").unwrap();
    assert_eq!(sim.balance_of(&buyer).unwrap(), coin(299));
    let seller = sim.pseudonym_of("vera").unwrap();
    assert_eq!(sim.balance_of(&seller).unwrap(), coin(50 + 60 - 120 - 60));
    assert!(report.negative_balances.contains(&seller));
    assert_eq!(report.burned, coin(120));
}

#[test]
fn vanishing_miner_is_penalized_once() {
    let (sim, report) = run("vanishing_miner");
    assert!(report.is_clean(), "{:?}", report.invariant_failures);
    let chain = sim.chain();
    assert_eq!(penalties(chain), 1);
    assert_eq!(count(chain, TxKind::Refund), 0);
    assert_eq!(count(chain, TxKind::DeliveryCompleted), 0);
    let flaky = sim.pseudonym_of("f-flaky").unwrap();
    assert!(report.service_failures.iter().all(|f| f.miner == flaky));
    assert!(!report.service_failures.is_empty());
    let outcomes: Vec<_> = report
        .verdicts
        .iter()
        .map(|v| v.verdict.as_ref().unwrap().outcome.clone())
        .collect();
    assert!(matches!(outcomes[0], Outcome::Penalized { .. }));
    assert_eq!(outcomes[1], Outcome::Clean);
    assert_eq!(outcomes[2], outcomes[0]);
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.errors[0].op, "retrieve");
}

#[test]
fn requery_chain_debits_one_fee() {
    let (sim, report) = run("requery_chain");
    assert!(report.is_clean(), "{:?}", report.invariant_failures);
    let buyer = sim.pseudonym_of("paul").unwrap();
    assert_eq!(sim.balance_of(&buyer).unwrap(), coin(47));
    let served: Vec<_> = report.queries.iter().map(|q| q.serving_miner.clone().unwrap()).collect();
    assert_eq!(served.len(), 3);
    assert_eq!(served[0], sim.pseudonym_of("n-fast").unwrap().to_hex());
    assert_eq!(served[1], sim.pseudonym_of("n-mid").unwrap().to_hex());
    assert_eq!(served[2], sim.pseudonym_of("n-slow").unwrap().to_hex());
    assert!(report.queries.iter().all(|q| q.results.len() == 1));
    assert_eq!(count(sim.chain(), TxKind::QueryServed), 3);
}
