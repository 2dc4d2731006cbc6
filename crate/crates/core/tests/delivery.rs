mod common;

use common::DeliveryRig;
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use newstrad::delivery::{retrieve_and_join, DeliveryContract, DeliveryError, ENVELOPE_OVERHEAD};
use newstrad::ledger::HistoryFilter;
use newstrad::TxKind;

fn random_file(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u8> {
    let mut f = vec![0u8; rng.gen_range(1..=max_len)];
    rng.fill_bytes(&mut f);
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_any_plan(seed in any::<u64>(), parts in 1usize..12, max_len in 1usize..20_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rig = DeliveryRig::new(&mut rng);
        let file = random_file(&mut rng, max_len);
        let (contract, sealed) = rig.ship(&file, parts, 1, &mut rng).unwrap();
        prop_assert_eq!(sealed.len(), file.len() + ENVELOPE_OVERHEAD);
        prop_assert_eq!(contract.sealed_len(), sealed.len() as u64);
        prop_assert_eq!(rig.collect(&contract, 2, 100).unwrap(), file);
        prop_assert_eq!(rig.chain.query_history(&HistoryFilter::kind(TxKind::ContractIssued)).len(), 1);
        prop_assert_eq!(rig.chain.query_history(&HistoryFilter::kind(TxKind::DeliveryCompleted)).len(), 1);
    }

    #[test]
    fn permuted_addresses_never_yield_a_wrong_file(seed in any::<u64>(), parts in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rig = DeliveryRig::new(&mut rng);
        let file = random_file(&mut rng, 4000);
        let (contract, _) = rig.ship(&file, parts, 1, &mut rng).unwrap();
        let mut addresses = contract.chunk_addresses.clone();
        prop_assume!(addresses.len() >= 2);
        while addresses == contract.chunk_addresses {
            let i = rng.gen_range(0..addresses.len());
            let j = rng.gen_range(0..addresses.len());
            addresses.swap(i, j);
        }
        let forged = DeliveryContract::new(contract.recipient_public_key, addresses, contract.recipient_address).unwrap();
        // a forged contract the seller never issued is refused outright
        let joined = retrieve_and_join(&forged, &mut rig.store, 2, 100).unwrap();
        prop_assert_eq!(
            newstrad::delivery::decrypt(&joined, &rig.buyer, &forged, &mut rig.chain, 2).unwrap_err(),
            DeliveryError::UnknownContract(forged.contract_digest)
        );
        // even when issued on the ledger, the permuted bytes fail authentication
        let issued = newstrad::delivery::issue_contract(
            &rig.seller,
            forged.recipient_public_key,
            forged.chunk_addresses.clone(),
            forged.recipient_address,
            newstrad::Digest::of(&file),
            &mut rig.chain,
            3,
        ).unwrap();
        match rig.collect(&issued, 4, 100) {
            Ok(plain) => prop_assert_eq!(plain, file),
            Err(e) => prop_assert_eq!(e, DeliveryError::DecryptionFailure),
        }
    }

    #[test]
    fn chunks_expire_exactly_after_window(seed in any::<u64>(), t_d in 1u64..500, at in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rig = DeliveryRig::new(&mut rng);
        let file = random_file(&mut rng, 2000);
        let (contract, sealed) = rig.ship(&file, 3, at, &mut rng).unwrap();
        prop_assert_eq!(retrieve_and_join(&contract, &mut rig.store, at, t_d).unwrap(), sealed.clone());
        for a in &contract.chunk_addresses {
            prop_assert_eq!(rig.store.expires_at(a), Some(at + t_d));
        }
        prop_assert_eq!(retrieve_and_join(&contract, &mut rig.store, at + t_d, t_d).unwrap(), sealed);
        for a in &contract.chunk_addresses {
            prop_assert!(matches!(rig.store.fetch(a, at + t_d + 1), Err(DeliveryError::ChunkExpired(_))));
            prop_assert!(!rig.store.holds(a));
        }
    }

    #[test]
    fn space_is_conserved_across_cycles(seed in any::<u64>(), rounds in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rig = DeliveryRig::new(&mut rng);
        rig.store.register_miner("shared", 50_000);
        let mut now = 0;
        for _ in 0..rounds {
            let file = random_file(&mut rng, 3000);
            let sealed = newstrad::delivery::encrypt_for(&rig.buyer.sealing_public_key(), &file, &mut rng).unwrap();
            let chunk = newstrad::delivery::Chunk { miner_id: "shared".into(), bytes: sealed };
            let addrs = rig.store.store_chunks(&[chunk]).unwrap();
            prop_assert_eq!(rig.store.free_space("shared").unwrap() + rig.store.stored_bytes("shared"), 50_000);
            rig.store.start_timer(&addrs[0], now + 5);
            now += rng.gen_range(0..10);
            rig.store.purge_expired(now);
            prop_assert_eq!(rig.store.free_space("shared").unwrap() + rig.store.stored_bytes("shared"), 50_000);
        }
    }
}

#[test]
fn single_byte_tamper_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rig = DeliveryRig::new(&mut rng);
    let file = random_file(&mut rng, 300);
    let (contract, sealed) = rig.ship(&file, 3, 1, &mut rng).unwrap();
    for i in 0..sealed.len() {
        let mut bad = sealed.clone();
        bad[i] ^= 1 << (i % 8);
        let err = newstrad::delivery::decrypt(&bad, &rig.buyer, &contract, &mut rig.chain, 2).unwrap_err();
        assert_eq!(err, DeliveryError::DecryptionFailure, "byte {i}");
    }
    assert!(rig.chain.query_history(&HistoryFilter::kind(TxKind::DeliveryCompleted)).is_empty());
}

#[test]
fn one_megabyte_file() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rig = DeliveryRig::new(&mut rng);
    let mut file = vec![0u8; 1 << 20];
    rng.fill_bytes(&mut file);
    let (contract, _) = rig.ship(&file, 7, 1, &mut rng).unwrap();
    assert_eq!(rig.collect(&contract, 2, 10).unwrap(), file);
}

#[test]
fn contract_json_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rig = DeliveryRig::new(&mut rng);
    let (contract, _) = rig.ship(b"json", 2, 1, &mut rng).unwrap();
    let text = contract.to_json();
    let back = DeliveryContract::from_json(&text).unwrap();
    assert_eq!(back, contract);
    assert_eq!(back.to_json(), text);
    assert!(back.is_intact());
}
