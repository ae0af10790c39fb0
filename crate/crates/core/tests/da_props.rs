// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rollup_sim::codec::Encode;
use rollup_sim::dac::{points_per_party, DacMember, MemberPolicy};
use rollup_sim::kzg::{setup, EncodingParams, TrustedSetup};
use rollup_sim::rollup::{execute_slot, LedgerState};
use rollup_sim::sim::bundle::{assemble, fetch_verified, publish, SlotBundle};
use rollup_sim::sim::validator_sampling_check;
use rollup_sim::vm::{Account, Address, Transaction, TxKind};

const DEGREE: usize = 15;

fn srs() -> Arc<TrustedSetup> {
    static SRS: OnceLock<Arc<TrustedSetup>> = OnceLock::new();
    SRS.get_or_init(|| Arc::new(setup(DEGREE, b"da-props").unwrap())).clone()
}

fn policy() -> impl Strategy<Value = MemberPolicy> {
    prop::sample::select(vec![
        MemberPolicy::Honest,
        MemberPolicy::Withhold,
        MemberPolicy::CorruptBlob,
        MemberPolicy::SignBlind,
        MemberPolicy::LoseData,
    ])
}

fn addr(i: u64) -> Address {
    Address::from_label(&format!("user-{i}"))
}

fn slot(txs: usize, seed: u64) -> (LedgerState, SlotBundle) {
    let pre = LedgerState::genesis((0..6).map(|i| Account::new(addr(i), 10_000, addr(99))));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let txs: Vec<_> = (0..txs as u64)
        .map(|n| {
            let (from, to) = (rng.gen_range(0..6), rng.gen_range(0..6));
            Transaction::new(
                n,
                addr(from),
                TxKind::Transfer { from: addr(from), to: addr(to), amount: rng.gen_range(0..50) },
            )
        })
        .collect();
    let (_, _, trace) = execute_slot(&pre, 0, &txs).unwrap();
    (pre, SlotBundle::from_trace(trace))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn published_data_is_retrievable_from_any_honest_member(
        data in prop::collection::vec(any::<u8>(), 0..1500),
        policies in prop::collection::vec(policy(), 1..5),
    ) {
        let params = EncodingParams::new(DEGREE);
        let srs = srs();
        let mut members: Vec<_> =
            policies.iter().enumerate().map(|(i, p)| DacMember::new(i as u32, 1, *p, srs.clone(), params)).collect();
        let pieces = publish(&data, &srs, &params, &mut members).unwrap();
        prop_assert_eq!(pieces.len(), data.len().div_ceil(params.max_blob_bytes()).max(1));
        for p in &pieces {
            prop_assert_eq!(p.signatures.len() + p.refusals.len(), members.len());
        }

        let keeps_copy = |p: &MemberPolicy| matches!(p, MemberPolicy::Honest | MemberPolicy::SignBlind);
        let mut fetched = Vec::new();
        for p in &pieces {
            let (blob, failed) = fetch_verified(&p.cm, &srs, &params, &members);
            let first_good = policies.iter().position(keeps_copy);
            match first_good {
                Some(i) => {
                    prop_assert_eq!(failed, (0..i as u32).collect::<Vec<_>>());
                    fetched.push(blob.unwrap());
                }
                None => prop_assert!(blob.is_none()),
            }
        }
        if policies.iter().any(keeps_copy) {
            prop_assert_eq!(fetched.concat(), data);
        }
    }

    #[test]
    fn sampling_check_replays_the_drawn_steps(t in 1usize..24, seed in any::<u64>(), rate in 0.0f64..=1.0) {
        let (pre, bundle) = slot(t, seed);
        let record = bundle.trace.commitment();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (outcome, post) = validator_sampling_check(&pre, &record, Some(&bundle), rate, &mut rng).unwrap();

        let mut oracle = ChaCha20Rng::seed_from_u64(seed);
        let expected: Vec<u64> = (1..=t as u64).filter(|_| oracle.gen_bool(rate)).collect();
        prop_assert_eq!(&outcome.sampled, &expected);
        prop_assert!(outcome.consistent());
        prop_assert_eq!(post.root(), record.root);

        let bytes = bundle.to_bytes();
        prop_assert_eq!(assemble(&[bytes[..bytes.len() / 2].to_vec(), bytes[bytes.len() / 2..].to_vec()]).unwrap(), bundle);
    }

    #[test]
    fn sampling_check_flags_tampering(t in 1usize..24, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (pre, bundle) = slot(t, seed);
        let record = bundle.trace.commitment();
        let j = pick.index(t);

        let mut bad = bundle.clone();
        bad.trace.ma_list[j].entries.push((addr(77), Some(Account::new(addr(77), 1, addr(99)))));
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (outcome, _) = validator_sampling_check(&pre, &record, Some(&bad), 1.0, &mut rng).unwrap();
        prop_assert_eq!(outcome.inconsistent_step, Some(j as u64 + 1));
        prop_assert!(!outcome.consistent());

        let mut bad = bundle.clone();
        bad.diff.push((addr(78), Some(Account::new(addr(78), 1, addr(99)))));
        let (outcome, _) = validator_sampling_check(&pre, &record, Some(&bad), 0.0, &mut rng).unwrap();
        prop_assert!(outcome.sampled.is_empty());
        prop_assert!(!outcome.diff_root_matches);

        prop_assert!(validator_sampling_check(&pre, &record, None, 1.0, &mut rng).is_err());
    }

    #[test]
    fn points_per_party_is_the_ceiling(n in 1usize..5000, parties in 1usize..64) {
        let k = points_per_party(n, parties);
        prop_assert!(k * parties > n);
        prop_assert!((k - 1) * parties <= n);
    }
}
