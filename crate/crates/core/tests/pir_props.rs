use std::collections::BTreeMap;

use ipir_core::pir::{
    all_keys, answer_length, pir_answer, pir_decode, pir_query, pir_query_with_key, pir_setup, PirQuery,
};
use ipir_core::{capacity_cost, MessageStore, Rational, SeedTree, Subset};
use proptest::prelude::*;

#[test]
fn decode_round_trip_many_trials() {
    let seeds = SeedTree::new(2024);
    let mut trial = 0u64;
    for n in [2usize, 3] {
        for k in 1..=3usize {
            // L = N^k keeps the store small for N = 3
            let length = n.pow(k as u32);
            let params = pir_setup(n, Subset::full(k), length).unwrap();
            for _ in 0..(1000 / 6 + 1) {
                let mut rng = seeds.stream("roundtrip", trial);
                trial += 1;
                let store = MessageStore::random(k, length, &mut rng);
                for desired in 0..k {
                    let (queries, key) = pir_query(&params, desired, &mut rng).unwrap();
                    let answers: Vec<_> = queries.iter().map(|q| pir_answer(q, &store).unwrap()).collect();
                    let got = pir_decode(&answers, &key, &params, desired).unwrap();
                    assert_eq!(got, store.message(desired), "N={n} k={k} desired={desired}");
                }
            }
        }
    }
}

#[test]
fn corrupted_answer_changes_decoding() {
    let params = pir_setup(2, Subset::full(2), 4).unwrap();
    let mut rng = SeedTree::new(3).stream("corrupt", 0);
    let store = MessageStore::random(2, 4, &mut rng);
    let (queries, key) = pir_query(&params, 0, &mut rng).unwrap();
    let mut answers: Vec<_> = queries.iter().map(|q| pir_answer(q, &store).unwrap()).collect();
    answers[1].bits[0] ^= true;
    assert_ne!(pir_decode(&answers, &key, &params, 0).unwrap(), store.message(0));
}

#[test]
fn download_matches_capacity_everywhere() {
    for n in 2..=4usize {
        for k in 1..=4usize {
            let length = n.pow(k as u32);
            let params = pir_setup(n, Subset::full(k), length).unwrap();
            let mut rng = SeedTree::new(5).stream("download", (n * 10 + k) as u64);
            let (queries, _) = pir_query(&params, k - 1, &mut rng).unwrap();
            let bits: usize = queries.iter().map(answer_length).sum();
            let expected = capacity_cost::<Rational>(n, k).unwrap() * Rational::from_integer(length.into());
            assert_eq!(Rational::from_integer(bits.into()), expected, "N={n} k={k}");
        }
    }
}

#[test]
fn subset_of_larger_store_over_several_blocks() {
    // K = 3 store with L = 8 = 2^3; PIR over two of the messages runs two blocks
    let params = pir_setup(2, Subset::from_indices([0, 2]), 8).unwrap();
    assert_eq!(params.blocks, 2);
    let mut rng = SeedTree::new(8).stream("blocks", 0);
    let store = MessageStore::random(3, 8, &mut rng);
    for desired in [0, 2] {
        let (queries, key) = pir_query(&params, desired, &mut rng).unwrap();
        assert!(queries.iter().all(|q| q.combos.iter().flatten().all(|&(m, _)| m != 1)));
        let answers: Vec<_> = queries.iter().map(|q| pir_answer(q, &store).unwrap()).collect();
        assert_eq!(pir_decode(&answers, &key, &params, desired).unwrap(), store.message(desired));
        assert_eq!(queries.iter().map(answer_length).sum::<usize>(), 12);
    }
}

fn query_multiset(n: usize, u: Subset, length: usize, desired: usize, server: usize) -> BTreeMap<PirQuery, usize> {
    let params = pir_setup(n, u, length).unwrap();
    let mut out = BTreeMap::new();
    for key in all_keys(&params) {
        let q = pir_query_with_key(&params, desired, &key).unwrap().swap_remove(server);
        *out.entry(q).or_insert(0) += 1;
    }
    out
}

#[test]
fn every_server_sees_the_same_query_law_exactly() {
    // block sizes 4, 2 and 3
    for (n, u, length) in [(2, Subset::full(2), 4), (2, Subset::singleton(1), 4), (3, Subset::singleton(0), 3)] {
        let members: Vec<usize> = u.iter().collect();
        for server in 0..n {
            let reference = query_multiset(n, u, length, members[0], server);
            for &d in &members[1..] {
                assert_eq!(query_multiset(n, u, length, d, server), reference, "N={n} u={u} server={server}");
            }
        }
    }
}

#[test]
fn queries_are_canonical() {
    let params = pir_setup(3, Subset::full(2), 9).unwrap();
    let mut rng = SeedTree::new(1).stream("canon", 0);
    let (queries, _) = pir_query(&params, 1, &mut rng).unwrap();
    for q in &queries {
        assert!(q.combos.windows(2).all(|w| w[0] < w[1]));
        assert!(q.combos.iter().all(|c| c.windows(2).all(|w| w[0] < w[1])));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_any_subset(n in 2usize..=3, mask in 1u32..16, blocks in 1usize..=2, seed: u64) {
        let u = Subset::from_mask(mask);
        let k = u.len();
        let length = n.pow(k as u32) * blocks;
        let params = pir_setup(n, u, length).unwrap();
        let mut rng = SeedTree::new(seed).stream("prop", 0);
        let store = MessageStore::random(4, length, &mut rng);
        for desired in u.iter() {
            let (queries, key) = pir_query(&params, desired, &mut rng).unwrap();
            prop_assert!(queries.iter().all(|q| answer_length(q) == params.per_server_download()));
            let answers: Vec<_> = queries.iter().map(|q| pir_answer(q, &store).unwrap()).collect();
            prop_assert_eq!(pir_decode(&answers, &key, &params, desired).unwrap(), store.message(desired).to_vec());
        }
    }
}
