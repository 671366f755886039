mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use hippo_core::retrieval::{ball_candidates, search, QueryParams, QueryPlan};
use hippo_core::{MemoryStore, Signature};

fn run(store: &MemoryStore, keywords: &[String], radius: u32, tau: f64) -> Vec<(u64, usize)> {
    let params = QueryParams {
        radius,
        tau,
        top_k: 10_000,
    };
    let plan = QueryPlan::new(store, "q", keywords.to_vec(), params).unwrap();
    search(store, &plan)
        .unwrap()
        .entries
        .iter()
        .map(|e| (e.entry.id, e.matched))
        .collect()
}

fn need(tau: f64, m: usize) -> usize {
    // Smallest integer count reaching the fraction; taus here are k/m exact.
    (1..=m).find(|&k| k as f64 >= tau * m as f64 - 1e-12).unwrap()
}

#[test]
fn planted_corpus_matches_exhaustive_scan() {
    let (log, planted) = planted_corpus(11);
    let store = build(store_config(2), &log);
    let sigs = position_signatures(store.model(), &log);
    let queries = planted_queries(&planted, 12);
    for kws in &queries {
        let refs: Vec<&str> = kws.iter().map(String::as_str).collect();
        let m = kws.len();
        for tau in [1.0 / m as f64, 0.5, 1.0] {
            let exact = run(&store, kws, 0, tau);
            assert_eq!(exact, oracle_search(store.model(), &log, &sigs, &refs, 0, need(tau, m)), "{kws:?} tau {tau}");
            let wide = run(&store, kws, 2, tau);
            assert_eq!(wide, oracle_search(store.model(), &log, &sigs, &refs, 2, need(tau, m)), "{kws:?} tau {tau}");
            let exact_ids: BTreeSet<u64> = exact.iter().map(|e| e.0).collect();
            let wide_ids: BTreeSet<u64> = wide.iter().map(|e| e.0).collect();
            assert!(exact_ids.is_subset(&wide_ids));
        }
    }
}

#[test]
fn any_keyword_mode_recalls_every_planted_entry() {
    let (log, planted) = planted_corpus(13);
    let store = build(store_config(2), &log);
    for kws in planted_queries(&planted, 14) {
        let got: BTreeSet<u64> = run(&store, &kws, 2, 1.0 / kws.len() as f64)
            .into_iter()
            .map(|e| e.0)
            .collect();
        for (id, e) in log.iter().enumerate() {
            let toks = canonical_tokens(&e.text);
            if toks.len() == 1 && kws.contains(&toks[0]) {
                assert!(got.contains(&(id as u64)), "{kws:?} missed entry {id}");
            }
        }
    }
}

#[test]
fn monotone_in_radius_and_tau() {
    let (log, planted) = planted_corpus(15);
    let store = build(store_config(2), &log);
    for kws in planted_queries(&planted, 16).iter().take(20) {
        let set = |r, tau| -> BTreeSet<u64> { run(&store, kws, r, tau).into_iter().map(|e| e.0).collect() };
        let m = kws.len() as f64;
        for tau in [1.0 / m, 1.0] {
            let mut prev = BTreeSet::new();
            for r in [0, 1, 2, 4, 8] {
                let cur = set(r, tau);
                assert!(prev.is_subset(&cur), "{kws:?} r={r}");
                prev = cur;
            }
        }
        for r in [0, 2] {
            let mut prev: Option<BTreeSet<u64>> = None;
            for k in 1..=kws.len() {
                let cur = set(r, k as f64 / m);
                if let Some(p) = &prev {
                    assert!(cur.is_subset(p), "{kws:?} tau {k}/{m}");
                }
                prev = Some(cur);
            }
        }
    }
}

#[test]
fn token_accounting_is_exact() {
    let (log, planted) = planted_corpus(17);
    let store = build(store_config(2), &log);
    for kws in planted_queries(&planted, 18) {
        let plan = QueryPlan::new(&store, "q", kws, QueryParams { radius: 2, tau: 0.3, top_k: 7 }).unwrap();
        let r = search(&store, &plan).unwrap();
        assert!(r.entries.len() <= 7);
        let spans: usize = r.entries.iter().map(|e| e.entry.beta - e.entry.alpha + 1).sum();
        assert_eq!(r.tokens_consumed, spans);
        for e in &r.entries {
            assert_eq!(e.text, canonical(&log[e.entry.id as usize].text));
        }
    }
}

#[test]
fn ball_candidates_match_position_scan() {
    let log = transcript(10_000, 19);
    let store = build(store_config(2), &log);
    let sigs: Vec<u128> = position_signatures(store.model(), &log).concat();
    assert_eq!(sigs.len(), store.len());
    for (k, &s) in sigs.iter().step_by(97).enumerate() {
        // Flip a few bits so some queries sit off any stored value.
        let q = s ^ ((k as u128 * 0x9e37) & 0b1011);
        let sig = Signature::from_symbol(q, 32);
        for r in [0, 2] {
            let mut expected = BTreeMap::new();
            for &p in &sigs {
                if (p ^ q).count_ones() <= r {
                    *expected.entry(p).or_insert(0u64) += 1;
                }
            }
            let got: BTreeMap<u128, u64> = ball_candidates(&store, &sig, r)
                .unwrap()
                .into_iter()
                .map(|c| (c.signature, c.count))
                .collect();
            assert_eq!(got, expected);
        }
    }
}
