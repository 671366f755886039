//! Randomized self-checks of a loaded store against independent oracles:
//! matrix queries against the decoded arrays, ball candidates against a
//! scan of every position, and reconstruction against signatures
//! recomputed from the reconstructed tokens.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dwm::{DynamicWaveletMatrix, Symbol};
use crate::error::Result;
use crate::retrieval::ball_candidates;
use crate::signatures::Signature;
use crate::store::MemoryStore;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub probes: usize,
    pub failures: usize,
    /// Reproduction of the first failing probe.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            probes: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn check(&mut self, ok: bool, repro: impl FnOnce() -> String) {
        self.probes += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(repro());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let status = if s.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "{status} {:<15} {} probes, {} failures", s.name, s.probes, s.failures)?;
            if let Some(repro) = &s.first_failure {
                writeln!(f, "     first failure: {repro}")?;
            }
        }
        Ok(())
    }
}

/// Runs `samples` probes per suite with a fixed seed.
pub fn verify_store(store: &MemoryStore, samples: usize, seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dwm = SuiteReport::new("dwm");
    let mut ball = SuiteReport::new("ball");
    let mut recon = SuiteReport::new("reconstruction");
    if samples == 0 || store.is_empty() {
        return Ok(VerifyReport {
            suites: vec![dwm, ball, recon],
        });
    }

    let content: Vec<u32> = (0..store.len())
        .map(|i| store.content().access(i))
        .collect::<Result<_>>()?;
    let sigs: Vec<u128> = (0..store.len())
        .map(|i| store.signatures().access(i))
        .collect::<Result<_>>()?;

    for p in 0..samples {
        if p % 2 == 0 {
            probe_matrix(&mut dwm, "content", store.content(), &content, &mut rng)?;
        } else {
            probe_matrix(&mut dwm, "signature", store.signatures(), &sigs, &mut rng)?;
        }
    }

    let bits = store.config().model.bits;
    for _ in 0..samples {
        let mut q = Signature::from_symbol(sigs[rng.random_range(0..sigs.len())], bits);
        for _ in 0..rng.random_range(0..3) {
            let k = rng.random_range(0..bits);
            q.set(k, !q.get(k));
        }
        let r = rng.random_range(0..=3.min(bits as u32));
        let qs = q.to_symbol().expect("fits 128 bits");
        let mut expected = BTreeMap::new();
        for &s in &sigs {
            if (s ^ qs).count_ones() <= r {
                *expected.entry(s).or_insert(0u64) += 1;
            }
        }
        let got: BTreeMap<u128, u64> = ball_candidates(store, &q, r)?
            .into_iter()
            .map(|c| (c.signature, c.count))
            .collect();
        ball.check(got == expected, || {
            format!(
                "ball(q={q}, r={r}): dictionary gives {} signatures, position scan {}",
                got.len(),
                expected.len()
            )
        });
    }

    let model = store.model();
    let tokens = store.vocabulary().tokens();
    for _ in 0..samples {
        let e = &store.entries()[rng.random_range(0..store.entries().len())];
        let ids = store.reconstruct(e.alpha, e.beta)?;
        let words: Option<Vec<&str>> = ids
            .iter()
            .map(|&id| tokens.get(id as usize).map(String::as_str))
            .collect();
        let Some(words) = words else {
            recon.check(false, || format!("entry {}: reconstructed an unassigned token id", e.id));
            continue;
        };
        let mut mismatch = None;
        for k in 0..words.len() {
            let emb = model.context_embedding(&words, k, 0..words.len())?;
            let want = model.signature_of(&emb)?.to_symbol().expect("fits 128 bits");
            if sigs[e.alpha + k] != want {
                mismatch = Some(k);
                break;
            }
        }
        recon.check(mismatch.is_none(), || {
            let k = mismatch.unwrap_or(0);
            format!(
                "entry {} position {}: stored signature {:#x}, recomputed from {:?} differs",
                e.id,
                e.alpha + k,
                sigs[e.alpha + k],
                words
            )
        });
    }

    Ok(VerifyReport {
        suites: vec![dwm, ball, recon],
    })
}

fn probe_matrix<S: Symbol>(
    report: &mut SuiteReport,
    which: &str,
    m: &DynamicWaveletMatrix<S>,
    naive: &[S],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = naive.len();
    let c = naive[rng.random_range(0..n)];
    match rng.random_range(0..3) {
        0 => {
            let i = rng.random_range(0..=n);
            let want = naive[..i].iter().filter(|&&x| x == c).count();
            let got = m.rank(c, i)?;
            report.check(got == want, || {
                format!("{which} rank({:#x}, {i}) = {got}, expected {want}", c.to_u128())
            });
        }
        1 => {
            let total = naive.iter().filter(|&&x| x == c).count();
            let j = rng.random_range(1..=total + 1);
            let want = naive
                .iter()
                .enumerate()
                .filter(|&(_, &x)| x == c)
                .nth(j - 1)
                .map(|(i, _)| i);
            let got = m.select(c, j);
            report.check(got == want, || {
                format!("{which} select({:#x}, {j}) = {got:?}, expected {want:?}", c.to_u128())
            });
        }
        _ => {
            let lo = rng.random_range(0..=n);
            let hi = rng.random_range(lo..=n);
            let want = naive[lo..hi].iter().filter(|&&x| x == c).count();
            let got = m.range_count(c, lo, hi)?;
            report.check(got == want, || {
                format!(
                    "{which} range_count({:#x}, {lo}, {hi}) = {got}, expected {want}",
                    c.to_u128()
                )
            });
        }
    }
    Ok(())
}
