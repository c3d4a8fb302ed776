//! Seeded resampling: named RNG streams, win/loss balancing and per-org caps.
//!
//! Every random draw comes from a stream derived from `(seed, key)` with a
//! stable key per task, so results do not depend on execution order or
//! thread count. Candidates are put in canonical order before sampling and
//! returned in canonical order.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use super::percentile;
use crate::ingest::Outcome;

/// The generator behind every stream.
pub type StreamRng = ChaCha12Rng;

fn stream_digest(seed: u64, key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    h.finalize().into()
}

/// Independent generator for the task named `key` under `seed`.
pub fn stream_rng(seed: u64, key: &str) -> StreamRng {
    StreamRng::from_seed(stream_digest(seed, key))
}

/// Child seed for the task named `key` under `seed`.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let d = stream_digest(seed, key);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Grouping and ordering keys of a resampled item.
pub trait CaseKey {
    fn org(&self) -> &str;
    fn case_id(&self) -> &str;
    fn outcome(&self) -> Outcome;
}

fn canonical_order<T: CaseKey>(items: &[T], idx: &mut [usize]) {
    idx.sort_by(|&a, &b| {
        let (x, y) = (&items[a], &items[b]);
        (x.org(), x.case_id(), x.outcome(), a).cmp(&(y.org(), y.case_id(), y.outcome(), b))
    });
}

fn draw(rng: &mut StreamRng, pool: &[usize], m: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), m)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Per org, keeps `m = min(#wins, #losses)` of each outcome drawn uniformly
/// without replacement. Returns indices into `items` in canonical order.
pub fn balanced_sample<T: CaseKey>(items: &[T], seed: u64) -> Vec<usize> {
    balanced_subset(items, (0..items.len()).collect(), seed)
}

/// [`balanced_sample`] restricted to the given candidate indices.
pub fn balanced_subset<T: CaseKey>(items: &[T], mut candidates: Vec<usize>, seed: u64) -> Vec<usize> {
    canonical_order(items, &mut candidates);
    let mut by_org: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for i in candidates {
        let entry = by_org.entry(items[i].org()).or_default();
        match items[i].outcome() {
            Outcome::Win => entry.0.push(i),
            Outcome::Loss => entry.1.push(i),
        }
    }
    let mut out = Vec::new();
    for (org, (wins, losses)) in by_org {
        let m = wins.len().min(losses.len());
        if m == 0 {
            continue;
        }
        let mut rng = stream_rng(seed, &format!("balance/{org}"));
        out.extend(draw(&mut rng, &wins, m));
        out.extend(draw(&mut rng, &losses, m));
    }
    canonical_order(items, &mut out);
    out
}

/// Caps each org's case count (wins and losses jointly) at the `q`-th
/// percentile of per-org counts, rounded down. Orgs above the cap are
/// down-sampled uniformly. Returns indices in canonical order.
pub fn cap_to_percentile<T: CaseKey>(items: &[T], q: f64, seed: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..items.len()).collect();
    canonical_order(items, &mut all);
    let mut by_org: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in all {
        by_org.entry(items[i].org()).or_default().push(i);
    }
    if by_org.is_empty() {
        return Vec::new();
    }
    let counts: Vec<f64> = by_org.values().map(|v| v.len() as f64).collect();
    // interpolation can land a hair below an integer cap
    let cap = (percentile(&counts, q).expect("non-empty counts") + 1e-9).floor() as usize;
    let mut out = Vec::new();
    for (org, idx) in by_org {
        if idx.len() > cap {
            let mut rng = stream_rng(seed, &format!("cap/{org}"));
            out.extend(draw(&mut rng, &idx, cap));
        } else {
            out.extend(idx);
        }
    }
    canonical_order(items, &mut out);
    out
}
