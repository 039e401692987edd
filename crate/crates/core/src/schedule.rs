//! Pairing schedules: which instances get combined in each iteration.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{self, VectorSequence};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    MixupDisjoint,
    MixagAnchor,
    Multilingual,
    NearestNeighbor,
}

/// Ordered `(anchor, partner)` pairs for one iteration.
///
/// For [`Regime::Multilingual`] the anchor indexes the target corpus and the
/// partner indexes the pool; every other regime indexes a single corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSchedule {
    pub regime: Regime,
    /// 1-based.
    pub iteration: usize,
    pub pairs: Vec<(usize, usize)>,
    pub seed: u64,
}

/// Vertex-disjoint random pairings, `⌊n/2⌋` pairs per iteration, with no
/// unordered pair used twice.
///
/// The matchings are the rounds of a round-robin tournament over a random
/// relabelling of the instances, taken in random order. That family covers
/// every pair exactly once, so `n − 1` iterations are available for even `n`
/// and `n` for odd `n`; with odd `n` each instance sits out exactly once.
pub fn mixup_schedule(n: usize, iterations: usize, seed: u64) -> Result<Vec<PairSchedule>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("mixup pairing needs at least 2 instances, got {n}")));
    }
    // odd n gets a phantom vertex `m - 1`; whoever meets it sits out
    let m = if n.is_multiple_of(2) { n } else { n + 1 };
    let rounds = m - 1;
    if iterations > rounds {
        return Err(Error::ExhaustedPairs(format!(
            "{n} instances allow {rounds} disjoint pairings, {iterations} requested"
        )));
    }

    let mut rng = seed::substream(seed, seed::SCHEDULE, "mixup");
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(&mut rng);
    let mut order: Vec<usize> = (0..rounds).collect();
    order.shuffle(&mut rng);

    let mut schedules = Vec::with_capacity(iterations);
    for (it, &round) in order.iter().take(iterations).enumerate() {
        let mut raw = vec![(m - 1, round)];
        for k in 1..m / 2 {
            raw.push(((round + k) % rounds, (round + rounds - k) % rounds));
        }
        let mut pairs: Vec<(usize, usize)> = raw
            .into_iter()
            .filter(|&(a, b)| a < n && b < n)
            .map(|(a, b)| {
                let (a, b) = (label[a], label[b]);
                if rng.random::<bool>() { (a, b) } else { (b, a) }
            })
            .collect();
        pairs.shuffle(&mut rng);
        schedules.push(PairSchedule {
            regime: Regime::MixupDisjoint,
            iteration: it + 1,
            pairs,
            seed,
        });
    }
    Ok(schedules)
}

/// `anchor` paired with every other index in ascending order.
pub fn mixag_pairs(n: usize, anchor: usize) -> Vec<(usize, usize)> {
    (0..n).filter(|&p| p != anchor).map(|p| (anchor, p)).collect()
}

/// One random anchor per iteration paired with all other instances, `n − 1`
/// pairs each. Anchors do not repeat, so at most `n` iterations exist.
pub fn mixag_schedule(n: usize, anchor_seed: u64, iterations: usize) -> Result<Vec<PairSchedule>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("mixag pairing needs at least 2 instances, got {n}")));
    }
    if iterations > n {
        return Err(Error::ExhaustedPairs(format!(
            "{n} instances allow {n} distinct anchors, {iterations} requested"
        )));
    }
    let mut rng = seed::substream(anchor_seed, seed::SCHEDULE, "mixag");
    let mut anchors: Vec<usize> = (0..n).collect();
    anchors.shuffle(&mut rng);
    Ok(anchors
        .into_iter()
        .take(iterations)
        .enumerate()
        .map(|(it, anchor)| PairSchedule {
            regime: Regime::MixagAnchor,
            iteration: it + 1,
            pairs: mixag_pairs(n, anchor),
            seed: anchor_seed,
        })
        .collect())
}

/// Every target instance is an anchor once per iteration, with a partner
/// drawn uniformly from the pool (any language), never itself and never a
/// partner it already had.
pub fn multilingual_schedule(
    target: &Corpus,
    pool: &Corpus,
    iterations: usize,
    seed: u64,
) -> Result<Vec<PairSchedule>> {
    if target.is_empty() {
        return Err(Error::InvalidInput("multilingual target corpus is empty".into()));
    }
    if pool.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "multilingual pool needs at least 2 instances, got {}",
            pool.len()
        )));
    }
    let pool_index: HashMap<&str, usize> = pool.iter().enumerate().map(|(i, x)| (x.id.as_str(), i)).collect();
    let anchor_in_pool = target
        .iter()
        .map(|x| {
            pool_index.get(x.id.as_str()).copied().ok_or_else(|| {
                Error::InvalidInput(format!("target instance {} is missing from the pool", x.id))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = seed::substream(seed, seed::SCHEDULE, "multilingual");
    let mut used: Vec<HashSet<usize>> = vec![HashSet::new(); target.len()];
    let mut schedules = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let mut pairs = Vec::with_capacity(target.len());
        for (a, &self_idx) in anchor_in_pool.iter().enumerate() {
            let candidates: Vec<usize> = (0..pool.len())
                .filter(|p| *p != self_idx && !used[a].contains(p))
                .collect();
            let Some(&partner) = candidates.get(rng.random_range(0..candidates.len().max(1))) else {
                return Err(Error::ExhaustedPairs(format!(
                    "anchor {} has no unused partner left in iteration {}",
                    target.instances[a].id,
                    it + 1
                )));
            };
            used[a].insert(partner);
            pairs.push((a, partner));
        }
        schedules.push(PairSchedule {
            regime: Regime::Multilingual,
            iteration: it + 1,
            pairs,
            seed,
        });
    }
    Ok(schedules)
}

/// The first `k_pairs` sequences, in order, each paired with its nearest
/// other sequence (see [`embedding::nearest_neighbor`]).
pub fn nn_schedule(sequences: &[VectorSequence], k_pairs: usize) -> Result<PairSchedule> {
    if sequences.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "nearest-neighbor pairing needs at least 2 sequences, got {}",
            sequences.len()
        )));
    }
    let pairs = (0..k_pairs.min(sequences.len()))
        .map(|i| {
            let nn = embedding::nearest_neighbor_where(&sequences[i], sequences, |j| j != i)?
                .expect("at least one other sequence");
            Ok((i, nn))
        })
        .collect::<Result<_>>()?;
    Ok(PairSchedule {
        regime: Regime::NearestNeighbor,
        iteration: 1,
        pairs,
        seed: 0,
    })
}

/// Stable digest of a list of schedules.
pub fn schedule_digest(schedules: &[PairSchedule]) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(schedules).expect("schedules serialize");
    hex::encode(Sha256::digest(json))
}
