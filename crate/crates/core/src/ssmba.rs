//! Corruption and reconstruction of texts (SSMBA-style neighbourhoods).
//!
//! A text is corrupted by masking tokens, either one random position or every
//! lexicon hit, and a [`Reconstructor`] fills the masked positions. Labels
//! are carried over from the parent unchanged.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::time::Duration;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Instance, Provenance};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed;
use crate::vicinal::Method;

pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskStrategy {
    RandomOne,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    pub strategy: MaskStrategy,
    /// Lowercased words; required by [`MaskStrategy::Lexicon`].
    pub lexicon: Option<BTreeSet<String>>,
    pub mask_token: String,
    pub seed: u64,
}

impl MaskPolicy {
    pub fn random_one(seed: u64) -> Self {
        MaskPolicy {
            strategy: MaskStrategy::RandomOne,
            lexicon: None,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            seed,
        }
    }

    pub fn lexicon(words: impl IntoIterator<Item = String>, seed: u64) -> Result<Self> {
        let policy = MaskPolicy {
            strategy: MaskStrategy::Lexicon,
            lexicon: Some(words.into_iter().map(|w| w.to_lowercase()).collect()),
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            seed,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy == MaskStrategy::Lexicon && self.lexicon.as_ref().is_none_or(|l| l.is_empty()) {
            return Err(Error::InvalidConfig("lexicon masking needs a nonempty lexicon".into()));
        }
        if self.mask_token.is_empty() {
            return Err(Error::InvalidConfig("mask token must not be empty".into()));
        }
        Ok(())
    }
}

/// One lowercased word per line; blank lines are ignored.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub masked: Vec<String>,
    /// Ascending.
    pub positions: Vec<usize>,
}

pub fn corrupt<R: Rng + ?Sized>(tokens: &[String], policy: &MaskPolicy, rng: &mut R) -> Corruption {
    let mut positions: Vec<usize> = match (&policy.strategy, &policy.lexicon) {
        (MaskStrategy::Lexicon, Some(lexicon)) => tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| lexicon.contains(&t.to_lowercase()))
            .map(|(i, _)| i)
            .collect(),
        _ => Vec::new(),
    };
    // no lexicon hits: fall back to a single random mask
    if positions.is_empty() && !tokens.is_empty() {
        positions.push(rng.random_range(0..tokens.len()));
    }
    let mut masked = tokens.to_vec();
    for &p in &positions {
        masked[p] = policy.mask_token.clone();
    }
    Corruption { masked, positions }
}

/// Corrupts one instance with the substream owned by `(instance id, round)`.
pub fn corrupt_instance(instance: &Instance, policy: &MaskPolicy, round: usize) -> Corruption {
    let mut rng = seed::substream(policy.seed, seed::SSMBA_MASK, &format!("{}#{round}", instance.id));
    corrupt(&instance.tokens, policy, &mut rng)
}

#[derive(Debug, Clone, Copy)]
pub struct ReconstructRequest<'a> {
    pub instance_id: &'a str,
    pub masked: &'a [String],
    pub positions: &'a [usize],
    /// The tokens before masking.
    pub original: &'a [String],
}

/// Fills masked positions. Must return exactly one token per position and be
/// deterministic for a fixed configuration.
pub trait Reconstructor: Sync {
    fn reconstruct(&self, request: &ReconstructRequest<'_>) -> Result<Vec<String>>;
}

/// Fills each mask with the table token nearest to the centroid of the
/// surrounding in-vocabulary tokens.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingReconstructor<'t> {
    pub table: &'t EmbeddingTable,
    /// Neighbours considered on each side.
    pub context_window: usize,
    pub mask_token: &'t str,
}

impl<'t> EmbeddingReconstructor<'t> {
    pub fn new(table: &'t EmbeddingTable, context_window: usize) -> Result<Self> {
        if context_window == 0 {
            return Err(Error::InvalidConfig("context window must be at least 1".into()));
        }
        Ok(EmbeddingReconstructor {
            table,
            context_window,
            mask_token: DEFAULT_MASK_TOKEN,
        })
    }
}

impl Reconstructor for EmbeddingReconstructor<'_> {
    fn reconstruct(&self, req: &ReconstructRequest<'_>) -> Result<Vec<String>> {
        let fail = |message: String| Error::Reconstruction {
            id: req.instance_id.to_string(),
            message,
        };
        if self.table.is_empty() {
            return Err(fail("embedding table is empty".into()));
        }
        let masked_set: HashSet<usize> = req.positions.iter().copied().collect();
        let dim = self.table.dim();
        let mask_idx = self.table.index_of(self.mask_token);

        req.positions
            .iter()
            .map(|&p| {
                if p >= req.masked.len() {
                    return Err(fail(format!("mask position {p} is out of range")));
                }
                let original_idx = req.original.get(p).and_then(|t| self.table.index_of(t));
                let allowed = |i: usize| Some(i) != original_idx && Some(i) != mask_idx;

                let lo = p.saturating_sub(self.context_window);
                let hi = (p + self.context_window).min(req.masked.len() - 1);
                let mut centroid = vec![0.0; dim];
                let mut count = 0usize;
                for q in (lo..=hi).filter(|q| *q != p && !masked_set.contains(q)) {
                    if let Some(v) = self.table.vector(&req.masked[q]) {
                        centroid.iter_mut().zip(v).for_each(|(c, x)| *c += x);
                        count += 1;
                    }
                }
                let chosen = if count == 0 {
                    (0..self.table.len()).find(|&i| allowed(i))
                } else {
                    centroid.iter_mut().for_each(|c| *c /= count as f64);
                    self.table.nearest_index(&centroid, allowed)
                };
                chosen
                    .map(|i| self.table.token(i).to_string())
                    .ok_or_else(|| fail("no admissible replacement token".into()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    tokens: &'a [String],
    mask_positions: &'a [usize],
}

#[derive(Deserialize)]
struct WireResponse {
    fills: Vec<String>,
}

/// Client for an external fill-mask service.
///
/// `POST {"tokens": [..], "mask_positions": [..]}` and expects
/// `{"fills": [..]}` back with one entry per position.
#[derive(Debug, Clone)]
pub struct HttpReconstructor {
    agent: ureq::Agent,
    url: String,
}

impl HttpReconstructor {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpReconstructor { agent, url: url.into() }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Reconstructor for HttpReconstructor {
    fn reconstruct(&self, req: &ReconstructRequest<'_>) -> Result<Vec<String>> {
        let fail = |message: String| Error::Reconstruction {
            id: req.instance_id.to_string(),
            message,
        };
        let body = WireRequest {
            tokens: req.masked,
            mask_positions: req.positions,
        };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| fail(format!("request to {} failed: {e}", self.url)))?;
        if response.status() != 200 {
            return Err(fail(format!("{} answered with status {}", self.url, response.status())));
        }
        let parsed: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| fail(format!("malformed response: {e}")))?;
        if parsed.fills.len() != req.positions.len() {
            return Err(fail(format!(
                "expected {} fills, got {}",
                req.positions.len(),
                parsed.fills.len()
            )));
        }
        Ok(parsed.fills)
    }
}

fn reconstruct_one(
    instance: &Instance,
    policy: &MaskPolicy,
    reconstructor: &dyn Reconstructor,
    round: usize,
) -> Result<Instance> {
    let label = instance.require_label()?;
    let corruption = corrupt_instance(instance, policy, round);
    let fills = reconstructor.reconstruct(&ReconstructRequest {
        instance_id: &instance.id,
        masked: &corruption.masked,
        positions: &corruption.positions,
        original: &instance.tokens,
    })?;
    let fail = |message: String| Error::Reconstruction {
        id: instance.id.clone(),
        message,
    };
    if fills.len() != corruption.positions.len() {
        return Err(fail(format!(
            "reconstructor returned {} fills for {} masks",
            fills.len(),
            corruption.positions.len()
        )));
    }
    let mut tokens = corruption.masked;
    for (&p, fill) in corruption.positions.iter().zip(fills) {
        if fill.is_empty() || fill == policy.mask_token {
            return Err(fail(format!("invalid fill {fill:?} at position {p}")));
        }
        tokens[p] = fill;
    }
    Ok(Instance {
        id: format!("{}.ssmba{}", instance.id, round + 1),
        tokens,
        label: Some(label),
        language: instance.language.clone(),
        domain: instance.domain,
        provenance: Some(Provenance {
            method: Method::Ssmba.as_str().to_string(),
            parents: vec![instance.id.clone()],
            lambda: None,
        }),
    })
}

/// Generates `rounds` reconstructed variants of every instance, grouped by
/// parent in corpus order.
pub fn ssmba_generate(
    corpus: &Corpus,
    policy: &MaskPolicy,
    reconstructor: &dyn Reconstructor,
    rounds: usize,
) -> Result<Corpus> {
    policy.validate()?;
    if rounds == 0 {
        return Err(Error::InvalidConfig("rounds must be at least 1".into()));
    }
    let groups: Vec<Vec<Instance>> = corpus
        .instances
        .par_iter()
        .map(|inst| (0..rounds).map(|r| reconstruct_one(inst, policy, reconstructor, r)).collect())
        .collect::<Result<_>>()?;
    Corpus::new(format!("{}.ssmba", corpus.name), groups.into_iter().flatten().collect())
}
