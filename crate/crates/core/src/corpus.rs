//! Labeled corpus model, JSONL ingestion and the few-shot/evaluation split.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "GAO")]
    Gao,
    #[serde(rename = "TRAC")]
    Trac,
    #[serde(rename = "WUL")]
    Wul,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Gao, Domain::Trac, Domain::Wul];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Gao => "GAO",
            Domain::Trac => "TRAC",
            Domain::Wul => "WUL",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GAO" => Ok(Domain::Gao),
            "TRAC" => Ok(Domain::Trac),
            "WUL" => Ok(Domain::Wul),
            other => Err(Error::InvalidConfig(format!("unknown domain tag {other:?}"))),
        }
    }
}

/// Where a synthetic instance came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    pub language: String,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        label: Option<u8>,
        language: impl Into<String>,
        domain: Domain,
    ) -> Result<Self> {
        let instance = Instance {
            id: id.into(),
            tokens,
            label,
            language: language.into(),
            domain,
            provenance: None,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: &str| Error::InvalidInstance {
            id: self.id.clone(),
            message: message.to_string(),
        };
        if self.tokens.is_empty() {
            return Err(fail("token list is empty"));
        }
        if matches!(self.label, Some(l) if l > 1) {
            return Err(fail("label must be 0 or 1"));
        }
        Ok(())
    }

    pub fn require_label(&self) -> Result<u8> {
        self.label.ok_or_else(|| Error::InvalidInstance {
            id: self.id.clone(),
            message: "instance is unlabeled".into(),
        })
    }
}

/// On-disk record. Accepts raw `text` in place of `tokens`.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    label: Option<i64>,
    language: String,
    domain: String,
    #[serde(default)]
    provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub name: String,
    pub instances: Vec<Instance>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, instances: Vec<Instance>) -> Result<Self> {
        let corpus = Corpus {
            name: name.into(),
            instances,
        };
        let mut seen = HashSet::new();
        for inst in &corpus.instances {
            inst.validate()?;
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::InvalidInstance {
                    id: inst.id.clone(),
                    message: "duplicate id".into(),
                });
            }
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    /// Instance count per domain.
    pub fn domain_counts(&self) -> BTreeMap<Domain, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.domain).or_insert(0) += 1;
        }
        counts
    }

    /// Concatenates corpora in order, checking id uniqueness across them.
    pub fn concat<'a>(name: impl Into<String>, parts: impl IntoIterator<Item = &'a Corpus>) -> Result<Corpus> {
        let instances = parts
            .into_iter()
            .flat_map(|c| c.instances.iter().cloned())
            .collect();
        Corpus::new(name, instances)
    }

    pub fn is_labeled(&self) -> bool {
        self.instances.iter().all(|i| i.label.is_some())
    }
}

/// Reads a JSONL corpus. The corpus name is the file stem.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let tokens = match (raw.tokens, raw.text) {
            (Some(tokens), _) => tokens,
            (None, Some(text)) => text.split_whitespace().map(str::to_string).collect(),
            (None, None) => {
                return Err(Error::parse(path, lineno, "record has neither tokens nor text"));
            }
        };
        let label = match raw.label {
            None => None,
            Some(l @ (0 | 1)) => Some(l as u8),
            Some(other) => {
                return Err(Error::parse(path, lineno, format!("label must be 0 or 1, got {other}")));
            }
        };
        let domain: Domain = raw
            .domain
            .parse()
            .map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?;
        if tokens.is_empty() {
            return Err(Error::parse(path, lineno, format!("instance {} has no tokens", raw.id)));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::parse(path, lineno, format!("duplicate id {:?}", raw.id)));
        }
        instances.push(Instance {
            id: raw.id,
            tokens,
            label,
            language: raw.language,
            domain,
            provenance: raw.provenance,
        });
    }
    Ok(Corpus { name, instances })
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus(corpus, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, out: &mut W) -> std::io::Result<()> {
    for inst in &corpus.instances {
        serde_json::to_writer(&mut *out, inst)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Few-shot fraction as an exact rational plus the split seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub numerator: u64,
    pub denominator: u64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            numerator: 1,
            denominator: 10,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(numerator: u64, denominator: u64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            numerator,
            denominator,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.numerator == 0 || self.denominator == 0 || self.numerator >= self.denominator {
            return Err(Error::InvalidSplit(format!(
                "few-shot fraction {}/{} must lie strictly between 0 and 1",
                self.numerator, self.denominator
            )));
        }
        Ok(())
    }

    /// `round(fraction * n)`, rounding halves up.
    pub fn few_shot_size(&self, n: usize) -> usize {
        let n = n as u128;
        let (num, den) = (self.numerator as u128, self.denominator as u128);
        ((2 * num * n + den) / (2 * den)) as usize
    }
}

/// Parses a fraction written as `p/q` or as a decimal such as `0.1`.
pub fn parse_fraction(s: &str) -> Result<(u64, u64)> {
    let bad = || Error::InvalidSplit(format!("cannot parse fraction {s:?}"));
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = p.trim().parse().map_err(|_| bad())?;
        let q = q.trim().parse().map_err(|_| bad())?;
        return Ok((p, q));
    }
    let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
    if frac_part.len() > 18 || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let den = 10u64.pow(frac_part.len() as u32);
    let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
    Ok((num, den))
}

/// Splits a labeled corpus into few-shot and evaluation parts.
///
/// The draw is made separately inside each domain and the selections are
/// pooled afterwards; both parts keep the original corpus order.
pub fn split_few_shot(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    spec.validate()?;
    if let Some(inst) = corpus.instances.iter().find(|i| i.label.is_none()) {
        return Err(Error::InvalidSplit(format!("instance {} is unlabeled", inst.id)));
    }

    let mut by_domain: BTreeMap<Domain, Vec<usize>> = BTreeMap::new();
    for (i, inst) in corpus.instances.iter().enumerate() {
        by_domain.entry(inst.domain).or_default().push(i);
    }

    let mut selected = vec![false; corpus.len()];
    for (domain, members) in &by_domain {
        let n = members.len() as u128;
        if n * (spec.numerator as u128) < spec.denominator as u128 {
            return Err(Error::InvalidSplit(format!(
                "domain {domain} has {n} instances, too few for a {}/{} few-shot draw",
                spec.numerator, spec.denominator
            )));
        }
        let k = spec.few_shot_size(members.len());
        let mut rng = seed::substream(spec.seed, seed::SPLIT, domain.as_str());
        for pick in index::sample(&mut rng, members.len(), k) {
            selected[members[pick]] = true;
        }
    }

    let (mut few, mut eval) = (Vec::new(), Vec::new());
    for (inst, chosen) in corpus.instances.iter().zip(selected) {
        if chosen {
            few.push(inst.clone());
        } else {
            eval.push(inst.clone());
        }
    }
    Ok((
        Corpus {
            name: format!("{}.fewshot", corpus.name),
            instances: few,
        },
        Corpus {
            name: format!("{}.eval", corpus.name),
            instances: eval,
        },
    ))
}

/// Keeps instances matching every given predicate, in order.
pub fn filter(corpus: &Corpus, language: Option<&str>, domain: Option<Domain>) -> Corpus {
    let instances = corpus
        .instances
        .iter()
        .filter(|i| language.is_none_or(|l| i.language == l))
        .filter(|i| domain.is_none_or(|d| i.domain == d))
        .cloned()
        .collect();
    Corpus {
        name: corpus.name.clone(),
        instances,
    }
}
