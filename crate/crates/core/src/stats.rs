//! Evaluation statistics.
//!
//! Tail probabilities come from `statrs` (regularised incomplete gamma and
//! beta functions). Ratios whose denominator is zero are reported as `None`,
//! which serialises to `null`, rather than as a fabricated 0.

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::embedding::{dot, norm};
use crate::error::{Error, Result};

/// Gold label plus the predictions of two systems for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedOutcome {
    #[serde(default)]
    pub id: String,
    pub gold: u8,
    pub pred_a: u8,
    pub pred_b: u8,
}

impl PairedOutcome {
    pub fn new(gold: u8, pred_a: u8, pred_b: u8) -> Self {
        PairedOutcome {
            id: String::new(),
            gold,
            pred_a,
            pred_b,
        }
    }

    fn a_correct(&self) -> bool {
        self.pred_a == self.gold
    }

    fn b_correct(&self) -> bool {
        self.pred_b == self.gold
    }
}

/// Reads a JSONL file of `{"id", "gold", "pred_a", "pred_b"}` records.
pub fn load_outcomes(path: impl AsRef<Path>) -> Result<Vec<PairedOutcome>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairedOutcome =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if rec.gold > 1 || rec.pred_a > 1 || rec.pred_b > 1 {
            return Err(Error::parse(path, idx + 1, "gold, pred_a and pred_b must be 0 or 1"));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::parse(path, 1, "no outcome records"));
    }
    Ok(out)
}

/// Mean loss over the synthetic (vicinal) samples.
pub fn vicinal_risk(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::InvalidInput("vicinal risk needs at least one loss".into()));
    }
    if let Some(bad) = losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidInput(format!("losses must be finite and non-negative, got {bad}")));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub statistic: f64,
    pub p_value: f64,
    /// A correct, B wrong.
    pub b: u64,
    /// A wrong, B correct.
    pub c: u64,
}

/// Discordant counts `(b, c)`.
pub fn discordant_counts(outcomes: &[PairedOutcome]) -> (u64, u64) {
    outcomes.iter().fold((0, 0), |(b, c), o| match (o.a_correct(), o.b_correct()) {
        (true, false) => (b + 1, c),
        (false, true) => (b, c + 1),
        _ => (b, c),
    })
}

/// Continuity-corrected McNemar test, `(max(|b − c| − 1, 0))² / (b + c)`
/// against chi-square with one degree of freedom.
pub fn mcnemar(outcomes: &[PairedOutcome]) -> McNemar {
    let (b, c) = discordant_counts(outcomes);
    mcnemar_from_counts(b, c)
}

pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemar {
    if b + c == 0 {
        return McNemar {
            statistic: 0.0,
            p_value: 1.0,
            b,
            c,
        };
    }
    let diff = (b.abs_diff(c) as f64 - 1.0).max(0.0);
    let statistic = diff * diff / (b + c) as f64;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        ChiSquared::new(1.0).expect("valid df").sf(statistic).clamp(0.0, 1.0)
    };
    McNemar {
        statistic,
        p_value,
        b,
        c,
    }
}

/// Exact two-sided binomial McNemar test on the discordant pairs; suited to
/// `b + c < 25`.
pub fn mcnemar_exact(outcomes: &[PairedOutcome]) -> McNemar {
    let (b, c) = discordant_counts(outcomes);
    let n = b + c;
    let p_value = if n == 0 {
        1.0
    } else {
        let binom = Binomial::new(0.5, n).expect("valid binomial");
        (2.0 * binom.cdf(b.min(c))).min(1.0)
    };
    McNemar {
        statistic: b.min(c) as f64,
        p_value,
        b,
        c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub comparisons: u32,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            alpha: 0.05,
            comparisons: 1,
        }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("significance level must lie in (0, 1), got {}", self.alpha)));
        }
        if self.comparisons == 0 {
            return Err(Error::InvalidConfig("number of comparisons must be positive".into()));
        }
        Ok(())
    }
}

/// Bonferroni-corrected significance level.
pub fn bonferroni(cfg: &SignificanceConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.alpha / f64::from(cfg.comparisons))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "SYN")]
    Syntax,
    #[serde(rename = "FAM")]
    Family,
    #[serde(rename = "INV")]
    Inventory,
    #[serde(rename = "PHO")]
    Phonology,
    #[serde(rename = "GEO")]
    Geography,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Syntax => "SYN",
            FeatureSet::Family => "FAM",
            FeatureSet::Inventory => "INV",
            FeatureSet::Phonology => "PHO",
            FeatureSet::Geography => "GEO",
        }
    }
}

/// Typological feature vector of one language; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageVector {
    pub language: String,
    pub feature_set: FeatureSet,
    pub values: Vec<Option<f64>>,
}

pub fn load_language_vector(path: impl AsRef<Path>) -> Result<LanguageVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: LanguageVector = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if v.values.iter().all(Option::is_none) {
        return Err(Error::parse(path, 1, "language vector has no values"));
    }
    Ok(v)
}

/// Cosine similarity over the dimensions present in both vectors.
pub fn cosine_language_similarity(a: &LanguageVector, b: &LanguageVector) -> Result<f64> {
    if a.feature_set != b.feature_set {
        return Err(Error::InvalidInput(format!(
            "cannot compare {} features with {} features",
            a.feature_set.as_str(),
            b.feature_set.as_str()
        )));
    }
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            expected: a.values.len(),
            actual: b.values.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .values
        .iter()
        .zip(&b.values)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    if xs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} and {} share no non-missing {} features",
            a.language,
            b.language,
            a.feature_set.as_str()
        )));
    }
    let (nx, ny) = (norm(&xs), norm(&ys));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::InvalidInput(format!(
            "{} or {} has an all-zero {} vector",
            a.language,
            b.language,
            a.feature_set.as_str()
        )));
    }
    Ok((dot(&xs, &ys) / (nx * ny)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    /// Two-sided, from Student's t with `n − 2` degrees of freedom.
    pub p_value: f64,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Pearson> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("correlation needs at least 3 points, got {n}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one of the series is constant".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid df");
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(Pearson { r, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall(gold: &[u8], pred: &[u8]) -> Result<PrecisionRecall> {
    if gold.len() != pred.len() || gold.is_empty() {
        return Err(Error::InvalidInput(format!(
            "gold and predictions must be equal-length and nonempty ({} vs {})",
            gold.len(),
            pred.len()
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (&g, &p) in gold.iter().zip(pred) {
        match (g, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fneg += 1,
            _ => {}
        }
    }
    Ok(PrecisionRecall {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipRates {
    /// % of gold-negative instances A gets right that B gets wrong.
    pub neg_degraded_pct: Option<f64>,
    /// % of gold-positive instances A gets wrong that B gets right.
    pub pos_gained_pct: Option<f64>,
}

pub fn flip_rates(outcomes: &[PairedOutcome]) -> Result<FlipRates> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("flip rates need at least one outcome".into()));
    }
    let (mut neg_base, mut neg_flip, mut pos_base, mut pos_flip) = (0, 0, 0, 0);
    for o in outcomes {
        match (o.gold, o.a_correct()) {
            (0, true) => {
                neg_base += 1;
                if !o.b_correct() {
                    neg_flip += 1;
                }
            }
            (1, false) => {
                pos_base += 1;
                if o.b_correct() {
                    pos_flip += 1;
                }
            }
            _ => {}
        }
    }
    Ok(FlipRates {
        neg_degraded_pct: ratio(neg_flip, neg_base).map(|r| 100.0 * r),
        pos_gained_pct: ratio(pos_flip, pos_base).map(|r| 100.0 * r),
    })
}
