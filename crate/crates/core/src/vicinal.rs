//! Interpolation in embedding space: MIXUP and the angle-parameterised MIXAG.
//!
//! Both methods mix the flat concatenation of two token-vector sequences and
//! decode the result back into tokens. MIXUP draws the weight from a
//! symmetric Beta distribution. MIXAG builds `x̂ = λ·x_i + x_j` and picks λ so
//! that `x̂` makes a prescribed angle θ with `x_i`; by the law of sines on the
//! triangle `(0, λ·x_i, x̂)`,
//!
//! ```text
//! λ·‖x_i‖ / sin(α − θ) = ‖x_j‖ / sin θ
//! ```
//!
//! where α is the angle between the parents.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::embedding::{self, dot, norm, EmbeddingTable, VectorSequence};
use crate::error::{Error, Result};

/// Parents whose unit directions are closer than this (as sin α) are treated
/// as colinear.
pub const COLINEAR_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Mixup,
    Mixag,
    Ssmba,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mixup => "MIXUP",
            Method::Mixag => "MIXAG",
            Method::Ssmba => "SSMBA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixupConfig {
    /// Shape of the symmetric Beta(α, α) the weight is drawn from.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig { alpha: 0.2, seed: 0 }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("mixup alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// How θ is derived from the angle α between the parents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaRule {
    /// θ = α/2
    HalfAlpha,
    /// θ = α/3
    ThirdAlpha,
    /// A constant cos θ.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixagConfig {
    pub theta_rule: ThetaRule,
}

impl Default for MixagConfig {
    fn default() -> Self {
        MixagConfig {
            theta_rule: ThetaRule::HalfAlpha,
        }
    }
}

impl MixagConfig {
    pub fn validate(&self) -> Result<()> {
        if let ThetaRule::Fixed(c) = self.theta_rule {
            if !(c > -1.0 && c <= 1.0) {
                return Err(Error::InvalidConfig(format!("fixed cos(theta) must lie in (-1, 1], got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub tokens: Vec<String>,
    pub label: u8,
    pub lambda_used: f64,
    pub parent_ids: (String, String),
    pub method: Method,
}

/// One side of a mix: an id, its label and its encoded tokens.
#[derive(Debug, Clone, Copy)]
pub struct Parent<'a> {
    pub id: &'a str,
    pub label: u8,
    pub embedding: &'a VectorSequence,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((na, nb))
}

/// Cosine of the angle between two nonzero vectors, clamped to [-1, 1].
pub fn cos_alpha(x_i: &[f64], x_j: &[f64]) -> Result<f64> {
    let (ni, nj) = check_pair(x_i, x_j)?;
    Ok((dot(x_i, x_j) / (ni * nj)).clamp(-1.0, 1.0))
}

/// sin α from the chord lengths of the unit vectors,
/// `‖u − v‖·‖u + v‖ / 2`, which equals `√(1 − cos²α)` without the
/// cancellation near α = 0.
fn sin_alpha(x_i: &[f64], x_j: &[f64], ni: f64, nj: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x_i.iter().zip(x_j) {
        let (u, v) = (a / ni, b / nj);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    ((diff * sum).sqrt() / 2.0).min(1.0)
}

pub fn cos_theta_from_rule(cos_alpha: f64, rule: ThetaRule) -> f64 {
    let cos_alpha = cos_alpha.clamp(-1.0, 1.0);
    match rule {
        ThetaRule::HalfAlpha => ((1.0 + cos_alpha) / 2.0).max(0.0).sqrt(),
        ThetaRule::ThirdAlpha => (cos_alpha.acos() / 3.0).cos(),
        ThetaRule::Fixed(c) => c,
    }
}

/// Weight λ such that `λ·x_i + x_j` is at angle θ from `x_i`.
///
/// Requires `0 < θ < α`, i.e. `cos α < cos θ < 1`.
pub fn mixag_lambda(x_i: &[f64], x_j: &[f64], cos_theta: f64) -> Result<f64> {
    let (ni, nj) = check_pair(x_i, x_j)?;
    let cos_a = (dot(x_i, x_j) / (ni * nj)).clamp(-1.0, 1.0);
    let sin_a = sin_alpha(x_i, x_j, ni, nj);
    if sin_a < COLINEAR_EPS {
        return Err(Error::DegenerateAngle);
    }
    let out_of_range = || Error::OutOfRangeTheta {
        cos_theta,
        cos_alpha: cos_a,
    };
    if !(cos_theta < 1.0 && cos_theta > cos_a) {
        return Err(out_of_range());
    }
    let sin_t = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let lambda = nj * (cos_theta * sin_a - cos_a * sin_t) / (ni * sin_t);
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(out_of_range());
    }
    Ok(lambda)
}

/// Binary label of a weighted pair: 1 iff `w·y_i + (1 − w)·y_j ≥ 0.5`.
pub fn mix_labels(weight: f64, y_i: u8, y_j: u8) -> u8 {
    if y_i == y_j {
        return y_i;
    }
    let mixed = weight * f64::from(y_i) + (1.0 - weight) * f64::from(y_j);
    u8::from(mixed >= 0.5)
}

/// MIXAG's coefficients (λ, 1) normalised to a convex weight on `x_i`.
pub fn mixag_label_weight(lambda: f64) -> f64 {
    lambda / (lambda + 1.0)
}

pub fn sample_lambda<R: Rng + ?Sized>(cfg: &MixupConfig, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(cfg.alpha, cfg.alpha)
        .map_err(|e| Error::InvalidConfig(format!("mixup alpha {}: {e}", cfg.alpha)))?;
    Ok(beta.sample(rng))
}

/// Pads both sequences to a common length and returns their flat forms.
fn aligned(e_i: &VectorSequence, e_j: &VectorSequence, table: &EmbeddingTable) -> Result<(Vec<f64>, Vec<f64>)> {
    for e in [e_i, e_j] {
        if e.dim() != table.dim() {
            return Err(Error::DimensionMismatch {
                expected: table.dim(),
                actual: e.dim(),
            });
        }
    }
    let len = e_i.len().max(e_j.len());
    Ok((e_i.padded(len).concat().to_vec(), e_j.padded(len).concat().to_vec()))
}

/// Decodes a flat mixed vector, dropping chunks that are entirely zero
/// (padding on both sides).
fn decode_mixed(flat: &[f64], table: &EmbeddingTable) -> Result<Vec<String>> {
    let seq = embedding::split_concat(flat, table.dim())?;
    let decoded = embedding::decode(&seq, table)?;
    let tokens: Vec<String> = decoded
        .into_iter()
        .zip(seq.vectors())
        .filter(|(_, v)| v.iter().any(|x| *x != 0.0))
        .map(|(t, _)| t)
        .collect();
    if tokens.is_empty() {
        return Err(Error::InvalidInput("mixed vector decodes to no tokens".into()));
    }
    Ok(tokens)
}

/// `x̂ = λ·x_i + (1 − λ)·x_j`, decoded, with the threshold label.
pub fn mixup_combine(
    i: Parent<'_>,
    j: Parent<'_>,
    lambda: f64,
    table: &EmbeddingTable,
) -> Result<SyntheticInstance> {
    let (x_i, x_j) = aligned(i.embedding, j.embedding, table)?;
    let flat: Vec<f64> = x_i
        .iter()
        .zip(&x_j)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Ok(SyntheticInstance {
        tokens: decode_mixed(&flat, table)?,
        label: mix_labels(lambda, i.label, j.label),
        lambda_used: lambda,
        parent_ids: (i.id.to_string(), j.id.to_string()),
        method: Method::Mixup,
    })
}

/// `x̂ = λ·x_i + x_j` with λ from [`mixag_lambda`], decoded.
pub fn mixag_combine(
    i: Parent<'_>,
    j: Parent<'_>,
    cfg: &MixagConfig,
    table: &EmbeddingTable,
) -> Result<SyntheticInstance> {
    let (x_i, x_j) = aligned(i.embedding, j.embedding, table)?;
    let cos_theta = cos_theta_from_rule(cos_alpha(&x_i, &x_j)?, cfg.theta_rule);
    let lambda = mixag_lambda(&x_i, &x_j, cos_theta)?;
    let flat: Vec<f64> = x_i.iter().zip(&x_j).map(|(a, b)| lambda * a + b).collect();
    Ok(SyntheticInstance {
        tokens: decode_mixed(&flat, table)?,
        label: mix_labels(mixag_label_weight(lambda), i.label, j.label),
        lambda_used: lambda,
        parent_ids: (i.id.to_string(), j.id.to_string()),
        method: Method::Mixag,
    })
}
