//! Batch-level diversity aggregation: mean pairwise distance, demographic
//! coverage over labeled batches, multiplicative improvement and normal
//! approximation confidence intervals.

mod coverage;
mod provider;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coverage::{
    coverage_all_pairs, coverage_at_least, coverage_combination, coverage_genders_and_ethnicities,
    Ethnicity, Gender, LabeledBatch, LabeledBatchSet, LabeledImage,
};
pub use provider::{
    Checked, CommandProvider, FnProvider, PairwiseDistance, PixelL2Provider, PROVIDER_ENV,
};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("pairwise distance needs at least 2 items per batch, got {0}")]
    BatchTooSmall(usize),
    #[error("no batch has at least 2 items")]
    NoEligibleBatch,
    #[error("a batch set must contain at least one batch")]
    EmptyBatchSet,
    #[error("ethnicity threshold must be in 1..=4, got {0}")]
    InvalidThreshold(usize),
    #[error("distance provider violated its contract: {0}")]
    ProviderContract(String),
    #[error("distance provider failed: {0}")]
    ProviderFailed(String),
}

/// Mean of `d` over all unordered pairs of `batch`.
pub fn avg_pairwise(batch: &[String], d: &impl PairwiseDistance) -> Result<f64, MetricError> {
    if batch.len() < 2 {
        return Err(MetricError::BatchTooSmall(batch.len()));
    }
    let pairs = unordered_pairs(batch);
    let distances = d.distances(&pairs)?;
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}

fn unordered_pairs(batch: &[String]) -> Vec<(String, String)> {
    let mut pairs = Vec::with_capacity(batch.len() * (batch.len() - 1) / 2);
    for (i, a) in batch.iter().enumerate() {
        for b in &batch[i + 1..] {
            pairs.push((a.clone(), b.clone()));
        }
    }
    pairs
}

/// A mean over independent per-unit values with a 95% interval from the
/// standard error. `half_width` is `None` below two units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub half_width: Option<f64>,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = (n >= 2).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z_95 * (var / n as f64).sqrt()
        });
        Some(MeanEstimate { mean, half_width, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    /// Per-batch mean pairwise distance, `None` for batches under 2 items.
    pub per_batch: Vec<Option<f64>>,
    pub across: MeanEstimate,
}

/// Per-batch [`avg_pairwise`] and their mean across batches, issuing every
/// pair to the provider in a single request. Batches with fewer than two
/// items are skipped.
pub fn avg_pairwise_across_batches(
    batches: &[Vec<String>],
    d: &impl PairwiseDistance,
) -> Result<PairwiseSummary, MetricError> {
    let mut pairs = Vec::new();
    let mut spans = Vec::with_capacity(batches.len());
    for batch in batches {
        if batch.len() < 2 {
            spans.push(None);
            continue;
        }
        let start = pairs.len();
        pairs.extend(unordered_pairs(batch));
        spans.push(Some(start..pairs.len()));
    }
    if pairs.is_empty() {
        return Err(MetricError::NoEligibleBatch);
    }
    let distances = d.distances(&pairs)?;
    let per_batch: Vec<Option<f64>> = spans
        .into_iter()
        .map(|span| {
            span.map(|r| {
                let n = r.len() as f64;
                distances[r].iter().sum::<f64>() / n
            })
        })
        .collect();
    let eligible: Vec<f64> = per_batch.iter().flatten().copied().collect();
    let across = MeanEstimate::from_values(&eligible).expect("at least one eligible batch");
    Ok(PairwiseSummary { per_batch, across })
}

/// Mean distance over `pairs_per_group` random pairs drawn within each group
/// (pairs of distinct items, with replacement), then averaged across groups.
/// Groups are typically every image generated for one prompt, regardless of
/// batch. Groups with fewer than two items are skipped.
pub fn avg_sampled_pairs(
    groups: &[Vec<String>],
    pairs_per_group: usize,
    seed: u64,
    d: &impl PairwiseDistance,
) -> Result<MeanEstimate, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut below = |n: usize| ((rng.next_u64() as u128 * n as u128) >> 64) as usize;
    let mut pairs = Vec::new();
    let mut spans = Vec::new();
    for group in groups.iter().filter(|g| g.len() >= 2) {
        let start = pairs.len();
        for _ in 0..pairs_per_group {
            let i = below(group.len());
            let mut j = below(group.len() - 1);
            if j >= i {
                j += 1;
            }
            pairs.push((group[i].clone(), group[j].clone()));
        }
        spans.push(start..pairs.len());
    }
    if pairs.is_empty() {
        return Err(MetricError::NoEligibleBatch);
    }
    let distances = d.distances(&pairs)?;
    let means: Vec<f64> = spans
        .into_iter()
        .map(|r| {
            let n = r.len() as f64;
            distances[r].iter().sum::<f64>() / n
        })
        .collect();
    Ok(MeanEstimate::from_values(&means).expect("nonempty"))
}

/// Method-over-baseline ratio of a batch fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementScore {
    pub baseline_fraction: f64,
    pub method_fraction: f64,
    /// `None` when the baseline fraction is zero.
    pub ratio: Option<f64>,
}

pub fn multiplicative_improvement(method_fraction: f64, baseline_fraction: f64) -> ImprovementScore {
    ImprovementScore {
        baseline_fraction,
        method_fraction,
        ratio: (baseline_fraction > 0.0).then(|| method_fraction / baseline_fraction),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionCI {
    pub p: f64,
    pub n: usize,
    pub half_width: f64,
}

/// Normal-approximation 95% interval for a proportion over `n` batches.
pub fn proportion_ci(p: f64, n: usize) -> ProportionCI {
    let n = n.max(1);
    ProportionCI {
        p,
        n,
        half_width: Z_95 * (p * (1.0 - p) / n as f64).sqrt(),
    }
}
