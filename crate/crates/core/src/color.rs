//! Color-dominance metrics over image batches.
//!
//! An image is dominated by a channel when that channel's mean exceeds `K`
//! times the larger of the other two means. A batch scores the number of
//! distinct dominant colors among its images, and a set of batches is
//! summarized by the mean score ([`avg_k`]) and the fractions of batches that
//! reach three ([`c3_k`]) or at least two ([`c2_k`]) colors.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The dominance grid used throughout the evaluation protocol.
pub const DEFAULT_FACTORS: [f64; 3] = [1.0, 1.1, 1.2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColorError {
    #[error("dominance factor K must be a finite value >= 1, got {0}")]
    InvalidFactor(f64),
    #[error("a batch must contain at least one image")]
    EmptyBatch,
    #[error("a batch set must contain at least one batch")]
    EmptyBatchSet,
    #[error("channel means must lie in [0, 255], got ({r}, {g}, {b})")]
    MeansOutOfRange { r: f64, g: f64, b: f64 },
}

/// Per-channel pixel means on the 0–255 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeans {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ChannelMeans {
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self, ColorError> {
        let ok = |v: f64| (0.0..=255.0).contains(&v);
        if !(ok(r) && ok(g) && ok(b)) {
            return Err(ColorError::MeansOutOfRange { r, g, b });
        }
        Ok(ChannelMeans { r, g, b })
    }

    /// Same ratios, any nonnegative scale. Dominance is homogeneous, so the
    /// 0–255 bound is not needed for classification.
    pub fn unchecked(r: f64, g: f64, b: f64) -> Self {
        ChannelMeans { r, g, b }
    }
}

/// The `K` in "one channel exceeds `K` times the others".
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DominanceFactor(f64);

impl DominanceFactor {
    pub fn new(k: f64) -> Result<Self, ColorError> {
        if k.is_finite() && k >= 1.0 {
            Ok(DominanceFactor(k))
        } else {
            Err(ColorError::InvalidFactor(k))
        }
    }

    pub fn get(&self) -> f64 {
        self.0
    }

    pub fn defaults() -> Vec<DominanceFactor> {
        DEFAULT_FACTORS.iter().map(|&k| DominanceFactor(k)).collect()
    }
}

impl TryFrom<f64> for DominanceFactor {
    type Error = ColorError;

    fn try_from(k: f64) -> Result<Self, Self::Error> {
        DominanceFactor::new(k)
    }
}

impl From<DominanceFactor> for f64 {
    fn from(k: DominanceFactor) -> f64 {
        k.0
    }
}

impl fmt::Display for DominanceFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DominantColor {
    Red,
    Green,
    Blue,
    None,
}

pub fn dominant_color(means: ChannelMeans, k: DominanceFactor) -> DominantColor {
    let k = k.get();
    let ChannelMeans { r, g, b } = means;
    if r > k * g.max(b) {
        DominantColor::Red
    } else if g > k * r.max(b) {
        DominantColor::Green
    } else if b > k * g.max(r) {
        DominantColor::Blue
    } else {
        DominantColor::None
    }
}

/// `N_K(b)`: how many of red, green and blue dominate at least one image.
pub fn n_dominant_colors(batch: &[DominantColor]) -> Result<u8, ColorError> {
    if batch.is_empty() {
        return Err(ColorError::EmptyBatch);
    }
    let present = |c: DominantColor| batch.contains(&c) as u8;
    Ok(present(DominantColor::Red) + present(DominantColor::Green) + present(DominantColor::Blue))
}

fn nonempty(counts: &[u8]) -> Result<f64, ColorError> {
    if counts.is_empty() {
        Err(ColorError::EmptyBatchSet)
    } else {
        Ok(counts.len() as f64)
    }
}

/// Mean number of dominant colors per batch.
pub fn avg_k(counts: &[u8]) -> Result<f64, ColorError> {
    let n = nonempty(counts)?;
    Ok(counts.iter().map(|&c| c as u64).sum::<u64>() as f64 / n)
}

/// Fraction of batches showing all three dominant colors.
pub fn c3_k(counts: &[u8]) -> Result<f64, ColorError> {
    let n = nonempty(counts)?;
    Ok(counts.iter().filter(|&&c| c == 3).count() as f64 / n)
}

/// Fraction of batches showing at least two dominant colors.
pub fn c2_k(counts: &[u8]) -> Result<f64, ColorError> {
    let n = nonempty(counts)?;
    Ok(counts.iter().filter(|&&c| c >= 2).count() as f64 / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorStats {
    pub k: DominanceFactor,
    pub colors: Vec<DominantColor>,
    pub n_k: u8,
}

/// Dominant colors and `N_K` of one batch, for each configured factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorBatchStats {
    pub per_factor: Vec<FactorStats>,
}

impl ColorBatchStats {
    pub fn compute(means: &[ChannelMeans], factors: &[DominanceFactor]) -> Result<Self, ColorError> {
        if means.is_empty() {
            return Err(ColorError::EmptyBatch);
        }
        let per_factor = factors
            .iter()
            .map(|&k| {
                let colors: Vec<_> = means.iter().map(|&m| dominant_color(m, k)).collect();
                let n_k = n_dominant_colors(&colors)?;
                Ok(FactorStats { k, colors, n_k })
            })
            .collect::<Result<_, ColorError>>()?;
        Ok(ColorBatchStats { per_factor })
    }

    pub fn n_k(&self, k: DominanceFactor) -> Option<u8> {
        self.per_factor.iter().find(|s| s.k == k).map(|s| s.n_k)
    }
}

/// `Avg_K`, `C3_K` and `C2_K` for one factor over a batch set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorSummary {
    pub k: DominanceFactor,
    pub batches: usize,
    pub avg: f64,
    pub c3: f64,
    pub c2: f64,
}

pub fn summarize(batches: &[ColorBatchStats], k: DominanceFactor) -> Result<ColorSummary, ColorError> {
    let counts = batches
        .iter()
        .map(|b| b.n_k(k).ok_or(ColorError::InvalidFactor(k.get())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ColorSummary {
        k,
        batches: counts.len(),
        avg: avg_k(&counts)?,
        c3: c3_k(&counts)?,
        c2: c2_k(&counts)?,
    })
}
