//! Diverse latent batch selection.
//!
//! All strategies pull candidates from one [`SeededStream`] per call, in
//! stream order, so a returned [`SampleTrace`] identifies every admitted or
//! selected tensor by its stream index and can be replayed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tensor::{
    any_closer_than, min_distance_projected, DistanceMode, LatentShape, LatentTensor, SeededStream, TensorError,
    GENERATOR_BLOCK,
};

pub const DEFAULT_POOL_KERNEL: usize = 8;
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    Cap,
    Max,
    PoolingCap,
    PoolingMax,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Baseline,
        Strategy::Cap,
        Strategy::Max,
        Strategy::PoolingCap,
        Strategy::PoolingMax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Cap => "cap",
            Strategy::Max => "max",
            Strategy::PoolingCap => "pooling_cap",
            Strategy::PoolingMax => "pooling_max",
        }
    }

    pub fn is_cap(&self) -> bool {
        matches!(self, Strategy::Cap | Strategy::PoolingCap)
    }

    pub fn is_max(&self) -> bool {
        matches!(self, Strategy::Max | Strategy::PoolingMax)
    }

    pub fn is_pooled(&self) -> bool {
        matches!(self, Strategy::PoolingCap | Strategy::PoolingMax)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = SampleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s || st.as_str().replace('_', "-") == s)
            .ok_or_else(|| SampleError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Standard,
    Long,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Standard => "standard",
            Preset::Long => "long",
        }
    }

    pub fn cap_d_min(&self) -> f64 {
        match self {
            Preset::Standard => 182.0,
            Preset::Long => 183.0,
        }
    }

    pub fn pooling_cap_d_min(&self) -> f64 {
        3.1
    }

    pub fn n_max(&self) -> u64 {
        match self {
            Preset::Standard => 100,
            Preset::Long => 10_000,
        }
    }
}

impl FromStr for Preset {
    type Err = SampleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Preset::Standard),
            "long" => Ok(Preset::Long),
            other => Err(SampleError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub d_min: f64,
    pub n_max: u64,
    pub pool_kernel: usize,
    pub attempt_budget: u64,
    pub seed: u64,
    pub shape: LatentShape,
}

impl SamplerConfig {
    /// A config with the standard-preset parameters for every strategy.
    pub fn new(strategy: Strategy, batch_size: usize, seed: u64) -> Self {
        preset_config(Preset::Standard, strategy, batch_size, seed)
    }

    pub fn with_shape(mut self, shape: LatentShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_d_min(mut self, d_min: f64) -> Self {
        self.d_min = d_min;
        self
    }

    pub fn with_n_max(mut self, n_max: u64) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_attempt_budget(mut self, budget: u64) -> Self {
        self.attempt_budget = budget;
        self
    }

    pub fn with_pool_kernel(mut self, kernel: usize) -> Self {
        self.pool_kernel = kernel;
        self
    }

    pub fn distance_mode(&self) -> DistanceMode {
        if self.strategy.is_pooled() {
            DistanceMode::PooledL2 {
                kernel: self.pool_kernel,
            }
        } else {
            DistanceMode::L2
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |msg: String| Err(SampleError::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if self.attempt_budget < self.batch_size as u64 {
            return bad(format!(
                "attempt budget {} is smaller than batch size {}",
                self.attempt_budget, self.batch_size
            ));
        }
        if !(self.d_min >= 0.0 && self.d_min.is_finite()) {
            return bad(format!("d_min must be finite and nonnegative, got {}", self.d_min));
        }
        if self.strategy.is_pooled() {
            self.shape.pooled(self.pool_kernel)?;
        }
        Ok(())
    }

    /// SHA-256 over a canonical rendering of every field.
    pub fn fingerprint(&self) -> [u8; 32] {
        let canonical = format!(
            "strategy={};batch_size={};d_min={:?};n_max={};pool_kernel={};attempt_budget={};seed={};shape={}",
            self.strategy,
            self.batch_size,
            self.d_min,
            self.n_max,
            self.pool_kernel,
            self.attempt_budget,
            self.seed,
            self.shape,
        );
        Sha256::digest(canonical.as_bytes()).into()
    }
}

/// Populates a config with the named experiment's parameters.
pub fn preset_config(preset: Preset, strategy: Strategy, batch_size: usize, seed: u64) -> SamplerConfig {
    let d_min = match strategy {
        Strategy::PoolingCap => preset.pooling_cap_d_min(),
        _ => preset.cap_d_min(),
    };
    SamplerConfig {
        strategy,
        batch_size,
        d_min,
        n_max: preset.n_max(),
        pool_kernel: DEFAULT_POOL_KERNEL,
        attempt_budget: DEFAULT_ATTEMPT_BUDGET,
        seed,
        shape: LatentShape::default(),
    }
}

/// Lookup by preset name, for callers holding strings.
pub fn preset_config_named(
    name: &str,
    strategy: Strategy,
    batch_size: usize,
    seed: u64,
) -> Result<SamplerConfig, SampleError> {
    Ok(preset_config(name.parse()?, strategy, batch_size, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    /// Candidates drawn for this slot.
    pub attempts: u64,
    /// Stream index of the kept tensor.
    pub stream_index: u64,
    /// Kept tensor's min-distance to the previously kept ones (`None` for the
    /// first slot, where it is infinite).
    pub min_distance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub slots: Vec<SlotTrace>,
    pub total_candidates: u64,
}

impl SampleTrace {
    fn push(&mut self, attempts: u64, stream_index: u64, min_distance: f64) {
        self.slots.push(SlotTrace {
            attempts,
            stream_index,
            min_distance: min_distance.is_finite().then_some(min_distance),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub latents: Vec<LatentTensor>,
    pub trace: SampleTrace,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("unknown strategy {0:?} (expected baseline, cap, max, pooling_cap or pooling_max)")]
    UnknownStrategy(String),
    #[error("unknown preset {0:?} (expected standard or long)")]
    UnknownPreset(String),
    #[error(
        "attempt budget of {budget} exhausted after admitting {} of {batch_size} latents; \
         d_min={d_min} is likely infeasible for this batch size",
        trace.slots.len()
    )]
    BudgetExhausted {
        budget: u64,
        batch_size: usize,
        d_min: f64,
        trace: SampleTrace,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Draws a batch of `config.batch_size` latents with the configured strategy.
pub fn sample(config: &SamplerConfig) -> Result<Sample, SampleError> {
    sample_with(config, true)
}

/// `screen` enables the block-mean preview for pooled strategies; results are
/// identical either way.
fn sample_with(config: &SamplerConfig, screen: bool) -> Result<Sample, SampleError> {
    config.validate()?;
    let mut stream = SeededStream::new(config.seed);
    let screen = screen
        && config.strategy.is_pooled()
        && config.pool_kernel == GENERATOR_BLOCK
        && SeededStream::block_means_at(config.seed, 0, config.shape).is_some();
    let mut search = Search {
        config,
        mode: config.distance_mode(),
        screen,
        latents: Vec::with_capacity(config.batch_size),
        projected: Vec::with_capacity(config.batch_size),
        trace: SampleTrace::default(),
    };
    match config.strategy {
        Strategy::Baseline => search.baseline(&mut stream),
        Strategy::Cap | Strategy::PoolingCap => search.cap(&mut stream)?,
        Strategy::Max | Strategy::PoolingMax => search.max(&mut stream)?,
    }
    search.trace.total_candidates = stream.counter();
    Ok(Sample {
        latents: search.latents,
        trace: search.trace,
    })
}

/// Upper bound on how far a block-mean preview's min-distance can sit from
/// the exact pooled min-distance. The true gap is the L2 norm of the `f32`
/// rounding in the materialized tensor, below 1e-5 per pooled entry.
const PREVIEW_MARGIN: f64 = 1e-3;

struct Candidate {
    index: u64,
    latent: LatentTensor,
    view: LatentTensor,
    distance: f64,
}

struct Search<'a> {
    config: &'a SamplerConfig,
    mode: DistanceMode,
    screen: bool,
    latents: Vec<LatentTensor>,
    projected: Vec<LatentTensor>,
    trace: SampleTrace,
}

impl Search<'_> {
    fn materialize(&self, index: u64) -> Result<Candidate, SampleError> {
        let latent = SeededStream::tensor_at(self.config.seed, index, self.config.shape);
        let view = self.mode.project(&latent)?.into_owned();
        let distance = min_distance_projected(&view, &self.projected);
        Ok(Candidate {
            index,
            latent,
            view,
            distance,
        })
    }

    /// True when the block-mean preview of candidate `index` already shows
    /// a kept tensor within `radius - PREVIEW_MARGIN`, so the exact
    /// min-distance is certainly below `radius`.
    fn screened_out(&self, index: u64, radius: f64) -> bool {
        if !self.screen || self.projected.is_empty() || radius <= PREVIEW_MARGIN {
            return false;
        }
        match SeededStream::block_means_at(self.config.seed, index, self.config.shape) {
            Some(means) => any_closer_than(&means, &self.projected, radius - PREVIEW_MARGIN),
            None => false,
        }
    }

    fn keep(&mut self, c: Candidate, attempts: u64) {
        self.trace.push(attempts, c.index, c.distance);
        self.projected.push(c.view);
        self.latents.push(c.latent);
    }

    fn baseline(&mut self, stream: &mut SeededStream) {
        for _ in 0..self.config.batch_size {
            let c = self.materialize(stream.counter()).expect("L2 projection is infallible");
            stream.skip(1);
            self.keep(c, 1);
        }
    }

    fn cap(&mut self, stream: &mut SeededStream) -> Result<(), SampleError> {
        let d_min = self.config.d_min;
        let mut attempts = 0;
        while self.latents.len() < self.config.batch_size {
            if stream.counter() >= self.config.attempt_budget {
                self.trace.total_candidates = stream.counter();
                return Err(SampleError::BudgetExhausted {
                    budget: self.config.attempt_budget,
                    batch_size: self.config.batch_size,
                    d_min,
                    trace: std::mem::take(&mut self.trace),
                });
            }
            let index = stream.counter();
            stream.skip(1);
            attempts += 1;
            if self.screened_out(index, d_min) {
                continue;
            }
            let c = self.materialize(index)?;
            if c.distance >= d_min {
                self.keep(c, attempts);
                attempts = 0;
            }
        }
        Ok(())
    }

    fn max(&mut self, stream: &mut SeededStream) -> Result<(), SampleError> {
        let n_max = self.config.n_max;
        for _ in 0..self.config.batch_size {
            let mut best = self.materialize(stream.counter())?;
            stream.skip(1);
            if self.projected.is_empty() {
                // Every candidate ties at +inf and the strict comparison keeps the first.
                stream.skip(n_max - 1);
            } else {
                for _ in 1..n_max {
                    let index = stream.counter();
                    stream.skip(1);
                    if self.screened_out(index, best.distance) {
                        continue;
                    }
                    let c = self.materialize(index)?;
                    if c.distance > best.distance {
                        best = c;
                    }
                }
            }
            self.keep(best, n_max);
        }
        Ok(())
    }
}

/// Smallest pairwise distance within a batch under `mode` (`+inf` below two items).
pub fn batch_min_distance(latents: &[LatentTensor], mode: DistanceMode) -> Result<f64, TensorError> {
    let mut best = f64::INFINITY;
    let views = latents
        .iter()
        .map(|t| mode.project(t).map(|v| v.into_owned()))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, a) in views.iter().enumerate() {
        best = best.min(min_distance_projected(a, &views[i + 1..]));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::l2_distance;

    fn tiny() -> LatentShape {
        LatentShape::new(1, 2, 2).unwrap()
    }

    #[test]
    fn preset_values() {
        let c = preset_config(Preset::Standard, Strategy::Cap, 5, 0);
        assert_eq!(c.d_min, 182.0);
        let c = preset_config(Preset::Standard, Strategy::PoolingCap, 5, 0);
        assert_eq!(c.d_min, 3.1);
        let c = preset_config(Preset::Long, Strategy::Cap, 5, 0);
        assert_eq!(c.d_min, 183.0);
        let c = preset_config(Preset::Long, Strategy::PoolingCap, 5, 0);
        assert_eq!(c.d_min, 3.1);
        let c = preset_config(Preset::Long, Strategy::Max, 3, 0);
        assert_eq!(c.n_max, 10_000);
        let c = preset_config(Preset::Standard, Strategy::PoolingMax, 50, 0);
        assert_eq!((c.n_max, c.pool_kernel), (100, 8));
        assert_eq!(c.attempt_budget, DEFAULT_ATTEMPT_BUDGET);
        assert!(matches!(
            preset_config_named("quick", Strategy::Cap, 5, 0),
            Err(SampleError::UnknownPreset(_))
        ));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("pooling-max".parse::<Strategy>().unwrap(), Strategy::PoolingMax);
        assert!("poolingmax".parse::<Strategy>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let base = SamplerConfig::new(Strategy::Cap, 5, 1);
        let mut c = base.clone();
        c.batch_size = 0;
        assert!(matches!(sample(&c), Err(SampleError::InvalidConfig(_))));
        assert!(sample(&base.clone().with_n_max(0)).is_err());
        assert!(sample(&base.clone().with_attempt_budget(4)).is_err());
        assert!(sample(&base.clone().with_d_min(f64::NAN)).is_err());
        let pooled = SamplerConfig::new(Strategy::PoolingMax, 2, 1).with_shape(tiny());
        assert!(matches!(sample(&pooled), Err(SampleError::Tensor(_))));
    }

    #[test]
    fn cap_first_vector_is_unconditional() {
        let c = SamplerConfig::new(Strategy::Cap, 1, 7).with_d_min(1e6);
        let s = sample(&c).unwrap();
        assert_eq!(s.latents[0], SeededStream::tensor_at(7, 0, c.shape));
        assert_eq!(s.trace.total_candidates, 1);
    }

    #[test]
    fn cap_with_zero_threshold_is_baseline() {
        let shape = LatentShape::new(2, 8, 8).unwrap();
        let base = sample(&SamplerConfig::new(Strategy::Baseline, 6, 3).with_shape(shape)).unwrap();
        let cap = sample(&SamplerConfig::new(Strategy::Cap, 6, 3).with_shape(shape).with_d_min(0.0)).unwrap();
        assert_eq!(base.latents, cap.latents);
    }

    #[test]
    fn max_with_single_candidate_is_baseline() {
        let base = sample(&SamplerConfig::new(Strategy::Baseline, 5, 11)).unwrap();
        let max = sample(&SamplerConfig::new(Strategy::Max, 5, 11).with_n_max(1)).unwrap();
        assert_eq!(base.latents, max.latents);
    }

    #[test]
    fn cap_standard_threshold_holds() {
        let c = SamplerConfig::new(Strategy::Cap, 5, 2024);
        let s = sample(&c).unwrap();
        assert_eq!(s.latents.len(), 5);
        for i in 0..5 {
            for j in i + 1..5 {
                assert!(l2_distance(&s.latents[i], &s.latents[j]).unwrap() >= 182.0);
            }
        }
        let attempts: u64 = s.trace.slots.iter().map(|t| t.attempts).sum();
        assert_eq!(attempts, s.trace.total_candidates);
    }

    #[test]
    fn budget_exhaustion_carries_partial_trace() {
        let c = SamplerConfig::new(Strategy::Cap, 3, 5)
            .with_shape(tiny())
            .with_d_min(100.0)
            .with_attempt_budget(50);
        match sample(&c) {
            Err(SampleError::BudgetExhausted { trace, budget, .. }) => {
                assert_eq!(budget, 50);
                assert_eq!(trace.slots.len(), 1);
                assert_eq!(trace.total_candidates, 50);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn max_trace_shape() {
        let c = SamplerConfig::new(Strategy::PoolingMax, 4, 8).with_n_max(6);
        let s = sample(&c).unwrap();
        assert_eq!(s.trace.total_candidates, 24);
        assert!(s.trace.slots.iter().all(|t| t.attempts == 6));
        assert_eq!(s.trace.slots[0].stream_index, 0);
        assert_eq!(s.trace.slots[0].min_distance, None);
        for (slot, t) in s.trace.slots.iter().enumerate() {
            let base = slot as u64 * 6;
            assert!((base..base + 6).contains(&t.stream_index));
        }
    }

    #[test]
    fn determinism() {
        for strategy in Strategy::ALL {
            let c = SamplerConfig::new(strategy, 3, 99)
                .with_shape(LatentShape::new(2, 8, 8).unwrap())
                .with_n_max(5)
                .with_d_min(if strategy.is_pooled() { 0.3 } else { 5.0 });
            let a = sample(&c).unwrap();
            let b = sample(&c).unwrap();
            assert_eq!(a, b, "{strategy}");
        }
    }

    #[test]
    fn screening_does_not_change_results() {
        for seed in 0..4 {
            let cap = SamplerConfig::new(Strategy::PoolingCap, 3, seed);
            assert_eq!(sample_with(&cap, true).unwrap(), sample_with(&cap, false).unwrap());
            let max = SamplerConfig::new(Strategy::PoolingMax, 4, seed).with_n_max(30);
            assert_eq!(sample_with(&max, true).unwrap(), sample_with(&max, false).unwrap());
        }
    }

    #[test]
    fn fingerprint_tracks_every_field() {
        let c = SamplerConfig::new(Strategy::Cap, 5, 1);
        assert_eq!(c.fingerprint(), c.clone().fingerprint());
        assert_ne!(c.fingerprint(), c.clone().with_d_min(183.0).fingerprint());
        let mut other = c.clone();
        other.seed = 2;
        assert_ne!(c.fingerprint(), other.fingerprint());
    }
}
