//! Diverse initial latents for diffusion sampling, and metrics for how
//! diverse the resulting image batches are.
//!
//! * [`sampler`]: baseline, cap, max and their pooled variants.
//! * [`color`]: dominant-color counts per batch.
//! * [`batch`]: pairwise distances, demographic coverage, improvement ratios.
//! * [`io`]: latent files, manifests, labels and reports.
//! * [`cli`]: the commands behind the `latent-spread` binary.

pub mod batch;
pub mod color;
pub mod io;
pub mod sampler;
pub mod tensor;
pub mod cli;

use thiserror::Error;

/// Any failure from the command layer, with a stable process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sample(#[from] sampler::SampleError),
    #[error(transparent)]
    Format(#[from] io::FormatError),
    #[error(transparent)]
    Metric(#[from] batch::MetricError),
    #[error(transparent)]
    Color(#[from] color::ColorError),
    #[error(transparent)]
    Compare(#[from] io::report::CompareError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// 2 for bad input, 3 for provider failures and exhausted budgets.
    pub fn exit_code(&self) -> i32 {
        use batch::MetricError as M;
        match self {
            Error::Sample(sampler::SampleError::BudgetExhausted { .. }) => 3,
            Error::Metric(M::ProviderFailed(_) | M::ProviderContract(_)) => 3,
            _ => 2,
        }
    }
}
