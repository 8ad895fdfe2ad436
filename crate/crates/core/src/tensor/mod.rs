//! Latent tensors and the distance primitives the samplers are built on.

mod normal;

use std::borrow::Cow;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normal::{inverse_normal_cdf, standard_normal};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("invalid shape {0}: every dimension must be at least 1")]
    InvalidShape(LatentShape),
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: LatentShape, right: LatentShape },
    #[error("expected {expected} values for shape {shape}, got {actual}")]
    LengthMismatch {
        shape: LatentShape,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("pool kernel {kernel} does not divide {height}x{width}")]
    IndivisiblePool {
        kernel: usize,
        height: usize,
        width: usize,
    },
}

/// Channel, row and column extents of a latent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentShape {
    channels: usize,
    height: usize,
    width: usize,
}

impl LatentShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Result<Self, TensorError> {
        let shape = LatentShape {
            channels,
            height,
            width,
        };
        if channels == 0 || height == 0 || width == 0 {
            return Err(TensorError::InvalidShape(shape));
        }
        Ok(shape)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shape after non-overlapping `kernel`×`kernel` pooling.
    pub fn pooled(&self, kernel: usize) -> Result<Self, TensorError> {
        if kernel == 0 || !self.height.is_multiple_of(kernel) || !self.width.is_multiple_of(kernel) {
            return Err(TensorError::IndivisiblePool {
                kernel,
                height: self.height,
                width: self.width,
            });
        }
        LatentShape::new(self.channels, self.height / kernel, self.width / kernel)
    }
}

impl Default for LatentShape {
    /// The 4×64×64 grid of a 512×512 latent diffusion model.
    fn default() -> Self {
        LatentShape {
            channels: 4,
            height: 64,
            width: 64,
        }
    }
}

impl fmt::Display for LatentShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

impl std::str::FromStr for LatentShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dims: Vec<usize> = s
            .split(['x', 'X', ','])
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad shape {s:?}: {e}"))?;
        match dims[..] {
            [c, h, w] => LatentShape::new(c, h, w).map_err(|e| e.to_string()),
            _ => Err(format!("bad shape {s:?}: expected CxHxW")),
        }
    }
}

/// A point in latent space: row-major (channel, row, column) `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    shape: LatentShape,
    values: Vec<f32>,
}

impl LatentTensor {
    pub fn new(shape: LatentShape, values: Vec<f32>) -> Result<Self, TensorError> {
        if values.len() != shape.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected: shape.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(LatentTensor { shape, values })
    }

    pub fn filled(shape: LatentShape, value: f32) -> Result<Self, TensorError> {
        LatentTensor::new(shape, vec![value; shape.len()])
    }

    pub fn zeros(shape: LatentShape) -> Self {
        LatentTensor {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// `alpha * self + beta * other`, elementwise.
    pub fn combine(&self, alpha: f32, other: &LatentTensor, beta: f32) -> Result<Self, TensorError> {
        check_same_shape(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        LatentTensor::new(self.shape, values)
    }
}

fn check_same_shape(a: &LatentTensor, b: &LatentTensor) -> Result<(), TensorError> {
    if a.shape != b.shape {
        return Err(TensorError::ShapeMismatch {
            left: a.shape,
            right: b.shape,
        });
    }
    Ok(())
}

/// Block edge used by the generator's mean-plus-residual construction.
pub const GENERATOR_BLOCK: usize = 8;

/// Counter-indexed Gaussian latent generator.
///
/// Tensor number `k` of a stream is drawn from ChaCha8 seeded with
/// `seed_from_u64(seed)` on stream `k`, one `u64` per standard-normal value,
/// so it depends only on `(seed, k, shape)`. Candidates can be materialized in
/// any order, or skipped, without perturbing the tensors that follow.
///
/// When height and width are multiples of [`GENERATOR_BLOCK`], each channel's
/// 8×8 blocks are built as `m + (z - mean(z))` with `m ~ N(0, 1/64)` and
/// `z ~ N(0, I_64)`. This is exactly i.i.d. N(0, 1), and it places the block
/// means first in the stream (`C·H/8·W/8` draws, then `C·H·W` residual draws),
/// so [`SeededStream::block_means_at`] can preview a tensor's 8×8-pooled form
/// without generating the rest. Other shapes take one draw per element in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededStream {
    seed: u64,
    counter: u64,
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    let mut out = vec![0f64; n];
    normal::fill_standard_normal(&raw, &mut out);
    out
}

fn is_blocked(shape: LatentShape) -> bool {
    shape.height.is_multiple_of(GENERATOR_BLOCK) && shape.width.is_multiple_of(GENERATOR_BLOCK)
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the next tensor this stream will produce.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Advances past `n` tensors without generating them.
    pub fn skip(&mut self, n: u64) {
        self.counter += n;
    }

    /// Tensor `index` of the stream seeded with `seed`.
    pub fn tensor_at(seed: u64, index: u64, shape: LatentShape) -> LatentTensor {
        let mut rng = stream_rng(seed, index);
        if !is_blocked(shape) {
            let values = draw_normals(&mut rng, shape.len())
                .into_iter()
                .map(|v| v as f32)
                .collect();
            return LatentTensor { shape, values };
        }
        const B: usize = GENERATOR_BLOCK;
        let (h, w) = (shape.height, shape.width);
        let (bh, bw) = (h / B, w / B);
        let means = draw_normals(&mut rng, shape.channels * bh * bw);
        let residual = draw_normals(&mut rng, shape.len());
        let mut values = vec![0f32; shape.len()];
        for (block, (&m, z)) in means.iter().zip(residual.chunks_exact(B * B)).enumerate() {
            let (c, rest) = (block / (bh * bw), block % (bh * bw));
            let (br, bc) = (rest / bw, rest % bw);
            let mean_z = z.iter().sum::<f64>() / (B * B) as f64;
            let m = m / B as f64;
            for (r, zr) in z.chunks_exact(B).enumerate() {
                let start = c * h * w + (br * B + r) * w + bc * B;
                for (dst, &zv) in values[start..start + B].iter_mut().zip(zr) {
                    *dst = (m + (zv - mean_z)) as f32;
                }
            }
        }
        LatentTensor { shape, values }
    }

    /// The 8×8 block means of [`SeededStream::tensor_at`], as a pooled-shape
    /// tensor, without drawing the residuals. `None` for shapes the block
    /// construction does not apply to.
    ///
    /// These agree with `avg_pool(tensor_at(..), 8)` up to `f32` rounding of
    /// the materialized values (well under 1e-5 per entry).
    pub fn block_means_at(seed: u64, index: u64, shape: LatentShape) -> Option<LatentTensor> {
        if !is_blocked(shape) {
            return None;
        }
        let pooled = shape.pooled(GENERATOR_BLOCK).ok()?;
        let mut rng = stream_rng(seed, index);
        let values = draw_normals(&mut rng, pooled.len())
            .into_iter()
            .map(|m| (m / GENERATOR_BLOCK as f64) as f32)
            .collect();
        Some(LatentTensor {
            shape: pooled,
            values,
        })
    }
}

/// Draws the next i.i.d. standard-normal tensor and advances the stream.
pub fn generate_gaussian_latent(stream: &mut SeededStream, shape: LatentShape) -> LatentTensor {
    let t = SeededStream::tensor_at(stream.seed, stream.counter, shape);
    stream.counter += 1;
    t
}

/// Euclidean distance over the flattened tensors, accumulated in `f64`.
pub fn l2_distance(a: &LatentTensor, b: &LatentTensor) -> Result<f64, TensorError> {
    check_same_shape(a, b)?;
    Ok(l2_unchecked(&a.values, &b.values))
}

fn l2_unchecked(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Non-overlapping `kernel`×`kernel` average pooling per channel.
pub fn avg_pool(t: &LatentTensor, kernel: usize) -> Result<LatentTensor, TensorError> {
    let shape = t.shape;
    let out_shape = shape.pooled(kernel)?;
    let (h, w) = (shape.height, shape.width);
    let (oh, ow) = (out_shape.height, out_shape.width);
    let mut sums = vec![0f64; out_shape.len()];
    for c in 0..shape.channels {
        let plane = &t.values[c * h * w..(c + 1) * h * w];
        let out = &mut sums[c * oh * ow..(c + 1) * oh * ow];
        for (row, line) in plane.chunks_exact(w).enumerate() {
            let dst = &mut out[(row / kernel) * ow..(row / kernel + 1) * ow];
            for (acc, cell) in dst.iter_mut().zip(line.chunks_exact(kernel)) {
                *acc += cell.iter().map(|&v| v as f64).sum::<f64>();
            }
        }
    }
    let area = (kernel * kernel) as f64;
    let values = sums.into_iter().map(|s| (s / area) as f32).collect();
    Ok(LatentTensor {
        shape: out_shape,
        values,
    })
}

/// How candidate latents are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMode {
    L2,
    PooledL2 { kernel: usize },
}

impl DistanceMode {
    /// The representation distances are measured in under this mode.
    pub fn project<'a>(&self, t: &'a LatentTensor) -> Result<Cow<'a, LatentTensor>, TensorError> {
        match *self {
            DistanceMode::L2 => Ok(Cow::Borrowed(t)),
            DistanceMode::PooledL2 { kernel } => avg_pool(t, kernel).map(Cow::Owned),
        }
    }

    pub fn distance(&self, a: &LatentTensor, b: &LatentTensor) -> Result<f64, TensorError> {
        check_same_shape(a, b)?;
        let pa = self.project(a)?;
        let pb = self.project(b)?;
        l2_distance(&pa, &pb)
    }
}

/// Smallest distance from `v` to any member of `set`; `+inf` when `set` is empty.
pub fn min_distance(
    v: &LatentTensor,
    set: &[LatentTensor],
    mode: DistanceMode,
) -> Result<f64, TensorError> {
    for t in set {
        check_same_shape(v, t)?;
    }
    let pv = mode.project(v)?;
    let mut best = f64::INFINITY;
    for t in set {
        let pt = mode.project(t)?;
        best = best.min(l2_unchecked(&pv.values, &pt.values));
    }
    Ok(best)
}

/// [`min_distance`] against a set that is already projected into the mode's
/// space. Used by the samplers to avoid re-pooling admitted vectors.
pub(crate) fn min_distance_projected(v: &LatentTensor, projected: &[LatentTensor]) -> f64 {
    projected
        .iter()
        .map(|t| l2_unchecked(&v.values, &t.values))
        .fold(f64::INFINITY, f64::min)
}

/// Whether any tensor in `projected` sits closer than `radius` to `v`. Sums
/// in a different order from [`l2_distance`], so results within ~1e-12
/// relative of `radius` may differ from the exact distance comparison.
pub(crate) fn any_closer_than(v: &LatentTensor, projected: &[LatentTensor], radius: f64) -> bool {
    let r2 = radius * radius;
    projected.iter().any(|t| squared_l2_lanes(&v.values, &t.values) < r2)
}

fn squared_l2_lanes(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            let d = x[i] as f64 - y[i] as f64;
            acc[i] += d * d;
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    acc.iter().sum::<f64>() + tail
}
