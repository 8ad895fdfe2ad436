//! Brute-force reference implementations shared by the integration tests and
//! the acceptance harness. None of these call into the library's metric code.

#![allow(dead_code)]

use latent_spread::tensor::{LatentShape, LatentTensor, SeededStream};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

pub fn l2(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut s = 0.0f64;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        s += d * d;
    }
    s.sqrt()
}

/// Non-overlapping `k`×`k` means, channel by channel, by explicit index loops.
pub fn pool(t: &LatentTensor, k: usize) -> Vec<f64> {
    let s = t.shape();
    let (c, h, w) = (s.channels(), s.height(), s.width());
    let v = t.values();
    let mut out = Vec::new();
    for ch in 0..c {
        for by in 0..h / k {
            for bx in 0..w / k {
                let mut sum = 0.0f64;
                for y in by * k..(by + 1) * k {
                    for x in bx * k..(bx + 1) * k {
                        sum += v[ch * h * w + y * w + x] as f64;
                    }
                }
                out.push(sum / (k * k) as f64);
            }
        }
    }
    out
}

pub fn l2_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Stream indices chosen by the farthest-candidate rule: slot `s` draws
/// indices `s*n_max .. (s+1)*n_max` and keeps the first candidate with the
/// strictly largest min-distance to the kept set.
pub fn max_oracle(seed: u64, batch: usize, n_max: u64, shape: LatentShape) -> Vec<u64> {
    let mut kept: Vec<LatentTensor> = Vec::new();
    let mut picks = Vec::new();
    for slot in 0..batch as u64 {
        let mut best: Option<(u64, f64, LatentTensor)> = None;
        for j in 0..n_max {
            let index = slot * n_max + j;
            let cand = SeededStream::tensor_at(seed, index, shape);
            let d = kept
                .iter()
                .map(|k| l2(k.values(), cand.values()))
                .fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(_, bd, _)| d > *bd) {
                best = Some((index, d, cand));
            }
        }
        let (index, _, cand) = best.unwrap();
        picks.push(index);
        kept.push(cand);
    }
    picks
}

/// (Avg, C3, C2) for one factor, straight from the definitions.
pub fn color_oracle(batches: &[Vec<[f64; 3]>], k: f64) -> (f64, f64, f64) {
    let mut total = 0usize;
    let mut three = 0usize;
    let mut two = 0usize;
    for batch in batches {
        let mut seen = [false; 3];
        for &[r, g, b] in batch {
            if r > k * g && r > k * b {
                seen[0] = true;
            }
            if g > k * r && g > k * b {
                seen[1] = true;
            }
            if b > k * r && b > k * g {
                seen[2] = true;
            }
        }
        let n = seen.iter().filter(|&&s| s).count();
        total += n;
        three += (n == 3) as usize;
        two += (n >= 2) as usize;
    }
    let len = batches.len() as f64;
    (total as f64 / len, three as f64 / len, two as f64 / len)
}

/// Random channel means, mixing a coarse grid (to hit exact ties) with
/// continuous values.
pub fn random_batch_set(rng: &mut ChaCha8Rng) -> Vec<Vec<[f64; 3]>> {
    let batches = 1 + below(rng, 12);
    (0..batches)
        .map(|_| {
            let images = 1 + below(rng, 10);
            (0..images)
                .map(|_| {
                    let mut px = [0.0; 3];
                    for c in &mut px {
                        *c = if below(rng, 3) == 0 {
                            (below(rng, 11) * 25) as f64
                        } else {
                            255.0 * uniform(rng)
                        };
                    }
                    // Occasionally push one channel to dominate.
                    if below(rng, 4) == 0 {
                        let c = below(rng, 3);
                        px[c] = (px[c] * 2.0).min(255.0);
                    }
                    px
                })
                .collect()
        })
        .collect()
}

/// Labels as (gender 0..2, ethnicity 0..4) per image.
pub type RawLabels = Vec<Vec<(usize, usize)>>;

pub fn random_labels(rng: &mut ChaCha8Rng) -> RawLabels {
    let batches = 1 + below(rng, 15);
    (0..batches)
        .map(|_| {
            let n = 1 + below(rng, 16);
            (0..n).map(|_| (below(rng, 2), below(rng, 4))).collect()
        })
        .collect()
}

/// (all eight combinations, at least m ethnicities for m = 1..=4).
pub fn coverage_oracle(labels: &RawLabels) -> (f64, [f64; 4]) {
    let mut all = 0usize;
    let mut at_least = [0usize; 4];
    for batch in labels {
        let mut grid = [[false; 4]; 2];
        for &(g, e) in batch {
            grid[g][e] = true;
        }
        if grid.iter().all(|row| row.iter().all(|&x| x)) {
            all += 1;
        }
        let eth = (0..4).filter(|&e| grid[0][e] || grid[1][e]).count();
        for m in 1..=4 {
            if eth >= m {
                at_least[m - 1] += 1;
            }
        }
    }
    let n = labels.len() as f64;
    (all as f64 / n, at_least.map(|c| c as f64 / n))
}
