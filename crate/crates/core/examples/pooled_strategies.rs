//! The pooled variants measure distance after 8x8 average pooling, which
//! tracks the coarse layout a diffusion model commits to early. Compare the
//! pooled batch-min distance of each strategy on the same seeds.

use latent_spread::sampler::{batch_min_distance, preset_config, sample, Preset, Strategy};
use latent_spread::tensor::{avg_pool, l2_distance, DistanceMode, LatentShape, SeededStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = SeededStream::tensor_at(0, 0, LatentShape::default());
    let b = SeededStream::tensor_at(0, 1, LatentShape::default());
    let full = l2_distance(&a, &b)?;
    let pooled = l2_distance(&avg_pool(&a, 8)?, &avg_pool(&b, 8)?)?;
    println!("one pair: L2 {full:.2}, pooled {pooled:.3} (bound L2/8 = {:.2})\n", full / 8.0);

    let mode = DistanceMode::PooledL2 { kernel: 8 };
    let seeds = 0..20u64;
    for strategy in [Strategy::Baseline, Strategy::Cap, Strategy::Max, Strategy::PoolingCap, Strategy::PoolingMax] {
        let mut total = 0.0;
        let mut candidates = 0;
        for seed in seeds.clone() {
            let out = sample(&preset_config(Preset::Standard, strategy, 5, seed))?;
            total += batch_min_distance(&out.latents, mode)?;
            candidates += out.trace.total_candidates;
        }
        let n = seeds.clone().count() as f64;
        println!(
            "{:<12} mean pooled batch-min {:.3}, {:>7.0} candidates per batch",
            strategy.as_str(),
            total / n,
            candidates as f64 / n
        );
    }
    Ok(())
}
