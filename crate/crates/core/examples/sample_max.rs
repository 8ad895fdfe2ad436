//! Farthest-candidate sampling: each slot draws `n_max` candidates and keeps
//! the one farthest from the latents already chosen. The cost is fixed at
//! `B * n_max` candidates, so it never fails.

use latent_spread::sampler::{batch_min_distance, sample, SamplerConfig, Strategy};
use latent_spread::tensor::DistanceMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let baseline = sample(&SamplerConfig::new(Strategy::Baseline, 5, 3))?;
    println!(
        "baseline   closest pair {:.3}",
        batch_min_distance(&baseline.latents, DistanceMode::L2)?
    );
    for n_max in [2, 10, 50] {
        let config = SamplerConfig::new(Strategy::Max, 5, 3).with_n_max(n_max);
        let out = sample(&config)?;
        let slots: Vec<String> = out
            .trace
            .slots
            .iter()
            .filter_map(|s| s.min_distance.map(|d| format!("{d:.2}")))
            .collect();
        println!(
            "n_max={n_max:<3} closest pair {:.3}, per-slot distances [{}]",
            batch_min_distance(&out.latents, DistanceMode::L2)?,
            slots.join(", ")
        );
    }
    Ok(())
}
