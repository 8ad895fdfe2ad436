//! Rejection sampling with a distance floor, in raw latent space.
//!
//! Every kept latent is at least `d_min` from the others. Independent draws of
//! a 4x64x64 latent sit about 181 apart, so 182 rejects roughly the closer
//! half of candidates per comparison.

use latent_spread::sampler::{batch_min_distance, preset_config, sample, Preset, Strategy};
use latent_spread::tensor::DistanceMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for batch_size in [3, 5, 8] {
        let config = preset_config(Preset::Standard, Strategy::Cap, batch_size, 7);
        let out = sample(&config)?;
        let min = batch_min_distance(&out.latents, DistanceMode::L2)?;
        println!(
            "B={batch_size}: {} candidates drawn, closest pair {min:.3} (d_min {})",
            out.trace.total_candidates, config.d_min
        );
        for (slot, s) in out.trace.slots.iter().enumerate() {
            println!("  slot {slot}: stream index {:>4} after {:>3} attempts", s.stream_index, s.attempts);
        }
    }

    // An infeasible floor fails cleanly once the attempt budget is spent.
    let config = preset_config(Preset::Standard, Strategy::Cap, 5, 7)
        .with_d_min(195.0)
        .with_attempt_budget(2_000);
    match sample(&config) {
        Err(e) => println!("d_min 195: {e}"),
        Ok(_) => println!("d_min 195 unexpectedly succeeded"),
    }
    Ok(())
}
