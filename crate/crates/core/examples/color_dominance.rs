//! Color dominance over batches of images: for each factor K, how many of
//! red, green and blue dominate at least one image per batch, and how often a
//! batch shows all three or at least two.

use image::{Rgb, RgbImage};
use latent_spread::color::{summarize, ColorBatchStats, DominanceFactor};
use latent_spread::io::image_channel_means;

fn solid(path: &std::path::Path, rgb: [u8; 3]) -> image::ImageResult<()> {
    RgbImage::from_pixel(16, 16, Rgb(rgb)).save(path)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let batches: [&[[u8; 3]]; 3] = [
        &[[200, 40, 40], [40, 200, 40], [40, 40, 200]],
        &[[200, 190, 40], [40, 180, 40], [90, 90, 90]],
        &[[120, 110, 100], [100, 105, 112], [90, 90, 90]],
    ];
    let factors = DominanceFactor::defaults();
    let mut stats = Vec::new();
    for (i, batch) in batches.iter().enumerate() {
        let mut means = Vec::new();
        for (j, &rgb) in batch.iter().enumerate() {
            let path = dir.path().join(format!("{i}_{j}.png"));
            solid(&path, rgb)?;
            means.push(image_channel_means(&path)?);
        }
        let s = ColorBatchStats::compute(&means, &factors)?;
        println!("batch {i}: N_K = {:?}", s.per_factor.iter().map(|f| f.n_k).collect::<Vec<_>>());
        stats.push(s);
    }
    for &k in &factors {
        let s = summarize(&stats, k)?;
        println!("K={}: avg {:.3}, C3 {:.3}, C2 {:.3}", k, s.avg, s.c3, s.c2);
    }
    Ok(())
}
