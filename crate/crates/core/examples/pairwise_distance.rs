//! Average pairwise distance within batches. The distance itself comes from a
//! provider: a closure, an external command, or the built-in pixel distance
//! used here on generated images.

use image::{Rgb, RgbImage};
use latent_spread::batch::{avg_pairwise_across_batches, avg_sampled_pairs, Checked, FnProvider, PixelL2Provider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A toy provider over numeric ids.
    let toy = Checked(FnProvider(|a: &str, b: &str| {
        (a.parse::<f64>().unwrap() - b.parse::<f64>().unwrap()).abs()
    }));
    let batches = vec![
        vec!["0".to_string(), "1".to_string(), "2".to_string()],
        vec!["0".to_string(), "10".to_string()],
    ];
    let summary = avg_pairwise_across_batches(&batches, &toy)?;
    println!("toy: per batch {:?}, across {:.3}", summary.per_batch, summary.across.mean);

    let dir = tempfile::tempdir()?;
    let mut paths = Vec::new();
    for i in 0..6u8 {
        let path = dir.path().join(format!("{i}.png"));
        RgbImage::from_fn(32, 32, |x, y| Rgb([i * 40, (x * 8) as u8, (y * 8) as u8])).save(&path)?;
        paths.push(path.to_string_lossy().into_owned());
    }
    let pixel = Checked(PixelL2Provider { kernel: 4 });
    let batches: Vec<Vec<String>> = paths.chunks(3).map(|c| c.to_vec()).collect();
    let summary = avg_pairwise_across_batches(&batches, &pixel)?;
    println!(
        "pixel: per batch {:?}, across {:.4} +/- {:.4}",
        summary.per_batch,
        summary.across.mean,
        summary.across.half_width.unwrap_or(0.0)
    );

    // Random pairs drawn within one prompt group, across batches.
    let sampled = avg_sampled_pairs(&[paths.clone()], 20, 1, &pixel)?;
    println!("20 sampled pairs within the prompt: {:.4}", sampled.mean);
    Ok(())
}
