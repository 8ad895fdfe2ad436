//! Writing a sampled batch to the binary latent format and a NumPy sidecar,
//! then reading both back.

use latent_spread::io::{read_latents, read_npy, write_latents, write_npy, FormatError};
use latent_spread::sampler::{sample, SamplerConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = SamplerConfig::new(Strategy::PoolingMax, 4, 12);
    let out = sample(&config)?;

    let dlt = dir.path().join("batch.dlt");
    write_latents(&dlt, &out.latents, config.fingerprint())?;
    let (header, back) = read_latents(&dlt)?;
    assert_eq!(back, out.latents);
    assert_eq!(header.fingerprint, config.fingerprint());
    println!(
        "{}: {} latents of {:?}, {} bytes",
        dlt.display(),
        header.batch_len(),
        header.shape,
        std::fs::metadata(&dlt)?.len()
    );

    let npy = dir.path().join("batch.npy");
    write_npy(&npy, &out.latents)?;
    assert_eq!(read_npy(&npy)?, out.latents);
    println!("{}: loadable with numpy.load, {} bytes", npy.display(), std::fs::metadata(&npy)?.len());

    // Damaged files are rejected with a specific error.
    let mut bytes = std::fs::read(&dlt)?;
    bytes.truncate(bytes.len() - 10);
    std::fs::write(&dlt, &bytes)?;
    match read_latents(&dlt) {
        Err(e @ FormatError::Truncated { .. }) => println!("truncated copy: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
