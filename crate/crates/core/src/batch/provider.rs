//! Pairwise image distance providers.
//!
//! The perceptual distance used for evaluation lives outside this crate. A
//! [`CommandProvider`] hands it a list of pairs and reads back one number per
//! pair; [`PixelL2Provider`] is a self-contained stand-in for smoke tests.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::RgbImage;

use super::MetricError;
use crate::io::image::load_rgb;

/// Environment variable holding the default provider command line.
pub const PROVIDER_ENV: &str = "LATENT_SPREAD_PROVIDER";

pub trait PairwiseDistance {
    /// One distance per pair, in order.
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError>;
}

impl<P: PairwiseDistance + ?Sized> PairwiseDistance for &P {
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        (**self).distances(pairs)
    }
}

impl PairwiseDistance for Box<dyn PairwiseDistance> {
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        (**self).distances(pairs)
    }
}

/// Wraps a plain function of two ids.
pub struct FnProvider<F>(pub F);

impl<F: Fn(&str, &str) -> f64> PairwiseDistance for FnProvider<F> {
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        Ok(pairs.iter().map(|(a, b)| (self.0)(a, b)).collect())
    }
}

/// Enforces the provider contract: finite, nonnegative, zero on identical
/// ids, and symmetric (checked by re-asking for up to 16 swapped pairs).
pub struct Checked<P>(pub P);

const SYMMETRY_PROBES: usize = 16;

impl<P: PairwiseDistance> PairwiseDistance for Checked<P> {
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        let out = self.0.distances(pairs)?;
        if out.len() != pairs.len() {
            return Err(MetricError::ProviderContract(format!(
                "expected {} distances, got {}",
                pairs.len(),
                out.len()
            )));
        }
        for ((a, b), &d) in pairs.iter().zip(&out) {
            if !d.is_finite() || d < 0.0 {
                return Err(MetricError::ProviderContract(format!("d({a}, {b}) = {d}")));
            }
            if a == b && d != 0.0 {
                return Err(MetricError::ProviderContract(format!("d({a}, {a}) = {d}, expected 0")));
            }
        }
        let step = (pairs.len() / SYMMETRY_PROBES).max(1);
        let probes: Vec<usize> = (0..pairs.len()).step_by(step).take(SYMMETRY_PROBES).collect();
        if probes.is_empty() {
            return Ok(out);
        }
        let swapped: Vec<(String, String)> = probes
            .iter()
            .map(|&i| (pairs[i].1.clone(), pairs[i].0.clone()))
            .collect();
        let back = self.0.distances(&swapped)?;
        for (&i, &d) in probes.iter().zip(&back) {
            if d != out[i] {
                let (a, b) = &pairs[i];
                return Err(MetricError::ProviderContract(format!(
                    "asymmetric: d({a}, {b}) = {} but d({b}, {a}) = {d}",
                    out[i]
                )));
            }
        }
        Ok(out)
    }
}

/// Runs `program args... <request> <response>`. The request is a
/// tab-separated file with one `id_a\tid_b` pair per line; the program must
/// write one decimal distance per line to the response path.
#[derive(Debug, Clone)]
pub struct CommandProvider {
    pub program: String,
    pub args: Vec<String>,
    /// Where request and response files go; a fresh temp dir when `None`.
    pub work_dir: Option<PathBuf>,
}

impl CommandProvider {
    pub fn new(program: impl Into<String>) -> Self {
        CommandProvider {
            program: program.into(),
            args: Vec::new(),
            work_dir: None,
        }
    }

    /// Splits a command line on whitespace: program first, then arguments.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandProvider {
            program,
            args: parts.collect(),
            work_dir: None,
        })
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(PROVIDER_ENV).ok().and_then(|s| Self::from_command_line(&s))
    }

    fn run_in(&self, dir: &Path, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        let request = dir.join("pairs.tsv");
        let response = dir.join("distances.txt");
        let mut body = String::new();
        for (a, b) in pairs {
            for id in [a, b] {
                if id.contains(['\t', '\n', '\r']) {
                    return Err(MetricError::ProviderFailed(format!("id {id:?} contains a tab or newline")));
                }
            }
            body.push_str(a);
            body.push('\t');
            body.push_str(b);
            body.push('\n');
        }
        let failed = |m: String| MetricError::ProviderFailed(m);
        fs::write(&request, body).map_err(|e| failed(format!("writing {}: {e}", request.display())))?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&request)
            .arg(&response)
            .output()
            .map_err(|e| failed(format!("cannot run {}: {e}", self.program)))?;
        if !output.status.success() {
            return Err(failed(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = fs::read_to_string(&response)
            .map_err(|e| failed(format!("reading {}: {e}", response.display())))?;
        let values = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| failed(format!("line {}: not a number: {l:?}", i + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != pairs.len() {
            return Err(failed(format!(
                "expected {} distances, got {}",
                pairs.len(),
                values.len()
            )));
        }
        Ok(values)
    }
}

impl PairwiseDistance for CommandProvider {
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        match &self.work_dir {
            Some(dir) => self.run_in(dir, pairs),
            None => {
                let dir = tempfile::tempdir()
                    .map_err(|e| MetricError::ProviderFailed(format!("temp dir: {e}")))?;
                self.run_in(dir.path(), pairs)
            }
        }
    }
}

/// Root-mean-square difference of RGB values in [0, 1] after `kernel`×`kernel`
/// average pooling. Ids are image paths. Not perceptual.
#[derive(Debug, Clone, Copy)]
pub struct PixelL2Provider {
    pub kernel: u32,
}

impl Default for PixelL2Provider {
    fn default() -> Self {
        PixelL2Provider { kernel: 1 }
    }
}

impl PixelL2Provider {
    fn pooled(&self, img: &RgbImage) -> (u32, u32, Vec<f64>) {
        let k = self.kernel.max(1);
        let (w, h) = (img.width() / k, img.height() / k);
        let mut out = vec![0.0; (w * h * 3) as usize];
        let norm = 1.0 / (255.0 * (k * k) as f64);
        for y in 0..h * k {
            for x in 0..w * k {
                let px = img.get_pixel(x, y).0;
                let base = (((y / k) * w + x / k) * 3) as usize;
                for c in 0..3 {
                    out[base + c] += px[c] as f64 * norm;
                }
            }
        }
        (w, h, out)
    }

    fn load(&self, id: &str) -> Result<(u32, u32, Vec<f64>), MetricError> {
        let img = load_rgb(id).map_err(|e| MetricError::ProviderFailed(e.to_string()))?;
        Ok(self.pooled(&img))
    }
}

impl PairwiseDistance for PixelL2Provider {
    fn distances(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, MetricError> {
        let mut cache: HashMap<&str, (u32, u32, Vec<f64>)> = HashMap::new();
        for (a, b) in pairs {
            for id in [a, b] {
                if !cache.contains_key(id.as_str()) {
                    cache.insert(id, self.load(id)?);
                }
            }
        }
        pairs
            .iter()
            .map(|(a, b)| {
                let (wa, ha, va) = &cache[a.as_str()];
                let (wb, hb, vb) = &cache[b.as_str()];
                if (wa, ha) != (wb, hb) {
                    return Err(MetricError::ProviderFailed(format!(
                        "size mismatch: {a} pools to {wa}x{ha}, {b} to {wb}x{hb}"
                    )));
                }
                if va.is_empty() {
                    return Ok(0.0);
                }
                let ss: f64 = va.iter().zip(vb).map(|(x, y)| (x - y) * (x - y)).sum();
                Ok((ss / va.len() as f64).sqrt())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn checked_accepts_a_metric() {
        let d = Checked(FnProvider(|a: &str, b: &str| (a.len() as f64 - b.len() as f64).abs()));
        let pairs = vec![("a".to_string(), "bbb".to_string()), ("cc".to_string(), "cc".to_string())];
        assert_eq!(d.distances(&pairs).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn checked_rejects_violations() {
        let pair = |a: &str, b: &str| vec![(a.to_string(), b.to_string())];
        let negative = Checked(FnProvider(|_: &str, _: &str| -1.0));
        assert!(matches!(negative.distances(&pair("a", "b")), Err(MetricError::ProviderContract(_))));
        let nan = Checked(FnProvider(|_: &str, _: &str| f64::NAN));
        assert!(matches!(nan.distances(&pair("a", "b")), Err(MetricError::ProviderContract(_))));
        let self_nonzero = Checked(FnProvider(|_: &str, _: &str| 0.5));
        assert!(matches!(self_nonzero.distances(&pair("a", "a")), Err(MetricError::ProviderContract(_))));
        let asym = Checked(FnProvider(|a: &str, b: &str| if a < b { 1.0 } else { 2.0 }));
        match asym.distances(&pair("a", "b")) {
            Err(MetricError::ProviderContract(m)) => assert!(m.contains("asymmetric")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pixel_l2_on_solid_images() {
        let dir = tempfile::tempdir().unwrap();
        let save = |name: &str, c: [u8; 3]| {
            let p = dir.path().join(name);
            RgbImage::from_pixel(16, 16, Rgb(c)).save(&p).unwrap();
            p.to_string_lossy().into_owned()
        };
        let black = save("black.png", [0, 0, 0]);
        let white = save("white.png", [255, 255, 255]);
        let red = save("red.png", [255, 0, 0]);
        for kernel in [1, 4] {
            let d = PixelL2Provider { kernel };
            let out = d
                .distances(&[
                    (black.clone(), white.clone()),
                    (black.clone(), red.clone()),
                    (red.clone(), red.clone()),
                ])
                .unwrap();
            assert!((out[0] - 1.0).abs() < 1e-12);
            assert!((out[1] - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
            assert_eq!(out[2], 0.0);
        }
    }

    #[test]
    fn pixel_l2_rejects_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        RgbImage::new(4, 4).save(&a).unwrap();
        RgbImage::new(8, 4).save(&b).unwrap();
        let pair = (a.to_string_lossy().into_owned(), b.to_string_lossy().into_owned());
        assert!(matches!(
            PixelL2Provider::default().distances(&[pair]),
            Err(MetricError::ProviderFailed(_))
        ));
    }
}
