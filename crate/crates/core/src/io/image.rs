//! Image decoding for the color metrics and the built-in pixel distance.

use std::path::Path;

use image::{DynamicImage, ImageReader, RgbImage};

use crate::color::ChannelMeans;
use crate::io::FormatError;

/// Decodes an 8-bit PNG or JPEG. Alpha is dropped and grayscale is broadcast
/// to three equal channels; 16-bit and float images are rejected.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage, FormatError> {
    let path = path.as_ref();
    let decode_err = |e: image::ImageError| FormatError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let img = ImageReader::open(path)
        .map_err(|e| FormatError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| FormatError::io(path, e))?
        .decode()
        .map_err(decode_err)?;
    match img {
        DynamicImage::ImageRgb8(rgb) => Ok(rgb),
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            Ok(img.to_rgb8())
        }
        other => Err(FormatError::UnsupportedImage {
            path: path.to_path_buf(),
            color: format!("{:?}", other.color()),
        }),
    }
}

/// Per-channel means over every pixel, at stored resolution.
pub fn rgb_channel_means(img: &RgbImage) -> ChannelMeans {
    let mut sums = [0u64; 3];
    for px in img.pixels() {
        for (s, &v) in sums.iter_mut().zip(&px.0) {
            *s += v as u64;
        }
    }
    let n = (img.width() as u64 * img.height() as u64).max(1) as f64;
    ChannelMeans::unchecked(sums[0] as f64 / n, sums[1] as f64 / n, sums[2] as f64 / n)
}

pub fn image_channel_means(path: impl AsRef<Path>) -> Result<ChannelMeans, FormatError> {
    load_rgb(path).map(|img| rgb_channel_means(&img))
}
