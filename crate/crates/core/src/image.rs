//! 8-bit interleaved pixel buffers and the float working representation used
//! by the resampler.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("buffer length {len} does not match {width}x{height}x{channels}")]
    BadLength {
        width: u32,
        height: u32,
        channels: u8,
        len: usize,
    },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    BadChannels(u8),
    #[error("zero-sized image")]
    Empty,
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("failed to encode image: {0}")]
    Encode(#[source] image::ImageError),
}

/// Row-major interleaved 8-bit image with 1 or 3 channels.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn from_raw(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannels(channels));
        }
        if width == 0 || height == 0 {
            return Err(ImageError::Empty);
        }
        if data.len() != width as usize * height as usize * channels as usize {
            return Err(ImageError::BadLength {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a single value in every sample.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, ImageError> {
        let len = width as usize * height as usize * channels as usize;
        Self::from_raw(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// Bytes per row.
    pub fn stride(&self) -> usize {
        self.width as usize * self.channels as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let off = y as usize * self.stride() + x as usize * c;
        &self.data[off..off + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        let sum: u64 = self.data.iter().map(|&v| v as u64).sum();
        sum as f64 / self.data.len() as f64
    }

    /// Hex SHA-256 of the raw sample bytes.
    pub fn sha256_hex(&self) -> String {
        hex::encode(Sha256::digest(&self.data))
    }

    /// Loads PNG or JPEG from disk, converted to 3-channel 8-bit.
    pub fn load(path: &Path) -> Result<Self, ImageError> {
        let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::decode(&bytes).map_err(|e| match e {
            ImageError::Decode { source, .. } => ImageError::Decode {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    /// Decodes an in-memory PNG or JPEG. Grayscale is promoted by channel
    /// replication; alpha is dropped.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        let dynamic = image::load_from_memory(bytes).map_err(|source| ImageError::Decode {
            path: "<memory>".into(),
            source,
        })?;
        let rgb = dynamic.into_rgb8();
        let (w, h) = rgb.dimensions();
        Self::from_raw(w, h, 3, rgb.into_raw())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new_with_quality(
            &mut out,
            image::codecs::png::CompressionType::Fast,
            image::codecs::png::FilterType::Adaptive,
        );
        image::ImageEncoder::write_image(encoder, &self.data, self.width, self.height, color)
            .map_err(ImageError::Encode)?;
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Float working copy with samples scaled to [0, 1].
    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| to_unit(v)).collect(),
        }
    }
}

/// Same layout as [`Image`] with f32 samples nominally in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<f32>,
}

impl FloatImage {
    /// Quantizes back to 8 bits, rounding half away from zero.
    pub fn to_u8(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| quantize(v)).collect(),
        }
    }
}

#[inline]
pub fn to_unit(v: u8) -> f32 {
    v as f32 / 255.0
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    // f32::round rounds half away from zero.
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_channels() {
        assert!(matches!(
            Image::from_raw(2, 2, 3, vec![0; 11]),
            Err(ImageError::BadLength { .. })
        ));
        assert!(matches!(Image::from_raw(2, 2, 4, vec![0; 16]), Err(ImageError::BadChannels(4))));
        assert!(matches!(Image::from_raw(0, 2, 1, vec![]), Err(ImageError::Empty)));
    }

    #[test]
    fn unit_roundtrip_is_exact_for_all_bytes() {
        for v in 0..=255u8 {
            assert_eq!(quantize(to_unit(v)), v);
        }
    }

    #[test]
    fn png_roundtrip_and_gray_promotion() {
        let img = Image::from_raw(3, 2, 3, (0..18).map(|v| v * 10).collect()).unwrap();
        let back = Image::decode(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back, img);

        let gray = Image::from_raw(2, 1, 1, vec![7, 200]).unwrap();
        let promoted = Image::decode(&gray.encode_png().unwrap()).unwrap();
        assert_eq!(promoted.channels(), 3);
        assert_eq!(promoted.data(), &[7, 7, 7, 200, 200, 200]);
    }
}
