//! Bilinear resampling and the down/up blur operator.
//!
//! Sampling follows the half-pixel-center convention: the source coordinate
//! of destination index `d` is `(d + 0.5) * (in / out) - 0.5`, negative
//! coordinates clamp to 0 and the right/bottom neighbour clamps to the last
//! row or column. All arithmetic is f32 and the 8-bit result is rounded half
//! away from zero. There is no anti-aliasing prefilter when shrinking.

use thiserror::Error;

use crate::image::{FloatImage, Image};

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("target size {0}x{1} has a zero dimension")]
    ZeroTarget(u32, u32),
    #[error("start resolution {start:?} exceeds full resolution {full:?}")]
    StartExceedsFull { start: (u32, u32), full: (u32, u32) },
    #[error("start resolution has a zero dimension")]
    ZeroStart,
    #[error("blur strength {0} outside [0, 1]")]
    Strength(f64),
}

/// Blur strength in [0, 1]; 1 is the start resolution, 0 is the clean image.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BlurStrength(f64);

impl BlurStrength {
    pub const CLEAN: BlurStrength = BlurStrength(0.0);
    pub const MAX: BlurStrength = BlurStrength(1.0);

    pub fn new(value: f64) -> Result<Self, ResampleError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ResampleError::Strength(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_clean(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for BlurStrength {
    type Error = ResampleError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<BlurStrength> for f64 {
    fn from(s: BlurStrength) -> f64 {
        s.0
    }
}

/// Interpolation taps for one destination coordinate.
#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f32,
}

fn taps(input: u32, output: u32) -> Vec<Tap> {
    let scale = input as f32 / output as f32;
    let last = input as usize - 1;
    (0..output)
        .map(|d| {
            let src = ((d as f32 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(last);
            Tap {
                lo,
                hi: (lo + 1).min(last),
                frac: src - lo as f32,
            }
        })
        .collect()
}

/// Bilinear resize in the float domain.
///
/// Separable, but each output sample is computed with exactly the operations
/// of the direct two-dimensional formula (horizontal lerp of the two rows,
/// then vertical lerp), so results are bit-identical to per-pixel evaluation.
pub fn resize_bilinear_f32(img: &FloatImage, out_w: u32, out_h: u32) -> Result<FloatImage, ResampleError> {
    if out_w == 0 || out_h == 0 {
        return Err(ResampleError::ZeroTarget(out_w, out_h));
    }
    let c = img.channels as usize;
    let in_stride = img.width as usize * c;
    let out_stride = out_w as usize * c;
    let xt = taps(img.width, out_w);
    let yt = taps(img.height, out_h);

    // Horizontal pass over every source row.
    let mut rows = vec![0f32; img.height as usize * out_stride];
    for (src_row, dst_row) in img.data.chunks_exact(in_stride).zip(rows.chunks_exact_mut(out_stride)) {
        for (tap, dst) in xt.iter().zip(dst_row.chunks_exact_mut(c)) {
            let a = &src_row[tap.lo * c..tap.lo * c + c];
            let b = &src_row[tap.hi * c..tap.hi * c + c];
            let w0 = 1.0 - tap.frac;
            for k in 0..c {
                dst[k] = w0 * a[k] + tap.frac * b[k];
            }
        }
    }

    let mut data = vec![0f32; out_h as usize * out_stride];
    for (tap, dst_row) in yt.iter().zip(data.chunks_exact_mut(out_stride)) {
        let top = &rows[tap.lo * out_stride..(tap.lo + 1) * out_stride];
        let bot = &rows[tap.hi * out_stride..(tap.hi + 1) * out_stride];
        let w0 = 1.0 - tap.frac;
        for ((d, &t), &b) in dst_row.iter_mut().zip(top).zip(bot) {
            *d = w0 * t + tap.frac * b;
        }
    }

    Ok(FloatImage {
        width: out_w,
        height: out_h,
        channels: img.channels,
        data,
    })
}

/// 8-bit bilinear resize.
pub fn resize_bilinear(img: &Image, out_w: u32, out_h: u32) -> Result<Image, ResampleError> {
    Ok(resize_bilinear_f32(&img.to_float(), out_w, out_h)?.to_u8())
}

/// Maps a blur strength onto the intermediate resolution, linearly between the
/// full and start resolutions and rounded to the nearest pixel.
pub fn strength_to_resolution(
    s: BlurStrength,
    full: (u32, u32),
    start: (u32, u32),
) -> Result<(u32, u32), ResampleError> {
    if start.0 == 0 || start.1 == 0 {
        return Err(ResampleError::ZeroStart);
    }
    if start.0 > full.0 || start.1 > full.1 {
        return Err(ResampleError::StartExceedsFull { start, full });
    }
    let keep = 1.0 - s.value();
    let axis = |full: u32, start: u32| -> u32 {
        // f64::round is half away from zero.
        (keep * (full - start) as f64 + start as f64).round() as u32
    };
    Ok((axis(full.0, start.0), axis(full.1, start.1)))
}

/// Blurs by shrinking to the strength's intermediate resolution and growing
/// back. Strength 0 returns an exact copy without resampling.
pub fn blur(img: &Image, s: BlurStrength, start: (u32, u32)) -> Result<Image, ResampleError> {
    if s.is_clean() {
        return Ok(img.clone());
    }
    let (w, h) = strength_to_resolution(s, img.dims(), start)?;
    let small = resize_bilinear_f32(&img.to_float(), w, h)?;
    Ok(resize_bilinear_f32(&small, img.width(), img.height())?.to_u8())
}
