//! Deterministic synthetic corpora for tests and benchmarks: textured images
//! with a roughly 1/f spectrum and painted objects, plus a matching manifest.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{Image, ImageError};
use crate::layouts::{serialize_manifest, BBox, Category, Layout, LayoutObject};

const CATEGORIES: [&str; 6] = ["person", "car", "tree", "sky", "dog", "house"];

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: [f64; 3],
}

fn waves(rng: &mut ChaCha8Rng, count: usize, max_freq: f64, scale: f64) -> Vec<Wave> {
    (0..count)
        .map(|_| {
            let f = rng.random_range(1.0..max_freq);
            let angle = rng.random_range(0.0..TAU);
            let a = scale / f;
            Wave {
                fx: f * angle.cos(),
                fy: f * angle.sin(),
                phase: rng.random_range(0.0..TAU),
                amp: [a * rng.random_range(0.5..1.0), a * rng.random_range(0.5..1.0), a * rng.random_range(0.5..1.0)],
            }
        })
        .collect()
}

fn shade(waves: &[Wave], u: f64, v: f64, c: usize) -> f64 {
    waves.iter().map(|w| w.amp[c] * (TAU * (w.fx * u + w.fy * v) + w.phase).sin()).sum()
}

/// Textured RGB image with a falling power spectrum.
pub fn natural_image(width: u32, height: u32, seed: u64) -> Image {
    natural_image_with_objects(width, height, seed, &[])
}

fn natural_image_with_objects(width: u32, height: u32, seed: u64, objects: &[BBox]) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = [rng.random_range(60.0..190.0), rng.random_range(60.0..190.0), rng.random_range(60.0..190.0)];
    let bg = waves(&mut rng, 16, 40.0, 60.0);
    let painted: Vec<([f64; 3], Vec<Wave>)> = objects
        .iter()
        .map(|_| {
            let color = [rng.random_range(20.0..235.0), rng.random_range(20.0..235.0), rng.random_range(20.0..235.0)];
            (color, waves(&mut rng, 6, 24.0, 50.0))
        })
        .collect();
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        for x in 0..width {
            let u = x as f64 / width as f64;
            let v = y as f64 / height as f64;
            // Topmost object containing the pixel (inside its ellipse) wins.
            let hit = objects.iter().zip(&painted).rev().find(|(b, _)| {
                let cx = b.x + b.w / 2.0;
                let cy = b.y + b.h / 2.0;
                let dx = (x as f64 + 0.5 - cx) / (b.w / 2.0);
                let dy = (y as f64 + 0.5 - cy) / (b.h / 2.0);
                dx * dx + dy * dy <= 1.0
            });
            for c in 0..3 {
                let val = match hit {
                    Some((_, (color, tex))) => color[c] + shade(tex, u, v, c),
                    None => base[c] + shade(&bg, u, v, c),
                };
                let noise = rng.random_range(-6.0..6.0);
                data.push((val + noise).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::from_raw(width, height, 3, data).expect("sized buffer")
}

/// Random layout with 3 to 8 objects, each covering at least 3% of the image.
pub fn random_layout(image_id: &str, size: u32, seed: u64) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a70);
    let count = rng.random_range(3..=8);
    let s = size as f64;
    let objects = (0..count)
        .map(|_| {
            let w = (rng.random_range(0.18..0.5) * s).round();
            let h = (rng.random_range(0.18..0.5) * s).round();
            let x = rng.random_range(0.0..=(s - w));
            let y = rng.random_range(0.0..=(s - h));
            LayoutObject {
                // Quarter-pixel coordinates exercise the fractional rasterization.
                bbox: BBox::new((x * 4.0).round() / 4.0, (y * 4.0).round() / 4.0, w, h),
                class_id: rng.random_range(1..=CATEGORIES.len() as i64),
            }
        })
        .map(|mut o| {
            o.bbox = o.bbox.clamp_to(size, size).expect("box inside image");
            o
        })
        .collect();
    Layout {
        image_id: image_id.to_string(),
        file: PathBuf::from(format!("{image_id}.png")),
        width: size,
        height: size,
        objects,
    }
}

pub fn categories() -> Vec<Category> {
    CATEGORIES
        .iter()
        .enumerate()
        .map(|(i, n)| Category {
            id: i as i64 + 1,
            name: n.to_string(),
        })
        .collect()
}

/// Writes `count` square PNGs and `manifest.json` into `dir`; returns the
/// manifest path.
pub fn write_corpus(dir: &Path, count: usize, size: u32, seed: u64) -> Result<PathBuf, ImageError> {
    let io = |source| ImageError::Io {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut layouts = Vec::with_capacity(count);
    for i in 0..count {
        let id = format!("img{i:04}");
        let item_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let layout = random_layout(&id, size, item_seed);
        let boxes: Vec<BBox> = layout.objects.iter().map(|o| o.bbox).collect();
        natural_image_with_objects(size, size, item_seed, &boxes).save_png(&dir.join(&layout.file))?;
        layouts.push(layout);
    }
    let manifest = dir.join("manifest.json");
    std::fs::write(&manifest, serialize_manifest(&categories(), &layouts)).map_err(io)?;
    Ok(manifest)
}
