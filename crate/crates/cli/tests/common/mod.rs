//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use objblur_core::image::{FloatImage, Image};
use objblur_core::layouts::Layout;

/// Direct per-output-pixel evaluation of the half-pixel bilinear formula.
pub fn naive_resize_f32(img: &FloatImage, out_w: u32, out_h: u32) -> FloatImage {
    let c = img.channels as usize;
    let (iw, ih) = (img.width as usize, img.height as usize);
    let sx = img.width as f32 / out_w as f32;
    let sy = img.height as f32 / out_h as f32;
    let px = |x: usize, y: usize, k: usize| img.data[(y * iw + x) * c + k];
    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * c);
    for oy in 0..out_h as usize {
        let fy = ((oy as f32 + 0.5) * sy - 0.5).max(0.0);
        let y0 = (fy.floor() as usize).min(ih - 1);
        let y1 = (y0 + 1).min(ih - 1);
        let wy = fy - y0 as f32;
        for ox in 0..out_w as usize {
            let fx = ((ox as f32 + 0.5) * sx - 0.5).max(0.0);
            let x0 = (fx.floor() as usize).min(iw - 1);
            let x1 = (x0 + 1).min(iw - 1);
            let wx = fx - x0 as f32;
            for k in 0..c {
                let top = (1.0 - wx) * px(x0, y0, k) + wx * px(x1, y0, k);
                let bot = (1.0 - wx) * px(x0, y1, k) + wx * px(x1, y1, k);
                data.push((1.0 - wy) * top + wy * bot);
            }
        }
    }
    FloatImage { width: out_w, height: out_h, channels: img.channels, data }
}

pub fn naive_resize(img: &Image, out_w: u32, out_h: u32) -> Image {
    naive_resize_f32(&img.to_float(), out_w, out_h).to_u8()
}

/// Mean squared response of the 3x3 Laplacian [0 1 0; 1 -4 1; 0 1 0] over
/// interior pixels, all channels, in 8-bit units.
pub fn laplacian_energy(img: &Image) -> f64 {
    let (w, h, c) = (img.width() as usize, img.height() as usize, img.channels() as usize);
    let d = img.data();
    let at = |x: usize, y: usize, k: usize| d[(y * w + x) * c + k] as f64;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for k in 0..c {
                let r = at(x - 1, y, k) + at(x + 1, y, k) + at(x, y - 1, k) + at(x, y + 1, k) - 4.0 * at(x, y, k);
                sum += r * r;
                n += 1;
            }
        }
    }
    sum / n as f64
}

/// Per-object cut-and-paste: copies each box region from one image into a
/// copy of the other, box by box, using floor/ceil pixel bounds.
pub fn paste_loop(hr: &Image, lr: &Image, layout: &Layout, blur_objects: bool) -> Image {
    let (src, base) = if blur_objects { (lr, hr) } else { (hr, lr) };
    let mut out = base.clone();
    let c = hr.channels() as usize;
    let w = hr.width() as usize;
    for obj in &layout.objects {
        let b = obj.bbox;
        let x0 = b.x.floor().max(0.0) as usize;
        let y0 = b.y.floor().max(0.0) as usize;
        let x1 = ((b.x + b.w).ceil() as usize).min(hr.width() as usize);
        let y1 = ((b.y + b.h).ceil() as usize).min(hr.height() as usize);
        for y in y0..y1 {
            for x in x0..x1 {
                for k in 0..c {
                    let i = (y * w + x) * c + k;
                    out.data_mut()[i] = src.data()[i];
                }
            }
        }
    }
    out
}

pub fn checkerboard(size: u32, cell: u32) -> Image {
    let mut data = Vec::with_capacity((size * size * 3) as usize);
    for y in 0..size {
        for x in 0..size {
            let v = if ((x / cell) + (y / cell)) % 2 == 0 { 0 } else { 255 };
            data.extend_from_slice(&[v, v, v]);
        }
    }
    Image::from_raw(size, size, 3, data).unwrap()
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the built binary with `args`.
pub fn objblur(args: &[&str]) -> Output {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_objblur"))
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Parses a schedule CSV into `(t, tau, s, w, h)` rows.
pub fn read_schedule_csv(path: &std::path::Path) -> Vec<(u64, f64, f64, u32, u32)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,tau,s,W_t,H_t"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 5, "row `{l}`");
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}
