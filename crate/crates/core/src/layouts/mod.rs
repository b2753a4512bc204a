//! Layout manifests: per-image object boxes with class labels.

mod filter;
mod manifest;
mod mask;

use std::path::PathBuf;

pub use filter::{filter_layouts, filter_layouts_with_stats, FilterRules, FilterStats};
pub use manifest::{parse_manifest, serialize_manifest, ManifestError, ManifestWarning, ParsedManifest};
pub use mask::{rasterize_mask, BinaryMask};

/// Axis-aligned box in pixel units, `(x, y)` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Clamps to `[0, width] x [0, height]`. `None` when nothing of positive
    /// area remains.
    pub fn clamp_to(&self, width: u32, height: u32) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width as f64);
        let y1 = (self.y + self.h).min(height as f64);
        if x1 > x0 && y1 > y0 {
            Some(BBox::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    /// Pixel index ranges `(x0..x1, y0..y1)` covered by the box: floor on
    /// the leading edge, ceil on the trailing edge, clamped to the image.
    pub fn pixel_span(&self, width: u32, height: u32) -> (std::ops::Range<u32>, std::ops::Range<u32>) {
        let clamp = |v: f64, hi: u32| -> u32 { v.max(0.0).min(hi as f64) as u32 };
        let x0 = clamp(self.x.floor(), width);
        let y0 = clamp(self.y.floor(), height);
        let x1 = clamp((self.x + self.w).ceil(), width);
        let y1 = clamp((self.y + self.h).ceil(), height);
        (x0..x1.max(x0), y0..y1.max(y0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutObject {
    pub bbox: BBox,
    pub class_id: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub image_id: String,
    /// Image path as written in the manifest.
    pub file: PathBuf,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<LayoutObject>,
}

impl Layout {
    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// The same boxes expressed for an image of a different size.
    pub fn rescaled(&self, width: u32, height: u32) -> Layout {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Layout {
            width,
            height,
            objects: self
                .objects
                .iter()
                .map(|o| LayoutObject {
                    bbox: BBox::new(o.bbox.x * sx, o.bbox.y * sy, o.bbox.w * sx, o.bbox.h * sy),
                    class_id: o.class_id,
                })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Category {
    pub id: i64,
    pub name: String,
}
