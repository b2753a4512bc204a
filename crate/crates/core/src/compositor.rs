//! Hard-mask compositing of the clean and blurred images, plus the
//! full-image, random-patch and shuffled-mask variants.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;
use crate::layouts::{BBox, BinaryMask};

#[derive(Debug, Error, PartialEq)]
pub enum CompositeError {
    #[error("image shapes differ: hr {hr:?}, lr {lr:?}")]
    ShapeMismatch { hr: (u32, u32, u8), lr: (u32, u32, u8) },
    #[error("mask is {mask:?} but image is {image:?}")]
    MaskMismatch { mask: (u32, u32), image: (u32, u32) },
    #[error("patch {0:?} lies outside the image")]
    PatchOutOfBounds(BBox),
    #[error("invalid blur policy: {0}")]
    Policy(String),
    #[error("unknown variant `{0}` (expected objblur, fullblur, cutblur, randmask or none)")]
    UnknownVariant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurVariant {
    /// Blur the union of object boxes or its complement.
    ObjBlur,
    /// Blur the whole image.
    FullBlur,
    /// Paste one random blurred rectangle.
    CutBlur,
    /// ObjBlur with masks shuffled across the batch.
    RandMask,
    None,
}

impl fmt::Display for BlurVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlurVariant::ObjBlur => "objblur",
            BlurVariant::FullBlur => "fullblur",
            BlurVariant::CutBlur => "cutblur",
            BlurVariant::RandMask => "randmask",
            BlurVariant::None => "none",
        })
    }
}

impl FromStr for BlurVariant {
    type Err = CompositeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "objblur" => Ok(BlurVariant::ObjBlur),
            "fullblur" => Ok(BlurVariant::FullBlur),
            "cutblur" => Ok(BlurVariant::CutBlur),
            "randmask" => Ok(BlurVariant::RandMask),
            "none" => Ok(BlurVariant::None),
            other => Err(CompositeError::UnknownVariant(other.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlurPolicy {
    pub variant: BlurVariant,
    /// Probability of blurring the objects rather than the background.
    pub p_obj: f64,
    /// Smallest intermediate resolution (reached at strength 1).
    pub start: (u32, u32),
    /// Area fraction range of the random patch used by `cutblur`.
    pub cutblur_area: (f64, f64),
}

impl Default for BlurPolicy {
    fn default() -> Self {
        Self {
            variant: BlurVariant::ObjBlur,
            p_obj: 0.5,
            start: (8, 8),
            cutblur_area: (0.1, 0.5),
        }
    }
}

impl BlurPolicy {
    pub fn validate(&self) -> Result<(), CompositeError> {
        if !(0.0..=1.0).contains(&self.p_obj) {
            return Err(CompositeError::Policy(format!("p_obj {} outside [0, 1]", self.p_obj)));
        }
        if self.start.0 == 0 || self.start.1 == 0 {
            return Err(CompositeError::Policy("start resolution must be positive".into()));
        }
        let (lo, hi) = self.cutblur_area;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(CompositeError::Policy(format!("cutblur area range ({lo}, {hi}) must satisfy 0 < min <= max < 1")));
        }
        Ok(())
    }
}

/// Outcome of the per-sample coin flip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDecision {
    pub blur_objects: bool,
    pub rng_draw: f64,
}

impl BranchDecision {
    /// Objects are blurred iff the uniform draw falls below `p_obj`.
    pub fn from_draw(rng_draw: f64, p_obj: f64) -> Self {
        Self {
            blur_objects: rng_draw < p_obj,
            rng_draw,
        }
    }
}

fn check_shapes(hr: &Image, lr: &Image) -> Result<(), CompositeError> {
    if hr.same_shape(lr) {
        Ok(())
    } else {
        Err(CompositeError::ShapeMismatch {
            hr: (hr.width(), hr.height(), hr.channels()),
            lr: (lr.width(), lr.height(), lr.channels()),
        })
    }
}

/// `blur_objects`: blurred inside the mask, clean outside. Otherwise the
/// reverse. Each pixel is copied from exactly one of the two inputs.
pub fn composite_objblur(hr: &Image, lr: &Image, mask: &BinaryMask, blur_objects: bool) -> Result<Image, CompositeError> {
    check_shapes(hr, lr)?;
    if mask.dims() != hr.dims() {
        return Err(CompositeError::MaskMismatch {
            mask: mask.dims(),
            image: hr.dims(),
        });
    }
    let (inside, outside) = if blur_objects { (lr, hr) } else { (hr, lr) };
    let mut out = outside.clone();
    let c = hr.channels() as usize;
    let stride = hr.stride();
    let src = inside.data();
    let dst = out.data_mut();
    for y in 0..hr.height() {
        let row = y as usize * stride;
        for (x0, x1, set) in mask.row_runs(y) {
            if set {
                let a = row + x0 as usize * c;
                let b = row + x1 as usize * c;
                dst[a..b].copy_from_slice(&src[a..b]);
            }
        }
    }
    Ok(out)
}

pub fn composite_fullblur(hr: &Image, lr: &Image) -> Result<Image, CompositeError> {
    check_shapes(hr, lr)?;
    Ok(lr.clone())
}

/// Pastes the blurred image into the clean one over `patch`.
pub fn composite_cutblur(hr: &Image, lr: &Image, patch: BBox) -> Result<Image, CompositeError> {
    check_shapes(hr, lr)?;
    let (w, h) = (hr.width() as f64, hr.height() as f64);
    if !(patch.x >= 0.0 && patch.y >= 0.0 && patch.w > 0.0 && patch.h > 0.0 && patch.x + patch.w <= w && patch.y + patch.h <= h) {
        return Err(CompositeError::PatchOutOfBounds(patch));
    }
    let (xs, ys) = patch.pixel_span(hr.width(), hr.height());
    let mut out = hr.clone();
    let c = hr.channels() as usize;
    let stride = hr.stride();
    for y in ys {
        let a = y as usize * stride + xs.start as usize * c;
        let b = y as usize * stride + xs.end as usize * c;
        out.data_mut()[a..b].copy_from_slice(&lr.data()[a..b]);
    }
    Ok(out)
}

/// Same arithmetic as [`composite_objblur`] with another sample's mask.
pub fn composite_randmask(hr: &Image, lr: &Image, foreign_mask: &BinaryMask, blur_objects: bool) -> Result<Image, CompositeError> {
    composite_objblur(hr, lr, foreign_mask, blur_objects)
}

/// Draws a CutBlur rectangle: area fraction uniform in `area`, sides scaled
/// equally from the image sides, position uniform over valid offsets.
pub fn sample_cutblur_patch<R: Rng + ?Sized>(rng: &mut R, width: u32, height: u32, area: (f64, f64)) -> BBox {
    let frac = if area.1 > area.0 { rng.random_range(area.0..=area.1) } else { area.0 };
    let side = frac.sqrt();
    let pw = ((width as f64 * side).round() as u32).clamp(1, width);
    let ph = ((height as f64 * side).round() as u32).clamp(1, height);
    let x = rng.random_range(0..=width - pw);
    let y = rng.random_range(0..=height - ph);
    BBox::new(x as f64, y as f64, pw as f64, ph as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layouts::{rasterize_mask, Layout, LayoutObject};
    use rand::SeedableRng;

    fn img(seed: u8) -> Image {
        Image::from_raw(6, 4, 3, (0..72u32).map(|v| (v as u8).wrapping_mul(seed).wrapping_add(seed)).collect()).unwrap()
    }

    fn single_box_mask(b: BBox) -> BinaryMask {
        rasterize_mask(&Layout {
            image_id: "x".into(),
            file: "x.png".into(),
            width: 6,
            height: 4,
            objects: vec![LayoutObject { bbox: b, class_id: 0 }],
        })
    }

    #[test]
    fn degenerate_masks() {
        let (hr, lr) = (img(3), img(7));
        assert_eq!(composite_objblur(&hr, &lr, &BinaryMask::ones(6, 4), true).unwrap(), lr);
        assert_eq!(composite_objblur(&hr, &lr, &BinaryMask::zeros(6, 4), true).unwrap(), hr);
        assert_eq!(composite_objblur(&hr, &lr, &BinaryMask::ones(6, 4), false).unwrap(), hr);
        assert_eq!(composite_objblur(&hr, &lr, &BinaryMask::zeros(6, 4), false).unwrap(), lr);
    }

    #[test]
    fn equal_inputs_give_hr_for_both_branches() {
        let hr = img(5);
        let m = single_box_mask(BBox::new(1.0, 1.0, 2.0, 2.0));
        for b in [true, false] {
            assert_eq!(composite_objblur(&hr, &hr.clone(), &m, b).unwrap(), hr);
        }
    }

    #[test]
    fn shape_checks() {
        let small = Image::filled(2, 2, 3, 0).unwrap();
        assert!(matches!(composite_fullblur(&img(1), &small), Err(CompositeError::ShapeMismatch { .. })));
        assert!(matches!(
            composite_objblur(&img(1), &img(2), &BinaryMask::zeros(2, 2), true),
            Err(CompositeError::MaskMismatch { .. })
        ));
    }

    #[test]
    fn cutblur_cases() {
        let (hr, lr) = (img(3), img(7));
        assert_eq!(composite_cutblur(&hr, &lr, BBox::new(0.0, 0.0, 6.0, 4.0)).unwrap(), lr);
        let one = composite_cutblur(&hr, &lr, BBox::new(2.0, 1.0, 1.0, 1.0)).unwrap();
        let differing = one.data().iter().zip(hr.data()).filter(|(a, b)| a != b).count();
        assert!(differing <= 3);
        let b = BBox::new(1.0, 0.0, 3.0, 2.0);
        assert_eq!(
            composite_cutblur(&hr, &lr, b).unwrap(),
            composite_objblur(&hr, &lr, &single_box_mask(b), true).unwrap()
        );
        assert!(matches!(
            composite_cutblur(&hr, &lr, BBox::new(4.0, 0.0, 3.0, 1.0)),
            Err(CompositeError::PatchOutOfBounds(_))
        ));
    }

    #[test]
    fn randmask_with_own_mask_is_objblur() {
        let (hr, lr) = (img(3), img(7));
        let m = single_box_mask(BBox::new(1.0, 1.0, 3.0, 2.0));
        assert_eq!(
            composite_randmask(&hr, &lr, &m, false).unwrap(),
            composite_objblur(&hr, &lr, &m, false).unwrap()
        );
        assert_eq!(composite_randmask(&hr, &lr, &BinaryMask::zeros(6, 4), true).unwrap(), hr);
    }

    #[test]
    fn patch_area_in_range() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let p = sample_cutblur_patch(&mut rng, 128, 96, (0.1, 0.5));
            let frac = p.area() / (128.0 * 96.0);
            assert!((0.09..=0.51).contains(&frac), "{frac}");
            assert!(p.x + p.w <= 128.0 && p.y + p.h <= 96.0);
        }
    }

    #[test]
    fn policy_validation_and_variant_strings() {
        assert!(BlurPolicy::default().validate().is_ok());
        assert!(BlurPolicy { p_obj: 1.2, ..Default::default() }.validate().is_err());
        assert!(BlurPolicy { cutblur_area: (0.5, 0.1), ..Default::default() }.validate().is_err());
        for v in ["objblur", "fullblur", "cutblur", "randmask", "none"] {
            assert_eq!(v.parse::<BlurVariant>().unwrap().to_string(), v);
        }
        assert!("blur".parse::<BlurVariant>().is_err());
    }

    #[test]
    fn branch_rule() {
        assert!(BranchDecision::from_draw(0.49, 0.5).blur_objects);
        assert!(!BranchDecision::from_draw(0.5, 0.5).blur_objects);
        assert!(!BranchDecision::from_draw(0.0, 0.0).blur_objects);
    }
}
