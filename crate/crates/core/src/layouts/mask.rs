use sha2::{Digest, Sha256};

use super::Layout;

/// Row-major bit plane, one bit per pixel, rows padded to whole words.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryMask({}x{}, {} set)", self.width, self.height, self.count_ones())
    }
}

impl BinaryMask {
    pub fn zeros(width: u32, height: u32) -> Self {
        let words_per_row = (width as usize).div_ceil(64);
        Self {
            width,
            height,
            words_per_row,
            bits: vec![0; words_per_row * height as usize],
        }
    }

    pub fn ones(width: u32, height: u32) -> Self {
        let mut m = Self::zeros(width, height);
        m.fill_rect(0..width, 0..height);
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let word = self.bits[y as usize * self.words_per_row + x as usize / 64];
        word >> (x % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let idx = y as usize * self.words_per_row + x as usize / 64;
        let bit = 1u64 << (x % 64);
        if value {
            self.bits[idx] |= bit;
        } else {
            self.bits[idx] &= !bit;
        }
    }

    /// Sets every bit in the half-open rectangle.
    pub fn fill_rect(&mut self, xs: std::ops::Range<u32>, ys: std::ops::Range<u32>) {
        let x1 = xs.end.min(self.width);
        let y1 = ys.end.min(self.height);
        if xs.start >= x1 {
            return;
        }
        for y in ys.start..y1 {
            let row = &mut self.bits[y as usize * self.words_per_row..(y as usize + 1) * self.words_per_row];
            let mut x = xs.start;
            while x < x1 {
                let word = x as usize / 64;
                let lo = x % 64;
                let hi = (x1 - (word as u32) * 64).min(64);
                let span = hi - lo;
                let bits = if span == 64 { u64::MAX } else { ((1u64 << span) - 1) << lo };
                row[word] |= bits;
                x += span;
            }
        }
    }

    /// Row `y` as runs of (start, end, bit).
    pub fn row_runs(&self, y: u32) -> impl Iterator<Item = (u32, u32, bool)> + '_ {
        let mut x = 0;
        std::iter::from_fn(move || {
            if x >= self.width {
                return None;
            }
            let v = self.get(x, y);
            let start = x;
            while x < self.width && self.get(x, y) == v {
                x += 1;
            }
            Some((start, x, v))
        })
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Hex SHA-256 over the dimensions and bit plane.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        for w in &self.bits {
            h.update(w.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Union of all object boxes at the layout's image size.
pub fn rasterize_mask(layout: &Layout) -> BinaryMask {
    let mut mask = BinaryMask::zeros(layout.width, layout.height);
    for obj in &layout.objects {
        let (xs, ys) = obj.bbox.pixel_span(layout.width, layout.height);
        mask.fill_rect(xs, ys);
    }
    mask
}
