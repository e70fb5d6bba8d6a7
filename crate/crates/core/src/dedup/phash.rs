use std::fmt;
use std::str::FromStr;

use image::DynamicImage;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DedupError;

/// 64-bit average hash. Text form is 16 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PHash64(pub u64);

impl PHash64 {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }
}

impl fmt::Display for PHash64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for PHash64 {
    type Err = DedupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(DedupError::BadHash(s.to_string()));
        }
        u64::from_str_radix(s, 16)
            .map(PHash64)
            .map_err(|_| DedupError::BadHash(s.to_string()))
    }
}

impl Serialize for PHash64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PHash64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of differing bits.
pub fn hamming(a: PHash64, b: PHash64) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// Rec.601 luma in integer arithmetic, rounded to nearest.
pub fn luma601(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Area-average resample of a packed RGB8 raster to 8x8, one value per channel.
///
/// Output cell `c` spans `[c*W/8, (c+1)*W/8)` source pixels; coordinates are
/// scaled by 8 so every overlap weight is an integer and the average is exact.
fn box_resample_8x8(width: u32, height: u32, rgb: &[u8]) -> [[u8; 3]; 64] {
    let (w, h) = (width as u64, height as u64);
    let overlaps = |cell: u64, extent: u64| -> Vec<(u64, u64)> {
        let lo = cell * extent;
        let hi = (cell + 1) * extent;
        let first = lo / 8;
        let last = (hi - 1) / 8;
        (first..=last)
            .map(|p| {
                let s = (p * 8).max(lo);
                let e = (p * 8 + 8).min(hi);
                (p, e - s)
            })
            .collect()
    };
    let total = w * h;
    let mut out = [[0u8; 3]; 64];
    for row in 0..8u64 {
        let ys = overlaps(row, h);
        for col in 0..8u64 {
            let xs = overlaps(col, w);
            let mut acc = [0u64; 3];
            for &(y, wy) in &ys {
                for &(x, wx) in &xs {
                    let idx = ((y * w + x) * 3) as usize;
                    let weight = wy * wx;
                    for ch in 0..3 {
                        acc[ch] += weight * rgb[idx + ch] as u64;
                    }
                }
            }
            let cell = &mut out[(row * 8 + col) as usize];
            for ch in 0..3 {
                cell[ch] = ((acc[ch] + total / 2) / total) as u8;
            }
        }
    }
    out
}

/// Average hash of a packed RGB8 raster.
///
/// Shrinks to 8x8 ignoring aspect ratio, converts to grayscale, and sets a bit
/// for every pixel strictly above the mean. Bits are packed left to right, top
/// to bottom, with row 0 in the most significant byte.
pub fn ahash_rgb8(width: u32, height: u32, rgb: &[u8]) -> Result<PHash64, DedupError> {
    if width == 0 || height == 0 {
        return Err(DedupError::Decode("image has zero area".into()));
    }
    if rgb.len() != width as usize * height as usize * 3 {
        return Err(DedupError::Decode(format!(
            "buffer of {} bytes does not match {width}x{height} RGB",
            rgb.len()
        )));
    }
    let small = box_resample_8x8(width, height, rgb);
    let gray: Vec<u32> = small.iter().map(|p| luma601(p[0], p[1], p[2]) as u32).collect();
    let sum: u32 = gray.iter().sum();
    let mut bits = 0u64;
    for g in gray {
        bits <<= 1;
        // g > sum/64 without rounding the mean
        if g * 64 > sum {
            bits |= 1;
        }
    }
    Ok(PHash64(bits))
}

pub fn ahash(image: &DynamicImage) -> Result<PHash64, DedupError> {
    let rgb = image.to_rgb8();
    ahash_rgb8(rgb.width(), rgb.height(), rgb.as_raw())
}

/// Decodes an encoded image and hashes it.
pub fn ahash_bytes(bytes: &[u8]) -> Result<PHash64, DedupError> {
    let img = image::load_from_memory(bytes).map_err(|e| DedupError::Decode(e.to_string()))?;
    ahash(&img)
}

pub fn ahash_file(path: &std::path::Path) -> Result<PHash64, DedupError> {
    let bytes = std::fs::read(path)
        .map_err(|e| DedupError::Decode(format!("{}: {e}", path.display())))?;
    ahash_bytes(&bytes)
}
