//! Branch-free sine/cosine for the phase kernels.
//!
//! Straight-line arithmetic only, so loops over fixed-size lane arrays
//! auto-vectorize. Accurate to about one ulp for `|x| <= FAST_LIMIT`; larger
//! arguments go through the standard library.

#![allow(clippy::excessive_precision)]

use std::f64::consts::FRAC_2_PI;

/// Largest argument handled by the polynomial path.
pub const FAST_LIMIT: f64 = 1.0e5;

// pi/2 split into three pieces; the first two have trailing zero bits so
// k * piece is exact for |k| < 2^20.
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;

// 1.5 * 2^52: adding and subtracting rounds to the nearest integer.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

const SIGN: u64 = 1 << 63;

/// `(sin x, cos x)` by quadrant reduction and minimax polynomials.
/// Only meaningful for `|x| <= FAST_LIMIT`.
#[inline(always)]
pub fn sin_cos_poly(x: f64) -> (f64, f64) {
    let shifted = x * FRAC_2_PI + ROUND_MAGIC;
    let quadrant = shifted.to_bits();
    let k = shifted - ROUND_MAGIC;
    let r = ((x - k * PIO2_1) - k * PIO2_2) - k * PIO2_3;

    let z = r * r;
    let s = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    let c = 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));

    // Quadrant q: sin = [s, c, -s, -c][q], cos = [c, -s, -c, s][q].
    let swap = quadrant & 1;
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let sin_src = sb ^ ((sb ^ cb) & swap.wrapping_neg());
    let cos_src = cb ^ ((sb ^ cb) & swap.wrapping_neg());
    let sin_neg = (quadrant & 2) << 62;
    let cos_neg = (quadrant.wrapping_add(1) & 2) << 62;
    (
        f64::from_bits(sin_src ^ (sin_neg & SIGN)),
        f64::from_bits(cos_src ^ (cos_neg & SIGN)),
    )
}

/// `(sin x, cos x)` for any finite `x`.
#[inline(always)]
pub fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() <= FAST_LIMIT {
        sin_cos_poly(x)
    } else {
        x.sin_cos()
    }
}
