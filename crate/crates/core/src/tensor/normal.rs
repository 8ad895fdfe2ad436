//! Raw 64-bit draws to standard-normal values.
//!
//! Each output consumes exactly one `u64` from the generator. The top 52 bits
//! become a uniform `u = (k + 0.5) / 2^52` strictly inside `(0, 1)`, which is
//! mapped through the inverse normal CDF using Wichura's AS241 (PPND16)
//! rational approximations, accurate to about 1e-16. The only transcendental
//! calls go through `libm`, so the transform is bit-reproducible on every
//! platform.

// Coefficients are quoted to the published 20 digits.
#![allow(clippy::excessive_precision)]

const SPLIT1: f64 = 0.425;
const SPLIT2: f64 = 5.0;
const CONST1: f64 = 0.180625;
const CONST2: f64 = 1.6;

const A: [f64; 8] = [
    3.387_132_872_796_366_608_0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083_0e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061_0e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561_0e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_90,
    5.769_497_221_460_691_405_50,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_70e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_40e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_40,
    6.897_673_349_851_000_045_50e-1,
    1.481_039_764_274_800_745_90e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946_00e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_20,
    5.463_784_911_164_114_369_90,
    1.784_826_539_917_291_335_80,
    2.965_605_718_285_048_912_30e-1,
    2.653_218_952_657_612_309_30e-2,
    1.242_660_947_388_078_438_60e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_90e-1,
    1.369_298_809_227_358_053_10e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591_00e-4,
    1.846_318_317_510_054_681_80e-5,
    1.421_511_758_316_445_888_70e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[inline(always)]
fn horner(coeffs: &[f64; 8], x: f64) -> f64 {
    let mut acc = coeffs[7];
    for &c in coeffs[..7].iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Maps a raw draw to the open unit interval.
///
/// Equal to `((raw >> 12) as f64 + 0.5) / 2^52`, built from the exponent bits
/// of `1.0` so the conversion vectorizes; every step is exact.
#[inline(always)]
pub fn unit_open(raw: u64) -> f64 {
    const HALF_ULP: f64 = 1.0 / (1u64 << 53) as f64;
    let one_plus = f64::from_bits((raw >> 12) | 0x3ff0_0000_0000_0000);
    (one_plus - 1.0) + HALF_ULP
}

/// Inverse of the standard normal CDF for `p` in `(0, 1)`.
#[inline]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= SPLIT1 {
        let r = CONST1 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = libm::sqrt(-libm::log(tail));
    let value = if r <= SPLIT2 {
        r -= CONST2;
        horner(&C, r) / horner(&D, r)
    } else {
        r -= SPLIT2;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

#[inline(always)]
pub fn standard_normal(raw: u64) -> f64 {
    inverse_normal_cdf(unit_open(raw))
}

#[inline(always)]
fn central(p: f64) -> f64 {
    let q = p - 0.5;
    let r = CONST1 - q * q;
    q * horner(&A, r) / horner(&B, r)
}

/// Bulk [`standard_normal`]; bit-identical to the scalar path.
///
/// Evaluates the central rational for every element in a branch-free pass the
/// compiler can vectorize, then redoes the roughly 15% of draws that fall in
/// the tails.
pub fn fill_standard_normal(raw: &[u64], out: &mut [f64]) {
    assert_eq!(raw.len(), out.len());
    for (o, &x) in out.iter_mut().zip(raw) {
        *o = central(unit_open(x));
    }
    for (o, &x) in out.iter_mut().zip(raw) {
        let p = unit_open(x);
        if (p - 0.5).abs() > SPLIT1 {
            *o = inverse_normal_cdf(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    // Quantiles computed with mpmath at 40 significant digits.
    const QUANTILES: [(f64, f64); 16] = [
        (1e-100, -21.273453560965324295),
        (1e-30, -11.464024688443377438),
        (1e-12, -7.0344838253011319298),
        (1e-6, -4.7534243088228989482),
        (0.0025, -2.8070337683438041172),
        (0.01, -2.3263478740408411009),
        (0.025, -1.9599639845400542355),
        (0.075, -1.4395314709384559153),
        (0.1, -1.281551565544600467),
        (0.3, -0.52440051270804078404),
        (0.5, 0.0),
        (0.6, 0.2533471031357997988),
        (0.9, 1.281551565544600467),
        (0.975, 1.9599639845400542355),
        (0.999, 3.0902323061678135415),
        (0.999999, 4.7534243088228989482),
    ];

    #[test]
    fn matches_reference_quantiles() {
        for (p, expect) in QUANTILES {
            let x = inverse_normal_cdf(p);
            // Above 0.5 the upper tail 1 - p is itself rounded in f64.
            let tol = 1e-13 * expect.abs().max(1.0) + if p > 0.5 { 1e-10 } else { 0.0 };
            assert!((x - expect).abs() <= tol, "p={p} got {x} want {expect}");
        }
    }

    #[test]
    fn unit_open_matches_integer_conversion() {
        let scale = 1.0 / (1u64 << 52) as f64;
        for raw in [0u64, 1, 4095, 4096, 1 << 63, u64::MAX, 0x0123_4567_89ab_cdef] {
            assert_eq!(unit_open(raw), ((raw >> 12) as f64 + 0.5) * scale);
        }
    }

    #[test]
    fn unit_open_never_hits_endpoints() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
        assert!(standard_normal(0).is_finite());
        assert!(standard_normal(u64::MAX).is_finite());
    }

    #[test]
    fn bulk_path_is_bit_identical() {
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let raw: Vec<u64> = (0..10_000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                state
            })
            .chain([0, u64::MAX, 1 << 63])
            .collect();
        let mut out = vec![0f64; raw.len()];
        fill_standard_normal(&raw, &mut out);
        for (&x, &o) in raw.iter().zip(&out) {
            assert_eq!(standard_normal(x).to_bits(), o.to_bits());
        }
    }

    #[test]
    fn odd_symmetry() {
        for i in 1..500 {
            let p = i as f64 / 1000.0;
            assert!((inverse_normal_cdf(p) + inverse_normal_cdf(1.0 - p)).abs() < 1e-12);
        }
    }
}
