//! Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
//!
//! Used as the independent oracle for the closed-form torque. Intervals are
//! bisected until each piece's Kronrod/Gauss difference falls below its
//! share of the requested relative tolerance.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// One 15-point Kronrod estimate with its embedded 7-point Gauss estimate.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, gauss * half)
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// `max_depth` bounds the bisection depth of any single branch.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let (whole, whole_gauss) = gk15(&f, a, b);
    let scale = whole.abs();
    let mut out = QuadResult {
        value: 0.0,
        error_estimate: 0.0,
        evaluations: 15,
    };
    // Explicit stack instead of recursion: (lo, hi, kronrod, gauss, depth).
    let mut stack = vec![(a, b, whole, whole_gauss, 0u32)];
    let width = (b - a).abs();
    while let Some((lo, hi, k, g, depth)) = stack.pop() {
        let err = (k - g).abs();
        let share = rel_tol * scale * (hi - lo).abs() / width;
        if err <= share || err <= f64::EPSILON * 50.0 * k.abs() || scale == 0.0 {
            out.value += k;
            out.error_estimate += err;
            continue;
        }
        if depth >= max_depth {
            return Err(Error::Quadrature {
                a: lo,
                b: hi,
                estimate: k,
                error: err,
            });
        }
        let mid = 0.5 * (lo + hi);
        let (kl, gl) = gk15(&f, lo, mid);
        let (kr, gr) = gk15(&f, mid, hi);
        out.evaluations += 30;
        stack.push((mid, hi, kr, gr, depth + 1));
        stack.push((lo, mid, kl, gl, depth + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-14, 30).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn transcendental_against_closed_form() {
        let r = integrate(f64::exp, 0.0, 1.0, 1e-13, 30).unwrap();
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_refines() {
        // 1/(1.001 - x)^2 on [0, 1]: exact 1/0.001 - 1/1.001.
        let exact = 1.0 / 0.001 - 1.0 / 1.001;
        let r = integrate(|x| 1.0 / (1.001 - x).powi(2), 0.0, 1.0, 1e-12, 60).unwrap();
        assert!(((r.value - exact) / exact).abs() < 1e-11, "{:?}", r);
        assert!(r.evaluations > 15);
    }

    #[test]
    fn zero_integrand() {
        let r = integrate(|_| 0.0, 0.0, 1.0, 1e-12, 30).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn depth_limit_is_reported() {
        let err = integrate(|x: f64| 1.0 / (1.0 - x).abs().max(1e-300).sqrt().powi(3), 0.0, 1.0, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
