//! Complete elliptic integral of the first kind and adaptive Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};

/// Outcome of [`adaptive_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// Absolute error estimate, summed over the final partition.
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Complete elliptic integral `K(m) = ∫₀¹ dv / √((1−v²)(1−m v²))`, parameter `m = κ²`.
pub fn complete_elliptic_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::domain(format!(
            "complete elliptic integral needs 0 <= m < 1, got m = {m}"
        )));
    }
    Ok(FRAC_PI_2 / agm(1.0, (1.0 - m).sqrt()))
}

/// `K` expressed through the complementary parameter `m1 = 1 − m`.
///
/// Passing `m1` directly keeps full relative accuracy when `m` is within a few
/// ulps of 1, where `1 − m` can no longer be formed from `m`.
pub fn complete_elliptic_k_complement(m1: f64) -> Result<f64> {
    if !(m1 > 0.0 && m1 <= 1.0) {
        return Err(Error::domain(format!(
            "complementary parameter must satisfy 0 < 1-m <= 1, got {m1}"
        )));
    }
    Ok(FRAC_PI_2 / agm(1.0, m1.sqrt()))
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 2.0 * f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

// Kronrod 15-point abscissae (positive half) with the embedded 7-point Gauss rule
// sitting on the odd-indexed nodes.
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Maximum number of subintervals before giving up.
pub const MAX_SUBINTERVALS: usize = 4000;

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        finite &= pair.is_finite();
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    if !finite {
        return Err(Error::Accuracy {
            message: format!("integrand not finite on [{lo}, {hi}]"),
            best_estimate: f64::NAN,
        });
    }
    Ok(Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration of `f` over `[lo, hi]`.
///
/// Stops once the summed error estimate is below `max(tol, tol·|value|)`.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    if lo == hi {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let (a, b, sign) = if lo < hi {
        (lo, hi, 1.0)
    } else {
        (hi, lo, -1.0)
    };

    let first = kronrod_panel(&f, a, b)?;
    let mut evaluations = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while error > tol.max(tol * value.abs()) {
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(Error::Accuracy {
                message: format!(
                    "quadrature did not converge after {MAX_SUBINTERVALS} subintervals (error {error:e})"
                ),
                best_estimate: sign * value,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Accuracy {
                message: "quadrature subinterval reached floating-point resolution".into(),
                best_estimate: sign * value,
            });
        }
        let left = kronrod_panel(&f, worst.lo, mid)?;
        let right = kronrod_panel(&f, mid, worst.hi)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift of the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadratureResult {
        value: sign * value,
        error_estimate: error,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn k_at_zero_is_half_pi() {
        assert_eq!(complete_elliptic_k(0.0).unwrap(), FRAC_PI_2);
    }

    #[test]
    fn k_domain() {
        assert!(matches!(complete_elliptic_k(1.0), Err(Error::Domain(_))));
        assert!(matches!(complete_elliptic_k(-0.1), Err(Error::Domain(_))));
        let near = complete_elliptic_k(0.999_999).unwrap();
        assert!(near.is_finite() && near > 7.0);
    }

    #[test]
    fn complement_form_matches_direct() {
        for m in [0.0, 0.25, 0.5, 0.9, 0.999] {
            let a = complete_elliptic_k(m).unwrap();
            let b = complete_elliptic_k_complement(1.0 - m).unwrap();
            assert!((a - b).abs() <= 1e-15 * a);
        }
        // log-asymptotics K ≈ ln(4/√m1) for tiny m1
        let m1 = 1e-200;
        let k = complete_elliptic_k_complement(m1).unwrap();
        assert!((k - (4.0 / m1.sqrt()).ln()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        let r = adaptive_quadrature(|_| 1.0, 0.0, 2.0 * PI, 1e-12).unwrap();
        assert!((r.value - 2.0 * PI).abs() <= 1e-12);
        assert!(r.error_estimate >= 0.0 && r.evaluations >= 1);

        let r = adaptive_quadrature(f64::cos, 0.0, FRAC_PI_2, 1e-12).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-12);

        let (beta, a1) = (0.0, 0.25);
        let r = adaptive_quadrature(
            |phi: f64| 1.0 / (beta * a1 * phi.cos().powi(2) + a1).sqrt(),
            0.0,
            FRAC_PI_2,
            1e-12,
        )
        .unwrap();
        assert!((r.value - PI).abs() <= 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = adaptive_quadrature(f64::cos, FRAC_PI_2, 0.0, 1e-12).unwrap();
        assert!((r.value + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        // 1/x on (0,1] diverges; refinement piles up at the origin until it gives up.
        let err = adaptive_quadrature(|x: f64| 1.0 / x, 0.0, 1.0, 1e-14).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn k_strictly_increasing() {
        let mut prev = complete_elliptic_k(0.0).unwrap();
        for i in 1..1000 {
            let k = complete_elliptic_k(i as f64 / 1000.0).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }
}
