//! Exclusion of centres whose arcs run into a primary.
//!
//! A resonant orbit through `C = (ξ₀, φ₀)` passes through a primary exactly
//! when `G± = (P(φ₀) ± Q(ξ₀)) / T₁` lands in a finite set `S` of rationals,
//! where `P` and `Q` are the times needed to reach `φ₀` and `ξ₀` from the axis.

use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::Serialize;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::geometry::EllipticPoint;
use crate::periods::period_t1;
use crate::rational::ResonanceClass;
use crate::special::adaptive_quadrature;

const QUADRATURE_TOL: f64 = 1e-12;

/// `S = {j/2 − iq} ∪ {j/2 − q(i′ ± 1/2)}` for `0 ≤ i < n/2`,
/// `0 ≤ i′ < (n+1)/2`, `0 ≤ j ≤ m`.
pub fn rational_set_s(q: ResonanceClass) -> BTreeSet<Ratio<i64>> {
    let (m, n) = (q.m() as i64, q.n() as i64);
    let mut s = BTreeSet::new();
    for j in 0..=m {
        let mut i = 0;
        while 2 * i < n {
            s.insert(Ratio::new(j * n - 2 * i * m, 2 * n));
            i += 1;
        }
        let mut ip = 0;
        while 2 * ip < n + 1 {
            for pm in [-1, 1] {
                s.insert(Ratio::new(j * n - m * (2 * ip + pm), 2 * n));
            }
            ip += 1;
        }
    }
    s
}

/// Outcome of the `G±` test for one centre and class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionTest {
    pub g_plus: f64,
    pub g_minus: f64,
    /// `P(φ₀)`, time from `φ = 0` to `φ₀`.
    pub p: f64,
    /// `Q(ξ₀)`, time from `ξ = 0` to `ξ₀`.
    pub q_integral: f64,
    pub t1: f64,
    /// Distance of each `G` to the nearest element of `S`.
    pub gap_plus: f64,
    pub gap_minus: f64,
    pub nearest_plus: String,
    pub nearest_minus: String,
    pub s_set: Vec<String>,
    pub delta: f64,
    pub safe: bool,
}

fn nearest(g: f64, s: &BTreeSet<Ratio<i64>>) -> (f64, Ratio<i64>) {
    s.iter()
        .map(|r| ((g - *r.numer() as f64 / *r.denom() as f64).abs(), *r))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("S is never empty")
}

/// Evaluate `G±` by quadrature and compare with `S` at margin `delta`.
///
/// Uses the centre coordinates exactly as given; `prm.a1()` must be the
/// resonant `Â₁` of `prm.q()`.
pub fn primary_collision_test(
    centre: &EllipticPoint,
    prm: &Params,
    delta: f64,
) -> Result<CollisionTest> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!(
            "exclusion margin must be positive, got {delta}"
        )));
    }
    let q = prm
        .q()
        .ok_or_else(|| Error::domain("the collision test needs a resonance class"))?;
    let (a, b, a1) = (prm.a(), prm.beta(), prm.a1());
    let scale = 0.5 / a.sqrt();

    let p = scale
        * adaptive_quadrature(
            |phi: f64| 1.0 / (b * a1 * phi.cos().powi(2) + a1).sqrt(),
            0.0,
            centre.phi,
            QUADRATURE_TOL,
        )?
        .value;
    let ch0 = centre.xi.cosh();
    if !(ch0 - b * a1 * ch0 * ch0 - a1 > 0.0) {
        return Err(Error::Placement(format!(
            "xi0 = {} is not inside the turning-point ellipse",
            centre.xi
        )));
    }
    let q_integral = scale
        * adaptive_quadrature(
            |xi: f64| {
                let c = xi.cosh();
                1.0 / (c - b * a1 * c * c - a1).sqrt()
            },
            0.0,
            centre.xi,
            QUADRATURE_TOL,
        )
        .map_err(|e| match e {
            Error::Accuracy {
                message,
                best_estimate,
            } => Error::Accuracy {
                message: format!("Q integral near the turning point: {message}"),
                best_estimate,
            },
            other => other,
        })?
        .value;

    let t1 = period_t1(b, a1, a)?;
    let g_plus = (p + q_integral) / t1;
    let g_minus = (p - q_integral) / t1;
    let s = rational_set_s(q);
    let (gap_plus, np) = nearest(g_plus, &s);
    let (gap_minus, nm) = nearest(g_minus, &s);
    Ok(CollisionTest {
        g_plus,
        g_minus,
        p,
        q_integral,
        t1,
        gap_plus,
        gap_minus,
        nearest_plus: np.to_string(),
        nearest_minus: nm.to_string(),
        s_set: s.iter().map(|r| r.to_string()).collect(),
        delta,
        safe: gap_plus > delta && gap_minus > delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn s_for_q1() {
        let s = rational_set_s(ResonanceClass::integer(1).unwrap());
        let expect: BTreeSet<_> = [r(-1, 2), r(0, 1), r(1, 2), r(1, 1)].into_iter().collect();
        assert_eq!(s, expect);
    }

    #[test]
    fn s_for_q2() {
        let s = rational_set_s(ResonanceClass::integer(2).unwrap());
        let expect: BTreeSet<_> = [
            r(-1, 1),
            r(-1, 2),
            r(0, 1),
            r(1, 2),
            r(1, 1),
            r(3, 2),
            r(2, 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(s, expect);
    }

    #[test]
    fn s_is_bounded() {
        for (m, n) in [(1, 2), (3, 2), (2, 5), (7, 3), (1, 64)] {
            let q = ResonanceClass::new(m, n).unwrap();
            let bound = ((n as usize).div_ceil(2) + n as usize + 1) * (m as usize + 1) * 2;
            assert!(rational_set_s(q).len() <= bound);
        }
    }

    #[test]
    fn axis_centre_has_no_q() {
        let prm = Params::new(1.0, 0.05, 0.3)
            .unwrap()
            .with_class(ResonanceClass::integer(1).unwrap());
        let t = primary_collision_test(&EllipticPoint::new(0.0, 1.0), &prm, 1e-4).unwrap();
        assert_eq!(t.q_integral, 0.0);
        assert_eq!(t.g_plus, t.g_minus);
    }
}
