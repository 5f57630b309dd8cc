//! Elliptic coordinates `x + iy = cosh(ξ + iφ)` on the cylinder `ℝ × S¹`.
//!
//! The map is two-to-one away from the primaries `C₁ = (1,0)`, `C₂ = (−1,0)`,
//! which are its ramification points `(0,0)` and `(0,π)`. The points
//! `(ξ,φ)` and `(−ξ,−φ)` always have the same image.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::adaptive_quadrature;

/// Tolerance used when comparing angles modulo `2π`.
pub const ANGLE_TOL: f64 = 1e-10;

/// `U` counts as singular below this `det U`; `sin π` is only zero to ~1e−16.
const SINGULAR_METRIC: f64 = 1e-30;

/// Reduce an angle to `[0, 2π)`.
pub fn normalize_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed distance from `a` to `b` on the circle, in `(−π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
}

impl CartesianPoint {
    pub const C1: CartesianPoint = CartesianPoint { x: 1.0, y: 0.0 };
    pub const C2: CartesianPoint = CartesianPoint { x: -1.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A point on the cylinder, `phi` kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticPoint {
    pub xi: f64,
    pub phi: f64,
}

impl EllipticPoint {
    pub fn new(xi: f64, phi: f64) -> Self {
        Self {
            xi,
            phi: normalize_angle(phi),
        }
    }

    /// The other preimage of the same Cartesian point.
    pub fn mirror(&self) -> Self {
        Self::new(-self.xi, -self.phi)
    }

    /// Equality on the cylinder, angles compared modulo `2π`.
    pub fn same_chart_point(&self, other: &EllipticPoint, tol: f64) -> bool {
        (self.xi - other.xi).abs() <= tol && angle_difference(self.phi, other.phi).abs() <= tol
    }

    /// Equality of Cartesian images: either representation matches.
    pub fn same_point(&self, other: &EllipticPoint, tol: f64) -> bool {
        self.same_chart_point(other, tol) || self.same_chart_point(&other.mirror(), tol)
    }

    /// `cosh²ξ − cos²φ`, written as `sinh²ξ + sin²φ` to avoid cancellation.
    ///
    /// This is both the time-scaling factor `dt/dτ` and `det U`.
    pub fn metric_factor(&self) -> f64 {
        let s = self.xi.sinh();
        let p = self.phi.sin();
        s * s + p * p
    }

    /// Distance to `C₁`, which equals `cosh ξ − cos φ`.
    pub fn distance_to_c1(&self) -> f64 {
        self.xi.cosh() - self.phi.cos()
    }

    /// Distance to `C₂`, which equals `cosh ξ + cos φ`.
    pub fn distance_to_c2(&self) -> f64 {
        self.xi.cosh() + self.phi.cos()
    }

    pub fn is_primary(&self, tol: f64) -> bool {
        self.metric_factor() <= tol * tol
    }
}

pub fn elliptic_to_cartesian(p: &EllipticPoint) -> CartesianPoint {
    CartesianPoint {
        x: p.xi.cosh() * p.phi.cos(),
        y: p.xi.sinh() * p.phi.sin(),
    }
}

/// Both preimages of a Cartesian point, the first one with `ξ ≥ 0`.
///
/// Uses `acosh z = 2 ln(√((z+1)/2) + √((z−1)/2))`, which stays accurate next to
/// the ramification points because `√(z∓1)` is formed directly.
pub fn cartesian_to_elliptic(p: &CartesianPoint) -> (EllipticPoint, EllipticPoint) {
    let z = Complex64::new(p.x, p.y);
    let w = 2.0 * (((z + 1.0) * 0.5).sqrt() + ((z - 1.0) * 0.5).sqrt()).ln();
    let (mut xi, mut phi) = (w.re, w.im);
    if xi < 0.0 {
        xi = -xi;
        phi = -phi;
    }
    if xi == 0.0 {
        xi = 0.0; // drop a negative zero
    }
    let first = EllipticPoint::new(xi, phi);
    (first, first.mirror())
}

/// The Jacobian `U(ξ,φ)` of the elliptic-to-Cartesian map, row-major.
pub fn velocity_matrix(p: &EllipticPoint) -> [[f64; 2]; 2] {
    let (sh, ch) = (p.xi.sinh(), p.xi.cosh());
    let (s, c) = p.phi.sin_cos();
    [[sh * c, -ch * s], [ch * s, sh * c]]
}

/// Map an elliptic velocity `(ξ′, φ′)` to the Cartesian one, `U(ξ,φ)·(ξ′,φ′)`.
pub fn velocity_to_cartesian(p: &EllipticPoint, v: [f64; 2]) -> Result<[f64; 2]> {
    if p.metric_factor() <= SINGULAR_METRIC {
        return Err(Error::singular(format!(
            "velocity map is singular at the primary ({}, {})",
            p.xi, p.phi
        )));
    }
    let u = velocity_matrix(p);
    Ok([
        u[0][0] * v[0] + u[0][1] * v[1],
        u[1][0] * v[0] + u[1][1] * v[1],
    ])
}

/// Inverse of [`velocity_to_cartesian`]. `U` is a scaled rotation, so the
/// inverse is its transpose divided by `det U`.
pub fn velocity_to_elliptic(p: &EllipticPoint, v: [f64; 2]) -> Result<[f64; 2]> {
    let det = p.metric_factor();
    if det <= SINGULAR_METRIC {
        return Err(Error::singular(format!(
            "velocity map is singular at the primary ({}, {})",
            p.xi, p.phi
        )));
    }
    let u = velocity_matrix(p);
    Ok([
        (u[0][0] * v[0] + u[1][0] * v[1]) / det,
        (u[0][1] * v[0] + u[1][1] * v[1]) / det,
    ])
}

/// Physical time `t(τ) = ∫₀^τ (cosh²ξ − cos²φ) dτ′` at each of the requested
/// regularized times, for a path given as a function of `τ`.
///
/// `taus` must be non-decreasing and start at the path's origin; the first
/// entry maps to `t = 0`.
pub fn physical_time_of<P>(path: P, taus: &[f64], tol: f64) -> Result<Vec<f64>>
where
    P: Fn(f64) -> EllipticPoint,
{
    let mut out = Vec::with_capacity(taus.len());
    let Some(&tau0) = taus.first() else {
        return Ok(out);
    };
    check_off_primary(&path(tau0), tau0)?;
    out.push(0.0);
    let mut t = 0.0;
    for w in taus.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b < a {
            return Err(Error::domain("regularized times must be non-decreasing"));
        }
        check_off_primary(&path(b), b)?;
        if b > a {
            let r = adaptive_quadrature(|s| path(s).metric_factor(), a, b, tol)?;
            t += r.value;
        }
        out.push(t);
    }
    Ok(out)
}

fn check_off_primary(p: &EllipticPoint, tau: f64) -> Result<()> {
    if p.metric_factor() <= SINGULAR_METRIC {
        return Err(Error::singular(format!(
            "path sits on a primary at tau = {tau}; time reparametrization degenerates"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn primaries_are_ramification_points() {
        let c1 = elliptic_to_cartesian(&EllipticPoint::new(0.0, 0.0));
        assert_eq!((c1.x, c1.y), (1.0, 0.0));
        let c2 = elliptic_to_cartesian(&EllipticPoint::new(0.0, PI));
        assert!(close(c2.x, -1.0, 1e-15) && close(c2.y, 0.0, 1e-15));
        let (a, b) = cartesian_to_elliptic(&CartesianPoint::C1);
        assert!(a.same_chart_point(&EllipticPoint::new(0.0, 0.0), 1e-12));
        assert!(b.same_chart_point(&EllipticPoint::new(0.0, 0.0), 1e-12));
    }

    #[test]
    fn y_axis_points() {
        let xi: f64 = 0.7;
        let p = elliptic_to_cartesian(&EllipticPoint::new(xi, FRAC_PI_2));
        assert!(close(p.x, 0.0, 1e-15) && close(p.y, xi.sinh(), 1e-15));
        let (a, b) = cartesian_to_elliptic(&CartesianPoint::new(0.0, xi.sinh()));
        assert!(a.same_chart_point(&EllipticPoint::new(xi, FRAC_PI_2), 1e-12));
        assert!(b.same_chart_point(&EllipticPoint::new(-xi, 3.0 * FRAC_PI_2), 1e-12));
    }

    #[test]
    fn inverts_generic_point() {
        let p = CartesianPoint::new(1f64.cosh() * 1f64.cos(), 1f64.sinh() * 1f64.sin());
        let (a, b) = cartesian_to_elliptic(&p);
        assert!(a.same_chart_point(&EllipticPoint::new(1.0, 1.0), 1e-12));
        assert!(b.same_chart_point(&EllipticPoint::new(-1.0, TAU - 1.0), 1e-12));
    }

    #[test]
    fn near_ramification_stays_accurate() {
        // 1e-12 away from C1 along the y-direction: ξ and φ are both O(1e-6).
        let p = CartesianPoint::new(1.0, 1e-12);
        let (a, _) = cartesian_to_elliptic(&p);
        let back = elliptic_to_cartesian(&a);
        assert!(close(back.x, 1.0, 1e-15) && close(back.y, 1e-12, 1e-20));
    }

    #[test]
    fn velocity_matrix_properties() {
        let p = EllipticPoint::new(0.4, 2.1);
        let q = p.mirror();
        let v = [0.3, -1.7];
        let a = velocity_to_cartesian(&p, v).unwrap();
        let b = velocity_to_cartesian(
            &EllipticPoint {
                xi: -p.xi,
                phi: -p.phi,
            },
            v,
        )
        .unwrap();
        assert!(close(a[0], -b[0], 1e-15) && close(a[1], -b[1], 1e-15));
        // q is the normalized version of (−ξ,−φ); U depends on φ through sin/cos only.
        let c = velocity_to_cartesian(&q, v).unwrap();
        assert!(close(b[0], c[0], 1e-14) && close(b[1], c[1], 1e-14));

        let u = velocity_matrix(&p);
        let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
        let direct = p.xi.cosh().powi(2) - p.phi.cos().powi(2);
        assert!(close(det, direct, 1e-14));
        assert!(close(det, p.metric_factor(), 1e-14));

        let w = velocity_to_elliptic(&p, a).unwrap();
        assert!(close(w[0], v[0], 1e-14) && close(w[1], v[1], 1e-14));
    }

    #[test]
    fn velocity_singular_at_primary() {
        assert!(matches!(
            velocity_to_cartesian(&EllipticPoint::new(0.0, 0.0), [1.0, 1.0]),
            Err(Error::Singularity(_))
        ));
        assert!(matches!(
            velocity_to_cartesian(&EllipticPoint::new(0.0, PI), [1.0, 1.0]),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn primary_distances_closed_form() {
        let p = EllipticPoint::new(0.3, 1.2);
        let c = elliptic_to_cartesian(&p);
        assert!(close(
            p.distance_to_c1(),
            c.distance(&CartesianPoint::C1),
            1e-14
        ));
        assert!(close(
            p.distance_to_c2(),
            c.distance(&CartesianPoint::C2),
            1e-14
        ));
    }

    #[test]
    fn physical_time_constant_path() {
        let p = EllipticPoint::new(1.0, FRAC_PI_2);
        let taus = [0.0, 0.5, 1.0, 2.5];
        let t = physical_time_of(|_| p, &taus, 1e-13).unwrap();
        assert_eq!(t[0], 0.0);
        for (tau, ti) in taus.iter().zip(&t) {
            assert!(close(*ti, tau * 1f64.cosh().powi(2), 1e-12));
        }
    }

    #[test]
    fn physical_time_rejects_primary() {
        let err = physical_time_of(|_| EllipticPoint::new(0.0, 0.0), &[0.0, 1.0], 1e-10);
        assert!(matches!(err, Err(Error::Singularity(_))));
    }

    #[test]
    fn angle_helpers() {
        assert!(close(normalize_angle(-0.1), TAU - 0.1, 1e-15));
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!(close(angle_difference(0.1, TAU - 0.1), 0.2, 1e-15));
        assert!(EllipticPoint::new(0.2, 1e-12)
            .same_chart_point(&EllipticPoint::new(0.2, TAU - 1e-12), ANGLE_TOL));
    }
}
