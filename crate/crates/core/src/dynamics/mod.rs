//! Regularized two-centre dynamics with an optional third attracting centre.
//!
//! In elliptic coordinates and the time `dτ = dt / (cosh²ξ − cos²φ)`, orbits
//! of energy `E` are the zero level of
//!
//! ```text
//! 𝓗ε = (ξ′² + φ′²)/2 − 2a cosh ξ − (E − εV)(cosh²ξ − cos²φ)
//! ```
//!
//! which has no singularity at the primaries. For `ε = 0` the ξ and φ motions
//! decouple into a double well and a pendulum.

mod integrator;
mod symplectic;
mod tableau;

pub use integrator::{
    integrate, integrate_with, Direction, EventKind, EventRecord, EventSpec, IntegratorOptions,
    Trajectory, TrajectorySample,
};
pub use symplectic::integrate_symplectic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cartesian_to_elliptic, elliptic_to_cartesian, CartesianPoint, EllipticPoint,
};
use crate::rational::ResonanceClass;

/// The perturbing centre `C`, kept in both coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centre {
    pub cartesian: CartesianPoint,
    /// Representation used to seed orbits; the mirror `(−ξ₀,−φ₀)` is the same point.
    pub elliptic: EllipticPoint,
}

/// Distance below which a point counts as sitting on a primary.
const PRIMARY_TOL: f64 = 1e-12;

impl Centre {
    pub fn from_cartesian(p: CartesianPoint) -> Result<Self> {
        let (elliptic, _) = cartesian_to_elliptic(&p);
        Self::checked(p, elliptic)
    }

    pub fn from_elliptic(p: EllipticPoint) -> Result<Self> {
        Self::checked(elliptic_to_cartesian(&p), p)
    }

    fn checked(cartesian: CartesianPoint, elliptic: EllipticPoint) -> Result<Self> {
        if cartesian.distance(&CartesianPoint::C1) <= PRIMARY_TOL
            || cartesian.distance(&CartesianPoint::C2) <= PRIMARY_TOL
        {
            return Err(Error::domain(
                "the third centre cannot coincide with a primary",
            ));
        }
        Ok(Self {
            cartesian,
            elliptic,
        })
    }
}

/// Physical and regime parameters.
///
/// `a` is the intensity of the primaries, `beta = |E|/E₁`, `a1 = E₁/2a`, and the
/// energy is always `E = −2aβA₁`. `eps` is the intensity of the third centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct Params {
    a: f64,
    beta: f64,
    a1: f64,
    q: Option<ResonanceClass>,
    eps: f64,
    centre: Option<Centre>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    a: f64,
    beta: f64,
    a1: f64,
    q: Option<ResonanceClass>,
    eps: f64,
    energy: f64,
    centre: Option<Centre>,
}

impl From<Params> for ParamsRecord {
    fn from(p: Params) -> Self {
        Self {
            a: p.a,
            beta: p.beta,
            a1: p.a1,
            q: p.q,
            eps: p.eps,
            energy: p.energy(),
            centre: p.centre,
        }
    }
}

impl TryFrom<ParamsRecord> for Params {
    type Error = Error;

    fn try_from(r: ParamsRecord) -> Result<Self> {
        let mut p = Params::new(r.a, r.beta, r.a1)?;
        p.q = r.q;
        if let Some(c) = r.centre {
            p = p.with_centre(c);
        }
        p.with_eps(r.eps)
    }
}

/// Check the admissibility region `β ∈ [0,1)`, `0 < A₁ < 1/(1+β)` (which also
/// gives `2βA₁ < 1`).
pub fn check_regime(beta: f64, a1: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::domain(format!(
            "beta must lie in [0, 1), got {beta}"
        )));
    }
    if !(a1 > 0.0 && a1 < 1.0 / (1.0 + beta)) {
        return Err(Error::domain(format!(
            "A1 must lie in (0, 1/(1+beta)) = (0, {}), got {a1}",
            1.0 / (1.0 + beta)
        )));
    }
    if 2.0 * beta * a1 >= 1.0 {
        return Err(Error::domain(format!(
            "2*beta*A1 must be < 1, got {}",
            2.0 * beta * a1
        )));
    }
    Ok(())
}

impl Params {
    pub fn new(a: f64, beta: f64, a1: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!(
                "primary intensity a must be positive, got {a}"
            )));
        }
        check_regime(beta, a1)?;
        Ok(Self {
            a,
            beta,
            a1,
            q: None,
            eps: 0.0,
            centre: None,
        })
    }

    pub fn with_class(mut self, q: ResonanceClass) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_centre(mut self, centre: Centre) -> Self {
        self.centre = Some(centre);
        self
    }

    /// Switch on the third centre. Requires a centre when `eps > 0`.
    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::domain(format!(
                "eps must be non-negative, got {eps}"
            )));
        }
        if eps > 0.0 && self.centre.is_none() {
            return Err(Error::domain("eps > 0 needs a third-centre position"));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn q(&self) -> Option<ResonanceClass> {
        self.q
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn centre(&self) -> Option<&Centre> {
        self.centre.as_ref()
    }

    /// `E = −2aβA₁`.
    pub fn energy(&self) -> f64 {
        -2.0 * self.a * self.beta * self.a1
    }

    /// `E₁ = 2aA₁`.
    pub fn e1(&self) -> f64 {
        2.0 * self.a * self.a1
    }
}

/// A phase-space point of the regularized system; momenta equal `(ξ′, φ′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticState {
    pub point: EllipticPoint,
    pub xi_prime: f64,
    pub phi_prime: f64,
}

impl EllipticState {
    pub fn new(xi: f64, phi: f64, xi_prime: f64, phi_prime: f64) -> Self {
        Self {
            point: EllipticPoint::new(xi, phi),
            xi_prime,
            phi_prime,
        }
    }

    /// Build from a raw `[ξ, φ, ξ′, φ′]` vector with an unwrapped angle.
    pub(crate) fn from_raw(y: &[f64; 4]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    pub(crate) fn to_raw(self) -> [f64; 4] {
        [self.point.xi, self.point.phi, self.xi_prime, self.phi_prime]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.xi_prime, self.phi_prime]
    }
}

/// Potential of the primaries, `W = −a/|z − C₂| − a/|z − C₁|`.
pub fn potential_w(p: &CartesianPoint, a: f64) -> Result<f64> {
    let r1 = p.distance(&CartesianPoint::C1);
    let r2 = p.distance(&CartesianPoint::C2);
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::singular(format!(
            "W is singular at the primary ({}, {})",
            p.x, p.y
        )));
    }
    Ok(-a / r2 - a / r1)
}

/// Potential of the third centre, `V = −1/|z − C|`.
pub fn potential_v(p: &CartesianPoint, centre: &CartesianPoint) -> Result<f64> {
    let r = p.distance(centre);
    if r == 0.0 {
        return Err(Error::singular("V is singular at the third centre"));
    }
    Ok(-1.0 / r)
}

/// Squared distance at which a state counts as sitting on the third centre,
/// absorbing the rounding of the two elliptic representations.
const CENTRE_HIT_SQ: f64 = 1e-28;

/// `V` and its partial derivatives in `(ξ, φ)`, or `None` at the centre.
fn perturbation_terms(xi: f64, phi: f64, centre: &CartesianPoint) -> Option<(f64, f64, f64)> {
    let (sh, ch) = (xi.sinh(), xi.cosh());
    let (s, c) = phi.sin_cos();
    let dx = ch * c - centre.x;
    let dy = sh * s - centre.y;
    let rho2 = dx * dx + dy * dy;
    if rho2 <= CENTRE_HIT_SQ * (1.0 + centre.x * centre.x + centre.y * centre.y) {
        return None;
    }
    let rho = rho2.sqrt();
    let inv3 = 1.0 / (rho2 * rho);
    // ∂z/∂ξ = (sinh ξ cos φ, cosh ξ sin φ), ∂z/∂φ = (−cosh ξ sin φ, sinh ξ cos φ)
    let v_xi = (dx * sh * c + dy * ch * s) * inv3;
    let v_phi = (-dx * ch * s + dy * sh * c) * inv3;
    Some((-1.0 / rho, v_xi, v_phi))
}

/// The right-hand side of the regularized equations, shared by the integrators.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RegularizedField<'a> {
    pub params: &'a Params,
}

impl RegularizedField<'_> {
    fn effective_energy(&self, xi: f64, phi: f64) -> Option<(f64, f64, f64)> {
        let e = self.params.energy();
        match (self.params.eps > 0.0, self.params.centre.as_ref()) {
            (true, Some(c)) => {
                let (v, v_xi, v_phi) = perturbation_terms(xi, phi, &c.cartesian)?;
                let eps = self.params.eps;
                Some((e - eps * v, eps * v_xi, eps * v_phi))
            }
            _ => Some((e, 0.0, 0.0)),
        }
    }

    /// Accelerations `(ξ″, φ″) = −∇𝓗ε`, `None` at the third centre.
    pub fn acceleration(&self, xi: f64, phi: f64) -> Option<(f64, f64)> {
        let (e_eff, ev_xi, ev_phi) = self.effective_energy(xi, phi)?;
        let a = self.params.a;
        let sh = xi.sinh();
        let d = sh * sh + phi.sin().powi(2);
        let xi_acc = 2.0 * a * sh + e_eff * (2.0 * xi).sinh() - ev_xi * d;
        let phi_acc = e_eff * (2.0 * phi).sin() - ev_phi * d;
        Some((xi_acc, phi_acc))
    }

    pub fn rhs(&self, y: &[f64; 4]) -> Option<[f64; 4]> {
        let (xa, pa) = self.acceleration(y[0], y[1])?;
        Some([y[2], y[3], xa, pa])
    }

    /// Position part `−2a cosh ξ − (E − εV) D` of the Hamiltonian.
    pub fn potential(&self, xi: f64, phi: f64) -> Option<f64> {
        let (e_eff, _, _) = self.effective_energy(xi, phi)?;
        let sh = xi.sinh();
        let d = sh * sh + phi.sin().powi(2);
        Some(-2.0 * self.params.a * xi.cosh() - e_eff * d)
    }

    pub fn hamiltonian(&self, y: &[f64; 4]) -> Option<f64> {
        Some(0.5 * (y[2] * y[2] + y[3] * y[3]) + self.potential(y[0], y[1])?)
    }
}

fn singular_at_centre() -> Error {
    Error::singular("state coincides with the third centre while eps > 0")
}

/// `𝓗ε` at `s`; zero along orbits of energy `E`.
pub fn regularized_hamiltonian(s: &EllipticState, prm: &Params) -> Result<f64> {
    RegularizedField { params: prm }
        .hamiltonian(&s.to_raw())
        .ok_or_else(singular_at_centre)
}

/// Hamilton's equations of `𝓗ε`: returns `(ξ′, φ′, ξ″, φ″)`.
pub fn vector_field(s: &EllipticState, prm: &Params) -> Result<[f64; 4]> {
    RegularizedField { params: prm }
        .rhs(&s.to_raw())
        .ok_or_else(singular_at_centre)
}

/// ξ-part of the separated energy, `ξ′²/4a − cosh ξ + βA₁cosh²ξ + A₁`; zero on
/// unperturbed orbits of the regime `(β, A₁)`.
pub fn xi_energy(s: &EllipticState, prm: &Params) -> f64 {
    let ch = s.point.xi.cosh();
    s.xi_prime.powi(2) / (4.0 * prm.a) - ch + prm.beta * prm.a1 * ch * ch + prm.a1
}

/// φ-part of the separated energy, `φ′²/4a − βA₁cos²φ − A₁`.
pub fn phi_energy(s: &EllipticState, prm: &Params) -> f64 {
    s.phi_prime.powi(2) / (4.0 * prm.a) - prm.beta * prm.a1 * s.point.phi.cos().powi(2) - prm.a1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn primary_potential() {
        assert!(close(
            potential_w(&CartesianPoint::new(0.0, 0.0), 1.0).unwrap(),
            -2.0,
            1e-15
        ));
        let far = potential_w(&CartesianPoint::new(0.0, 1e8), 1.0).unwrap();
        assert!(far < 0.0 && far > -1e-7);
        assert!(matches!(
            potential_w(&CartesianPoint::C1, 1.0),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn third_centre_potential() {
        let c = CartesianPoint::new(0.3, -0.2);
        assert!(close(
            potential_v(&CartesianPoint::new(1.3, -0.2), &c).unwrap(),
            -1.0,
            1e-15
        ));
        assert!(close(
            potential_v(&CartesianPoint::new(0.3, 1.8), &c).unwrap(),
            -0.5,
            1e-15
        ));
        assert!(matches!(potential_v(&c, &c), Err(Error::Singularity(_))));
    }

    #[test]
    fn params_invariants() {
        let p = Params::new(1.0, 1.0 / 7.0, 0.3).unwrap();
        assert!(close(p.energy(), -2.0 * 0.3 / 7.0, 1e-16));
        assert!(Params::new(1.0, 1.0, 0.3).is_err());
        assert!(Params::new(1.0, 0.5, 2.0 / 3.0).is_err());
        assert!(Params::new(1.0, 0.0, 0.0).is_err());
        assert!(Params::new(-1.0, 0.1, 0.3).is_err());
        assert!(p.with_eps(0.1).is_err(), "eps needs a centre");
        assert!(Centre::from_cartesian(CartesianPoint::C2).is_err());
        assert!(Centre::from_elliptic(EllipticPoint::new(0.0, PI)).is_err());
    }

    #[test]
    fn params_serde_round_trip() {
        let c = Centre::from_cartesian(CartesianPoint::new(0.2, 0.5)).unwrap();
        let p = Params::new(1.0, 0.1, 0.3)
            .unwrap()
            .with_class(ResonanceClass::new(1, 2).unwrap())
            .with_centre(c)
            .with_eps(1e-3)
            .unwrap();
        let js = serde_json::to_value(p).unwrap();
        assert!(close(js["energy"].as_f64().unwrap(), p.energy(), 0.0));
        let back: Params = serde_json::from_value(js).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn hamiltonian_vanishes_on_separated_orbit() {
        let p = Params::new(1.0, 1.0 / 7.0, 0.29).unwrap();
        let (b, a1) = (p.beta(), p.a1());
        for &(xi, phi) in &[(0.3, 1.1), (0.0, 0.0), (1.2, 4.0)] {
            let ch: f64 = f64::cosh(xi);
            let xp = (4.0 * (ch - b * a1 * ch * ch - a1)).sqrt();
            let pp = (4.0 * (b * a1 * f64::cos(phi).powi(2) + a1)).sqrt();
            let s = EllipticState::new(xi, phi, xp, -pp);
            assert!(regularized_hamiltonian(&s, &p).unwrap().abs() < 1e-12);
            assert!(xi_energy(&s, &p).abs() < 1e-14 && phi_energy(&s, &p).abs() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_zero_at_turning_point() {
        let (a, b, a1) = (1.3, 0.2, 0.4);
        let p = Params::new(a, b, a1).unwrap();
        let s4 = (1.0 - 4.0 * b * a1 * a1).sqrt();
        let xi_plus = ((1.0 + s4) / (2.0 * b * a1)).acosh();
        let phi: f64 = 0.8;
        let pp = (4.0 * a * (b * a1 * phi.cos().powi(2) + a1)).sqrt();
        let s = EllipticState::new(xi_plus, phi, 0.0, pp);
        assert!(regularized_hamiltonian(&s, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unperturbed_field_closed_form() {
        let p = Params::new(1.7, 0.3, 0.4).unwrap();
        let (a, b, a1) = (p.a(), p.beta(), p.a1());
        for &(xi, phi) in &[(0.4f64, 0.9f64), (-1.1, 2.5), (2.0, 5.5)] {
            let f = vector_field(&EllipticState::new(xi, phi, 0.1, 0.2), &p).unwrap();
            let xi_acc = 2.0 * a * xi.sinh() * (1.0 - 2.0 * b * a1 * xi.cosh());
            let phi_acc = -2.0 * a * b * a1 * (2.0 * phi).sin();
            assert!(close(f[2], xi_acc, 1e-12 * xi_acc.abs().max(1.0)));
            assert!(close(f[3], phi_acc, 1e-12));
        }
        let on_axis = vector_field(&EllipticState::new(0.0, 1.0, 0.3, 0.5), &p).unwrap();
        assert_eq!(on_axis[2], 0.0);
        for phi in [0.0, FRAC_PI_2] {
            let f = vector_field(&EllipticState::new(0.7, phi, 0.3, 0.5), &p).unwrap();
            assert!(f[3].abs() < 1e-15);
        }
    }

    #[test]
    fn perturbed_field_singular_at_centre() {
        let c = Centre::from_elliptic(EllipticPoint::new(0.5, 1.0)).unwrap();
        let p = Params::new(1.0, 0.1, 0.3)
            .unwrap()
            .with_centre(c)
            .with_eps(0.01)
            .unwrap();
        let s = EllipticState {
            point: c.elliptic,
            xi_prime: 1.0,
            phi_prime: 1.0,
        };
        assert!(matches!(vector_field(&s, &p), Err(Error::Singularity(_))));
        assert!(matches!(
            regularized_hamiltonian(&s, &p),
            Err(Error::Singularity(_))
        ));
        // the mirror representation is the same Cartesian point
        let m = EllipticState {
            point: c.elliptic.mirror(),
            ..s
        };
        assert!(vector_field(&m, &p).is_err());
    }
}
