//! Periods of the separated system and the resonance condition `q·T₁ = T₂`.
//!
//! The ξ-motion oscillates between `±ξ₊` with period
//! `T₁ = 2√(2/a) / (1 − 4βA₁²)^{1/4} · K(κ₁²)` and the φ-motion rotates with
//! period `T₂ = 2 / √(aA₁(1+β)) · K(κ₂²)`.
//!
//! Near the separatrix `A₁ → 1/(1+β)` the root `Â₁` of the resonance
//! residual can sit hundreds of orders of magnitude below `1/(1+β)`, so the
//! solver also works in the gap `g = 1/(1+β) − A₁`.

use serde::Serialize;

use crate::dynamics::check_regime;
use crate::error::{Error, Result};
use crate::rational::ResonanceClass;
use crate::special::{complete_elliptic_k, complete_elliptic_k_complement};

/// Point of the `(β, A₁)` plane carrying the separatrix gap exactly.
#[derive(Debug, Clone, Copy)]
struct RegimePoint {
    beta: f64,
    a1: f64,
    gap: f64,
}

impl RegimePoint {
    fn from_a1(beta: f64, a1: f64) -> Result<Self> {
        check_regime(beta, a1)?;
        Ok(Self {
            beta,
            a1,
            gap: 1.0 / (1.0 + beta) - a1,
        })
    }

    fn from_gap(beta: f64, gap: f64) -> Self {
        Self {
            beta,
            a1: 1.0 / (1.0 + beta) - gap,
            gap,
        }
    }

    fn s(&self) -> f64 {
        (1.0 - 4.0 * self.beta * self.a1 * self.a1).sqrt()
    }

    /// `1 − κ₁²`, formed without cancellation:
    /// `s² − A₁²(1−β)² = (1 − A₁(1+β))(1 + A₁(1+β))`.
    fn kappa1_complement(&self) -> f64 {
        let (b, a1, s) = (self.beta, self.a1, self.s());
        self.gap * (1.0 + b) * (1.0 + a1 * (1.0 + b)) / ((s + a1 * (1.0 - b)) * 2.0 * s)
    }

    fn t1(&self, a: f64) -> Result<f64> {
        let m1 = self.kappa1_complement();
        if !(m1 > 0.0) {
            return Err(Error::domain(
                "T1 diverges on the separatrix A1 = 1/(1+beta)",
            ));
        }
        let k = complete_elliptic_k_complement(m1.min(1.0))?;
        Ok(2.0 * (2.0 / a).sqrt() / self.s().sqrt() * k)
    }

    fn t2(&self, a: f64) -> Result<f64> {
        let b = self.beta;
        let k = complete_elliptic_k(b / (1.0 + b))?;
        Ok(2.0 / (a * self.a1 * (1.0 + b)).sqrt() * k)
    }

    fn residual(&self, q: f64, a: f64) -> Result<f64> {
        Ok(q * self.t1(a)? - self.t2(a)?)
    }
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "primary intensity a must be positive, got {a}"
        )))
    }
}

/// `(κ₁², κ₂²)` of the two elliptic integrals.
pub fn kappa_sq(beta: f64, a1: f64) -> Result<(f64, f64)> {
    let p = RegimePoint::from_a1(beta, a1)?;
    let s = p.s();
    Ok(((a1 * (1.0 - beta) + s) / (2.0 * s), beta / (1.0 + beta)))
}

/// Period of the ξ-oscillation (a full swing `−ξ₊ → ξ₊ → −ξ₊`).
pub fn period_t1(beta: f64, a1: f64, a: f64) -> Result<f64> {
    check_a(a)?;
    RegimePoint::from_a1(beta, a1)?.t1(a)
}

/// Period of the φ-rotation through `2π`.
pub fn period_t2(beta: f64, a1: f64, a: f64) -> Result<f64> {
    check_a(a)?;
    RegimePoint::from_a1(beta, a1)?.t2(a)
}

/// Resonance residual `F(β, A₁) = q·T₁ − T₂`, increasing in `A₁`.
pub fn residual_f(beta: f64, a1: f64, q: ResonanceClass, a: f64) -> Result<f64> {
    check_a(a)?;
    RegimePoint::from_a1(beta, a1)?.residual(q.value(), a)
}

/// `ξ₊ > 0` with `cosh ξ₊ = (1 + √(1 − 4βA₁²)) / (2βA₁)`; the other inversion
/// point is `−ξ₊`.
pub fn turning_point_xi(beta: f64, a1: f64) -> Result<f64> {
    let p = RegimePoint::from_a1(beta, a1)?;
    if beta == 0.0 {
        return Err(Error::domain(
            "for beta = 0 the xi-motion has no turning point",
        ));
    }
    Ok(((1.0 + p.s()) / (2.0 * beta * a1)).acosh())
}

/// The unique `Â₁(β, q)` with `q·T₁ = T₂`, and the periods there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceSolution {
    pub beta: f64,
    pub q: ResonanceClass,
    pub a: f64,
    pub a1_hat: f64,
    /// `1/(1+β) − Â₁`, accurate even where `Â₁` rounds to `1/(1+β)`.
    pub gap: f64,
    pub t1: f64,
    pub t2: f64,
    pub energy: f64,
    pub residual: f64,
}

impl ResonanceSolution {
    /// Common period `m·T₁ = n·T₂` of the resonant orbits.
    pub fn period(&self) -> f64 {
        self.q.m() as f64 * self.t1
    }

    pub fn xi_plus(&self) -> Result<f64> {
        turning_point_xi(self.beta, self.a1_hat)
    }
}

const BRACKET_START: f64 = 1e-9;

/// Monotone bracketed root of `f` on `[lo, hi]` (`f(lo)`, `f(hi)` of opposite
/// sign): regula falsi with the Illinois modification, falling back to a
/// bisection step (geometric when the bracket spans decades) whenever the
/// bracket fails to halve. Returns the iterate with the smallest `|f|`.
pub(crate) fn bracketed_root<F>(f: F, lo: f64, hi: f64, ftol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    bracketed_root_within(f, lo, hi, ftol, 0.0)
}

/// [`bracketed_root`] that also stops once the bracket is narrower than `xtol`,
/// for residuals carrying integration noise.
pub(crate) fn bracketed_root_within<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
    xtol: f64,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        return Err(Error::Range(format!("no sign change on [{lo:e}, {hi:e}]")));
    }
    let mut best = if flo.abs() < fhi.abs() {
        (lo, flo)
    } else {
        (hi, fhi)
    };
    let mut width = hi - lo;
    let mut stale = 0;
    for _ in 0..2000 {
        if best.1 == 0.0 {
            break;
        }
        let bisect = stale >= 2;
        let x = if bisect {
            if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            }
        } else {
            let t = (lo * fhi - hi * flo) / (fhi - flo);
            if t > lo && t < hi {
                t
            } else {
                0.5 * (lo + hi)
            }
        };
        if !(x > lo && x < hi) {
            break;
        }
        let fx = f(x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 {
            break;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            fhi *= 0.5;
        } else {
            hi = x;
            fhi = fx;
            flo *= 0.5;
        }
        let new_width = hi - lo;
        stale = if new_width > 0.5 * width {
            stale + 1
        } else {
            0
        };
        if bisect {
            stale = 0;
        }
        width = new_width;
        if best.1.abs() <= ftol && width <= 4.0 * f64::EPSILON * best.0.abs() || width <= xtol {
            break;
        }
    }
    Ok(best)
}

/// Solve `q·T₁(β, A₁) = T₂(β, A₁)` for `A₁` to `|F| ≤ tol`.
pub fn solve_a1(beta: f64, q: ResonanceClass, a: f64, tol: f64) -> Result<ResonanceSolution> {
    check_a(a)?;
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::domain(format!(
            "beta must lie in [0, 1), got {beta}"
        )));
    }
    let qv = q.value();
    let top = 1.0 / (1.0 + beta);
    let half = 0.5 * top;
    let f_mid = RegimePoint::from_gap(beta, half).residual(qv, a)?;

    let point = if f_mid > 0.0 {
        // root in (0, half]: F → −∞ as A₁ → 0
        let mut lo = BRACKET_START.min(0.5 * half);
        while RegimePoint::from_a1(beta, lo)?.residual(qv, a)? > 0.0 {
            lo /= 1e3;
            if lo < f64::MIN_POSITIVE * 1e3 {
                return Err(Error::Accuracy {
                    message: "no sign change of F towards A1 = 0".into(),
                    best_estimate: lo,
                });
            }
        }
        let (a1, _) = bracketed_root(
            |x| RegimePoint::from_a1(beta, x)?.residual(qv, a),
            lo,
            half,
            tol,
        )?;
        RegimePoint::from_a1(beta, a1)?
    } else {
        // root in [half, top): F → +∞ as the gap closes
        let mut g_lo = BRACKET_START.min(0.5 * half);
        while RegimePoint::from_gap(beta, g_lo).residual(qv, a)? < 0.0 {
            g_lo /= 1e3;
            if g_lo < f64::MIN_POSITIVE * 1e3 {
                return Err(Error::Accuracy {
                    message: "no sign change of F towards the separatrix".into(),
                    best_estimate: top,
                });
            }
        }
        let (gap, _) = bracketed_root(
            |g| Ok(-RegimePoint::from_gap(beta, g).residual(qv, a)?),
            g_lo,
            half,
            tol,
        )?;
        RegimePoint::from_gap(beta, gap)
    };

    let t1 = point.t1(a)?;
    let t2 = point.t2(a)?;
    let residual = qv * t1 - t2;
    if residual.abs() > tol {
        return Err(Error::Accuracy {
            message: format!("resonance residual {residual:e} above tolerance {tol:e}"),
            best_estimate: point.a1,
        });
    }
    Ok(ResonanceSolution {
        beta,
        q,
        a,
        a1_hat: point.a1,
        gap: point.gap,
        t1,
        t2,
        energy: -2.0 * a * beta * point.a1,
        residual,
    })
}

/// Largest β tried when searching for a prescribed energy.
const BETA_CEILING: f64 = 1.0 - 1e-9;

/// Find β such that the class-`q` resonant orbits have energy
/// `E = −2aβÂ₁(β, q)`, to `|Δβ| ≤ tol`.
pub fn solve_beta_for_energy(
    q: ResonanceClass,
    energy: f64,
    a: f64,
    tol: f64,
) -> Result<ResonanceSolution> {
    check_a(a)?;
    if !(energy < 0.0) {
        return Err(Error::domain(format!(
            "energy must be negative, got {energy}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let inner_tol = 1e-13;
    let e_of = |beta: f64| -> Result<f64> { Ok(solve_a1(beta, q, a, inner_tol)?.energy) };
    let e_max = e_of(BETA_CEILING)?;
    if e_max > energy {
        return Err(Error::Range(format!(
            "energy {energy} is below the class-{q} range ({e_max}, 0)"
        )));
    }
    let (mut lo, mut hi) = (0.0, BETA_CEILING);
    // E is decreasing in beta: E(lo) > energy >= E(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if e_of(mid)? > energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // a final secant step inside the bracket
    let (elo, ehi) = (e_of(lo)?, e_of(hi)?);
    let beta = if elo != ehi {
        (lo + (energy - elo) * (hi - lo) / (ehi - elo)).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    solve_a1(beta, q, a, inner_tol)
}

/// Everything `periods` reports for one `(β, A₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodReport {
    pub beta: f64,
    pub a1: f64,
    pub a: f64,
    pub t1: f64,
    pub t2: f64,
    pub kappa1_sq: f64,
    pub kappa2_sq: f64,
    /// `None` for β = 0.
    pub xi_plus: Option<f64>,
}

pub fn period_report(beta: f64, a1: f64, a: f64) -> Result<PeriodReport> {
    let (kappa1_sq, kappa2_sq) = kappa_sq(beta, a1)?;
    Ok(PeriodReport {
        beta,
        a1,
        a,
        t1: period_t1(beta, a1, a)?,
        t2: period_t2(beta, a1, a)?,
        kappa1_sq,
        kappa2_sq,
        xi_plus: if beta > 0.0 {
            Some(turning_point_xi(beta, a1)?)
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn q(s: &str) -> ResonanceClass {
        s.parse().unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn kappa_examples() {
        let (_, k2) = kappa_sq(1.0 / 7.0, 0.3).unwrap();
        assert!((k2 - 0.125).abs() < 1e-16);
        let (k1, k2) = kappa_sq(0.0, 0.4).unwrap();
        assert!((k1 - 0.7).abs() < 1e-15 && k2 == 0.0);
        let (k1, _) = kappa_sq(0.0, 1e-12).unwrap();
        assert!((k1 - 0.5).abs() < 1e-12);
        assert!(kappa_sq(0.5, 0.7).is_err());
    }

    #[test]
    fn complement_is_consistent() {
        for &(b, a1) in &[(0.0, 0.3), (0.2, 0.5), (0.6, 0.6), (0.9, 0.52)] {
            let (k1, _) = kappa_sq(b, a1).unwrap();
            let m1 = RegimePoint::from_a1(b, a1).unwrap().kappa1_complement();
            assert!((1.0 - k1 - m1).abs() < 1e-14, "{b} {a1}");
        }
    }

    #[test]
    fn beta_zero_closed_forms() {
        for a1 in [1.0 / 9.0, 0.25] {
            let t2 = period_t2(0.0, a1, 1.0).unwrap();
            assert!((t2 - PI / a1.sqrt()).abs() < 1e-12);
        }
        let t1 = period_t1(0.0, 1e-8, 1.0).unwrap();
        let limit = 4.0 / 2f64.sqrt() * complete_elliptic_k(0.5).unwrap();
        assert!((t1 - limit).abs() < 1e-6);
        assert!((limit - 5.244_115_108_584_239_6).abs() < 1e-14);
    }

    #[test]
    fn a_scaling() {
        let (b, a1) = (0.0, 0.3);
        assert!(
            rel(
                period_t1(b, a1, 4.0).unwrap(),
                0.5 * period_t1(b, a1, 1.0).unwrap()
            ) < 1e-15
        );
        assert!(
            rel(
                period_t2(b, a1, 4.0).unwrap(),
                0.5 * period_t2(b, a1, 1.0).unwrap()
            ) < 1e-15
        );
    }

    #[test]
    fn separatrix_is_a_domain_error() {
        assert!(period_t1(1.0 / 3.0, 0.75, 1.0).is_err());
        assert!(residual_f(0.0, 1.0, q("1"), 1.0).is_err());
    }

    #[test]
    fn monotone_periods() {
        let b = 0.2;
        let mut prev = (0.0, f64::INFINITY);
        for i in 1..80 {
            let a1 = i as f64 / 80.0 / (1.0 + b);
            let (t1, t2) = (
                period_t1(b, a1, 1.0).unwrap(),
                period_t2(b, a1, 1.0).unwrap(),
            );
            assert!(t1 > prev.0 && t2 < prev.1);
            prev = (t1, t2);
        }
    }

    #[test]
    fn turning_point() {
        let (b, a1) = (1.0 / 7.0, 0.29);
        let xp = turning_point_xi(b, a1).unwrap();
        let c = xp.cosh();
        assert!((c - b * a1 * c * c - a1).abs() < 1e-12);
        assert!(turning_point_xi(0.0, 0.3).is_err());
    }

    #[test]
    fn xi_oscillates_between_symmetric_turning_points() {
        use crate::dynamics::{integrate, EllipticState, Params};
        let (b, a1) = (1.0 / 7.0, 0.29);
        let xp = turning_point_xi(b, a1).unwrap();
        let prm = Params::new(1.0, b, a1).unwrap();
        let s0 = EllipticState::new(0.0, 0.3, 2.0 * (1.0 - a1 * (1.0 + b)).sqrt(), 1.0);
        let t1 = period_t1(b, a1, 1.0).unwrap();
        let tr = integrate(&s0, &prm, t1, 1e-12, &[]).unwrap();
        let xs: Vec<f64> = tr
            .resample(4000)
            .unwrap()
            .iter()
            .map(|r| r.state.point.xi)
            .collect();
        let (lo, hi) = xs
            .iter()
            .fold((0.0f64, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        assert!(
            (hi - xp).abs() < 1e-6 && (lo + xp).abs() < 1e-6,
            "{lo} {hi} {xp}"
        );
    }

    // Frozen from a 30-digit evaluation of K by the AGM and a bisection on F.
    const A1_BETA0: [(&str, f64); 6] = [
        ("1/3", 0.963209918184730655555),
        ("1/2", 0.775156372637443284140),
        ("1", 0.305118965936116401151),
        ("2", 0.0861252500140981301655),
        ("3", 0.0391567981551770857239),
        ("64", 8.76149016567872845498e-5),
    ];
    const A1_BETA_SEVENTH: [(&str, f64); 6] = [
        ("1/3", 0.8396788153036749639906),
        ("1/2", 0.6921926979843299950845),
        ("1", 0.2874733307608507803025),
        ("2", 0.08102126931093226406262),
        ("3", 0.03672578669951113460782),
        ("64", 8.191123874809862260109e-5),
    ];

    #[test]
    fn resonance_values() {
        for (beta, table) in [(0.0, &A1_BETA0), (1.0 / 7.0, &A1_BETA_SEVENTH)] {
            for (qs, expect) in table.iter() {
                let sol = solve_a1(beta, q(qs), 1.0, 1e-12).unwrap();
                assert!(
                    rel(sol.a1_hat, *expect) < 1e-11,
                    "beta {beta} q {qs}: {}",
                    sol.a1_hat
                );
                assert!(sol.residual.abs() <= 1e-12);
                assert!(rel(sol.t2, sol.q.value() * sol.t1) < 1e-12);
            }
        }
    }

    #[test]
    fn resonance_periods_beta_seventh() {
        let s1 = solve_a1(1.0 / 7.0, q("1"), 1.0, 1e-13).unwrap();
        assert!(rel(s1.t1, 5.665420158709112436828) < 1e-12);
        assert!(rel(s1.xi_plus().unwrap(), 3.873229765372568541853) < 1e-11);
        let s2 = solve_a1(1.0 / 7.0, q("2"), 1.0, 1e-13).unwrap();
        assert!(rel(s2.t1, 5.335822658651900635373) < 1e-12);
        assert!(rel(s2.t2, 10.67164531730380127075) < 1e-12);
        assert!(rel(s2.xi_plus().unwrap(), 5.151128247675002717217) < 1e-11);
    }

    #[test]
    fn extreme_classes_approach_the_ends() {
        let beta = 1.0 / 7.0;
        let small = solve_a1(beta, q("1/64"), 1.0, 1e-12).unwrap();
        assert!(small.gap > 0.0 && small.gap < 1e-50, "gap {:e}", small.gap);
        assert!((small.a1_hat - 0.875).abs() < 1e-15);
        let large = solve_a1(beta, q("64"), 1.0, 1e-12).unwrap();
        assert!(large.a1_hat < 1e-4);
    }

    #[test]
    fn beta_for_energy_round_trip() {
        let qc = q("2");
        let sol = solve_a1(0.1, qc, 1.0, 1e-13).unwrap();
        let back = solve_beta_for_energy(qc, sol.energy, 1.0, 1e-12).unwrap();
        assert!((back.beta - 0.1).abs() < 1e-10);
        let tiny = solve_beta_for_energy(qc, -1e-9, 1.0, 1e-14).unwrap();
        assert!(tiny.beta < 1e-7);
        assert!(matches!(
            solve_beta_for_energy(qc, -10.0, 1.0, 1e-10),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn energy_increases_with_class() {
        let e1 = solve_a1(0.2, q("1"), 1.0, 1e-12).unwrap().energy;
        let e2 = solve_a1(0.2, q("2"), 1.0, 1e-12).unwrap().energy;
        assert!(e2 > e1);
    }
}
