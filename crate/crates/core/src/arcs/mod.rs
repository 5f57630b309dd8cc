//! Collision arcs: unperturbed resonant orbits leaving the third centre `C`
//! and ending at their first return to it.

mod collision;
mod nondegeneracy;

pub use collision::{primary_collision_test, rational_set_s, CollisionTest};
pub use nondegeneracy::{nondegeneracy_certificate, NondegeneracyCertificate};

use serde::Serialize;

use crate::dynamics::{
    integrate_with, Centre, EllipticState, EventKind, EventSpec, IntegratorOptions, Params,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, velocity_to_cartesian, EllipticPoint};
use crate::periods::{solve_a1, turning_point_xi, ResonanceSolution};
use crate::rational::ResonanceClass;

/// Tunables shared by arc construction and the family builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcOptions {
    /// Integration tolerance.
    pub tol: f64,
    /// Exclusion margin around `S` in units of `G`.
    pub delta: f64,
    /// How close `ξ` must come to `±ξ₀` at a φ-crossing to count as a return.
    pub return_tol: f64,
    /// Arcs passing closer than this to a primary contradict a safe verdict.
    pub primary_threshold: f64,
    /// Tolerance for the resonance solve.
    pub solve_tol: f64,
}

impl Default for ArcOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            delta: 1e-4,
            return_tol: 1e-7,
            primary_threshold: 1e-6,
            solve_tol: 1e-13,
        }
    }
}

/// `(q, sign of ξ′₀, sign of φ′₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ArcLabel {
    pub q: ResonanceClass,
    pub sign: i8,
    pub direction: i8,
}

impl std::fmt::Display for ArcLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = |v: i8| if v > 0 { '+' } else { '-' };
        write!(f, "q{}{}{}", self.q, s(self.sign), s(self.direction))
    }
}

/// An unperturbed arc from `C` back to `C`.
#[derive(Debug, Clone, Serialize)]
pub struct CollisionArc {
    pub params: Params,
    pub label: ArcLabel,
    /// `(ξ′, φ′)` at departure, in the chart of the centre's stored representation.
    pub v0: [f64; 2],
    /// `(ξ′, φ′)` at arrival, expressed in the same chart as `v0`.
    pub v_t: [f64; 2],
    pub duration: f64,
    /// Resonant period `m·T₁`.
    pub period: f64,
    pub early_collision: bool,
    /// Whether the arrival was detected in the mirrored representation `(−ξ₀, −φ₀)`.
    pub mirrored_return: bool,
    pub min_primary_distance: f64,
    #[serde(skip)]
    pub path: Trajectory,
}

impl CollisionArc {
    fn centre(&self) -> &Centre {
        self.params.centre().expect("arcs are built with a centre")
    }

    /// Physical velocity `dz/dt = U·v / D` at departure.
    pub fn initial_cartesian_velocity(&self) -> [f64; 2] {
        physical_velocity(&self.centre().elliptic, self.v0)
    }

    /// Physical velocity at arrival.
    pub fn final_cartesian_velocity(&self) -> [f64; 2] {
        physical_velocity(&self.centre().elliptic, self.v_t)
    }
}

fn physical_velocity(p: &EllipticPoint, v: [f64; 2]) -> [f64; 2] {
    let u = velocity_to_cartesian(p, v).expect("the centre is not a primary");
    let d = p.metric_factor();
    [u[0] / d, u[1] / d]
}

/// Speeds `(|ξ′₀|, |φ′₀|)` of orbits of the regime `(β, Â₁)` through the centre.
pub fn initial_velocities(
    centre: &EllipticPoint,
    beta: f64,
    a1_hat: f64,
    a: f64,
) -> Result<(f64, f64)> {
    let ch = centre.xi.cosh();
    let xi_rad = ch - beta * a1_hat * ch * ch - a1_hat;
    if !(xi_rad > 0.0) {
        let bound = turning_point_xi(beta, a1_hat)
            .map(|x| format!("{x}"))
            .unwrap_or_default();
        return Err(Error::Placement(format!(
            "|xi0| = {} is not inside the turning-point ellipse xi+ = {bound}",
            centre.xi.abs()
        )));
    }
    let phi_rad = beta * a1_hat * centre.phi.cos().powi(2) + a1_hat;
    Ok(((4.0 * a * xi_rad).sqrt(), (4.0 * a * phi_rad).sqrt()))
}

fn resonance(prm: &Params) -> Result<(ResonanceClass, &Centre)> {
    let q = prm
        .q()
        .ok_or_else(|| Error::domain("collision arcs need a resonance class q"))?;
    let c = prm
        .centre()
        .ok_or_else(|| Error::domain("collision arcs need a centre"))?;
    Ok((q, c))
}

/// Integrate the unperturbed flow from `C` with the given velocity signs until
/// the first return to `C` in either elliptic representation.
pub fn build_arc(prm: &Params, sign: i8, direction: i8, opts: &ArcOptions) -> Result<CollisionArc> {
    let (q, centre) = resonance(prm)?;
    let unperturbed = prm.with_eps(0.0)?;
    let c = centre.elliptic;
    let (xs, ps) = initial_velocities(&c, prm.beta(), prm.a1(), prm.a())?;
    let v0 = [
        f64::from(sign.signum()) * xs,
        f64::from(direction.signum()) * ps,
    ];
    if sign == 0 || direction == 0 {
        return Err(Error::domain("arc sign and direction must be +1 or -1"));
    }
    let (a, b, a1) = (prm.a(), prm.beta(), prm.a1());
    let period = q.m() as f64 * crate::periods::period_t1(b, a1, a)?;

    let events = [
        EventSpec::new(EventKind::PhiCrossing { value: c.phi }),
        EventSpec::new(EventKind::PhiCrossing {
            value: normalize_angle(-c.phi),
        }),
        EventSpec::new(EventKind::PrimaryClosest),
    ];
    let s0 = EllipticState {
        point: c,
        xi_prime: v0[0],
        phi_prime: v0[1],
    };
    let iopts = IntegratorOptions::with_tol(opts.tol);
    let mut path = integrate_with(&s0, &unperturbed, 1.01 * period + 0.1, &events, &iopts)?;

    let min_tau = 1e-9 * period;
    let ret = path
        .events
        .iter()
        .filter(|e| e.tau > min_tau && e.spec < 2)
        .find(|e| {
            let target = if e.spec == 0 { c.xi } else { -c.xi };
            (e.state.point.xi - target).abs() <= opts.return_tol
        })
        .copied()
        .ok_or_else(|| Error::Integration {
            tau: path.tau_end(),
            message: "no return to the centre within one resonant period".into(),
        })?;
    path.truncate(ret.tau)?;

    let end = path.final_state();
    let mirrored = ret.spec == 1;
    // U(−ξ,−φ) = −U(ξ,φ): a velocity read in the mirrored chart flips sign
    let v_t = if mirrored {
        [-end.xi_prime, -end.phi_prime]
    } else {
        [end.xi_prime, end.phi_prime]
    };

    let mut min_primary = c.distance_to_c1().min(c.distance_to_c2());
    for e in path.events.iter().filter(|e| e.spec == 2) {
        min_primary = min_primary.min(e.distance.unwrap_or(f64::INFINITY));
    }
    min_primary = min_primary
        .min(end.point.distance_to_c1())
        .min(end.point.distance_to_c2());

    let duration = ret.tau;
    Ok(CollisionArc {
        params: *prm,
        label: ArcLabel {
            q,
            sign: sign.signum(),
            direction: direction.signum(),
        },
        v0,
        v_t,
        duration,
        period,
        early_collision: duration < period * (1.0 - 1e-6),
        mirrored_return: mirrored,
        min_primary_distance: min_primary,
        path,
    })
}

/// Parameters of class `q` at `β`, with `A₁ = Â₁(β, q)` and the centre attached.
pub fn resonant_params(
    centre: &Centre,
    a: f64,
    beta: f64,
    q: ResonanceClass,
    opts: &ArcOptions,
) -> Result<(Params, ResonanceSolution)> {
    let sol = solve_a1(beta, q, a, opts.solve_tol)?;
    let prm = Params::new(a, beta, sol.a1_hat)?
        .with_class(q)
        .with_centre(*centre);
    Ok((prm, sol))
}

/// The four arcs of one class through `C`, with the safety verdict that
/// admitted them.
#[derive(Debug, Clone, Serialize)]
pub struct ArcFamily {
    pub solution: ResonanceSolution,
    pub test: CollisionTest,
    pub arcs: Vec<CollisionArc>,
}

/// Build all `(sign, direction) ∈ {±1}²` arcs of class `q` at the base's β,
/// refusing centres that fail the primary-collision test.
pub fn arc_family(
    centre: &Centre,
    base: &Params,
    q: ResonanceClass,
    opts: &ArcOptions,
) -> Result<ArcFamily> {
    let (prm, solution) = resonant_params(centre, base.a(), base.beta(), q, opts)?;
    arc_family_for(&prm, solution, opts)
}

pub(crate) fn arc_family_for(
    prm: &Params,
    solution: ResonanceSolution,
    opts: &ArcOptions,
) -> Result<ArcFamily> {
    let (_, centre) = resonance(prm)?;
    let test = primary_collision_test(&centre.elliptic, prm, opts.delta)?;
    if !test.safe {
        return Err(Error::UnsafeCentre(format!(
            "class {}: G+ = {:.6} (distance {:.2e} to S), G- = {:.6} (distance {:.2e} to S), margin {:.1e}",
            solution.q, test.g_plus, test.gap_plus, test.g_minus, test.gap_minus, opts.delta
        )));
    }
    let mut arcs = Vec::with_capacity(4);
    for (sign, direction) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        let arc = build_arc(prm, sign, direction, opts)?;
        if arc.min_primary_distance < opts.primary_threshold {
            return Err(Error::UnsafeCentre(format!(
                "class {}: arc {} passes {:.2e} from a primary although G is {:.2e} away from S",
                solution.q,
                arc.label,
                arc.min_primary_distance,
                test.gap_plus.min(test.gap_minus)
            )));
        }
        arcs.push(arc);
    }
    Ok(ArcFamily {
        solution,
        test,
        arcs,
    })
}

/// Halve β from `beta_start` until the centre is safe for class `q` and lies
/// inside the turning-point ellipse with a 1% margin.
pub fn discover_beta(
    centre: &Centre,
    a: f64,
    q: ResonanceClass,
    beta_start: f64,
    opts: &ArcOptions,
) -> Result<(Params, ResonanceSolution, CollisionTest)> {
    let mut beta = beta_start;
    for _ in 0..60 {
        if beta > 0.0 {
            let (prm, sol) = resonant_params(centre, a, beta, q, opts)?;
            let inside = centre.elliptic.xi.abs() < 0.99 * sol.xi_plus()?;
            if inside {
                let test = primary_collision_test(&centre.elliptic, &prm, opts.delta)?;
                if test.safe {
                    return Ok((prm, sol, test));
                }
            }
        }
        beta *= 0.5;
    }
    Err(Error::Range(format!(
        "no admissible beta <= {beta_start} found for class {q} at this centre"
    )))
}
