//! Shooting experiments for the perturbed flow (`ε > 0`) near a collision arc.
//!
//! A segment starts on a circle of radius `r` around `C`, leaving radially,
//! and is Newton-adjusted in (departure angle, duration) so that it ends on
//! the same circle where the reference arc comes back in. Passages through the
//! `C`-neighbourhood between consecutive segments give the local expansion.

use serde::Serialize;

use crate::arcs::{ArcLabel, CollisionArc};
use crate::dynamics::{
    integrate_with, regularized_hamiltonian, Direction, EllipticState, EventKind, EventSpec,
    IntegratorOptions, Params, Trajectory,
};
use crate::error::{Error, Result};
use crate::geometry::{
    angle_difference, cartesian_to_elliptic, elliptic_to_cartesian, velocity_to_cartesian,
    velocity_to_elliptic, CartesianPoint, EllipticPoint,
};
use crate::periods::bracketed_root_within;

/// Largest perturbation the experiments accept.
pub const EPS_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowOptions {
    /// Integration tolerance.
    pub tol: f64,
    /// Newton stops once the end point misses its target by less than this.
    pub newton_tol: f64,
    pub max_iterations: usize,
    /// Smallest admissible entry radius.
    pub radius_floor: f64,
    /// Points of the perturbed segment used for the deviation measurement.
    pub deviation_samples: usize,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            newton_tol: 1e-9,
            max_iterations: 30,
            radius_floor: 1e-6,
            deviation_samples: 400,
        }
    }
}

/// Default entry radius `max(10ε, 1e−4)`.
pub fn default_entry_radius(eps: f64) -> f64 {
    (10.0 * eps).max(1e-4)
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowResult {
    pub label: ArcLabel,
    pub eps: f64,
    pub entry_radius: f64,
    /// Largest distance from the perturbed segment to the reference arc.
    pub max_deviation: f64,
    pub min_c_distance: f64,
    /// `|τ + r/s₀ + r/s_T − T|` with `s` the unperturbed speeds at `C`.
    pub time_defect: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Miss distance of the end point at the returned iterate.
    pub residual: f64,
    /// Largest `|𝓗ε|` along the segment.
    pub energy_error: f64,
    pub theta: f64,
    pub tau: f64,
    /// Unit Cartesian directions of motion at both ends of the segment.
    pub departure_direction: [f64; 2],
    pub arrival_direction: [f64; 2],
    #[serde(skip)]
    pub params: Params,
    #[serde(skip)]
    pub path: Option<Trajectory>,
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn angle_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

/// The preimage of `p` closest to `reference` in the plane of `(ξ, φ)`.
fn chart_near(p: &CartesianPoint, reference: &EllipticPoint) -> EllipticPoint {
    let (a, b) = cartesian_to_elliptic(p);
    let tau = std::f64::consts::TAU;
    [a, b]
        .into_iter()
        .map(|e| {
            let k = ((reference.phi - e.phi) / tau).round();
            EllipticPoint::new(e.xi, e.phi + k * tau)
        })
        .min_by(|x, y| {
            let dx = (x.xi - reference.xi).hypot(x.phi - reference.phi);
            let dy = (y.xi - reference.xi).hypot(y.phi - reference.phi);
            dx.total_cmp(&dy)
        })
        .expect("two preimages")
}

/// State at `point` moving in Cartesian direction `dir`, with speed fixed by `𝓗ε = 0`.
fn energy_state(prm: &Params, point: EllipticPoint, dir: [f64; 2]) -> Result<EllipticState> {
    let rest = EllipticState {
        point,
        xi_prime: 0.0,
        phi_prime: 0.0,
    };
    let h0 = regularized_hamiltonian(&rest, prm)?;
    if !(h0 < 0.0) {
        return Err(Error::Placement(format!(
            "no motion of energy {} is possible at ({}, {})",
            prm.energy(),
            point.xi,
            point.phi
        )));
    }
    let w = velocity_to_elliptic(&point, dir)?;
    let scale = (-2.0 * h0).sqrt() / w[0].hypot(w[1]);
    Ok(EllipticState {
        point,
        xi_prime: w[0] * scale,
        phi_prime: w[1] * scale,
    })
}

fn direction_of(s: &EllipticState) -> Result<[f64; 2]> {
    Ok(unit(velocity_to_cartesian(
        &s.point,
        [s.xi_prime, s.phi_prime],
    )?))
}

/// `|dz/dτ| = √D·|w′|`.
fn cartesian_speed(p: &EllipticPoint, w: [f64; 2]) -> f64 {
    p.metric_factor().sqrt() * w[0].hypot(w[1])
}

fn nearest_on_arc(arc: &Trajectory, poly: &[(f64, CartesianPoint)], p: &CartesianPoint) -> f64 {
    let (j, _) = poly
        .iter()
        .enumerate()
        .map(|(i, (_, q))| (i, q.distance(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty polyline");
    let (mut lo, mut hi) = (
        poly[j.saturating_sub(1)].0,
        poly[(j + 1).min(poly.len() - 1)].0,
    );
    let dist = |t: f64| {
        arc.eval_cartesian(t)
            .map(|q| q.distance(p))
            .unwrap_or(f64::INFINITY)
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (dist(x1), dist(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dist(x2);
        }
    }
    f1.min(f2).min(poly[j].1.distance(p))
}

/// Two-point shooting of the perturbed flow from the entry circle back to it.
///
/// With `eps = 0` the segment starts exactly at `C` and reproduces the arc.
pub fn shoot_segment(
    arc: &CollisionArc,
    eps: f64,
    entry_radius: f64,
    opts: &ShadowOptions,
) -> Result<ShadowResult> {
    if !(0.0..=EPS_MAX).contains(&eps) {
        return Err(Error::domain(format!(
            "eps must lie in [0, {EPS_MAX}], got {eps}"
        )));
    }
    let centre = *arc
        .params
        .centre()
        .ok_or_else(|| Error::domain("arc has no third centre attached"))?;
    let prm = arc.params.with_eps(eps)?;
    let r = if eps == 0.0 { 0.0 } else { entry_radius };
    if eps > 0.0 {
        let r_min = 1e-2 * eps;
        if !(entry_radius >= opts.radius_floor && entry_radius > 2.0 * r_min) {
            return Err(Error::domain(format!(
                "entry radius {entry_radius:e} must be at least {:e} and exceed twice r_min = {r_min:e}",
                opts.radius_floor
            )));
        }
        let c = centre.elliptic;
        if entry_radius >= 0.5 * c.distance_to_c1().min(c.distance_to_c2()) {
            return Err(Error::domain("entry circle reaches too close to a primary"));
        }
    }

    let c = centre.cartesian;
    let c_ell = centre.elliptic;
    let v0 = unit(arc.initial_cartesian_velocity());
    let vt = unit(arc.final_cartesian_velocity());
    let target = CartesianPoint::new(c.x - r * vt[0], c.y - r * vt[1]);
    let s0 = cartesian_speed(&c_ell, arc.v0);
    let st = cartesian_speed(&c_ell, arc.v_t);
    let iopts = IntegratorOptions::with_tol(opts.tol);

    let start = |theta: f64| -> Result<EllipticState> {
        let u = [theta.cos(), theta.sin()];
        let p = if r == 0.0 {
            c_ell
        } else {
            chart_near(&CartesianPoint::new(c.x + r * u[0], c.y + r * u[1]), &c_ell)
        };
        energy_state(&prm, p, u)
    };
    let run = |theta: f64, tau: f64| -> Result<Trajectory> {
        integrate_with(&start(theta)?, &prm, tau, &[], &iopts)
    };
    let miss = |tr: &Trajectory| {
        let e = elliptic_to_cartesian(&tr.final_state().point);
        [e.x - target.x, e.y - target.y]
    };

    let mut theta = angle_of(v0);
    let mut tau = arc.duration - r / s0 - r / st;
    let mut best: Option<(f64, f64, f64, Trajectory)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let dtheta = 1e-7;
    for it in 0..=opts.max_iterations {
        iterations = it;
        let tr = match run(theta, tau) {
            Ok(tr) => tr,
            Err(_) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        let m = miss(&tr);
        let res = m[0].hypot(m[1]);
        let improved = best.as_ref().is_none_or(|b| res < b.2);
        if improved {
            best = Some((theta, tau, res, tr.clone()));
        }
        if res <= opts.newton_tol {
            converged = true;
            break;
        }
        if it == opts.max_iterations {
            break;
        }
        let end = tr.final_state();
        let vel = velocity_to_cartesian(&end.point, [end.xi_prime, end.phi_prime])?;
        let mp = miss(&run(theta + dtheta, tau)?);
        let mm = miss(&run(theta - dtheta, tau)?);
        let jt = [
            (mp[0] - mm[0]) / (2.0 * dtheta),
            (mp[1] - mm[1]) / (2.0 * dtheta),
        ];
        let det = jt[0] * vel[1] - jt[1] * vel[0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let d_theta = -(m[0] * vel[1] - m[1] * vel[0]) / det;
        let d_tau = -(jt[0] * m[1] - jt[1] * m[0]) / det;
        // keep steps modest: the map is only locally linear
        let limit = 0.1_f64;
        let scale = (d_theta.abs() / limit).max(1.0);
        theta += d_theta / scale;
        tau += d_tau / scale;
    }
    let (theta, tau, residual, path) = best.expect("at least one iterate");

    let arc_poly: Vec<(f64, CartesianPoint)> = arc
        .path
        .resample(4000)?
        .into_iter()
        .map(|s| (s.tau, elliptic_to_cartesian(&s.state.point)))
        .collect();
    let mut max_dev: f64 = 0.0;
    let mut min_c = f64::INFINITY;
    let mut energy_error: f64 = 0.0;
    for s in path.resample(opts.deviation_samples)? {
        let p = elliptic_to_cartesian(&s.state.point);
        max_dev = max_dev.max(nearest_on_arc(&arc.path, &arc_poly, &p));
        min_c = min_c.min(p.distance(&c));
        if eps > 0.0 {
            energy_error = energy_error.max(regularized_hamiltonian(&s.state, &prm)?.abs());
        }
    }
    if eps == 0.0 {
        energy_error = path.energy_drift;
    }
    let first = path.initial_state();
    let last = path.final_state();
    Ok(ShadowResult {
        label: arc.label,
        eps,
        entry_radius: r,
        max_deviation: max_dev,
        min_c_distance: min_c,
        time_defect: (tau + if r > 0.0 { r / s0 + r / st } else { 0.0 } - arc.duration).abs(),
        converged,
        iterations,
        residual,
        energy_error,
        theta,
        tau,
        departure_direction: direction_of(&first)?,
        arrival_direction: direction_of(&last)?,
        params: prm,
        path: Some(path),
    })
}

fn rotate(v: [f64; 2], a: f64) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Passage through the entry circle: enter with impact parameter `b` and
/// direction `d`, leave with impact parameter and direction angle.
struct Passage<'a> {
    prm: &'a Params,
    radius: f64,
    tol: f64,
}

impl Passage<'_> {
    fn exit(&self, d: [f64; 2], b: f64) -> Result<(f64, f64)> {
        let centre = self.prm.centre().expect("shadow params carry a centre");
        let (c, r) = (centre.cartesian, self.radius);
        let n = [-d[1], d[0]];
        let s = (b / r).clamp(-1.0, 1.0);
        let back = (1.0 - s * s).sqrt();
        let p = CartesianPoint::new(
            c.x + r * (-back * d[0] + s * n[0]),
            c.y + r * (-back * d[1] + s * n[1]),
        );
        let st = energy_state(self.prm, chart_near(&p, &centre.elliptic), d)?;
        let speed = cartesian_speed(&st.point, [st.xi_prime, st.phi_prime]);
        let ev = EventSpec::new(EventKind::CentreRadius { radius: r })
            .direction(Direction::Increasing)
            .terminal();
        let tr = integrate_with(
            &st,
            self.prm,
            50.0 * r / speed,
            &[ev],
            &IntegratorOptions::with_tol(self.tol),
        )?;
        let out = tr.events.first().ok_or_else(|| Error::Integration {
            tau: tr.tau_end(),
            message: "no exit from the entry circle".into(),
        })?;
        let q = elliptic_to_cartesian(&out.state.point);
        let e = direction_of(&out.state)?;
        let b_out = (q.x - c.x) * e[1] - (q.y - c.y) * e[0];
        Ok((b_out, angle_of(e)))
    }

    /// Impact parameter turning `d_in` into `d_out`.
    fn solve(&self, d_in: [f64; 2], d_out: [f64; 2]) -> Result<f64> {
        let want = angle_of(d_out);
        let resid = |b: f64| -> Option<f64> {
            self.exit(d_in, b)
                .ok()
                .map(|(_, a)| angle_difference(a, want))
        };
        for sign in [1.0, -1.0] {
            let grid: Vec<f64> = (0..=80)
                .map(|k| sign * self.radius * 0.99 * 10f64.powf(-3.0 * k as f64 / 80.0))
                .collect();
            let vals: Vec<Option<f64>> = grid.iter().map(|&b| resid(b)).collect();
            for k in 0..grid.len() - 1 {
                if let (Some(f0), Some(f1)) = (vals[k], vals[k + 1]) {
                    if f0.signum() != f1.signum() && f0.abs() < 1.5 && f1.abs() < 1.5 {
                        let (lo, hi) = if grid[k] < grid[k + 1] {
                            (grid[k], grid[k + 1])
                        } else {
                            (grid[k + 1], grid[k])
                        };
                        let f = |b: f64| {
                            resid(b).ok_or_else(|| Error::Integration {
                                tau: f64::NAN,
                                message: "passage failed inside the bracket".into(),
                            })
                        };
                        let (b, _) = bracketed_root_within(f, lo, hi, 1e-12, 1e-13 * self.radius)?;
                        return Ok(b);
                    }
                }
            }
        }
        Err(Error::Structural(
            "no passage through the C-neighbourhood joins the two segments".into(),
        ))
    }
}

/// `ln σ_max` of the passage map `(b, α) ↦ (b_out, α_out)` between each pair of
/// consecutive segments, averaged over the pairs.
pub fn local_expansion_rate(results: &[ShadowResult], eps: f64) -> Result<f64> {
    Ok(expansion_rates(results, eps)?.iter().sum::<f64>() / (results.len() - 1) as f64)
}

/// Per-passage expansion rates; see [`local_expansion_rate`].
pub fn expansion_rates(results: &[ShadowResult], eps: f64) -> Result<Vec<f64>> {
    if results.len() < 2 {
        return Err(Error::Refused(
            "the expansion rate needs at least two consecutive segments".into(),
        ));
    }
    if let Some(r) = results.iter().find(|r| !r.converged) {
        return Err(Error::Refused(format!(
            "segment {} did not converge",
            r.label
        )));
    }
    if !(eps > 0.0) || results.iter().any(|r| r.eps != eps) {
        return Err(Error::domain(format!(
            "all segments must share eps = {eps} > 0"
        )));
    }
    results
        .windows(2)
        .map(|w| {
            let passage = Passage {
                prm: &w[0].params,
                radius: w[0].entry_radius,
                tol: 1e-12,
            };
            let d_in = w[0].arrival_direction;
            let b = passage.solve(d_in, w[1].departure_direction)?;
            let hb = 1e-4 * b.abs();
            let ha = 1e-6;
            let at = |db: f64, da: f64| passage.exit(rotate(d_in, da), b + db);
            let (bp, ap) = at(hb, 0.0)?;
            let (bm, am) = at(-hb, 0.0)?;
            let (bq, aq) = at(0.0, ha)?;
            let (bn, an) = at(0.0, -ha)?;
            let j = [
                [(bp - bm) / (2.0 * hb), (bq - bn) / (2.0 * ha)],
                [
                    angle_difference(ap, am) / (2.0 * hb),
                    angle_difference(aq, an) / (2.0 * ha),
                ],
            ];
            // largest singular value of a 2×2 matrix
            let (a, bb, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
            let s = a * a + bb * bb + c * c + d * d;
            let det = a * d - bb * c;
            let sigma = (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt();
            Ok(sigma.ln())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_choice_keeps_phi_continuous() {
        let reference = EllipticPoint::new(0.3, 6.2);
        let p = elliptic_to_cartesian(&EllipticPoint::new(0.31, 6.25));
        let e = chart_near(&p, &reference);
        assert!((e.xi - 0.31).abs() < 1e-12 && (e.phi - 6.25).abs() < 1e-12);
        let mirror = EllipticPoint::new(-0.3, -6.2);
        let e = chart_near(&p, &mirror);
        assert!((e.xi + 0.31).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_rotation() {
        let v = rotate([1.0, 0.0], std::f64::consts::FRAC_PI_2);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }
}
