//! Data behind the potential curves and orbit pictures.

use serde::Serialize;
use serde_json::json;

use crate::arcs::{build_arc, initial_velocities, resonant_params, ArcOptions, CollisionArc};
use crate::dynamics::{integrate, Centre, EllipticState, Params, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{elliptic_to_cartesian, CartesianPoint, EllipticPoint};
use crate::periods::{bracketed_root, solve_a1};
use crate::rational::ResonanceClass;

use super::output::OutputSet;

/// `−2a cosh ξ − E sinh² ξ`, the ξ-part of the separated potential.
pub fn xi_potential(xi: f64, a: f64, energy: f64) -> f64 {
    -2.0 * a * xi.cosh() - energy * xi.sinh().powi(2)
}

/// `−E sin² φ`, the pendulum potential of the φ-motion.
pub fn phi_potential(phi: f64, energy: f64) -> f64 {
    -energy * phi.sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialMinimum {
    pub xi: f64,
    pub cosh_xi: f64,
    pub value: f64,
}

/// Minima of the ξ-potential found on a grid and refined on its derivative.
pub fn xi_potential_minima(a: f64, energy: f64, xi_max: f64) -> Result<Vec<PotentialMinimum>> {
    let dv = |xi: f64| -2.0 * a * xi.sinh() - energy * (2.0 * xi).sinh();
    let n = 4000;
    let grid: Vec<f64> = (0..=n)
        .map(|i| -xi_max + 2.0 * xi_max * i as f64 / n as f64)
        .collect();
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (f0, f1) = (dv(w[0]), dv(w[1]));
        // derivative going from negative to positive
        if f0 < 0.0 && f1 >= 0.0 {
            let (xi, _) = bracketed_root(|x| Ok(dv(x)), w[0], w[1], 1e-15)?;
            if xi.abs() > 1e-8 {
                out.push(PotentialMinimum {
                    xi,
                    cosh_xi: xi.cosh(),
                    value: xi_potential(xi, a, energy),
                });
            }
        }
    }
    Ok(out)
}

fn write_curve(
    out: &mut OutputSet,
    suffix: &str,
    header: [&str; 2],
    rows: impl Iterator<Item = (f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.write(suffix, "csv", &bytes)?;
    Ok(())
}

fn write_orbit(out: &mut OutputSet, suffix: &str, tr: &Trajectory, samples: usize) -> Result<()> {
    let mut buf = Vec::new();
    tr.resampled(samples)?.write_csv(&mut buf)?;
    out.write(suffix, "csv", &buf)?;
    Ok(())
}

pub fn fig1(out: &mut OutputSet, a: f64, energy: f64) -> Result<serde_json::Value> {
    if !(energy < 0.0) {
        return Err(Error::domain(
            "the potential figures need a negative energy",
        ));
    }
    let xi_max = 3.0;
    let n = 600;
    write_curve(
        out,
        "",
        ["xi", "potential"],
        (0..=n).map(|i| {
            let xi = -xi_max + 2.0 * xi_max * i as f64 / n as f64;
            (xi, xi_potential(xi, a, energy))
        }),
    )?;
    let minima = xi_potential_minima(a, energy, xi_max)?;
    let summary = json!({ "figure": 1, "a": a, "energy": energy, "minima": minima, "expected_cosh": a / energy.abs() });
    out.write_json("", &summary)?;
    Ok(summary)
}

pub fn fig2(out: &mut OutputSet, energy: f64) -> Result<serde_json::Value> {
    if !(energy < 0.0) {
        return Err(Error::domain(
            "the potential figures need a negative energy",
        ));
    }
    let n = 600;
    let tau = std::f64::consts::TAU;
    write_curve(
        out,
        "",
        ["phi", "potential"],
        (0..=n).map(|i| {
            let phi = -tau + 2.0 * tau * i as f64 / n as f64;
            (phi, phi_potential(phi, energy))
        }),
    )?;
    let summary = json!({ "figure": 2, "energy": energy, "maximum": -energy, "minima_at": [0.0, std::f64::consts::PI] });
    out.write_json("", &summary)?;
    Ok(summary)
}

/// Eighteen class-1 orbits started on the inter-primary segment plus the two
/// orbits through the primaries.
pub fn fig3(out: &mut OutputSet, a: f64, beta: f64) -> Result<serde_json::Value> {
    let q = ResonanceClass::integer(1)?;
    let sol = solve_a1(beta, q, a, 1e-13)?;
    let prm = Params::new(a, beta, sol.a1_hat)?.with_class(q);
    let period = sol.period();
    let mut files = Vec::new();
    for k in 1..=18 {
        let phi = std::f64::consts::PI * (k as f64 - 0.5) / 9.0;
        let p = EllipticPoint::new(0.0, phi);
        let (xs, ps) = initial_velocities(&p, beta, sol.a1_hat, a)?;
        let tr = integrate(
            &EllipticState {
                point: p,
                xi_prime: xs,
                phi_prime: ps,
            },
            &prm,
            period,
            1e-12,
            &[],
        )?;
        let suffix = format!("-orbit-{k:02}");
        write_orbit(out, &suffix, &tr, 2000)?;
        files.push(json!({ "file": out.path(&suffix, "csv"), "phi0": phi, "colliding": false }));
    }
    let p = EllipticPoint::new(0.0, 0.0);
    let xs = 2.0 * (a * (1.0 - sol.a1_hat * (1.0 + beta))).sqrt();
    let ps = 2.0 * (a * sol.a1_hat * (1.0 + beta)).sqrt();
    for (i, dir) in [1.0, -1.0].into_iter().enumerate() {
        let tr = integrate(
            &EllipticState {
                point: p,
                xi_prime: xs,
                phi_prime: dir * ps,
            },
            &prm,
            period,
            1e-12,
            &[],
        )?;
        let suffix = format!("-collision-{}", i + 1);
        write_orbit(out, &suffix, &tr, 2000)?;
        files.push(json!({ "file": out.path(&suffix, "csv"), "phi0": 0.0, "colliding": true }));
    }
    let summary = json!({
        "figure": 3, "a": a, "beta": beta, "q": q, "a1_hat": sol.a1_hat, "period": period,
        "xi_plus": sol.xi_plus()?, "primaries": [[1.0, 0.0], [-1.0, 0.0]], "orbits": files,
    });
    out.write_json("", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfIntersection {
    pub x: f64,
    pub y: f64,
    pub tau_first: f64,
    pub tau_second: f64,
}

fn cross(o: CartesianPoint, a: CartesianPoint, b: CartesianPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Transversal self-crossings of a closed polyline, skipping neighbouring
/// segments and the closing vertex.
pub fn self_intersections(poly: &[(f64, CartesianPoint)]) -> Vec<SelfIntersection> {
    let n = poly.len();
    let mut out = Vec::new();
    if n < 4 {
        return out;
    }
    let bbox = |i: usize| {
        let (p, q) = (poly[i].1, poly[i + 1].1);
        (p.x.min(q.x), p.x.max(q.x), p.y.min(q.y), p.y.max(q.y))
    };
    for i in 0..n - 1 {
        let bi = bbox(i);
        for j in i + 2..n - 1 {
            if i == 0 && j == n - 2 {
                continue;
            }
            let bj = bbox(j);
            if bi.1 < bj.0 || bj.1 < bi.0 || bi.3 < bj.2 || bj.3 < bi.2 {
                continue;
            }
            let (p1, p2, p3, p4) = (poly[i].1, poly[i + 1].1, poly[j].1, poly[j + 1].1);
            let (d1, d2) = (cross(p3, p4, p1), cross(p3, p4, p2));
            let (d3, d4) = (cross(p1, p2, p3), cross(p1, p2, p4));
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                let t = d1 / (d1 - d2);
                let s = d3 / (d3 - d4);
                out.push(SelfIntersection {
                    x: p1.x + t * (p2.x - p1.x),
                    y: p1.y + t * (p2.y - p1.y),
                    tau_first: poly[i].0 + t * (poly[i + 1].0 - poly[i].0),
                    tau_second: poly[j].0 + s * (poly[j + 1].0 - poly[j].0),
                });
            }
        }
    }
    out
}

fn polyline(tr: &Trajectory, n: usize) -> Result<Vec<(f64, CartesianPoint)>> {
    Ok(tr
        .resample(n)?
        .into_iter()
        .map(|s| (s.tau, elliptic_to_cartesian(&s.state.point)))
        .collect())
}

/// The two orbits of class `q` through `(2/3·ξ₊, 0)`.
pub fn orbits_through_two_thirds(
    a: f64,
    beta: f64,
    q: ResonanceClass,
) -> Result<(Centre, f64, [CollisionArc; 2])> {
    let sol = solve_a1(beta, q, a, 1e-13)?;
    let xi_plus = sol.xi_plus()?;
    let centre = Centre::from_elliptic(EllipticPoint::new(2.0 / 3.0 * xi_plus, 0.0))?;
    let opts = ArcOptions::default();
    let (prm, _) = resonant_params(&centre, a, beta, q, &opts)?;
    Ok((
        centre,
        xi_plus,
        [
            build_arc(&prm, 1, 1, &opts)?,
            build_arc(&prm, 1, -1, &opts)?,
        ],
    ))
}

pub fn fig_orbit_pair(
    out: &mut OutputSet,
    figure: u8,
    a: f64,
    beta: f64,
) -> Result<serde_json::Value> {
    let q = ResonanceClass::integer(if figure == 4 { 1 } else { 2 })?;
    let (centre, xi_plus, arcs) = orbits_through_two_thirds(a, beta, q)?;
    let mut orbits = Vec::new();
    let mut all_crossings = Vec::new();
    for arc in &arcs {
        let suffix = format!(
            "-orbit-{}",
            arc.label
                .to_string()
                .trim_start_matches(&format!("q{q}"))
                .replace('+', "p")
                .replace('-', "m")
        );
        let crossings = self_intersections(&polyline(&arc.path, 4000)?);
        if figure != 6 {
            write_orbit(out, &suffix, &arc.path, 4000)?;
        }
        let end = elliptic_to_cartesian(&arc.path.final_state().point);
        orbits.push(json!({
            "file": if figure != 6 { Some(out.path(&suffix, "csv")) } else { None },
            "label": arc.label.to_string(), "duration": arc.duration, "period": arc.period,
            "closure_error": end.distance(&centre.cartesian), "self_intersections": if figure == 4 { None } else { Some(&crossings) },
        }));
        all_crossings.extend(crossings);
    }
    let mut summary = json!({
        "figure": figure, "a": a, "beta": beta, "q": q, "xi_plus": xi_plus,
        "centre_elliptic": [centre.elliptic.xi, centre.elliptic.phi],
        "centre_xy": [centre.cartesian.x, centre.cartesian.y], "orbits": orbits,
    });
    if figure == 6 {
        let window = crossing_window(&all_crossings, &centre.cartesian);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["orbit", "piece", "tau", "x", "y"])?;
        for arc in &arcs {
            let mut piece = 0;
            let mut inside_prev = false;
            for (tau, p) in polyline(&arc.path, 20_000)? {
                let inside =
                    p.x >= window[0] && p.x <= window[1] && p.y >= window[2] && p.y <= window[3];
                if inside && !inside_prev {
                    piece += 1;
                }
                if inside {
                    w.serialize((arc.label.to_string(), piece, tau, p.x, p.y))?;
                }
                inside_prev = inside;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.write("", "csv", &bytes)?;
        summary["window"] = json!({ "x_min": window[0], "x_max": window[1], "y_min": window[2], "y_max": window[3] });
        summary["self_intersections_in_window"] = json!(all_crossings);
    }
    out.write_json("", &summary)?;
    Ok(summary)
}

/// Bounding box of the crossings, padded by a fifth of its size.
fn crossing_window(points: &[SelfIntersection], fallback: &CartesianPoint) -> [f64; 4] {
    if points.is_empty() {
        return [
            fallback.x - 0.25,
            fallback.x + 0.25,
            fallback.y - 0.25,
            fallback.y + 0.25,
        ];
    }
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let pad = 0.2 * (x1 - x0).max(y1 - y0).max(0.05);
    [x0 - pad, x1 + pad, y0 - pad, y1 + pad]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_at_cosh_two() {
        let m = xi_potential_minima(1.0, -0.5, 3.0).unwrap();
        assert_eq!(m.len(), 2);
        for p in m {
            assert!((p.cosh_xi - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn figure_eight_has_one_crossing() {
        let n = 401;
        let poly: Vec<(f64, CartesianPoint)> = (0..=n)
            .map(|i| {
                let t = 0.1 + std::f64::consts::TAU * i as f64 / n as f64;
                (t, CartesianPoint::new(t.sin(), (2.0 * t).sin() / 2.0))
            })
            .collect();
        let x = self_intersections(&poly);
        assert_eq!(x.len(), 1, "{x:?}");
        assert!(x[0].x.abs() < 1e-3 && x[0].y.abs() < 1e-3);
    }

    #[test]
    fn circle_has_none() {
        let poly: Vec<(f64, CartesianPoint)> = (0..=100)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 100.0;
                (t, CartesianPoint::new(t.cos(), t.sin()))
            })
            .collect();
        assert!(self_intersections(&poly).is_empty());
    }
}
