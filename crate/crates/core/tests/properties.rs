use std::f64::consts::TAU;

use proptest::prelude::*;
use tricentre::dynamics::{
    integrate, phi_energy, regularized_hamiltonian, vector_field, xi_energy, Centre, EllipticState,
    Params,
};
use tricentre::geometry::{
    cartesian_to_elliptic, elliptic_to_cartesian, velocity_to_cartesian, velocity_to_elliptic,
    CartesianPoint, EllipticPoint,
};
use tricentre::periods::{period_t1, period_t2, residual_f, solve_a1};
use tricentre::rational::ResonanceClass;

fn class() -> impl Strategy<Value = ResonanceClass> {
    (1u64..=6, 1u64..=6).prop_map(|(m, n)| ResonanceClass::new(m, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn elliptic_round_trip(x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let p = CartesianPoint::new(x, y);
        let (e, m) = cartesian_to_elliptic(&p);
        prop_assert!(e.xi >= 0.0);
        for q in [elliptic_to_cartesian(&e), elliptic_to_cartesian(&m)] {
            prop_assert!(q.distance(&p) <= 1e-12 * (1.0 + x.hypot(y)), "{:?} -> {:?}", p, q);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn velocity_maps_are_inverse(xi in -2.0f64..2.0, phi in 0.0f64..TAU, u in -3.0f64..3.0, v in -3.0f64..3.0) {
        let p = EllipticPoint::new(xi, phi);
        prop_assume!(p.metric_factor() > 1e-6);
        let w = velocity_to_elliptic(&p, velocity_to_cartesian(&p, [u, v]).unwrap()).unwrap();
        prop_assert!((w[0] - u).abs() < 1e-9 && (w[1] - v).abs() < 1e-9);
    }

    /// Accelerations are minus the gradient of the Hamiltonian's position part.
    #[test]
    fn field_is_a_gradient(
        xi in -1.5f64..1.5, phi in 0.0f64..TAU, beta in 0.0f64..0.9, a1 in 0.05f64..0.5,
        eps in prop_oneof![Just(0.0), 1e-3f64..1e-1],
    ) {
        let centre = Centre::from_cartesian(CartesianPoint::new(0.4, 0.7)).unwrap();
        let prm = Params::new(1.0, beta, a1).unwrap().with_centre(centre).with_eps(eps).unwrap();
        let at = |x: f64, f: f64| EllipticState::new(x, f, 0.0, 0.0);
        let c = elliptic_to_cartesian(&EllipticPoint::new(xi, phi));
        prop_assume!(c.distance(&centre.cartesian) > 0.05);
        let h = 1e-6;
        let pot = |x: f64, f: f64| regularized_hamiltonian(&at(x, f), &prm).unwrap();
        let gx = (pot(xi + h, phi) - pot(xi - h, phi)) / (2.0 * h);
        let gp = (pot(xi, phi + h) - pot(xi, phi - h)) / (2.0 * h);
        let f = vector_field(&at(xi, phi), &prm).unwrap();
        let scale = 1.0 + gx.abs().max(gp.abs());
        prop_assert!((f[2] + gx).abs() < 1e-6 * scale, "{} vs {}", f[2], -gx);
        prop_assert!((f[3] + gp).abs() < 1e-6 * scale, "{} vs {}", f[3], -gp);
    }

    #[test]
    fn energy_separates(
        xi in -2.0f64..2.0, phi in 0.0f64..TAU, u in -3.0f64..3.0, v in -3.0f64..3.0,
        beta in 0.0f64..0.9, a1 in 0.05f64..0.5, a in 0.5f64..2.0,
    ) {
        let prm = Params::new(a, beta, a1).unwrap();
        let s = EllipticState::new(xi, phi, u, v);
        let h = regularized_hamiltonian(&s, &prm).unwrap();
        let split = 2.0 * a * (xi_energy(&s, &prm) + phi_energy(&s, &prm));
        prop_assert!((h - split).abs() < 1e-10 * (1.0 + h.abs()));
    }

    #[test]
    fn residual_increases_in_a1(beta in 0.0f64..0.8, q in class(), t in 0.05f64..0.95) {
        let a1 = t / (1.0 + beta);
        let h = 1e-6 * a1;
        let d = residual_f(beta, a1 + h, q, 1.0).unwrap() - residual_f(beta, a1 - h, q, 1.0).unwrap();
        prop_assert!(d > 0.0);
    }

    /// Periods and the resonant root extend continuously to β = 0.
    #[test]
    fn smooth_beta_zero_limit(a1 in 0.05f64..0.9, q in class()) {
        let b = 1e-9;
        for (f0, fb) in [
            (period_t1(0.0, a1, 1.0).unwrap(), period_t1(b, a1, 1.0).unwrap()),
            (period_t2(0.0, a1, 1.0).unwrap(), period_t2(b, a1, 1.0).unwrap()),
        ] {
            prop_assert!((f0 - fb).abs() < 1e-6 * f0);
        }
        let s0 = solve_a1(0.0, q, 1.0, 1e-13).unwrap().a1_hat;
        let sb = solve_a1(b, q, 1.0, 1e-13).unwrap().a1_hat;
        prop_assert!((s0 - sb).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Along unperturbed orbits each separated energy is conserved.
    #[test]
    fn separated_energies_conserved(phi0 in 0.0f64..TAU, beta in 0.0f64..0.5, t in 0.1f64..0.9) {
        let a1 = t / (1.0 + beta);
        let prm = Params::new(1.0, beta, a1).unwrap();
        let p = EllipticPoint::new(0.0, phi0);
        let xs = 2.0 * (1.0 - a1 * (1.0 + beta)).sqrt();
        let ps = 2.0 * (beta * a1 * phi0.cos().powi(2) + a1).sqrt();
        let s0 = EllipticState { point: p, xi_prime: xs, phi_prime: ps };
        let tr = integrate(&s0, &prm, 10.0, 1e-12, &[]).unwrap();
        for s in tr.resample(50).unwrap() {
            prop_assert!(xi_energy(&s.state, &prm).abs() < 1e-9);
            prop_assert!(phi_energy(&s.state, &prm).abs() < 1e-9);
        }
    }
}
