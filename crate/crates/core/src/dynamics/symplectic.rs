//! Fixed-step fourth-order Yoshida composition, used to cross-check the
//! adaptive integrator. The regularized Hamiltonian is separable
//! (kinetic part in the momenta only), so drift/kick splitting applies.

use super::integrator::{DenseSegment, EventSpec, Interpolant, Recorder, StepOutcome, Trajectory};
use super::{EllipticState, Params};
use crate::error::{Error, Result};

/// Integrate with the symplectic scheme using `steps` equal steps.
///
/// Dense output between steps is cubic Hermite, so located events are only
/// accurate to `O(h⁴)`.
pub fn integrate_symplectic(
    s0: &EllipticState,
    prm: &Params,
    tau_end: f64,
    steps: usize,
    events: &[EventSpec],
) -> Result<Trajectory> {
    if steps == 0 || !tau_end.is_finite() {
        return Err(Error::domain(
            "symplectic integration needs a positive step count",
        ));
    }
    let y0 = s0.to_raw();
    let mut rec = Recorder::new(prm, 0.0, y0, events, 4, None)?;
    if tau_end == 0.0 {
        return Ok(rec.finish());
    }
    let field = *rec.field();
    let h = tau_end / steps as f64;

    let cbrt2 = 2f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 / (2.0 - cbrt2);
    let drifts = [0.5 * w1, 0.5 * (w0 + w1), 0.5 * (w0 + w1), 0.5 * w1];
    let kicks = [w1, w0, w1];

    let rhs = |t: f64, y: &[f64; 4]| {
        field.rhs(y).ok_or_else(|| Error::Integration {
            tau: t,
            message: "trajectory reached the third centre".into(),
        })
    };

    let mut y = y0;
    let mut f = rhs(0.0, &y)?;
    for i in 0..steps {
        let t = h * i as f64;
        let mut z = y;
        for (j, c) in drifts.iter().enumerate() {
            z[0] += c * h * z[2];
            z[1] += c * h * z[3];
            if let Some(d) = kicks.get(j) {
                let (ax, ap) =
                    field
                        .acceleration(z[0], z[1])
                        .ok_or_else(|| Error::Integration {
                            tau: t,
                            message: "trajectory reached the third centre".into(),
                        })?;
                z[2] += d * h * ax;
                z[3] += d * h * ap;
            }
        }
        let fz = rhs(t + h, &z)?;
        let scale = |v: &[f64; 4]| v.map(|c| c * h);
        let seg = DenseSegment::new(
            t,
            h,
            Interpolant::Hermite {
                y0: y,
                d0: scale(&f),
                y1: z,
                d1: scale(&fz),
            },
        );
        if let StepOutcome::Stopped = rec.push(seg, z)? {
            break;
        }
        y = z;
        f = fz;
    }
    Ok(rec.finish())
}
