//! Nondegeneracy of the map `(β, A₁) ↦ (F, E)` at a resonant solution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::periods::{residual_f, solve_a1};
use crate::rational::ResonanceClass;

/// Certificate threshold on the row-normalized determinant.
pub const DEFAULT_DET_THRESHOLD: f64 = 1e-6;

/// Relative disagreement between step `h` and `h/2` estimates above which the
/// difference quotients are considered outside the linear regime.
const HALVING_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NondegeneracyCertificate {
    /// Determinant after scaling each row to unit max-entry.
    pub det_j: f64,
    pub jacobian: [[f64; 2]; 2],
    pub fd_step: f64,
    pub beta: f64,
    pub q: ResonanceClass,
    pub a1_hat: f64,
    pub threshold: f64,
    pub passes: bool,
}

fn derivative<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64, one_sided: bool) -> Result<f64> {
    if one_sided {
        Ok((-3.0 * f(x)? + 4.0 * f(x + h)? - f(x + 2.0 * h)?) / (2.0 * h))
    } else {
        Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
    }
}

/// Richardson-extrapolated derivative, rejecting steps where halving changes
/// the estimate noticeably.
fn checked_derivative<F: Fn(f64) -> Result<f64>>(
    f: F,
    x: f64,
    h: f64,
    one_sided: bool,
    what: &str,
) -> Result<f64> {
    let d1 = derivative(&f, x, h, one_sided)?;
    let d2 = derivative(&f, x, 0.5 * h, one_sided)?;
    let scale = d1.abs().max(d2.abs()).max(1e-300);
    if (d1 - d2).abs() > HALVING_TOL * scale {
        return Err(Error::Accuracy {
            message: format!(
                "finite-difference step {h:e} too large for {what}: estimates {d1:e} and {d2:e} disagree"
            ),
            best_estimate: d2,
        });
    }
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Estimate `det J` with `J = [[∂F/∂β, ∂F/∂A₁], [−2aA₁, −2aβ]]` at
/// `(β, Â₁(β, q))`, using a one-sided β-difference at `β = 0`.
pub fn nondegeneracy_certificate(
    beta: f64,
    q: ResonanceClass,
    a: f64,
    fd_step: f64,
) -> Result<NondegeneracyCertificate> {
    if !(fd_step > 0.0) {
        return Err(Error::domain(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    let sol = solve_a1(beta, q, a, 1e-13)?;
    let a1 = sol.a1_hat;
    let one_sided = beta < fd_step;
    let f_beta = checked_derivative(
        |b| residual_f(b, a1, q, a),
        beta,
        fd_step,
        one_sided,
        "dF/dbeta",
    )?;
    let f_a1 = checked_derivative(
        |x| residual_f(beta, x, q, a),
        a1,
        fd_step * a1.min(1.0),
        false,
        "dF/dA1",
    )?;
    let jacobian = [[f_beta, f_a1], [-2.0 * a * a1, -2.0 * a * beta]];
    let norm = |row: [f64; 2]| {
        let m = row[0].abs().max(row[1].abs());
        if m > 0.0 {
            [row[0] / m, row[1] / m]
        } else {
            row
        }
    };
    let (r0, r1) = (norm(jacobian[0]), norm(jacobian[1]));
    let det_j = r0[0] * r1[1] - r0[1] * r1[0];
    Ok(NondegeneracyCertificate {
        det_j,
        jacobian,
        fd_step,
        beta,
        q,
        a1_hat: a1,
        threshold: DEFAULT_DET_THRESHOLD,
        passes: det_j.abs() > DEFAULT_DET_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_determinant() {
        let q = ResonanceClass::integer(1).unwrap();
        let c = nondegeneracy_certificate(0.0, q, 1.0, 1e-4).unwrap();
        // second row (−2aÂ₁, 0) normalizes to (−1, 0): det = F_A₁ / max|row 1|
        let [f_b, f_a] = c.jacobian[0];
        assert!(f_a > 0.0);
        assert!((c.det_j - f_a / f_b.abs().max(f_a.abs())).abs() < 1e-12);
        assert!(c.passes);
    }

    #[test]
    fn huge_step_is_rejected() {
        let q = ResonanceClass::integer(1).unwrap();
        assert!(matches!(
            nondegeneracy_certificate(0.3, q, 1.0, 0.25),
            Err(Error::Accuracy { .. }) | Err(Error::Domain(_))
        ));
    }
}
