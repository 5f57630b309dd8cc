//! Run configuration: a flat TOML document overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Centre;
use crate::error::{Error, Result};
use crate::geometry::{CartesianPoint, EllipticPoint};
use crate::rational::ResonanceClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Classes {
    One(String),
    Many(Vec<String>),
}

/// Every setting a command may read. Unset fields fall back to defaults or
/// are reported as missing by the command that needs them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub energy: Option<f64>,
    pub a1: Option<f64>,
    #[serde(alias = "q")]
    pub classes: Option<Classes>,
    pub centre_xy: Option<[f64; 2]>,
    pub centre_elliptic: Option<[f64; 2]>,
    pub eps: Option<Vec<f64>>,
    pub tol: Option<f64>,
    /// Margin of the primary-collision test.
    pub delta: Option<f64>,
    pub angular_tol: Option<f64>,
    pub fd_step: Option<f64>,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_DELTA: f64 = 1e-4;
pub const DEFAULT_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Either a prescribed β or a prescribed energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Beta(f64),
    Energy(f64),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every field set in `over` replaced.
    pub fn merged(self, over: RunConfig) -> Self {
        Self {
            a: over.a.or(self.a),
            beta: over.beta.or(self.beta),
            energy: over.energy.or(self.energy),
            a1: over.a1.or(self.a1),
            classes: over.classes.or(self.classes),
            centre_xy: over.centre_xy.or(self.centre_xy),
            centre_elliptic: over.centre_elliptic.or(self.centre_elliptic),
            eps: over.eps.or(self.eps),
            tol: over.tol.or(self.tol),
            delta: over.delta.or(self.delta),
            angular_tol: over.angular_tol.or(self.angular_tol),
            fd_step: over.fd_step.or(self.fd_step),
            output_dir: over.output_dir.or(self.output_dir),
        }
    }

    /// Reject non-positive tolerances and a non-positive `a`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("tol", self.tol),
            ("delta", self.delta),
            ("angular_tol", self.angular_tol),
            ("fd_step", self.fd_step),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(eps) = &self.eps {
            if eps.is_empty() || eps.iter().any(|e| !(*e >= 0.0)) {
                return Err(Error::Config(
                    "eps must be a non-empty list of non-negative values".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a.unwrap_or(1.0)
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(DEFAULT_DELTA)
    }

    pub fn eps_list(&self) -> Vec<f64> {
        self.eps.clone().unwrap_or_else(|| DEFAULT_EPS.to_vec())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The class set `I`, parsed exactly from `m/n` strings.
    pub fn classes(&self) -> Result<Vec<ResonanceClass>> {
        let raw = match &self.classes {
            None => {
                return Err(Error::Config(
                    "no resonance class given (--q or --classes)".into(),
                ))
            }
            Some(Classes::One(s)) => vec![s.clone()],
            Some(Classes::Many(v)) => v.clone(),
        };
        if raw.is_empty() {
            return Err(Error::Config("the class set must not be empty".into()));
        }
        let mut out: Vec<ResonanceClass> = Vec::with_capacity(raw.len());
        for s in raw {
            let q: ResonanceClass = s.trim().parse()?;
            if !out.contains(&q) {
                out.push(q);
            }
        }
        Ok(out)
    }

    /// The single class of commands that work on one class.
    pub fn class(&self) -> Result<ResonanceClass> {
        let cs = self.classes()?;
        if cs.len() != 1 {
            return Err(Error::Config(format!(
                "this command takes one class, got {}",
                cs.len()
            )));
        }
        Ok(cs[0])
    }

    pub fn centre(&self) -> Result<Centre> {
        match (self.centre_xy, self.centre_elliptic) {
            (Some([x, y]), None) => Centre::from_cartesian(CartesianPoint::new(x, y)),
            (None, Some([xi, phi])) => Centre::from_elliptic(EllipticPoint::new(xi, phi)),
            (None, None) => Err(Error::Config(
                "no centre given (--centre-xy or --centre-elliptic)".into(),
            )),
            (Some(_), Some(_)) => Err(Error::Config(
                "give the centre either in Cartesian or in elliptic form".into(),
            )),
        }
    }

    /// Exactly one of β and energy.
    pub fn level(&self) -> Result<Level> {
        match (self.beta, self.energy) {
            (Some(b), None) => Ok(Level::Beta(b)),
            (None, Some(e)) => Ok(Level::Energy(e)),
            (None, None) => Err(Error::Config("give either beta or energy".into())),
            (Some(_), Some(_)) => Err(Error::Config(
                "beta and energy are mutually exclusive".into(),
            )),
        }
    }

    pub fn beta(&self) -> Result<f64> {
        self.beta
            .ok_or_else(|| Error::Config("beta is required".into()))
    }

    /// Canonical JSON used to name output files.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
            a = 1.0
            beta = 0.1
            classes = ["1", "1/2"]
            centre_xy = [0.3, 0.4]
            eps = [1e-2, 1e-3]
            output_dir = "runs"
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.classes().unwrap().len(), 2);
        assert_eq!(c.output_dir(), PathBuf::from("runs"));
        assert!(matches!(c.level().unwrap(), Level::Beta(b) if b == 0.1));
        let single: RunConfig = toml::from_str("q = \"2\"").unwrap();
        assert_eq!(single.class().unwrap(), ResonanceClass::integer(2).unwrap());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            beta: Some(0.1),
            tol: Some(1e-9),
            ..Default::default()
        };
        let flags = RunConfig {
            tol: Some(1e-11),
            ..Default::default()
        };
        let m = file.merged(flags);
        assert_eq!(m.beta, Some(0.1));
        assert_eq!(m.tol(), 1e-11);
    }

    #[test]
    fn invariants() {
        let both = RunConfig {
            beta: Some(0.1),
            energy: Some(-0.1),
            ..Default::default()
        };
        assert!(both.level().is_err());
        let bad = RunConfig {
            tol: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let empty = RunConfig {
            classes: Some(Classes::Many(vec![])),
            ..Default::default()
        };
        assert!(empty.classes().is_err());
        assert!(toml::from_str::<RunConfig>("q = 0.5").is_err());
        assert!(toml::from_str::<RunConfig>("unknown = 1").is_err());
    }

    #[test]
    fn canonical_ignores_output_dir() {
        let a = RunConfig {
            beta: Some(0.1),
            output_dir: Some("x".into()),
            ..Default::default()
        };
        let b = RunConfig {
            beta: Some(0.1),
            output_dir: Some("y".into()),
            ..Default::default()
        };
        assert_eq!(a.canonical(), b.canonical());
    }
}
