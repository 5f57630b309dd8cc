//! Adaptive DOP853 integration of the regularized flow with dense output and
//! event location.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::tableau::*;
use super::{EllipticState, Params, RegularizedField};
use crate::error::{Error, Result};
use crate::geometry::{
    elliptic_to_cartesian, physical_time_of, velocity_matrix, CartesianPoint, EllipticPoint,
};
use crate::special::adaptive_quadrature;

type State = [f64; 4];

/// Sign filter applied to located events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Any,
    Increasing,
    Decreasing,
}

/// What an event function watches.
///
/// For the crossing kinds, "increasing" means the coordinate grows through the
/// level (`ξ′ > 0` resp. `φ′ > 0`); for the radius kinds it means leaving the
/// disc. The closest-approach kinds record local minima of the distance only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    XiCrossing { value: f64 },
    PhiCrossing { value: f64 },
    CentreRadius { radius: f64 },
    PrimaryRadius { radius: f64 },
    CentreClosest,
    PrimaryClosest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    #[serde(default)]
    pub direction: Direction,
    /// Stop the integration at the first accepted occurrence.
    #[serde(default)]
    pub terminal: bool,
}

impl EventSpec {
    pub fn new(kind: EventKind) -> Self {
        Self {
            kind,
            direction: Direction::Any,
            terminal: false,
        }
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }
}

/// A located event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    /// Index into the event list passed to the integrator.
    pub spec: usize,
    pub kind: EventKind,
    /// Which primary (1 or 2) for the primary kinds.
    pub primary: Option<u8>,
    pub tau: f64,
    pub state: EllipticState,
    /// Distance to the watched point (centre or primary) at the event.
    pub distance: Option<f64>,
    pub increasing: bool,
}

#[derive(Debug, Clone)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
    /// Near the third centre the step is capped at this fraction of
    /// distance / speed.
    pub centre_step_factor: f64,
    /// Radius of the ball around the third centre the integrator refuses to
    /// enter; defaults to `1e-2·ε`.
    pub r_min: Option<f64>,
    /// Sub-intervals per step on which event functions are sampled.
    pub event_subdivisions: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h_max: 0.25,
            h_init: None,
            max_steps: 2_000_000,
            centre_step_factor: 0.1,
            r_min: None,
            event_subdivisions: 4,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub tau: f64,
    pub state: EllipticState,
}

#[derive(Debug, Clone)]
pub(crate) enum Interpolant {
    /// Seventh-order DOP853 continuous extension.
    Dop853([State; 8]),
    /// Cubic Hermite on end states and derivatives (already scaled by h).
    Hermite {
        y0: State,
        d0: State,
        y1: State,
        d1: State,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct DenseSegment {
    t0: f64,
    h: f64,
    interp: Interpolant,
}

impl DenseSegment {
    pub(crate) fn new(t0: f64, h: f64, interp: Interpolant) -> Self {
        Self { t0, h, interp }
    }

    fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    fn eval(&self, t: f64) -> State {
        let s = if self.h == 0.0 {
            0.0
        } else {
            (t - self.t0) / self.h
        };
        let s1 = 1.0 - s;
        let mut y = [0.0; 4];
        match &self.interp {
            Interpolant::Dop853(c) => {
                for i in 0..4 {
                    let conpar = c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]));
                    y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * conpar)));
                }
            }
            Interpolant::Hermite { y0, d0, y1, d1 } => {
                let h00 = (1.0 + 2.0 * s) * s1 * s1;
                let h10 = s * s1 * s1;
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = -s * s * s1;
                for i in 0..4 {
                    y[i] = h00 * y0[i] + h10 * d0[i] + h01 * y1[i] + h11 * d1[i];
                }
            }
        }
        y
    }
}

/// Dense output of one integration together with its located events.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<EventRecord>,
    /// `max |𝓗ε(τ) − 𝓗ε(0)|` over accepted steps.
    pub energy_drift: f64,
    pub(crate) segments: Vec<DenseSegment>,
    pub(crate) params: Params,
    initial: State,
}

impl Trajectory {
    pub(crate) fn start(params: &Params, tau0: f64, y0: State) -> Self {
        Self {
            samples: vec![TrajectorySample {
                tau: tau0,
                state: EllipticState::from_raw(&y0),
            }],
            events: Vec::new(),
            energy_drift: 0.0,
            segments: Vec::new(),
            params: *params,
            initial: y0,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn tau_start(&self) -> f64 {
        self.samples[0].tau
    }

    pub fn tau_end(&self) -> f64 {
        self.samples
            .last()
            .expect("trajectory has a start sample")
            .tau
    }

    pub fn duration(&self) -> f64 {
        self.tau_end() - self.tau_start()
    }

    pub fn initial_state(&self) -> EllipticState {
        EllipticState::from_raw(&self.initial)
    }

    pub fn final_state(&self) -> EllipticState {
        self.samples
            .last()
            .expect("trajectory has a start sample")
            .state
    }

    fn segment_at(&self, tau: f64) -> Option<&DenseSegment> {
        let forward = self.tau_end() >= self.tau_start();
        let idx = self
            .segments
            .partition_point(|s| if forward { s.t1() < tau } else { s.t1() > tau });
        self.segments
            .get(idx.min(self.segments.len().saturating_sub(1)))
    }

    /// Raw `[ξ, φ, ξ′, φ′]` with the angle left unwrapped.
    pub fn eval_raw(&self, tau: f64) -> Result<[f64; 4]> {
        let (lo, hi) = ordered(self.tau_start(), self.tau_end());
        let slack = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if !(tau >= lo - slack && tau <= hi + slack) {
            return Err(Error::Refused(format!(
                "tau = {tau} outside the integrated span [{lo}, {hi}]"
            )));
        }
        Ok(match self.segment_at(tau) {
            Some(seg) => seg.eval(tau),
            None => self.initial,
        })
    }

    pub fn eval(&self, tau: f64) -> Result<EllipticState> {
        Ok(EllipticState::from_raw(&self.eval_raw(tau)?))
    }

    pub fn eval_cartesian(&self, tau: f64) -> Result<CartesianPoint> {
        Ok(elliptic_to_cartesian(&self.eval(tau)?.point))
    }

    /// `n + 1` equally spaced states over the whole span.
    pub fn resample(&self, n: usize) -> Result<Vec<TrajectorySample>> {
        let n = n.max(1);
        let (t0, t1) = (self.tau_start(), self.tau_end());
        (0..=n)
            .map(|i| {
                let tau = if i == n {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / n as f64
                };
                Ok(TrajectorySample {
                    tau,
                    state: self.eval(tau)?,
                })
            })
            .collect()
    }

    /// The same trajectory with its samples replaced by `n + 1` equally spaced ones.
    pub fn resampled(&self, n: usize) -> Result<Trajectory> {
        let mut out = self.clone();
        out.samples = self.resample(n)?;
        Ok(out)
    }

    /// Cut the trajectory at `tau`, dropping later samples and events.
    pub fn truncate(&mut self, tau: f64) -> Result<()> {
        let forward = self.tau_end() >= self.tau_start();
        let end = self.eval(tau)?;
        let before = |t: f64| if forward { t < tau } else { t > tau };
        let t_start = self.tau_start();
        self.samples.retain(|s| before(s.tau) || s.tau == t_start);
        if self.samples.len() > 1 || self.samples[0].tau != tau {
            self.samples.push(TrajectorySample { tau, state: end });
        }
        self.events.retain(|e| before(e.tau) || e.tau == tau);
        let keep = self.segments.partition_point(|s| before(s.t0));
        self.segments.truncate(keep);
        Ok(())
    }

    pub fn events_for(&self, spec: usize) -> impl Iterator<Item = &EventRecord> {
        self.events.iter().filter(move |e| e.spec == spec)
    }

    /// Physical time `t(τ)` at every sample, zero at the start.
    ///
    /// Unlike [`physical_time_of`] this tolerates isolated passages through a
    /// primary, where the integrand merely vanishes.
    pub fn physical_times(&self, tol: f64) -> Result<Vec<f64>> {
        let metric = |tau: f64| match self.eval_raw(tau) {
            Ok(y) => EllipticPoint {
                xi: y[0],
                phi: y[1],
            }
            .metric_factor(),
            Err(_) => f64::NAN,
        };
        let mut t = 0.0;
        let mut out = vec![0.0];
        for w in self.samples.windows(2) {
            t += adaptive_quadrature(metric, w[0].tau, w[1].tau, tol)?.value;
            out.push(t);
        }
        Ok(out)
    }

    /// Physical time at every sample, failing if a sample sits on a primary.
    pub fn physical_times_strict(&self, tol: f64) -> Result<Vec<f64>> {
        let taus: Vec<f64> = self.samples.iter().map(|s| s.tau).collect();
        let path = |tau: f64| match self.eval_raw(tau) {
            Ok(y) => EllipticPoint {
                xi: y[0],
                phi: y[1],
            },
            Err(_) => EllipticPoint {
                xi: f64::NAN,
                phi: f64::NAN,
            },
        };
        physical_time_of(path, &taus, tol)
    }

    /// CSV with columns `tau, xi, phi, xi_prime, phi_prime, t_physical, x, y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let times = self.physical_times(1e-10)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "tau",
            "xi",
            "phi",
            "xi_prime",
            "phi_prime",
            "t_physical",
            "x",
            "y",
        ])?;
        for (s, t) in self.samples.iter().zip(times) {
            let c = elliptic_to_cartesian(&s.state.point);
            w.serialize((
                s.tau,
                s.state.point.xi,
                s.state.point.phi,
                s.state.xi_prime,
                s.state.phi_prime,
                t,
                c.x,
                c.y,
            ))?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON document with the samples, events and energy drift.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "tau_start": self.tau_start(),
            "tau_end": self.tau_end(),
            "energy_drift": self.energy_drift,
            "samples": self.samples,
            "events": self.events,
        })
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One scalar event function, derived from an [`EventSpec`].
struct Watch<'a> {
    spec: usize,
    kind: EventKind,
    direction: Direction,
    terminal: bool,
    primary: Option<u8>,
    target: Option<CartesianPoint>,
    g: Box<dyn Fn(&State) -> f64 + 'a>,
}

fn cartesian_velocity(y: &State) -> [f64; 2] {
    let u = velocity_matrix(&EllipticPoint {
        xi: y[0],
        phi: y[1],
    });
    [
        u[0][0] * y[2] + u[0][1] * y[3],
        u[1][0] * y[2] + u[1][1] * y[3],
    ]
}

fn position(y: &State) -> CartesianPoint {
    elliptic_to_cartesian(&EllipticPoint {
        xi: y[0],
        phi: y[1],
    })
}

fn build_watches<'a>(specs: &[EventSpec], prm: &Params) -> Result<Vec<Watch<'a>>> {
    let centre = prm.centre().map(|c| c.cartesian);
    let need_centre =
        || centre.ok_or_else(|| Error::domain("a centre event needs a third-centre position"));
    let mut out = Vec::new();
    for (spec, e) in specs.iter().enumerate() {
        let mut push = |primary: Option<u8>,
                        target: Option<CartesianPoint>,
                        g: Box<dyn Fn(&State) -> f64 + 'a>| {
            out.push(Watch {
                spec,
                kind: e.kind,
                direction: e.direction,
                terminal: e.terminal,
                primary,
                target,
                g,
            })
        };
        match e.kind {
            EventKind::XiCrossing { value } => push(None, None, Box::new(move |y| y[0] - value)),
            EventKind::PhiCrossing { value } => {
                push(None, None, Box::new(move |y| (0.5 * (y[1] - value)).sin()))
            }
            EventKind::CentreRadius { radius } => {
                let c = need_centre()?;
                push(
                    None,
                    Some(c),
                    Box::new(move |y| position(y).distance(&c) - radius),
                )
            }
            EventKind::CentreClosest => {
                let c = need_centre()?;
                push(None, Some(c), Box::new(move |y| approach_rate(y, &c)))
            }
            EventKind::PrimaryRadius { radius } => {
                for (i, c) in [(1u8, CartesianPoint::C1), (2u8, CartesianPoint::C2)] {
                    push(
                        Some(i),
                        Some(c),
                        Box::new(move |y| position(y).distance(&c) - radius),
                    );
                }
            }
            EventKind::PrimaryClosest => {
                for (i, c) in [(1u8, CartesianPoint::C1), (2u8, CartesianPoint::C2)] {
                    push(Some(i), Some(c), Box::new(move |y| approach_rate(y, &c)));
                }
            }
        }
    }
    Ok(out)
}

/// `½ d/dτ |z − c|²`; its upward zeros are local distance minima.
fn approach_rate(y: &State, c: &CartesianPoint) -> f64 {
    let p = position(y);
    let v = cartesian_velocity(y);
    (p.x - c.x) * v[0] + (p.y - c.y) * v[1]
}

impl Watch<'_> {
    fn is_increasing(&self, y: &State, g_before: f64, g_after: f64) -> bool {
        match self.kind {
            EventKind::XiCrossing { .. } => y[2] > 0.0,
            EventKind::PhiCrossing { .. } => y[3] > 0.0,
            _ => g_after > g_before,
        }
    }

    fn accepts(&self, increasing: bool) -> bool {
        match self.kind {
            EventKind::CentreClosest | EventKind::PrimaryClosest => increasing,
            _ => match self.direction {
                Direction::Any => true,
                Direction::Increasing => increasing,
                Direction::Decreasing => !increasing,
            },
        }
    }
}

const EVENT_TAU_TOL: f64 = 1e-12;

/// Root of `g` on `[a, b]` given opposite signs at the ends; Illinois regula
/// falsi with a bisection fallback whenever the bracket stalls.
fn refine_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let width = (b - a).abs();
        if width <= EVENT_TAU_TOL {
            break;
        }
        let mut t = (a * gb - b * ga) / (gb - ga);
        let (lo, hi) = ordered(a, b);
        if !(t > lo && t < hi) || side.abs() > 2 {
            t = 0.5 * (a + b);
            side = 0;
        }
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if gt.signum() == gb.signum() {
            b = t;
            gb = gt;
            if side < 0 {
                ga *= 0.5;
            }
            side = if side < 0 { side - 1 } else { -1 };
        } else {
            a = t;
            ga = gt;
            if side > 0 {
                gb *= 0.5;
            }
            side = if side > 0 { side + 1 } else { 1 };
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

/// Shared bookkeeping of both integrators: samples, energy drift, events.
pub(crate) struct Recorder<'a> {
    pub traj: Trajectory,
    field: RegularizedField<'a>,
    h0: f64,
    watches: Vec<Watch<'a>>,
    subdivisions: usize,
    r_min: Option<(CartesianPoint, f64)>,
}

/// Result of feeding one step to the recorder.
pub(crate) enum StepOutcome {
    Continue,
    Stopped,
}

impl<'a> Recorder<'a> {
    pub fn new(
        prm: &'a Params,
        tau0: f64,
        y0: State,
        specs: &[EventSpec],
        subdivisions: usize,
        r_min: Option<f64>,
    ) -> Result<Self> {
        let field = RegularizedField { params: prm };
        let h0 = field.hamiltonian(&y0).ok_or_else(|| Error::Integration {
            tau: tau0,
            message: "initial state coincides with the third centre".into(),
        })?;
        let r_min = match (prm.centre(), prm.eps() > 0.0) {
            (Some(c), true) => {
                let r = r_min.unwrap_or(1e-2 * prm.eps());
                let d = position(&y0).distance(&c.cartesian);
                if d < r {
                    return Err(Error::Integration {
                        tau: tau0,
                        message: format!(
                            "initial distance {d:e} to the third centre is inside r_min = {r:e}"
                        ),
                    });
                }
                Some((c.cartesian, r))
            }
            _ => None,
        };
        Ok(Self {
            traj: Trajectory::start(prm, tau0, y0),
            field,
            h0,
            watches: build_watches(specs, prm)?,
            subdivisions: subdivisions.max(1),
            r_min,
        })
    }

    pub fn field(&self) -> &RegularizedField<'a> {
        &self.field
    }

    /// Append an accepted step; locates events on it and may stop early.
    pub fn push(&mut self, seg: DenseSegment, y_end: State) -> Result<StepOutcome> {
        let (t0, t1) = (seg.t0, seg.t1());
        let n = self.subdivisions;
        let nodes: Vec<f64> = (0..=n)
            .map(|i| {
                if i == n {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / n as f64
                }
            })
            .collect();
        let states: Vec<State> = nodes
            .iter()
            .enumerate()
            .map(|(i, &t)| if i == n { y_end } else { seg.eval(t) })
            .collect();

        if let Some((c, r)) = self.r_min {
            for (&t, y) in nodes.iter().zip(&states) {
                let d = position(y).distance(&c);
                if d < r {
                    return Err(Error::Integration {
                        tau: t,
                        message: format!(
                            "refused to enter the r_min = {r:e} ball around the third centre (distance {d:e})"
                        ),
                    });
                }
            }
        }

        let mut found: Vec<EventRecord> = Vec::new();
        let mut stop_at: Option<f64> = None;
        for w in &self.watches {
            let gs: Vec<f64> = states.iter().map(|y| (w.g)(y)).collect();
            for i in 0..n {
                let (ga, gb) = (gs[i], gs[i + 1]);
                // a zero at the left node belongs to the previous interval
                if ga == 0.0 || ga.signum() == gb.signum() {
                    continue;
                }
                let tau = refine_root(|t| (w.g)(&seg.eval(t)), nodes[i], nodes[i + 1], ga, gb);
                let y = if tau == t1 { y_end } else { seg.eval(tau) };
                let increasing = w.is_increasing(&y, ga, gb);
                if !w.accepts(increasing) {
                    continue;
                }
                let distance = w.target.map(|c| position(&y).distance(&c));
                found.push(EventRecord {
                    spec: w.spec,
                    kind: w.kind,
                    primary: w.primary,
                    tau,
                    state: EllipticState::from_raw(&y),
                    distance,
                    increasing,
                });
                if w.terminal {
                    let earlier = match stop_at {
                        None => true,
                        Some(s) => (tau - s) * (t1 - t0) < 0.0,
                    };
                    if earlier {
                        stop_at = Some(tau);
                    }
                }
            }
        }
        found.sort_by(|a, b| ((a.tau - b.tau) * (t1 - t0)).total_cmp(&0.0));

        self.traj.segments.push(seg);
        let h = self.field.hamiltonian(&y_end).unwrap_or(f64::NAN);
        self.traj.energy_drift = self.traj.energy_drift.max((h - self.h0).abs());

        match stop_at {
            Some(ts) => {
                let before = |t: f64| (ts - t) * (t1 - t0) >= 0.0;
                self.traj
                    .events
                    .extend(found.into_iter().filter(|e| before(e.tau)));
                let y = self.traj.segments.last().expect("just pushed").eval(ts);
                self.traj.samples.push(TrajectorySample {
                    tau: ts,
                    state: EllipticState::from_raw(&y),
                });
                Ok(StepOutcome::Stopped)
            }
            None => {
                self.traj.events.extend(found);
                self.traj.samples.push(TrajectorySample {
                    tau: t1,
                    state: EllipticState::from_raw(&y_end),
                });
                Ok(StepOutcome::Continue)
            }
        }
    }

    pub fn finish(self) -> Trajectory {
        self.traj
    }
}

/// Integrate the regularized flow from `s0` over `τ ∈ [0, tau_end]` with
/// relative and absolute tolerance `tol`.
pub fn integrate(
    s0: &EllipticState,
    prm: &Params,
    tau_end: f64,
    tol: f64,
    events: &[EventSpec],
) -> Result<Trajectory> {
    integrate_with(s0, prm, tau_end, events, &IntegratorOptions::with_tol(tol))
}

/// [`integrate`] with explicit options; `tau_end` may be negative.
pub fn integrate_with(
    s0: &EllipticState,
    prm: &Params,
    tau_end: f64,
    events: &[EventSpec],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    integrate_raw(s0.to_raw(), prm, 0.0, tau_end, events, opts)
}

pub(crate) fn integrate_raw(
    y0: State,
    prm: &Params,
    tau0: f64,
    tau_end: f64,
    events: &[EventSpec],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::domain("integration tolerances must be positive"));
    }
    if !tau_end.is_finite() || y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "integration needs a finite state and end time",
        ));
    }
    let mut rec = Recorder::new(prm, tau0, y0, events, opts.event_subdivisions, opts.r_min)?;
    if tau_end == tau0 {
        return Ok(rec.finish());
    }
    Dop853 {
        field: *rec.field(),
        opts,
        centre: prm.centre().map(|c| c.cartesian),
        eps: prm.eps(),
    }
    .run(&mut rec, tau0, y0, tau_end)?;
    Ok(rec.finish())
}

struct Dop853<'a> {
    field: RegularizedField<'a>,
    opts: &'a IntegratorOptions,
    centre: Option<CartesianPoint>,
    eps: f64,
}

fn lin(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for i in 0..4 {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn comb(terms: &[(f64, &State)]) -> State {
    lin(&[0.0; 4], 1.0, terms)
}

impl Dop853<'_> {
    fn f(&self, t: f64, y: &State) -> Result<State> {
        self.field.rhs(y).ok_or_else(|| Error::Integration {
            tau: t,
            message: "trajectory reached the third centre".into(),
        })
    }

    fn centre_cap(&self, y: &State) -> f64 {
        match self.centre {
            Some(c) if self.eps > 0.0 => {
                let d = position(y).distance(&c);
                let v = cartesian_velocity(y);
                let speed = v[0].hypot(v[1]);
                if speed > 0.0 {
                    self.opts.centre_step_factor * d / speed
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }

    fn initial_step(&self, y: &State, f0: &State, dir: f64) -> f64 {
        if let Some(h) = self.opts.h_init {
            return h.abs();
        }
        let (mut d0, mut d1) = (0.0f64, 0.0f64);
        for i in 0..4 {
            let sk = self.opts.atol + self.opts.rtol * y[i].abs();
            d0 += (y[i] / sk).powi(2);
            d1 += (f0[i] / sk).powi(2);
        }
        let h = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6
        } else {
            0.01 * (d0 / d1).sqrt()
        };
        let _ = dir;
        h.min(self.opts.h_max)
    }

    fn run(&self, rec: &mut Recorder<'_>, tau0: f64, mut y: State, tau_end: f64) -> Result<()> {
        let dir = (tau_end - tau0).signum();
        let mut t = tau0;
        let mut k1 = self.f(t, &y)?;
        let mut h = dir * self.initial_step(&y, &k1, dir);
        let mut facold: f64 = 1e-4;
        let mut rejected = false;
        let (safe, facc1, facc2, expo1) = (0.9, 1.0 / 0.333, 1.0 / 6.0, 1.0 / 8.0);

        for _ in 0..self.opts.max_steps {
            let cap = self.opts.h_max.min(self.centre_cap(&y));
            if h.abs() > cap {
                h = dir * cap;
            }
            let last = (t + h - tau_end) * dir >= 0.0;
            if last {
                h = tau_end - t;
            }
            if h.abs() <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration {
                    tau: t,
                    message: format!("step size underflow (h = {h:e})"),
                });
            }

            let k2 = self.f(t + C2 * h, &lin(&y, h, &[(A21, &k1)]))?;
            let k3 = self.f(t + C3 * h, &lin(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = self.f(t + C4 * h, &lin(&y, h, &[(A41, &k1), (A43, &k3)]))?;
            let k5 = self.f(
                t + C5 * h,
                &lin(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = self.f(
                t + C6 * h,
                &lin(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]),
            )?;
            let k7 = self.f(
                t + C7 * h,
                &lin(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
            )?;
            let k8 = self.f(
                t + C8 * h,
                &lin(
                    &y,
                    h,
                    &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
                ),
            )?;
            let k9 = self.f(
                t + C9 * h,
                &lin(
                    &y,
                    h,
                    &[
                        (A91, &k1),
                        (A94, &k4),
                        (A95, &k5),
                        (A96, &k6),
                        (A97, &k7),
                        (A98, &k8),
                    ],
                ),
            )?;
            let k10 = self.f(
                t + C10 * h,
                &lin(
                    &y,
                    h,
                    &[
                        (A101, &k1),
                        (A104, &k4),
                        (A105, &k5),
                        (A106, &k6),
                        (A107, &k7),
                        (A108, &k8),
                        (A109, &k9),
                    ],
                ),
            )?;
            let k11 = self.f(
                t + C11 * h,
                &lin(
                    &y,
                    h,
                    &[
                        (A111, &k1),
                        (A114, &k4),
                        (A115, &k5),
                        (A116, &k6),
                        (A117, &k7),
                        (A118, &k8),
                        (A119, &k9),
                        (A1110, &k10),
                    ],
                ),
            )?;
            let t_new = t + h;
            let k12 = self.f(
                t_new,
                &lin(
                    &y,
                    h,
                    &[
                        (A121, &k1),
                        (A124, &k4),
                        (A125, &k5),
                        (A126, &k6),
                        (A127, &k7),
                        (A128, &k8),
                        (A129, &k9),
                        (A1210, &k10),
                        (A1211, &k11),
                    ],
                ),
            )?;
            let inc = comb(&[
                (B1, &k1),
                (B6, &k6),
                (B7, &k7),
                (B8, &k8),
                (B9, &k9),
                (B10, &k10),
                (B11, &k11),
                (B12, &k12),
            ]);
            let y_new = lin(&y, h, &[(1.0, &inc)]);

            let (mut err, mut err2) = (0.0, 0.0);
            for i in 0..4 {
                let sk = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                let e2 = inc[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
                err2 += (e2 / sk).powi(2);
                let e = ER1 * k1[i]
                    + ER6 * k6[i]
                    + ER7 * k7[i]
                    + ER8 * k8[i]
                    + ER9 * k9[i]
                    + ER10 * k10[i]
                    + ER11 * k11[i]
                    + ER12 * k12[i];
                err += (e / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err * (1.0 / (4.0 * deno)).sqrt();
            if !err.is_finite() {
                h *= 0.25;
                rejected = true;
                continue;
            }

            let fac11 = err.powf(expo1);
            let fac = (fac11 / safe).clamp(facc2, facc1);
            let mut h_new = h / fac;

            if err > 1.0 {
                h /= (fac11 / safe).min(facc1);
                rejected = true;
                continue;
            }

            facold = facold.max(err).max(1e-4);
            let k13 = self.f(t_new, &y_new)?;

            let ydiff = comb(&[(1.0, &y_new), (-1.0, &y)]);
            let bspl = comb(&[(h, &k1), (-1.0, &ydiff)]);
            let cont4 = comb(&[(1.0, &ydiff), (-h, &k13), (-1.0, &bspl)]);
            let dsum = |d: [f64; 8]| {
                comb(&[
                    (d[0], &k1),
                    (d[1], &k6),
                    (d[2], &k7),
                    (d[3], &k8),
                    (d[4], &k9),
                    (d[5], &k10),
                    (d[6], &k11),
                    (d[7], &k12),
                ])
            };
            let c5 = dsum([D41, D46, D47, D48, D49, D410, D411, D412]);
            let c6 = dsum([D51, D56, D57, D58, D59, D510, D511, D512]);
            let c7 = dsum([D61, D66, D67, D68, D69, D610, D611, D612]);
            let c8 = dsum([D71, D76, D77, D78, D79, D710, D711, D712]);

            let k14 = self.f(
                t + C14 * h,
                &lin(
                    &y,
                    h,
                    &[
                        (A141, &k1),
                        (A147, &k7),
                        (A148, &k8),
                        (A149, &k9),
                        (A1410, &k10),
                        (A1411, &k11),
                        (A1412, &k12),
                        (A1413, &k13),
                    ],
                ),
            )?;
            let k15 = self.f(
                t + C15 * h,
                &lin(
                    &y,
                    h,
                    &[
                        (A151, &k1),
                        (A156, &k6),
                        (A157, &k7),
                        (A158, &k8),
                        (A1511, &k11),
                        (A1512, &k12),
                        (A1513, &k13),
                        (A1514, &k14),
                    ],
                ),
            )?;
            let k16 = self.f(
                t + C16 * h,
                &lin(
                    &y,
                    h,
                    &[
                        (A161, &k1),
                        (A166, &k6),
                        (A167, &k7),
                        (A168, &k8),
                        (A169, &k9),
                        (A1613, &k13),
                        (A1614, &k14),
                        (A1615, &k15),
                    ],
                ),
            )?;
            let tail = |c: &State, d: [f64; 4]| {
                let s = comb(&[
                    (1.0, c),
                    (d[0], &k13),
                    (d[1], &k14),
                    (d[2], &k15),
                    (d[3], &k16),
                ]);
                lin(&[0.0; 4], h, &[(1.0, &s)])
            };
            let cont = [
                y,
                ydiff,
                bspl,
                cont4,
                tail(&c5, [D413, D414, D415, D416]),
                tail(&c6, [D513, D514, D515, D516]),
                tail(&c7, [D613, D614, D615, D616]),
                tail(&c8, [D713, D714, D715, D716]),
            ];

            let seg = DenseSegment::new(t, h, Interpolant::Dop853(cont));
            let outcome = rec.push(seg, y_new)?;
            if matches!(outcome, StepOutcome::Stopped) || last {
                return Ok(());
            }

            if h_new.abs() > self.opts.h_max {
                h_new = dir * self.opts.h_max;
            }
            if rejected {
                h_new = dir * h_new.abs().min(h.abs());
            }
            rejected = false;
            k1 = k13;
            y = y_new;
            t = t_new;
            h = h_new;
        }
        Err(Error::Integration {
            tau: t,
            message: format!("step budget of {} exhausted", self.opts.max_steps),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{regularized_hamiltonian, Centre};
    use std::f64::consts::PI;

    fn params() -> Params {
        Params::new(1.0, 1.0 / 7.0, 0.29).unwrap()
    }

    fn on_shell(p: &Params, xi: f64, phi: f64, sx: f64, sp: f64) -> EllipticState {
        let (b, a1, a) = (p.beta(), p.a1(), p.a());
        let ch = xi.cosh();
        let xp = (4.0 * a * (ch - b * a1 * ch * ch - a1)).sqrt();
        let pp = (4.0 * a * (b * a1 * phi.cos().powi(2) + a1)).sqrt();
        EllipticState::new(xi, phi, sx * xp, sp * pp)
    }

    #[test]
    fn zero_length_integration() {
        let p = params();
        let s = on_shell(&p, 0.3, 0.2, 1.0, 1.0);
        let tr = integrate(
            &s,
            &p,
            0.0,
            1e-10,
            &[EventSpec::new(EventKind::XiCrossing { value: 0.3 })],
        )
        .unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert!(tr.events.is_empty());
    }

    #[test]
    fn harmonic_convergence_order() {
        // φ-pendulum at β = 0 is uniform rotation; check against the exact solution
        let p = Params::new(1.0, 0.0, 0.25).unwrap();
        let s = EllipticState::new(0.0, 0.0, 0.0, 1.0);
        let tr = integrate(&s, &p, 20.0, 1e-12, &[]).unwrap();
        let y = tr.eval_raw(20.0).unwrap();
        assert!((y[1] - 20.0).abs() < 1e-10);
        for tau in [0.013, 3.3, 7.77, 19.5] {
            let y = tr.eval_raw(tau).unwrap();
            assert!((y[1] - tau).abs() < 1e-10, "dense output at {tau}");
        }
    }

    #[test]
    fn dense_output_matches_restart() {
        let p = params();
        let s = on_shell(&p, 0.4, 1.0, 1.0, 1.0);
        let tr = integrate(&s, &p, 6.0, 1e-12, &[]).unwrap();
        for tau in [0.77, 2.345, 5.5] {
            let dense = tr.eval_raw(tau).unwrap();
            let direct = integrate(&s, &p, tau, 1e-13, &[]).unwrap();
            let end = direct.eval_raw(tau).unwrap();
            for i in 0..4 {
                assert!(
                    (dense[i] - end[i]).abs() < 1e-9,
                    "{i}: {} vs {}",
                    dense[i],
                    end[i]
                );
            }
        }
    }

    #[test]
    fn reversibility() {
        let p = params();
        let s = on_shell(&p, 0.5, 2.0, -1.0, 1.0);
        let fwd = integrate(&s, &p, 7.0, 1e-12, &[]).unwrap();
        let back = integrate(&fwd.final_state(), &p, -7.0, 1e-12, &[]).unwrap();
        let a = s.to_raw();
        let mut b = back.final_state().to_raw();
        b[1] = crate::geometry::normalize_angle(b[1]);
        for i in 0..4 {
            let d = if i == 1 {
                crate::geometry::angle_difference(a[i], b[i])
            } else {
                a[i] - b[i]
            };
            assert!(d.abs() < 1e-10, "{i}: {d:e}");
        }
    }

    #[test]
    fn phi_crossing_direction_and_terminal() {
        let p = params();
        let s = on_shell(&p, 0.1, 0.0, 1.0, 1.0);
        let ev = [
            EventSpec::new(EventKind::PhiCrossing { value: PI }).direction(Direction::Increasing),
            EventSpec::new(EventKind::PhiCrossing { value: 0.0 }).terminal(),
        ];
        let tr = integrate(&s, &p, 50.0, 1e-12, &ev).unwrap();
        assert_eq!(tr.events_for(0).count(), 1);
        let stop = tr.events_for(1).next().unwrap();
        assert!((tr.tau_end() - stop.tau).abs() < 1e-15);
        let half = tr.events_for(0).next().unwrap().tau;
        assert!(half > 0.0 && half < stop.tau);
        // the rotation is symmetric under φ → 2π − φ, so π is reached at half period
        assert!((2.0 * half - stop.tau).abs() < 1e-9);
        assert!(
            tr.final_state().point.phi.abs() < 1e-10
                || (tr.final_state().point.phi - 2.0 * PI).abs() < 1e-10
        );
    }

    #[test]
    fn energy_is_conserved() {
        let p = params();
        let s = on_shell(&p, 0.2, 0.7, 1.0, -1.0);
        let tr = integrate(&s, &p, 60.0, 1e-12, &[]).unwrap();
        assert!(tr.energy_drift < 1e-10, "drift {}", tr.energy_drift);
        let h = regularized_hamiltonian(&tr.final_state(), &p).unwrap();
        assert!(h.abs() < 1e-10);
    }

    #[test]
    fn centre_events_need_a_centre() {
        let p = params();
        let s = on_shell(&p, 0.2, 0.7, 1.0, 1.0);
        assert!(integrate(
            &s,
            &p,
            1.0,
            1e-10,
            &[EventSpec::new(EventKind::CentreClosest)]
        )
        .is_err());
    }

    #[test]
    fn refuses_to_enter_rmin_ball() {
        let c = Centre::from_elliptic(EllipticPoint::new(0.5, 1.0)).unwrap();
        let p = params().with_centre(c).with_eps(1e-3).unwrap();
        // head straight for C along the ξ direction
        let s = EllipticState::new(0.3, 1.0, 1.0, 0.0);
        let opts = IntegratorOptions {
            r_min: Some(0.05),
            ..IntegratorOptions::with_tol(1e-10)
        };
        let err = integrate_with(&s, &p, 2.0, &[], &opts).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn truncate_drops_tail() {
        let p = params();
        let s = on_shell(&p, 0.3, 0.4, 1.0, 1.0);
        let mut tr = integrate(
            &s,
            &p,
            5.0,
            1e-11,
            &[EventSpec::new(EventKind::PrimaryClosest)],
        )
        .unwrap();
        let mid = tr.eval(2.5).unwrap();
        tr.truncate(2.5).unwrap();
        assert_eq!(tr.tau_end(), 2.5);
        assert_eq!(tr.final_state(), mid);
        assert!(tr.events.iter().all(|e| e.tau <= 2.5));
        assert!(tr.eval(3.0).is_err());
    }

    #[test]
    fn csv_has_expected_columns() {
        let p = params();
        let s = on_shell(&p, 0.3, 0.4, 1.0, 1.0);
        let tr = integrate(&s, &p, 1.0, 1e-10, &[]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau,xi,phi,xi_prime,phi_prime,t_physical,x,y"));
        assert_eq!(text.lines().count(), tr.samples.len() + 1);
    }
}
