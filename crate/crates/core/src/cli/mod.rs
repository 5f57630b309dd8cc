//! Command-line front end: `periods`, `solve`, `arcs`, `check`, `chains`,
//! `shadow`, `figs` and `integrate`.

pub mod config;
pub mod figs;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::arcs::{arc_family_for, primary_collision_test, ArcFamily, ArcOptions};
use crate::chains::{
    build_alphabet, build_graph, count_periodic_chains, entropy_estimate, enumerate_chains,
    DEFAULT_ANGULAR_TOL,
};
use crate::dynamics::{integrate_with, Centre, EllipticState, IntegratorOptions, Params};
use crate::error::{Error, Result};
use crate::periods::{period_report, solve_a1, solve_beta_for_energy, ResonanceSolution};
use crate::rational::ResonanceClass;
use crate::shadow::{default_entry_radius, expansion_rates, shoot_segment, ShadowOptions};

use config::{Classes, Level, RunConfig};
use output::OutputSet;

#[derive(Debug, Parser)]
#[command(
    name = "tricentre",
    version,
    about = "Collision arcs and chains of the restricted three-centre problem"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Primary intensity.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Resonance class `m/n`.
    #[arg(long)]
    pub q: Option<String>,
    /// Comma-separated class set, e.g. `1,2,1/2`.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Third centre as `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub centre_xy: Option<Vec<f64>>,
    /// Third centre as `xi,phi`.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub centre_elliptic: Option<Vec<f64>>,
    /// Comma-separated perturbation sizes.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Print machine-readable JSON.
    #[arg(long)]
    pub json: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Periods T1, T2 and moduli for (beta, A1), or at the resonant A1 of --q.
    Periods {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a1: Option<f64>,
    },
    /// Resonant A1 for each class at --beta, or (beta, A1) at --energy.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Four collision arcs per class through the centre.
    Arcs {
        #[command(flatten)]
        common: Common,
    },
    /// Primary-collision test: G+, G-, S and the safety verdict.
    Check {
        #[command(flatten)]
        common: Common,
        /// Exclusion margin around S.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Direction-change graph, periodic-chain counts and entropy.
    Chains {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 12)]
        n_max: u32,
    },
    /// Shooting sweep over --eps for one arc of the family.
    Shadow {
        #[command(flatten)]
        common: Common,
    },
    /// Data behind figures 1 to 6.
    Figs {
        which: u8,
        #[command(flatten)]
        common: Common,
    },
    /// Integrate one trajectory of the regularized flow to CSV.
    Integrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a1: Option<f64>,
        /// Initial `xi,phi,xi',phi'`.
        #[arg(
            long,
            value_delimiter = ',',
            num_args = 1,
            allow_hyphen_values = true,
            required = true
        )]
        state: Vec<f64>,
        /// Final regularized time.
        #[arg(long, allow_hyphen_values = true)]
        tau: f64,
        /// Resample uniformly to this many intervals.
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn pair(v: &Option<Vec<f64>>, name: &str) -> Result<Option<[f64; 2]>> {
    match v {
        None => Ok(None),
        Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
        Some(v) => Err(Error::Config(format!(
            "--{name} takes two values, got {}",
            v.len()
        ))),
    }
}

impl Common {
    /// Config file merged with the flags.
    pub fn config(&self, a1: Option<f64>, delta: Option<f64>) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let classes = match (&self.q, &self.classes) {
            (Some(_), Some(_)) => return Err(Error::Config("use either --q or --classes".into())),
            (Some(q), None) => Some(Classes::One(q.clone())),
            (None, Some(c)) => Some(Classes::Many(c.clone())),
            (None, None) => None,
        };
        let flags = RunConfig {
            a: self.a,
            beta: self.beta,
            energy: self.energy,
            a1,
            classes,
            centre_xy: pair(&self.centre_xy, "centre-xy")?,
            centre_elliptic: pair(&self.centre_elliptic, "centre-elliptic")?,
            eps: self.eps.clone(),
            tol: self.tol,
            delta,
            angular_tol: None,
            fd_step: None,
            output_dir: self.out.clone(),
        };
        let mut merged = file.merged(flags);
        // a centre given on the command line replaces either form from the file
        if merged.centre_xy.is_some() && self.centre_elliptic.is_some() {
            merged.centre_xy = None;
        }
        if merged.centre_elliptic.is_some() && self.centre_xy.is_some() {
            merged.centre_elliptic = None;
        }
        merged.validate()?;
        Ok(merged)
    }
}

/// What a command prints: human-readable text and the JSON equivalent.
pub struct Report {
    pub text: String,
    pub json: serde_json::Value,
    /// Process exit code; nonzero with a successful run means a negative verdict.
    pub code: i32,
}

impl Report {
    fn ok(text: String, json: serde_json::Value) -> Self {
        Self {
            text,
            json,
            code: 0,
        }
    }
}

fn arc_options(cfg: &RunConfig) -> ArcOptions {
    ArcOptions {
        tol: cfg.tol(),
        delta: cfg.delta(),
        ..ArcOptions::default()
    }
}

/// Resonant solution of class `q` at the configured β or energy.
fn solution_for(cfg: &RunConfig, q: ResonanceClass) -> Result<ResonanceSolution> {
    match cfg.level()? {
        Level::Beta(b) => solve_a1(b, q, cfg.a(), 1e-13),
        Level::Energy(e) => solve_beta_for_energy(q, e, cfg.a(), 1e-12),
    }
}

fn family(cfg: &RunConfig, centre: &Centre, q: ResonanceClass) -> Result<ArcFamily> {
    let sol = solution_for(cfg, q)?;
    let prm = Params::new(cfg.a(), sol.beta, sol.a1_hat)?
        .with_class(q)
        .with_centre(*centre);
    arc_family_for(&prm, sol, &arc_options(cfg))
}

fn cmd_periods(cfg: &RunConfig) -> Result<Report> {
    let beta = cfg.beta()?;
    let (a1, sol) = match (cfg.a1, &cfg.classes) {
        (Some(a1), None) => (a1, None),
        (None, Some(_)) => {
            let sol = solve_a1(beta, cfg.class()?, cfg.a(), 1e-13)?;
            (sol.a1_hat, Some(sol))
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either --a1 or --q, not both".into()))
        }
        (None, None) => return Err(Error::Config("give --a1 or --q".into())),
    };
    let r = period_report(beta, a1, cfg.a())?;
    let mut text = String::new();
    if let Some(s) = &sol {
        writeln!(
            text,
            "q = {}  A1_hat = {:.16e}  |F| = {:.3e}",
            s.q,
            s.a1_hat,
            s.residual.abs()
        )
        .ok();
    }
    writeln!(text, "T1 = {:.16e}", r.t1).ok();
    writeln!(text, "T2 = {:.16e}", r.t2).ok();
    writeln!(text, "kappa1^2 = {:.16e}", r.kappa1_sq).ok();
    writeln!(text, "kappa2^2 = {:.16e}", r.kappa2_sq).ok();
    match r.xi_plus {
        Some(x) => writeln!(text, "xi_plus = {x:.16e}").ok(),
        None => writeln!(text, "xi_plus = none (beta = 0)").ok(),
    };
    Ok(Report::ok(text, json!({ "periods": r, "solution": sol })))
}

fn cmd_solve(cfg: &RunConfig) -> Result<Report> {
    let mut text = String::new();
    let mut rows = Vec::new();
    for q in cfg.classes()? {
        let s = solution_for(cfg, q)?;
        let xi_plus = if s.beta > 0.0 {
            Some(s.xi_plus()?)
        } else {
            None
        };
        writeln!(
            text,
            "q = {:<5} beta = {:.16e}  A1_hat = {:.16e}  E = {:.16e}  T1 = {:.16e}  T2 = {:.16e}  |F| = {:.2e}",
            s.q.to_string(),
            s.beta,
            s.a1_hat,
            s.energy,
            s.t1,
            s.t2,
            s.residual.abs()
        )
        .ok();
        rows.push(json!({ "solution": s, "xi_plus": xi_plus }));
    }
    Ok(Report::ok(text, json!(rows)))
}

fn cmd_check(cfg: &RunConfig) -> Result<Report> {
    let centre = cfg.centre()?;
    let mut text = String::new();
    let mut rows = Vec::new();
    let mut all_safe = true;
    for q in cfg.classes()? {
        let sol = solution_for(cfg, q)?;
        let prm = Params::new(cfg.a(), sol.beta, sol.a1_hat)?.with_class(q);
        let t = primary_collision_test(&centre.elliptic, &prm, cfg.delta())?;
        all_safe &= t.safe;
        writeln!(
            text,
            "q = {}  G+ = {:.12}  G- = {:.12}  S = {{{}}}  nearest = ({}, {})  gaps = ({:.3e}, {:.3e})  {}",
            q,
            t.g_plus,
            t.g_minus,
            t.s_set.join(", "),
            t.nearest_plus,
            t.nearest_minus,
            t.gap_plus,
            t.gap_minus,
            if t.safe { "safe" } else { "UNSAFE" }
        )
        .ok();
        rows.push(json!({ "q": q, "beta": sol.beta, "a1_hat": sol.a1_hat, "test": t }));
    }
    Ok(Report {
        text,
        json: json!(rows),
        code: if all_safe { 0 } else { 3 },
    })
}

fn cmd_arcs(cfg: &RunConfig) -> Result<Report> {
    let centre = cfg.centre()?;
    let mut out = OutputSet::new(cfg.output_dir(), "arcs", &cfg.canonical());
    let mut text = String::new();
    let mut fams = Vec::new();
    for q in cfg.classes()? {
        let fam = family(cfg, &centre, q)?;
        for arc in &fam.arcs {
            let mut buf = Vec::new();
            arc.path.resampled(2000)?.write_csv(&mut buf)?;
            let suffix = format!(
                "-{}",
                arc.label
                    .to_string()
                    .replace('/', "_")
                    .replace('+', "p")
                    .replace('-', "m")
            );
            let path = out.write(&suffix, "csv", &buf)?;
            writeln!(
                text,
                "{}  duration = {:.15e}  period = {:.15e}  early = {}  v0 = ({:+.12}, {:+.12})  vT = ({:+.12}, {:+.12})  -> {}",
                arc.label,
                arc.duration,
                arc.period,
                arc.early_collision,
                arc.v0[0],
                arc.v0[1],
                arc.v_t[0],
                arc.v_t[1],
                path.display()
            )
            .ok();
        }
        fams.push(fam);
    }
    let summary = json!({ "centre_xy": [centre.cartesian.x, centre.cartesian.y],
        "centre_elliptic": [centre.elliptic.xi, centre.elliptic.phi], "families": fams });
    out.write_json("", &summary)?;
    Ok(Report::ok(
        text,
        json!({ "files": out.written(), "summary": summary }),
    ))
}

fn cmd_chains(cfg: &RunConfig, n_max: u32) -> Result<Report> {
    let centre = cfg.centre()?;
    let classes = cfg.classes()?;
    let opts = arc_options(cfg);
    let fams = match cfg.level()? {
        Level::Energy(e) => build_alphabet(&centre, &classes, e, cfg.a(), &opts)?,
        Level::Beta(_) if classes.len() == 1 => vec![family(cfg, &centre, classes[0])?],
        Level::Beta(_) => {
            return Err(Error::Config(
                "an alphabet of several classes needs a common --energy".into(),
            ));
        }
    };
    let arcs: Vec<_> = fams.iter().flat_map(|f| f.arcs.iter().cloned()).collect();
    let g = build_graph(&arcs, cfg.angular_tol.unwrap_or(DEFAULT_ANGULAR_TOL));
    let mut text = String::new();
    writeln!(
        text,
        "nodes: {}",
        g.nodes
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )
    .ok();
    for (i, row) in g.adjacency.iter().enumerate() {
        let bits: String = row.iter().map(|&e| if e { '1' } else { '0' }).collect();
        writeln!(text, "  {:<8} {bits}", g.nodes[i].to_string()).ok();
    }
    let mut counts = Vec::new();
    for n in 1..=n_max {
        let p = count_periodic_chains(&g, n)?;
        writeln!(text, "P_{n} = {p}").ok();
        counts.push(json!({ "n": n, "count": p.to_string() }));
    }
    let h = entropy_estimate(&g)?;
    writeln!(
        text,
        "entropy = {:.12}  (log 2 = {:.12})",
        h.value,
        2f64.ln()
    )
    .ok();
    if h.nilpotent {
        writeln!(
            text,
            "warning: adjacency matrix is nilpotent, no infinite chains"
        )
        .ok();
    }
    let chain = enumerate_chains(&g, &classes, 4 * classes.len()).ok();
    if let Some(c) = &chain {
        writeln!(
            text,
            "chain: {}",
            c.labels
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
        .ok();
    }
    let summary = json!({
        "graph": g.to_json(), "counts": counts, "entropy": h,
        "chain": chain.map(|c| c.labels.iter().map(|l| l.to_string()).collect::<Vec<_>>()),
    });
    let mut out = OutputSet::new(
        cfg.output_dir(),
        "chains",
        &format!("{}\n{n_max}", cfg.canonical()),
    );
    out.write_json("", &summary)?;
    Ok(Report::ok(text, summary))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn cmd_shadow(cfg: &RunConfig) -> Result<Report> {
    let centre = cfg.centre()?;
    let fam = family(cfg, &centre, cfg.class()?)?;
    let g = build_graph(&fam.arcs, DEFAULT_ANGULAR_TOL);
    let next = (0..g.len())
        .find(|&j| g.has_edge(0, j))
        .ok_or_else(|| Error::Structural("the first arc has no admissible successor".into()))?;
    let (first, second) = (&fam.arcs[0], &fam.arcs[next]);
    let opts = ShadowOptions {
        tol: cfg.tol(),
        ..ShadowOptions::default()
    };
    let mut text = String::new();
    writeln!(
        text,
        "arcs {} -> {}\n{:>10} {:>10} {:>14} {:>14} {:>10} {:>12} {:>5} {:>10}",
        first.label,
        second.label,
        "eps",
        "radius",
        "max_dev",
        "min_c_dist",
        "min_c/eps",
        "time_defect",
        "conv",
        "rate"
    )
    .ok();
    let mut rows = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for eps in cfg.eps_list() {
        let r = default_entry_radius(eps);
        let a = shoot_segment(first, eps, r, &opts)?;
        let rate = if eps > 0.0 {
            let b = shoot_segment(second, eps, r, &opts)?;
            expansion_rates(&[a.clone(), b], eps).ok().map(|v| v[0])
        } else {
            None
        };
        if eps > 0.0 && a.converged {
            xs.push(eps);
            ys.push(a.max_deviation);
        }
        writeln!(
            text,
            "{:>10.3e} {:>10.3e} {:>14.6e} {:>14.6e} {:>10.4} {:>12.4e} {:>5} {:>10}",
            eps,
            a.entry_radius,
            a.max_deviation,
            a.min_c_distance,
            if eps > 0.0 {
                a.min_c_distance / eps
            } else {
                f64::NAN
            },
            a.time_defect,
            a.converged,
            rate.map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into())
        )
        .ok();
        rows.push(json!({ "result": a, "expansion_rate": rate }));
    }
    let slope = (xs.len() >= 2).then(|| log_log_slope(&xs, &ys));
    if let Some(s) = slope {
        writeln!(text, "log-log slope of max_dev vs eps: {s:.4}").ok();
    }
    let summary = json!({ "rows": rows, "slope": slope, "arcs": [first.label.to_string(), second.label.to_string()] });
    let mut out = OutputSet::new(cfg.output_dir(), "shadow", &cfg.canonical());
    out.write_json("", &summary)?;
    Ok(Report::ok(text, summary))
}

fn cmd_figs(cfg: &RunConfig, which: u8) -> Result<Report> {
    let a = cfg.a();
    let energy = cfg.energy.unwrap_or(-0.5);
    let beta = cfg.beta.unwrap_or(1.0 / 7.0);
    let key = match which {
        1 => format!("{a}\n{energy}"),
        2 => format!("{energy}"),
        3..=6 => format!("{a}\n{beta}"),
        _ => {
            return Err(Error::domain(format!(
                "figures are numbered 1 to 6, got {which}"
            )))
        }
    };
    let mut out = OutputSet::new(cfg.output_dir(), &format!("fig{which}"), &key);
    let summary = match which {
        1 => figs::fig1(&mut out, a, energy)?,
        2 => figs::fig2(&mut out, energy)?,
        3 => figs::fig3(&mut out, a, beta)?,
        _ => figs::fig_orbit_pair(&mut out, which, a, beta)?,
    };
    let mut text = String::new();
    for p in out.written() {
        writeln!(text, "{}", p.display()).ok();
    }
    Ok(Report::ok(
        text,
        json!({ "files": out.written(), "summary": summary }),
    ))
}

fn cmd_integrate(
    cfg: &RunConfig,
    state: &[f64],
    tau: f64,
    samples: Option<usize>,
) -> Result<Report> {
    if state.len() != 4 {
        return Err(Error::Config(format!(
            "--state takes four values, got {}",
            state.len()
        )));
    }
    let (beta, a1) = match (cfg.a1, &cfg.classes) {
        (Some(a1), _) => (cfg.beta()?, a1),
        (None, Some(_)) => {
            let s = solution_for(cfg, cfg.class()?)?;
            (s.beta, s.a1_hat)
        }
        (None, None) => return Err(Error::Config("give --a1 or --q".into())),
    };
    let mut prm = Params::new(cfg.a(), beta, a1)?;
    let eps = cfg.eps.as_ref().map(|v| v[0]).unwrap_or(0.0);
    if eps > 0.0 || cfg.centre_xy.is_some() || cfg.centre_elliptic.is_some() {
        prm = prm.with_centre(cfg.centre()?).with_eps(eps)?;
    }
    let s0 = EllipticState::new(state[0], state[1], state[2], state[3]);
    let tr = integrate_with(&s0, &prm, tau, &[], &IntegratorOptions::with_tol(cfg.tol()))?;
    let tr = match samples {
        Some(n) => tr.resampled(n)?,
        None => tr,
    };
    let mut buf = Vec::new();
    tr.write_csv(&mut buf)?;
    let key = format!("{}\n{:?}\n{tau}\n{samples:?}", cfg.canonical(), state);
    let mut out = OutputSet::new(cfg.output_dir(), "integrate", &key);
    let path = out.write("", "csv", &buf)?;
    let end = tr.final_state();
    let text = format!(
        "{} samples, energy drift {:.3e}, final state ({:.12}, {:.12}, {:.12}, {:.12}) -> {}\n",
        tr.samples.len(),
        tr.energy_drift,
        end.point.xi,
        end.point.phi,
        end.xi_prime,
        end.phi_prime,
        path.display()
    );
    Ok(Report::ok(
        text,
        json!({ "file": path, "energy_drift": tr.energy_drift, "samples": tr.samples.len() }),
    ))
}

/// Run one parsed command.
pub fn execute(cli: &Cli) -> Result<(Report, bool)> {
    let (report, json) = match &cli.command {
        Command::Periods { common, a1 } => (cmd_periods(&common.config(*a1, None)?)?, common.json),
        Command::Solve { common } => (cmd_solve(&common.config(None, None)?)?, common.json),
        Command::Arcs { common } => (cmd_arcs(&common.config(None, None)?)?, common.json),
        Command::Check { common, delta } => {
            (cmd_check(&common.config(None, *delta)?)?, common.json)
        }
        Command::Chains { common, n_max } => (
            cmd_chains(&common.config(None, None)?, *n_max)?,
            common.json,
        ),
        Command::Shadow { common } => (cmd_shadow(&common.config(None, None)?)?, common.json),
        Command::Figs { which, common } => {
            (cmd_figs(&common.config(None, None)?, *which)?, common.json)
        }
        Command::Integrate {
            common,
            a1,
            state,
            tau,
            samples,
        } => (
            cmd_integrate(&common.config(*a1, None)?, state, *tau, *samples)?,
            common.json,
        ),
    };
    Ok((report, json))
}

/// Parse `args`, run, print, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((report, json)) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report.json).expect("report serializes")
                );
            } else {
                print!("{}", report.text);
            }
            report.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
