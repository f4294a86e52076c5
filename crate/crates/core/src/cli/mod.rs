//! The `curveflow` command line: run scenarios, refinement studies and
//! frame dumps.

pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::curvekit::sample;
use crate::error::Error;
use crate::flowsim::{arclength_drift, default_dt, evolve, pointwise_drift, SimState, Trajectory};
use crate::frenet::{frenet_apparatus, max_frenet_residual};
use crate::verify::{check, combine, VerificationReport};
use output::{CheckEntry, EvolutionSummary, Report};
pub use scenario::{Format, Prepared, Scenario};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "curveflow", version, about = "Flows of non-null curves in Minkowski space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a scenario and run its checks.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a scenario at (N, dt), (2N, dt/2), ... and fit convergence orders.
    Convergence {
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the Frenet apparatus of the initial curve.
    Frenet {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled curves and scenarios.
    ListCatalog,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_USAGE, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NullCurveDeveloped { .. } | Error::Stability { .. } | Error::NonFinite => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

/// Bundled scenarios, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("circle_rigid_rotation", include_str!("../../scenarios/circle_rigid_rotation.json")),
    ("circle_normal_shrink", include_str!("../../scenarios/circle_normal_shrink.json")),
    ("circle_inextensible", include_str!("../../scenarios/circle_inextensible.json")),
    ("helix_inextensible", include_str!("../../scenarios/helix_inextensible.json")),
    ("spacelike_helix_inextensible", include_str!("../../scenarios/spacelike_helix_inextensible.json")),
    ("hyperbola_inextensible", include_str!("../../scenarios/hyperbola_inextensible.json")),
    ("hyperbola_explicit", include_str!("../../scenarios/hyperbola_explicit.json")),
    ("line_translation", include_str!("../../scenarios/line_translation.json")),
    ("zero_flow", include_str!("../../scenarios/zero_flow.json")),
];

/// Catalog curves with their curvatures at unit speed.
pub const CATALOG_CURVES: &[(&str, &str, &str)] = &[
    ("circle", "(0, cos u, sin u), u in [0, 2pi], E^3_1", "spacelike; k1 = 1, k2 = 0 (completed frame)"),
    ("hyperbola", "(sinh u, cosh u), E^2_1", "timelike; k1 = 1"),
    ("timelike_helix", "(sqrt(2) u, cos u, sin u), E^3_1", "timelike; k1 = 1, k2 = sqrt(2)"),
    ("spacelike_helix", "(u, sqrt(2) cos u, sqrt(2) sin u), E^3_1", "spacelike, timelike binormal; k1 = sqrt(2), k2 = 1"),
    ("line", "(0, u), E^2_1", "spacelike; k1 = 0"),
];

fn out_dir(flag: Option<PathBuf>, s: &Scenario) -> Result<PathBuf, Failure> {
    flag.or_else(|| s.output.directory.clone())
        .ok_or_else(|| Failure::usage("no output directory: pass --out or set output.directory"))
}

fn load(path: &Path) -> Result<Prepared, Failure> {
    let s = Scenario::load(path).map_err(Failure::usage)?;
    s.prepare().map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn initial(p: &Prepared, curve: &crate::curvekit::CurveSpec) -> Result<SimState, Failure> {
    SimState::initial(curve, &p.flow).map_err(|e| Failure::usage(format!("initial curve: {e}")))
}

fn summary(traj: &Trajectory, interrupted: Option<&Error>) -> EvolutionSummary {
    let last = traj.diagnostics.last();
    EvolutionSummary {
        steps_completed: last.map_or(0, |d| d.step),
        t_final: last.map_or(0.0, |d| d.t),
        arclength_drift: arclength_drift(traj),
        pointwise_drift: pointwise_drift(traj),
        interrupted: interrupted.map(|e| e.to_string()),
    }
}

fn run_checks(p: &Prepared, traj: &Trajectory) -> Vec<Result<VerificationReport, Error>> {
    p.checks.iter().map(|id| check(*id, traj, &p.scenario.tolerances)).collect()
}

pub fn run(path: &Path, out: Option<PathBuf>) -> Result<i32, Failure> {
    let p = load(path)?;
    let dir = out_dir(out, &p.scenario)?;
    let formats = &p.scenario.output.formats;
    let init = initial(&p, &p.curve)?;
    let (traj, interrupted) = match evolve(&init, &p.flow, &p.integrator) {
        Ok(t) => (t, None),
        Err(b) => match b.error {
            Error::Config(_) => return Err(Failure::usage(b.error)),
            _ => (b.trajectory, Some(b.error)),
        },
    };
    if formats.contains(&Format::Timeseries) {
        output::write_atomic(&dir, "timeseries.csv", output::timeseries_csv(&traj.diagnostics).as_bytes())?;
    }
    if formats.contains(&Format::Frames) {
        let wanted = if p.scenario.output.frame_steps.is_empty() {
            vec![0, *traj.steps.last().unwrap_or(&0)]
        } else {
            p.scenario.output.frame_steps.clone()
        };
        for (step, st) in traj.steps.iter().zip(&traj.states) {
            if wanted.contains(step) {
                output::write_frames(&dir, &p.scenario.name, *step, st)?;
            }
        }
    }
    let checks: Vec<CheckEntry> = if interrupted.is_some() {
        vec![]
    } else {
        p.checks
            .iter()
            .zip(run_checks(&p, &traj))
            .map(|(id, r)| match r {
                Ok(r) => CheckEntry::from(&r),
                Err(e) => CheckEntry::failed(id.name(), e.to_string()),
            })
            .collect()
    };
    let all_pass = interrupted.is_none() && checks.iter().all(|c| c.pass);
    if formats.contains(&Format::Report) {
        let report = Report {
            scenario: p.scenario.name.clone(),
            command: "run",
            all_pass,
            evolution: vec![summary(&traj, interrupted.as_ref())],
            checks,
        };
        output::write_json(&dir, "report.json", &report)?;
    }
    match interrupted {
        Some(e) => Err(Failure { code: EXIT_NUMERICAL, message: e.to_string() }),
        None => Ok(if all_pass { EXIT_PASS } else { EXIT_CHECK_FAILED }),
    }
}

/// Thread pool capped by `CURVEFLOW_THREADS` (unset or 0: rayon's default).
fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let threads = match std::env::var("CURVEFLOW_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::usage(format!("CURVEFLOW_THREADS must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(Failure::usage)
}

type LevelOutcome = Result<(Trajectory, Vec<Result<VerificationReport, Error>>), Error>;

pub fn convergence(path: &Path, levels: u32, out: Option<PathBuf>) -> Result<i32, Failure> {
    if levels < 2 {
        return Err(Failure::usage(format!("--levels must be at least 2, got {levels}")));
    }
    let p = load(path)?;
    let dir = out_dir(out, &p.scenario)?;
    if p.checks.is_empty() {
        return Err(Failure::usage("checks: a convergence study needs at least one identity"));
    }
    let dt = match p.integrator.dt {
        Some(dt) => dt,
        None => default_dt(&initial(&p, &p.curve)?),
    };
    let specs = (0..levels).map(|l| p.at_level(l, dt)).collect::<Result<Vec<_>, _>>()?;
    let inits = specs.iter().map(|(c, _)| initial(&p, c)).collect::<Result<Vec<_>, _>>()?;
    let outcomes: Vec<LevelOutcome> = thread_pool()?.install(|| {
        specs
            .par_iter()
            .zip(&inits)
            .map(|((_, cfg), init)| {
                let traj = evolve(init, &p.flow, cfg).map_err(|b| b.error)?;
                let reports = run_checks(&p, &traj);
                Ok((traj, reports))
            })
            .collect()
    });

    let mut evolution = Vec::new();
    let mut per_level = Vec::new();
    for (level, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((traj, reports)) => {
                evolution.push(summary(&traj, None));
                per_level.push(reports);
            }
            Err(e) => {
                let code = if matches!(e, Error::Config(_)) { EXIT_USAGE } else { EXIT_NUMERICAL };
                return Err(Failure { code, message: format!("level {level}: {e}") });
            }
        }
    }
    let mut columns: Vec<Vec<_>> = p.checks.iter().map(|_| Vec::new()).collect();
    for reports in per_level {
        for (column, r) in columns.iter_mut().zip(reports) {
            column.push(r);
        }
    }
    let mut combined = Vec::new();
    let mut entries = Vec::new();
    for (id, column) in p.checks.iter().zip(columns) {
        let reports: Result<Vec<_>, String> = column
            .into_iter()
            .enumerate()
            .map(|(level, r)| r.map_err(|e| format!("level {level}: {e}")))
            .collect();
        match reports {
            Ok(reports) => {
                let r = combine(reports);
                entries.push(CheckEntry::from(&r));
                combined.push(r);
            }
            Err(e) => entries.push(CheckEntry::failed(id.name(), e)),
        }
    }
    let all_pass = entries.iter().all(|c| c.pass);
    output::write_atomic(&dir, "convergence.csv", output::convergence_csv(&combined).as_bytes())?;
    let report = Report { scenario: p.scenario.name.clone(), command: "convergence", all_pass, evolution, checks: entries };
    output::write_json(&dir, "report.json", &report)?;
    Ok(if all_pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

pub fn frenet(path: &Path, out: Option<PathBuf>) -> Result<i32, Failure> {
    let p = load(path)?;
    let dir = out_dir(out, &p.scenario)?;
    let c = sample(&p.curve).map_err(|e| Failure::usage(format!("curve: {e}")))?;
    let fd = frenet_apparatus(&c).map_err(|e| Failure::usage(format!("curve: {e}")))?;
    println!("scenario      {}", p.scenario.name);
    println!("samples       {}", c.len());
    println!("signs         {:?}", fd.signs());
    for k in 1..c.dim() {
        let field = fd.gs_curvature_field(k);
        let (lo, hi) = field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        println!("k{k}            [{lo:.12e}, {hi:.12e}]");
    }
    println!("orthonormality {:.3e}", fd.orthonormality_residual());
    println!("frenet residual {:.3e}", max_frenet_residual(&c, &fd));
    let state = SimState { t: 0.0, speeds: vec![], curve: c, frenet: fd };
    output::write_frames(&dir, &p.scenario.name, 0, &state)?;
    Ok(EXIT_PASS)
}

pub fn list_catalog() -> i32 {
    println!("curves:");
    for (name, def, notes) in CATALOG_CURVES {
        println!("  {name:<17} {def:<45} {notes}");
    }
    println!("scenarios:");
    for (name, text) in BUNDLED {
        let line = match Scenario::from_json(text) {
            Ok(s) => {
                let (mode, speeds) = match &s.flow {
                    scenario::FlowSection::Explicit { speeds } => ("explicit", speeds),
                    scenario::FlowSection::Inextensible { speeds, .. } => ("inextensible", speeds),
                };
                format!("n={} {mode} [{}] checks: {}", s.dimension, speeds.join(", "), s.checks.join(", "))
            }
            Err(e) => format!("invalid: {e}"),
        };
        println!("  {name:<29} {line}");
    }
    EXIT_PASS
}

/// Parses the command line, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let result = match cli.command {
        Command::Run { scenario, out } => run(&scenario, out),
        Command::Convergence { scenario, levels, out } => convergence(&scenario, levels, out),
        Command::Frenet { scenario, out } => frenet(&scenario, out),
        Command::ListCatalog => Ok(list_catalog()),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("curveflow: {}", f.message);
            f.code
        }
    }
}
