//! Frame-decomposed flows `d alpha/dt = sum_i f_i V_i`: speed fields, the
//! inextensibility solver for `f_1`, and RK4 time evolution.
//!
//! The speeds are functions of the current arclength `s` (recomputed from the
//! first sample at every evaluation) and of `t`. The curve is evolved as a
//! point set on the fixed material grid `u_i`; derivative vectors of evolved
//! curves come from finite-difference stencils.

use serde::Serialize;

use crate::curvekit::{
    cumulative_integral, d_ds, periodic_cumulative_integral, sample, CurveSpec, Differentiator, SampledCurve, Topology,
};
use crate::error::{Error, Result};
use crate::exprjet::{parse_with_vars, Expr};
use crate::frenet::{frenet_apparatus, FrenetData};
use crate::minkowski::MinkVector;

/// Loop integral tolerance, relative to total length, for closed curves.
pub const COMPATIBILITY_TOL: f64 = 1e-6;
/// Largest mismatch of a speed (or its first derivative) across the seam of a
/// closed curve, relative to its size.
pub const PERIODICITY_TOL: f64 = 1e-4;
/// Largest relative change of total length allowed in one step.
pub const MAX_STEP_LENGTH_CHANGE: f64 = 0.5;

#[derive(Debug, Clone)]
pub enum FlowMode {
    /// `f_1, ..., f_n` given directly.
    Explicit { speeds: Vec<Expr> },
    /// `f_2, ..., f_n` given; `f_1` solves `df_1/ds = eps_0 eps_1 f_2 k_1`.
    Inextensible { speeds: Vec<Expr>, f1_at_0: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub name: String,
    pub mode: FlowMode,
}

impl FlowSpec {
    pub fn explicit(name: &str, speeds: &[&str]) -> Result<Self> {
        Ok(Self { name: name.into(), mode: FlowMode::Explicit { speeds: parse_speeds(speeds)? } })
    }

    pub fn inextensible(name: &str, f2_to_fn: &[&str], f1_at_0: f64) -> Result<Self> {
        if !f1_at_0.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            name: name.into(),
            mode: FlowMode::Inextensible { speeds: parse_speeds(f2_to_fn)?, f1_at_0 },
        })
    }

    /// Dimension implied by the number of speeds.
    pub fn dim(&self) -> usize {
        match &self.mode {
            FlowMode::Explicit { speeds } => speeds.len(),
            FlowMode::Inextensible { speeds, .. } => speeds.len() + 1,
        }
    }

    pub fn is_inextensible_mode(&self) -> bool {
        matches!(self.mode, FlowMode::Inextensible { .. })
    }
}

fn parse_speeds(speeds: &[&str]) -> Result<Vec<Expr>> {
    speeds.iter().map(|s| parse_with_vars(s, &["s", "t"]).map_err(Error::from)).collect()
}

/// A speed `f(s)` on the grid with its first two arclength derivatives.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SpeedField {
    pub value: Vec<f64>,
    pub d_s: Vec<f64>,
    pub d_ss: Vec<f64>,
}

impl SpeedField {
    fn zeros(len: usize) -> Self {
        Self { value: vec![0.0; len], d_s: vec![0.0; len], d_ss: vec![0.0; len] }
    }

    fn from_expr(e: &Expr, s: &[f64], t: f64) -> Result<Self> {
        let mut f = Self::zeros(s.len());
        for (i, &si) in s.iter().enumerate() {
            let jet = e.eval_jet("s", si, 2, &[("t", t)])?;
            f.value[i] = jet.value();
            f.d_s[i] = jet.derivative(1);
            f.d_ss[i] = jet.derivative(2);
        }
        Ok(f)
    }
}

/// `eps_0 eps_1 f_2 k_1`, the inextensibility right-hand side.
fn inextensible_rhs(fd: &FrenetData, f2: &[f64]) -> Vec<f64> {
    let e = fd.signs()[0] * fd.signs()[1];
    f2.iter().zip(fd.gs_curvature_field(1)).map(|(f, k)| e * f * k).collect()
}

/// `f_1` on the grid with `df_1/ds = eps_0 eps_1 f_2 k_1` and `f_1(0) = f1_at_0`.
///
/// On closed curves the loop integral of the right-hand side must vanish to
/// within `COMPATIBILITY_TOL * L`, otherwise no periodic `f_1` exists.
pub fn solve_inextensible_f1(
    c: &SampledCurve,
    fd: &FrenetData,
    f2_values: &[f64],
    f1_at_0: f64,
) -> Result<Vec<f64>> {
    let mut g = inextensible_rhs(fd, f2_values);
    solve_f1(c, &mut g, f1_at_0)
}

/// Integrates `g ds`. On closed curves an admissible loop integral is
/// removed from `g` as a constant, so the returned `f_1` is periodic.
fn solve_f1(c: &SampledCurve, g: &mut [f64], f1_at_0: f64) -> Result<Vec<f64>> {
    let integrate = |g: &[f64]| {
        let y: Vec<f64> = g.iter().zip(c.speeds()).map(|(g, v)| g * v).collect();
        match c.topology() {
            Topology::Closed => periodic_cumulative_integral(&y, c.spacing()),
            Topology::Open => cumulative_integral(&y, c.spacing()).0,
        }
    };
    let mut cum = integrate(g);
    if c.topology() == Topology::Closed {
        let loop_integral = *cum.last().unwrap();
        if loop_integral.abs() > COMPATIBILITY_TOL * c.total_length() {
            return Err(Error::IncompatibleClosedFlow { residual: loop_integral });
        }
        let mean = loop_integral / c.total_length();
        g.iter_mut().for_each(|x| *x -= mean);
        cum = integrate(g);
    }
    Ok(cum[..c.len()].iter().map(|x| f1_at_0 + x).collect())
}

/// On a closed curve `s` restarts at the seam, so a speed must agree with
/// its first derivative at `s = 0` and `s = L`.
fn check_periodic(e: &Expr, index: usize, c: &SampledCurve, t: f64) -> Result<()> {
    if c.topology() == Topology::Open {
        return Ok(());
    }
    let length = c.total_length();
    let (a, b) = (e.eval_jet("s", 0.0, 1, &[("t", t)])?, e.eval_jet("s", length, 1, &[("t", t)])?);
    let jump = (a.value() - b.value()).abs().max((a.derivative(1) - b.derivative(1)).abs());
    let scale = 1.0f64.max(a.value().abs()).max(a.derivative(1).abs());
    if jump > PERIODICITY_TOL * scale {
        return Err(Error::NonPeriodicSpeed { index, jump, length });
    }
    Ok(())
}

/// Speeds `f_1, ..., f_n` on the curve at time `t`.
pub fn speed_fields(flow: &FlowSpec, c: &SampledCurve, fd: &FrenetData, t: f64) -> Result<Vec<SpeedField>> {
    if flow.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: flow.dim() });
    }
    let s = c.arclengths();
    match &flow.mode {
        FlowMode::Explicit { speeds } => speeds
            .iter()
            .enumerate()
            .map(|(i, e)| {
                check_periodic(e, i + 1, c, t)?;
                SpeedField::from_expr(e, s, t)
            })
            .collect(),
        FlowMode::Inextensible { speeds, f1_at_0 } => {
            let mut out = Vec::with_capacity(c.dim());
            out.push(SpeedField::default());
            for (i, e) in speeds.iter().enumerate() {
                check_periodic(e, i + 2, c, t)?;
                out.push(SpeedField::from_expr(e, s, t)?);
            }
            let mut g = inextensible_rhs(fd, &out[1].value);
            let value = solve_f1(c, &mut g, *f1_at_0)?;
            let d_ss = d_ds(&g, c);
            out[0] = SpeedField { value, d_s: g, d_ss };
            Ok(out)
        }
    }
}

/// Curve, frame and speeds at one instant.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub curve: SampledCurve,
    pub frenet: FrenetData,
    pub speeds: Vec<SpeedField>,
}

impl SimState {
    pub fn new(curve: SampledCurve, flow: &FlowSpec, t: f64) -> Result<Self> {
        let frenet = frenet_apparatus(&curve)?;
        let speeds = speed_fields(flow, &curve, &frenet, t)?;
        Ok(Self { t, curve, frenet, speeds })
    }

    /// Samples `spec` with jets and attaches the flow at `t = 0`.
    pub fn initial(spec: &CurveSpec, flow: &FlowSpec) -> Result<Self> {
        Self::new(sample(spec)?, flow, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.curve.dim()
    }

    /// `sum_i f_i V_i` at every sample.
    pub fn velocity(&self) -> Vec<MinkVector> {
        let n = self.dim();
        (0..self.curve.len())
            .map(|i| {
                let mut w = MinkVector::zeros(n);
                for j in 1..=n {
                    w += self.frenet.vector(i, j) * self.speeds[j - 1].value[i];
                }
                w
            })
            .collect()
    }
}

/// `dv/dt = df_1/du - eps_0 eps_1 f_2 v k_1`.
///
/// This is the metric-consistent form; it agrees with
/// [`dv_dt_rhs_as_written`] on spacelike curves and differs by the factor
/// `eps_0` on timelike ones.
pub fn dv_dt_rhs(state: &SimState) -> Vec<f64> {
    let fd = &state.frenet;
    let e = fd.signs()[0] * fd.signs()[1];
    let k1 = fd.gs_curvature_field(1);
    let (f1, f2) = (&state.speeds[0], &state.speeds[1]);
    (0..state.curve.len())
        .map(|i| {
            let v = state.curve.speeds()[i];
            v * (f1.d_s[i] - e * f2.value[i] * k1[i])
        })
        .collect()
}

/// `eps_0 df_1/du - eps_1 f_2 v k_1`, the literal textbook form.
pub fn dv_dt_rhs_as_written(state: &SimState) -> Vec<f64> {
    let fd = &state.frenet;
    let (e0, e1) = (fd.signs()[0], fd.signs()[1]);
    let k1 = fd.gs_curvature_field(1);
    let (f1, f2) = (&state.speeds[0], &state.speeds[1]);
    (0..state.curve.len())
        .map(|i| {
            let v = state.curve.speeds()[i];
            e0 * v * f1.d_s[i] - e1 * f2.value[i] * v * k1[i]
        })
        .collect()
}

/// Time stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Step size; `None` picks `0.1 * ds_min / max(1, max |f_i|)` at `t = 0`.
    pub dt: Option<f64>,
    pub steps: usize,
    /// Keep every `record_every`-th state (state 0 and the last are always kept).
    pub record_every: usize,
    /// Time horizon `w`: the evolution must end before it.
    pub horizon: Option<f64>,
}

impl IntegratorConfig {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self { dt: Some(dt), steps, record_every: 1, horizon: None }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }
}

/// Default step: `0.1 * ds_min / max(1, max |f_i|)`.
pub fn default_dt(state: &SimState) -> f64 {
    let fmax = state
        .speeds
        .iter()
        .flat_map(|f| f.value.iter())
        .fold(1.0f64, |m, f| m.max(f.abs()));
    0.1 * state.curve.min_ds() / fmax
}

/// Per-step summary.
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub total_arclength: f64,
    /// `|L(t) - L(0)|`
    pub arclength_drift: f64,
    /// `max_i |s(u_i, t) - s(u_i, 0)|`
    pub pointwise_drift: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// `max_i |k_j|` for `j = 1..n-1`
    pub max_k: Vec<f64>,
}

/// Recorded states of an evolution and per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub flow_name: String,
    pub dt: f64,
    /// step index of each recorded state
    pub steps: Vec<usize>,
    pub states: Vec<SimState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// Time between consecutive recorded states (uniform except possibly the last).
    pub fn record_dt(&self) -> f64 {
        if self.steps.len() < 2 {
            return self.dt;
        }
        (self.steps[1] - self.steps[0]) as f64 * self.dt
    }

    /// Recorded states spaced uniformly in time, for central differencing.
    pub fn uniform_states(&self) -> &[SimState] {
        let n = self.steps.len();
        if n >= 3 && self.steps[n - 1] - self.steps[n - 2] != self.steps[1] - self.steps[0] {
            &self.states[..n - 1]
        } else {
            &self.states
        }
    }
}

/// An evolution that stopped early, with everything computed so far.
#[derive(Debug)]
pub struct Interrupted {
    pub trajectory: Trajectory,
    pub error: Error,
}

impl std::fmt::Display for Interrupted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} steps)", self.error, self.trajectory.diagnostics.len().saturating_sub(1))
    }
}

impl std::error::Error for Interrupted {}

struct Stepper<'a> {
    flow: &'a FlowSpec,
    grid: Vec<f64>,
    h: f64,
    topology: Topology,
    diff: Differentiator,
}

impl Stepper<'_> {
    fn state(&self, points: Vec<MinkVector>, t: f64) -> Result<SimState> {
        let curve = SampledCurve::from_points(self.grid.clone(), self.h, self.topology, points, &self.diff)
            .map_err(|e| match e {
                Error::NullCurve { .. } | Error::MixedCausality { .. } => Error::NullCurveDeveloped { t },
                Error::NonFinite => Error::Stability { t, reason: "non-finite coordinates".into() },
                Error::DegenerateCurve { sample } => {
                    Error::Stability { t, reason: format!("speed vanished at sample {sample}") }
                }
                other => other,
            })?;
        SimState::new(curve, self.flow, t)
    }

    fn rk4(&self, y: &SimState, dt: f64) -> Result<SimState> {
        let p0 = y.curve.points();
        let shifted = |k: &[MinkVector], a: f64| -> Vec<MinkVector> {
            p0.iter().zip(k).map(|(p, k)| *p + *k * a).collect()
        };
        let k1 = y.velocity();
        let k2 = self.state(shifted(&k1, 0.5 * dt), y.t + 0.5 * dt)?.velocity();
        let k3 = self.state(shifted(&k2, 0.5 * dt), y.t + 0.5 * dt)?.velocity();
        let k4 = self.state(shifted(&k3, dt), y.t + dt)?.velocity();
        let next: Vec<MinkVector> = (0..p0.len())
            .map(|i| p0[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
            .collect();
        self.state(next, y.t + dt)
    }
}

fn diagnostics(step: usize, state: &SimState, s0: &[f64], l0: f64) -> StepDiagnostics {
    let c = &state.curve;
    let n = c.dim();
    let max_k = (1..n)
        .map(|k| state.frenet.gs_curvature_field(k).iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    StepDiagnostics {
        step,
        t: state.t,
        total_arclength: c.total_length(),
        arclength_drift: (c.total_length() - l0).abs(),
        pointwise_drift: c.arclengths().iter().zip(s0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        min_v: c.speeds().iter().copied().fold(f64::INFINITY, f64::min),
        max_v: c.speeds().iter().copied().fold(0.0, f64::max),
        max_k,
    }
}

/// Advances `initial` by explicit RK4 on `d alpha/dt = sum f_i V_i`,
/// recomputing frame and speeds at every stage.
///
/// The initial points are re-differentiated with the same stencils used for
/// the evolved curves, so every recorded state is built the same way.
pub fn evolve(initial: &SimState, flow: &FlowSpec, cfg: &IntegratorConfig) -> Result<Trajectory, Box<Interrupted>> {
    let fail = |error: Error| {
        Box::new(Interrupted {
            trajectory: Trajectory {
                flow_name: flow.name.clone(),
                dt: 0.0,
                steps: vec![],
                states: vec![],
                diagnostics: vec![],
            },
            error,
        })
    };
    let c0 = &initial.curve;
    let n = c0.dim();
    let stepper = Stepper {
        flow,
        grid: c0.grid().to_vec(),
        h: c0.spacing(),
        topology: c0.topology(),
        diff: Differentiator::new(c0.len(), c0.topology(), c0.spacing(), n),
    };
    if cfg.steps == 0 || cfg.record_every == 0 {
        return Err(fail(Error::Config("steps and record_every must be at least 1".into())));
    }
    let mut state = match stepper.state(c0.points().to_vec(), initial.t) {
        Ok(s) => s,
        Err(e) => return Err(fail(e)),
    };
    let dt = cfg.dt.unwrap_or_else(|| default_dt(&state));
    if !(dt.is_finite() && dt > 0.0) {
        return Err(fail(Error::Config(format!("dt must be positive, got {dt}"))));
    }
    if let Some(w) = cfg.horizon {
        let t_end = initial.t + dt * cfg.steps as f64;
        if t_end >= w {
            return Err(fail(Error::Config(format!("evolution to t = {t_end} reaches the horizon w = {w}"))));
        }
    }
    let s0 = state.curve.arclengths().to_vec();
    let l0 = state.curve.total_length();
    let mut traj = Trajectory {
        flow_name: flow.name.clone(),
        dt,
        steps: vec![0],
        states: vec![state.clone()],
        diagnostics: vec![diagnostics(0, &state, &s0, l0)],
    };
    for step in 1..=cfg.steps {
        let t_next = initial.t + step as f64 * dt;
        let next = stepper.rk4(&state, dt).and_then(|mut next| {
            // avoid accumulating t by repeated addition
            next.t = t_next;
            let (l_old, l_new) = (state.curve.total_length(), next.curve.total_length());
            if (l_new - l_old).abs() > MAX_STEP_LENGTH_CHANGE * l_old {
                return Err(Error::Stability {
                    t: t_next,
                    reason: format!("total length jumped from {l_old} to {l_new} in one step"),
                });
            }
            Ok(next)
        });
        match next {
            Ok(next) => state = next,
            Err(error) => return Err(Box::new(Interrupted { trajectory: traj, error })),
        }
        traj.diagnostics.push(diagnostics(step, &state, &s0, l0));
        if step % cfg.record_every == 0 || step == cfg.steps {
            traj.steps.push(step);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

/// `max_t |L(t) - L(0)|`.
pub fn arclength_drift(traj: &Trajectory) -> f64 {
    traj.diagnostics.iter().fold(0.0, |m, d| m.max(d.arclength_drift))
}

/// `max_{t,i} |s(u_i, t) - s(u_i, 0)|`.
pub fn pointwise_drift(traj: &Trajectory) -> f64 {
    traj.diagnostics.iter().fold(0.0, |m, d| m.max(d.pointwise_drift))
}
