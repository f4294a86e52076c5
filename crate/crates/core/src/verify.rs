//! Residual checks of the flow identities against simulated trajectories.
//!
//! Time derivatives are central differences across recorded states, space
//! derivatives the second-order `d/ds` stencil, so every residual is
//! `O(h^2) + O(dt^2)` for a correct identity. Curvature values come from the
//! Gram–Schmidt coefficients of each state. Vector residuals use the
//! Euclidean norm of the components.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curvekit::{d_ds, SampledCurve, Topology, POINT_DERIVATIVE_ACCURACY};
use crate::error::{Error, Result};
use crate::flowsim::{pointwise_drift, SimState, Trajectory};
use crate::frenet::{frenet_residuals, FrenetData};
use crate::minkowski::MinkVector;

/// Residuals below this are treated as exact; no order is fitted through them.
pub const ORDER_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    SpeedEvolution,
    IffCondition,
    PsiMatrix,
    FrameEvolution,
    CurvaturePde,
    FrenetEquations,
    FrameOrthonormality,
}

impl Identity {
    pub const ALL: [Identity; 7] = [
        Identity::SpeedEvolution,
        Identity::IffCondition,
        Identity::PsiMatrix,
        Identity::FrameEvolution,
        Identity::CurvaturePde,
        Identity::FrenetEquations,
        Identity::FrameOrthonormality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::SpeedEvolution => "speed_evolution",
            Identity::IffCondition => "iff_condition",
            Identity::PsiMatrix => "psi_matrix",
            Identity::FrameEvolution => "frame_evolution",
            Identity::CurvaturePde => "curvature_pde",
            Identity::FrenetEquations => "frenet_equations",
            Identity::FrameOrthonormality => "frame_orthonormality",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == name)
    }

    /// Fewest uniformly spaced states the check needs.
    pub fn min_states(self) -> usize {
        match self {
            Identity::IffCondition | Identity::FrenetEquations | Identity::FrameOrthonormality => 1,
            _ => 3,
        }
    }
}

/// Pass thresholds, one per identity; `iff_a` and `iff_b` split the two sides
/// of the inextensibility equivalence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub speed_evolution: f64,
    pub iff_a: f64,
    pub iff_b: f64,
    pub psi_matrix: f64,
    pub frame_evolution: f64,
    pub curvature_pde: f64,
    pub frenet_equations: f64,
    pub frame_orthonormality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            speed_evolution: 1e-3,
            iff_a: 1e-3,
            iff_b: 1e-3,
            psi_matrix: 1e-5,
            frame_evolution: 1e-3,
            curvature_pde: 5e-3,
            frenet_equations: 1e-3,
            frame_orthonormality: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn for_identity(&self, id: Identity) -> f64 {
        match id {
            Identity::SpeedEvolution => self.speed_evolution,
            // the residual is the 0/1 mismatch of the two thresholded sides
            Identity::IffCondition => 0.5,
            Identity::PsiMatrix => self.psi_matrix,
            Identity::FrameEvolution => self.frame_evolution,
            Identity::CurvaturePde => self.curvature_pde,
            Identity::FrenetEquations => self.frenet_equations,
            Identity::FrameOrthonormality => self.frame_orthonormality,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    pub samples: usize,
    pub dt: f64,
}

/// Residuals of one identity at one or more resolutions.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub identity: Identity,
    pub resolutions: Vec<Resolution>,
    /// max residual per resolution
    pub residuals: Vec<f64>,
    /// fitted convergence order, `None` when not meaningful
    pub order: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// named auxiliary measurements, one value per resolution
    pub details: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn single(identity: Identity, traj: &Trajectory, residual: f64, tolerance: f64) -> Self {
        let samples = traj.states.first().map_or(0, |s| s.curve.len());
        Self {
            identity,
            resolutions: vec![Resolution { samples, dt: traj.dt }],
            residuals: vec![residual],
            order: None,
            tolerance,
            pass: residual <= tolerance,
            details: BTreeMap::new(),
            notes: vec![],
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), vec![value]);
        self
    }

    pub fn finest_residual(&self) -> f64 {
        *self.residuals.last().expect("report has a resolution")
    }
}

/// Merges single-resolution reports (coarse to fine) and fits the order.
pub fn combine(reports: Vec<VerificationReport>) -> VerificationReport {
    let mut it = reports.into_iter();
    let mut out = it.next().expect("at least one report");
    for r in it {
        assert_eq!(r.identity, out.identity);
        out.resolutions.extend(r.resolutions);
        out.residuals.extend(r.residuals);
        for (k, v) in r.details {
            out.details.entry(k).or_default().extend(v);
        }
        for n in r.notes {
            if !out.notes.contains(&n) {
                out.notes.push(n);
            }
        }
    }
    out.order = fit_order(&out.residuals);
    out.pass = out.finest_residual() <= out.tolerance;
    out
}

/// Least-squares slope of `-log2(residual)` against refinement level.
pub fn fit_order(residuals: &[f64]) -> Option<f64> {
    if residuals.len() < 2 || residuals.iter().any(|r| !(r.is_finite() && *r > ORDER_FLOOR)) {
        return None;
    }
    let m = residuals.len() as f64;
    let xs: Vec<f64> = (0..residuals.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| -r.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// `max |x|`, propagating NaN.
fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut m: f64 = 0.0;
    for x in it {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn require_states(traj: &Trajectory, needed: usize) -> Result<&[SimState]> {
    let states = traj.uniform_states();
    if states.len() < needed {
        return Err(Error::InsufficientStates { needed, found: states.len() });
    }
    Ok(states)
}

/// `max_{t,i} |df_1/ds - eps_0 eps_1 f_2 k_1|`.
pub fn inextensibility_violation(traj: &Trajectory) -> f64 {
    max_abs(traj.states.iter().flat_map(state_violation))
}

fn state_violation(st: &SimState) -> Vec<f64> {
    let e = st.frenet.signs()[0] * st.frenet.signs()[1];
    let k1 = st.frenet.gs_curvature_field(1);
    (0..st.curve.len()).map(|i| st.speeds[0].d_s[i] - e * st.speeds[1].value[i] * k1[i]).collect()
}

/// Samples away from the one-sided boundary stencils. Open curves drop the
/// half-width of the order-`n` point stencil plus two for nested `d_ds`.
pub fn interior(c: &SampledCurve) -> std::ops::Range<usize> {
    match c.topology() {
        Topology::Closed => 0..c.len(),
        Topology::Open => {
            let m = (POINT_DERIVATIVE_ACCURACY + c.dim() - 1) / 2 + 2;
            m..c.len() - m
        }
    }
}

/// `v (d_ds f_1 - eps_0 eps_1 f_2 k_1)` and the textbook
/// `eps_0 v d_ds f_1 - eps_1 f_2 v k_1`, with `d_ds` the grid operator.
fn discrete_speed_rhs(st: &SimState) -> (Vec<f64>, Vec<f64>) {
    let (e0, e1) = (st.frenet.signs()[0], st.frenet.signs()[1]);
    let k1 = st.frenet.gs_curvature_field(1);
    let df1 = d_ds(&st.speeds[0].value, &st.curve);
    let f2 = &st.speeds[1].value;
    (0..st.curve.len())
        .map(|i| {
            let v = st.curve.speeds()[i];
            (v * (df1[i] - e0 * e1 * f2[i] * k1[i]), e0 * v * df1[i] - e1 * f2[i] * v * k1[i])
        })
        .unzip()
}

/// Speed law: central time difference of `v` against
/// `df_1/du - eps_0 eps_1 f_2 v k_1` over interior samples.
pub fn check_speed_evolution(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    let states = require_states(traj, 3)?;
    let dt = traj.record_dt();
    let (mut res, mut res_written, mut lhs_max) = (0.0f64, 0.0f64, 0.0f64);
    for m in 1..states.len() - 1 {
        let (prev, next) = (states[m - 1].curve.speeds(), states[m + 1].curve.speeds());
        let (rhs, written) = discrete_speed_rhs(&states[m]);
        for i in interior(&states[m].curve) {
            let lhs = (next[i] - prev[i]) / (2.0 * dt);
            res = res.max((lhs - rhs[i]).abs());
            res_written = res_written.max((lhs - written[i]).abs());
            lhs_max = lhs_max.max(lhs.abs());
        }
    }
    Ok(VerificationReport::single(Identity::SpeedEvolution, traj, res, tol.speed_evolution)
        .detail("as_written", res_written)
        .detail("max_abs_dv_dt", lhs_max))
}

/// Inextensibility equivalence: (a) the pointwise condition and (b) the
/// pointwise arclength drift must be small together or large together.
pub fn check_iff_condition(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    if traj.diagnostics.len() < 2 {
        return Err(Error::InsufficientStates { needed: 2, found: traj.diagnostics.len() });
    }
    let a = inextensibility_violation(traj);
    let b = pointwise_drift(traj);
    let holds = (a <= tol.iff_a) == (b <= tol.iff_b);
    let mut r = VerificationReport::single(Identity::IffCondition, traj, if holds { 0.0 } else { 1.0 }, 0.5)
        .detail("a_condition", a)
        .detail("b_drift", b)
        .detail("total_length_drift", crate::flowsim::arclength_drift(traj))
        .detail("a_small", f64::from(u8::from(a <= tol.iff_a)))
        .detail("b_small", f64::from(u8::from(b <= tol.iff_b)));
    if !holds {
        r.notes.push(format!("equivalence violated: a = {a:e}, b = {b:e}"));
    }
    Ok(r)
}

/// Frames of the uniform states, with signs aligned to the previous state
/// (`eps_{j-1} <V_j(t), V_j(t + dt)> > 0`).
pub fn aligned_frames(traj: &Trajectory) -> Vec<FrenetData> {
    let states = traj.uniform_states();
    let mut out: Vec<FrenetData> = Vec::with_capacity(states.len());
    for st in states {
        let mut fd = st.frenet.clone();
        if let Some(prev) = out.last() {
            for i in 0..fd.len() {
                for j in 1..=fd.dim() {
                    if fd.signs()[j - 1] * fd.vector(i, j).dot(&prev.vector(i, j)) < 0.0 {
                        fd.flip(i, j);
                    }
                }
            }
        }
        out.push(fd);
    }
    out
}

/// `Psi_kj = <dV_j/dt, V_k>` at one state, as grid functions.
#[derive(Debug, Clone, Serialize)]
pub struct PsiMatrix {
    pub dim: usize,
    /// `entries[(k - 1) * dim + (j - 1)]` is `Psi_kj` along the curve
    entries: Vec<Vec<f64>>,
    /// `max |Psi_kj + Psi_jk|` over `k != j` and samples
    pub antisymmetry: f64,
    /// `max |Psi_jj|`
    pub diagonal: f64,
}

impl PsiMatrix {
    /// `Psi_kj`; zero when an index is out of `1..=n`.
    pub fn entry(&self, k: usize, j: usize) -> Vec<f64> {
        let len = self.entries[0].len();
        if k == 0 || j == 0 || k > self.dim || j > self.dim {
            return vec![0.0; len];
        }
        self.entries[(k - 1) * self.dim + (j - 1)].clone()
    }
}

/// Central time difference of `V_j` at uniform state `m`.
fn frame_rate(frames: &[FrenetData], m: usize, j: usize, dt: f64) -> Vec<MinkVector> {
    (0..frames[m].len())
        .map(|i| (frames[m + 1].vector(i, j) - frames[m - 1].vector(i, j)) * (0.5 / dt))
        .collect()
}

fn psi_at(frames: &[FrenetData], m: usize, dt: f64) -> PsiMatrix {
    let n = frames[m].dim();
    let len = frames[m].len();
    let rates: Vec<Vec<MinkVector>> = (1..=n).map(|j| frame_rate(frames, m, j, dt)).collect();
    let mut entries = vec![vec![0.0; len]; n * n];
    for k in 1..=n {
        for j in 1..=n {
            entries[(k - 1) * n + (j - 1)] = (0..len).map(|i| rates[j - 1][i].dot(&frames[m].vector(i, k))).collect();
        }
    }
    let (mut antisymmetry, mut diagonal) = (0.0f64, 0.0f64);
    for k in 0..n {
        diagonal = entries[k * n + k].iter().fold(diagonal, |m, x| m.max(x.abs()));
        for j in k + 1..n {
            let (upper, lower) = (&entries[k * n + j], &entries[j * n + k]);
            antisymmetry = upper.iter().zip(lower).fold(antisymmetry, |m, (a, b)| m.max((a + b).abs()));
        }
    }
    PsiMatrix { dim: n, entries, antisymmetry, diagonal }
}

/// `Psi` at recorded (uniform) state `at_step`, which must be interior.
pub fn psi_matrix(traj: &Trajectory, at_step: usize) -> Result<PsiMatrix> {
    let states = require_states(traj, 3)?;
    if at_step == 0 || at_step + 1 >= states.len() {
        return Err(Error::InsufficientStates { needed: at_step + 2, found: states.len() });
    }
    Ok(psi_at(&aligned_frames(traj), at_step, traj.record_dt()))
}

/// Antisymmetry and zero diagonal of `Psi` over all interior states.
pub fn check_psi_matrix(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    let states = require_states(traj, 3)?;
    let frames = aligned_frames(traj);
    let (mut anti, mut diag) = (0.0f64, 0.0f64);
    for m in 1..states.len() - 1 {
        let psi = psi_at(&frames, m, traj.record_dt());
        anti = anti.max(psi.antisymmetry);
        diag = diag.max(psi.diagonal);
    }
    Ok(VerificationReport::single(Identity::PsiMatrix, traj, anti.max(diag), tol.psi_matrix)
        .detail("antisymmetry", anti)
        .detail("diagonal", diag))
}

fn require_inextensible(traj: &Trajectory, tol: &Tolerances) -> Result<()> {
    let violation = inextensibility_violation(traj);
    if violation > tol.iff_a {
        return Err(Error::NotInextensible { violation });
    }
    Ok(())
}

/// Per-state quantities shared by the frame and curvature checks.
struct Local<'a> {
    st: &'a SimState,
    fd: &'a FrenetData,
    /// `k[0..=n]`, with `k_0 = k_n = 0`
    k: Vec<Vec<f64>>,
}

impl<'a> Local<'a> {
    fn new(st: &'a SimState, fd: &'a FrenetData) -> Self {
        let n = fd.dim();
        Self { st, fd, k: (0..=n).map(|i| fd.gs_curvature_field(i)).collect() }
    }

    fn eps(&self, m: isize) -> f64 {
        self.fd.eps(m)
    }

    fn curve(&self) -> &SampledCurve {
        &self.st.curve
    }

    /// `f_m` with its first two `d_ds` derivatives, zero outside `1..=n`.
    fn f(&self, m: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let len = self.fd.len();
        if m == 0 || m > self.fd.dim() {
            return (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        }
        let f = self.st.speeds[m - 1].value.clone();
        let df = d_ds(&f, self.curve());
        let ddf = d_ds(&df, self.curve());
        (f, df, ddf)
    }

    /// `a_m = f_{m-1} k_{m-1} + f_m' - eps_{m-1} eps_m f_{m+1} k_m`, the
    /// `V_m` coefficient of `dV_1/dt`.
    fn a(&self, m: usize) -> Vec<f64> {
        let n = self.fd.dim();
        if m < 2 || m > n {
            return vec![0.0; self.fd.len()];
        }
        let (fm1, _, _) = self.f(m - 1);
        let (_, dfm, _) = self.f(m);
        let (fp1, _, _) = self.f(m + 1);
        let mi = m as isize;
        let e = self.eps(mi - 1) * self.eps(mi);
        let km = if m < n { &self.k[m] } else { &self.k[0] };
        (0..self.fd.len()).map(|i| fm1[i] * self.k[m - 1][i] + dfm[i] - e * fp1[i] * km[i]).collect()
    }
}

/// Frame evolution: `dV_1/dt = sum_{m>=2} a_m V_m`, the `V_1` components of
/// `dV_j/dt`, and the reconstruction of `dV_j/dt` from `Psi`.
pub fn check_frame_evolution(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    let states = require_states(traj, 3)?;
    require_inextensible(traj, tol)?;
    let frames = aligned_frames(traj);
    let dt = traj.record_dt();
    let n = frames[0].dim();
    let (mut r_v1, mut r_comp, mut r_eps, mut r_bare) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for m in 1..states.len() - 1 {
        let fd = &frames[m];
        let loc = Local::new(&states[m], fd);
        let a: Vec<Vec<f64>> = (0..=n).map(|j| loc.a(j)).collect();
        let psi = psi_at(&frames, m, dt);
        let rates: Vec<Vec<MinkVector>> = (1..=n).map(|j| frame_rate(&frames, m, j, dt)).collect();
        let e0 = fd.signs()[0];
        for i in interior(&states[m].curve) {
            let mut predicted = MinkVector::zeros(n);
            for (j, aj) in a.iter().enumerate().skip(2) {
                predicted += fd.vector(i, j) * aj[i];
            }
            r_v1 = r_v1.max((rates[0][i] - predicted).euclidean_norm());
            for j in 2..=n {
                let comp = e0 * rates[j - 1][i].dot(&fd.vector(i, 1));
                let want = -e0 * fd.signs()[j - 1] * a[j][i];
                r_comp = r_comp.max((comp - want).abs());
            }
            for j in 1..=n {
                let (mut with_eps, mut bare) = (MinkVector::zeros(n), MinkVector::zeros(n));
                for k in 1..=n {
                    let p = psi.entries[(k - 1) * n + (j - 1)][i];
                    with_eps += fd.vector(i, k) * (fd.signs()[k - 1] * p);
                    bare += fd.vector(i, k) * p;
                }
                r_eps = r_eps.max((rates[j - 1][i] - with_eps).euclidean_norm());
                r_bare = r_bare.max((rates[j - 1][i] - bare).euclidean_norm());
            }
        }
    }
    let residual = nan_max(nan_max(r_v1, r_comp), r_eps);
    Ok(VerificationReport::single(Identity::FrameEvolution, traj, residual, tol.frame_evolution)
        .detail("v1_derivative", r_v1)
        .detail("v1_components", r_comp)
        .detail("reconstruction_eps", r_eps)
        .detail("reconstruction_bare", r_bare))
}

/// Curvature evolution, each equation in its derived form (the residual) and
/// in the textbook form (reported in `details` with suffix `_as_written`).
///
/// (A) `dk_1/dt` in terms of the speeds and curvatures;
/// (B) `dk_{n-1}/dt` and (C) `dk_i/dt`, `1 <= i <= n-2`, in terms of `Psi`.
pub fn check_curvature_pde(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    let states = require_states(traj, 3)?;
    require_inextensible(traj, tol)?;
    let frames = aligned_frames(traj);
    let dt = traj.record_dt();
    let n = frames[0].dim();
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let inner = interior(&states[0].curve);
    let mut bump = |key: String, vals: &[f64]| {
        let vals = &vals[inner.clone()];
        let e = worst.entry(key).or_insert(0.0);
        *e = nan_max(*e, max_abs(vals.iter().copied()));
    };
    for m in 1..states.len() - 1 {
        let fd = &frames[m];
        let loc = Local::new(&states[m], fd);
        let c = loc.curve();
        let len = fd.len();
        let eps = |i: isize| loc.eps(i);
        let k = &loc.k;
        let dk: Vec<Vec<f64>> = k.iter().map(|ki| d_ds(ki, c)).collect();
        let kt = |i: usize| -> Vec<f64> {
            let (p, q) = (frames[m - 1].gs_curvature_field(i), frames[m + 1].gs_curvature_field(i));
            p.iter().zip(&q).map(|(a, b)| (b - a) / (2.0 * dt)).collect()
        };
        let psi = psi_at(&frames, m, dt);
        let dpsi = |a: usize, b: usize| d_ds(&psi.entry(a, b), c);
        let k_at = |i: usize| if i <= n { k[i].clone() } else { vec![0.0; len] };

        // (A)
        let (f1, _, _) = loc.f(1);
        let (f2, _, d2f2) = loc.f(2);
        let (f3, df3, _) = loc.f(3);
        let (f4, _, _) = loc.f(4);
        let (k1, k2, k3) = (k_at(1), k_at(2), k_at(3));
        let dk2 = if n > 2 { dk[2].clone() } else { vec![0.0; len] };
        let (e01, e12, e13) = (eps(0) * eps(1), eps(1) * eps(2), eps(1) * eps(3));
        let lhs = kt(1);
        let mut rhs_a = vec![0.0; len];
        let mut rhs_written = vec![0.0; len];
        for i in 0..len {
            let common = e01 * f2[i] * k1[i] * k1[i] + f1[i] * dk[1][i] + d2f2[i]
                - 2.0 * e12 * df3[i] * k2[i]
                - e12 * f3[i] * dk2[i]
                - e12 * f2[i] * k2[i] * k2[i];
            rhs_a[i] = common + e13 * f4[i] * k2[i] * k3[i];
            rhs_written[i] = common - e13 * f4[i] * k2[i] * k3[i];
        }
        let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a - b).collect() };
        bump("A".into(), &diff(&lhs, &rhs_a));
        bump("A_as_written".into(), &diff(&lhs, &rhs_written));
        bump("fd_t_k1".into(), &lhs);
        bump("rhs_A".into(), &rhs_a);

        // (B): i = n - 1
        let nn = n as isize;
        let dpsi_last = dpsi(n - 1, n);
        let psi_prev = psi.entry(n.saturating_sub(2), n);
        let lhs_b = kt(n - 1);
        let k_prev = if n >= 3 { k[n - 2].clone() } else { vec![0.0; len] };
        let (rb, rb_written): (Vec<f64>, Vec<f64>) = (0..len)
            .map(|i| {
                let derived =
                    -eps(nn - 1) * (dpsi_last[i] + eps(nn - 3) * eps(nn - 2) * k_prev[i] * psi_prev[i]);
                let written = -eps(nn - 2) * eps(nn - 1) * (dpsi_last[i] + psi_prev[i] * k_prev[i]);
                (lhs_b[i] - derived, lhs_b[i] - written)
            })
            .unzip();
        bump("B".into(), &rb);
        bump("B_as_written".into(), &rb_written);

        // (C): 1 <= i <= n - 2
        for ci in 1..n.saturating_sub(1) {
            let ii = ci as isize;
            let lhs_c = kt(ci);
            let d_next = dpsi(ci + 1, ci);
            let psi_skip = psi.entry(ci + 2, ci);
            let psi_back = psi.entry(ci - 1, ci + 1);
            let (k_next, k_back) = (k_at(ci + 1), k_at(ci - 1));
            let (rc, rc_written): (Vec<f64>, Vec<f64>) = (0..len)
                .map(|s| {
                    let derived = eps(ii)
                        * (d_next[s]
                            - k_next[s] * psi_skip[s]
                            - eps(ii - 2) * eps(ii - 1) * k_back[s] * psi_back[s]);
                    let written = d_next[s] - eps(ii) * eps(ii + 1) * psi_skip[s] * k_next[s];
                    (lhs_c[s] - derived, lhs_c[s] - written)
                })
                .unzip();
            bump(format!("C{ci}"), &rc);
            bump(format!("C{ci}_as_written"), &rc_written);
        }
    }
    let residual = worst
        .iter()
        .filter(|(k, _)| k.as_str() == "A" || k.as_str() == "B" || (k.starts_with('C') && !k.ends_with("written")))
        .fold(0.0f64, |m, (_, v)| nan_max(m, *v));
    let mut r = VerificationReport::single(Identity::CurvaturePde, traj, residual, tol.curvature_pde);
    for (k, v) in worst {
        r = r.detail(&k, v);
    }
    Ok(r)
}

/// Frenet equations on every recorded state.
pub fn check_frenet_equations(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    let states = require_states(traj, 1)?;
    let r = max_abs(states.iter().flat_map(|s| {
        let res = frenet_residuals(&s.curve, &s.frenet);
        interior(&s.curve).flat_map(move |i| res.iter().map(move |r| r[i]).collect::<Vec<_>>())
    }));
    Ok(VerificationReport::single(Identity::FrenetEquations, traj, r, tol.frenet_equations))
}

/// `max_t |<V_i, V_j> - eps_{i-1} delta_ij|`.
pub fn check_frame_orthonormality(traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    let states = require_states(traj, 1)?;
    let r = max_abs(states.iter().map(|s| s.frenet.orthonormality_residual()));
    Ok(VerificationReport::single(Identity::FrameOrthonormality, traj, r, tol.frame_orthonormality))
}

/// Runs one identity check.
pub fn check(id: Identity, traj: &Trajectory, tol: &Tolerances) -> Result<VerificationReport> {
    match id {
        Identity::SpeedEvolution => check_speed_evolution(traj, tol),
        Identity::IffCondition => check_iff_condition(traj, tol),
        Identity::PsiMatrix => check_psi_matrix(traj, tol),
        Identity::FrameEvolution => check_frame_evolution(traj, tol),
        Identity::CurvaturePde => check_curvature_pde(traj, tol),
        Identity::FrenetEquations => check_frenet_equations(traj, tol),
        Identity::FrameOrthonormality => check_frame_orthonormality(traj, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvekit::CurveSpec;
    use crate::flowsim::{evolve, FlowSpec, IntegratorConfig};

    fn circle_run(speeds: &[&str], samples: usize, dt: f64, steps: usize) -> Trajectory {
        let spec = CurveSpec::parse(&["0", "cos(u)", "sin(u)"], (0.0, std::f64::consts::TAU), Topology::Closed, samples)
            .unwrap();
        let flow = FlowSpec::explicit("test", speeds).unwrap();
        let init = SimState::initial(&spec, &flow).unwrap();
        evolve(&init, &flow, &IntegratorConfig::new(dt, steps)).unwrap()
    }

    #[test]
    fn order_fit() {
        let o = fit_order(&[4e-4, 1e-4, 2.5e-5]).unwrap();
        assert!((o - 2.0).abs() < 1e-12);
        assert_eq!(fit_order(&[1e-3]), None);
        assert_eq!(fit_order(&[1e-3, 1e-10]), None);
        assert_eq!(fit_order(&[1e-3, f64::NAN]), None);
    }

    #[test]
    fn combine_keeps_levels_in_order() {
        let traj = circle_run(&["0", "0", "0"], 32, 1e-2, 2);
        let tol = Tolerances::default();
        let mut a = check_frenet_equations(&traj, &tol).unwrap();
        let mut b = a.clone();
        a.residuals = vec![2e-3];
        b.residuals = vec![5e-4];
        let c = combine(vec![a, b]);
        assert_eq!(c.residuals, vec![2e-3, 5e-4]);
        assert_eq!(c.resolutions.len(), 2);
        assert!((c.order.unwrap() - 2.0).abs() < 1e-12);
        // pass is decided by the finest level
        assert!(c.pass);
    }

    #[test]
    fn identity_names_round_trip() {
        for id in Identity::ALL {
            assert_eq!(Identity::from_name(id.name()), Some(id));
        }
        assert_eq!(Identity::from_name("foo"), None);
    }

    #[test]
    fn zero_flow_is_exact() {
        let traj = circle_run(&["0", "0", "0"], 64, 1e-2, 4);
        let tol = Tolerances::default();
        for id in [Identity::SpeedEvolution, Identity::PsiMatrix, Identity::FrameEvolution, Identity::CurvaturePde] {
            let r = check(id, &traj, &tol).unwrap();
            assert_eq!(r.residuals, vec![0.0], "{}", id.name());
        }
        let iff = check_iff_condition(&traj, &tol).unwrap();
        assert_eq!(iff.details["a_condition"], vec![0.0]);
        assert_eq!(iff.details["b_drift"], vec![0.0]);
    }

    #[test]
    fn shrinking_circle_upholds_equivalence_with_both_sides_large() {
        let traj = circle_run(&["0", "1", "0"], 128, 1e-3, 100);
        let r = check_iff_condition(&traj, &Tolerances::default()).unwrap();
        assert!(r.pass);
        // k1 = 1/(1 - t) peaks at the last step
        assert!((r.details["a_condition"][0] - 1.0 / 0.9).abs() < 1e-6);
        assert!(r.details["b_drift"][0] > 0.6);
        assert!((r.details["total_length_drift"][0] - 0.2 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn frame_and_curvature_checks_need_an_inextensible_flow() {
        let traj = circle_run(&["0", "1", "0"], 64, 1e-3, 4);
        let tol = Tolerances::default();
        for id in [Identity::FrameEvolution, Identity::CurvaturePde] {
            match check(id, &traj, &tol) {
                Err(Error::NotInextensible { violation }) => assert!((violation - 1.0 / 0.996).abs() < 1e-6),
                other => panic!("{}: {other:?}", id.name()),
            }
        }
    }

    #[test]
    fn time_differences_need_three_states() {
        let traj = circle_run(&["0", "0", "0"], 32, 1e-2, 1);
        let tol = Tolerances::default();
        assert!(matches!(check_psi_matrix(&traj, &tol), Err(Error::InsufficientStates { needed: 3, found: 2 })));
        assert!(matches!(psi_matrix(&traj, 0), Err(Error::InsufficientStates { .. })));
        assert!(check_frame_orthonormality(&traj, &tol).unwrap().pass);
    }

    #[test]
    fn rigid_rotation_frame_turns_at_unit_rate() {
        let traj = circle_run(&["1 - cos(s)", "sin(s)", "0"], 128, 1e-3, 4);
        let psi = psi_matrix(&traj, 2).unwrap();
        assert!(psi.antisymmetry < 1e-6 && psi.diagonal < 1e-6);
        let (p12, p21) = (psi.entry(1, 2), psi.entry(2, 1));
        for i in 0..p12.len() {
            assert!((p12[i] + p21[i]).abs() < 1e-6);
            assert!((p21[i].abs() - 1.0).abs() < 1e-5, "{}", p21[i]);
        }
        assert_eq!(psi.entry(0, 1), vec![0.0; 128]);
    }

    #[test]
    fn open_curves_drop_boundary_samples() {
        let spec = CurveSpec::parse(&["sinh(u)", "cosh(u)"], (-1.0, 1.0), Topology::Open, 32).unwrap();
        let c = crate::curvekit::sample(&spec).unwrap();
        assert_eq!(interior(&c), 5..27);
        let circle = circle_run(&["0", "0", "0"], 32, 1e-2, 1);
        assert_eq!(interior(&circle.states[0].curve), 0..32);
    }
}
