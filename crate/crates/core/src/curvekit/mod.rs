//! Sampled curves on a uniform parameter grid: speed, arclength, and the
//! arclength derivative `d/ds = (1/v) d/du`.

mod stencil;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprjet::{parse_with_vars, Expr};
use crate::minkowski::{causal_character, CausalCharacter, MinkVector, DEFAULT_NULL_TOL, MAX_DIM, MIN_DIM};

pub use stencil::{fornberg_weights, Differentiator, POINT_DERIVATIVE_ACCURACY};

pub const MIN_SAMPLES: usize = 16;
const CLOSURE_TOL: f64 = 1e-9;
const DEGENERATE_SPEED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Closed,
    Open,
}

/// How the cumulative arclength was integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Simpson,
    Trapezoid,
    /// Four-point interval rule wrapped around a closed curve.
    Periodic,
}

/// Where the per-sample derivative vectors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeSource {
    /// Jet evaluation of the defining expressions.
    Jet,
    /// Finite-difference stencils on the sampled points.
    Stencil,
}

/// An analytic curve `u -> (alpha_0(u), ..., alpha_{n-1}(u))`.
#[derive(Debug, Clone)]
pub struct CurveSpec {
    dim: usize,
    components: Vec<Expr>,
    domain: (f64, f64),
    topology: Topology,
    samples: usize,
}

impl CurveSpec {
    pub fn new(
        components: Vec<Expr>,
        domain: (f64, f64),
        topology: Topology,
        samples: usize,
    ) -> Result<Self> {
        let dim = components.len();
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if samples < MIN_SAMPLES {
            return Err(Error::InvalidCurve(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
        }
        let (u0, u1) = domain;
        if !(u0.is_finite() && u1.is_finite() && u1 > u0) {
            return Err(Error::InvalidCurve(format!("bad domain [{u0}, {u1}]")));
        }
        for (i, c) in components.iter().enumerate() {
            if let Some(v) = c.free_vars().into_iter().find(|v| v != "u") {
                return Err(Error::InvalidCurve(format!("component {i} uses variable `{v}`; only `u` is allowed")));
            }
        }
        if topology == Topology::Closed {
            for (i, c) in components.iter().enumerate() {
                let a = crate::exprjet::eval(c, &[("u", u0)])?;
                let b = crate::exprjet::eval(c, &[("u", u1)])?;
                if (a - b).abs() > CLOSURE_TOL {
                    return Err(Error::InvalidCurve(format!(
                        "closed curve does not close: component {i} differs by {:e} at the ends",
                        (a - b).abs()
                    )));
                }
            }
        }
        Ok(Self { dim, components, domain, topology, samples })
    }

    /// Convenience constructor from expression text.
    pub fn parse(
        components: &[&str],
        domain: (f64, f64),
        topology: Topology,
        samples: usize,
    ) -> Result<Self> {
        let exprs = components
            .iter()
            .map(|c| parse_with_vars(c, &["u"]).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Self::new(exprs, domain, topology, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn with_samples(&self, samples: usize) -> Result<Self> {
        Self::new(self.components.clone(), self.domain, self.topology, samples)
    }
}

/// Grid spacing and node positions for a domain.
pub fn uniform_grid(domain: (f64, f64), topology: Topology, samples: usize) -> (Vec<f64>, f64) {
    let (u0, u1) = domain;
    let intervals = match topology {
        Topology::Closed => samples,
        Topology::Open => samples - 1,
    };
    let h = (u1 - u0) / intervals as f64;
    ((0..samples).map(|i| u0 + i as f64 * h).collect(), h)
}

/// A curve sampled on a uniform `u` grid with derivative vectors
/// `alpha', ..., alpha^(n)` at every node.
///
/// Closed curves do not repeat the end node; the last interval wraps.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    dim: usize,
    topology: Topology,
    grid: Vec<f64>,
    h: f64,
    points: Vec<MinkVector>,
    /// flat, `derivs[i * dim + (m - 1)]` is the m-th derivative at sample i
    derivs: Vec<MinkVector>,
    speeds: Vec<f64>,
    arclength: Vec<f64>,
    total_length: f64,
    character: CausalCharacter,
    quadrature: Quadrature,
    source: DerivativeSource,
}

/// Samples `spec`, differentiating components with jets of order `n`.
pub fn sample(spec: &CurveSpec) -> Result<SampledCurve> {
    let n = spec.dim;
    let (grid, h) = uniform_grid(spec.domain, spec.topology, spec.samples);
    let mut points = Vec::with_capacity(grid.len());
    let mut derivs = vec![MinkVector::zeros(n); grid.len() * n];
    for (i, &u) in grid.iter().enumerate() {
        let mut p = MinkVector::zeros(n);
        for (a, comp) in spec.components.iter().enumerate() {
            let jet = comp.eval_jet("u", u, n, &[])?;
            p[a] = jet.value();
            for m in 1..=n {
                derivs[i * n + m - 1][a] = jet.derivative(m);
            }
        }
        if !p.is_finite() || (0..n).any(|m| !derivs[i * n + m].is_finite()) {
            return Err(Error::Domain(format!("non-finite curve data at u = {u}")));
        }
        points.push(p);
    }
    SampledCurve::assemble(n, spec.topology, grid, h, points, derivs, DerivativeSource::Jet)
}

impl SampledCurve {
    /// Builds a curve from bare points, differentiating with `diff`.
    pub fn from_points(
        grid: Vec<f64>,
        h: f64,
        topology: Topology,
        points: Vec<MinkVector>,
        diff: &Differentiator,
    ) -> Result<Self> {
        let n = points.first().map(|p| p.dim()).ok_or_else(|| Error::InvalidCurve("no points".into()))?;
        if diff.max_order() < n {
            return Err(Error::InvalidCurve("differentiator order below curve dimension".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut derivs = Vec::with_capacity(points.len() * n);
        for i in 0..points.len() {
            for m in 1..=n {
                derivs.push(diff.apply(m, i, |j| points[j]));
            }
        }
        Self::assemble(n, topology, grid, h, points, derivs, DerivativeSource::Stencil)
    }

    fn assemble(
        dim: usize,
        topology: Topology,
        grid: Vec<f64>,
        h: f64,
        points: Vec<MinkVector>,
        derivs: Vec<MinkVector>,
        source: DerivativeSource,
    ) -> Result<Self> {
        let mut character = None;
        let mut speeds = Vec::with_capacity(points.len());
        for i in 0..points.len() {
            let d1 = derivs[i * dim];
            let c = causal_character(&d1, DEFAULT_NULL_TOL);
            if c == CausalCharacter::Null {
                return Err(Error::NullCurve { sample: i });
            }
            let v = d1.norm();
            if v <= DEGENERATE_SPEED_TOL * d1.euclidean_norm().max(1.0) {
                return Err(Error::DegenerateCurve { sample: i });
            }
            match character {
                None => character = Some(c),
                Some(c0) if c0 != c => return Err(Error::MixedCausality { sample: i }),
                _ => {}
            }
            speeds.push(v);
        }
        let (cum, quadrature) = match topology {
            Topology::Closed => (periodic_cumulative_integral(&speeds, h), Quadrature::Periodic),
            Topology::Open => cumulative_integral(&speeds, h),
        };
        let total_length = *cum.last().unwrap();
        let arclength = cum[..points.len()].to_vec();
        Ok(Self {
            dim,
            topology,
            grid,
            h,
            points,
            derivs,
            speeds,
            arclength,
            total_length,
            character: character.expect("at least one sample"),
            quadrature,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Parameter spacing `du`.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn points(&self) -> &[MinkVector] {
        &self.points
    }

    /// `m`-th `u`-derivative of the curve at sample `i`, `1 <= m <= n`.
    pub fn derivative(&self, i: usize, m: usize) -> MinkVector {
        assert!((1..=self.dim).contains(&m));
        self.derivs[i * self.dim + m - 1]
    }

    /// Causal character shared by every tangent.
    pub fn character(&self) -> CausalCharacter {
        self.character
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        self.source
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Arclength coordinate `s(u_i)` measured from the first sample.
    pub fn arclengths(&self) -> &[f64] {
        &self.arclength
    }

    /// Full length, including the wrap-around interval of a closed curve.
    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Smallest arclength step between neighbouring samples.
    pub fn min_ds(&self) -> f64 {
        let mut m = f64::INFINITY;
        for w in self.arclength.windows(2) {
            m = m.min(w[1] - w[0]);
        }
        if self.topology == Topology::Closed {
            m = m.min(self.total_length - self.arclength[self.len() - 1]);
        }
        m
    }
}

/// `v = |alpha'(u_i)|`.
pub fn speed(c: &SampledCurve, i: usize) -> f64 {
    c.speeds[i]
}

/// `s(u_i) = integral of v from u_0 to u_i`.
pub fn arclength(c: &SampledCurve, up_to: usize) -> f64 {
    c.arclength[up_to]
}

/// Cumulative integral of equally spaced samples `y`, with `out[0] = 0`.
///
/// Pairs of intervals use Simpson's rule; each odd node gets the three-point
/// single-interval rule, so every entry is fourth-order accurate. Fewer than
/// two intervals falls back to the trapezoid rule.
pub fn cumulative_integral(y: &[f64], h: f64) -> (Vec<f64>, Quadrature) {
    let m = y.len();
    let mut out = vec![0.0; m];
    if m < 3 {
        for i in 1..m {
            out[i] = out[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
        }
        return (out, Quadrature::Trapezoid);
    }
    for i in 1..m {
        out[i] = if i % 2 == 0 {
            out[i - 2] + h / 3.0 * (y[i - 2] + 4.0 * y[i - 1] + y[i])
        } else if i + 1 < m {
            out[i - 1] + h / 12.0 * (5.0 * y[i - 1] + 8.0 * y[i] - y[i + 1])
        } else {
            out[i - 1] + h / 12.0 * (-y[i - 2] + 8.0 * y[i - 1] + 5.0 * y[i])
        };
    }
    (out, Quadrature::Simpson)
}

/// Cumulative integral of one period of `y` (no repeated endpoint); returns
/// `y.len() + 1` values, the last being the full-period integral.
///
/// Every interval uses `h/24 (-y[i-1] + 13 y[i] + 13 y[i+1] - y[i+2])` with
/// wrapped indices. The rule is the same on every interval, so the error is
/// smooth along the curve, and the period total equals the trapezoid sum.
/// Needs at least 4 samples.
pub fn periodic_cumulative_integral(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let at = |i: usize| y[i % n];
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for i in 0..n {
        let w = -at(i + n - 1) + 13.0 * at(i) + 13.0 * at(i + 1) - at(i + 2);
        out.push(out[i] + h / 24.0 * w);
    }
    out
}

/// Second-order `d/ds` of a grid function: centred differences in `u`
/// (periodic on closed curves, one-sided at open ends) divided by `v`.
pub fn d_ds(values: &[f64], c: &SampledCurve) -> Vec<f64> {
    central_du(values, c.topology, c.h)
        .into_iter()
        .zip(&c.speeds)
        .map(|(d, v)| d / v)
        .collect()
}

/// [`d_ds`] applied componentwise to a vector field.
pub fn d_ds_vectors(values: &[MinkVector], c: &SampledCurve) -> Vec<MinkVector> {
    central_du(values, c.topology, c.h)
        .into_iter()
        .zip(&c.speeds)
        .map(|(d, v)| d * (1.0 / v))
        .collect()
}

fn central_du<T>(y: &[T], topology: Topology, h: f64) -> Vec<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let n = y.len();
    let inv = 1.0 / (2.0 * h);
    (0..n)
        .map(|i| match topology {
            Topology::Closed => (y[(i + 1) % n] - y[(i + n - 1) % n]) * inv,
            Topology::Open if i == 0 => (y[1] * 4.0 - y[0] * 3.0 - y[2]) * inv,
            Topology::Open if i == n - 1 => (y[n - 1] * 3.0 - y[n - 2] * 4.0 + y[n - 3]) * inv,
            Topology::Open => (y[i + 1] - y[i - 1]) * inv,
        })
        .collect()
}
