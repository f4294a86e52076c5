//! Scenario documents: one JSON object naming a curve, a flow, the integrator
//! settings and the checks to run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvekit::{CurveSpec, Topology};
use crate::error::{Error, Result};
use crate::exprjet::{eval, parse};
use crate::flowsim::{FlowSpec, IntegratorConfig};
use crate::verify::{Identity, Tolerances};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub curve: CurveSection,
    pub flow: FlowSection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

/// A number, or a constant expression such as `"2*pi"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    fn value(&self, field: &str) -> Result<f64> {
        match self {
            Scalar::Number(x) => Ok(*x),
            Scalar::Expr(text) => {
                let e = parse(text).map_err(|e| config(field, e))?;
                eval(&e, &[]).map_err(|e| config(field, e))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    /// Component expressions in `u`, time coordinate first.
    pub components: Vec<String>,
    pub domain: [Scalar; 2],
    pub topology: Topology,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowSection {
    /// All `n` speeds given.
    Explicit { speeds: Vec<String> },
    /// `f_2..f_n` given; `f_1` solved from the inextensibility condition.
    Inextensible {
        speeds: Vec<String>,
        #[serde(default)]
        f1_at_0: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub dt: Option<f64>,
    pub steps: usize,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub t_horizon: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Timeseries,
    Report,
    Frames,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Steps to dump with `frames`; empty means first and last.
    #[serde(default)]
    pub frame_steps: Vec<usize>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Timeseries, Format::Report]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: None, formats: default_formats(), frame_steps: vec![] }
    }
}

fn config(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {e}"))
}

/// A validated scenario with its parts built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub curve: CurveSpec,
    pub flow: FlowSpec,
    pub integrator: IntegratorConfig,
    pub checks: Vec<Identity>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn prepare(self) -> Result<Prepared> {
        let n = self.dimension;
        if !(2..=8).contains(&n) {
            return Err(config("dimension", Error::InvalidDimension(n)));
        }
        if self.curve.components.len() != n {
            return Err(config(
                "curve.components",
                format!("{} entries for dimension {n}", self.curve.components.len()),
            ));
        }
        let domain = (self.curve.domain[0].value("curve.domain[0]")?, self.curve.domain[1].value("curve.domain[1]")?);
        let comps: Vec<&str> = self.curve.components.iter().map(String::as_str).collect();
        let curve = CurveSpec::parse(&comps, domain, self.curve.topology, self.curve.samples)
            .map_err(|e| config("curve", e))?;

        let speeds: Vec<&str>;
        let flow = match &self.flow {
            FlowSection::Explicit { speeds: s } => {
                if s.len() != n {
                    return Err(config("flow.speeds", format!("explicit mode needs {n} speeds, found {}", s.len())));
                }
                speeds = s.iter().map(String::as_str).collect();
                FlowSpec::explicit(&self.name, &speeds)
            }
            FlowSection::Inextensible { speeds: s, f1_at_0 } => {
                if s.len() != n - 1 {
                    return Err(config(
                        "flow.speeds",
                        format!("inextensible mode needs {} speeds (f2..f{n}), found {}", n - 1, s.len()),
                    ));
                }
                speeds = s.iter().map(String::as_str).collect();
                FlowSpec::inextensible(&self.name, &speeds, *f1_at_0)
            }
        }
        .map_err(|e| config("flow.speeds", e))?;

        let it = &self.integrator;
        if it.steps == 0 {
            return Err(config("integrator.steps", "must be at least 1"));
        }
        if it.record_every == 0 {
            return Err(config("integrator.record_every", "must be at least 1"));
        }
        if let Some(dt) = it.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(config("integrator.dt", format!("must be positive, got {dt}")));
            }
        }
        let integrator = IntegratorConfig {
            dt: it.dt,
            steps: it.steps,
            record_every: it.record_every,
            horizon: it.t_horizon,
        };

        let mut checks = Vec::new();
        for (i, name) in self.checks.iter().enumerate() {
            let id = Identity::from_name(name)
                .ok_or_else(|| config(&format!("checks[{i}]"), format!("unknown identity \"{name}\"")))?;
            if checks.contains(&id) {
                return Err(config(&format!("checks[{i}]"), format!("\"{name}\" listed twice")));
            }
            checks.push(id);
        }

        for (i, step) in self.output.frame_steps.iter().enumerate() {
            if *step > it.steps || (*step % it.record_every != 0 && *step != it.steps) {
                return Err(config(
                    &format!("output.frame_steps[{i}]"),
                    format!("step {step} is not a recorded step"),
                ));
            }
        }
        Ok(Prepared { scenario: self, curve, flow, integrator, checks })
    }
}

impl Prepared {
    /// Curve and integrator at refinement level `l`: `2^l N` samples,
    /// `dt / 2^l`, `2^l` times the steps over the same time span.
    pub fn at_level(&self, level: u32, dt: f64) -> Result<(CurveSpec, IntegratorConfig)> {
        let f = 1usize << level;
        let curve = self.curve.with_samples(self.curve.samples() * f)?;
        let integrator = IntegratorConfig {
            dt: Some(dt / f as f64),
            steps: self.integrator.steps * f,
            ..self.integrator.clone()
        };
        Ok((curve, integrator))
    }
}
