//! Artifact files. Every file is written to a temporary sibling and renamed,
//! so readers never see a partial file.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::Result;
use crate::flowsim::{SimState, StepDiagnostics};
use crate::minkowski::MinkVector;
use crate::verify::{Resolution, VerificationReport};

pub const TIMESERIES_HEADER: &str = "step,t,total_arclength,arclength_drift,min_v,max_v,max_k1";
pub const CONVERGENCE_HEADER: &str = "identity,level,samples,dt,residual,order";

pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

fn num(x: f64) -> String {
    format!("{x:.15e}")
}

pub fn timeseries_csv(rows: &[StepDiagnostics]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for d in rows {
        let k1 = d.max_k.first().copied().unwrap_or(0.0);
        let cols = [num(d.t), num(d.total_arclength), num(d.arclength_drift), num(d.min_v), num(d.max_v), num(k1)];
        out.push_str(&format!("{},{}\n", d.step, cols.join(",")));
    }
    out
}

pub fn convergence_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in reports {
        let order = r.order.map_or_else(|| "n/a".to_string(), |o| format!("{o:.6}"));
        for (level, (res, Resolution { samples, dt })) in r.residuals.iter().zip(&r.resolutions).enumerate() {
            out.push_str(&format!("{},{level},{samples},{},{},{order}\n", r.identity.name(), num(*dt), num(*res)));
        }
    }
    out
}

/// One entry of `report.json`: a verification report, or the reason the
/// check could not be evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub identity: String,
    pub resolutions: Vec<Resolution>,
    pub residuals: Vec<Option<f64>>,
    pub order: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub details: std::collections::BTreeMap<String, Vec<Option<f64>>>,
    pub notes: Vec<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&VerificationReport> for CheckEntry {
    fn from(r: &VerificationReport) -> Self {
        Self {
            identity: r.identity.name().to_string(),
            resolutions: r.resolutions.clone(),
            residuals: r.residuals.iter().map(|x| finite(*x)).collect(),
            order: r.order,
            tolerance: Some(r.tolerance),
            pass: r.pass,
            error: None,
            details: r.details.iter().map(|(k, v)| (k.clone(), v.iter().map(|x| finite(*x)).collect())).collect(),
            notes: r.notes.clone(),
        }
    }
}

impl CheckEntry {
    pub fn failed(identity: &str, error: String) -> Self {
        Self {
            identity: identity.to_string(),
            resolutions: vec![],
            residuals: vec![],
            order: None,
            tolerance: None,
            pass: false,
            error: Some(error),
            details: Default::default(),
            notes: vec![],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionSummary {
    pub steps_completed: usize,
    pub t_final: f64,
    pub arclength_drift: f64,
    pub pointwise_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interrupted: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub command: &'static str,
    pub all_pass: bool,
    pub evolution: Vec<EvolutionSummary>,
    pub checks: Vec<CheckEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct FrameSample<'a> {
    u: f64,
    s: f64,
    speed: f64,
    point: &'a MinkVector,
    frame: &'a [MinkVector],
    curvatures: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct FrameDump<'a> {
    scenario: &'a str,
    step: usize,
    t: f64,
    dimension: usize,
    signs: &'a [f64],
    /// Samples where the last frame vector came from orthogonal completion.
    completed: Vec<usize>,
    samples: Vec<FrameSample<'a>>,
}

pub fn write_frames(dir: &Path, scenario: &str, step: usize, st: &SimState) -> Result<()> {
    let (c, fd) = (&st.curve, &st.frenet);
    let samples = (0..c.len())
        .map(|i| FrameSample {
            u: c.grid()[i],
            s: c.arclengths()[i],
            speed: c.speeds()[i],
            point: &c.points()[i],
            frame: fd.frame(i),
            curvatures: fd.gs_curvatures(i).to_vec(),
        })
        .collect();
    let dump = FrameDump {
        scenario,
        step,
        t: st.t,
        dimension: c.dim(),
        signs: fd.signs(),
        completed: (0..c.len()).filter(|&i| fd.completed(i)).collect(),
        samples,
    };
    write_json(dir, &format!("frames_{step}.json"), &dump)
}
