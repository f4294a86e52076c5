//! Frenet apparatus under the index-1 metric.
//!
//! The frame comes from indefinite Gram–Schmidt on the derivative vectors
//! `alpha', ..., alpha^(n)`. The last vector is always the unit
//! Minkowski-orthogonal complement of the others, oriented so that
//! `det[V_1, ..., V_n] > 0`; it coincides with the Gram–Schmidt vector when
//! that one is positively oriented, and completes the frame when the final
//! Gram–Schmidt residual vanishes (planar curves).

use nalgebra::DMatrix;

use crate::curvekit::{d_ds_vectors, SampledCurve};
use crate::error::{Error, Result};
use crate::minkowski::{MinkVector, DEFAULT_NULL_TOL};

/// `|w_i| <= GENERICITY_TOL * |alpha^(i)|_E` marks a degenerate residual.
pub const GENERICITY_TOL: f64 = 1e-7;

/// Frames, signs and curvatures at every sample of a curve.
#[derive(Debug, Clone)]
pub struct FrenetData {
    dim: usize,
    len: usize,
    /// `frames[i * dim + (j - 1)]` is `V_j` at sample i
    frames: Vec<MinkVector>,
    /// `signs[j - 1] = <V_j, V_j>`, constant along the curve
    signs: Vec<f64>,
    /// stencil-extracted `k_i = eps_i <dV_i/ds, V_{i+1}>`, `[i * (dim - 1) + (k - 1)]`
    curvatures: Vec<f64>,
    /// curvatures from the Gram–Schmidt coefficients, same layout
    gs_curvatures: Vec<f64>,
    /// samples where the final Gram–Schmidt residual vanished
    completed: Vec<bool>,
}

impl FrenetData {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `V_1, ..., V_n` at sample `i`.
    pub fn frame(&self, i: usize) -> &[MinkVector] {
        &self.frames[i * self.dim..(i + 1) * self.dim]
    }

    /// `V_j` at sample `i`, `1 <= j <= n`.
    pub fn vector(&self, i: usize, j: usize) -> MinkVector {
        self.frames[i * self.dim + j - 1]
    }

    /// `V_j` along the whole curve.
    pub fn vector_field(&self, j: usize) -> Vec<MinkVector> {
        (0..self.len).map(|i| self.vector(i, j)).collect()
    }

    /// `eps_0, ..., eps_{n-1}`.
    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    /// `eps_m`; out-of-range indices give 0 so boundary terms drop out.
    pub fn eps(&self, m: isize) -> f64 {
        if m < 0 || m as usize >= self.dim {
            0.0
        } else {
            self.signs[m as usize]
        }
    }

    /// Stencil-extracted `k_1, ..., k_{n-1}` at sample `i`.
    pub fn curvatures(&self, i: usize) -> &[f64] {
        let m = self.dim - 1;
        &self.curvatures[i * m..(i + 1) * m]
    }

    /// Curvatures from the Gram–Schmidt coefficients at sample `i`; exact to
    /// the precision of the derivative vectors.
    pub fn gs_curvatures(&self, i: usize) -> &[f64] {
        let m = self.dim - 1;
        &self.gs_curvatures[i * m..(i + 1) * m]
    }

    /// `k_k` along the curve (stencil-extracted); `k_0` and `k_n` are zero.
    pub fn curvature_field(&self, k: usize) -> Vec<f64> {
        self.field(&self.curvatures, k)
    }

    /// `k_k` along the curve from the Gram–Schmidt coefficients.
    pub fn gs_curvature_field(&self, k: usize) -> Vec<f64> {
        self.field(&self.gs_curvatures, k)
    }

    fn field(&self, data: &[f64], k: usize) -> Vec<f64> {
        if k == 0 || k >= self.dim {
            return vec![0.0; self.len];
        }
        (0..self.len).map(|i| data[i * (self.dim - 1) + k - 1]).collect()
    }

    /// Whether the last frame vector was completed at sample `i`.
    pub fn completed(&self, i: usize) -> bool {
        self.completed[i]
    }

    /// `max |<V_i, V_j> - eps_{i-1} delta_ij|` over samples and pairs.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..self.len {
            let f = self.frame(s);
            for i in 0..self.dim {
                for j in i..self.dim {
                    let target = if i == j { self.signs[i] } else { 0.0 };
                    worst = worst.max((f[i].dot(&f[j]) - target).abs());
                }
            }
        }
        worst
    }

    /// Flips `V_j` at sample `i`, keeping the curvatures consistent.
    pub(crate) fn flip(&mut self, i: usize, j: usize) {
        let n = self.dim;
        self.frames[i * n + j - 1] = -self.frames[i * n + j - 1];
        for k in [j - 1, j] {
            if (1..n).contains(&k) {
                self.curvatures[i * (n - 1) + k - 1] *= -1.0;
                self.gs_curvatures[i * (n - 1) + k - 1] *= -1.0;
            }
        }
    }
}

struct SampleFrame {
    frame: Vec<MinkVector>,
    signs: Vec<f64>,
    /// `c_m = eps_{m-1} <alpha^(m), V_m>`, signed for the last vector
    coeffs: Vec<f64>,
    completed: bool,
}

fn frame_at(c: &SampledCurve, i: usize) -> Result<SampleFrame> {
    let n = c.dim();
    let mut frame: Vec<MinkVector> = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    let mut coeffs = Vec::with_capacity(n);
    for m in 1..n {
        let a = c.derivative(i, m);
        let mut w = a;
        for (v, eps) in frame.iter().zip(&signs) {
            w -= *v * (eps * a.dot(v));
        }
        let q = w.dot(&w);
        let norm = q.abs().sqrt();
        if norm <= GENERICITY_TOL * a.euclidean_norm()
            || q.abs() <= DEFAULT_NULL_TOL * w.euclidean_norm_sq().max(1.0)
        {
            return Err(Error::NonGenericCurve { index: m, sample: i });
        }
        frame.push(w * (1.0 / norm));
        signs.push(q.signum());
        coeffs.push(norm);
    }
    let last = complement(&frame);
    let q = last.dot(&last);
    let mut v_n = last * (1.0 / q.abs().sqrt());
    let eps_n = q.signum();
    if orientation(&frame, &v_n) < 0.0 {
        v_n = -v_n;
    }
    let a = c.derivative(i, n);
    let mut w = a;
    for (v, eps) in frame.iter().zip(&signs) {
        w -= *v * (eps * a.dot(v));
    }
    let completed = w.norm() <= GENERICITY_TOL * a.euclidean_norm();
    coeffs.push(if completed { 0.0 } else { eps_n * a.dot(&v_n) });
    frame.push(v_n);
    signs.push(eps_n);
    Ok(SampleFrame { frame, signs, coeffs, completed })
}

/// Minkowski-orthogonal complement of `n - 1` vectors, by cofactors.
fn complement(vs: &[MinkVector]) -> MinkVector {
    let n = vs.len() + 1;
    // x_k = det[V_1; ...; V_{n-1}; e_k] satisfies x . y = det[...; y]
    let mut x = MinkVector::zeros(n);
    for k in 0..n {
        let m = DMatrix::from_fn(n, n, |r, col| {
            if r < n - 1 {
                vs[r][col]
            } else if col == k {
                1.0
            } else {
                0.0
            }
        });
        x[k] = m.determinant();
    }
    // <z, V_j> = (eta z) . V_j = x . V_j = 0 for z = eta x
    x.lowered()
}

fn orientation(vs: &[MinkVector], last: &MinkVector) -> f64 {
    let n = last.dim();
    DMatrix::from_fn(n, n, |r, col| if r < n - 1 { vs[r][col] } else { last[col] }).determinant()
}

/// Frame, causal signs and curvatures at every sample of `c`.
pub fn frenet_apparatus(c: &SampledCurve) -> Result<FrenetData> {
    let n = c.dim();
    let len = c.len();
    let mut frames = Vec::with_capacity(len * n);
    let mut gs_curvatures = Vec::with_capacity(len * (n - 1));
    let mut completed = Vec::with_capacity(len);
    let mut signs: Option<Vec<f64>> = None;
    for i in 0..len {
        let sf = frame_at(c, i)?;
        match &signs {
            None => signs = Some(sf.signs.clone()),
            Some(s0) => {
                if let Some(m) = s0.iter().zip(&sf.signs).position(|(a, b)| a != b) {
                    return Err(Error::NonGenericCurve { index: m + 1, sample: i });
                }
            }
        }
        let v = c.speeds()[i];
        for k in 1..n {
            gs_curvatures.push(sf.coeffs[k] / (v * sf.coeffs[k - 1]));
        }
        frames.extend_from_slice(&sf.frame);
        completed.push(sf.completed);
    }
    let signs = signs.expect("curve has samples");
    let mut curvatures = vec![0.0; len * (n - 1)];
    for k in 1..n {
        let field: Vec<MinkVector> = (0..len).map(|i| frames[i * n + k - 1]).collect();
        let deriv = d_ds_vectors(&field, c);
        for i in 0..len {
            curvatures[i * (n - 1) + k - 1] = signs[k] * deriv[i].dot(&frames[i * n + k]);
        }
    }
    Ok(FrenetData { dim: n, len, frames, signs, curvatures, gs_curvatures, completed })
}

/// `|dV_j/ds - RHS_j|` (Euclidean) for `j = 1..n`, indexed `[j - 1][sample]`.
///
/// The right-hand sides use the Gram–Schmidt curvatures, so the residual
/// measures the frame derivative against exact coefficients.
pub fn frenet_residuals(c: &SampledCurve, fd: &FrenetData) -> Vec<Vec<f64>> {
    let n = fd.dim();
    let eps = |m: isize| fd.eps(m);
    let k: Vec<Vec<f64>> = (0..=n).map(|j| fd.gs_curvature_field(j)).collect();
    (1..=n)
        .map(|j| {
            let deriv = d_ds_vectors(&fd.vector_field(j), c);
            (0..fd.len())
                .map(|i| {
                    let mut rhs = MinkVector::zeros(n);
                    if j > 1 {
                        let ji = j as isize;
                        rhs -= fd.vector(i, j - 1) * (eps(ji - 2) * eps(ji - 1) * k[j - 1][i]);
                    }
                    if j < n {
                        rhs += fd.vector(i, j + 1) * k[j][i];
                    }
                    (deriv[i] - rhs).euclidean_norm()
                })
                .collect()
        })
        .collect()
}

/// Largest Frenet residual over all vectors and samples.
pub fn max_frenet_residual(c: &SampledCurve, fd: &FrenetData) -> f64 {
    frenet_residuals(c, fd).iter().flatten().fold(0.0, |a, &b| a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvekit::{sample, CurveSpec, Topology};
    use std::f64::consts::{SQRT_2, TAU};

    fn apparatus(comps: &[&str], domain: (f64, f64), top: Topology, n: usize) -> (SampledCurve, FrenetData) {
        let c = sample(&CurveSpec::parse(comps, domain, top, n).unwrap()).unwrap();
        let fd = frenet_apparatus(&c).unwrap();
        (c, fd)
    }

    fn close(a: &MinkVector, b: &[f64]) -> bool {
        a.as_slice().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn circle_completes_to_timelike_axis() {
        let (c, fd) = apparatus(&["0", "cos(u)", "sin(u)"], (0.0, TAU), Topology::Closed, 512);
        assert_eq!(fd.signs(), &[1.0, 1.0, -1.0]);
        for i in 0..c.len() {
            let (s, co) = c.grid()[i].sin_cos();
            assert!(close(&fd.vector(i, 1), &[0.0, -s, co]));
            assert!(close(&fd.vector(i, 2), &[0.0, -co, -s]));
            assert!(close(&fd.vector(i, 3), &[1.0, 0.0, 0.0]));
            assert!(fd.completed(i));
            assert!((fd.gs_curvatures(i)[0] - 1.0).abs() < 1e-12);
            assert_eq!(fd.gs_curvatures(i)[1], 0.0);
            assert!((fd.curvatures(i)[0] - 1.0).abs() < 5e-4);
            assert!(fd.curvatures(i)[1].abs() < 5e-4);
        }
    }

    #[test]
    fn hyperbola_frame() {
        let (c, fd) = apparatus(&["sinh(u)", "cosh(u)"], (-1.0, 1.0), Topology::Open, 256);
        assert_eq!(fd.signs(), &[-1.0, 1.0]);
        for i in 0..c.len() {
            let u = c.grid()[i];
            assert!(close(&fd.vector(i, 1), &[u.cosh(), u.sinh()]));
            assert!(close(&fd.vector(i, 2), &[u.sinh(), u.cosh()]));
            assert!((fd.gs_curvatures(i)[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn timelike_helix_curvatures() {
        let (c, fd) = apparatus(&["sqrt(2)*u", "cos(u)", "sin(u)"], (0.0, TAU), Topology::Open, 512);
        assert_eq!(fd.signs(), &[-1.0, 1.0, 1.0]);
        for i in 0..c.len() {
            let (s, co) = c.grid()[i].sin_cos();
            assert!(close(&fd.vector(i, 3), &[-1.0, SQRT_2 * s, -SQRT_2 * co]));
            assert!((fd.gs_curvatures(i)[0] - 1.0).abs() < 1e-12);
            assert!((fd.gs_curvatures(i)[1] - SQRT_2).abs() < 1e-12);
            assert!((fd.curvatures(i)[0] - 1.0).abs() < 5e-4);
            assert!((fd.curvatures(i)[1] - SQRT_2).abs() < 5e-4);
        }
    }

    #[test]
    fn spacelike_helix_has_timelike_binormal() {
        let (c, fd) = apparatus(&["u", "sqrt(2)*cos(u)", "sqrt(2)*sin(u)"], (0.0, TAU), Topology::Open, 256);
        assert_eq!(fd.signs(), &[1.0, 1.0, -1.0]);
        for i in 0..c.len() {
            let (s, co) = c.grid()[i].sin_cos();
            assert!(close(&fd.vector(i, 3), &[SQRT_2, -s, co]));
            assert!((fd.gs_curvatures(i)[0] - SQRT_2).abs() < 1e-12);
            assert!((fd.gs_curvatures(i)[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn line_in_the_plane_completes() {
        let (c, fd) = apparatus(&["0", "u"], (0.0, 1.0), Topology::Open, 32);
        assert_eq!(fd.signs(), &[1.0, -1.0]);
        assert!(close(&fd.vector(0, 2), &[-1.0, 0.0]));
        assert_eq!(fd.gs_curvatures(5)[0], 0.0);
        assert_eq!(max_frenet_residual(&c, &fd), 0.0);
    }

    #[test]
    fn straight_line_in_three_space_is_not_generic() {
        let c = sample(&CurveSpec::parse(&["0", "u", "0"], (0.0, 1.0), Topology::Open, 32).unwrap()).unwrap();
        assert!(matches!(frenet_apparatus(&c), Err(Error::NonGenericCurve { index: 2, sample: 0 })));
    }

    #[test]
    fn frenet_residuals_converge_at_second_order() {
        let res = |n| {
            let (c, fd) = apparatus(&["sinh(u)", "cosh(u)"], (-1.0, 1.0), Topology::Open, n);
            max_frenet_residual(&c, &fd)
        };
        let (r1, r2) = (res(256), res(512));
        assert!(r1 < 1e-3);
        let ratio = r1 / r2;
        assert!((3.0..5.5).contains(&ratio), "ratio {ratio}");
        let (c, fd) = apparatus(&["sqrt(2)*u", "cos(u)", "sin(u)"], (0.0, TAU), Topology::Open, 512);
        assert!(max_frenet_residual(&c, &fd) < 3e-4);
    }

    #[test]
    fn orthonormal_with_one_timelike_vector() {
        for comps in [
            &["0", "cos(u)", "sin(u)"][..],
            &["sqrt(2)*u", "cos(u)", "sin(u)"],
            &["u", "sqrt(2)*cos(u)", "sqrt(2)*sin(u)"],
            &["0.3*u^2", "u", "u^3/3", "cos(u)"],
        ] {
            let (_, fd) = apparatus(comps, (0.1, 1.7), Topology::Open, 128);
            assert!(fd.orthonormality_residual() < 1e-8, "{comps:?}");
            assert_eq!(fd.signs().iter().filter(|&&e| e < 0.0).count(), 1);
        }
    }

    #[test]
    fn negative_torsion_gives_signed_last_curvature() {
        // mirror image of the timelike helix
        let (_, fd) = apparatus(&["sqrt(2)*u", "cos(u)", "-sin(u)"], (0.0, 3.0), Topology::Open, 64);
        for i in 0..fd.len() {
            assert!((fd.gs_curvatures(i)[0] - 1.0).abs() < 1e-12);
            assert!((fd.gs_curvatures(i)[1] + SQRT_2).abs() < 1e-12);
        }
    }
}
