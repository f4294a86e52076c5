//! Index-1 metric kernel for Minkowski n-space.
//!
//! Component 0 is the timelike axis, so
//! `<X, Y> = -x0 y0 + x1 y1 + ... + x(n-1) y(n-1)`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Relative tolerance used by [`causal_character`] when none is supplied.
pub const DEFAULT_NULL_TOL: f64 = 1e-9;

/// A point or tangent vector in Minkowski n-space, `2 <= n <= 8`.
///
/// Stored inline so it stays `Copy`; components beyond `dim` are always zero.
#[derive(Clone, Copy, PartialEq)]
pub struct MinkVector {
    dim: usize,
    c: [f64; MAX_DIM],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalCharacter {
    Spacelike,
    Timelike,
    Null,
}

impl CausalCharacter {
    /// The sign `<X, X>` takes for a unit vector of this character.
    pub fn sign(self) -> Option<f64> {
        match self {
            CausalCharacter::Spacelike => Some(1.0),
            CausalCharacter::Timelike => Some(-1.0),
            CausalCharacter::Null => None,
        }
    }
}

impl MinkVector {
    pub fn new(components: &[f64]) -> Result<Self> {
        let dim = components.len();
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if components.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(components);
        Ok(Self { dim, c })
    }

    /// Zero vector of dimension `dim`. Panics outside `2..=8`.
    pub fn zeros(dim: usize) -> Self {
        assert!((MIN_DIM..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { dim, c: [0.0; MAX_DIM] }
    }

    /// The i-th standard basis vector (0-based).
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.c[i] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    /// Metric inner product; panics on dimension mismatch.
    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut acc = -self.c[0] * other.c[0];
        for i in 1..self.dim {
            acc += self.c[i] * other.c[i];
        }
        acc
    }

    /// `sqrt(|<X, X>|)`.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).abs().sqrt()
    }

    /// Ordinary Euclidean length of the coordinate tuple.
    #[inline]
    pub fn euclidean_norm(&self) -> f64 {
        self.euclidean_norm_sq().sqrt()
    }

    #[inline]
    pub fn euclidean_norm_sq(&self) -> f64 {
        self.as_slice().iter().map(|x| x * x).sum()
    }

    /// Index-lowered copy, `eta * X`.
    pub fn lowered(&self) -> Self {
        let mut v = *self;
        v.c[0] = -v.c[0];
        v
    }
}

/// `<X, Y> = -x0 y0 + sum_{i>0} xi yi`.
pub fn inner(x: &MinkVector, y: &MinkVector) -> Result<f64> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch { expected: x.dim, found: y.dim });
    }
    Ok(x.dot(y))
}

pub fn norm(x: &MinkVector) -> f64 {
    x.norm()
}

/// Classifies `x`. Null means `|<X,X>| <= tol * max(1, |X|_E^2)`; the zero
/// vector counts as spacelike.
pub fn causal_character(x: &MinkVector, tol: f64) -> CausalCharacter {
    let q = x.dot(x);
    let e2 = x.euclidean_norm_sq();
    if e2 == 0.0 {
        return CausalCharacter::Spacelike;
    }
    let threshold = tol * e2.max(1.0);
    if q.abs() <= threshold {
        CausalCharacter::Null
    } else if q < -threshold {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Spacelike
    }
}

impl fmt::Debug for MinkVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("MinkVector").field(&self.as_slice()).finish()
    }
}

impl Serialize for MinkVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(serializer)
    }
}

impl Index<usize> for MinkVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        assert!(i < self.dim);
        &self.c[i]
    }
}

impl IndexMut<usize> for MinkVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        assert!(i < self.dim);
        &mut self.c[i]
    }
}

impl Add for MinkVector {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for MinkVector {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for i in 0..self.dim {
            self.c[i] += rhs.c[i];
        }
    }
}

impl Sub for MinkVector {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for MinkVector {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for i in 0..self.dim {
            self.c[i] -= rhs.c[i];
        }
    }
}

impl Mul<f64> for MinkVector {
    type Output = Self;
    #[inline]
    fn mul(mut self, a: f64) -> Self {
        for i in 0..self.dim {
            self.c[i] *= a;
        }
        self
    }
}

impl Mul<MinkVector> for f64 {
    type Output = MinkVector;
    #[inline]
    fn mul(self, v: MinkVector) -> MinkVector {
        v * self
    }
}

impl Neg for MinkVector {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}
