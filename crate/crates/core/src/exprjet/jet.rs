use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};

type Coeffs = SmallVec<[f64; 10]>;

/// Truncated Taylor expansion of a scalar function of one variable.
///
/// `coeffs[j]` is the j-th derivative divided by `j!` at the expansion point.
/// All arithmetic truncates at `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Coeffs,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs: Coeffs = SmallVec::from_elem(0.0, order + 1);
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The identity function expanded at `point`.
    pub fn variable(point: f64, order: usize) -> Self {
        let mut j = Self::constant(point, order);
        if order >= 1 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Self { coeffs: SmallVec::from_slice(coeffs) }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `j`-th derivative at the expansion point.
    pub fn derivative(&self, j: usize) -> f64 {
        let mut fact = 1.0;
        for k in 2..=j {
            fact *= k as f64;
        }
        self.coeffs[j] * fact
    }

    fn zeros_like(&self) -> Self {
        Self { coeffs: SmallVec::from_elem(0.0, self.coeffs.len()) }
    }

    fn check_order(&self, other: &Self) {
        assert_eq!(self.coeffs.len(), other.coeffs.len(), "jet order mismatch");
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn try_div(&self, rhs: &Self) -> Result<Self> {
        self.check_order(rhs);
        let b0 = rhs.coeffs[0];
        if b0 == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        let mut q = self.zeros_like();
        for k in 0..q.coeffs.len() {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= rhs.coeffs[j] * q.coeffs[k - j];
            }
            q.coeffs[k] = acc / b0;
        }
        Ok(q)
    }

    /// Integer power; negative exponents go through a reciprocal.
    pub fn powi(&self, e: i32) -> Result<Self> {
        let mut base = if e < 0 {
            Self::constant(1.0, self.order()).try_div(self)?
        } else {
            self.clone()
        };
        let mut n = e.unsigned_abs();
        let mut acc = Self::constant(1.0, self.order());
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Self {
        let mut e = self.zeros_like();
        e.coeffs[0] = self.coeffs[0].exp();
        for k in 1..e.coeffs.len() {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.coeffs[j] * e.coeffs[k - j];
            }
            e.coeffs[k] = acc / k as f64;
        }
        e
    }

    /// Returns `(sin, cos)` of the jet; the two series are coupled.
    pub fn sin_cos(&self) -> (Self, Self) {
        let (s0, c0) = self.coeffs[0].sin_cos();
        self.coupled(s0, c0, -1.0)
    }

    /// Returns `(sinh, cosh)`.
    pub fn sinh_cosh(&self) -> (Self, Self) {
        self.coupled(self.coeffs[0].sinh(), self.coeffs[0].cosh(), 1.0)
    }

    // s' = a' c, c' = sign * a' s
    fn coupled(&self, s0: f64, c0: f64, sign: f64) -> (Self, Self) {
        let mut s = self.zeros_like();
        let mut c = self.zeros_like();
        s.coeffs[0] = s0;
        c.coeffs[0] = c0;
        for k in 1..s.coeffs.len() {
            let (mut acc_s, mut acc_c) = (0.0, 0.0);
            for j in 1..=k {
                let ja = j as f64 * self.coeffs[j];
                acc_s += ja * c.coeffs[k - j];
                acc_c += ja * s.coeffs[k - j];
            }
            s.coeffs[k] = acc_s / k as f64;
            c.coeffs[k] = sign * acc_c / k as f64;
        }
        (s, c)
    }

    pub fn sqrt(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {a0}")));
        }
        if a0 == 0.0 && self.order() > 0 {
            return Err(Error::Domain("sqrt is not differentiable at 0".into()));
        }
        let mut r = self.zeros_like();
        r.coeffs[0] = a0.sqrt();
        for k in 1..r.coeffs.len() {
            let mut acc = self.coeffs[k];
            for j in 1..k {
                acc -= r.coeffs[j] * r.coeffs[k - j];
            }
            r.coeffs[k] = acc / (2.0 * r.coeffs[0]);
        }
        Ok(r)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check_order(rhs);
        Jet { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check_order(rhs);
        Jet { coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.check_order(rhs);
        let mut p = self.zeros_like();
        for k in 0..p.coeffs.len() {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.coeffs[j] * rhs.coeffs[k - j];
            }
            p.coeffs[k] = acc;
        }
        p
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
