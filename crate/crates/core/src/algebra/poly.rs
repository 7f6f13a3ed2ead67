//! Sparse multivariate polynomials with real coefficients.
//!
//! Used to carry the coordinate coefficients of left-invariant fields
//! symbolically, so that their derivatives (and hence second-order
//! operators built from them) are exact.

use std::collections::BTreeMap;
use std::fmt;

/// A polynomial in `nvars` variables, keyed by exponent tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, 1.0);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every coefficient has magnitude at most `tol`.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.abs() <= tol)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn insert(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let v = self.terms.get(&e).copied().unwrap_or(0.0) + c;
        if v == 0.0 {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, v);
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: f64) {
        assert_eq!(self.nvars, other.nvars);
        if s == 0.0 {
            return;
        }
        for (e, c) in &other.terms {
            self.insert(e.clone(), c * s);
        }
    }

    pub fn scaled(&self, s: f64) -> Poly {
        let mut p = Poly::zero(self.nvars);
        p.add_scaled(self, s);
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.insert(e, ca * cb);
            }
        }
        p
    }

    /// Partial derivative with respect to variable `i`.
    pub fn deriv(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                p.insert(e2, c * e[i] as f64);
            }
        }
        p
    }

    /// Substitute `x_i = 0`.
    pub fn at_zero(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                p.insert(e.clone(), *c);
            }
        }
        p
    }

    /// Keep the first `n` variables, which must be the only ones present.
    pub fn truncate_vars(&self, n: usize) -> Poly {
        let mut p = Poly::zero(n);
        for (e, c) in &self.terms {
            assert!(e[n..].iter().all(|&k| k == 0), "variable still present");
            p.insert(e[..n].to_vec(), *c);
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * xi.powi(k as i32) })
            })
            .sum()
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let factors = e
                        .iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(i, &k)| (i, k as i32))
                        .collect();
                    (*c, factors)
                })
                .collect(),
        }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{i}")?,
                    _ => write!(f, "*x{i}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

/// Flattened polynomial for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(i, k) in factors {
                t *= if k == 1 { x[i] } else { x[i].powi(k) };
            }
            s += t;
        }
        s
    }
}

/// Scalar types the bracket and BCH machinery can run over: plain floats
/// for numerics, polynomials for symbolic field coefficients.
pub trait Coeff: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, s: f64);
    fn mul(&self, other: &Self) -> Self;
}

impl Coeff for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        *self += other * s;
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Coeff for Poly {
    fn zero_like(&self) -> Self {
        Poly::zero(self.nvars)
    }
    fn add_scaled(&mut self, other: &Self, s: f64) {
        Poly::add_scaled(self, other, s)
    }
    fn mul(&self, other: &Self) -> Self {
        Poly::mul(self, other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_derivative() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let mut p = x.mul(&x).mul(&y); // x^2 y
        p.add_scaled(&y, 3.0);
        assert_eq!(p.eval(&[2.0, 5.0]), 20.0 + 15.0);
        let dx = p.deriv(0); // 2xy
        assert_eq!(dx.eval(&[2.0, 5.0]), 20.0);
        assert_eq!(p.degree(), 3);
        assert_eq!(p.compile().eval(&[2.0, 5.0]), 35.0);
    }

    #[test]
    fn cancellation_leaves_zero() {
        let x = Poly::var(1, 0);
        let mut p = x.clone();
        p.add_scaled(&x, -1.0);
        assert!(p.is_zero());
    }
}
