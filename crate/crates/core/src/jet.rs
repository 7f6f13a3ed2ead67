//! Truncated second-order Taylor jets (forward-mode differentiation).
//!
//! A [`Jet`] holds a value, its gradient and its Hessian with respect to the
//! group's exponential coordinates. Arithmetic is exact for polynomials of
//! degree two; nonlinear maps go through [`Jet::compose`] with the scalar
//! function's first two derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest coordinate dimension a jet can carry.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub n: usize,
    pub v: f64,
    pub g: [f64; MAX_DIM],
    pub h: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(n: usize, c: f64) -> Self {
        debug_assert!(n <= MAX_DIM);
        Jet {
            n,
            v: c,
            g: [0.0; MAX_DIM],
            h: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_i` evaluated at `x`.
    pub fn var(n: usize, i: usize, x: f64) -> Self {
        let mut j = Jet::constant(n, x);
        j.g[i] = 1.0;
        j
    }

    /// All coordinate functions at the point `x`.
    pub fn vars(x: &[f64]) -> [Jet; MAX_DIM] {
        let n = x.len();
        let mut out = [Jet::constant(n, 0.0); MAX_DIM];
        for (i, &xi) in x.iter().enumerate() {
            out[i] = Jet::var(n, i, xi);
        }
        out
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn grad(&self) -> &[f64] {
        &self.g[..self.n]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[i][j]
    }

    pub fn is_finite(&self) -> bool {
        let n = self.n;
        self.v.is_finite()
            && self.g[..n].iter().all(|x| x.is_finite())
            && self.h[..n].iter().all(|r| r[..n].iter().all(|x| x.is_finite()))
    }

    /// `f ∘ self` given `f(v)`, `f'(v)`, `f''(v)`.
    #[inline]
    pub fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let n = self.n;
        let mut out = Jet::constant(n, f0);
        for i in 0..n {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..n {
            for j in i..n {
                let v = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
                out.h[i][j] = v;
                out.h[j][i] = v;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        self.compose(self.v * s, s, 0.0)
    }

    pub fn add_const(&self, c: f64) -> Jet {
        let mut out = *self;
        out.v += c;
        out
    }

    pub fn recip(&self) -> Jet {
        let v = self.v;
        self.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn sqr(&self) -> Jet {
        let v = self.v;
        self.compose(v * v, 2.0 * v, 2.0)
    }

    pub fn powi(&self, k: i32) -> Jet {
        let v = self.v;
        match k {
            0 => Jet::constant(self.n, 1.0),
            1 => *self,
            2 => self.sqr(),
            _ => {
                let kf = k as f64;
                self.compose(
                    v.powi(k),
                    kf * v.powi(k - 1),
                    kf * (kf - 1.0) * v.powi(k - 2),
                )
            }
        }
    }

    pub fn powf(&self, p: f64) -> Jet {
        let v = self.v;
        let vp = v.powf(p);
        self.compose(vp, p * vp / v, p * (p - 1.0) * vp / (v * v))
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.v.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let v = self.v;
        self.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.compose(c, -s, -c)
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, o: Jet) -> Jet {
        let n = self.n;
        self.v += o.v;
        for i in 0..n {
            self.g[i] += o.g[i];
            for j in 0..n {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(mut self) -> Jet {
        let n = self.n;
        self.v = -self.v;
        for i in 0..n {
            self.g[i] = -self.g[i];
            for j in 0..n {
                self.h[i][j] = -self.h[i][j];
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        let n = self.n;
        let mut out = Jet::constant(n, self.v * o.v);
        for i in 0..n {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        for i in 0..n {
            for j in i..n {
                let cross = self.g[i] * o.g[j] + self.g[j] * o.g[i];
                let v = self.h[i][j] * o.v + self.v * o.h[i][j] + cross;
                out.h[i][j] = v;
                out.h[j][i] = v;
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, c: f64) -> Jet {
        self.add_const(c)
    }
}
