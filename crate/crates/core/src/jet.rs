//! Second-order truncated Taylor arithmetic.
//!
//! Closed-form expressions (discrete Lagrangians, modified-Hamiltonian
//! coefficients) are written once, generically over [`Scalar`]. Evaluating
//! them on `f64` gives the value; evaluating on [`Jet`] gives the exact
//! gradient and Hessian by the chain and product rules, with no step-size
//! error.

use std::ops::{Add, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn cst(v: f64) -> Self;

    fn value(&self) -> f64;

    /// Applies a univariate function given its value and first two
    /// derivatives at `self.value()`.
    fn lift(self, f: f64, df: f64, d2f: f64) -> Self;

    /// Applies a bivariate function given its value, gradient and Hessian at
    /// `(a.value(), b.value())`.
    fn lift2(a: Self, b: Self, f: f64, grad: [f64; 2], hess: [[f64; 2]; 2]) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }

    fn sq(self) -> Self {
        self * self
    }

    fn powf(self, e: f64) -> Self {
        let v = self.value();
        self.lift(
            v.powf(e),
            e * v.powf(e - 1.0),
            e * (e - 1.0) * v.powf(e - 2.0),
        )
    }

    fn recip(self) -> Self {
        let v = self.value();
        self.lift(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    fn sqrt(self) -> Self {
        self.powf(0.5)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn lift(self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }

    fn lift2(_a: Self, _b: Self, f: f64, _grad: [f64; 2], _hess: [[f64; 2]; 2]) -> Self {
        f
    }

    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }

    fn recip(self) -> Self {
        1.0 / self
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// Value, gradient and Hessian with respect to `N` independent variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    /// The `i`-th independent variable at value `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = 1.0;
        j
    }

    /// Independent variables seeded at `values`.
    pub fn vars(values: [f64; N]) -> [Self; N] {
        let mut out = [Self::constant(0.0); N];
        for (i, v) in values.into_iter().enumerate() {
            out[i] = Self::var(v, i);
        }
        out
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for i in 0..N {
            self.g[i] += o.g[i];
            for j in 0..N {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for i in 0..N {
            self.g[i] = -self.g[i];
            for j in 0..N {
                self.h[i][j] = -self.h[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for i in 0..N {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..N {
                out.h[i][j] = self.h[i][j] * o.v
                    + self.v * o.h[i][j]
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        out
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, o: f64) -> Self {
        self.v += o;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    fn sub(mut self, o: f64) -> Self {
        self.v -= o;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.scale(k)
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn lift(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = df * self.g[i];
            for j in 0..N {
                out.h[i][j] = df * self.h[i][j] + d2f * self.g[i] * self.g[j];
            }
        }
        out
    }

    fn lift2(a: Self, b: Self, f: f64, grad: [f64; 2], hess: [[f64; 2]; 2]) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = grad[0] * a.g[i] + grad[1] * b.g[i];
            for j in 0..N {
                out.h[i][j] = grad[0] * a.h[i][j]
                    + grad[1] * b.h[i][j]
                    + hess[0][0] * a.g[i] * a.g[j]
                    + hess[0][1] * (a.g[i] * b.g[j] + b.g[i] * a.g[j])
                    + hess[1][1] * b.g[i] * b.g[j];
            }
        }
        out
    }

    fn scale(mut self, k: f64) -> Self {
        self.v *= k;
        for i in 0..N {
            self.g[i] *= k;
            for j in 0..N {
                self.h[i][j] *= k;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<T: Scalar>(x: T, y: T) -> T {
        (x * y.sq() + T::cst(1.0)).powf(-0.5) - x.sqrt() * y.recip()
    }

    #[test]
    fn jet_matches_finite_differences() {
        let (x0, y0) = (0.7, -1.3);
        let [x, y] = Jet::<2>::vars([x0, y0]);
        let j = f(x, y);
        assert!((j.v - f(x0, y0)).abs() < 1e-15);

        let e = 1e-5;
        let gx = (f(x0 + e, y0) - f(x0 - e, y0)) / (2.0 * e);
        let gy = (f(x0, y0 + e) - f(x0, y0 - e)) / (2.0 * e);
        assert!((j.g[0] - gx).abs() < 1e-8);
        assert!((j.g[1] - gy).abs() < 1e-8);

        let e = 1e-4;
        let hxy = (f(x0 + e, y0 + e) - f(x0 + e, y0 - e) - f(x0 - e, y0 + e)
            + f(x0 - e, y0 - e))
            / (4.0 * e * e);
        let hyy = (f(x0, y0 + e) - 2.0 * f(x0, y0) + f(x0, y0 - e)) / (e * e);
        assert!((j.h[0][1] - hxy).abs() < 1e-6);
        assert!((j.h[1][0] - hxy).abs() < 1e-6);
        assert!((j.h[1][1] - hyy).abs() < 1e-5);
    }

    #[test]
    fn lift2_composes_quadratic_exactly() {
        // u(a, b) = a^2 b evaluated at a = 2x, b = x + y
        let [x, y] = Jet::<2>::vars([0.5, 2.0]);
        let a = x.scale(2.0);
        let b = x + y;
        let (av, bv) = (a.v, b.v);
        let u = Jet::lift2(
            a,
            b,
            av * av * bv,
            [2.0 * av * bv, av * av],
            [[2.0 * bv, 2.0 * av], [2.0 * av, 0.0]],
        );
        let direct = a * a * b;
        assert_eq!(u.v, direct.v);
        for i in 0..2 {
            assert!((u.g[i] - direct.g[i]).abs() < 1e-14);
            for k in 0..2 {
                assert!((u.h[i][k] - direct.h[i][k]).abs() < 1e-14);
            }
        }
    }
}
