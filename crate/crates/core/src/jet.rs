//! Second-order forward-mode derivatives in two variables.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `(x, y)`. Arithmetic on jets follows the chain rule exactly, so
//! evaluating a closed-form expression on jets yields exact first and second
//! partial derivatives (up to rounding).

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub const fn var_x(x: f64) -> Self {
        Jet { v: x, dx: 1.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub const fn var_y(y: f64) -> Self {
        Jet { v: y, dx: 0.0, dy: 1.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    /// First partial along coordinate `k` (0 = x, 1 = y).
    pub fn d(&self, k: usize) -> f64 {
        if k == 0 {
            self.dx
        } else {
            self.dy
        }
    }

    /// Second partial along coordinates `k`, `l`.
    pub fn d2(&self, k: usize, l: usize) -> f64 {
        match (k, l) {
            (0, 0) => self.dxx,
            (1, 1) => self.dyy,
            _ => self.dxy,
        }
    }

    /// Compose with a scalar function given its value and first two derivatives
    /// at `self.v`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        Jet {
            v: f,
            dx: df * self.dx,
            dy: df * self.dy,
            dxx: d2f * self.dx * self.dx + df * self.dxx,
            dxy: d2f * self.dx * self.dy + df * self.dxy,
            dyy: d2f * self.dy * self.dy + df * self.dyy,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet {
            v: self.v * s,
            dx: self.dx * s,
            dy: self.dy * s,
            dxx: self.dxx * s,
            dxy: self.dxy * s,
            dyy: self.dyy * s,
        }
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(&self) -> Self {
        let t = self.v.tanh();
        let sech2 = 1.0 - t * t;
        self.chain(t, sech2, -2.0 * t * sech2)
    }

    pub fn abs(&self) -> Self {
        // Second derivative taken as zero away from the kink.
        let s = if self.v < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.v.abs(), s, 0.0)
    }

    /// `self^c` for a constant exponent.
    pub fn powf(&self, c: f64) -> Self {
        if c == 0.0 {
            return Jet::constant(1.0);
        }
        let t = self.v;
        let d1 = if c == 1.0 { 1.0 } else { c * t.powf(c - 1.0) };
        let d2 = if c == 1.0 || c == 2.0 {
            if c == 2.0 {
                2.0
            } else {
                0.0
            }
        } else {
            c * (c - 1.0) * t.powf(c - 2.0)
        };
        self.chain(t.powf(c), d1, d2)
    }

    /// General power `self^e` with a non-constant exponent.
    pub fn pow(&self, e: &Jet) -> Self {
        if e.dx == 0.0 && e.dy == 0.0 && e.dxx == 0.0 && e.dxy == 0.0 && e.dyy == 0.0 {
            self.powf(e.v)
        } else {
            (*e * self.ln()).exp()
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet, Jet) -> Jet, x: f64, y: f64) {
        let j = f(Jet::var_x(x), Jet::var_y(y));
        let v = |a: f64, b: f64| f(Jet::constant(a), Jet::constant(b)).v;
        let h = 1e-4;
        let dx = (v(x + h, y) - v(x - h, y)) / (2.0 * h);
        let dy = (v(x, y + h) - v(x, y - h)) / (2.0 * h);
        let dxx = (v(x + h, y) - 2.0 * v(x, y) + v(x - h, y)) / (h * h);
        let dyy = (v(x, y + h) - 2.0 * v(x, y) + v(x, y - h)) / (h * h);
        let dxy = (v(x + h, y + h) - v(x + h, y - h) - v(x - h, y + h) + v(x - h, y - h))
            / (4.0 * h * h);
        for (a, b) in [(j.dx, dx), (j.dy, dy), (j.dxx, dxx), (j.dxy, dxy), (j.dyy, dyy)] {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        fd_check(|x, y| (x * y).sin() + x.cosh() * y.tanh(), 0.3, -0.7);
        fd_check(|x, y| (x * x + y * y + Jet::constant(1.0)).sqrt().ln(), 0.4, 1.1);
        fd_check(|x, y| x.exp() / (Jet::constant(2.0) + y.cos()), -0.2, 0.9);
        fd_check(|x, y| x.powf(3.0) - y.sinh().powf(2.0), 1.3, 0.5);
        fd_check(|x, y| x.pow(&y), 1.7, 0.6);
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let c = Jet::constant(3.0).cosh() * Jet::constant(2.0);
        assert_eq!((c.dx, c.dy, c.dxx, c.dxy, c.dyy), (0.0, 0.0, 0.0, 0.0, 0.0));
    }
}
