//! Nested hyper-dual numbers.
//!
//! A [`Jet`] at level `L` holds `2^L` coefficients indexed by subsets of the
//! infinitesimals `ε1 … εL` (each with `εi² = 0`). Bit `i` of a coefficient
//! index marks `ε(i+1)`, so the top bit always belongs to the newest
//! direction. Seeding a direction on top of an existing jet adds a level;
//! nested Lie derivatives are built that way.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Deepest supported nesting.
pub const MAX_LEVEL: u8 = 4;
const CAP: usize = 1 << MAX_LEVEL;

#[derive(Clone, Copy)]
pub struct Jet {
    level: u8,
    c: [f64; CAP],
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; CAP];
        c[0] = value;
        Jet { level: 0, c }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Builds `value + ε·tangent` with a fresh infinitesimal on top of both.
    pub fn lift(value: Jet, tangent: Jet) -> Self {
        let base = value.level.max(tangent.level);
        Self::lift_at(value, tangent, base)
    }

    /// Like [`Jet::lift`] but places the new infinitesimal above `base`,
    /// which must be at least the level of both arguments.
    pub fn lift_at(value: Jet, tangent: Jet, base: u8) -> Self {
        assert!(base < MAX_LEVEL, "jet nesting deeper than {MAX_LEVEL}");
        assert!(value.level <= base && tangent.level <= base);
        let n = 1usize << base;
        let mut c = [0.0; CAP];
        c[..n].copy_from_slice(&value.promote(base).c[..n]);
        c[n..2 * n].copy_from_slice(&tangent.promote(base).c[..n]);
        Jet { level: base + 1, c }
    }

    /// Splits off the newest infinitesimal: `self = re + ε·eps`.
    pub fn split(&self) -> (Jet, Jet) {
        if self.level == 0 {
            return (*self, Jet::zero());
        }
        let lv = self.level - 1;
        let n = 1usize << lv;
        let mut re = [0.0; CAP];
        let mut eps = [0.0; CAP];
        re[..n].copy_from_slice(&self.c[..n]);
        eps[..n].copy_from_slice(&self.c[n..2 * n]);
        (Jet { level: lv, c: re }, Jet { level: lv, c: eps })
    }

    /// Coefficient of the newest infinitesimal, as a jet one level down.
    pub fn eps(&self) -> Jet {
        self.split().1
    }

    /// Drops the newest infinitesimal.
    pub fn truncate(&self) -> Jet {
        self.split().0
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    /// Real part.
    pub fn re(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len()]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|v| v.is_finite())
    }

    pub fn promote(mut self, level: u8) -> Jet {
        debug_assert!(level <= MAX_LEVEL);
        if level > self.level {
            self.level = level;
        }
        self
    }

    fn len(&self) -> usize {
        1usize << self.level
    }

    fn aligned(a: &Jet, b: &Jet) -> (u8, usize) {
        let lv = a.level.max(b.level);
        (lv, 1usize << lv)
    }

    /// Applies a scalar function given its derivatives at the real part:
    /// `derivs[j] = f^(j)(re)` for `j = 0..=level`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let lv = self.level as usize;
        debug_assert!(derivs.len() > lv);
        let mut nil = *self;
        nil.c[0] = 0.0;
        let mut out = Jet::constant(derivs[0]).promote(self.level);
        let mut power = Jet::constant(1.0).promote(self.level);
        let mut fact = 1.0;
        for (j, d) in derivs.iter().enumerate().take(lv + 1).skip(1) {
            power = power * nil;
            fact *= j as f64;
            if *d != 0.0 {
                out += power * (*d / fact);
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.re();
        let mut d = [0.0; MAX_LEVEL as usize + 1];
        let mut coef = 1.0;
        for (j, slot) in d.iter_mut().enumerate().take(self.level as usize + 1) {
            *slot = coef * a.powf(p - j as f64);
            coef *= p - j as f64;
        }
        self.compose(&d)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = Jet::constant(1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.re().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.re().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn exp(&self) -> Jet {
        let e = self.re().exp();
        self.compose(&[e; MAX_LEVEL as usize + 1])
    }

    pub fn ln(&self) -> Jet {
        let a = self.re();
        self.compose(&[a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a), -6.0 / (a * a * a * a)])
    }

    pub fn tanh(&self) -> Jet {
        let t = self.re().tanh();
        let s = 1.0 - t * t;
        self.compose(&[t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0), s * (16.0 * t - 24.0 * t * t * t)])
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::zero()
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet{}{:?}", self.level, self.coeffs())
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        let (_, n) = Jet::aligned(self, other);
        self.c[..n] == other.c[..n]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let (lv, n) = Jet::aligned(&self, &rhs);
        let mut c = [0.0; CAP];
        for (i, slot) in c.iter_mut().enumerate().take(n) {
            *slot = self.c[i] + rhs.c[i];
        }
        Jet { level: lv, c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let (lv, n) = Jet::aligned(&self, &rhs);
        let mut c = [0.0; CAP];
        for (i, slot) in c.iter_mut().enumerate().take(n) {
            *slot = self.c[i] - rhs.c[i];
        }
        Jet { level: lv, c }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let (lv, n) = Jet::aligned(&self, &rhs);
        if lv == 0 {
            return Jet::constant(self.c[0] * rhs.c[0]);
        }
        let mut c = [0.0; CAP];
        for (k, slot) in c.iter_mut().enumerate().take(n) {
            // sum over submasks i of k
            let mut s = 0.0;
            let mut i = k;
            loop {
                s += self.c[i] * rhs.c[k ^ i];
                if i == 0 {
                    break;
                }
                i = (i - 1) & k;
            }
            *slot = s;
        }
        Jet { level: lv, c }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        if rhs.level == 0 {
            return self * (1.0 / rhs.c[0]);
        }
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        let n = self.len();
        for v in &mut self.c[..n] {
            *v = -*v;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        let n = self.len();
        for v in &mut self.c[..n] {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        iter.fold(Jet::zero(), |a, b| a + b)
    }
}

/// Lifts plain values to level-0 jets.
pub fn constants(x: &[f64]) -> Vec<Jet> {
    x.iter().map(|&v| Jet::constant(v)).collect()
}

/// Real parts of a jet slice.
pub fn real_parts(x: &[Jet]) -> Vec<f64> {
    x.iter().map(Jet::re).collect()
}

/// Highest level present in a slice.
pub fn max_level(x: &[Jet]) -> u8 {
    x.iter().map(Jet::level).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn var(x: f64) -> Jet {
        Jet::lift(Jet::constant(x), Jet::constant(1.0))
    }

    #[test]
    fn first_derivative_of_product() {
        let x = var(3.0);
        let y = x * x + 2.0 * x;
        assert_eq!(y.re(), 15.0);
        assert_eq!(y.eps().re(), 8.0);
    }

    #[test]
    fn second_derivative_by_nesting() {
        // d/dx of (d/dx x^3) = 6x
        let x1 = var(2.0);
        let x2 = Jet::lift(x1, Jet::constant(1.0));
        let y = x2 * x2 * x2;
        assert_relative_eq!(y.eps().eps().re(), 12.0);
        assert_relative_eq!(y.eps().re(), 12.0);
        assert_relative_eq!(y.truncate().eps().re(), 12.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let a = 0.7;
        let x = Jet::lift(Jet::lift(var(a), Jet::constant(1.0)), Jet::constant(1.0));
        // third mixed derivative along one direction equals f'''(a)
        let cases: Vec<(Jet, f64, f64)> = vec![
            (x.sin(), a.sin(), -a.cos()),
            (x.cos(), a.cos(), a.sin()),
            (x.exp(), a.exp(), a.exp()),
            (x.ln(), a.ln(), 2.0 / (a * a * a)),
            (x.sqrt(), a.sqrt(), 0.375 * a.powf(-2.5)),
            (x.recip(), 1.0 / a, -6.0 / a.powi(4)),
        ];
        for (j, f0, f3) in cases {
            assert_relative_eq!(j.re(), f0, epsilon = 1e-14);
            assert_relative_eq!(j.eps().eps().eps().re(), f3, epsilon = 1e-12);
        }
        let t = x.tanh();
        let th = a.tanh();
        let f3 = (1.0 - th * th) * (6.0 * th * th - 2.0);
        assert_relative_eq!(t.eps().eps().eps().re(), f3, epsilon = 1e-12);
    }

    #[test]
    fn division_and_mixed_levels() {
        let x = var(2.0);
        let y = Jet::constant(3.0) / x;
        assert_relative_eq!(y.re(), 1.5);
        assert_relative_eq!(y.eps().re(), -0.75);
        let z = x + 1.0;
        assert_eq!(z.level(), 1);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = var(1.3);
        let p = x.powi(4);
        assert_relative_eq!(p.eps().re(), 4.0 * 1.3f64.powi(3), epsilon = 1e-12);
        let q = x.powi(-2);
        assert_relative_eq!(q.eps().re(), -2.0 * 1.3f64.powi(-3), epsilon = 1e-12);
    }
}
