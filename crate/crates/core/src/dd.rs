//! Double-double arithmetic (about 32 significant digits), real and complex.
//!
//! Only what the Talbot inversion needs: field operations, `exp`, `sin`,
//! `cos`. Error-free transforms rely on a hardware fused multiply-add.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

const PI: DD = DD {
    hi: 3.141592653589793116e+00,
    lo: 1.224646799147353207e-16,
};
const FRAC_PI_2: DD = DD {
    hi: 1.570796326794896558e+00,
    lo: 6.123233995736766036e-17,
};
const LN_2: DD = DD {
    hi: 6.931471805599452862e-01,
    lo: 2.319046813846299558e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DD {
    pub const ZERO: DD = DD { hi: 0.0, lo: 0.0 };
    pub const ONE: DD = DD { hi: 1.0, lo: 0.0 };

    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn pi() -> Self {
        PI
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Multiplication by `2^k`, exact barring under/overflow.
    pub fn ldexp(self, k: i32) -> Self {
        // split the scaling so that 2^k itself stays representable
        let mut out = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let s = 2f64.powi(step);
            out = DD::new(out.hi * s, out.lo * s);
            k -= step;
        }
        out
    }

    pub fn recip(self) -> Self {
        DD::ONE / self
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.8 {
            return DD::from_f64(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return DD::ZERO;
        }
        let k = (self.hi / LN_2.hi).round();
        let r = self - LN_2 * k;
        // e^r = (e^{r/512})^512, tracked as expm1 to keep the small part exact
        let r = r.ldexp(-9);
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / (n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..9 {
            sum = sum * 2.0 + sum.sqr();
        }
        (sum + 1.0).ldexp(k as i32)
    }

    /// `(sin x, cos x)`; accurate for moderate `|x|` (a few hundred at most).
    pub fn sin_cos(self) -> (Self, Self) {
        let j = (self.hi / FRAC_PI_2.hi).round();
        let t = self - FRAC_PI_2 * j;
        let t2 = t.sqr();
        // Taylor series on |t| <= pi/4
        let mut s = t;
        let mut c = DD::ONE;
        let mut ts = t;
        let mut tc = DD::ONE;
        let mut n = 1.0;
        loop {
            ts = -(ts * t2) / ((n + 1.0) * (n + 2.0));
            tc = -(tc * t2) / (n * (n + 1.0));
            s = s + ts;
            c = c + tc;
            n += 2.0;
            if ts.hi.abs() < 1e-34 && tc.hi.abs() < 1e-34 {
                break;
            }
        }
        match (j as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }
}

impl From<f64> for DD {
    fn from(x: f64) -> Self {
        DD::from_f64(x)
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD::new(-self.hi, -self.lo)
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, b: DD) -> DD {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        DD::new(hi, lo)
    }
}

impl Add<f64> for DD {
    type Output = DD;
    fn add(self, b: f64) -> DD {
        let (s1, s2) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s1, s2 + self.lo);
        DD::new(hi, lo)
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, b: DD) -> DD {
        self + (-b)
    }
}

impl Sub<f64> for DD {
    type Output = DD;
    fn sub(self, b: f64) -> DD {
        self + (-b)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, b: DD) -> DD {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        DD::new(hi, lo)
    }
}

impl Mul<f64> for DD {
    type Output = DD;
    fn mul(self, b: f64) -> DD {
        let (p1, p2) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * b);
        DD::new(hi, lo)
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, b: DD) -> DD {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD::new(hi, lo) + q3
    }
}

impl Div<f64> for DD {
    type Output = DD;
    fn div(self, b: f64) -> DD {
        self / DD::from_f64(b)
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CDD {
    pub re: DD,
    pub im: DD,
}

impl CDD {
    pub const fn new(re: DD, im: DD) -> Self {
        Self { re, im }
    }

    pub fn real(re: DD) -> Self {
        Self { re, im: DD::ZERO }
    }

    pub fn norm_sqr(self) -> DD {
        self.re.sqr() + self.im.sqr()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn recip(self) -> Self {
        let d = self.norm_sqr();
        CDD::new(self.re / d, -self.im / d)
    }

    pub fn scale(self, k: DD) -> Self {
        CDD::new(self.re * k, self.im * k)
    }

    /// `e^{self}`.
    pub fn exp(self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        CDD::new(m * c, m * s)
    }
}

impl Add for CDD {
    type Output = CDD;
    fn add(self, b: CDD) -> CDD {
        CDD::new(self.re + b.re, self.im + b.im)
    }
}

impl Add<DD> for CDD {
    type Output = CDD;
    fn add(self, b: DD) -> CDD {
        CDD::new(self.re + b, self.im)
    }
}

impl Sub for CDD {
    type Output = CDD;
    fn sub(self, b: CDD) -> CDD {
        CDD::new(self.re - b.re, self.im - b.im)
    }
}

impl Sub<DD> for CDD {
    type Output = CDD;
    fn sub(self, b: DD) -> CDD {
        CDD::new(self.re - b, self.im)
    }
}

impl Mul for CDD {
    type Output = CDD;
    fn mul(self, b: CDD) -> CDD {
        CDD::new(
            self.re * b.re - self.im * b.im,
            self.re * b.im + self.im * b.re,
        )
    }
}

impl Mul<DD> for CDD {
    type Output = CDD;
    fn mul(self, b: DD) -> CDD {
        self.scale(b)
    }
}

impl Div for CDD {
    type Output = CDD;
    fn div(self, b: CDD) -> CDD {
        self * b.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DD, hi: f64, lo: f64, rel: f64) {
        let err = (a - DD::new(hi, lo)).to_f64().abs();
        assert!(err <= rel * hi.abs(), "{a:?} vs ({hi}, {lo}): err {err:e}");
    }

    #[test]
    fn field_operations() {
        close(DD::ONE / DD::from(3.0), 0.3333333333333333, 1.850371707708594e-17, 1e-31);
        let third = DD::ONE / 3.0;
        close(third * 3.0, 1.0, 0.0, 1e-31);
        assert!((third + third + third - 1.0).to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_reference_values() {
        close(DD::ONE.exp(), 2.718281828459045, 1.4456468917292502e-16, 1e-30);
        close(DD::from(-3.7).exp(), 0.024723526470339388, -1.294857794723138e-18, 1e-30);
        close(DD::from(25.6).exp(), 131201480802.87709, -3.3986589011044197e-06, 1e-30);
        assert_eq!(DD::from(-800.0).exp(), DD::ZERO);
    }

    #[test]
    fn trig_reference_values() {
        let (s, c) = DD::ONE.sin_cos();
        close(s, 0.8414709848078965, 1.776845092935536e-18, 1e-30);
        close(c, 0.5403023058681398, -4.760954612604417e-17, 1e-30);
        close(DD::from(80.0).sin(), -0.9938886539233752, 3.0691731517125894e-17, 1e-29);
        close(DD::from(2.5).cos(), -0.8011436155469337, -1.8674742705085553e-17, 1e-30);
    }

    #[test]
    fn complex_exp_and_division() {
        let z = CDD::new(DD::from(0.5), DD::from(1.0));
        let w = z.exp();
        let back = w / w;
        close(back.re, 1.0, 0.0, 1e-30);
        assert!(back.im.to_f64().abs() < 1e-30);
        let e = 0.5f64.exp();
        assert!((w.re.to_f64() - e * 1f64.cos()).abs() < 1e-15);
        assert!((w.im.to_f64() - e * 1f64.sin()).abs() < 1e-15);
    }
}
