//! Double-double arithmetic (about 32 significant digits) for sums whose
//! terms cancel, e.g. variance estimates that are exactly zero.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    pub(crate) fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact `a * b`.
    pub(crate) fn product(a: f64, b: f64) -> Self {
        let p = a * b;
        Dd { hi: p, lo: a.mul_add(b, -p) }
    }

    /// Exact `a - b`.
    pub(crate) fn difference(a: f64, b: f64) -> Self {
        let (s, e) = two_sum(a, -b);
        Dd { hi: s, lo: e }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub(crate) fn square(self) -> Self {
        self * self
    }

    pub(crate) fn scale(self, k: f64) -> Self {
        self * Dd::from_f64(k)
    }

    pub(crate) fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let r = self - Dd::product(q1, d);
        let q2 = r.hi / d;
        let r = r - Dd::product(q2, d);
        let q3 = r.hi / d;
        quick_two_sum(q1, q2) + Dd::from_f64(q3)
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Neg for Dd {
    type Output = Dd;

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;

    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;

    fn mul(self, o: Dd) -> Dd {
        let p = Dd::product(self.hi, o.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::default(), |a, b| a + b)
    }
}
