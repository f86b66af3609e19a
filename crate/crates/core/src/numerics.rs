//! Error-free transformations and compensated accumulation.
//!
//! Lift coordinates grow linearly with the iteration count while deviations
//! stay O(1), so every long-running coordinate is held as an unevaluated
//! sum `hi + lo`.

use serde::{Deserialize, Serialize};

/// Knuth's TwoSum: `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// TwoProduct via fused multiply-add: `a * b = p + e` exactly.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Neumaier-style compensated accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Compensated {
    pub hi: f64,
    pub lo: f64,
}

impl Compensated {
    pub const ZERO: Compensated = Compensated { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Compensated { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    #[inline]
    pub fn add_compensated(&mut self, other: Compensated) {
        self.add(other.hi);
        self.add(other.lo);
    }

    #[inline]
    pub fn sub_compensated(&mut self, other: Compensated) {
        self.add(-other.hi);
        self.add(-other.lo);
    }

    /// Subtracts `n * r` keeping the rounding error of the product.
    #[inline]
    pub fn sub_product(&mut self, n: f64, r: f64) {
        let (p, e) = two_prod(n, r);
        self.add(-p);
        self.add(-e);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }

    /// Splits into an integer cell and a fractional part in `[0, 1)`.
    pub fn split_cell(&self) -> (f64, f64) {
        let cell = self.hi.floor();
        let mut frac = (self.hi - cell) + self.lo;
        let mut cell = cell;
        while frac < 0.0 {
            frac += 1.0;
            cell -= 1.0;
        }
        while frac >= 1.0 {
            frac -= 1.0;
            cell += 1.0;
        }
        (cell, frac)
    }

    /// `self - other` as a compensated value.
    pub fn difference(&self, other: &Compensated) -> Compensated {
        let mut d = *self;
        d.sub_compensated(*other);
        d
    }
}

/// Circular distance on `T^1 = R/Z`.
#[inline]
pub fn circle_distance(a: f64) -> f64 {
    (a - a.round()).abs()
}

/// Euclidean norm of the shortest representative of a lift difference.
#[inline]
pub fn torus_distance(d: [f64; 2]) -> f64 {
    circle_distance(d[0]).hypot(circle_distance(d[1]))
}

#[inline]
pub fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Harmonic number by direct summation, smallest terms first.
pub fn harmonic(m: u64) -> f64 {
    let mut acc = Compensated::ZERO;
    for i in (1..=m).rev() {
        acc.add(1.0 / i as f64);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sum_is_exact() {
        let (s, e) = two_sum(1.0, 1e-20);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-20);
    }

    #[test]
    fn two_prod_is_exact() {
        let a = 1.0 + f64::EPSILON;
        let (p, e) = two_prod(a, a);
        assert_eq!(p, 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(e, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn compensated_sum_of_many_small_steps() {
        let rho = std::f64::consts::SQRT_2 - 1.0;
        let mut acc = Compensated::ZERO;
        for _ in 0..1_000_000 {
            acc.add(rho);
        }
        acc.sub_product(1_000_000.0, rho);
        assert!(acc.value().abs() < 1e-12, "{}", acc.value());
    }

    #[test]
    fn split_cell_handles_negative_values() {
        let c = Compensated { hi: -0.25, lo: 0.0 };
        assert_eq!(c.split_cell(), (-1.0, 0.75));
        let c = Compensated {
            hi: 3.0,
            lo: -1e-20,
        };
        let (cell, frac) = c.split_cell();
        assert!((0.0..1.0).contains(&frac));
        assert_eq!(cell + frac, 3.0);
    }

    #[test]
    fn harmonic_100_matches_reference() {
        assert!((harmonic(100) - 5.187377517639621).abs() < 1e-13);
    }
}
