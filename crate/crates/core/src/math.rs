//! Float helpers that work without `std`.

pub use libm::{cos, exp, expm1, fabs as abs, log as ln, log1p as ln_1p, pow as powf, sin, sqrt};

/// `e^y - 1 - y` without cancellation for small `y`.
pub fn exp_m1_minus(y: f64) -> f64 {
    if abs(y) < 0.1 {
        // y^2/2! + y^3/3! + ... ; 12 terms is below 1 ulp for |y| < 0.1
        let mut term = y * y / 2.0;
        let mut sum = term;
        for k in 3..16 {
            term *= y / k as f64;
            sum += term;
        }
        sum
    } else {
        expm1(y) - y
    }
}

/// `e^{θ x}` with the convention that `x = -∞` contributes 0 for every `θ ≥ 0`.
#[inline]
pub fn exp_weight(theta: f64, x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else {
        exp(theta * x)
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl core::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}
