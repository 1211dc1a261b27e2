//! Adaptive Gauss–Kronrod (7/15) quadrature with user-supplied breakpoints.
//!
//! The integrands met in this crate are piecewise smooth: they have kinks at
//! the compensation boundary `|x| = 1` and at truncation levels, and they may
//! carry integrable power singularities at an endpoint. Callers split at the
//! kinks; semi-infinite pieces are mapped onto `[0, 1)` by
//! `s = a + t / (1 - t)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::abs;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for one integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-13, max_intervals: 4000 }
    }
}

/// Value of an integral and its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl Integral {
    pub const ZERO: Integral = Integral { value: 0.0, error: 0.0 };

    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

impl core::ops::Add for Integral {
    type Output = Integral;
    fn add(self, o: Integral) -> Integral {
        Integral { value: self.value + o.value, error: self.error + o.error }
    }
}

impl core::ops::Sub for Integral {
    type Output = Integral;
    fn sub(self, o: Integral) -> Integral {
        Integral { value: self.value - o.value, error: self.error + o.error }
    }
}

impl core::ops::Mul<f64> for Integral {
    type Output = Integral;
    fn mul(self, k: f64) -> Integral {
        Integral { value: self.value * k, error: self.error * abs(k) }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kron * half;
    let error = abs((kron - gauss) * half);
    Segment { a, b, value, error }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if a == b {
        return Ok(Integral::ZERO);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("integrate expects finite bounds".into()));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut segments: Vec<Segment> = Vec::with_capacity(64);
    segments.push(kronrod(&f, lo, hi));
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        if error <= tol.abs.max(tol.rel * abs(value)) {
            return Ok(Integral { value: sign * value, error });
        }
        if segments.len() >= tol.max_intervals {
            return Err(Error::Quadrature(alloc::format!(
                "no convergence after {} intervals (estimate {value}, error {error})",
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // interval can no longer be split in floating point
            return Ok(Integral { value: sign * value, error });
        }
        segments.push(kronrod(&f, s.a, mid));
        segments.push(kronrod(&f, mid, s.b));
    }
}

/// Integrates `f` over `[a, ∞)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Integral> {
    let mapped = |t: f64| {
        let u = 1.0 - t;
        let s = a + t / u;
        let v = f(s);
        if v == 0.0 {
            0.0
        } else {
            v / (u * u)
        }
    };
    integrate(mapped, 0.0, 1.0, tol)
}

/// Integrates over consecutive pieces `[p_0, p_1], [p_1, p_2], ...`. The last
/// point may be `+∞`. Points must be non-decreasing.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<Integral> {
    let mut total = Integral::ZERO;
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    let piece_tol = Tolerance { abs: tol.abs / pieces, ..tol };
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b < a {
            return Err(Error::Quadrature("breakpoints must be non-decreasing".into()));
        }
        if a == b {
            continue;
        }
        total = total
            + if b == f64::INFINITY {
                integrate_to_infinity(&f, a, piece_tol)?
            } else {
                integrate(&f, a, b, piece_tol)?
            };
    }
    Ok(total)
}
