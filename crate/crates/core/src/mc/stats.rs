use alloc::vec::Vec;

use crate::math::{exp, kahan_sum, sqrt};

/// Probabilities reported by every [`Estimate`].
pub const REPORTED_QUANTILES: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99];

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quantile {
    pub p: f64,
    pub value: f64,
}

/// Sample mean with its standard error `s / √n` and a few quantiles.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub quantiles: Vec<Quantile>,
}

impl Estimate {
    /// Summation is compensated and in sample order, so the result does not
    /// depend on how the samples were produced.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, n: 0, quantiles: Vec::new() };
        }
        let mean = kahan_sum(samples.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = kahan_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            sqrt(ss / (n as f64 - 1.0) / n as f64)
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantiles = REPORTED_QUANTILES.iter().map(|&p| Quantile { p, value: quantile_sorted(&sorted, p) }).collect();
        Self { mean, std_error, n, quantiles }
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|q| q.p == p).map(|q| q.value)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).unwrap_or(f64::NAN)
    }

    /// `|mean - expected| / SE`; zero when both the error and the SE vanish.
    pub fn z_against(&self, expected: f64) -> f64 {
        z_score(self.mean - expected, self.std_error)
    }
}

pub fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        (diff / se).abs()
    } else if diff.abs() <= 1e-12 * (1.0 + diff.abs()) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Type-7 (linear interpolation) quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(samples: &[f64], p: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided one-sample Kolmogorov–Smirnov test with the asymptotic
/// p-value, using Stephens' small-sample correction of the argument.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsResult {
    let n = sample.len();
    if n == 0 {
        return KsResult { statistic: f64::NAN, p_value: f64::NAN, n };
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let sn = sqrt(nf);
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsResult { statistic: d, p_value: kolmogorov_survival(lambda), n }
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K ≤ λ) = √(2π)/λ Σ_{k≥1} exp(-(2k-1)² π² / (8λ²)), fast for small λ
        let c = core::f64::consts::PI * core::f64::consts::PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += exp(-j * j * c);
        }
        (1.0 - sqrt(2.0 * core::f64::consts::PI) / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = exp(-2.0 * kf * kf * lambda * lambda);
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample sd = sqrt(5/3)
        assert!((e.std_error - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(e.median(), 2.5);
        let constant = Estimate::from_samples(&[1.0; 10]);
        assert_eq!(constant.std_error, 0.0);
        assert_eq!(constant.z_against(1.0), 0.0);
        assert_eq!(constant.z_against(2.0), f64::INFINITY);
    }

    #[test]
    fn type7_quantiles() {
        // R: quantile(c(1, 3, 4, 10), c(0.1, 0.9), type = 7) = 1.6, 8.2
        let s = [1.0, 3.0, 4.0, 10.0];
        assert!((quantile(&s, 0.1) - 1.6).abs() < 1e-12);
        assert!((quantile(&s, 0.9) - 8.2).abs() < 1e-12);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 10.0);
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // tabulated: P(K > 1.36) ≈ 0.0505, P(K > 1.63) ≈ 0.0098, P(K > 0.5) ≈ 0.9639
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 5e-4);
        assert!((kolmogorov_survival(0.5) - 0.9639).abs() < 1e-3);
        // both series agree where they meet
        let c = core::f64::consts::PI.powi(2) / (8.0 * 1.18f64.powi(2));
        let small: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        let small = 1.0 - (2.0 * core::f64::consts::PI).sqrt() / 1.18 * small;
        assert!((small - kolmogorov_survival(1.18)).abs() < 1e-12);
    }

    #[test]
    fn ks_examples() {
        let n = 200;
        let perfect: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let r = ks_test(&perfect, |x| x.clamp(0.0, 1.0));
        assert!(r.statistic <= 0.5 / n as f64 + 1e-15);
        let constant = vec![0.3; 50];
        assert!(ks_test(&constant, |x| x.clamp(0.0, 1.0)).statistic >= 0.5);
        // W_0 = 1 against Exp(1)
        let ones = vec![1.0; 100];
        let r = ks_test(&ones, |x| if x > 0.0 { -(-x).exp_m1() } else { 0.0 });
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn uniform_null_rarely_rejects() {
        let mut rejections = 0;
        for seed in 0..100 {
            let mut rng = crate::rng::from_seed(seed);
            let s: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
            if ks_test(&s, |x| x.clamp(0.0, 1.0)).p_value <= 0.001 {
                rejections += 1;
            }
        }
        assert!(rejections <= 1, "{rejections}");
    }

    proptest! {
        #[test]
        fn quantiles_are_monotone(xs in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let e = Estimate::from_samples(&xs);
            prop_assert!(e.quantiles.windows(2).all(|w| w[0].value <= w[1].value));
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(e.quantiles.iter().all(|q| q.value >= lo && q.value <= hi));
        }

        #[test]
        fn ks_statistic_is_a_distance(xs in prop::collection::vec(0.0f64..1.0, 1..80)) {
            let r = ks_test(&xs, |x| x);
            prop_assert!(r.statistic >= 0.5 / xs.len() as f64 - 1e-12 && r.statistic <= 1.0);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
