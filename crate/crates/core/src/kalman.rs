//! Scalar Gauss-Markov process observed through noisy SNs, and the
//! fusion-center Kalman recursions.
//!
//! With unit process power, `X_{k+1} = sqrt(alpha) X_k + Z_k` with
//! `Z_k ~ N(0, 1 - alpha)`. A measurement taken with accuracy state `gamma`
//! and measurement SNR `S_M` is `Y = gamma X + W_A + W_M`, where
//! `W_A ~ N(0, 1/S_A)` and `W_M ~ N(0, 1/S_M)`.

use crate::{Error, Result};

/// Prior variance of the next slot given the current posterior variance:
/// `1 - alpha (1 - post_var)`.
pub fn prior_variance(post_var: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&post_var) {
        return Err(Error::domain(
            "prior_variance",
            format!("posterior variance {post_var} outside [0,1]"),
        ));
    }
    Ok(1.0 - alpha * (1.0 - post_var))
}

/// Same as [`prior_variance`] without the domain check, for inner loops.
#[inline]
pub(crate) fn nu(post_var: f64, alpha: f64) -> f64 {
    1.0 - alpha * (1.0 - post_var)
}

/// Posterior variance after collecting aggregate SNR `agg_snr`.
#[inline]
pub fn posterior_variance(prior_var: f64, agg_snr: f64) -> f64 {
    if agg_snr.is_infinite() {
        return 0.0;
    }
    prior_var / (1.0 + prior_var * agg_snr)
}

/// MMSE estimate after fusing `fused` (ignored when `agg_snr == 0`).
pub fn posterior_mean(prev_mean: f64, prior_var: f64, agg_snr: f64, fused: f64, alpha: f64) -> f64 {
    let predicted = alpha.sqrt() * prev_mean;
    if agg_snr == 0.0 {
        return predicted;
    }
    let gain = if agg_snr.is_infinite() {
        1.0
    } else {
        agg_snr * posterior_variance(prior_var, agg_snr)
    };
    predicted + gain * (fused - predicted)
}

/// `S_A S_M / (S_A + S_M)` with the limits `S_M = inf` and `S_A = inf`.
#[inline]
pub fn harmonic_snr(s_ambient: f64, s_meas: f64) -> f64 {
    if s_meas <= 0.0 {
        0.0
    } else if s_meas.is_infinite() {
        s_ambient
    } else if s_ambient.is_infinite() {
        s_meas
    } else {
        s_ambient * s_meas / (s_ambient + s_meas)
    }
}

/// Local SNR of one measurement: `gamma^2 S_A S_M / (S_A + S_M)`.
pub fn local_snr(gamma: f64, s_meas: f64, s_ambient: f64) -> f64 {
    gamma * gamma * harmonic_snr(s_ambient, s_meas)
}

/// Fixed point of `v -> posterior_variance(prior_variance(v), x)`, i.e. the
/// steady-state MSE when aggregate SNR `x` is collected in every slot.
pub fn steady_state_mse(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if alpha == 0.0 {
        return 1.0 / (1.0 + x);
    }
    let a1 = 1.0 - alpha;
    let disc = a1 * a1 * (1.0 + x * x) + 2.0 * (1.0 - alpha * alpha) * x;
    // disc.sqrt() - a1 (1 + x) cancels badly for large x; use the
    // conjugate form (numerator rationalised).
    let num = disc - a1 * a1 * (1.0 + x) * (1.0 + x);
    num / ((disc.sqrt() + a1 * (1.0 + x)) * 2.0 * alpha * x)
}

/// FC belief about the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Belief {
    pub prior_var: f64,
    pub post_var: f64,
    pub post_mean: f64,
}

impl Belief {
    /// The belief before any measurement: zero mean, unit variance.
    pub fn initial() -> Self {
        Belief {
            prior_var: 1.0,
            post_var: 1.0,
            post_mean: 0.0,
        }
    }

    /// Fuses this slot's measurements into the prior and returns the new
    /// posterior. `prev_mean` is the posterior mean of the previous slot.
    pub fn update(prior_var: f64, prev_mean: f64, fused: Fused, alpha: f64) -> Self {
        let post_var = posterior_variance(prior_var, fused.agg_snr);
        let post_mean = posterior_mean(prev_mean, prior_var, fused.agg_snr, fused.value.unwrap_or(0.0), alpha);
        Belief {
            prior_var,
            post_var,
            post_mean,
        }
    }

    /// Prior variance of the following slot.
    pub fn next_prior(&self, alpha: f64) -> f64 {
        nu(self.post_var, alpha)
    }
}

/// One successfully received measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub gamma: f64,
    pub s_meas: f64,
    pub value: f64,
    pub local_snr: f64,
}

impl Measurement {
    pub fn new(gamma: f64, s_meas: f64, value: f64, s_ambient: f64) -> Self {
        Measurement {
            gamma,
            s_meas,
            value,
            local_snr: local_snr(gamma, s_meas, s_ambient),
        }
    }
}

/// Aggregate of the received measurements of one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fused {
    /// SNR-weighted average of `Y / gamma`; `None` when nothing informative
    /// was received.
    pub value: Option<f64>,
    pub agg_snr: f64,
}

/// Sufficient statistic of the received measurements and its SNR.
///
/// Measurements with zero local SNR carry no information and are skipped.
pub fn fuse_measurements(successes: &[Measurement]) -> Fused {
    let mut weighted = 0.0;
    let mut agg = 0.0;
    for m in successes.iter().filter(|m| m.local_snr > 0.0) {
        weighted += m.local_snr / m.gamma * m.value;
        agg += m.local_snr;
    }
    if agg == 0.0 {
        Fused {
            value: None,
            agg_snr: 0.0,
        }
    } else {
        Fused {
            value: Some(weighted / agg),
            agg_snr: agg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prior_variance_examples() {
        assert_eq!(prior_variance(1.0, 0.96).unwrap(), 1.0);
        assert!(close(prior_variance(0.0, 0.96).unwrap(), 0.04, 1e-15));
        assert!(close(prior_variance(0.5, 0.96).unwrap(), 0.52, 1e-15));
        assert!(prior_variance(1.5, 0.96).is_err());
        assert!(prior_variance(-0.1, 0.96).is_err());
    }

    #[test]
    fn posterior_variance_examples() {
        assert_eq!(posterior_variance(0.7, 0.0), 0.7);
        assert!(close(posterior_variance(0.5, 2.0), 0.25, 1e-15));
        assert!(close(posterior_variance(1.0, 100.0), 1.0 / 101.0, 1e-15));
        assert_eq!(posterior_variance(0.3, f64::INFINITY), 0.0);
    }

    #[test]
    fn posterior_mean_examples() {
        assert!(close(posterior_mean(2.0, 0.8, 0.0, 123.0, 0.96), 0.96f64.sqrt() * 2.0, 1e-12));
        assert!(close(posterior_mean(5.0, 1.0, 1.0, 2.0, 0.0), 1.0, 1e-12));
        assert!(close(posterior_mean(1.0, 0.5, f64::INFINITY, 3.0, 0.9), 3.0, 1e-12));
        // Large finite SNR approaches the fused value.
        assert!(close(posterior_mean(1.0, 0.5, 1e12, 3.0, 0.9), 3.0, 1e-9));
    }

    #[test]
    fn local_snr_examples() {
        assert!(close(local_snr(1.0, 20.0, 20.0), 10.0, 1e-12));
        assert_eq!(local_snr(1.0, 0.0, 20.0), 0.0);
        assert!(close(local_snr(0.5, f64::INFINITY, 20.0), 5.0, 1e-12));
        assert!(close(local_snr(1.0, 7.0, f64::INFINITY), 7.0, 1e-12));
        assert!(local_snr(0.8, 1e3, 20.0) < 0.64 * 20.0);
    }

    #[test]
    fn fuse_examples() {
        let one = [Measurement {
            gamma: 1.0,
            s_meas: 4.0,
            value: 2.0,
            local_snr: 4.0,
        }];
        assert_eq!(
            fuse_measurements(&one),
            Fused {
                value: Some(2.0),
                agg_snr: 4.0
            }
        );
        assert_eq!(
            fuse_measurements(&[]),
            Fused {
                value: None,
                agg_snr: 0.0
            }
        );
        let m = |v| Measurement {
            gamma: 1.0,
            s_meas: 1.0,
            value: v,
            local_snr: 1.0,
        };
        let f = fuse_measurements(&[m(0.0), m(4.0)]);
        assert_eq!(f.agg_snr, 2.0);
        assert!(close(f.value.unwrap(), 2.0, 1e-15));
    }

    /// Independent route: iterate the variance recursion to its fixed point.
    fn fixed_point_oracle(x: f64, alpha: f64) -> f64 {
        let mut v = 1.0;
        for _ in 0..100_000 {
            let next = posterior_variance(1.0 - alpha * (1.0 - v), x);
            if (next - v).abs() < 1e-15 {
                return next;
            }
            v = next;
        }
        v
    }

    #[test]
    fn steady_state_examples() {
        assert_eq!(steady_state_mse(0.0, 0.5), 1.0);
        assert!(close(steady_state_mse(3.0, 0.0), 0.25, 1e-15));
        let oracle = fixed_point_oracle(100.0, 0.96);
        assert!(close(oracle, 0.008275, 1e-6));
        assert!(close(steady_state_mse(100.0, 0.96), oracle, 1e-12));
    }

    #[test]
    fn steady_state_matches_fixed_point_on_log_grid() {
        for alpha in [0.0, 0.3, 0.9, 0.96, 0.999] {
            for i in 0..=70 {
                let x = 10f64.powf(-3.0 + i as f64 / 10.0);
                // The stated property: 10^3 iterations of the recursion.
                let mut v = 1.0;
                for _ in 0..1000 {
                    v = posterior_variance(nu(v, alpha), x);
                }
                let fp = fixed_point_oracle(x, alpha);
                let s = steady_state_mse(x, alpha);
                assert!((s - fp).abs() < 1e-9, "alpha={alpha} x={x}: {s} vs {fp}");
                if alpha <= 0.96 || x > 0.1 {
                    assert!((s - v).abs() < 1e-9, "alpha={alpha} x={x}: {s} vs {v}");
                }
            }
        }
    }

    #[test]
    fn fused_statistic_is_conditionally_gaussian_with_variance_inverse_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s_ambient: f64 = 20.0;
        let sens = [(1.0, 5.0), (0.6, 30.0), (0.9, f64::INFINITY)];
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut agg = 0.0;
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let ms: Vec<Measurement> = sens
                .iter()
                .map(|&(g, sm)| {
                    let wa: f64 = rng.sample::<f64, _>(StandardNormal) / s_ambient.sqrt();
                    let wm: f64 = if sm == f64::INFINITY {
                        0.0
                    } else {
                        rng.sample::<f64, _>(StandardNormal) / f64::sqrt(sm)
                    };
                    Measurement::new(g, sm, g * x + wa + wm, s_ambient)
                })
                .collect();
            let f = fuse_measurements(&ms);
            agg = f.agg_snr;
            let e = f.value.unwrap() - x;
            sum += e;
            sum2 += e * e;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let target = 1.0 / agg;
        // Standard error of a Gaussian sample variance: sigma^2 sqrt(2/n).
        let se = target * (2.0 / n as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "var {var} target {target} se {se}");
    }

    proptest! {
        #[test]
        fn recursion_stays_in_prior_range(alpha in 0.0f64..0.999, v in 0.0f64..1.0, lam in 0.0f64..1e4) {
            let prior = nu(v, alpha);
            let next = nu(posterior_variance(prior, lam), alpha);
            prop_assert!(next >= 1.0 - alpha - 1e-12 && next <= 1.0 + 1e-12);
        }

        #[test]
        fn posterior_monotone(v in 0.01f64..1.0, l1 in 0.0f64..100.0, dl in 1e-6f64..10.0, dv in 1e-6f64..0.5) {
            prop_assert!(posterior_variance(v, l1 + dl) < posterior_variance(v, l1));
            prop_assert!(posterior_variance(v + dv, l1) > posterior_variance(v, l1));
            prop_assert!(nu(v, 0.5) < nu(v + dv, 0.5));
        }
    }
}
