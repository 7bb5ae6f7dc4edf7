//! Coordinated myopic policy.
//!
//! The FC schedules `t` SNs on distinct channels, all sensing with the same
//! measurement SNR `S_M`, to minimise the one-slot cost
//!
//! ```text
//! posterior_variance(V, t S_A S_M / (S_A + S_M)) + lambda t (1 + theta S_M)
//! ```
//!
//! The minimiser is available in closed form: a ladder of prior-variance
//! thresholds `v_th(lambda, t)` decides how many SNs to activate and `S_M`
//! follows from a first-order condition. With infinite ambient SNR at most
//! one SN is active and the induced prior-variance process is periodic,
//! which gives closed-form long-run performance.

use crate::kalman::{harmonic_snr, posterior_variance};
use crate::{Error, ModelParams, PerfPoint, Result};

/// Absolute tolerance for detecting `V == v_th(lambda, t)`.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Largest multiplier for which the myopic policy is not trivially idle.
pub fn lambda_threshold(theta: f64, s_ambient: f64) -> f64 {
    let a = (1.0 + 1.0 / s_ambient).sqrt();
    1.0 / (a + theta.sqrt()).powi(2)
}

/// Prior-variance threshold above which `t + 1` SNs beat `t` SNs.
///
/// Defined for `t >= -1` with `lambda (t + 1) t S_A < 1`; `v_th(lambda, -1)`
/// is zero.
pub fn v_threshold(lambda: f64, t: i64, theta: f64, s_ambient: f64) -> Result<f64> {
    if t < -1 {
        return Err(Error::domain("v_threshold", format!("t = {t} < -1")));
    }
    if t == -1 {
        return Ok(0.0);
    }
    let tf = t as f64;
    // lambda (t+1) t S_A, with 0 * inf = 0 for t = 0.
    let load = if t == 0 { 0.0 } else { lambda * (tf + 1.0) * tf * s_ambient };
    if load >= 1.0 {
        return Err(Error::domain(
            "v_threshold",
            format!("lambda (t+1) t S_A = {load} >= 1 for t = {t}"),
        ));
    }
    let inv_sa = 1.0 / s_ambient;
    let slt = (lambda * theta).sqrt();
    let quad = if t == 0 { 0.0 } else { lambda * theta * (tf + 1.0) * tf * s_ambient };
    let inner = slt * (2.0 * tf + 1.0) + quad + lambda / 4.0 + inv_sa;
    let den = 1.0 - load;
    Ok((slt + lambda * (tf + 0.5) + lambda.sqrt() * inner.sqrt()) / den)
}

/// `max { t >= 0 : lambda (t + 1) t S_A < 1 }`.
pub fn t_star(lambda: f64, s_ambient: f64) -> usize {
    if s_ambient.is_infinite() {
        return 0;
    }
    let x = (1.0 / (lambda * s_ambient) + 0.25).sqrt() - 1.5;
    let mut t = if x.is_finite() { x.ceil().max(0.0) as usize } else { usize::MAX / 4 };
    // Guard the ceiling against rounding at exact integers.
    let load = |t: usize| lambda * (t as f64 + 1.0) * t as f64 * s_ambient;
    while t > 0 && load(t) >= 1.0 {
        t -= 1;
    }
    while load(t + 1) < 1.0 {
        t += 1;
    }
    t
}

/// One-slot coordinated objective for `t` SNs sensing at `s_meas`.
pub fn coord_objective(prior_var: f64, t: usize, s_meas: f64, lambda: f64, params: &ModelParams) -> f64 {
    if t == 0 {
        return prior_var;
    }
    let agg = t as f64 * harmonic_snr(params.s_ambient, s_meas);
    let theta = params.theta();
    let sensing = if theta == 0.0 { 0.0 } else { theta * s_meas };
    posterior_variance(prior_var, agg) + lambda * t as f64 * (1.0 + sensing)
}

/// Optimal common measurement SNR for `t > 0` active SNs.
pub fn optimal_smeas(prior_var: f64, t: usize, lambda: f64, theta: f64, s_ambient: f64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let slt = (lambda * theta).sqrt();
    let gap = 1.0 / slt - 1.0 / prior_var;
    if gap <= 0.0 {
        return 0.0;
    }
    let scale = if s_ambient.is_infinite() {
        1.0 / t as f64
    } else {
        s_ambient * prior_var / (1.0 + t as f64 * s_ambient * prior_var)
    };
    gap * scale
}

/// A coordinated activation decision.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoordDecision {
    /// Number of SNs scheduled, at most `B`.
    pub t_active: usize,
    pub s_meas: f64,
    /// Probability with which this decision is taken (one unless the prior
    /// variance sits exactly on a threshold).
    pub tie_prob: f64,
}

impl CoordDecision {
    pub fn idle() -> Self {
        CoordDecision {
            t_active: 0,
            s_meas: 0.0,
            tie_prob: 1.0,
        }
    }

    /// Aggregate SNR collected at the FC in the best accuracy state.
    pub fn agg_snr(&self, s_ambient: f64) -> f64 {
        self.t_active as f64 * harmonic_snr(s_ambient, self.s_meas)
    }

    /// Network sensing-transmission cost of the decision.
    pub fn network_cost(&self, params: &ModelParams) -> f64 {
        if self.t_active == 0 {
            return 0.0;
        }
        self.t_active as f64 * (params.c_tx + params.phi * self.s_meas)
    }
}

/// Output of the coordinated myopic policy: a single decision, or a
/// randomisation between two decisions of equal cost on a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordChoice {
    Fixed(CoordDecision),
    Tie { upper: CoordDecision, lower: CoordDecision },
}

impl CoordChoice {
    /// Resolves the choice with a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> CoordDecision {
        match *self {
            CoordChoice::Fixed(d) => d,
            CoordChoice::Tie { upper, lower } => {
                if u < upper.tie_prob {
                    upper
                } else {
                    lower
                }
            }
        }
    }

    /// The decision taken with the larger probability (upper on equal odds).
    pub fn most_likely(&self) -> CoordDecision {
        match *self {
            CoordChoice::Fixed(d) => d,
            CoordChoice::Tie { upper, lower } => {
                if upper.tie_prob >= lower.tie_prob {
                    upper
                } else {
                    lower
                }
            }
        }
    }

    /// Expected one-slot objective.
    pub fn objective(&self, prior_var: f64, lambda: f64, params: &ModelParams) -> f64 {
        let f = |d: CoordDecision| coord_objective(prior_var, d.t_active, d.s_meas, lambda, params);
        match *self {
            CoordChoice::Fixed(d) => f(d),
            CoordChoice::Tie { upper, lower } => upper.tie_prob * f(upper) + lower.tie_prob * f(lower),
        }
    }
}

fn check_lambda(op: &'static str, lambda: f64, lth: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::domain(op, format!("lambda must be > 0, got {lambda}")));
    }
    if lambda > lth {
        return Err(Error::domain(
            op,
            format!("lambda {lambda} exceeds lambda_th {lth}: the policy is all-idle"),
        ));
    }
    Ok(())
}

/// Closed-form coordinated myopic policy at prior variance `prior_var`.
///
/// `tie_probs[t]` is the probability of activating the extra SN when
/// `prior_var == v_th(lambda, t)`; missing entries default to one.
pub fn coord_mp(prior_var: f64, lambda: f64, params: &ModelParams, tie_probs: &[f64]) -> Result<CoordChoice> {
    let theta = params.theta();
    let sa = params.s_ambient;
    check_lambda("coord_mp", lambda, lambda_threshold(theta, sa))?;
    if !(prior_var > 0.0 && prior_var <= 1.0) {
        return Err(Error::domain("coord_mp", format!("prior variance {prior_var} outside (0,1]")));
    }
    let b = params.channels;
    let decision = |t: usize, p: f64| CoordDecision {
        t_active: t,
        s_meas: optimal_smeas(prior_var, t, lambda, theta, sa),
        tie_prob: p,
    };
    let ts = t_star(lambda, sa);
    // Thresholds beyond B - 1 cannot change the clamped outcome.
    let last = ts.min(b - 1);
    for th in 0..=last {
        let v = v_threshold(lambda, th as i64, theta, sa)?;
        if (prior_var - v).abs() <= BOUNDARY_TOL {
            let p = tie_probs.get(th).copied().unwrap_or(1.0).clamp(0.0, 1.0);
            let (lo, hi) = (th.min(b), (th + 1).min(b));
            if lo == hi {
                return Ok(CoordChoice::Fixed(decision(lo, 1.0)));
            }
            return Ok(CoordChoice::Tie {
                upper: decision(hi, p),
                lower: decision(lo, 1.0 - p),
            });
        }
        if prior_var < v {
            return Ok(CoordChoice::Fixed(decision(th.min(b), 1.0)));
        }
    }
    Ok(CoordChoice::Fixed(decision((ts + 1).min(b), 1.0)))
}

/// Coordinated myopic policy for infinite ambient SNR: at most one SN senses.
pub fn noiseless_coord_mp(prior_var: f64, lambda: f64, theta: f64, tie_prob: f64) -> Result<CoordChoice> {
    check_lambda("noiseless_coord_mp", lambda, lambda_threshold(theta, f64::INFINITY))?;
    let v0 = v_threshold(lambda, 0, theta, f64::INFINITY)?;
    let active = |p: f64| CoordDecision {
        t_active: 1,
        s_meas: 1.0 / (lambda * theta).sqrt() - 1.0 / prior_var,
        tie_prob: p,
    };
    if (prior_var - v0).abs() <= BOUNDARY_TOL {
        let p = tie_prob.clamp(0.0, 1.0);
        let mut lower = CoordDecision::idle();
        lower.tie_prob = 1.0 - p;
        return Ok(CoordChoice::Tie {
            upper: active(p),
            lower,
        });
    }
    if prior_var > v0 {
        Ok(CoordChoice::Fixed(active(1.0)))
    } else {
        Ok(CoordChoice::Fixed(CoordDecision::idle()))
    }
}

/// `1 - alpha^j (1 - sqrt(lambda theta)) - v_th(lambda, 0)` for infinite `S_A`.
pub fn eta(j: u32, lambda: f64, theta: f64, alpha: f64) -> f64 {
    let v0 = v_threshold(lambda, 0, theta, f64::INFINITY).unwrap_or(f64::INFINITY);
    1.0 - alpha.powi(j as i32) * (1.0 - (lambda * theta).sqrt()) - v0
}

/// Root of `eta(j, .)` on `[0, lambda_th]`, found by bisection.
///
/// `eta(j, .)` is decreasing, so the bracket holds for every `j >= 1`.
pub fn lambda_star(j: u32, theta: f64, alpha: f64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, lambda_threshold(theta, f64::INFINITY));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eta(j, mid, theta, alpha) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Transmission pattern of the infinite-`S_A` myopic policy at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PeriodicSchedule {
    /// One SN transmits every `period` slots (on interior multipliers).
    pub period: u32,
    /// Posterior variance right after a transmission, `sqrt(lambda theta)`.
    pub vhat_star: f64,
    /// Boundary activation probability (forced to one off the boundary).
    pub p0: f64,
    /// `(lambda*_{J-1}, lambda*_J]`.
    pub lambda_interval: (f64, f64),
    /// Whether `lambda` coincides with `lambda*_J`.
    pub on_boundary: bool,
}

const MAX_PERIOD: u32 = 10_000_000;

/// Locates the period `J` with `lambda` in `(lambda*_{J-1}, lambda*_J]`.
pub fn periodic_schedule(lambda: f64, p0: f64, theta: f64, alpha: f64) -> Result<PeriodicSchedule> {
    let lth = lambda_threshold(theta, f64::INFINITY);
    check_lambda("periodic_schedule", lambda, lth)?;
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::domain("periodic_schedule", format!("p0 = {p0} outside [0,1]")));
    }
    let x = (lambda * theta).sqrt();
    let v0 = v_threshold(lambda, 0, theta, f64::INFINITY)?;
    // f_j = 1 - alpha^j (1 - x) is the prior variance j slots after a
    // transmission; J is the first j at which it reaches v_th(lambda, 0).
    let mut aj = 1.0;
    let mut j = 0u32;
    loop {
        j += 1;
        aj *= alpha;
        let fj = 1.0 - aj * (1.0 - x);
        if fj >= v0 - BOUNDARY_TOL {
            let on_boundary = (fj - v0).abs() <= BOUNDARY_TOL;
            return Ok(PeriodicSchedule {
                period: j,
                vhat_star: x,
                p0: if on_boundary { p0 } else { 1.0 },
                lambda_interval: (lambda_star(j - 1, theta, alpha), lambda_star(j, theta, alpha)),
                on_boundary,
            });
        }
        if j >= MAX_PERIOD {
            return Err(Error::NoConvergence {
                solver: "periodic_schedule",
                iterations: j as usize,
            });
        }
    }
}

/// Closed-form long-run MSE and cost of the myopic policy for infinite `S_A`.
pub fn periodic_performance(lambda: f64, p0: f64, params: &ModelParams) -> Result<PerfPoint> {
    if !params.sa_infinite() {
        return Err(Error::domain("periodic_performance", "requires infinite ambient SNR"));
    }
    let alpha = params.alpha;
    let sched = periodic_schedule(lambda, p0, params.theta(), alpha)?;
    let j = sched.period as i32;
    let x = sched.vhat_star;
    let p = sched.p0;
    let aj = alpha.powi(j);
    let aj1 = aj * alpha;
    let denom = j as f64 + 1.0 - p;
    // (1 - alpha^J) / (1 - alpha) extended continuously to alpha = 0.
    let mse = 1.0 - (1.0 - aj * (1.0 - (1.0 - alpha) * (1.0 - p))) * (1.0 - x) / (denom * (1.0 - alpha));
    let sense = p * (1.0 - aj) / (1.0 - aj * (1.0 - x)) + (1.0 - p) * (1.0 - aj1) / (1.0 - aj1 * (1.0 - x));
    let network = (params.c_tx + params.phi / x * (1.0 - x) * sense) / denom;
    Ok(PerfPoint {
        lambda,
        avg_mse: mse,
        per_sn_cost: network / params.num_sns as f64,
        network_cost: network,
        stderr_mse: 0.0,
        stderr_cost: 0.0,
        slots: 0,
    })
}

/// An ordered walk through the set of `(lambda, p0)` operating points:
/// `per_interval` interior multipliers of each interval
/// `(lambda*_{j-1}, lambda*_j)` followed by `per_interval` boundary points
/// `(lambda*_j, p0)` with decreasing `p0`, for `j = 1..=j_max`.
pub fn ordered_pairs(j_max: u32, per_interval: usize, theta: f64, alpha: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for j in 1..=j_max {
        let (lo, hi) = (lambda_star(j - 1, theta, alpha), lambda_star(j, theta, alpha));
        for i in 1..=per_interval {
            let frac = i as f64 / (per_interval + 1) as f64;
            out.push((lo + frac * (hi - lo), 1.0));
        }
        for i in 0..per_interval {
            let p0 = 1.0 - i as f64 / per_interval as f64;
            out.push((hi, p0));
        }
    }
    out
}

/// True iff network cost strictly decreases and MSE strictly increases
/// along `pairs` (which must be listed in increasing `(lambda, -p0)` order).
pub fn tradeoff_ordering_check(pairs: &[(f64, f64)], params: &ModelParams) -> Result<bool> {
    let perf = pairs
        .iter()
        .map(|&(l, p)| periodic_performance(l, p, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(perf
        .windows(2)
        .all(|w| w[1].per_sn_cost < w[0].per_sn_cost && w[1].avg_mse > w[0].avg_mse))
}

/// Cheapest way to collect aggregate SNR `target` with `t` SNs sharing a
/// common measurement SNR. Returns `(t, S_M)`; ties go to fewer SNs.
pub fn min_cost_allocation(target: f64, params: &ModelParams) -> Result<(usize, f64)> {
    let sa = params.s_ambient;
    let b = params.channels;
    if !(target >= 0.0) {
        return Err(Error::domain("min_cost_allocation", format!("negative target {target}")));
    }
    if target >= b as f64 * sa {
        return Err(Error::domain(
            "min_cost_allocation",
            format!("target {target} not below B S_A = {}", b as f64 * sa),
        ));
    }
    if target == 0.0 {
        return Ok((0, 0.0));
    }
    if sa.is_infinite() {
        return Ok((1, target));
    }
    let t_min = ((target / sa).floor() as usize + 1).max(1);
    let mut best = (0usize, 0.0f64, f64::INFINITY);
    for t in t_min..=b {
        let sm = target * sa / (t as f64 * sa - target);
        let cost = t as f64 * (params.c_tx + params.phi * sm);
        if cost < best.2 {
            best = (t, sm, cost);
        }
    }
    Ok((best.0, best.1))
}
