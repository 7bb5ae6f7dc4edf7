//! Decentralized (random-access) myopic policy in the large-network limit.
//!
//! Every SN activates independently with probability `q = B zeta / N_S`
//! on a uniformly chosen channel. As `N_S` grows the number of successful
//! transmissions becomes `Binomial(B, zeta e^{-zeta})` and the one-slot
//! cost `f(zeta, S_M, V)` depends on `(zeta, S_M)` only. `h` and `g` are its
//! (rescaled) partial derivatives; [`dec_mp_solve`] alternates bisections
//! on them.

use crate::coordinated::lambda_threshold;
use crate::kalman::{harmonic_snr, posterior_variance};
use crate::{Error, ModelParams, Result};

/// `rho(zeta) = zeta e^{-zeta}`, the per-channel success probability.
pub fn success_prob(zeta: f64) -> f64 {
    zeta * (-zeta).exp()
}

pub(crate) fn binomial_pmf_all(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_c = 0.0;
    for (r, slot) in out.iter_mut().enumerate() {
        if r > 0 {
            log_c += ((n - r + 1) as f64).ln() - (r as f64).ln();
        }
        *slot = (log_c + r as f64 * lp + (n - r) as f64 * lq).exp();
    }
    out
}

/// `P(R = r)` for `R ~ Binomial(B, rho(zeta))`.
pub fn success_pmf(r: usize, zeta: f64, channels: usize) -> f64 {
    if r > channels {
        return 0.0;
    }
    binomial_pmf_all(channels, success_prob(zeta))[r]
}

fn sensing(theta: f64, s_meas: f64) -> f64 {
    if theta == 0.0 {
        0.0
    } else {
        theta * s_meas
    }
}

/// Posterior variances `nu_hat(V, r H(S_M))` for `r = 0..=B`.
fn post_ladder(prior_var: f64, s_meas: f64, params: &ModelParams) -> Vec<f64> {
    let hs = harmonic_snr(params.s_ambient, s_meas);
    (0..=params.channels)
        .map(|r| posterior_variance(prior_var, r as f64 * hs))
        .collect()
}

/// One-slot decentralized myopic cost `f(zeta, S_M, V)`.
pub fn myopic_cost(zeta: f64, s_meas: f64, prior_var: f64, lambda: f64, params: &ModelParams) -> f64 {
    let b = params.channels;
    let pmf = binomial_pmf_all(b, success_prob(zeta));
    let ladder = post_ladder(prior_var, s_meas, params);
    let est: f64 = pmf.iter().zip(&ladder).map(|(p, v)| p * v).sum();
    est + lambda * zeta * b as f64 * (1.0 + sensing(params.theta(), s_meas))
}

/// `h = df/dS_M`.
pub fn stationarity_h(s_meas: f64, zeta: f64, prior_var: f64, lambda: f64, params: &ModelParams) -> f64 {
    let b = params.channels;
    let sa = params.s_ambient;
    let dh = if sa.is_infinite() {
        1.0
    } else {
        (sa / (sa + s_meas)).powi(2)
    };
    let pmf = binomial_pmf_all(b, success_prob(zeta));
    let ladder = post_ladder(prior_var, s_meas, params);
    let e: f64 = (0..=b).map(|r| pmf[r] * ladder[r] * ladder[r] * r as f64).sum();
    -e * dh + lambda * params.theta() * zeta * b as f64
}

/// `lim_{zeta -> 0} h / zeta`.
fn stationarity_h_over_zeta0(s_meas: f64, prior_var: f64, lambda: f64, params: &ModelParams) -> f64 {
    let b = params.channels as f64;
    let sa = params.s_ambient;
    let dh = if sa.is_infinite() {
        1.0
    } else {
        (sa / (sa + s_meas)).powi(2)
    };
    let p1 = posterior_variance(prior_var, harmonic_snr(sa, s_meas));
    -b * p1 * p1 * dh + lambda * params.theta() * b
}

/// `g = (e^zeta / (1 - zeta)) df/dzeta`, defined for `zeta < 1`.
pub fn stationarity_g(s_meas: f64, zeta: f64, prior_var: f64, lambda: f64, params: &ModelParams) -> Result<f64> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::domain("stationarity_g", format!("zeta = {zeta} outside [0,1)")));
    }
    let b = params.channels;
    let ladder = post_ladder(prior_var, s_meas, params);
    // E[nu_hat(R) (R - rho B) / (rho (1 - rho))] written as the derivative of
    // the binomial mean in rho, which stays finite as rho -> 0.
    let pmf = binomial_pmf_all(b - 1, success_prob(zeta));
    let d: f64 = (0..b).map(|r| pmf[r] * (ladder[r + 1] - ladder[r])).sum();
    let cost = lambda * b as f64 * zeta.exp() / (1.0 - zeta) * (1.0 + sensing(params.theta(), s_meas));
    Ok(b as f64 * d + cost)
}

/// Region that must contain a non-trivial decentralized optimum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecBounds {
    pub zeta_max: f64,
    pub smeas_min: f64,
    pub smeas_max: f64,
}

/// Bounds on `(zeta, S_M)` for `prior_var > v_th(lambda, 0)`.
pub fn dec_bounds(prior_var: f64, lambda: f64, params: &ModelParams) -> Result<DecBounds> {
    if params.theta() <= 0.0 {
        return Err(Error::domain("dec_bounds", "requires theta > 0"));
    }
    activation_region(prior_var, lambda, params).ok_or_else(|| {
        Error::domain(
            "dec_bounds",
            format!("no S_M with g(S_M, 0, {prior_var}) < 0 at lambda = {lambda}"),
        )
    })
}

/// Region where `g(S_M, 0, V) < 0`, i.e. where some SN gains from
/// transmitting; `None` when that set is empty. `theta > 0` is assumed.
fn activation_region(prior_var: f64, lambda: f64, params: &ModelParams) -> Option<DecBounds> {
    let theta = params.theta();
    let sa = params.s_ambient;
    let v = prior_var;
    let lt = lambda * theta;
    let slt = lt.sqrt();
    let zeta_max = (2.0 * (v / slt).ln()).min(1.0);
    // S lies between the roots of
    // lambda theta (1/S_A + V) S^2 - mid S + lambda = 0.
    let inv = 1.0 / sa;
    let mid = -lt - lambda * (inv + v) + v * v;
    let disc = ((lt + v * v) - lambda * (inv + v)).powi(2) - 4.0 * lt * v * v;
    if disc <= 0.0 || mid <= 0.0 || !(zeta_max > 0.0) {
        return None;
    }
    let den = 2.0 * lt * (inv + v);
    let sq = disc.sqrt();
    // Smaller root in conjugate form.
    let smin = 2.0 * lambda / (mid + sq);
    let cap = if sa.is_infinite() {
        f64::INFINITY
    } else {
        sa * (v / slt - 1.0)
    };
    let smax = ((mid + sq) / den).min(cap);
    if !(smax > smin) {
        return None;
    }
    Some(DecBounds {
        zeta_max,
        smeas_min: smin,
        smeas_max: smax,
    })
}

/// Settings of the alternating bisection solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Residual tolerance for the bisections.
    pub tol_root: f64,
    /// Cap on outer sweeps.
    pub max_outer: usize,
    /// Starting point; defaults to the midpoint of the bounds.
    pub init_zeta: Option<f64>,
    pub init_smeas: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_root: 1e-10,
            max_outer: 50,
            init_zeta: None,
            init_smeas: None,
        }
    }
}

/// Decentralized activation decision.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecDecision {
    pub zeta: f64,
    pub s_meas: f64,
    /// Per-SN activation probability `B zeta / N_S`.
    pub per_sn_prob: f64,
}

impl DecDecision {
    pub fn idle() -> Self {
        DecDecision {
            zeta: 0.0,
            s_meas: 0.0,
            per_sn_prob: 0.0,
        }
    }

    fn new(zeta: f64, s_meas: f64, params: &ModelParams) -> Self {
        DecDecision {
            zeta,
            s_meas,
            per_sn_prob: (params.channels as f64 * zeta / params.num_sns as f64).min(1.0),
        }
    }
}

/// Which bound, if any, the final iterate sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct Clamps {
    pub smeas_min: bool,
    pub smeas_max: bool,
    pub zeta_max: bool,
}

/// One iterate of the alternating solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TracePoint {
    pub zeta: f64,
    pub s_meas: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DecSolution {
    pub decision: DecDecision,
    /// Set when only a local minimum is guaranteed (B >= 2).
    pub local_optimum: bool,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    pub clamps: Clamps,
    pub bounds: Option<DecBounds>,
}

impl DecSolution {
    fn idle(params: &ModelParams) -> Self {
        DecSolution {
            decision: DecDecision::idle(),
            local_optimum: params.channels >= 2,
            iterations: 0,
            trace: Vec::new(),
            clamps: Clamps::default(),
            bounds: None,
        }
    }
}

/// Bisection for an increasing function; `f(lo) < 0 < f(hi)` is assumed.
fn bisect_increasing(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v.abs() <= tol && (hi - lo) <= 1e-14 * hi.abs().max(1e-300) {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_dec_inputs(op: &'static str, prior_var: f64, lambda: f64, params: &ModelParams) -> Result<()> {
    let lth = lambda_threshold(params.theta(), params.s_ambient);
    if !(lambda > 0.0 && lambda < lth) {
        return Err(Error::domain(op, format!("lambda {lambda} must lie in (0, lambda_th = {lth})")));
    }
    if !(prior_var > 0.0 && prior_var <= 1.0) {
        return Err(Error::domain(op, format!("prior variance {prior_var} outside (0,1]")));
    }
    if params.theta() <= 0.0 {
        return Err(Error::domain(op, "requires theta > 0"));
    }
    Ok(())
}

/// Local minimiser of the decentralized myopic cost by alternating
/// bisections on `h` (over `S_M`) and `g` (over `zeta`).
pub fn dec_mp_solve(prior_var: f64, lambda: f64, params: &ModelParams, config: &SolverConfig) -> Result<DecSolution> {
    check_dec_inputs("dec_mp_solve", prior_var, lambda, params)?;
    if !(config.tol_root > 0.0) {
        return Err(Error::Config("tol_root must be > 0".into()));
    }
    // g increases in zeta, so with g(., 0) >= 0 everywhere idling is optimal.
    let Some(bounds) = activation_region(prior_var, lambda, params) else {
        return Ok(DecSolution::idle(params));
    };
    let DecBounds {
        zeta_max,
        smeas_min,
        smeas_max,
    } = bounds;
    let mut zeta = config.init_zeta.unwrap_or(0.5 * zeta_max);
    let mut s = config.init_smeas.unwrap_or(0.5 * (smeas_min + smeas_max));
    if !(zeta > 0.0 && zeta <= zeta_max && s >= smeas_min && s <= smeas_max) {
        return Err(Error::Config(format!(
            "initial point ({zeta}, {s}) outside bounds {bounds:?}"
        )));
    }
    let tol = config.tol_root;
    let cost = |z: f64, s: f64| myopic_cost(z, s, prior_var, lambda, params);
    // At zeta = 0 the S_M step uses h / zeta in the limit zeta -> 0, which
    // is the single-SN coordinated condition.
    let h = |s: f64, z: f64| {
        if z == 0.0 {
            stationarity_h_over_zeta0(s, prior_var, lambda, params)
        } else {
            stationarity_h(s, z, prior_var, lambda, params)
        }
    };
    // g is only evaluated on [0, zeta_max] with zeta_max <= 1; at exactly one
    // it diverges to +inf.
    let g = |s: f64, z: f64| {
        if z >= 1.0 {
            f64::INFINITY
        } else {
            stationarity_g(s, z, prior_var, lambda, params).unwrap_or(f64::INFINITY)
        }
    };
    let mut trace = vec![TracePoint {
        zeta,
        s_meas: s,
        cost: cost(zeta, s),
    }];
    for it in 1..=config.max_outer {
        let mut clamps = Clamps::default();
        // Step 2: S_M given zeta.
        let s_new = if h(smeas_min, zeta) >= 0.0 {
            clamps.smeas_min = true;
            smeas_min
        } else if h(smeas_max, zeta) <= 0.0 {
            clamps.smeas_max = true;
            smeas_max
        } else {
            bisect_increasing(smeas_min, smeas_max, tol, |x| h(x, zeta))
        };
        // Step 3: zeta given S_M.
        let z_new = if g(s_new, zeta_max) <= 0.0 {
            clamps.zeta_max = true;
            zeta_max
        } else if g(s_new, 0.0) >= 0.0 {
            // f is non-decreasing in zeta at this S_M: the minimum over
            // zeta is its lower end.
            0.0
        } else {
            bisect_increasing(0.0, zeta_max, tol, |z| g(s_new, z))
        };
        let dz = (z_new - zeta).abs();
        let ds = (s_new - s).abs() / s.abs().max(1e-300);
        zeta = z_new;
        s = s_new;
        trace.push(TracePoint {
            zeta,
            s_meas: s,
            cost: cost(zeta, s),
        });
        if dz.max(ds) < 1e-9 {
            return Ok(DecSolution {
                decision: DecDecision::new(zeta, s, params),
                local_optimum: params.channels >= 2,
                iterations: it,
                trace,
                clamps,
                bounds: Some(bounds),
            });
        }
    }
    Err(Error::NoConvergence {
        solver: "dec_mp_solve",
        iterations: config.max_outer,
    })
}

/// Left-hand side of the single-channel stationarity equation in `zeta`.
fn b1_residual(zeta: f64, v: f64, lambda: f64, theta: f64, s_ambient: f64) -> f64 {
    let w = if s_ambient.is_infinite() {
        1.0
    } else {
        v * s_ambient / (1.0 + v * s_ambient)
    };
    let lt = lambda * theta;
    let e = zeta.exp() / (1.0 - zeta);
    -w * (v - (zeta / 2.0).exp() * lt.sqrt() * (2.0 - zeta) / (1.0 - zeta) + e * lt / v) + lambda * e
}

/// Measurement SNR that pairs with `zeta` in the single-channel optimum.
pub fn b1_smeas(zeta: f64, prior_var: f64, lambda: f64, theta: f64, s_ambient: f64) -> f64 {
    let w = if s_ambient.is_infinite() {
        1.0
    } else {
        prior_var * s_ambient / (1.0 + prior_var * s_ambient)
    };
    ((-zeta / 2.0).exp() / (lambda * theta).sqrt() - 1.0 / prior_var) * w
}

/// Closed-form global optimum for a single channel.
pub fn dec_mp_b1(prior_var: f64, lambda: f64, params: &ModelParams, config: &SolverConfig) -> Result<DecSolution> {
    if params.channels != 1 {
        return Err(Error::domain("dec_mp_b1", format!("requires B = 1, got {}", params.channels)));
    }
    check_dec_inputs("dec_mp_b1", prior_var, lambda, params)?;
    let (theta, sa) = (params.theta(), params.s_ambient);
    let Some(bounds) = activation_region(prior_var, lambda, params) else {
        let mut out = DecSolution::idle(params);
        out.local_optimum = false;
        return Ok(out);
    };
    let r = |z: f64| {
        if z >= 1.0 {
            f64::INFINITY
        } else {
            b1_residual(z, prior_var, lambda, theta, sa)
        }
    };
    let mut clamps = Clamps::default();
    let zeta = if r(bounds.zeta_max) <= 0.0 {
        clamps.zeta_max = true;
        bounds.zeta_max
    } else {
        bisect_increasing(0.0, bounds.zeta_max, config.tol_root, r)
    };
    let s = b1_smeas(zeta, prior_var, lambda, theta, sa);
    Ok(DecSolution {
        decision: DecDecision::new(zeta, s, params),
        local_optimum: false,
        iterations: 1,
        trace: vec![TracePoint {
            zeta,
            s_meas: s,
            cost: myopic_cost(zeta, s, prior_var, lambda, params),
        }],
        clamps,
        bounds: Some(bounds),
    })
}

/// Decentralized myopic decision, using the closed form when `B = 1`.
pub fn dec_mp(prior_var: f64, lambda: f64, params: &ModelParams, config: &SolverConfig) -> Result<DecDecision> {
    if params.channels == 1 {
        dec_mp_b1(prior_var, lambda, params, config).map(|s| s.decision)
    } else {
        dec_mp_solve(prior_var, lambda, params, config).map(|s| s.decision)
    }
}
