//! Browser bindings for the interactive demo in `www/`.
//!
//! Every exported function returns a JSON string; failures come back as
//! `{"error": "..."}` so the page can show them inline.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use wsn_myopic::coordinated::{
    coord_mp, lambda_star, lambda_threshold, ordered_pairs, periodic_performance, periodic_schedule, v_threshold,
};
use wsn_myopic::decentralized::{dec_mp, myopic_cost, SolverConfig};
use wsn_myopic::kalman::harmonic_snr;
use wsn_myopic::{ModelParams, Result};

#[derive(Serialize)]
struct CoordPoint {
    v: f64,
    t_active: usize,
    s_meas: f64,
    agg_snr: f64,
    objective: f64,
}

#[derive(Serialize)]
struct CoordStructure {
    lambda_th: f64,
    /// `v_th(lambda, t)` for `t = 0..` while defined and below one.
    thresholds: Vec<f64>,
    points: Vec<CoordPoint>,
}

#[derive(Serialize)]
struct DecPoint {
    v: f64,
    zeta: f64,
    s_meas: f64,
    per_sn_prob: f64,
    cost: f64,
}

#[derive(Serialize)]
struct DecStructure {
    lambda_th: f64,
    v_idle: f64,
    points: Vec<DecPoint>,
}

#[derive(Serialize)]
struct TradeoffPoint {
    lambda: f64,
    p0: f64,
    period: u32,
    mse: f64,
    network_cost: f64,
}

#[derive(Serialize)]
struct Tradeoff {
    lambda_th: f64,
    curve: Vec<TradeoffPoint>,
    selected: Option<TradeoffPoint>,
}

fn params(alpha: f64, sa: f64, theta: f64, b: usize, ns: usize) -> Result<ModelParams> {
    let p = ModelParams::with_theta(alpha, sa, theta, b, ns);
    p.validate()?;
    Ok(p)
}

fn v_grid(alpha: f64, n: usize) -> Vec<f64> {
    let lo = 1.0 - alpha;
    let n = n.max(2);
    (0..n).map(|i| lo + alpha * i as f64 / (n - 1) as f64).collect()
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn coord_structure_impl(lambda: f64, alpha: f64, sa: f64, theta: f64, b: usize, n: usize) -> Result<CoordStructure> {
    let p = params(alpha, sa, theta, b, b.max(20))?;
    let lambda_th = lambda_threshold(theta, sa);
    let mut thresholds = Vec::new();
    for t in 0..b as i64 {
        match v_threshold(lambda, t, theta, sa) {
            Ok(v) if v < 1.0 => thresholds.push(v),
            _ => break,
        }
    }
    let points = v_grid(alpha, n)
        .into_iter()
        .map(|v| {
            let c = coord_mp(v, lambda, &p, &[])?;
            let d = c.most_likely();
            Ok(CoordPoint {
                v,
                t_active: d.t_active,
                s_meas: d.s_meas,
                agg_snr: d.t_active as f64 * harmonic_snr(sa, d.s_meas),
                objective: c.objective(v, lambda, &p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoordStructure {
        lambda_th,
        thresholds,
        points,
    })
}

fn dec_structure_impl(lambda: f64, alpha: f64, sa: f64, theta: f64, b: usize, ns: usize, n: usize) -> Result<DecStructure> {
    let p = params(alpha, sa, theta, b, ns)?;
    let cfg = SolverConfig::default();
    let points = v_grid(alpha, n)
        .into_iter()
        .map(|v| {
            let d = dec_mp(v, lambda, &p, &cfg)?;
            Ok(DecPoint {
                v,
                zeta: d.zeta,
                s_meas: d.s_meas,
                per_sn_prob: d.per_sn_prob,
                cost: myopic_cost(d.zeta, d.s_meas, v, lambda, &p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecStructure {
        lambda_th: lambda_threshold(theta, sa),
        v_idle: v_threshold(lambda, 0, theta, sa)?,
        points,
    })
}

fn tradeoff_impl(theta: f64, alpha: f64, j_max: u32, per_interval: usize, lambda: f64) -> Result<Tradeoff> {
    let p = params(alpha, f64::INFINITY, theta, 1, 1)?;
    let point = |l: f64, p0: f64| -> Result<TradeoffPoint> {
        let perf = periodic_performance(l, p0, &p)?;
        Ok(TradeoffPoint {
            lambda: l,
            p0,
            period: periodic_schedule(l, p0, theta, alpha)?.period,
            mse: perf.avg_mse,
            network_cost: perf.network_cost,
        })
    };
    let curve = ordered_pairs(j_max, per_interval, theta, alpha)
        .into_iter()
        .map(|(l, q)| point(l, q))
        .collect::<Result<Vec<_>>>()?;
    let selected = if lambda > 0.0 && lambda <= lambda_star(j_max, theta, alpha) {
        Some(point(lambda, 1.0)?)
    } else {
        None
    };
    Ok(Tradeoff {
        lambda_th: lambda_threshold(theta, f64::INFINITY),
        curve,
        selected,
    })
}

/// Coordinated myopic decision on `n` prior variances in `[1 - alpha, 1]`.
#[wasm_bindgen]
pub fn coord_structure(lambda: f64, alpha: f64, sa: f64, theta: f64, b: usize, n: usize) -> String {
    to_json(coord_structure_impl(lambda, alpha, sa, theta, b, n))
}

/// Decentralized myopic decision on `n` prior variances in `[1 - alpha, 1]`.
#[wasm_bindgen]
pub fn dec_structure(lambda: f64, alpha: f64, sa: f64, theta: f64, b: usize, ns: usize, n: usize) -> String {
    to_json(dec_structure_impl(lambda, alpha, sa, theta, b, ns, n))
}

/// Closed-form (network cost, MSE) curve for noiseless sensors over the
/// ordered operating points of periods `1..=j_max`, plus the point at
/// `lambda` when it lies in range.
#[wasm_bindgen]
pub fn tradeoff_curve(theta: f64, alpha: f64, j_max: u32, per_interval: usize, lambda: f64) -> String {
    to_json(tradeoff_impl(theta, alpha, j_max, per_interval, lambda))
}
