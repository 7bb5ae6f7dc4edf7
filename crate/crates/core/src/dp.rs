//! Finite-horizon dynamic-programming baselines on quantised grids.
//!
//! The cost-to-go `W^n(V)` is kept on `N_V` equally spaced prior-variance
//! nodes in `[1 - alpha, 1]` and read between nodes by linear
//! interpolation. Each stage is an exhaustive search over a fixed action
//! grid: aggregate SNRs for the coordinated scheme, `(zeta, S_M)` pairs for
//! the decentralized one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coordinated::min_cost_allocation;
use crate::decentralized::{binomial_pmf_all, success_prob};
use crate::kalman::{harmonic_snr, nu, posterior_variance};
use crate::{Error, ModelParams, Result};

/// Grid sizes and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_v: usize,
    pub n_l: usize,
    pub n_z: usize,
    pub n_m: usize,
    pub horizon: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_v: 200,
            n_l: 500,
            n_z: 101,
            n_m: 100,
            horizon: 100,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_v < 2 || self.n_l < 1 || self.n_z < 2 || self.n_m < 1 || self.horizon < 1 {
            return Err(Error::Config(format!(
                "grid needs n_v >= 2, n_l >= 1, n_z >= 2, n_m >= 1, horizon >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// Prior-variance nodes `1 - alpha + i alpha / (N_V - 1)`.
    pub fn v_nodes(&self, alpha: f64) -> Vec<f64> {
        (0..self.n_v)
            .map(|i| 1.0 - alpha + i as f64 * alpha / (self.n_v - 1) as f64)
            .collect()
    }

    /// Aggregate-SNR candidates `i B S_A / N_L`, excluding `B S_A`.
    pub fn l_nodes(&self, params: &ModelParams) -> Vec<f64> {
        let top = params.channels as f64 * params.s_ambient;
        (0..self.n_l).map(|i| i as f64 * top / self.n_l as f64).collect()
    }

    /// Activation candidates `i / (N_Z - 1)`.
    pub fn z_nodes(&self) -> Vec<f64> {
        (0..self.n_z).map(|i| i as f64 / (self.n_z - 1) as f64).collect()
    }

    /// Measurement-SNR candidates `(i + 1) S_A / (N_M - i)`, which quantise
    /// the local SNR uniformly on `(0, S_A)`.
    pub fn sm_nodes(&self, s_ambient: f64) -> Vec<f64> {
        (0..self.n_m)
            .map(|i| (i + 1) as f64 * s_ambient / (self.n_m - i) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpScheme {
    Coordinated,
    Decentralized,
}

/// Minimising action at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DpAction {
    Coord { agg_snr: f64, t_active: usize, s_meas: f64 },
    Dec { zeta: f64, s_meas: f64 },
}

/// Cost-to-go and policy of every stage. `values[n]` is `W^n`, the value
/// with `n + 1` slots to go; the last stage is the most-iterated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub scheme: DpScheme,
    pub lambda: f64,
    pub params: ModelParams,
    pub grid: GridSpec,
    pub v_nodes: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub policies: Vec<Vec<DpAction>>,
    /// Candidate evaluations per stage, summed over nodes.
    pub evaluations_per_stage: u64,
}

impl ValueTable {
    pub fn stages(&self) -> usize {
        self.values.len()
    }

    pub fn interpolate(&self, stage: usize, v: f64) -> Result<f64> {
        let vals = self
            .values
            .get(stage)
            .ok_or_else(|| Error::domain("interpolate", format!("stage {stage} out of range")))?;
        value_interpolate(&self.v_nodes, vals, v)
    }

    /// Stationary policy (most-iterated stage) at the node nearest to `v`.
    pub fn policy_at(&self, v: f64) -> DpAction {
        let pol = self.policies.last().expect("at least one stage");
        pol[nearest_node(&self.v_nodes, v)]
    }
}

fn nearest_node(nodes: &[f64], v: f64) -> usize {
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    if hi <= lo {
        return 0;
    }
    let h = (hi - lo) / (nodes.len() - 1) as f64;
    (((v - lo) / h).round().max(0.0) as usize).min(nodes.len() - 1)
}

/// Linear interpolation of `values` over equally spaced `nodes`; `v` may
/// overshoot the range by rounding noise, which is clamped.
fn interp_clamped(nodes: &[f64], values: &[f64], v: f64) -> f64 {
    let n = nodes.len();
    let (lo, hi) = (nodes[0], nodes[n - 1]);
    if hi <= lo {
        return values[0];
    }
    let h = (hi - lo) / (n - 1) as f64;
    let x = ((v - lo) / h).clamp(0.0, (n - 1) as f64);
    let i = (x.floor() as usize).min(n - 2);
    let w = x - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Piecewise-linear interpolation between adjacent nodes, exact at nodes.
pub fn value_interpolate(nodes: &[f64], values: &[f64], v: f64) -> Result<f64> {
    if nodes.is_empty() || nodes.len() != values.len() {
        return Err(Error::domain("value_interpolate", "nodes and values must be non-empty and equal length"));
    }
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    let slack = 1e-12;
    if !(v >= lo - slack && v <= hi + slack) {
        return Err(Error::domain("value_interpolate", format!("v = {v} outside [{lo}, {hi}]")));
    }
    let n = nodes.len();
    if n == 1 || hi <= lo {
        return Ok(values[0]);
    }
    let i = nodes.partition_point(|&x| x <= v).clamp(1, n - 1) - 1;
    let w = ((v - nodes[i]) / (nodes[i + 1] - nodes[i])).clamp(0.0, 1.0);
    if w == 0.0 {
        return Ok(values[i]);
    }
    Ok(values[i] * (1.0 - w) + values[i + 1] * w)
}

fn check_inputs(lambda: f64, params: &ModelParams, grid: &GridSpec) -> Result<()> {
    params.validate()?;
    grid.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain("dp", format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if params.sa_infinite() {
        return Err(Error::domain("dp", "the DP grids need a finite ambient SNR"));
    }
    Ok(())
}

/// Fixed-order argmin; the earliest candidate wins ties.
fn argmin(iter: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in iter.enumerate() {
        if c < best.1 {
            best = (i, c);
        }
    }
    best
}

/// Coordinated DP: search over aggregate SNRs, each realised by the
/// cheapest `(t, S_M)` allocation.
pub fn coord_dp(lambda: f64, params: &ModelParams, grid: &GridSpec) -> Result<ValueTable> {
    check_inputs(lambda, params, grid)?;
    let v_nodes = grid.v_nodes(params.alpha);
    let l_nodes = grid.l_nodes(params);
    let alloc = l_nodes
        .iter()
        .map(|&l| min_cost_allocation(l, params))
        .collect::<Result<Vec<_>>>()?;
    let theta = params.theta();
    let action_cost: Vec<f64> = alloc
        .iter()
        .map(|&(t, sm)| lambda * t as f64 * (1.0 + theta * sm))
        .collect();
    // post[v][l] and the prior it leads to are stage-independent.
    let post: Vec<Vec<(f64, f64)>> = v_nodes
        .iter()
        .map(|&v| {
            l_nodes
                .iter()
                .map(|&l| {
                    let p = posterior_variance(v, l);
                    (p, nu(p, params.alpha))
                })
                .collect()
        })
        .collect();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(grid.horizon);
    let mut policies = Vec::with_capacity(grid.horizon);
    let mut prev = vec![0.0; v_nodes.len()];
    for _ in 0..grid.horizon {
        let stage: Vec<(f64, DpAction)> = post
            .par_iter()
            .map(|row| {
                let (k, c) = argmin(
                    row.iter()
                        .zip(&action_cost)
                        .map(|(&(p, next), &ac)| p + ac + interp_clamped(&v_nodes, &prev, next)),
                );
                let (t, sm) = alloc[k];
                (
                    c,
                    DpAction::Coord {
                        agg_snr: l_nodes[k],
                        t_active: t,
                        s_meas: sm,
                    },
                )
            })
            .collect();
        prev = stage.iter().map(|s| s.0).collect();
        values.push(prev.clone());
        policies.push(stage.into_iter().map(|s| s.1).collect());
    }
    Ok(ValueTable {
        scheme: DpScheme::Coordinated,
        lambda,
        params: *params,
        grid: *grid,
        evaluations_per_stage: (v_nodes.len() * l_nodes.len()) as u64,
        v_nodes,
        values,
        policies,
    })
}

/// Decentralized DP: search over `(Z \ {0}) x S_M` plus the idle action.
pub fn dec_dp(lambda: f64, params: &ModelParams, grid: &GridSpec) -> Result<ValueTable> {
    check_inputs(lambda, params, grid)?;
    let b = params.channels;
    let v_nodes = grid.v_nodes(params.alpha);
    let z_nodes: Vec<f64> = grid.z_nodes().into_iter().skip(1).collect();
    let sm_nodes = grid.sm_nodes(params.s_ambient);
    let theta = params.theta();
    let pmf: Vec<Vec<f64>> = z_nodes.iter().map(|&z| binomial_pmf_all(b, success_prob(z))).collect();
    let tx_cost: Vec<Vec<f64>> = z_nodes
        .iter()
        .map(|&z| {
            sm_nodes
                .iter()
                .map(|&s| lambda * z * b as f64 * (1.0 + theta * s))
                .collect()
        })
        .collect();
    // ladder[v][m][r] = (posterior variance, next prior) with r successes.
    let ladder: Vec<Vec<Vec<(f64, f64)>>> = v_nodes
        .iter()
        .map(|&v| {
            sm_nodes
                .iter()
                .map(|&s| {
                    let hs = harmonic_snr(params.s_ambient, s);
                    (0..=b)
                        .map(|r| {
                            let p = posterior_variance(v, r as f64 * hs);
                            (p, nu(p, params.alpha))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(grid.horizon);
    let mut policies = Vec::with_capacity(grid.horizon);
    let mut prev = vec![0.0; v_nodes.len()];
    for _ in 0..grid.horizon {
        let stage: Vec<(f64, DpAction)> = v_nodes
            .par_iter()
            .zip(&ladder)
            .map(|(&v, rows)| {
                // Per-outcome stage-plus-future cost, shared across zeta.
                let u: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|&(p, next)| p + interp_clamped(&v_nodes, &prev, next))
                            .collect()
                    })
                    .collect();
                let idle = v + interp_clamped(&v_nodes, &prev, nu(v, params.alpha));
                let mut best = (idle, DpAction::Dec { zeta: 0.0, s_meas: 0.0 });
                for (iz, &z) in z_nodes.iter().enumerate() {
                    let w = &pmf[iz];
                    for (im, &s) in sm_nodes.iter().enumerate() {
                        let e: f64 = w.iter().zip(&u[im]).map(|(a, b)| a * b).sum();
                        let c = e + tx_cost[iz][im];
                        if c < best.0 {
                            best = (c, DpAction::Dec { zeta: z, s_meas: s });
                        }
                    }
                }
                best
            })
            .collect();
        prev = stage.iter().map(|s| s.0).collect();
        values.push(prev.clone());
        policies.push(stage.into_iter().map(|s| s.1).collect());
    }
    Ok(ValueTable {
        scheme: DpScheme::Decentralized,
        lambda,
        params: *params,
        grid: *grid,
        evaluations_per_stage: (v_nodes.len() * (z_nodes.len() * sm_nodes.len() + 1)) as u64,
        v_nodes,
        values,
        policies,
    })
}
