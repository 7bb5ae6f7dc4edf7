//! Monte-Carlo evaluation of sensing-transmission policies.
//!
//! Every slot the policy reads the FC's prior variance (and, in the
//! Markov-accuracy schemes, the SNs' accuracy states), the SNs sense and
//! transmit, the channel resolves collisions and the FC runs the Kalman
//! update. Averages follow the sample-path definitions from slot 0 with
//! `V_0 = 1`, transient included.
//!
//! Randomness comes from ChaCha8 streams: replica `r` of seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` with stream `r`, so results do not depend
//! on how replicas are spread over threads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coordinated::{coord_mp, lambda_threshold, v_threshold};
use crate::decentralized::{dec_mp, DecDecision, SolverConfig};
use crate::dp::{coord_dp, dec_dp, DpAction, GridSpec, ValueTable};
use crate::gamma::{scmp_step, sdmp_from_decision, AccuracyChain};
use crate::kalman::{fuse_measurements, harmonic_snr, Belief, Measurement};
use crate::{Error, ModelParams, PerfPoint, Result};

/// Artifact version recorded in run metadata.
pub const VERSION: &str = concat!("wsn-myopic-v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CoordMp,
    DecMp,
    CoordDp,
    DecDp,
    Scmp,
    Sdmp,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::CoordMp,
        Scheme::DecMp,
        Scheme::CoordDp,
        Scheme::DecDp,
        Scheme::Scmp,
        Scheme::Sdmp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CoordMp => "coord-mp",
            Scheme::DecMp => "dec-mp",
            Scheme::CoordDp => "coord-dp",
            Scheme::DecDp => "dec-dp",
            Scheme::Scmp => "scmp",
            Scheme::Sdmp => "sdmp",
        }
    }

    /// Whether the scheme runs in the Markov-accuracy scenario.
    pub fn needs_chain(self) -> bool {
        matches!(self, Scheme::Scmp | Scheme::Sdmp)
    }

    pub fn is_coordinated(self) -> bool {
        matches!(self, Scheme::CoordMp | Scheme::CoordDp | Scheme::Scmp)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

fn default_slots() -> u64 {
    100_000
}

fn default_replicas() -> usize {
    1
}

fn default_table_nodes() -> usize {
    2048
}

/// Everything needed to reproduce a simulation or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scheme: Scheme,
    #[serde(default = "default_slots")]
    pub slots: u64,
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Multiplier for a single run.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Multipliers for a sweep.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub params: ModelParams,
    /// Accuracy-state chain; required by `scmp` and `sdmp` only.
    #[serde(default)]
    pub chain: Option<AccuracyChain>,
    #[serde(default)]
    pub record_trajectory: bool,
    /// DP grids (coord-dp, dec-dp).
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Threshold tie probabilities for the coordinated policy.
    #[serde(default)]
    pub tie_probs: Vec<f64>,
    /// Nodes of the tabulated decentralized policy; zero solves every slot.
    #[serde(default = "default_table_nodes")]
    pub dec_table_nodes: usize,
}

impl SimConfig {
    pub fn new(scheme: Scheme, params: ModelParams, seed: u64) -> Self {
        SimConfig {
            scheme,
            slots: default_slots(),
            seed,
            replicas: 1,
            lambda: None,
            lambdas: Vec::new(),
            params,
            chain: None,
            record_trajectory: false,
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            tie_probs: Vec::new(),
            dec_table_nodes: default_table_nodes(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.slots == 0 {
            return Err(Error::Config("slots must be >= 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        match (self.scheme.needs_chain(), &self.chain) {
            (true, None) => {
                return Err(Error::Config(format!(
                    "scheme {} needs an accuracy-state chain",
                    self.scheme
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Config(format!(
                    "scheme {} runs in the best-accuracy scenario and takes no chain",
                    self.scheme
                )))
            }
            _ => {}
        }
        if self.params.theta() == 0.0 && self.params.sa_infinite() {
            return Err(Error::Config("theta = 0 with infinite S_A gives unbounded SNR".into()));
        }
        if matches!(self.scheme, Scheme::CoordDp | Scheme::DecDp) {
            self.grid.validate()?;
        }
        Ok(())
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        let lth = lambda_threshold(self.params.theta(), self.params.s_ambient);
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {lambda}")));
        }
        if lambda > lth {
            return Err(Error::Config(format!("lambda {lambda} exceeds lambda_th {lth}")));
        }
        Ok(())
    }
}

/// What the SNs are told to do in one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Idle,
    /// Listed SNs transmit on distinct channels.
    Scheduled { sns: Vec<usize>, s_meas: f64 },
    /// Each SN activates with the probability of its accuracy state and
    /// picks a channel uniformly.
    RandomAccess { q_by_state: Vec<f64>, s_meas: f64 },
}

/// Per-replica mutable policy state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyState {
    /// Virtual best-accuracy prior variance (SCMP).
    pub virtual_prior: f64,
}

impl Default for PolicyState {
    fn default() -> Self {
        PolicyState { virtual_prior: 1.0 }
    }
}

/// A stationary policy mapping the FC state to an instruction.
pub trait Policy: Sync {
    /// `states[n]` indexes the chain state of SN `n`; `u` is a uniform draw
    /// for tie-breaking.
    fn decide(&self, state: &mut PolicyState, prior_var: f64, states: &[usize], u: f64) -> Result<Instruction>;
}

struct CoordMpPolicy {
    lambda: f64,
    params: ModelParams,
    tie_probs: Vec<f64>,
}

impl Policy for CoordMpPolicy {
    fn decide(&self, _: &mut PolicyState, v: f64, _: &[usize], u: f64) -> Result<Instruction> {
        let d = coord_mp(v, self.lambda, &self.params, &self.tie_probs)?.sample(u);
        Ok(scheduled(d.t_active, d.s_meas))
    }
}

fn scheduled(t: usize, s_meas: f64) -> Instruction {
    if t == 0 {
        Instruction::Idle
    } else {
        Instruction::Scheduled {
            sns: (0..t).collect(),
            s_meas,
        }
    }
}

/// Decentralized myopic decisions, solved on demand or read from a table of
/// solves on `(v_th(lambda, 0), 1]` with linear interpolation.
struct DecTable {
    lambda: f64,
    params: ModelParams,
    solver: SolverConfig,
    v_idle: f64,
    nodes: Vec<f64>,
    decisions: Vec<DecDecision>,
}

impl DecTable {
    fn new(lambda: f64, params: &ModelParams, solver: &SolverConfig, n: usize) -> Result<Self> {
        let v_idle = v_threshold(lambda, 0, params.theta(), params.s_ambient)?;
        let mut t = DecTable {
            lambda,
            params: *params,
            solver: *solver,
            v_idle,
            nodes: Vec::new(),
            decisions: Vec::new(),
        };
        if n >= 2 && v_idle < 1.0 {
            // First node just above the threshold, where the solver is active.
            let lo = v_idle + 1e-9 * (1.0 - v_idle);
            t.nodes = (0..n).map(|i| lo + (1.0 - lo) * i as f64 / (n - 1) as f64).collect();
            t.decisions = t
                .nodes
                .par_iter()
                .map(|&v| dec_mp(v, lambda, params, solver))
                .collect::<Result<Vec<_>>>()?;
        }
        Ok(t)
    }

    fn decision(&self, v: f64) -> Result<DecDecision> {
        if v <= self.v_idle {
            return Ok(DecDecision::idle());
        }
        if self.nodes.is_empty() {
            return dec_mp(v, self.lambda, &self.params, &self.solver);
        }
        let n = self.nodes.len();
        let (lo, hi) = (self.nodes[0], self.nodes[n - 1]);
        let x = ((v - lo) / (hi - lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let w = x - i as f64;
        let (a, b) = (self.decisions[i], self.decisions[i + 1]);
        let zeta = a.zeta * (1.0 - w) + b.zeta * w;
        let s_meas = a.s_meas * (1.0 - w) + b.s_meas * w;
        Ok(DecDecision {
            zeta,
            s_meas,
            per_sn_prob: (self.params.channels as f64 * zeta / self.params.num_sns as f64).min(1.0),
        })
    }
}

struct DecMpPolicy {
    table: DecTable,
}

impl Policy for DecMpPolicy {
    fn decide(&self, _: &mut PolicyState, v: f64, _: &[usize], _: f64) -> Result<Instruction> {
        let d = self.table.decision(v)?;
        Ok(random_access(vec![d.per_sn_prob], d.s_meas))
    }
}

fn random_access(q_by_state: Vec<f64>, s_meas: f64) -> Instruction {
    if q_by_state.iter().all(|&q| q == 0.0) {
        Instruction::Idle
    } else {
        Instruction::RandomAccess { q_by_state, s_meas }
    }
}

struct DpPolicy {
    table: ValueTable,
    num_sns: usize,
    channels: usize,
}

impl Policy for DpPolicy {
    fn decide(&self, _: &mut PolicyState, v: f64, _: &[usize], _: f64) -> Result<Instruction> {
        Ok(match self.table.policy_at(v) {
            DpAction::Coord { t_active, s_meas, .. } => scheduled(t_active, s_meas),
            DpAction::Dec { zeta, s_meas } => {
                let q = (self.channels as f64 * zeta / self.num_sns as f64).min(1.0);
                random_access(vec![q], s_meas)
            }
        })
    }
}

struct ScmpPolicy {
    lambda: f64,
    params: ModelParams,
    tie_probs: Vec<f64>,
    gammas: Vec<f64>,
}

impl Policy for ScmpPolicy {
    fn decide(&self, state: &mut PolicyState, _: f64, states: &[usize], u: f64) -> Result<Instruction> {
        let g: Vec<f64> = states.iter().map(|&i| self.gammas[i]).collect();
        let step = scmp_step(state.virtual_prior, &g, self.lambda, &self.params, &self.tie_probs, u)?;
        state.virtual_prior = step.next_virtual_prior;
        if step.active.is_empty() {
            return Ok(Instruction::Idle);
        }
        Ok(Instruction::Scheduled {
            sns: step.active,
            s_meas: step.decision.s_meas,
        })
    }
}

struct SdmpPolicy {
    table: DecTable,
    chain: AccuracyChain,
}

impl Policy for SdmpPolicy {
    fn decide(&self, _: &mut PolicyState, v: f64, _: &[usize], _: f64) -> Result<Instruction> {
        let d = self.table.decision(v)?;
        let s = sdmp_from_decision(d, &self.table.params, &self.chain)?;
        Ok(random_access(s.q_of_gamma, d.s_meas))
    }
}

/// Builds the policy of `config.scheme` at multiplier `lambda`.
pub fn build_policy(config: &SimConfig, lambda: f64) -> Result<Box<dyn Policy>> {
    let p = config.params;
    Ok(match config.scheme {
        Scheme::CoordMp => Box::new(CoordMpPolicy {
            lambda,
            params: p,
            tie_probs: config.tie_probs.clone(),
        }),
        Scheme::DecMp => Box::new(DecMpPolicy {
            table: DecTable::new(lambda, &p, &config.solver, config.dec_table_nodes)?,
        }),
        Scheme::CoordDp => Box::new(DpPolicy {
            table: coord_dp(lambda, &p, &config.grid)?,
            num_sns: p.num_sns,
            channels: p.channels,
        }),
        Scheme::DecDp => Box::new(DpPolicy {
            table: dec_dp(lambda, &p, &config.grid)?,
            num_sns: p.num_sns,
            channels: p.channels,
        }),
        Scheme::Scmp => Box::new(ScmpPolicy {
            lambda,
            params: p,
            tie_probs: config.tie_probs.clone(),
            gammas: config.chain.as_ref().expect("validated").states().to_vec(),
        }),
        Scheme::Sdmp => Box::new(SdmpPolicy {
            table: DecTable::new(lambda, &p, &config.solver, config.dec_table_nodes)?,
            chain: config.chain.clone().expect("validated"),
        }),
    })
}

/// One slot of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub slot: u64,
    pub prior_var: f64,
    pub agg_snr: f64,
    pub post_var: f64,
    pub active: usize,
    pub successes: usize,
    pub sq_error: f64,
}

/// Result of `simulate`: the performance point plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub scheme: Scheme,
    pub perf: PerfPoint,
    pub replicas: usize,
    /// Mean of `(X_hat - X)^2`, the realised error of the filter.
    pub empirical_mse: f64,
    pub stderr_empirical_mse: f64,
    /// Channel-slots with two or more transmitters.
    pub collisions: u64,
    /// `success_hist[r]`: slots with exactly `r` received measurements.
    pub success_hist: Vec<u64>,
    /// Trajectory of replica 0, if requested.
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

struct ReplicaStats {
    mse: f64,
    cost: f64,
    sq_err: f64,
    batch_mse: Vec<f64>,
    batch_cost: Vec<f64>,
    batch_sq: Vec<f64>,
    collisions: u64,
    success_hist: Vec<u64>,
    trajectory: Option<Vec<TrajectoryRow>>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn noise(rng: &mut ChaCha8Rng, snr: f64) -> f64 {
    let z = normal(rng);
    if snr.is_infinite() {
        0.0
    } else {
        z / snr.sqrt()
    }
}

fn run_replica(
    config: &SimConfig,
    policy: &dyn Policy,
    chain: &AccuracyChain,
    replica: usize,
    record: bool,
) -> Result<ReplicaStats> {
    let p = &config.params;
    let (n_s, b) = (p.num_sns, p.channels);
    let alpha = p.alpha;
    let sa = p.s_ambient;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replica as u64);

    let gammas = chain.states();
    let mut states: Vec<usize> = (0..n_s).map(|_| chain.sample_stationary(rng.random())).collect();
    let mut x = normal(&mut rng);
    let mut prior_var = 1.0;
    let mut prev_mean = 0.0;
    let mut pstate = PolicyState::default();

    let t = config.slots;
    let n_batches = t.min(20) as usize;
    let batch_len = t / n_batches as u64;
    let mut batch_mse = vec![0.0; n_batches];
    let mut batch_cost = vec![0.0; n_batches];
    let mut batch_sq = vec![0.0; n_batches];
    let mut batch_n = vec![0u64; n_batches];
    let (mut sum_mse, mut sum_cost, mut sum_sq) = (0.0, 0.0, 0.0);
    let mut collisions = 0u64;
    let mut hist = vec![0u64; b + 1];
    let mut traj = record.then(Vec::new);
    let mut occupants: Vec<Vec<usize>> = vec![Vec::new(); b];
    let mut received: Vec<Measurement> = Vec::with_capacity(b);

    for k in 0..t {
        let u: f64 = rng.random();
        let instr = policy.decide(&mut pstate, prior_var, &states, u)?;
        received.clear();
        let mut active = 0usize;
        let mut slot_cost = 0.0;
        let measure = |rng: &mut ChaCha8Rng, n: usize, s_meas: f64, x: f64| {
            let g = gammas[states[n]];
            let y = g * x + noise(rng, sa) + noise(rng, s_meas);
            Measurement::new(g, s_meas, y, sa)
        };
        match &instr {
            Instruction::Idle => {}
            Instruction::Scheduled { sns, s_meas } => {
                active = sns.len();
                slot_cost = active as f64 * (p.c_tx + sensing_cost(p.phi, *s_meas));
                for &n in sns {
                    received.push(measure(&mut rng, n, *s_meas, x));
                }
            }
            Instruction::RandomAccess { q_by_state, s_meas } => {
                occupants.iter_mut().for_each(Vec::clear);
                for n in 0..n_s {
                    let q = q_by_state[states[n].min(q_by_state.len() - 1)];
                    let draw_a: f64 = rng.random();
                    if draw_a < q {
                        let ch = rng.random_range(0..b);
                        occupants[ch].push(n);
                        active += 1;
                    }
                }
                slot_cost = active as f64 * (p.c_tx + sensing_cost(p.phi, *s_meas));
                for occ in occupants.iter() {
                    match occ.len() {
                        0 => {}
                        1 => received.push(measure(&mut rng, occ[0], *s_meas, x)),
                        _ => collisions += 1,
                    }
                }
            }
        }
        let fused = fuse_measurements(&received);
        let belief = Belief::update(prior_var, prev_mean, fused, alpha);
        let sq = (belief.post_mean - x).powi(2);
        hist[received.len().min(b)] += 1;

        sum_mse += belief.post_var;
        sum_cost += slot_cost;
        sum_sq += sq;
        let bi = ((k / batch_len.max(1)) as usize).min(n_batches - 1);
        batch_mse[bi] += belief.post_var;
        batch_cost[bi] += slot_cost;
        batch_sq[bi] += sq;
        batch_n[bi] += 1;
        if let Some(tr) = traj.as_mut() {
            tr.push(TrajectoryRow {
                slot: k,
                prior_var,
                agg_snr: fused.agg_snr,
                post_var: belief.post_var,
                active,
                successes: received.len(),
                sq_error: sq,
            });
        }

        // Advance process, belief and accuracy states.
        x = alpha.sqrt() * x + (1.0 - alpha).sqrt() * normal(&mut rng);
        prior_var = belief.next_prior(alpha);
        prev_mean = belief.post_mean;
        if chain.states().len() > 1 {
            for s in states.iter_mut() {
                *s = chain.next_state(*s, rng.random());
            }
        }
    }
    let tf = t as f64;
    let per = |v: &mut Vec<f64>| {
        for (x, &n) in v.iter_mut().zip(&batch_n) {
            *x /= n.max(1) as f64;
        }
    };
    per(&mut batch_mse);
    per(&mut batch_cost);
    per(&mut batch_sq);
    Ok(ReplicaStats {
        mse: sum_mse / tf,
        cost: sum_cost / tf,
        sq_err: sum_sq / tf,
        batch_mse,
        batch_cost,
        batch_sq,
        collisions,
        success_hist: hist,
        trajectory: traj,
    })
}

fn sensing_cost(phi: f64, s_meas: f64) -> f64 {
    if phi == 0.0 {
        0.0
    } else {
        phi * s_meas
    }
}

fn stderr_of(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Simulates `config.scheme` at `config.lambda`.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let lambda = config
        .lambda
        .ok_or_else(|| Error::Config("simulate needs lambda".into()))?;
    simulate_at(config, lambda)
}

fn simulate_at(config: &SimConfig, lambda: f64) -> Result<SimOutput> {
    config.check_lambda(lambda)?;
    let policy = build_policy(config, lambda)?;
    simulate_with_policy(config, lambda, policy.as_ref())
}

/// Runs `config` (slots, seed, replicas, params, chain) under an arbitrary
/// policy; `lambda` is only recorded in the output.
pub fn simulate_with_policy(config: &SimConfig, lambda: f64, policy: &dyn Policy) -> Result<SimOutput> {
    config.params.validate()?;
    if config.slots == 0 || config.replicas == 0 {
        return Err(Error::Config("slots and replicas must be >= 1".into()));
    }
    let chain = config.chain.clone().unwrap_or_else(AccuracyChain::best);
    let runs = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, policy, &chain, r, config.record_trajectory && r == 0))
        .collect::<Result<Vec<_>>>()?;
    let rn = runs.len() as f64;
    let n_s = config.params.num_sns as f64;
    let mean = |f: &dyn Fn(&ReplicaStats) -> f64| runs.iter().map(f).sum::<f64>() / rn;
    let avg_mse = mean(&|r| r.mse);
    let network_cost = mean(&|r| r.cost);
    let empirical_mse = mean(&|r| r.sq_err);
    let (se_mse, se_cost, se_sq) = if runs.len() >= 2 {
        let col = |f: &dyn Fn(&ReplicaStats) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        (
            stderr_of(&col(&|r| r.mse)),
            stderr_of(&col(&|r| r.cost)),
            stderr_of(&col(&|r| r.sq_err)),
        )
    } else {
        let r = &runs[0];
        (stderr_of(&r.batch_mse), stderr_of(&r.batch_cost), stderr_of(&r.batch_sq))
    };
    let mut hist = vec![0u64; config.params.channels + 1];
    let mut collisions = 0;
    for r in &runs {
        collisions += r.collisions;
        for (h, x) in hist.iter_mut().zip(&r.success_hist) {
            *h += x;
        }
    }
    let trajectory = runs.into_iter().next().and_then(|r| r.trajectory);
    Ok(SimOutput {
        scheme: config.scheme,
        perf: PerfPoint {
            lambda,
            avg_mse,
            per_sn_cost: network_cost / n_s,
            network_cost,
            stderr_mse: se_mse,
            stderr_cost: se_cost / n_s,
            slots: config.slots,
        },
        replicas: config.replicas,
        empirical_mse,
        stderr_empirical_mse: se_sq,
        collisions,
        success_hist: hist,
        trajectory,
    })
}

/// Simulates every multiplier in `config.lambdas`; output sorted by lambda.
pub fn sweep_lambda(config: &SimConfig) -> Result<Vec<SimOutput>> {
    config.validate()?;
    if config.lambdas.is_empty() {
        return Err(Error::Config("sweep needs a non-empty lambdas list".into()));
    }
    let mut lambdas = config.lambdas.clone();
    if lambdas.iter().any(|l| l.is_nan()) {
        return Err(Error::Config("lambda grid contains NaN".into()));
    }
    lambdas.sort_by(f64::total_cmp);
    lambdas
        .par_iter()
        .map(|&l| simulate_at(config, l))
        .collect()
}

/// One row of a policy-structure table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub v: f64,
    /// Scheduled SNs (coordinated schemes).
    pub t_active: Option<usize>,
    /// Normalised activation probability (decentralized schemes).
    pub zeta: Option<f64>,
    pub s_meas: f64,
    /// Aggregate SNR if every active SN is received at `gamma_max`.
    pub agg_snr: f64,
}

/// Policy structure of `scheme` on `v_grid`. SCMP and SDMP report their
/// underlying best-accuracy myopic rules; DP schemes their stationary stage.
pub fn policy_structure_dump(
    scheme: Scheme,
    lambda: f64,
    params: &ModelParams,
    v_grid: &[f64],
    grid: &GridSpec,
    solver: &SolverConfig,
) -> Result<Vec<StructureRow>> {
    params.validate()?;
    let lo = 1.0 - params.alpha;
    if let Some(v) = v_grid.iter().find(|&&v| !(v >= lo - 1e-12 && v <= 1.0 + 1e-12)) {
        return Err(Error::domain("policy_structure_dump", format!("v = {v} outside [{lo}, 1]")));
    }
    let sa = params.s_ambient;
    let coord_row = |v: f64, t: usize, s: f64| StructureRow {
        v,
        t_active: Some(t),
        zeta: None,
        s_meas: s,
        agg_snr: t as f64 * harmonic_snr(sa, s),
    };
    let dec_row = |v: f64, z: f64, s: f64| StructureRow {
        v,
        t_active: None,
        zeta: Some(z),
        s_meas: s,
        agg_snr: 0.0,
    };
    match scheme {
        Scheme::CoordMp | Scheme::Scmp => v_grid
            .iter()
            .map(|&v| {
                let d = coord_mp(v, lambda, params, &[])?.most_likely();
                Ok(coord_row(v, d.t_active, d.s_meas))
            })
            .collect(),
        Scheme::DecMp | Scheme::Sdmp => v_grid
            .par_iter()
            .map(|&v| {
                let d = dec_mp(v, lambda, params, solver)?;
                Ok(dec_row(v, d.zeta, d.s_meas))
            })
            .collect(),
        Scheme::CoordDp | Scheme::DecDp => {
            let table = if scheme == Scheme::CoordDp {
                coord_dp(lambda, params, grid)?
            } else {
                dec_dp(lambda, params, grid)?
            };
            Ok(v_grid
                .iter()
                .map(|&v| match table.policy_at(v) {
                    DpAction::Coord { t_active, s_meas, .. } => coord_row(v, t_active, s_meas),
                    DpAction::Dec { zeta, s_meas } => dec_row(v, zeta, s_meas),
                })
                .collect())
        }
    }
}

/// CSV row of a performance point; the column order is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub lambda: f64,
    pub mse: f64,
    pub per_sn_cost: f64,
    pub network_cost: f64,
    pub stderr_mse: f64,
    pub stderr_cost: f64,
    pub seed: u64,
}

impl CsvRow {
    pub fn new(perf: &PerfPoint, seed: u64) -> Self {
        CsvRow {
            lambda: perf.lambda,
            mse: perf.avg_mse,
            per_sn_cost: perf.per_sn_cost,
            network_cost: perf.network_cost,
            stderr_mse: perf.stderr_mse,
            stderr_cost: perf.stderr_cost,
            seed,
        }
    }
}

/// JSON metadata written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub config: SimConfig,
    /// How accuracy states are initialised.
    pub gamma_init: String,
}

impl RunMetadata {
    pub fn new(config: &SimConfig) -> Self {
        RunMetadata {
            version: VERSION.to_string(),
            config: config.clone(),
            gamma_init: "stationary".to_string(),
        }
    }
}
