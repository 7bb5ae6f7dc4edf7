//! Markov accuracy states and the policies built on them.
//!
//! Each SN observes the process through a gain `gamma` that follows a
//! finite Markov chain with best state `gamma_max = 1`. SCMP drives the
//! coordinated policy with a virtual variance process computed as if every
//! measurement were taken at `gamma_max` and activates the best-ranked SNs.
//! SDMP turns the decentralized activation level into a threshold rule on
//! `gamma` with the same marginal activation probability.

use serde::{Deserialize, Serialize};

use crate::coordinated::{coord_mp, CoordDecision};
use crate::decentralized::{dec_mp, DecDecision, SolverConfig};
use crate::kalman::{nu, posterior_variance};
use crate::{Error, ModelParams, Result};

const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 100_000;

/// Serialised form of a chain: states and row-stochastic transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub states: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

/// Validated accuracy-state chain with its stationary distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainSpec", into = "ChainSpec")]
pub struct AccuracyChain {
    states: Vec<f64>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl TryFrom<ChainSpec> for AccuracyChain {
    type Error = Error;
    fn try_from(spec: ChainSpec) -> Result<Self> {
        AccuracyChain::new(spec.states, spec.transition)
    }
}

impl From<AccuracyChain> for ChainSpec {
    fn from(c: AccuracyChain) -> Self {
        ChainSpec {
            states: c.states,
            transition: c.transition,
        }
    }
}

impl AccuracyChain {
    pub fn new(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Config("chain needs at least one state".into()));
        }
        if states.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
            return Err(Error::Config(format!("accuracy states must lie in (0,1]: {states:?}")));
        }
        if !states.contains(&1.0) {
            return Err(Error::Config("accuracy states must include gamma_max = 1".into()));
        }
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("transition matrix must be {n}x{n}")));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Config(format!("row {i} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("row {i} sums to {s}, not 1")));
            }
        }
        let stationary = stationary_dist(&transition)?;
        let chain = AccuracyChain {
            states,
            transition,
            stationary,
        };
        if chain.stationary[chain.best_index()] <= 1e-9 {
            return Err(Error::Config("stationary mass of gamma_max must be positive".into()));
        }
        Ok(chain)
    }

    /// Degenerate chain that always sits at `gamma_max`.
    pub fn best() -> Self {
        AccuracyChain::new(vec![1.0], vec![vec![1.0]]).expect("valid")
    }

    /// i.i.d. states drawn from `probs` every slot.
    pub fn iid(states: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let rows = vec![probs; states.len()];
        AccuracyChain::new(states, rows)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn best_index(&self) -> usize {
        self.states.iter().position(|&g| g == 1.0).expect("validated")
    }

    pub fn pi_max(&self) -> f64 {
        self.stationary[self.best_index()]
    }

    /// Next state index from `from` given a uniform draw `u`.
    pub fn next_state(&self, from: usize, u: f64) -> usize {
        sample_index(&self.transition[from], u)
    }

    /// State index drawn from the stationary distribution.
    pub fn sample_stationary(&self, u: f64) -> usize {
        sample_index(&self.stationary, u)
    }
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the last cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Stationary distribution by power iteration on `(P + I) / 2`, which has
/// the same fixed point and also converges for periodic chains.
pub fn stationary_dist(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = vec![0.0; n];
        for (i, row) in transition.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let mut diff = 0.0;
        for j in 0..n {
            next[j] = 0.5 * (next[j] + pi[j]);
            diff += (next[j] - pi[j]).abs();
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        pi = next;
        if diff < STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence {
        solver: "stationary_dist",
        iterations: STATIONARY_MAX_ITER,
    })
}

/// SN indices sorted by decreasing accuracy, ties by index.
pub fn rank_by_gamma(gammas: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gammas.len()).collect();
    idx.sort_by(|&a, &b| gammas[b].total_cmp(&gammas[a]).then(a.cmp(&b)));
    idx
}

/// One SCMP scheduling decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmpStep {
    pub decision: CoordDecision,
    /// Scheduled SNs, best accuracy first.
    pub active: Vec<usize>,
    /// Virtual prior variance for the next slot.
    pub next_virtual_prior: f64,
}

/// SCMP: apply the coordinated policy to the virtual best-accuracy variance
/// and schedule the `t` most accurate SNs. `u` resolves threshold ties.
pub fn scmp_step(
    virtual_prior: f64,
    gammas: &[f64],
    lambda: f64,
    params: &ModelParams,
    tie_probs: &[f64],
    u: f64,
) -> Result<ScmpStep> {
    if gammas.len() != params.num_sns {
        return Err(Error::domain(
            "scmp_step",
            format!("expected {} accuracy states, got {}", params.num_sns, gammas.len()),
        ));
    }
    let decision = coord_mp(virtual_prior, lambda, params, tie_probs)?.sample(u);
    let active: Vec<usize> = rank_by_gamma(gammas).into_iter().take(decision.t_active).collect();
    let post = posterior_variance(virtual_prior, decision.agg_snr(params.s_ambient));
    Ok(ScmpStep {
        decision,
        active,
        next_virtual_prior: nu(post, params.alpha),
    })
}

/// SDMP activation rule for one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdmpParams {
    pub gamma_th: f64,
    /// Activation probability for each chain state, aligned with `states()`.
    pub q_of_gamma: Vec<f64>,
    pub decision: DecDecision,
}

/// Threshold rule whose stationary marginal activation matches `decision`.
pub fn sdmp_from_decision(decision: DecDecision, params: &ModelParams, chain: &AccuracyChain) -> Result<SdmpParams> {
    let target = params.channels as f64 * decision.zeta / params.num_sns as f64;
    if target > 1.0 + 1e-12 {
        return Err(Error::domain(
            "sdmp_params",
            format!("B zeta / N_S = {target} > 1: marginal activation infeasible"),
        ));
    }
    let target = target.min(1.0);
    let states = chain.states();
    let pi = chain.stationary();
    let mut q = vec![0.0; states.len()];
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| states[b].total_cmp(&states[a]));
    let mut above = 0.0;
    let mut gamma_th = states[order[0]];
    for &i in &order {
        if above + pi[i] >= target {
            gamma_th = states[i];
            q[i] = if pi[i] > 0.0 { ((target - above) / pi[i]).clamp(0.0, 1.0) } else { 0.0 };
            break;
        }
        q[i] = 1.0;
        above += pi[i];
        gamma_th = states[i];
    }
    Ok(SdmpParams {
        gamma_th,
        q_of_gamma: q,
        decision,
    })
}

/// SDMP at prior variance `prior_var`.
pub fn sdmp_params(
    prior_var: f64,
    lambda: f64,
    params: &ModelParams,
    chain: &AccuracyChain,
    config: &SolverConfig,
) -> Result<SdmpParams> {
    let d = dec_mp(prior_var, lambda, params, config)?;
    sdmp_from_decision(d, params, chain)
}

/// Upper bound on the MSE loss of SCMP against the best-accuracy scenario.
pub fn mse_gap_bound(n_s: usize, b: usize, pi_max: f64, alpha: f64) -> Result<f64> {
    if !(pi_max > 0.0 && pi_max < 1.0) {
        return Err(Error::domain("mse_gap_bound", format!("pi_max = {pi_max} outside (0,1)")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain("mse_gap_bound", format!("alpha = {alpha} outside [0,1)")));
    }
    let m = n_s as f64 * pi_max;
    if m < (b as f64 - 1.0) {
        return Err(Error::domain(
            "mse_gap_bound",
            format!("need N_S >= (B-1)/pi_max, got N_S = {n_s}"),
        ));
    }
    let d = m - b as f64 + 1.0;
    Ok((-d * d / (2.0 * m)).exp() / (1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stationary_examples() {
        let pi = stationary_dist(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        assert_eq!(stationary_dist(&[vec![1.0]]).unwrap(), vec![1.0]);
        let pi = stationary_dist(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-10 && (pi[1] - 1.0 / 3.0).abs() < 1e-10);
        // Periodic chain still converges.
        let pi = stationary_dist(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reducible_chain_errors_or_is_rejected() {
        // Two absorbing classes: the fixed point depends on the start, and
        // gamma_max may carry no mass.
        let r = AccuracyChain::new(vec![1.0, 0.5], vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert!(r.is_err());
        assert!(AccuracyChain::new(vec![0.5], vec![vec![1.0]]).is_err());
        assert!(AccuracyChain::new(vec![1.0, 0.5], vec![vec![0.7, 0.2], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn chain_json_roundtrip() {
        let c = AccuracyChain::new(vec![0.4, 1.0], vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: AccuracyChain = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<AccuracyChain>(r#"{"states":[1.0],"transition":[[0.5]]}"#).is_err());
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_by_gamma(&[0.3, 1.0, 0.7]), vec![1, 2, 0]);
        assert_eq!(rank_by_gamma(&[1.0, 0.5, 1.0]), vec![0, 2, 1]);
        let p = ModelParams {
            num_sns: 3,
            channels: 2,
            ..ModelParams::default()
        };
        // V = 1 at a small lambda activates both channels.
        let step = scmp_step(1.0, &[0.3, 1.0, 0.7], 0.005, &p, &[], 0.0).unwrap();
        assert_eq!(step.decision.t_active, 2);
        let mut a = step.active.clone();
        a.sort();
        assert_eq!(a, vec![1, 2]);
    }

    #[test]
    fn scmp_virtual_process_is_best_gamma_trajectory() {
        let p = ModelParams::default();
        let lam = 0.05;
        let gammas = vec![1.0; 20];
        let mut v = 1.0;
        let mut w = 1.0;
        for _ in 0..200 {
            let s = scmp_step(v, &gammas, lam, &p, &[], 0.0).unwrap();
            let d = coord_mp(w, lam, &p, &[]).unwrap().sample(0.0);
            assert_eq!(s.decision, d);
            w = nu(posterior_variance(w, d.agg_snr(20.0)), 0.96);
            v = s.next_virtual_prior;
            assert_eq!(v, w);
        }
    }

    #[test]
    fn sdmp_examples() {
        let c = AccuracyChain::iid(vec![0.2, 0.6, 1.0], vec![0.5, 0.3, 0.2]).unwrap();
        let p = ModelParams {
            num_sns: 100,
            channels: 5,
            ..ModelParams::default()
        };
        let d = |zeta: f64| DecDecision {
            zeta,
            s_meas: 1.0,
            per_sn_prob: 5.0 * zeta / 100.0,
        };
        // B zeta / N_S = 0.35
        let s = sdmp_from_decision(d(7.0), &p, &c).unwrap();
        assert_eq!(s.gamma_th, 0.6);
        assert!((s.q_of_gamma[1] - 0.5).abs() < 1e-12);
        assert_eq!(s.q_of_gamma[2], 1.0);
        assert_eq!(s.q_of_gamma[0], 0.0);
        // Below pi(gamma_max).
        let s = sdmp_from_decision(d(2.0), &p, &c).unwrap();
        assert_eq!(s.gamma_th, 1.0);
        assert!((s.q_of_gamma[2] - 0.1 / 0.2).abs() < 1e-12);
        let s = sdmp_from_decision(d(0.0), &p, &c).unwrap();
        assert!(s.q_of_gamma.iter().all(|&q| q == 0.0));
        assert!(sdmp_from_decision(d(30.0), &p, &c).is_err());
    }

    #[test]
    fn gap_bound_examples() {
        let a = mse_gap_bound(20, 5, 0.5, 0.96).unwrap();
        assert!((a - (-36.0f64 / 20.0).exp() / 0.04).abs() < 1e-12);
        assert!((a - 4.13).abs() < 0.01);
        let b = mse_gap_bound(100, 5, 0.5, 0.96).unwrap();
        assert!((b - (-2116.0f64 / 100.0).exp() / 0.04).abs() < 1e-20);
        assert!((b / 1.6e-8 - 1.0).abs() < 0.05);
        assert!(mse_gap_bound(1_000_000, 5, 0.5, 0.96).unwrap() < 1e-100);
        assert!(mse_gap_bound(2, 5, 0.5, 0.96).is_err());
        assert!(mse_gap_bound(20, 5, 1.0, 0.96).is_err());
    }

    fn arb_chain() -> impl Strategy<Value = AccuracyChain> {
        (2usize..6).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.05f64..1.0, n - 1),
                proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, n), n),
            )
                .prop_map(|(mut states, rows)| {
                    states.push(1.0);
                    let rows = rows
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            r.into_iter().map(|x| x / s).collect()
                        })
                        .collect();
                    AccuracyChain::new(states, rows).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn stationary_is_fixed_point(c in arb_chain()) {
            let pi = c.stationary();
            let n = pi.len();
            for j in 0..n {
                let pj: f64 = (0..n).map(|i| pi[i] * c.transition()[i][j]).sum();
                prop_assert!((pj - pi[j]).abs() < 1e-10);
            }
            prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sdmp_marginal_identity(c in arb_chain(), frac in 0.0f64..1.0) {
            let p = ModelParams { num_sns: 50, channels: 5, ..ModelParams::default() };
            let zeta = frac * 10.0;
            let d = DecDecision { zeta, s_meas: 1.0, per_sn_prob: 0.1 * zeta };
            let s = sdmp_from_decision(d, &p, &c).unwrap();
            let m: f64 = s.q_of_gamma.iter().zip(c.stationary()).map(|(q, pi)| q * pi).sum();
            prop_assert!((m * 50.0 / 5.0 - zeta).abs() < 1e-12);
            for (g, q) in c.states().iter().zip(&s.q_of_gamma) {
                if *g > s.gamma_th { prop_assert_eq!(*q, 1.0); }
                if *g < s.gamma_th { prop_assert_eq!(*q, 0.0); }
            }
        }
    }
}
