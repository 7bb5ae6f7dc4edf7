//! Myopic sensing-transmission policies for distributed Kalman estimation
//! over a collision-prone wireless sensor network with fusion-center
//! quality feedback.
//!
//! The crate is organised bottom-up:
//!
//! * [`kalman`]: scalar Gauss-Markov process, local SNR model and the
//!   fusion-center Kalman recursions.
//! * [`coordinated`]: closed-form coordinated myopic policy, the
//!   transmission-period analysis for infinite ambient SNR and the
//!   minimal-cost SN allocation.
//! * [`decentralized`]: the random-access myopic cost, its stationarity
//!   conditions and the alternating bisection solver.
//! * [`dp`]: grid-based finite-horizon dynamic programming baselines.
//! * [`gamma`]: Markov accuracy-state chains and the sub-optimal
//!   SCMP/SDMP policies.
//! * [`sim`]: Monte-Carlo simulator, lambda sweeps and policy structure
//!   tables.

pub mod coordinated;
pub mod decentralized;
pub mod dp;
mod error;
pub mod gamma;
pub mod kalman;
mod params;
pub mod sim;

pub use error::{Error, Result};
pub use params::{ModelParams, PerfPoint};
