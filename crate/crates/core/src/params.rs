use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Physical and cost constants of the network.
///
/// The process power is normalised to one, so the innovation variance is
/// `1 - alpha`. An infinite ambient SNR is represented by `f64::INFINITY`
/// and serialised as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Time-correlation of the Gauss-Markov process, in `[0, 1)`.
    pub alpha: f64,
    /// Local ambient SNR `S_A`.
    #[serde(serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub s_ambient: f64,
    /// Transmission cost per activation.
    pub c_tx: f64,
    /// Unitary sensing cost (cost per unit of measurement SNR).
    pub phi: f64,
    /// Number of orthogonal channels `B`.
    pub channels: usize,
    /// Number of sensor nodes `N_S`.
    pub num_sns: usize,
}

impl Default for ModelParams {
    /// The reference operating point: `c_TX = 1`, `S_A = 20`, `phi = 0.25`,
    /// `alpha = 0.96`, `B = 5`, `N_S = 20`.
    fn default() -> Self {
        ModelParams {
            alpha: 0.96,
            s_ambient: 20.0,
            c_tx: 1.0,
            phi: 0.25,
            channels: 5,
            num_sns: 20,
        }
    }
}

impl ModelParams {
    /// Builds parameters from the normalised sensing cost `theta = phi / c_tx`.
    pub fn with_theta(alpha: f64, s_ambient: f64, theta: f64, channels: usize, num_sns: usize) -> Self {
        ModelParams {
            alpha,
            s_ambient,
            c_tx: 1.0,
            phi: theta,
            channels,
            num_sns,
        }
    }

    pub fn sigma_z2(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Normalised unitary sensing cost `phi / c_tx`.
    pub fn theta(&self) -> f64 {
        self.phi / self.c_tx
    }

    pub fn sa_infinite(&self) -> bool {
        self.s_ambient.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0,1), got {}", self.alpha)));
        }
        if self.s_ambient.is_nan() || self.s_ambient <= 0.0 {
            return Err(Error::Config(format!("s_ambient must be > 0, got {}", self.s_ambient)));
        }
        if !(self.c_tx > 0.0 && self.c_tx.is_finite()) {
            return Err(Error::Config(format!("c_tx must be finite and > 0, got {}", self.c_tx)));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::Config(format!("phi must be finite and >= 0, got {}", self.phi)));
        }
        if self.channels == 0 || self.channels > 64 {
            return Err(Error::Config(format!("channels must be in 1..=64, got {}", self.channels)));
        }
        if self.num_sns < self.channels {
            return Err(Error::Config(format!(
                "num_sns ({}) must be >= channels ({})",
                self.num_sns, self.channels
            )));
        }
        Ok(())
    }
}

fn ser_snr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
        Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
    }
}

/// Long-run performance of a policy at one value of the Lagrange multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfPoint {
    pub lambda: f64,
    /// Long-run average posterior variance.
    pub avg_mse: f64,
    /// Average sensing-transmission cost of one SN (mean over SNs).
    pub per_sn_cost: f64,
    /// Sum over SNs of their average cost.
    pub network_cost: f64,
    pub stderr_mse: f64,
    pub stderr_cost: f64,
    /// Number of simulated slots per replica; zero for closed-form points.
    pub slots: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = ModelParams::default();
        p.validate().unwrap();
        assert!((p.sigma_z2() - 0.04).abs() < 1e-15);
        assert_eq!(p.theta(), 0.25);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = ModelParams::default();
        p.alpha = 1.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::default();
        p.num_sns = 3;
        assert!(p.validate().is_err());
        let mut p = ModelParams::default();
        p.c_tx = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn infinite_ambient_snr_roundtrips_through_json() {
        let mut p = ModelParams::default();
        p.s_ambient = f64::INFINITY;
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"inf\""));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert!(back.s_ambient.is_infinite());
    }

    #[test]
    fn unknown_keys_rejected() {
        let s = r#"{"alpha":0.9,"s_ambient":20,"c_tx":1,"phi":0.1,"channels":2,"num_sns":4,"bogus":1}"#;
        assert!(serde_json::from_str::<ModelParams>(s).is_err());
    }
}
