//! Price-process parameterisations and their exact simulation.

mod garch;
mod ou;
mod regime;
mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use garch::{GarchJumpParams, JumpParams};
pub use ou::{ar1_to_ou, ou_mean_var, ou_step_exact, OUParams};
pub use regime::{
    markov_stationary, sample_next_regime, ArRegime, MsArParams, RegimeModel, TransitionMatrix,
};
pub use sim::{
    path_rng, simulate, simulate_garch_jump, simulate_mrsm_ou, simulate_ou_jump, PathBatch,
    SimState,
};
pub(crate) use sim::Stepper;

/// A calibrated price model. Serialised with a `model_type` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum ModelSpec {
    Ou { ou: OUParams },
    OuJump { ou: OUParams, jumps: JumpParams },
    GarchJump { garch: GarchJumpParams },
    MrsmOu { regimes: RegimeModel },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ou { .. } => "ou",
            ModelSpec::OuJump { .. } => "ou_jump",
            ModelSpec::GarchJump { .. } => "garch_jump",
            ModelSpec::MrsmOu { .. } => "mrsm_ou",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Ou { ou } => ou.validate(),
            ModelSpec::OuJump { ou, jumps } => {
                ou.validate()?;
                jumps.validate()
            }
            ModelSpec::GarchJump { garch } => garch.validate(),
            ModelSpec::MrsmOu { regimes } => regimes.validate(),
        }
    }

    pub fn is_regime_switching(&self) -> bool {
        matches!(self, ModelSpec::MrsmOu { .. })
    }

    fn units(&self) -> BTreeMap<&'static str, &'static str> {
        let mut u = BTreeMap::from([("time", "year"), ("price", "currency/MWh")]);
        match self {
            ModelSpec::Ou { .. } | ModelSpec::OuJump { .. } | ModelSpec::MrsmOu { .. } => {
                u.insert("kappa", "1/year");
                u.insert("theta", "currency/MWh");
                u.insert("sigma", "currency/MWh/sqrt(year)");
            }
            ModelSpec::GarchJump { .. } => {
                u.insert("mu", "currency/MWh");
                u.insert("omega", "(currency/MWh)^2 per step");
                u.insert("rho", "per step");
            }
        }
        if matches!(self, ModelSpec::OuJump { .. } | ModelSpec::GarchJump { .. }) {
            u.insert("lambda", "1/year");
            u.insert("mu_y", "currency/MWh");
            u.insert("sigma_y", "currency/MWh");
        }
        if let ModelSpec::MrsmOu { .. } = self {
            u.insert("transition", "probability per transition_dt");
            u.insert("transition_dt", "year");
        }
        u
    }

    /// JSON document with a `units` block.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v.as_object_mut()
            .expect("tagged enum serialises to an object")
            .insert("units".into(), serde_json::to_value(self.units())?);
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text)?;
        if let Some(obj) = v.as_object_mut() {
            if let Some(units) = obj.remove("units") {
                if let Some(t) = units.get("time").and_then(|t| t.as_str()) {
                    if t != "year" {
                        return Err(Error::Config(format!("unsupported time unit `{t}`")));
                    }
                }
            }
        }
        let m: ModelSpec = serde_json::from_value(v)?;
        m.validate()?;
        Ok(m)
    }

    /// Short content hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Model-implied `E[S_t]`.
    ///
    /// OU families use the exact transition mean (plus the compensated jump
    /// drift); regime models use the stationary mixture of regime means;
    /// GARCH uses the closed form of its level recursion with `dt` steps.
    pub fn expected_price(&self, s0: f64, t: f64, dt: f64) -> Result<f64> {
        Ok(match self {
            ModelSpec::Ou { ou } => ou_mean_var(ou, s0, t).0,
            ModelSpec::OuJump { ou, jumps } => {
                ou_mean_var(ou, s0, t).0
                    + jumps.lambda * jumps.mu_y * -(-ou.kappa * t).exp_m1() / ou.kappa
            }
            ModelSpec::GarchJump { garch } => {
                let n = (t / dt).round();
                let rn = garch.rho.powf(n);
                let jump_drift = garch.jumps.lambda * dt * garch.jumps.mu_y;
                garch.mu + rn * (s0 - garch.mu) + jump_drift * (1.0 - rn) / (1.0 - garch.rho)
            }
            ModelSpec::MrsmOu { regimes } => {
                let pi = markov_stationary(&regimes.transition)?;
                pi.iter()
                    .zip(&regimes.per_regime)
                    .map(|(w, p)| w * p.theta)
                    .sum()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_with_units() {
        let m = ModelSpec::MrsmOu {
            regimes: RegimeModel::new(
                vec![
                    OUParams::new(264.94, 41.89, 531.05).unwrap(),
                    OUParams::new(324.25, 115.66, 1730.65).unwrap(),
                ],
                TransitionMatrix::new(vec![vec![0.99, 0.01], vec![0.02, 0.98]]).unwrap(),
            )
            .unwrap(),
        };
        let text = m.to_json().unwrap();
        assert!(text.contains("\"model_type\": \"mrsm_ou\""));
        assert!(text.contains("\"units\""));
        assert_eq!(ModelSpec::from_json(&text).unwrap(), m);
    }

    #[test]
    fn invalid_documents_rejected() {
        let bad = r#"{"model_type":"ou","ou":{"kappa":-1.0,"theta":1.0,"sigma":1.0}}"#;
        assert!(ModelSpec::from_json(bad).is_err());
        let bad_garch = r#"{"model_type":"garch_jump","garch":{"mu":1,"omega":1,"alpha1":0.5,"beta1":0.6,
            "jumps":{"lambda":0,"mu_y":0,"sigma_y":0}}}"#;
        assert!(matches!(
            ModelSpec::from_json(bad_garch),
            Err(Error::StationarityViolated(_))
        ));
        let hours = r#"{"model_type":"ou","ou":{"kappa":1.0,"theta":1.0,"sigma":1.0},"units":{"time":"hour"}}"#;
        assert!(ModelSpec::from_json(hours).is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = ModelSpec::Ou { ou: OUParams::new(2.0, 100.0, 40.0).unwrap() };
        let b = ModelSpec::Ou { ou: OUParams::new(2.0, 100.0, 40.5).unwrap() };
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }
}
