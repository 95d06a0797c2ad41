//! Controller hyperparameters and config-file loading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters governing skip aggressiveness and the safety guards.
///
/// * `theta` — relative tolerance of the smoothness test; larger skips more.
/// * `warmup` — mandatory compute steps at the start of every rollout step.
/// * `c_max` — cap on consecutive skips per branch.
/// * `epsilon` — stall threshold; a compute is forced while the most recent
///   latent diff is at or below it.
/// * `gamma`, `lambda` — gains for seeding the next rollout step's warm-up
///   window and threshold from the cross-modal difficulty score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub theta: f64,
    pub warmup: u32,
    pub c_max: u32,
    pub epsilon: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            theta: 0.01,
            warmup: 3,
            c_max: 4,
            epsilon: 1e-6,
            gamma: 0.1,
            lambda: 0.5,
        }
    }
}

/// Flat key/value config file contents. Every key is optional; unknown keys
/// are a hard error so sweep-script typos fail loudly.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    theta: Option<f64>,
    warmup: Option<u32>,
    c_max: Option<u32>,
    epsilon: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
}

impl ControllerConfig {
    /// Checks every invariant against a grid of `num_steps` sampler steps and
    /// returns the config unchanged when all hold.
    pub fn validate(self, num_steps: usize) -> Result<Self> {
        if !self.theta.is_finite() || self.theta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "theta must be finite and nonnegative, got {}",
                self.theta
            )));
        }
        if self.warmup as usize > num_steps {
            return Err(Error::InvalidConfig(format!(
                "warmup {} exceeds grid steps {}",
                self.warmup, num_steps
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(self)
    }

    /// Parses a flat `key = value` file, filling unset keys from defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let base = ControllerConfig::default();
        Ok(ControllerConfig {
            theta: file.theta.unwrap_or(base.theta),
            warmup: file.warmup.unwrap_or(base.warmup),
            c_max: file.c_max.unwrap_or(base.c_max),
            epsilon: file.epsilon.unwrap_or(base.epsilon),
            gamma: file.gamma.unwrap_or(base.gamma),
            lambda: file.lambda.unwrap_or(base.lambda),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ControllerConfig::default();
        assert_eq!(cfg.theta, 0.01);
        assert_eq!(cfg.warmup, 3);
        assert_eq!(cfg.c_max, 4);
        assert_eq!(cfg.epsilon, 1e-6);
        assert!(cfg.validate(100).is_ok());
    }

    #[test]
    fn warmup_beyond_grid_rejected() {
        let cfg = ControllerConfig {
            warmup: 101,
            ..Default::default()
        };
        assert!(cfg.validate(100).is_err());
    }

    #[test]
    fn negative_theta_rejected() {
        let cfg = ControllerConfig {
            theta: -0.1,
            ..Default::default()
        };
        assert!(cfg.validate(100).is_err());
    }

    #[test]
    fn negative_gains_rejected() {
        let base = ControllerConfig::default();
        assert!(ControllerConfig {
            gamma: -1.0,
            ..base
        }
        .validate(10)
        .is_err());
        assert!(ControllerConfig {
            lambda: -1.0,
            ..base
        }
        .validate(10)
        .is_err());
        assert!(ControllerConfig {
            epsilon: -1.0,
            ..base
        }
        .validate(10)
        .is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let cfg = ControllerConfig::default();
        let once = cfg.validate(50).unwrap();
        let twice = once.validate(50).unwrap();
        assert_eq!(cfg, once);
        assert_eq!(once, twice);
    }

    #[test]
    fn parses_flat_keys() {
        let cfg = ControllerConfig::from_toml_str("theta = 0.02\nc_max = 8\n").unwrap();
        assert_eq!(cfg.theta, 0.02);
        assert_eq!(cfg.c_max, 8);
        assert_eq!(cfg.warmup, 3); // default fills the rest
    }

    #[test]
    fn unknown_key_is_hard_error() {
        assert!(ControllerConfig::from_toml_str("thetaa = 0.02\n").is_err());
    }
}
