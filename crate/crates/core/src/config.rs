use serde::{Deserialize, Serialize};

use crate::densities;
use crate::error::{Result, TdError};

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Parameters that pin down one counter-example: the ray-slope exponent,
/// the density amplitude and the numerical tolerances used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub gamma: f64,
    pub beta: f64,
    pub quad_tol: f64,
    pub root_tol: f64,
}

impl GammaConfig {
    /// Default tolerances and the conservative amplitude from [`densities::choose_beta`].
    pub fn new(gamma: f64) -> Result<Self> {
        let mut cfg = Self::with_beta(gamma, 0.0)?;
        cfg.beta = densities::choose_beta(&cfg);
        Ok(cfg)
    }

    pub fn with_beta(gamma: f64, beta: f64) -> Result<Self> {
        let cfg = GammaConfig {
            gamma,
            beta,
            quad_tol: DEFAULT_QUAD_TOL,
            root_tol: DEFAULT_ROOT_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tolerances(mut self, quad_tol: f64, root_tol: f64) -> Result<Self> {
        self.quad_tol = quad_tol;
        self.root_tol = root_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(TdError::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(TdError::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        for (name, v) in [("quad_tol", self.quad_tol), ("root_tol", self.root_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(TdError::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}
