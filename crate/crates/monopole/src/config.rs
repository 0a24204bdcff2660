//! Run-time numerical settings shared by the library and the CLI.

use serde::Serialize;

use crate::error::{MonopoleError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    /// Truncation tolerance of theta series.
    pub tol_theta: f64,
    /// Local error tolerance of the gauge-flow integrator.
    pub tol_ode: f64,
    /// Spatial finite-difference step (scaled by `max(1, r)`).
    pub fd_step: f64,
    /// Standoff from the poles at `z = ±1`.
    pub delta: f64,
    /// Gauss–Legendre nodes on `[−1, 1]`.
    pub z_nodes: usize,
    /// Worker threads; `None` lets the pool decide.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { tol_theta: 1e-10, tol_ode: 1e-9, fd_step: 1e-3, delta: 1e-3, z_nodes: 256, jobs: None }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("tol-theta", self.tol_theta), ("tol-ode", self.tol_ode), ("fd-step", self.fd_step), ("delta", self.delta)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MonopoleError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.delta * 4.0 >= 0.1 {
            return Err(MonopoleError::InvalidInput("delta must be below 0.025".into()));
        }
        if self.z_nodes < 16 {
            return Err(MonopoleError::InvalidInput(format!("z-nodes must be at least 16, got {}", self.z_nodes)));
        }
        if self.jobs == Some(0) {
            return Err(MonopoleError::InvalidInput("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            RunConfig { tol_ode: 0.0, ..Default::default() },
            RunConfig { z_nodes: 8, ..Default::default() },
            RunConfig { delta: 0.05, ..Default::default() },
            RunConfig { fd_step: f64::NAN, ..Default::default() },
            RunConfig { jobs: Some(0), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
