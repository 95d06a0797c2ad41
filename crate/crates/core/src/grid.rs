//! Diffusion time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing diffusion times `tau_0 < tau_1 < ... < tau_K`.
///
/// Sampling traverses the grid descending, from index `K` down to `0`. The
/// default rectified-flow grid is uniform with `tau_0 = 0` and `tau_K = 1`,
/// but any strictly increasing sequence is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionGrid {
    taus: Vec<f64>,
}

impl DiffusionGrid {
    /// Uniform grid with `tau_j = j / K`.
    pub fn uniform(num_steps: usize) -> Result<Self> {
        if num_steps == 0 {
            return Err(Error::invalid_argument("grid needs at least one step"));
        }
        let taus = (0..=num_steps)
            .map(|j| j as f64 / num_steps as f64)
            .collect();
        Ok(DiffusionGrid { taus })
    }

    /// Grid from explicit times; must be strictly increasing, finite, and
    /// hold at least two entries.
    pub fn from_times(taus: Vec<f64>) -> Result<Self> {
        if taus.len() < 2 {
            return Err(Error::invalid_argument("grid needs at least two times"));
        }
        if taus.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid_argument("grid times must be finite"));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid_argument(
                "grid times must be strictly increasing",
            ));
        }
        Ok(DiffusionGrid { taus })
    }

    /// Number of sampler steps `K` (one less than the number of grid times).
    pub fn num_steps(&self) -> usize {
        self.taus.len() - 1
    }

    pub fn tau(&self, index: usize) -> f64 {
        self.taus[index]
    }

    pub fn times(&self) -> &[f64] {
        &self.taus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_k1_is_endpoints() {
        let g = DiffusionGrid::uniform(1).unwrap();
        assert_eq!(g.times(), &[0.0, 1.0]);
    }

    #[test]
    fn uniform_k4_spacing() {
        let g = DiffusionGrid::uniform(4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn uniform_k100_midpoint() {
        let g = DiffusionGrid::uniform(100).unwrap();
        assert_eq!(g.times().len(), 101);
        assert_eq!(g.tau(50), 0.5);
        assert_eq!(g.tau(0), 0.0);
        assert_eq!(g.tau(100), 1.0);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(DiffusionGrid::uniform(0).is_err());
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(DiffusionGrid::from_times(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(DiffusionGrid::from_times(vec![0.0, 0.6, 0.4]).is_err());
        assert!(DiffusionGrid::from_times(vec![0.4]).is_err());
    }

    #[test]
    fn custom_grid_accepted() {
        let g = DiffusionGrid::from_times(vec![0.0, 0.1, 0.4, 1.0]).unwrap();
        assert_eq!(g.num_steps(), 3);
    }
}
