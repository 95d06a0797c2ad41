//! Sampler update, velocity caching, and the full-compute baseline sweep.

use crate::error::{Error, Result};
use crate::grid::DiffusionGrid;
use crate::model::BranchModel;
use crate::rollout::ContextRecord;
use crate::types::{Decision, Latent};

/// Last computed velocity for one branch.
///
/// Invalidated at the start of every rollout step; a skip may only execute
/// while the cache holds a value.
#[derive(Debug, Clone, Default)]
pub struct VelocityCache {
    cached: Option<Vec<f64>>,
}

impl VelocityCache {
    pub fn new() -> Self {
        VelocityCache::default()
    }

    pub fn store(&mut self, velocity: Vec<f64>) {
        self.cached = Some(velocity);
    }

    pub fn velocity(&self) -> Option<&[f64]> {
        self.cached.as_deref()
    }

    pub fn is_valid(&self) -> bool {
        self.cached.is_some()
    }

    pub fn invalidate(&mut self) {
        self.cached = None;
    }
}

/// Forward Euler update on the descending grid:
/// `x_{k-1} = x_k + (tau_prev - tau_k) * velocity`.
pub fn psi_update(x: &Latent, tau_k: f64, tau_prev: f64, velocity: &[f64]) -> Result<Latent> {
    if tau_prev >= tau_k {
        return Err(Error::invalid_argument(format!(
            "descending traversal requires tau_prev < tau_k, got {tau_prev} >= {tau_k}"
        )));
    }
    if velocity.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: velocity.len(),
        });
    }
    if x.k == 0 {
        return Err(Error::invalid_argument("latent is already at k = 0"));
    }
    let dt = tau_prev - tau_k;
    let values = x
        .values
        .iter()
        .zip(velocity)
        .map(|(xi, vi)| xi + dt * vi)
        .collect();
    Ok(Latent::new(values, x.branch, x.k - 1))
}

/// Executes one diffusion step for one branch.
///
/// A compute evaluates the model and refreshes the cache; a skip reuses the
/// cached velocity verbatim. Returns the advanced latent and the velocity
/// that drove the update.
pub fn step(
    x: &Latent,
    k: usize,
    decision: Decision,
    model: &dyn BranchModel,
    cache: &mut VelocityCache,
    grid: &DiffusionGrid,
    ctx: &ContextRecord,
) -> Result<(Latent, Vec<f64>)> {
    if k == 0 || k > grid.num_steps() {
        return Err(Error::invalid_argument(format!(
            "step index {k} outside 1..={}",
            grid.num_steps()
        )));
    }
    if x.k != k {
        return Err(Error::invalid_argument(format!(
            "latent is at k = {}, expected {k}",
            x.k
        )));
    }
    let tau_k = grid.tau(k);
    let tau_prev = grid.tau(k - 1);
    let velocity = match decision {
        Decision::Compute => {
            let v = model.evaluate(x, tau_k, ctx);
            cache.store(v.clone());
            v
        }
        Decision::Skip => cache
            .velocity()
            .ok_or(Error::SkipWithoutCache(x.branch))?
            .to_vec(),
    };
    let next = psi_update(x, tau_k, tau_prev, &velocity)?;
    Ok((next, velocity))
}

/// Full-compute baseline: evaluates the model at every step and returns the
/// final latent. This is the oracle adaptive runs are compared against.
pub fn sample_branch_full(
    model: &dyn BranchModel,
    grid: &DiffusionGrid,
    x_init: Latent,
    ctx: &ContextRecord,
) -> Result<Latent> {
    let mut cache = VelocityCache::new();
    let mut x = x_init;
    for k in (1..=grid.num_steps()).rev() {
        let (next, _) = step(&x, k, Decision::Compute, model, &mut cache, grid, ctx)?;
        x = next;
    }
    Ok(x)
}
