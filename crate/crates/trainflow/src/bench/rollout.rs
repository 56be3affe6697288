//! Long-horizon iteration of a learned operator, with divergence detection.

use crate::error::{Error, Result};
use crate::matcore::{Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// x ← Â·x
    Discrete,
    /// x ← (I + Â·Δt)·x
    ContinuousEuler,
}

#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub step: usize,
    pub norm: f64,
}

/// Iterates the operator from `x0` for up to `steps` steps. Returns the
/// per-step state norms and whether the trajectory exceeded
/// `bound · ‖x0‖`; divergence is a result, not an error, and stops the
/// rollout early.
pub fn rollout(
    a_hat: &Mat,
    x0: &Vector,
    steps: usize,
    mode: RolloutMode,
    dt: Option<f64>,
    bound: f64,
) -> Result<(Vec<RolloutStep>, bool)> {
    if !bound.is_finite() || bound <= 0.0 {
        return Err(Error::Config(format!("bound must be positive, got {bound}")));
    }
    let n = a_hat.nrows();
    if a_hat.ncols() != n {
        return Err(Error::NonSquare {
            context: "rollout",
            rows: a_hat.nrows(),
            cols: a_hat.ncols(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "rollout",
            details: format!("operator is {n}x{n} but state has {} entries", x0.len()),
        });
    }
    let step_map = match mode {
        RolloutMode::Discrete => a_hat.clone(),
        RolloutMode::ContinuousEuler => {
            let dt = dt.ok_or_else(|| {
                Error::Config("continuous_euler rollout requires dt".into())
            })?;
            if !dt.is_finite() || dt <= 0.0 {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
            Mat::identity(n, n) + a_hat * dt
        }
    };

    let limit = bound * x0.norm();
    let mut state = x0.clone();
    let mut trajectory = vec![RolloutStep {
        step: 0,
        norm: state.norm(),
    }];
    let mut diverged = false;
    for step in 1..=steps {
        state = &step_map * state;
        let norm = state.norm();
        trajectory.push(RolloutStep { step, norm });
        if !norm.is_finite() || norm > limit {
            diverged = true;
            break;
        }
    }
    Ok((trajectory, diverged))
}
