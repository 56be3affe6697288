//! Losses, gradients, gradient-descent training, closed-form gradient-flow
//! solutions (clean and noisy, discrete and continuous time), and analytic
//! predictors for the noise-induced bias and decay rates.
//!
//! The closed forms are computed in the original coordinates: with
//! `Y = X + N`, the flow decays through `exp(-P·τ)` where `P` is the scaled
//! Gram matrix `Y·Yᵀ`, and the noise enters through a constant source term.
//! Rotating with [`crate::sysgen::to_svd_basis`] recovers the per-direction
//! picture.

use crate::error::{Error, Result};
use crate::matcore::{self, Mat};
use crate::sysgen::SnapshotData;

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    /// A checkpoint is recorded every this many steps.
    pub record_every: usize,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.steps == 0 || self.record_every == 0 {
            return Err(Error::Config(
                "steps and record_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which loss a training run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Discrete,
    ContinuousEuler,
}

/// One recorded state of a training run at pseudo-time `tau`.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub tau: f64,
    pub a_hat: Mat,
    pub loss: f64,
}

/// Result of a gradient-descent run. Checkpoints start at τ = 0 and are
/// strictly increasing in τ; the final iterate is always included.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub checkpoints: Vec<Checkpoint>,
    pub final_a_hat: Mat,
}

/// Pseudo-time argument for the closed-form flows. Infinity is handled
/// symbolically (the exponential term is dropped), never as a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Finite(f64),
    Infinity,
}

/// Mean squared error of the one-step predictor: ‖X# − Â·X‖_F² / (2mn).
pub fn loss_discrete(a_hat: &Mat, data: &SnapshotData) -> Result<f64> {
    check_operator(a_hat, data)?;
    let residual = &data.x_next - a_hat * &data.x;
    Ok(residual.norm_squared() / (2.0 * scale(data)))
}

/// Gradient of [`loss_discrete`]: −(1/mn)(X# − Â·X)Xᵀ.
pub fn grad_discrete(a_hat: &Mat, data: &SnapshotData) -> Result<Mat> {
    check_operator(a_hat, data)?;
    let residual = &data.x_next - a_hat * &data.x;
    Ok(residual * data.x.transpose() * (-1.0 / scale(data)))
}

/// Mean squared error of the forward-Euler predictor:
/// ‖X# − (I + Â·Δt)X‖_F² / (2mn).
pub fn loss_continuous_euler(a_hat: &Mat, data: &SnapshotData) -> Result<f64> {
    let dt = require_dt(data)?;
    check_operator(a_hat, data)?;
    let residual = &data.x_next - &data.x - a_hat * &data.x * dt;
    Ok(residual.norm_squared() / (2.0 * scale(data)))
}

/// Gradient of [`loss_continuous_euler`]: −(Δt/mn)(X# − X − Δt·Â·X)Xᵀ.
pub fn grad_continuous_euler(a_hat: &Mat, data: &SnapshotData) -> Result<Mat> {
    let dt = require_dt(data)?;
    check_operator(a_hat, data)?;
    let residual = &data.x_next - &data.x - a_hat * &data.x * dt;
    Ok(residual * data.x.transpose() * (-dt / scale(data)))
}

/// Mean squared error of the exact matrix-exponential predictor:
/// ‖X# − exp(Â·Δt)X‖_F² / (2mn). There is no simple expression for its
/// gradient; use [`fd_grad_exact`] as the oracle.
pub fn loss_continuous_exact(a_hat: &Mat, data: &SnapshotData) -> Result<f64> {
    let dt = require_dt(data)?;
    check_operator(a_hat, data)?;
    let propagator = matcore::matexp(&(a_hat * dt))?;
    let residual = &data.x_next - propagator * &data.x;
    Ok(residual.norm_squared() / (2.0 * scale(data)))
}

/// Central-finite-difference gradient of [`loss_continuous_exact`] with
/// step `h`, entry by entry. Validation oracle only, not a training path.
pub fn fd_grad_exact(a_hat: &Mat, data: &SnapshotData, h: f64) -> Result<Mat> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    require_dt(data)?;
    check_operator(a_hat, data)?;
    let n = a_hat.nrows();
    let mut grad = Mat::zeros(n, n);
    let mut probe = a_hat.clone();
    for i in 0..n {
        for j in 0..n {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let up = loss_continuous_exact(&probe, data)?;
            probe[(i, j)] = orig - h;
            let down = loss_continuous_exact(&probe, data)?;
            probe[(i, j)] = orig;
            grad[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Plain gradient descent from `a_hat0`. Checkpoints carry τ = step · lr.
/// Aborts with a divergence error if the loss exceeds 1e12.
pub fn gd_train(
    a_hat0: &Mat,
    data: &SnapshotData,
    config: &TrainConfig,
    loss_kind: LossKind,
) -> Result<FlowResult> {
    config.validate()?;
    check_operator(a_hat0, data)?;
    if loss_kind == LossKind::ContinuousEuler {
        require_dt(data)?;
    }
    warn_if_unstable_rate(data, config, loss_kind);

    let eval = |a: &Mat| -> Result<f64> {
        match loss_kind {
            LossKind::Discrete => loss_discrete(a, data),
            LossKind::ContinuousEuler => loss_continuous_euler(a, data),
        }
    };
    let grad = |a: &Mat| -> Result<Mat> {
        match loss_kind {
            LossKind::Discrete => grad_discrete(a, data),
            LossKind::ContinuousEuler => grad_continuous_euler(a, data),
        }
    };

    let mut a_hat = a_hat0.clone();
    let mut checkpoints = vec![Checkpoint {
        tau: 0.0,
        a_hat: a_hat.clone(),
        loss: eval(&a_hat)?,
    }];

    for step in 1..=config.steps {
        let g = grad(&a_hat)?;
        a_hat -= g * config.learning_rate;
        let loss = eval(&a_hat)?;
        if !loss.is_finite() || loss > 1e12 {
            return Err(Error::Divergence { step, loss });
        }
        if step % config.record_every == 0 || step == config.steps {
            checkpoints.push(Checkpoint {
                tau: step as f64 * config.learning_rate,
                a_hat: a_hat.clone(),
                loss,
            });
        }
    }
    Ok(FlowResult {
        checkpoints,
        final_a_hat: a_hat,
    })
}

/// Gradient descent on a quadratic is stable only while
/// lr · λ_max(curvature) < 2; warn loudly when that is violated.
fn warn_if_unstable_rate(data: &SnapshotData, config: &TrainConfig, loss_kind: LossKind) {
    let gram = &data.x * data.x.transpose() / scale(data);
    let mut lambda_max = nalgebra::linalg::SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, l| acc.max(*l));
    if loss_kind == LossKind::ContinuousEuler {
        let dt = data.dt.unwrap_or(1.0);
        lambda_max *= dt * dt;
    }
    if config.learning_rate * lambda_max >= 2.0 {
        eprintln!(
            "warning: learning rate {} violates the stability bound lr*lambda_max = {:.3} >= 2; \
             gradient descent will diverge",
            config.learning_rate,
            config.learning_rate * lambda_max
        );
    }
}

/// Closed-form clean gradient flow for the discrete loss:
/// Â(τ) = A + [Â(0) − A]·exp(−X·Xᵀ·τ/(mn)).
pub fn flow_closed_discrete(a_hat0: &Mat, a: &Mat, x: &Mat, tau: f64) -> Result<Mat> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Config(format!("tau must be >= 0, got {tau}")));
    }
    check_same_square(a_hat0, a, x)?;
    let mn = (x.nrows() * x.ncols()) as f64;
    let decay = matcore::matexp(&(x * x.transpose() * (-tau / mn)))?;
    Ok(a + (a_hat0 - a) * decay)
}

/// Closed-form noisy gradient flow for the discrete loss, in the original
/// basis. With Y = X + N and P = Y·Yᵀ/(mn):
///
/// Â(τ) = A + [Â(0) − A]·exp(−Pτ) + S·P⁻¹·[I − exp(−Pτ)],
///
/// where S = (N# − A·N)·Yᵀ/(mn). At τ = ∞ the exponential terms vanish and
/// the limit A + (N# − A·N)·Yᵀ·(Y·Yᵀ)⁻¹ no longer depends on Â(0).
pub fn flow_closed_discrete_noisy(
    a_hat0: &Mat,
    a: &Mat,
    x: &Mat,
    x_noise: &Mat,
    x_next_noise: &Mat,
    tau: Tau,
) -> Result<Mat> {
    check_same_square(a_hat0, a, x)?;
    check_noise_shapes(x, x_noise, x_next_noise)?;
    let mn = (x.nrows() * x.ncols()) as f64;
    let y = x + x_noise;
    let gram = &y * y.transpose() / mn;
    let source = (x_next_noise - a * x_noise) * y.transpose() / mn;
    noisy_flow(a_hat0, a, &gram, &source, tau)
}

/// Closed-form noisy gradient flow for the continuous-time Euler loss on
/// Euler-consistent data. The decay generator picks up a Δt² factor and the
/// source term a 1/Δt factor:
/// P = Δt²·Y·Yᵀ/(mn), S = Δt·(N# − N − Δt·A·N)·Yᵀ/(mn).
pub fn flow_closed_continuous_noisy(
    a_hat0: &Mat,
    a: &Mat,
    x: &Mat,
    x_noise: &Mat,
    x_next_noise: &Mat,
    dt: f64,
    tau: Tau,
) -> Result<Mat> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    check_same_square(a_hat0, a, x)?;
    check_noise_shapes(x, x_noise, x_next_noise)?;
    let mn = (x.nrows() * x.ncols()) as f64;
    let y = x + x_noise;
    let gram = &y * y.transpose() * (dt * dt / mn);
    let source = (x_next_noise - x_noise - a * x_noise * dt) * y.transpose() * (dt / mn);
    noisy_flow(a_hat0, a, &gram, &source, tau)
}

/// Shared solver for dE/dτ = −E·P + S with E = Â − A:
/// E(τ) = E(0)·e^{−Pτ} + S·P⁻¹·(I − e^{−Pτ}).
fn noisy_flow(a_hat0: &Mat, a: &Mat, gram: &Mat, source: &Mat, tau: Tau) -> Result<Mat> {
    let n = gram.nrows();
    let eigs = nalgebra::linalg::SymmetricEigen::new(gram.clone()).eigenvalues;
    let largest = eigs.iter().fold(0.0f64, |acc, l| acc.max(*l));
    let smallest = eigs.iter().fold(f64::INFINITY, |acc, l| acc.min(*l));
    if smallest <= 1e-12 * largest {
        return Err(Error::SingularData { smallest, largest });
    }

    // S·P⁻¹ = (P⁻¹·Sᵀ)ᵀ since P is symmetric.
    let source_over_gram = gram
        .clone()
        .lu()
        .solve(&source.transpose())
        .ok_or(Error::SingularData { smallest, largest })?
        .transpose();

    match tau {
        Tau::Infinity => Ok(a + source_over_gram),
        Tau::Finite(t) => {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Config(format!("tau must be >= 0, got {t}")));
            }
            let decay = matcore::matexp(&(gram * -t))?;
            let id = Mat::identity(n, n);
            Ok(a + (a_hat0 - a) * &decay + source_over_gram * (id - &decay))
        }
    }
}

/// Predicted per-direction factors and terms of the expected learned
/// operator under measurement noise, in the left-singular basis of the
/// clean data.
#[derive(Debug, Clone)]
pub struct BiasPrediction {
    /// σᵢ²/(σᵢ² + mσ²) on learnable directions, 0 beyond the data rank.
    pub multiplicative_factors: Vec<f64>,
    /// Additive diagonal term: zero in discrete time; in continuous time
    /// −(1/Δt)·mσ²/(σᵢ² + mσ²) on learnable directions and −1/Δt beyond.
    pub additive_diagonal: Vec<f64>,
    /// Per-direction signal-to-noise ratio σᵢ²/(mσ²); the factor equals
    /// SNRᵢ/(1 + SNRᵢ).
    pub snr: Vec<f64>,
    /// Ã·diag(factors) + diag(additive).
    pub predicted_a_tilde: Mat,
}

/// Expected learned operator under i.i.d. noise, discrete time:
/// Ẫ(∞) = Ã · diag(σᵢ²/(σᵢ² + mσ²), …, 0, …) in expectation.
pub fn predict_bias_discrete(
    a_tilde: &Mat,
    singular_values: &[f64],
    m: usize,
    sigma2: f64,
) -> Result<BiasPrediction> {
    predict_bias(a_tilde, singular_values, m, sigma2, None)
}

/// Expected learned operator under i.i.d. noise, continuous time: the same
/// multiplicative factor plus the additive −(1/Δt) diagonal term, which
/// equals exactly −1/Δt in zero-energy directions.
pub fn predict_bias_continuous(
    a_tilde: &Mat,
    singular_values: &[f64],
    m: usize,
    sigma2: f64,
    dt: f64,
) -> Result<BiasPrediction> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    predict_bias(a_tilde, singular_values, m, sigma2, Some(dt))
}

fn predict_bias(
    a_tilde: &Mat,
    singular_values: &[f64],
    m: usize,
    sigma2: f64,
    dt: Option<f64>,
) -> Result<BiasPrediction> {
    if sigma2 < 0.0 {
        return Err(Error::Config(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    matcore::check_square(a_tilde, "predict_bias")?;
    let n = a_tilde.nrows();
    let sigma_max = singular_values.iter().copied().fold(0.0, f64::max);
    let zero_threshold = 1e-12 * sigma_max;
    let noise_energy = m as f64 * sigma2;

    let mut factors = Vec::with_capacity(n);
    let mut additive = Vec::with_capacity(n);
    let mut snr = Vec::with_capacity(n);
    for i in 0..n {
        let s = singular_values.get(i).copied().unwrap_or(0.0);
        if s <= zero_threshold {
            factors.push(0.0);
            snr.push(0.0);
            additive.push(dt.map_or(0.0, |dt| -1.0 / dt));
        } else {
            let energy = s * s;
            factors.push(if noise_energy == 0.0 {
                1.0
            } else {
                energy / (energy + noise_energy)
            });
            snr.push(if noise_energy == 0.0 {
                f64::INFINITY
            } else {
                energy / noise_energy
            });
            additive.push(dt.map_or(0.0, |dt| {
                -(1.0 / dt) * noise_energy / (energy + noise_energy)
            }));
        }
    }

    let mut predicted = a_tilde * Mat::from_diagonal(&nalgebra::DVector::from_vec(factors.clone()));
    for i in 0..n {
        predicted[(i, i)] += additive[i];
    }
    Ok(BiasPrediction {
        multiplicative_factors: factors,
        additive_diagonal: additive,
        snr,
        predicted_a_tilde: predicted,
    })
}

/// Magnitude of the expected gradient-flow eigenvalue in zero-energy
/// directions under noise of variance sigma²: sigma²/n. This is the rate at
/// which noise erases the memory of the initialization there.
pub fn unlearnable_decay_rate(sigma2: f64, n: usize) -> f64 {
    debug_assert!(sigma2 >= 0.0 && n >= 1);
    sigma2 / n as f64
}

fn scale(data: &SnapshotData) -> f64 {
    (data.num_pairs() * data.state_dim()) as f64
}

fn require_dt(data: &SnapshotData) -> Result<f64> {
    data.dt.ok_or_else(|| {
        Error::Config("this operation requires continuous-time data (dt present)".into())
    })
}

fn check_operator(a_hat: &Mat, data: &SnapshotData) -> Result<()> {
    let n = data.state_dim();
    if a_hat.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "flowlab",
            details: format!("operator is {:?} but data dimension is {n}", a_hat.shape()),
        });
    }
    Ok(())
}

fn check_same_square(a_hat0: &Mat, a: &Mat, x: &Mat) -> Result<()> {
    let n = x.nrows();
    if a_hat0.shape() != (n, n) || a.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "closed-form flow",
            details: format!(
                "a_hat0 {:?}, a {:?}, data dimension {n}",
                a_hat0.shape(),
                a.shape()
            ),
        });
    }
    Ok(())
}

fn check_noise_shapes(x: &Mat, x_noise: &Mat, x_next_noise: &Mat) -> Result<()> {
    if x_noise.shape() != x.shape() || x_next_noise.shape() != x.shape() {
        return Err(Error::DimensionMismatch {
            context: "closed-form noisy flow",
            details: format!(
                "x {:?}, x_noise {:?}, x_next_noise {:?}",
                x.shape(),
                x_noise.shape(),
                x_next_noise.shape()
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::testutil::{max_abs_diff, randn};
    use crate::matcore::pinv;
    use crate::rng;
    use crate::sysgen::{self, BasisPair, NoiseStructure, SnapshotData};
    use proptest::prelude::*;

    fn discrete_data(a: &Mat, x: Mat) -> SnapshotData {
        SnapshotData::from_pairs(x.clone(), a * x, None).unwrap()
    }

    fn euler_data(a: &Mat, x: Mat, dt: f64) -> SnapshotData {
        let next = &x + a * &x * dt;
        SnapshotData::from_pairs(x, next, Some(dt)).unwrap()
    }

    /// Independent finite-difference oracle over a generic loss.
    fn fd_gradient(loss: impl Fn(&Mat) -> f64, at: &Mat, h: f64) -> Mat {
        let mut grad = Mat::zeros(at.nrows(), at.ncols());
        let mut probe = at.clone();
        for i in 0..at.nrows() {
            for j in 0..at.ncols() {
                let orig = probe[(i, j)];
                probe[(i, j)] = orig + h;
                let up = loss(&probe);
                probe[(i, j)] = orig - h;
                let down = loss(&probe);
                probe[(i, j)] = orig;
                grad[(i, j)] = (up - down) / (2.0 * h);
            }
        }
        grad
    }

    #[test]
    fn loss_zero_at_truth() {
        let a = randn(3, 3, 1) * 0.4;
        let data = discrete_data(&a, randn(3, 8, 2));
        assert!(loss_discrete(&a, &data).unwrap() < 1e-28);
    }

    #[test]
    fn loss_hand_computed() {
        // X# = X = e1 in R^2, one pair, A_hat = 0: ‖e1‖²/(2·1·2) = 0.25.
        let x = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let data = SnapshotData::from_pairs(x.clone(), x, None).unwrap();
        let loss = loss_discrete(&Mat::zeros(2, 2), &data).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_naive_sum_oracle() {
        let a_hat = randn(4, 4, 3);
        let data = discrete_data(&(randn(4, 4, 4) * 0.5), randn(4, 7, 5));
        // Entrywise double loop, no matrix algebra.
        let mut sum_sq = 0.0;
        for j in 0..data.num_pairs() {
            for i in 0..data.state_dim() {
                let mut pred = 0.0;
                for k in 0..data.state_dim() {
                    pred += a_hat[(i, k)] * data.x[(k, j)];
                }
                let diff = data.x_next[(i, j)] - pred;
                sum_sq += diff * diff;
            }
        }
        let expected = sum_sq / (2.0 * 7.0 * 4.0);
        assert!((loss_discrete(&a_hat, &data).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn grad_zero_at_stationary_point() {
        let a = randn(3, 3, 6) * 0.4;
        let data = discrete_data(&a, randn(3, 9, 7));
        assert!(grad_discrete(&a, &data).unwrap().abs().max() < 1e-14);
    }

    #[test]
    fn grad_scalar_hand_computed() {
        // n=1, m=1, x=2, x#=1, A_hat=0: gradient = -(1)(1-0)·2 = -2.
        let data = SnapshotData::from_pairs(
            Mat::from_row_slice(1, 1, &[2.0]),
            Mat::from_row_slice(1, 1, &[1.0]),
            None,
        )
        .unwrap();
        let g = grad_discrete(&Mat::zeros(1, 1), &data).unwrap();
        assert!((g[(0, 0)] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn grad_matches_clean_data_form() {
        // On clean data the gradient equals -(1/mn)(A - A_hat)XXᵀ.
        let a = randn(4, 4, 8) * 0.5;
        let a_hat = randn(4, 4, 9) * 0.5;
        let x = randn(4, 10, 10);
        let data = discrete_data(&a, x.clone());
        let g = grad_discrete(&a_hat, &data).unwrap();
        let mn = (4 * 10) as f64;
        let expected = (&a - &a_hat) * &x * x.transpose() * (-1.0 / mn);
        assert!(max_abs_diff(&g, &expected) < 1e-12);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let a_hat = randn(3, 3, 11);
        let data = discrete_data(&(randn(3, 3, 12) * 0.5), randn(3, 6, 13));
        let fd = fd_gradient(|m| loss_discrete(m, &data).unwrap(), &a_hat, 1e-5);
        let g = grad_discrete(&a_hat, &data).unwrap();
        assert!(max_abs_diff(&g, &fd) / g.norm() < 1e-6);
    }

    #[test]
    fn euler_loss_and_grad_vanish_on_consistent_data() {
        let a = randn(3, 3, 14) * 0.5;
        let data = euler_data(&a, randn(3, 8, 15), 0.05);
        assert!(loss_continuous_euler(&a, &data).unwrap() < 1e-28);
        assert!(grad_continuous_euler(&a, &data).unwrap().abs().max() < 1e-15);
    }

    #[test]
    fn euler_scalar_fixed_point() {
        // x = x# = 1, dt = 0.1, A_hat = 0: the Euler map is the identity.
        let one = Mat::from_row_slice(1, 1, &[1.0]);
        let data = SnapshotData::from_pairs(one.clone(), one, Some(0.1)).unwrap();
        assert_eq!(loss_continuous_euler(&Mat::zeros(1, 1), &data).unwrap(), 0.0);
        assert_eq!(
            grad_continuous_euler(&Mat::zeros(1, 1), &data).unwrap()[(0, 0)],
            0.0
        );
    }

    #[test]
    fn euler_grad_matches_clean_data_form() {
        // On Euler-consistent data: gradient = -(dt²/mn)(A - A_hat)XXᵀ.
        let dt = 0.05;
        let a = randn(3, 3, 16) * 0.5;
        let a_hat = randn(3, 3, 17) * 0.5;
        let x = randn(3, 9, 18);
        let data = euler_data(&a, x.clone(), dt);
        let g = grad_continuous_euler(&a_hat, &data).unwrap();
        let mn = (3 * 9) as f64;
        let expected = (&a - &a_hat) * &x * x.transpose() * (-dt * dt / mn);
        assert!(max_abs_diff(&g, &expected) < 1e-14);
    }

    #[test]
    fn euler_grad_matches_finite_differences() {
        let a_hat = randn(3, 3, 19);
        let data = euler_data(&(randn(3, 3, 20) * 0.5), randn(3, 6, 21), 0.1);
        let fd = fd_gradient(|m| loss_continuous_euler(m, &data).unwrap(), &a_hat, 1e-5);
        let g = grad_continuous_euler(&a_hat, &data).unwrap();
        assert!(max_abs_diff(&g, &fd) / g.norm() < 1e-6);
    }

    #[test]
    fn exact_loss_zero_on_exact_data() {
        let a = randn(3, 3, 22) * 0.4;
        let dt = 0.1;
        let x = randn(3, 7, 23);
        let next = crate::matcore::matexp(&(&a * dt)).unwrap() * &x;
        let data = SnapshotData::from_pairs(x, next, Some(dt)).unwrap();
        assert!(loss_continuous_exact(&a, &data).unwrap() < 1e-25);
    }

    #[test]
    fn exact_fd_gradient_matches_scalar_calculus() {
        // n=1: loss = (x# - e^{a·dt}·x)²/2, d/da = -(x# - e^{a·dt}x)·dt·e^{a·dt}·x.
        let dt = 0.2;
        let (x, x_next, a) = (1.3, 0.9, -0.4);
        let data = SnapshotData::from_pairs(
            Mat::from_row_slice(1, 1, &[x]),
            Mat::from_row_slice(1, 1, &[x_next]),
            Some(dt),
        )
        .unwrap();
        let g = fd_grad_exact(&Mat::from_row_slice(1, 1, &[a]), &data, 1e-6).unwrap();
        let analytic = -(x_next - (a * dt).exp() * x) * dt * (a * dt).exp() * x;
        assert!((g[(0, 0)] - analytic).abs() < 1e-5);
    }

    #[test]
    fn exact_and_euler_gradients_agree_as_dt_shrinks() {
        // Fixed snapshot pair, dt only enters through the loss definition:
        // the discrepancy must drop ~4x when dt halves.
        let a_hat = randn(3, 3, 24) * 0.5;
        let x = randn(3, 6, 25);
        let x_next = randn(3, 6, 26);
        let gap = |dt: f64| {
            let data = SnapshotData::from_pairs(x.clone(), x_next.clone(), Some(dt)).unwrap();
            let exact = fd_grad_exact(&a_hat, &data, 1e-6).unwrap();
            let euler = grad_continuous_euler(&a_hat, &data).unwrap();
            (exact - euler).norm()
        };
        let ratio = gap(0.02) / gap(0.01);
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gd_from_truth_stays_at_truth() {
        let a = randn(3, 3, 27) * 0.4;
        let data = discrete_data(&a, randn(3, 8, 28));
        let result = gd_train(
            &a,
            &data,
            &TrainConfig {
                learning_rate: 1e-2,
                steps: 50,
                record_every: 10,
            },
            LossKind::Discrete,
        )
        .unwrap();
        for cp in &result.checkpoints {
            assert!(max_abs_diff(&cp.a_hat, &a) < 1e-12);
        }
    }

    #[test]
    fn gd_loss_non_increasing_and_taus_strict() {
        let a = randn(4, 4, 29) * 0.4;
        let data = discrete_data(&a, randn(4, 12, 30));
        let a0 = randn(4, 4, 31) * 0.3;
        let result = gd_train(
            &a0,
            &data,
            &TrainConfig {
                learning_rate: 0.05,
                steps: 200,
                record_every: 25,
            },
            LossKind::Discrete,
        )
        .unwrap();
        for pair in result.checkpoints.windows(2) {
            assert!(pair[1].tau > pair[0].tau);
            assert!(pair[1].loss <= pair[0].loss + 1e-15);
        }
    }

    #[test]
    fn gd_freezes_zero_energy_columns() {
        let (a, basis) = sysgen::build_block_system(
            &sysgen::BlockSpec {
                n: 4,
                r: 2,
                learnable_eigenvalues: vec![
                    num_complex::Complex64::new(0.8, 0.0),
                    num_complex::Complex64::new(0.4, 0.0),
                ],
                coupling_scale: 0.3,
                complement: sysgen::ComplementSpec::Random,
            },
            32,
        )
        .unwrap();
        let data = sysgen::snapshots_with_energy(&a, &basis, &[3.0, 1.0], 16, None, 33).unwrap();
        let a0 = randn(4, 4, 34) * 0.4;
        let result = gd_train(
            &a0,
            &data,
            &TrainConfig {
                learning_rate: 0.05,
                steps: 400,
                record_every: 50,
            },
            LossKind::Discrete,
        )
        .unwrap();
        let init_tilde = sysgen::to_svd_basis(&a0, &basis).unwrap();
        for cp in &result.checkpoints {
            let tilde = sysgen::to_svd_basis(&cp.a_hat, &basis).unwrap();
            for col in 2..4 {
                let drift = (tilde.column(col) - init_tilde.column(col)).abs().max();
                assert!(drift < 1e-10, "column {col} drifted by {drift}");
            }
        }
    }

    #[test]
    fn gd_diverges_loudly_at_huge_learning_rate() {
        let a = randn(3, 3, 35) * 0.4;
        let data = discrete_data(&a, randn(3, 8, 36) * 10.0);
        let err = gd_train(
            &randn(3, 3, 37),
            &data,
            &TrainConfig {
                learning_rate: 1e4,
                steps: 500,
                record_every: 100,
            },
            LossKind::Discrete,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn closed_flow_at_zero_is_initialization() {
        let a = randn(3, 3, 38);
        let a0 = randn(3, 3, 39);
        let x = randn(3, 6, 40);
        let out = flow_closed_discrete(&a0, &a, &x, 0.0).unwrap();
        assert!(max_abs_diff(&out, &a0) < 1e-14);
    }

    #[test]
    fn closed_flow_converges_to_truth_on_full_rank_data() {
        let a = randn(3, 3, 41) * 0.4;
        let a0 = randn(3, 3, 42);
        let x = randn(3, 8, 43);
        let gram = &x * x.transpose() / 24.0;
        let min_rate = nalgebra::linalg::SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, l| acc.min(*l));
        let tau = 40.0 / min_rate;
        let out = flow_closed_discrete(&a0, &a, &x, tau).unwrap();
        assert!(max_abs_diff(&out, &a) < 1e-8);
    }

    #[test]
    fn closed_flow_scalar_hand_solution() {
        // n = m = 1, x = 1: Â(τ) = a + (â0 - a)·e^{-τ}.
        let a = Mat::from_row_slice(1, 1, &[0.7]);
        let a0 = Mat::from_row_slice(1, 1, &[-0.2]);
        let x = Mat::from_row_slice(1, 1, &[1.0]);
        for tau in [0.0, 0.5, 2.0, 10.0] {
            let out = flow_closed_discrete(&a0, &a, &x, tau).unwrap();
            let expected = 0.7 + (-0.2 - 0.7) * (-tau).exp();
            assert!((out[(0, 0)] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn gd_approaches_closed_flow_as_lr_shrinks() {
        let a = randn(4, 4, 44) * 0.4;
        let x = randn(4, 12, 45);
        let data = discrete_data(&a, x.clone());
        let a0 = randn(4, 4, 46) * 0.5;
        let tau = 1.0;
        let flow = flow_closed_discrete(&a0, &a, &x, tau).unwrap();
        let gd_error = |lr: f64| {
            let steps = (tau / lr).round() as usize;
            let result = gd_train(
                &a0,
                &data,
                &TrainConfig {
                    learning_rate: lr,
                    steps,
                    record_every: steps,
                },
                LossKind::Discrete,
            )
            .unwrap();
            (&result.final_a_hat - &flow).norm()
        };
        let ratio = gd_error(1e-2) / gd_error(5e-3);
        assert!((1.5..2.5).contains(&ratio), "first-order ratio {ratio}");
    }

    #[test]
    fn noisy_flow_reduces_to_clean_without_noise() {
        let a = randn(3, 3, 47) * 0.4;
        let a0 = randn(3, 3, 48);
        let x = randn(3, 8, 49);
        let zero = Mat::zeros(3, 8);
        let noisy = flow_closed_discrete_noisy(&a0, &a, &x, &zero, &zero, Tau::Finite(2.0)).unwrap();
        let clean = flow_closed_discrete(&a0, &a, &x, 2.0).unwrap();
        assert!(max_abs_diff(&noisy, &clean) < 1e-10);
    }

    #[test]
    fn noisy_flow_limit_without_noise_is_truth() {
        let a = randn(3, 3, 50) * 0.4;
        let x = randn(3, 8, 51);
        let zero = Mat::zeros(3, 8);
        let out =
            flow_closed_discrete_noisy(&randn(3, 3, 52), &a, &x, &zero, &zero, Tau::Infinity)
                .unwrap();
        assert!(max_abs_diff(&out, &a) < 1e-12);
    }

    #[test]
    fn noisy_flow_limit_equals_least_squares() {
        // τ = ∞ must coincide with the pseudoinverse solution on noisy data.
        let a = randn(4, 4, 53) * 0.4;
        let x = randn(4, 12, 54);
        let n_x = randn(4, 12, 55) * 0.1;
        let n_next = randn(4, 12, 56) * 0.1;
        let out = flow_closed_discrete_noisy(&randn(4, 4, 57), &a, &x, &n_x, &n_next, Tau::Infinity)
            .unwrap();
        let y = &x + &n_x;
        let y_next = &a * &x + &n_next;
        let ls = y_next * pinv(&y, 0.0).unwrap();
        assert!(max_abs_diff(&out, &ls) < 1e-8);
    }

    #[test]
    fn noisy_flow_limit_ignores_initialization() {
        let a = randn(3, 3, 58) * 0.4;
        let x = randn(3, 9, 59);
        let n_x = randn(3, 9, 60) * 0.2;
        let n_next = randn(3, 9, 61) * 0.2;
        let one = flow_closed_discrete_noisy(&randn(3, 3, 62), &a, &x, &n_x, &n_next, Tau::Infinity)
            .unwrap();
        let two = flow_closed_discrete_noisy(&randn(3, 3, 63), &a, &x, &n_x, &n_next, Tau::Infinity)
            .unwrap();
        assert!(max_abs_diff(&one, &two) < 1e-10);
    }

    #[test]
    fn noisy_flow_rejects_singular_gram() {
        // Rank-deficient clean data with zero noise: the Gram matrix is singular.
        let a = randn(3, 3, 64) * 0.4;
        let x = Mat::from_fn(3, 6, |i, j| if i == 0 { (j + 1) as f64 } else { 0.0 });
        let zero = Mat::zeros(3, 6);
        let err = flow_closed_discrete_noisy(&randn(3, 3, 65), &a, &x, &zero, &zero, Tau::Infinity)
            .unwrap_err();
        assert!(matches!(err, Error::SingularData { .. }));
    }

    #[test]
    fn continuous_noisy_flow_limit_without_noise_is_truth() {
        let a = randn(3, 3, 66) * 0.4;
        let x = randn(3, 9, 67);
        let zero = Mat::zeros(3, 9);
        let out = flow_closed_continuous_noisy(
            &randn(3, 3, 68),
            &a,
            &x,
            &zero,
            &zero,
            0.1,
            Tau::Infinity,
        )
        .unwrap();
        assert!(max_abs_diff(&out, &a) < 1e-10);
    }

    #[test]
    fn continuous_noisy_flow_matches_gd_on_euler_data() {
        let dt = 0.1;
        let a = randn(3, 3, 69) * 0.4;
        let x = randn(3, 9, 70);
        let clean = euler_data(&a, x.clone(), dt);
        let noisy = sysgen::inject_noise(&clean, 0.05, 71, NoiseStructure::Iid, None).unwrap();
        let rec = noisy.noise.as_ref().unwrap();
        let a0 = randn(3, 3, 72) * 0.3;

        let tau = 2000.0;
        let closed = flow_closed_continuous_noisy(
            &a0,
            &a,
            &x,
            &rec.x_noise,
            &rec.x_next_noise,
            dt,
            Tau::Finite(tau),
        )
        .unwrap();

        let err_at = |lr: f64| {
            let steps = (tau / lr).round() as usize;
            let result = gd_train(
                &a0,
                &noisy,
                &TrainConfig {
                    learning_rate: lr,
                    steps,
                    record_every: steps,
                },
                LossKind::ContinuousEuler,
            )
            .unwrap();
            (&result.final_a_hat - &closed).norm()
        };
        // First order in lr.
        let ratio = err_at(2.0) / err_at(1.0);
        assert!((1.5..2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn continuous_decay_rate_scales_with_dt_squared() {
        let a = randn(3, 3, 73) * 0.4;
        let x = randn(3, 9, 74);
        let zero = Mat::zeros(3, 9);
        let a0 = randn(3, 3, 75);
        let err_at = |dt: f64, tau: f64| {
            let out = flow_closed_continuous_noisy(
                &a0,
                &a,
                &x,
                &zero,
                &zero,
                dt,
                Tau::Finite(tau),
            )
            .unwrap();
            (out - &a).norm()
        };
        // Doubling dt at the same tau quadruples the exponent: the error at
        // (2dt, tau) equals the error at (dt, 4tau).
        let fast = err_at(0.2, 5.0);
        let slow = err_at(0.1, 20.0);
        assert!((fast - slow).abs() / fast < 1e-8);
    }

    #[test]
    fn bias_factors_without_noise_are_unit() {
        let a_tilde = randn(3, 3, 76);
        let p = predict_bias_discrete(&a_tilde, &[2.0, 1.0, 0.5], 10, 0.0).unwrap();
        assert_eq!(p.multiplicative_factors, vec![1.0, 1.0, 1.0]);
        assert!(max_abs_diff(&p.predicted_a_tilde, &a_tilde) < 1e-14);
    }

    #[test]
    fn bias_factor_half_at_matched_energy() {
        // σ₁² = m·σ² forces a factor of exactly 1/2.
        let a_tilde = Mat::identity(2, 2);
        let m = 25;
        let sigma2 = 0.04;
        let s1 = (m as f64 * sigma2).sqrt();
        let p = predict_bias_discrete(&a_tilde, &[s1, 0.0], m, sigma2).unwrap();
        assert!((p.multiplicative_factors[0] - 0.5).abs() < 1e-14);
        assert_eq!(p.multiplicative_factors[1], 0.0);
        assert!((p.snr[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn continuous_bias_additive_terms() {
        let a_tilde = randn(3, 3, 77);
        let m = 50;
        let sigma2 = 0.01;
        let dt = 0.1;
        let p = predict_bias_continuous(&a_tilde, &[3.0, 1.0, 0.0], m, sigma2, dt).unwrap();
        // Zero-energy direction: exactly -1/dt.
        assert_eq!(p.additive_diagonal[2], -10.0);
        let expected = -(1.0 / dt) * (m as f64 * sigma2) / (9.0 + m as f64 * sigma2);
        assert!((p.additive_diagonal[0] - expected).abs() < 1e-14);
        // sigma2 = 0 reduces to the clean prediction.
        let clean = predict_bias_continuous(&a_tilde, &[3.0, 1.0, 0.0], m, 0.0, dt).unwrap();
        assert_eq!(clean.multiplicative_factors[0], 1.0);
        assert_eq!(clean.additive_diagonal[0], 0.0);
    }

    #[test]
    fn bias_prediction_matches_monte_carlo_mean() {
        // Coarse Monte Carlo cross-check; the acceptance suite runs the
        // full-size version.
        let (a, basis) = sysgen::build_block_system(
            &sysgen::BlockSpec {
                n: 3,
                r: 2,
                learnable_eigenvalues: vec![
                    num_complex::Complex64::new(0.8, 0.0),
                    num_complex::Complex64::new(0.5, 0.0),
                ],
                coupling_scale: 0.5,
                complement: sysgen::ComplementSpec::Random,
            },
            80,
        )
        .unwrap();
        let m = 100;
        let sigma = 0.05;
        let data =
            sysgen::snapshots_with_energy(&a, &basis, &[1.5, 0.8], m, None, 81).unwrap();
        let f = crate::matcore::svd(&data.x, 0.0).unwrap();
        let data_basis = BasisPair::new(f.u.clone(), f.rank).unwrap();
        let a_tilde = sysgen::to_svd_basis(&a, &data_basis).unwrap();

        let trials = 600;
        let mut mean = Mat::zeros(3, 3);
        for t in 0..trials {
            let noisy =
                sysgen::inject_noise(&data, sigma, 1000 + t as u64, NoiseStructure::Iid, None)
                    .unwrap();
            let rec = noisy.noise.as_ref().unwrap();
            let learned = flow_closed_discrete_noisy(
                &Mat::zeros(3, 3),
                &a,
                &data.x,
                &rec.x_noise,
                &rec.x_next_noise,
                Tau::Infinity,
            )
            .unwrap();
            mean += sysgen::to_svd_basis(&learned, &data_basis).unwrap();
        }
        mean /= trials as f64;

        let predicted =
            predict_bias_discrete(&a_tilde, &f.singular_values, m, sigma * sigma).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = predicted.predicted_a_tilde[(i, j)];
                if want.abs() > 0.1 {
                    let got = mean[(i, j)];
                    assert!(
                        ((got - want) / want).abs() < 0.1,
                        "entry ({i},{j}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn decay_rate_values() {
        assert_eq!(unlearnable_decay_rate(0.0, 4), 0.0);
        assert!((unlearnable_decay_rate(0.04, 4) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn energy_ordered_convergence() {
        // With sigma1 > sigma2, the high-energy column error is strictly
        // smaller at every tau > 0 for matched initial errors.
        let n = 2;
        let a = randn(n, n, 82) * 0.4;
        let basis = BasisPair::new(rng::random_orthogonal(n, 83), n).unwrap();
        let data = sysgen::snapshots_with_energy(&a, &basis, &[5.0, 1.0], 12, None, 84).unwrap();
        let f = crate::matcore::svd(&data.x, 0.0).unwrap();
        let u = BasisPair::new(f.u.clone(), n).unwrap();
        let a_tilde = sysgen::to_svd_basis(&a, &u).unwrap();
        // Matched initial column errors in the SVD basis.
        let offset = Mat::from_element(n, n, 0.5);
        let a0 = &basis.u * Mat::zeros(n, n) + &u.u * (&a_tilde + &offset) * u.u.transpose();
        for tau in [0.05, 0.2, 1.0, 5.0] {
            let tilde =
                sysgen::to_svd_basis(&flow_closed_discrete(&a0, &a, &data.x, tau).unwrap(), &u)
                    .unwrap();
            let err0 = (tilde.column(0) - a_tilde.column(0)).norm();
            let err1 = (tilde.column(1) - a_tilde.column(1)).norm();
            assert!(err0 < err1, "tau {tau}: {err0} !< {err1}");
        }
    }

    #[test]
    fn whitening_equalizes_decay_rates() {
        let n = 2;
        let a = randn(n, n, 85) * 0.4;
        let basis = BasisPair::new(rng::random_orthogonal(n, 86), n).unwrap();
        let data = sysgen::snapshots_with_energy(&a, &basis, &[8.0, 1.0], 10, None, 87).unwrap();
        let (white, w) = sysgen::whiten(&data, 0.0).unwrap();
        let w_inv = w.clone().try_inverse().unwrap();
        let a_white = &w * &a * &w_inv;
        // Whitened Gram matrix is a multiple of the identity, so the decay
        // exp(-XXᵀτ/(mn)) acts as the same scalar on every direction.
        let gram = &white.x * white.x.transpose();
        let eigs = nalgebra::linalg::SymmetricEigen::new(gram).eigenvalues;
        assert!((eigs[0] - eigs[1]).abs() < 1e-10);
        // Both column errors shrink by the identical ratio between taus.
        let a0 = Mat::zeros(n, n);
        let errs = |tau: f64| {
            let out = flow_closed_discrete(&a0, &a_white, &white.x, tau).unwrap();
            let d = out - &a_white;
            (d.column(0).norm(), d.column(1).norm())
        };
        let (e0a, e1a) = errs(1.0);
        let (e0b, e1b) = errs(3.0);
        let rate0 = (e0a / e0b).ln() / 2.0;
        let rate1 = (e1a / e1b).ln() / 2.0;
        assert!((rate0 - rate1).abs() < 1e-8, "{rate0} vs {rate1}");
    }

    proptest! {
        // Bias factor is increasing in sigma_i and decreasing in sigma².
        #[test]
        fn bias_factor_monotonicity(s1 in 0.1f64..5.0, bump in 0.01f64..2.0, noise in 0.001f64..0.5) {
            let a_tilde = Mat::identity(2, 2);
            let p_lo = predict_bias_discrete(&a_tilde, &[s1, s1 + bump], 20, noise).unwrap();
            prop_assert!(p_lo.multiplicative_factors[1] > p_lo.multiplicative_factors[0]);
            let p_louder = predict_bias_discrete(&a_tilde, &[s1, s1 + bump], 20, noise * 2.0).unwrap();
            prop_assert!(p_louder.multiplicative_factors[0] < p_lo.multiplicative_factors[0]);
        }

        // Analytic gradients match finite differences on random instances.
        #[test]
        fn gradients_match_fd(seed in 0u64..40) {
            let a_hat = randn(3, 3, seed.wrapping_add(9000));
            let data = discrete_data(&(randn(3, 3, seed.wrapping_add(9100)) * 0.5), randn(3, 5, seed.wrapping_add(9200)));
            let fd = fd_gradient(|m| loss_discrete(m, &data).unwrap(), &a_hat, 1e-5);
            let g = grad_discrete(&a_hat, &data).unwrap();
            prop_assert!(max_abs_diff(&g, &fd) / g.norm().max(1e-12) < 1e-6);
        }
    }
}
