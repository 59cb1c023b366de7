//! Fast recovery after the arm's link lengths drift: either refit the
//! forward model's lengths from a small sample and resume coordinated
//! learning against the refit model, or skip the refit entirely and sample
//! against the changed arm itself.

use serde::{Deserialize, Serialize};

use crate::datagen::{sample_joint_dataset, NormalizerPair};
use crate::emssl::{
    evaluate_distance_error, sampling_round, train_phase, EmsslConfig,
};
use crate::kinematics::KinematicChain;
use crate::linalg::Matrix;
use crate::neuralnet::{AdamState, Mlp};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// How the forward model for the adaptation loop is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptationMode {
    /// Refit the link lengths from a small sample, then adapt against the
    /// refit model.
    Refit,
    /// Use the (simulated) real arm directly; no link parameters needed.
    RealArm,
}

/// Settings for the link-length refit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefitConfig {
    /// Size of the small calibration sample drawn on the changed arm.
    pub samples: usize,
    /// Gradient-descent steps.
    pub steps: usize,
    /// Gradient-descent learning rate (loss is mean cm² over the sample).
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for RefitConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            steps: 2000,
            learning_rate: 0.05,
            seed: 97,
        }
    }
}

/// Settings for one adaptation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    /// Inner-loop hyperparameters; `max_iterations` is the adaptation
    /// budget.
    pub emssl: EmsslConfig,
    pub refit: RefitConfig,
    /// Recovery threshold as a multiple of the pre-change converged error.
    pub recovery_factor: f64,
    /// Applied length change, echoed into the report.
    pub delta_cm: f64,
}

/// Outcome of one adaptation experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub mode: AdaptationMode,
    pub delta_cm: f64,
    pub before_error_cm: f64,
    pub after_error_cm: f64,
    /// Coordinated sampling/training iterations used.
    pub iterations: usize,
    pub recovered: bool,
    pub recovery_threshold_cm: f64,
    /// Absolute per-link error of the refit lengths vs. the changed arm;
    /// only present in refit mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refit_residuals_cm: Option<Vec<f64>>,
}

/// Gradient descent on the link lengths minimizing the mean squared
/// end-position error over a calibration sample. fk is linear in the
/// lengths, so the per-sample direction matrices are fixed and the descent
/// is a plain linear least-squares iteration.
///
/// Errors if the loss increases ten steps in a row (divergence guard) or
/// if the fitted lengths are not a valid chain.
pub fn refit_forward_model(
    est_chain: &KinematicChain,
    small_set: &crate::datagen::LabeledSet,
    steps: usize,
    learning_rate: f64,
) -> Result<KinematicChain> {
    if small_set.is_empty() {
        return Err(Error::EmptyInput("calibration sample"));
    }
    let n = est_chain.n_joints();
    let n_samples = small_set.len();
    // link directions are length-independent, so precompute them once
    let dirs: Vec<Matrix> = (0..n_samples)
        .map(|i| est_chain.link_jacobian(small_set.q.row(i)))
        .collect();

    let mut lengths = est_chain.link_lengths().to_vec();
    let loss_and_grad = |lengths: &[f64]| {
        let mut loss = 0.0;
        let mut grad = vec![0.0; n];
        for (i, d) in dirs.iter().enumerate() {
            let p = small_set.p.row(i);
            for r in 0..3 {
                let mut reached = 0.0;
                for j in 0..n {
                    reached += d.data()[r * n + j] * lengths[j];
                }
                let residual = reached - p[r];
                loss += residual * residual;
                for j in 0..n {
                    grad[j] += 2.0 * residual * d.data()[r * n + j];
                }
            }
        }
        let scale = 1.0 / n_samples as f64;
        for g in &mut grad {
            *g *= scale;
        }
        (loss * scale, grad)
    };

    let mut prev_loss = f64::INFINITY;
    let mut rising = 0usize;
    for _ in 0..steps {
        let (loss, grad) = loss_and_grad(&lengths);
        if loss > prev_loss {
            rising += 1;
            if rising >= 10 {
                return Err(Error::RefitDiverged(rising));
            }
        } else {
            rising = 0;
        }
        prev_loss = loss;
        for (l, g) in lengths.iter_mut().zip(&grad) {
            *l -= learning_rate * g;
        }
    }
    est_chain.with_link_lengths(lengths)
}

/// Loss and gradient of the refit objective at given lengths; exposed so
/// the finite-difference check in the test suite can probe the start point.
pub fn refit_loss_and_grad(
    est_chain: &KinematicChain,
    small_set: &crate::datagen::LabeledSet,
    lengths: &[f64],
) -> (f64, Vec<f64>) {
    let n = est_chain.n_joints();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..small_set.len() {
        let d = est_chain.link_jacobian(small_set.q.row(i));
        let p = small_set.p.row(i);
        for r in 0..3 {
            let mut reached = 0.0;
            for j in 0..n {
                reached += d.data()[r * n + j] * lengths[j];
            }
            let residual = reached - p[r];
            loss += residual * residual;
            for j in 0..n {
                grad[j] += 2.0 * residual * d.data()[r * n + j];
            }
        }
    }
    let scale = 1.0 / small_set.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    (loss * scale, grad)
}

/// Adapt a trained inverse model to a changed arm.
///
/// The model keeps its trained weights and its original normalizers (its
/// input/output conditioning must not shift under it). The recovery
/// threshold is `recovery_factor` times the model's converged error on the
/// unchanged arm. Iterations run until the mean error measured against the
/// changed arm drops to the threshold or the budget is exhausted;
/// non-recovery is reported, not an error.
#[allow(clippy::too_many_arguments)]
pub fn adapt(
    mlp: Mlp,
    norms: &NormalizerPair,
    base_chain: &KinematicChain,
    true_chain: &KinematicChain,
    mode: AdaptationMode,
    goals: &Matrix,
    test_positions: &Matrix,
    cfg: &AdaptationConfig,
) -> Result<(Mlp, AdaptationReport)> {
    let baseline = evaluate_distance_error(&mlp, norms, base_chain, test_positions)?.mean;
    let threshold = cfg.recovery_factor * baseline;
    let before = evaluate_distance_error(&mlp, norms, true_chain, test_positions)?.mean;

    if before <= threshold {
        return Ok((
            mlp,
            AdaptationReport {
                mode,
                delta_cm: cfg.delta_cm,
                before_error_cm: before,
                after_error_cm: before,
                iterations: 0,
                recovered: true,
                recovery_threshold_cm: threshold,
                refit_residuals_cm: None,
            },
        ));
    }

    let (fm_chain, refit_residuals_cm) = match mode {
        AdaptationMode::RealArm => (true_chain.clone(), None),
        AdaptationMode::Refit => {
            let small = sample_joint_dataset(true_chain, cfg.refit.samples, cfg.refit.seed);
            let refit = refit_forward_model(
                base_chain,
                &small,
                cfg.refit.steps,
                cfg.refit.learning_rate,
            )?;
            let residuals = refit
                .link_lengths()
                .iter()
                .zip(true_chain.link_lengths())
                .map(|(f, t)| (f - t).abs())
                .collect();
            (refit, Some(residuals))
        }
    };

    cfg.emssl.validate_for(goals.rows(), &fm_chain)?;
    let mut mlp = mlp;
    let mut adam = AdamState::new(&mlp, cfg.emssl.learning_rate);
    let mut iterations = 0;
    let mut after = before;
    for t in 1..=cfg.emssl.max_iterations {
        let sample = sampling_round(&mlp, norms, &fm_chain, goals, &cfg.emssl, t)?;
        train_phase(
            &mut mlp,
            &mut adam,
            &sample.data,
            norms,
            cfg.emssl.epochs,
            cfg.emssl.train_batch,
            derive_seed(cfg.emssl.shuffle_seed, 0xAD, t as u64),
        )?;
        iterations = t;
        after = evaluate_distance_error(&mlp, norms, true_chain, test_positions)?.mean;
        if after <= threshold {
            break;
        }
    }

    Ok((
        mlp,
        AdaptationReport {
            mode,
            delta_cm: cfg.delta_cm,
            before_error_cm: before,
            after_error_cm: after,
            iterations,
            recovered: after <= threshold,
            recovery_threshold_cm: threshold,
            refit_residuals_cm,
        },
    ))
}
