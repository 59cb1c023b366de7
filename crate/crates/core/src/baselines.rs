//! Comparison trainers: direct regression on motor-babbling pairs, and
//! distal supervised learning that backpropagates the task-space error
//! through the analytic forward-model Jacobian.

use std::time::Instant;

use crate::datagen::{fit_normalizers, LabeledSet, NormalizerPair};
use crate::emssl::{
    consistency_gap, evaluate_distance_error, train_phase, EmsslConfig, IterationRecord,
    LearningCurve,
};
use crate::kinematics::KinematicChain;
use crate::linalg::Matrix;
use crate::neuralnet::{adam_step, AdamState, Gradients, Mlp};
use crate::rng::{derive_seed, seeded_rng};
use crate::{Error, Result};

/// Supervised regression position -> joints on pre-collected pairs. The
/// epoch/minibatch scheme is exactly the coordinated loop's training phase;
/// only the data provenance differs. Returns per-epoch mean training loss.
///
/// With redundant joints this averages the multiple valid solutions for a
/// position, which is what makes it a weak baseline.
pub fn train_direct(
    mlp: &mut Mlp,
    adam: &mut AdamState,
    train_set: &LabeledSet,
    norms: &NormalizerPair,
    epochs: usize,
    train_batch: usize,
    shuffle_seed: u64,
) -> Result<Vec<f64>> {
    train_phase(mlp, adam, train_set, norms, epochs, train_batch, shuffle_seed)
}

/// Distal supervised training: for each goal p*, the loss is
/// ‖p* − fk(q)‖² in cm² with q the denormalized model output, and the
/// gradient reaches the parameters through the joint Jacobian and the
/// denormalization scale. Returns per-epoch mean loss (cm²).
pub fn train_distal(
    mlp: &mut Mlp,
    adam: &mut AdamState,
    chain: &KinematicChain,
    goals: &Matrix,
    norms: &NormalizerPair,
    epochs: usize,
    train_batch: usize,
    shuffle_seed: u64,
) -> Result<Vec<f64>> {
    if goals.rows() == 0 {
        return Err(Error::EmptyInput("goals"));
    }
    if train_batch == 0 || train_batch > goals.rows() {
        return Err(Error::InvalidArgument(format!(
            "train batch {} out of range for {} goals",
            train_batch,
            goals.rows()
        )));
    }
    let n = goals.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut seeded_rng(derive_seed(shuffle_seed, 0x5d, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + train_batch).min(n);
            let batch = gather_rows(goals, &order[start..end]);
            let (loss, grads) = distal_loss_and_grads(mlp, chain, &batch, norms);
            adam_step(mlp, adam, &grads);
            loss_sum += loss * (end - start) as f64;
            start = end;
        }
        epoch_losses.push(loss_sum / n as f64);
    }
    Ok(epoch_losses)
}

/// Loss and parameter gradients of the composed objective
/// mean_i ‖p*_i − fk(q_i)‖² with q_i = denormalize(IM(normalize(p*_i))).
///
/// Chain rule per goal: dL/dp = (2/B)(fk(q) − p*), dL/dq = J(q)ᵀ dL/dp,
/// dL/dy_j = dL/dq_j · (hi_j − lo_j), then reverse accumulation through
/// the network.
pub fn distal_loss_and_grads(
    mlp: &Mlp,
    chain: &KinematicChain,
    goals: &Matrix,
    norms: &NormalizerPair,
) -> (f64, Gradients) {
    assert!(goals.rows() > 0, "goal batch must be nonempty");
    let batch = goals.rows() as f64;
    let spans = norms.joint_spans();
    let x = norms.normalize_positions(goals);
    let acts = mlp.forward_cached(&x);
    let q = norms.denormalize_joints(acts.last().unwrap());

    let n_joints = chain.n_joints();
    let mut dl_dy = Matrix::zeros(goals.rows(), n_joints);
    let mut loss = 0.0;
    for i in 0..goals.rows() {
        let achieved = chain.fk(q.row(i));
        let goal = goals.row(i);
        let residual = [
            achieved[0] - goal[0],
            achieved[1] - goal[1],
            achieved[2] - goal[2],
        ];
        loss += residual[0] * residual[0] + residual[1] * residual[1] + residual[2] * residual[2];
        let jac = chain.joint_jacobian(q.row(i));
        let row = dl_dy.row_mut(i);
        for j in 0..n_joints {
            // column j of J dotted with dL/dp
            let mut dq = 0.0;
            for r in 0..3 {
                dq += jac.data()[r * n_joints + j] * (2.0 * residual[r] / batch);
            }
            row[j] = dq * spans[j];
        }
    }
    let grads = mlp.backward_from_cache(&acts, &dl_dy);
    (loss / batch, grads)
}

fn gather_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), m.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

/// Direct-regression run with the same iteration structure, step budget,
/// evaluation cadence, and early-stop rule as the coordinated loop: each
/// "iteration" is `epochs` passes over the fixed motor-babbling set.
pub fn direct_run(
    cfg: &EmsslConfig,
    chain: &KinematicChain,
    train_set: &LabeledSet,
    test_positions: &Matrix,
) -> Result<(Mlp, LearningCurve)> {
    baseline_run(cfg, chain, test_positions, train_set.len(), |mlp, adam, t| {
        train_direct(
            mlp,
            adam,
            train_set,
            &fit_normalizers(chain),
            cfg.epochs,
            cfg.train_batch,
            derive_seed(cfg.shuffle_seed, 0x17, t as u64),
        )
        .map(|_| ())
    })
}

/// Distal-supervised run with the same iteration structure and budget.
pub fn distal_run(
    cfg: &EmsslConfig,
    chain: &KinematicChain,
    goals: &Matrix,
    test_positions: &Matrix,
) -> Result<(Mlp, LearningCurve)> {
    baseline_run(cfg, chain, test_positions, goals.rows(), |mlp, adam, t| {
        train_distal(
            mlp,
            adam,
            chain,
            goals,
            &fit_normalizers(chain),
            cfg.epochs,
            cfg.train_batch,
            derive_seed(cfg.shuffle_seed, 0x17, t as u64),
        )
        .map(|_| ())
    })
}

fn baseline_run(
    cfg: &EmsslConfig,
    chain: &KinematicChain,
    test_positions: &Matrix,
    n_train: usize,
    mut train_iteration: impl FnMut(&mut Mlp, &mut AdamState, usize) -> Result<()>,
) -> Result<(Mlp, LearningCurve)> {
    let mut mlp = Mlp::init(&cfg.net_dims, cfg.init_seed)?;
    if cfg.max_iterations == 0 {
        return Ok((mlp, LearningCurve::default()));
    }
    cfg.validate_for(n_train, chain)?;
    let norms = fit_normalizers(chain);
    let mut adam = AdamState::new(&mlp, cfg.learning_rate);
    let mut curve = LearningCurve::default();
    let mut stalled = 0usize;
    for t in 1..=cfg.max_iterations {
        let t0 = Instant::now();
        train_iteration(&mut mlp, &mut adam, t)?;
        let t_train_s = t0.elapsed().as_secs_f64();
        let stats = evaluate_distance_error(&mlp, &norms, chain, test_positions)?;
        let gap = consistency_gap(&mlp, &norms, chain, test_positions)?;
        if let Some(prev) = curve.records.last() {
            let rel = (prev.mean_err_cm - stats.mean) / prev.mean_err_cm.max(1e-12);
            if rel < cfg.early_stop_tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        curve.records.push(IterationRecord {
            iteration: t,
            mean_err_cm: stats.mean,
            max_err_cm: stats.max,
            consistency_gap: gap,
            t_sample_s: 0.0,
            t_train_s,
        });
        if t >= cfg.min_iterations && stalled >= cfg.early_stop_window {
            break;
        }
    }
    Ok((mlp, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{fit_normalizers, sample_joint_dataset};
    use crate::kinematics::Axis;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn distal_gradient_is_zero_at_an_exactly_solved_goal() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let norms = fit_normalizers(&chain);
        // zero weights: constant output 0.5, q = 0, fk(0) = (120, 0, 0)
        let mut mlp = Mlp::init(&[3, 8, 6], 1).unwrap();
        for l in 0..mlp.n_layers() {
            mlp.weights_mut(l).data_mut().fill(0.0);
        }
        let goals = Matrix::from_vec(1, 3, vec![120.0, 0.0, 0.0]);
        let (loss, grads) = distal_loss_and_grads(&mlp, &chain, &goals, &norms);
        assert_eq!(loss, 0.0);
        for g in &grads.d_weights {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
        for g in &grads.d_biases {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let chain = KinematicChain::default6(FRAC_PI_2);
        let norms = fit_normalizers(&chain);
        let mut mlp = Mlp::init(&[3, 8, 6], 2).unwrap();
        let snapshot = mlp.clone();
        let mut adam = AdamState::new(&mlp, 0.0015);
        let set = sample_joint_dataset(&chain, 32, 3);
        train_direct(&mut mlp, &mut adam, &set, &norms, 0, 8, 4).unwrap();
        assert_eq!(mlp, snapshot);
        train_distal(&mut mlp, &mut adam, &chain, &set.p, &norms, 0, 8, 4).unwrap();
        assert_eq!(mlp, snapshot);
    }

    #[test]
    fn direct_regression_solves_a_convex_one_link_instance() {
        // one joint, limits inside a half-circle: position -> angle is
        // injective, so plain regression suffices
        let chain =
            KinematicChain::new(vec![Axis::Z], vec![10.0], vec![(-FRAC_PI_2, FRAC_PI_2)]).unwrap();
        let norms = fit_normalizers(&chain);
        let train = sample_joint_dataset(&chain, 512, 5);
        let test = sample_joint_dataset(&chain, 200, 6);
        let mut mlp = Mlp::init(&[3, 32, 16, 1], 7).unwrap();
        let mut adam = AdamState::new(&mlp, 0.01);
        train_direct(&mut mlp, &mut adam, &train, &norms, 600, 64, 8).unwrap();
        let stats =
            crate::emssl::evaluate_distance_error(&mlp, &norms, &chain, &test.p).unwrap();
        assert!(
            stats.mean < 0.01 * chain.reach(),
            "mean error {} cm on reach {}",
            stats.mean,
            chain.reach()
        );
    }

    #[test]
    fn distal_composed_gradient_matches_finite_differences() {
        let chain = KinematicChain::new(
            vec![Axis::Z, Axis::Y, Axis::Z],
            vec![5.0, 4.0, 3.0],
            vec![(-1.2, 1.2); 3],
        )
        .unwrap();
        let norms = fit_normalizers(&chain);
        let mlp = Mlp::init(&[3, 6, 3], 11).unwrap();
        let goals = sample_joint_dataset(&chain, 4, 12).p;
        let (_, grads) = distal_loss_and_grads(&mlp, &chain, &goals, &norms);
        let numeric = crate::testkit::numerical_param_gradients(&mlp, 1e-5, |m| {
            distal_loss_and_grads(m, &chain, &goals, &norms).0
        });
        let max_rel = crate::testkit::max_relative_gradient_error(&grads, &numeric);
        assert!(max_rel <= 1e-4, "max relative error {max_rel}");
    }
}
