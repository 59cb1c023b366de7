//! Small-instance end-to-end training checks: on a convex one-link chain
//! every method must solve the task; the composed distal gradient is
//! verified against finite differences on randomized instances; the
//! link-length refit is checked against its closed-form solution.

use std::f64::consts::FRAC_PI_2;

use selfik::adaptation::refit_forward_model;
use selfik::baselines::{direct_run, distal_loss_and_grads, distal_run};
use selfik::datagen::{fit_normalizers, sample_joint_dataset, split};
use selfik::emssl::{emssl_run, evaluate_distance_error, EmsslConfig};
use selfik::kinematics::{Axis, KinematicChain};
use selfik::neuralnet::Mlp;
use selfik::testkit;

fn one_link() -> KinematicChain {
    KinematicChain::new(vec![Axis::Z], vec![10.0], vec![(-FRAC_PI_2, FRAC_PI_2)]).unwrap()
}

fn small_cfg(n_joints: usize) -> EmsslConfig {
    EmsslConfig {
        net_dims: vec![3, 32, 16, n_joints],
        max_iterations: 12,
        epochs: 20,
        infer_batch: 128,
        train_batch: 64,
        workers: 2,
        learning_rate: 0.01,
        early_stop_window: 5,
        early_stop_tol: 1e-3,
        min_iterations: 12,
        init_seed: 3,
        shuffle_seed: 4,
    }
}

#[test]
fn every_method_solves_the_convex_one_link_instance() {
    let chain = one_link();
    let set = sample_joint_dataset(&chain, 1500, 9);
    let (train, test) = split(&set, 1200, 10).unwrap();
    let cfg = small_cfg(1);
    let target = 0.01 * chain.reach();

    let (_, curve) = emssl_run(&cfg, &chain, &train.p, &test.p).unwrap();
    let emssl_err = curve.records.last().unwrap().mean_err_cm;
    assert!(emssl_err < target, "emssl mean err {emssl_err}");

    let (_, curve) = direct_run(&cfg, &chain, &train, &test.p).unwrap();
    let direct_err = curve.records.last().unwrap().mean_err_cm;
    assert!(direct_err < target, "direct mean err {direct_err}");

    let (_, curve) = distal_run(&cfg, &chain, &train.p, &test.p).unwrap();
    let distal_err = curve.records.last().unwrap().mean_err_cm;
    assert!(distal_err < target, "distal mean err {distal_err}");
}

#[test]
fn exact_analytic_inverse_scores_zero_distance_error() {
    // sanity for the metric itself: a perfect inverse (atan2) reaches every
    // goal on the one-link circle exactly
    let chain = one_link();
    let goals = sample_joint_dataset(&chain, 100, 11).p;
    let mut worst: f64 = 0.0;
    for i in 0..goals.rows() {
        let g = goals.row(i);
        let q = g[1].atan2(g[0]);
        let reached = chain.fk(&[q]);
        worst = worst
            .max(selfik::kinematics::distance(reached, [g[0], g[1], g[2]]));
    }
    assert!(worst <= 1e-12, "exact inverse left error {worst}");
}

#[test]
fn distal_composed_gradient_matches_finite_differences_on_10_instances() {
    for seed in 0..10u64 {
        let chain = KinematicChain::new(
            vec![Axis::Z, Axis::Y, Axis::Z],
            vec![6.0, 5.0, 4.0],
            vec![(-1.3, 1.3); 3],
        )
        .unwrap();
        let norms = fit_normalizers(&chain);
        let mlp = Mlp::init(&[3, 6, 4, 3], seed).unwrap();
        let goals = sample_joint_dataset(&chain, 3, 100 + seed).p;
        let (_, analytic) = distal_loss_and_grads(&mlp, &chain, &goals, &norms);
        let numeric = testkit::numerical_param_gradients(&mlp, 1e-5, |m| {
            distal_loss_and_grads(m, &chain, &goals, &norms).0
        });
        let worst = testkit::max_relative_gradient_error(&analytic, &numeric);
        assert!(worst <= 1e-4, "seed {seed}: rel err {worst}");
    }
}

#[test]
fn refit_matches_the_closed_form_least_squares_solution() {
    let base = KinematicChain::default6(FRAC_PI_2);
    let truth = base.perturb_link_lengths(2.5).unwrap();
    let small = sample_joint_dataset(&truth, 64, 21);
    let fitted = refit_forward_model(&base, &small, 3000, 0.05).unwrap();
    let oracle = testkit::solve_link_lengths_least_squares(base.axes(), &small.q, &small.p);
    for (f, o) in fitted.link_lengths().iter().zip(&oracle) {
        assert!((f - o).abs() <= 1e-4, "gd {f} vs closed form {o}");
    }
    for (o, t) in oracle.iter().zip(truth.link_lengths()) {
        assert!((o - t).abs() <= 1e-9, "closed form {o} vs truth {t}");
    }
}

#[test]
fn refit_recovers_with_exactly_six_samples() {
    // 6 samples x 3 coordinates = 18 equations for 6 unknowns
    let base = KinematicChain::default6(FRAC_PI_2);
    let truth = base.perturb_link_lengths(1.0).unwrap();
    let small = sample_joint_dataset(&truth, 6, 33);
    let fitted = refit_forward_model(&base, &small, 4000, 0.05).unwrap();
    for (f, t) in fitted.link_lengths().iter().zip(truth.link_lengths()) {
        assert!((f - t).abs() <= 0.01, "fitted {f} vs true {t}");
    }
}

#[test]
fn untrained_model_has_large_error_on_the_default_arm() {
    let chain = KinematicChain::default6(FRAC_PI_2);
    let norms = fit_normalizers(&chain);
    let mlp = Mlp::init(&[3, 128, 64, 6], 5).unwrap();
    let test = sample_joint_dataset(&chain, 500, 6).p;
    let stats = evaluate_distance_error(&mlp, &norms, &chain, &test).unwrap();
    assert!(stats.mean > 10.0, "untrained error {} cm", stats.mean);
}
