//! Coordinated sampling-and-training loop for inverse model learning.
//!
//! Each iteration the current inverse model proposes joint angles for every
//! goal position, the forward model computes the positions those angles
//! actually reach, and the (angles, reached positions) pairs retrain the
//! inverse model. Sampling is accelerated by batched network inference and
//! an order-preserving parallel map over the forward model; both are
//! bit-identical to the sequential computation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{LabeledSet, NormalizerPair};
use crate::kinematics::{distance, KinematicChain};
use crate::linalg::Matrix;
use crate::neuralnet::{adam_step, mse_loss_and_grad, AdamState, Mlp};
use crate::rng::{derive_seed, seeded_rng};
use crate::{Error, Result};

/// Hyperparameters of one learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmsslConfig {
    /// Network layer sizes, input 3 to n_joints output.
    pub net_dims: Vec<usize>,
    /// Maximum number of sampling/training iterations (T).
    pub max_iterations: usize,
    /// Training epochs per iteration (E).
    pub epochs: usize,
    /// Inference batch size (M_R).
    pub infer_batch: usize,
    /// Training minibatch size (M_T).
    pub train_batch: usize,
    /// Parallel forward-model workers (K).
    pub workers: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Stop after this many consecutive iterations whose relative
    /// mean-error improvement falls below `early_stop_tol`.
    pub early_stop_window: usize,
    pub early_stop_tol: f64,
    /// Never stop before this many iterations.
    pub min_iterations: usize,
    /// Network initialization seed.
    pub init_seed: u64,
    /// Base seed for the per-iteration, per-epoch minibatch shuffles.
    pub shuffle_seed: u64,
}

impl EmsslConfig {
    /// Reference hyperparameters: T=200, E=10, inference batch 512,
    /// training batch 128, lr 0.0015; workers capped at the host's cores.
    pub fn reference(net_dims: Vec<usize>) -> Self {
        Self {
            net_dims,
            max_iterations: 200,
            epochs: 10,
            infer_batch: 512,
            train_batch: 128,
            workers: default_workers(),
            learning_rate: 0.0015,
            early_stop_window: 5,
            early_stop_tol: 1e-3,
            min_iterations: 20,
            init_seed: 1,
            shuffle_seed: 2,
        }
    }

    pub(crate) fn validate_for(&self, n_goals: usize, chain: &KinematicChain) -> Result<()> {
        if self.net_dims.first() != Some(&3) {
            return Err(Error::InvalidArgument(format!(
                "network input width must be 3, got {:?}",
                self.net_dims.first()
            )));
        }
        if self.net_dims.last() != Some(&chain.n_joints()) {
            return Err(Error::InvalidArgument(format!(
                "network output width {:?} does not match {} joints",
                self.net_dims.last(),
                chain.n_joints()
            )));
        }
        if self.epochs == 0 && self.max_iterations > 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.infer_batch == 0 || self.train_batch == 0 || self.workers == 0 {
            return Err(Error::InvalidArgument("batch sizes and workers must be >= 1".into()));
        }
        if self.infer_batch > n_goals || self.train_batch > n_goals {
            return Err(Error::InvalidArgument(format!(
                "batch sizes ({}, {}) exceed the goal set size {}",
                self.infer_batch, self.train_batch, n_goals
            )));
        }
        Ok(())
    }
}

/// min(6, available cores) — more workers than cores only adds switching
/// overhead.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get().min(6))
        .unwrap_or(1)
}

/// One sampling round's paired dataset D.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub data: LabeledSet,
    pub iteration: usize,
}

/// Per-iteration learning metrics and phase timings.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_err_cm: f64,
    pub max_err_cm: f64,
    pub consistency_gap: f64,
    pub t_sample_s: f64,
    pub t_train_s: f64,
}

/// Records for every completed iteration, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<IterationRecord>,
}

impl LearningCurve {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "iteration,mean_err_cm,max_err_cm,consistency_gap,t_sample_s,t_train_s"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration, r.mean_err_cm, r.max_err_cm, r.consistency_gap, r.t_sample_s, r.t_train_s
            )?;
        }
        Ok(())
    }
}

/// Distance-error summary over a goal set, cm.
#[derive(Clone, Debug)]
pub struct ErrorStats {
    pub mean: f64,
    pub max: f64,
    pub p50: f64,
    pub p95: f64,
    pub per_sample: Vec<f64>,
}

/// Number of minibatches per epoch: ceil(n / batch), the last batch may be
/// short.
pub fn batches_per_epoch(n: usize, batch: usize) -> usize {
    n.div_ceil(batch)
}

/// Inverse-model batch inference: goals are processed in contiguous row
/// chunks of `infer_batch` and denormalized to radians. Row order is
/// preserved and the result is bit-identical to one-at-a-time inference.
pub fn batch_infer(
    mlp: &Mlp,
    norms: &NormalizerPair,
    goals: &Matrix,
    infer_batch: usize,
) -> Result<Matrix> {
    if goals.rows() == 0 {
        return Err(Error::EmptyInput("goal list"));
    }
    assert!(infer_batch >= 1, "inference batch must be >= 1");
    let x = norms.normalize_positions(goals);
    let mut y = Matrix::zeros(goals.rows(), mlp.output_dim());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + infer_batch).min(x.rows());
        let out = mlp.forward(&x.rows_copy(start, end));
        y.data_mut()[start * out.cols()..end * out.cols()].copy_from_slice(out.data());
        start = end;
    }
    Ok(norms.denormalize_joints(&y))
}

/// Forward-model map over the rows of `q`, spread across `workers` threads.
/// Each worker owns a contiguous block of output rows (indexed slots, not
/// completion order), so the result is bit-identical to a sequential map.
pub fn parallel_fm(chain: &KinematicChain, q: &Matrix, workers: usize) -> Matrix {
    assert!(workers >= 1, "worker count must be >= 1");
    assert_eq!(q.cols(), chain.n_joints(), "q width must match joint count");
    let rows = q.rows();
    let mut p = Matrix::zeros(rows, 3);
    if rows == 0 {
        return p;
    }
    if workers == 1 {
        for (i, slot) in p.data_mut().chunks_exact_mut(3).enumerate() {
            slot.copy_from_slice(&chain.fk(q.row(i)));
        }
        return p;
    }

    let workers = workers.min(rows);
    let base = rows / workers;
    let rem = rows % workers;
    let mut chunks = Vec::with_capacity(workers);
    let mut rest = p.data_mut();
    let mut start = 0;
    for w in 0..workers {
        let len = base + usize::from(w < rem);
        let (chunk, tail) = rest.split_at_mut(len * 3);
        rest = tail;
        chunks.push((start, chunk));
        start += len;
    }
    std::thread::scope(|scope| {
        for (row0, chunk) in chunks {
            scope.spawn(move || {
                for (offset, slot) in chunk.chunks_exact_mut(3).enumerate() {
                    slot.copy_from_slice(&chain.fk(q.row(row0 + offset)));
                }
            });
        }
    });
    p
}

/// One data-sampling phase: infer joints for every goal, run the forward
/// model over them, and pair the results. The previous round's set is
/// simply dropped by the caller.
pub fn sampling_round(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    goals: &Matrix,
    cfg: &EmsslConfig,
    iteration: usize,
) -> Result<SampleSet> {
    let q = batch_infer(mlp, norms, goals, cfg.infer_batch)?;
    let p = parallel_fm(chain, &q, cfg.workers);
    Ok(SampleSet {
        data: LabeledSet::new(q, p),
        iteration,
    })
}

/// One model-training phase: `epochs` passes over `data`, each with a fresh
/// seed-derived shuffle and minibatches of `train_batch` rows (the last may
/// be short). Inputs are normalized positions, targets normalized joints,
/// loss is MSE, updates are Adam. Returns the per-epoch mean training loss.
pub fn train_phase(
    mlp: &mut Mlp,
    adam: &mut AdamState,
    data: &LabeledSet,
    norms: &NormalizerPair,
    epochs: usize,
    train_batch: usize,
    shuffle_seed: u64,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if train_batch == 0 || train_batch > data.len() {
        return Err(Error::InvalidArgument(format!(
            "train batch {} out of range for {} rows",
            train_batch,
            data.len()
        )));
    }
    let x_all = norms.normalize_positions(&data.p);
    let y_all = norms.normalize_joints(&data.q);
    let n = data.len();
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut seeded_rng(derive_seed(shuffle_seed, 0x45, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + train_batch).min(n);
            let idx = &order[start..end];
            let xb = gather_rows(&x_all, idx);
            let yb = gather_rows(&y_all, idx);
            let acts = mlp.forward_cached(&xb);
            let (loss, dl_dy) = mse_loss_and_grad(acts.last().unwrap(), &yb);
            let grads = mlp.backward_from_cache(&acts, &dl_dy);
            adam_step(mlp, adam, &grads);
            loss_sum += loss * idx.len() as f64;
            start = end;
        }
        epoch_losses.push(loss_sum / n as f64);
    }
    Ok(epoch_losses)
}

fn gather_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), m.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

/// For each goal p*, run the inverse model, execute the result on the
/// chain, and measure ‖fk(q) − p*‖₂ in cm.
pub fn evaluate_distance_error(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    test_positions: &Matrix,
) -> Result<ErrorStats> {
    if test_positions.rows() == 0 {
        return Err(Error::EmptyInput("test goals"));
    }
    let q = batch_infer(mlp, norms, test_positions, test_positions.rows())?;
    let mut per_sample = Vec::with_capacity(q.rows());
    for i in 0..q.rows() {
        let achieved = chain.fk(q.row(i));
        let goal = test_positions.row(i);
        per_sample.push(distance(achieved, [goal[0], goal[1], goal[2]]));
    }
    Ok(ErrorStats::from_samples(per_sample))
}

impl ErrorStats {
    pub fn from_samples(per_sample: Vec<f64>) -> Self {
        let n = per_sample.len();
        assert!(n > 0);
        let mean = per_sample.iter().sum::<f64>() / n as f64;
        let max = per_sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sorted = per_sample.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = |f: f64| sorted[((f * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            mean,
            max,
            p50: rank(0.50),
            p95: rank(0.95),
            per_sample,
        }
    }
}

/// Convergence witness: mean over goals of the normalized joint-space
/// distance between the model's answer for the goal and its answer for the
/// position that answer actually reaches.
pub fn consistency_gap(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    goals: &Matrix,
) -> Result<f64> {
    if goals.rows() == 0 {
        return Err(Error::EmptyInput("goals"));
    }
    let y1 = mlp.forward(&norms.normalize_positions(goals));
    let q = norms.denormalize_joints(&y1);
    let p = parallel_fm(chain, &q, 1);
    let y2 = mlp.forward(&norms.normalize_positions(&p));
    let mut acc = 0.0;
    for i in 0..goals.rows() {
        let mut d2 = 0.0;
        for (a, b) in y1.row(i).iter().zip(y2.row(i)) {
            d2 += (a - b) * (a - b);
        }
        acc += d2.sqrt();
    }
    Ok(acc / goals.rows() as f64)
}

/// Full coordinated run from a fresh random model.
pub fn emssl_run(
    cfg: &EmsslConfig,
    chain: &KinematicChain,
    goals: &Matrix,
    test_positions: &Matrix,
) -> Result<(Mlp, LearningCurve)> {
    let mlp = Mlp::init(&cfg.net_dims, cfg.init_seed)?;
    let norms = crate::datagen::fit_normalizers(chain);
    emssl_run_with_model(mlp, &norms, cfg, chain, goals, test_positions)
}

/// Full coordinated run starting from an existing model (used both by
/// [`emssl_run`] and by fast adaptation, which keeps the trained weights).
///
/// Iterates sampling_round then train_phase up to `max_iterations`,
/// recording one curve entry per iteration, and stops early once the
/// relative mean-error improvement stays below the configured tolerance
/// for the configured window (never before `min_iterations`).
pub fn emssl_run_with_model(
    mut mlp: Mlp,
    norms: &NormalizerPair,
    cfg: &EmsslConfig,
    chain: &KinematicChain,
    goals: &Matrix,
    test_positions: &Matrix,
) -> Result<(Mlp, LearningCurve)> {
    if goals.rows() == 0 {
        return Err(Error::EmptyInput("goal set"));
    }
    if cfg.max_iterations == 0 {
        return Ok((mlp, LearningCurve::default()));
    }
    cfg.validate_for(goals.rows(), chain)?;
    let mut adam = AdamState::new(&mlp, cfg.learning_rate);
    let mut curve = LearningCurve::default();
    let mut stalled = 0usize;
    for t in 1..=cfg.max_iterations {
        let t0 = Instant::now();
        let sample = sampling_round(&mlp, norms, chain, goals, cfg, t)?;
        let t_sample_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        train_phase(
            &mut mlp,
            &mut adam,
            &sample.data,
            norms,
            cfg.epochs,
            cfg.train_batch,
            derive_seed(cfg.shuffle_seed, 0x17, t as u64),
        )?;
        let t_train_s = t1.elapsed().as_secs_f64();

        let stats = evaluate_distance_error(&mlp, norms, chain, test_positions)?;
        let gap = consistency_gap(&mlp, norms, chain, test_positions)?;
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
            t_sample_s,
            t_train_s,
        });
        if t >= cfg.min_iterations && stalled >= cfg.early_stop_window {
            break;
        }
    }
    Ok((mlp, curve))
}
