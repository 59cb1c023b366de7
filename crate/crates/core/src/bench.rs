//! Timing harness for the data-sampling acceleration strategies.
//!
//! Correctness precedes speed: before anything is timed, every strategy's
//! output is checked equal to the unaccelerated reference, and a timing
//! request fails hard on any mismatch. The verification pass doubles as the
//! warm-up round, which is excluded from the reported numbers.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{LabeledSet, NormalizerPair};
use crate::emssl::{batch_infer, parallel_fm};
use crate::kinematics::KinematicChain;
use crate::linalg::Matrix;
use crate::neuralnet::Mlp;
use crate::{Error, Result};

/// The four sampling strategies of the acceleration study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Sequential inference and forward computation per data point.
    None,
    /// Batched inference, sequential forward computation.
    BatchOnly,
    /// Per-point inference, parallel forward computation.
    ParallelOnly,
    /// Batched inference and parallel forward computation.
    Both,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::None,
        Strategy::BatchOnly,
        Strategy::ParallelOnly,
        Strategy::Both,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::BatchOnly => "batch-only",
            Strategy::ParallelOnly => "parallel-only",
            Strategy::Both => "both",
        }
    }
}

/// Wall time of one full sampling round under one strategy, with the
/// configuration it was measured under.
#[derive(Clone, Debug, Serialize)]
pub struct StrategyTiming {
    pub strategy: Strategy,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Per-repeat raw seconds, in run order.
    pub raw_s: Vec<f64>,
    pub n_goals: usize,
    pub infer_batch: usize,
    pub workers: usize,
    pub net_dims: Vec<usize>,
}

/// One point of a batch-size or worker-count sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub x: usize,
    pub median_s: f64,
    pub raw_s: Vec<f64>,
}

/// Run one full sampling round (inference over every goal + forward
/// computation) under the given strategy.
pub fn run_strategy(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    goals: &Matrix,
    strategy: Strategy,
    infer_batch: usize,
    workers: usize,
) -> Result<LabeledSet> {
    match strategy {
        Strategy::None => {
            // one goal at a time: infer, then immediately compute
            let mut q = Matrix::zeros(goals.rows(), chain.n_joints());
            let mut p = Matrix::zeros(goals.rows(), 3);
            for i in 0..goals.rows() {
                let qi = batch_infer(mlp, norms, &goals.rows_copy(i, i + 1), 1)?;
                q.row_mut(i).copy_from_slice(qi.row(0));
                p.row_mut(i).copy_from_slice(&chain.fk(qi.row(0)));
            }
            Ok(LabeledSet::new(q, p))
        }
        Strategy::BatchOnly => {
            let q = batch_infer(mlp, norms, goals, infer_batch)?;
            let p = parallel_fm(chain, &q, 1);
            Ok(LabeledSet::new(q, p))
        }
        Strategy::ParallelOnly => {
            let mut q = Matrix::zeros(goals.rows(), chain.n_joints());
            for i in 0..goals.rows() {
                let qi = batch_infer(mlp, norms, &goals.rows_copy(i, i + 1), 1)?;
                q.row_mut(i).copy_from_slice(qi.row(0));
            }
            let p = parallel_fm(chain, &q, workers);
            Ok(LabeledSet::new(q, p))
        }
        Strategy::Both => {
            let q = batch_infer(mlp, norms, goals, infer_batch)?;
            let p = parallel_fm(chain, &q, workers);
            Ok(LabeledSet::new(q, p))
        }
    }
}

/// Time all four strategies over the same goals and model.
///
/// Each strategy first runs once untimed; that run is compared against the
/// unaccelerated reference (hard error on mismatch) and serves as warm-up.
/// Then each strategy is timed `repeats` times and the median reported.
pub fn time_strategies(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    goals: &Matrix,
    infer_batch: usize,
    workers: usize,
    repeats: usize,
) -> Result<Vec<StrategyTiming>> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 repeats, got {repeats}"
        )));
    }
    let reference = run_strategy(mlp, norms, chain, goals, Strategy::None, infer_batch, workers)?;
    for strategy in [Strategy::BatchOnly, Strategy::ParallelOnly, Strategy::Both] {
        let out = run_strategy(mlp, norms, chain, goals, strategy, infer_batch, workers)?;
        if out != reference {
            return Err(Error::StrategyMismatch(format!(
                "{} output differs from the sequential reference",
                strategy.name()
            )));
        }
    }

    let mut results = Vec::with_capacity(4);
    for strategy in Strategy::ALL {
        let mut raw_s = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t0 = Instant::now();
            let out = run_strategy(mlp, norms, chain, goals, strategy, infer_batch, workers)?;
            raw_s.push(t0.elapsed().as_secs_f64());
            debug_assert_eq!(out.len(), goals.rows());
        }
        results.push(StrategyTiming {
            strategy,
            median_s: median(&raw_s),
            min_s: raw_s.iter().cloned().fold(f64::INFINITY, f64::min),
            max_s: raw_s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            raw_s,
            n_goals: goals.rows(),
            infer_batch,
            workers,
            net_dims: mlp.layer_dims().to_vec(),
        });
    }
    Ok(results)
}

/// Time the combined strategy across inference batch sizes at a fixed
/// worker count. Outputs are verified identical across sizes first.
pub fn sweep_batch(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    goals: &Matrix,
    sizes: &[usize],
    workers: usize,
    repeats: usize,
) -> Result<Vec<SweepPoint>> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("batch sizes"));
    }
    sweep(sizes, repeats, |size| {
        run_strategy(mlp, norms, chain, goals, Strategy::Both, size, workers)
    })
}

/// Time the combined strategy across worker counts at a fixed inference
/// batch size. Returns the sweep and the detected core count.
pub fn sweep_threads(
    mlp: &Mlp,
    norms: &NormalizerPair,
    chain: &KinematicChain,
    goals: &Matrix,
    counts: &[usize],
    infer_batch: usize,
    repeats: usize,
) -> Result<(Vec<SweepPoint>, usize)> {
    if counts.is_empty() {
        return Err(Error::EmptyInput("worker counts"));
    }
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let points = sweep(counts, repeats, |k| {
        run_strategy(mlp, norms, chain, goals, Strategy::Both, infer_batch, k)
    })?;
    Ok((points, cores))
}

fn sweep(
    xs: &[usize],
    repeats: usize,
    run: impl Fn(usize) -> Result<LabeledSet>,
) -> Result<Vec<SweepPoint>> {
    // verification + warm-up pass
    let reference = run(xs[0])?;
    for &x in &xs[1..] {
        if run(x)? != reference {
            return Err(Error::StrategyMismatch(format!(
                "outputs differ at sweep point {x}"
            )));
        }
    }
    let mut points = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut raw_s = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t0 = Instant::now();
            let _ = run(x)?;
            raw_s.push(t0.elapsed().as_secs_f64());
        }
        points.push(SweepPoint {
            x,
            median_s: median(&raw_s),
            raw_s,
        });
    }
    Ok(points)
}

fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// CSV: `strategy,median_s,min_s,max_s,raw_s` with raw values
/// semicolon-joined.
pub fn write_strategy_csv(timings: &[StrategyTiming], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "strategy,median_s,min_s,max_s,raw_s")?;
    for t in timings {
        writeln!(
            w,
            "{},{:.3},{:.3},{:.3},{}",
            t.strategy.name(),
            t.median_s,
            t.min_s,
            t.max_s,
            t.raw_s
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";")
        )?;
    }
    Ok(())
}

/// CSV: `<x_name>,median_s,raw_s`, plus a `detected_cores` column when
/// given.
pub fn write_sweep_csv(
    points: &[SweepPoint],
    x_name: &str,
    detected_cores: Option<usize>,
    path: &Path,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match detected_cores {
        Some(cores) => {
            writeln!(w, "{x_name},median_s,raw_s,detected_cores")?;
            for p in points {
                writeln!(w, "{},{:.3},{},{}", p.x, p.median_s, join(&p.raw_s), cores)?;
            }
        }
        None => {
            writeln!(w, "{x_name},median_s,raw_s")?;
            for p in points {
                writeln!(w, "{},{:.3},{}", p.x, p.median_s, join(&p.raw_s))?;
            }
        }
    }
    Ok(())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}
