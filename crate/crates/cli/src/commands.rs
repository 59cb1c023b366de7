//! Subcommand implementations. Every command writes its exact config
//! snapshot beside its outputs; rerunning from that snapshot reproduces
//! all non-timing outputs byte for byte.

use std::path::{Path, PathBuf};

use serde::Serialize;

use selfik::adaptation::{adapt, AdaptationConfig, AdaptationMode, AdaptationReport};
use selfik::baselines::{direct_run, distal_run};
use selfik::bench::{
    sweep_batch, sweep_threads, time_strategies, write_strategy_csv, write_sweep_csv,
};
use selfik::checkpoint;
use selfik::datagen::{fit_normalizers, read_csv, sample_joint_dataset, split, write_csv, LabeledSet};
use selfik::emssl::{emssl_run, evaluate_distance_error, ErrorStats, LearningCurve};
use selfik::linalg::Matrix;
use selfik::neuralnet::Mlp;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Training method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Emssl,
    Direct,
    Distal,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Emssl => "emssl",
            Method::Direct => "direct",
            Method::Distal => "distal",
        }
    }
}

/// Benchmark flavor selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchMode {
    Strategies,
    BatchSweep,
    ThreadSweep,
}

/// Adaptation flavor selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AdaptArg {
    Refit,
    Real,
}

impl AdaptArg {
    fn mode(self) -> AdaptationMode {
        match self {
            AdaptArg::Refit => AdaptationMode::Refit,
            AdaptArg::Real => AdaptationMode::RealArm,
        }
    }
}

pub fn train_csv_path(out: &Path) -> PathBuf {
    out.join("train.csv")
}

pub fn test_csv_path(out: &Path) -> PathBuf {
    out.join("test.csv")
}

pub fn checkpoint_path(out: &Path) -> PathBuf {
    out.join("checkpoint.json")
}

pub fn curve_path(out: &Path, method: Method) -> PathBuf {
    out.join(format!("curve_{}.csv", method.name()))
}

pub fn metrics_path(out: &Path) -> PathBuf {
    out.join("metrics.json")
}

fn snapshot(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(selfik::Error::from)?;
    cfg.save(&out.join("config.json"))
}

fn progress(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn emit(value: &impl Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string(value).map_err(selfik::Error::from)?);
    Ok(())
}

fn load_sets(cfg: &ExperimentConfig, out: &Path) -> Result<(LabeledSet, LabeledSet), CliError> {
    let train_path = train_csv_path(out);
    let test_path = test_csv_path(out);
    if !train_path.exists() || !test_path.exists() {
        return Err(CliError::Runtime(format!(
            "missing dataset files in {}; run `selfik gen-data` first",
            out.display()
        )));
    }
    let train = read_csv(&train_path)?;
    let test = read_csv(&test_path)?;
    let n_joints = cfg.chain.build()?.n_joints();
    if train.q.cols() != n_joints || test.q.cols() != n_joints {
        return Err(CliError::Config(format!(
            "dataset has {} joint columns but the configured chain has {}",
            train.q.cols(),
            n_joints
        )));
    }
    Ok((train, test))
}

/// Fixed evaluation subset: the head of the (already shuffled) test split.
fn eval_positions(cfg: &ExperimentConfig, test: &LabeledSet) -> Matrix {
    let n = if cfg.eval_goals == 0 {
        test.len()
    } else {
        cfg.eval_goals.min(test.len())
    };
    test.p.rows_copy(0, n)
}

#[derive(Serialize)]
struct GenDataSummary {
    train_rows: usize,
    test_rows: usize,
    out: String,
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<(), CliError> {
    cfg.validate()?;
    snapshot(cfg, out)?;
    let chain = cfg.chain.build()?;
    progress(
        quiet,
        format!(
            "sampling {} joint-space points (seed {})",
            cfg.dataset.total, cfg.dataset.seed
        ),
    );
    let set = sample_joint_dataset(&chain, cfg.dataset.total, cfg.dataset.seed);
    let (train, test) = split(&set, cfg.dataset.train, cfg.split_seed())?;
    write_csv(&train, &train_csv_path(out))?;
    write_csv(&test, &test_csv_path(out))?;
    progress(quiet, format!("wrote {}", train_csv_path(out).display()));
    progress(quiet, format!("wrote {}", test_csv_path(out).display()));
    emit(&GenDataSummary {
        train_rows: train.len(),
        test_rows: test.len(),
        out: out.display().to_string(),
    })
}

#[derive(Serialize)]
struct TrainMetrics {
    method: &'static str,
    mean_err_cm: f64,
    max_err_cm: f64,
    iterations: usize,
}

pub fn cmd_train(
    cfg: &ExperimentConfig,
    out: &Path,
    method: Method,
    quiet: bool,
) -> Result<(), CliError> {
    cfg.validate()?;
    snapshot(cfg, out)?;
    let chain = cfg.chain.build()?;
    let (train, test) = load_sets(cfg, out)?;
    let eval_pos = eval_positions(cfg, &test);
    progress(
        quiet,
        format!(
            "training method={} on {} goals, evaluating on {}",
            method.name(),
            train.len(),
            eval_pos.rows()
        ),
    );

    let (mlp, curve): (Mlp, LearningCurve) = match method {
        Method::Emssl => emssl_run(&cfg.emssl, &chain, &train.p, &eval_pos)?,
        Method::Direct => direct_run(&cfg.emssl, &chain, &train, &eval_pos)?,
        Method::Distal => distal_run(&cfg.emssl, &chain, &train.p, &eval_pos)?,
    };
    if !quiet {
        for r in &curve.records {
            eprintln!(
                "iter {:>3}: mean {:.4} cm, max {:.4} cm, gap {:.6}",
                r.iteration, r.mean_err_cm, r.max_err_cm, r.consistency_gap
            );
        }
    }

    let norms = fit_normalizers(&chain);
    checkpoint::save(&mlp, &norms, &checkpoint_path(out))?;
    curve.write_csv(&curve_path(out, method))?;
    let stats = evaluate_distance_error(&mlp, &norms, &chain, &eval_pos)?;
    let metrics = TrainMetrics {
        method: method.name(),
        mean_err_cm: stats.mean,
        max_err_cm: stats.max,
        iterations: curve.records.len(),
    };
    std::fs::write(
        metrics_path(out),
        serde_json::to_string_pretty(&metrics).map_err(selfik::Error::from)?,
    )
    .map_err(selfik::Error::from)?;
    emit(&metrics)
}

#[derive(Serialize)]
struct EvalMetrics {
    mean_err_cm: f64,
    max_err_cm: f64,
    p50_cm: f64,
    p95_cm: f64,
    n_goals: usize,
}

impl From<&ErrorStats> for EvalMetrics {
    fn from(stats: &ErrorStats) -> Self {
        Self {
            mean_err_cm: stats.mean,
            max_err_cm: stats.max,
            p50_cm: stats.p50,
            p95_cm: stats.p95,
            n_goals: stats.per_sample.len(),
        }
    }
}

pub fn cmd_eval(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<(), CliError> {
    let chain = cfg.chain.build()?;
    let (mlp, norms) = checkpoint::load(&checkpoint_path(out))?;
    if mlp.output_dim() != chain.n_joints() {
        return Err(CliError::Config(format!(
            "checkpoint has {} outputs but the chain has {} joints",
            mlp.output_dim(),
            chain.n_joints()
        )));
    }
    let (_, test) = load_sets(cfg, out)?;
    let eval_pos = eval_positions(cfg, &test);
    let stats = evaluate_distance_error(&mlp, &norms, &chain, &eval_pos)?;
    let metrics = EvalMetrics::from(&stats);
    std::fs::write(
        out.join("eval.json"),
        serde_json::to_string_pretty(&metrics).map_err(selfik::Error::from)?,
    )
    .map_err(selfik::Error::from)?;
    progress(
        quiet,
        format!(
            "mean {:.4} cm, max {:.4} cm over {} goals",
            stats.mean,
            stats.max,
            eval_pos.rows()
        ),
    );
    emit(&metrics)
}

pub fn cmd_bench(
    cfg: &ExperimentConfig,
    out: &Path,
    mode: BenchMode,
    quiet: bool,
) -> Result<(), CliError> {
    cfg.validate()?;
    snapshot(cfg, out)?;
    let chain = cfg.chain.build()?;
    let (train, _) = load_sets(cfg, out)?;
    let goals = &train.p;
    let mlp = Mlp::init(&cfg.emssl.net_dims, cfg.emssl.init_seed)?;
    let norms = fit_normalizers(&chain);
    progress(
        quiet,
        format!(
            "timing over {} goals, net {:?}, repeats {}",
            goals.rows(),
            cfg.emssl.net_dims,
            cfg.bench.repeats
        ),
    );

    match mode {
        BenchMode::Strategies => {
            let timings = time_strategies(
                &mlp,
                &norms,
                &chain,
                goals,
                cfg.emssl.infer_batch,
                cfg.emssl.workers,
                cfg.bench.repeats,
            )?;
            let path = out.join("bench_strategies.csv");
            write_strategy_csv(&timings, &path)?;
            for t in &timings {
                progress(quiet, format!("{:>13}: {:.3} s", t.strategy.name(), t.median_s));
            }
            emit(&timings)
        }
        BenchMode::BatchSweep => {
            let points = sweep_batch(
                &mlp,
                &norms,
                &chain,
                goals,
                &cfg.bench.batch_sizes,
                cfg.emssl.workers,
                cfg.bench.repeats,
            )?;
            write_sweep_csv(&points, "batch_size", None, &out.join("bench_batch_sweep.csv"))?;
            emit(&points)
        }
        BenchMode::ThreadSweep => {
            let (points, cores) = sweep_threads(
                &mlp,
                &norms,
                &chain,
                goals,
                &cfg.bench.thread_counts,
                cfg.emssl.infer_batch,
                cfg.bench.repeats,
            )?;
            write_sweep_csv(
                &points,
                "workers",
                Some(cores),
                &out.join("bench_thread_sweep.csv"),
            )?;
            emit(&points)
        }
    }
}

pub fn adapt_report_path(out: &Path, mode: AdaptationMode, delta_cm: f64) -> PathBuf {
    let tag = match mode {
        AdaptationMode::Refit => "refit",
        AdaptationMode::RealArm => "real-arm",
    };
    out.join(format!("adapt_{tag}_{delta_cm}cm.json"))
}

pub fn cmd_adapt(
    cfg: &ExperimentConfig,
    out: &Path,
    delta_cm: f64,
    mode: AdaptArg,
    quiet: bool,
) -> Result<(), CliError> {
    cfg.validate()?;
    snapshot(cfg, out)?;
    let base_chain = cfg.chain.build()?;
    let true_chain = base_chain
        .perturb_link_lengths(delta_cm)
        .map_err(|e| CliError::Config(format!("invalid --delta-cm: {e}")))?;
    let (mlp, norms) = checkpoint::load(&checkpoint_path(out))?;
    let (train, test) = load_sets(cfg, out)?;
    let eval_pos = eval_positions(cfg, &test);

    let mut emssl = cfg.emssl.clone();
    emssl.max_iterations = cfg.adaptation.max_iterations;
    let adapt_cfg = AdaptationConfig {
        emssl,
        refit: cfg.adaptation.refit.clone(),
        recovery_factor: cfg.adaptation.recovery_factor,
        delta_cm,
    };
    let (_, report): (Mlp, AdaptationReport) = adapt(
        mlp,
        &norms,
        &base_chain,
        &true_chain,
        mode.mode(),
        &train.p,
        &eval_pos,
        &adapt_cfg,
    )?;
    progress(
        quiet,
        format!(
            "delta {:.2} cm: before {:.2} cm, after {:.2} cm, iterations {}",
            report.delta_cm, report.before_error_cm, report.after_error_cm, report.iterations
        ),
    );
    std::fs::write(
        adapt_report_path(out, mode.mode(), delta_cm),
        serde_json::to_string_pretty(&report).map_err(selfik::Error::from)?,
    )
    .map_err(selfik::Error::from)?;
    emit(&report)
}
