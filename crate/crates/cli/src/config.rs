//! Experiment configuration: one JSON document covering the arm, the
//! network, the learning loop, the dataset, and the benchmark/adaptation
//! settings. Angles are degrees and lengths centimeters at this boundary;
//! everything is converted to radians on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use selfik::adaptation::RefitConfig;
use selfik::emssl::EmsslConfig;
use selfik::kinematics::{Axis, KinematicChain};
use selfik::rng::derive_seed;

use crate::CliError;

/// Arm geometry as written in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub axes: Vec<Axis>,
    pub link_lengths_cm: Vec<f64>,
    pub joint_limits_deg: Vec<(f64, f64)>,
}

impl ChainSpec {
    pub fn build(&self) -> Result<KinematicChain, CliError> {
        let limits = self
            .joint_limits_deg
            .iter()
            .map(|&(lo, hi)| (lo.to_radians(), hi.to_radians()))
            .collect();
        KinematicChain::new(self.axes.clone(), self.link_lengths_cm.clone(), limits)
            .map_err(|e| CliError::Config(format!("invalid chain spec: {e}")))
    }

    fn default6(half_range_deg: f64) -> Self {
        Self {
            axes: vec![Axis::Z, Axis::Y, Axis::Z, Axis::Y, Axis::Z, Axis::Y],
            link_lengths_cm: vec![20.0; 6],
            joint_limits_deg: vec![(-half_range_deg, half_range_deg); 6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Total motor-babbling samples; `train` of them go to the training
    /// split, the rest to the test split.
    pub total: usize,
    pub train: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub repeats: usize,
    pub batch_sizes: Vec<usize>,
    pub thread_counts: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeats: 3,
            batch_sizes: vec![1, 8, 64, 512, 1024],
            thread_counts: vec![1, 2, 4, 6, 12],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptSettings {
    /// Iteration budget for the adaptation loop.
    pub max_iterations: usize,
    /// Recovery threshold as a multiple of the pre-change converged error.
    pub recovery_factor: f64,
    pub refit: RefitConfig,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            recovery_factor: 1.5,
            refit: RefitConfig::default(),
        }
    }
}

/// The whole experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    pub emssl: EmsslConfig,
    pub dataset: DatasetConfig,
    /// Evaluation subset size drawn from the head of the test split
    /// (0 = the whole split).
    pub eval_goals: usize,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub adaptation: AdaptSettings,
}

impl ExperimentConfig {
    /// Full-scale preset: the reference network and hyperparameters with
    /// 100,000 samples (70,000 train).
    pub fn paper() -> Self {
        Self {
            chain: ChainSpec::default6(90.0),
            emssl: EmsslConfig::reference(vec![3, 1024, 512, 256, 128, 6]),
            dataset: DatasetConfig {
                total: 100_000,
                train: 70_000,
                seed: 7,
            },
            eval_goals: 0,
            bench: BenchConfig::default(),
            adaptation: AdaptSettings::default(),
        }
    }

    /// Minutes-scale preset for CI and desk runs: a small network, 25,000
    /// samples, 30 iterations, errors evaluated on a fixed 2,000-goal
    /// subset.
    pub fn desk() -> Self {
        let mut emssl = EmsslConfig::reference(vec![3, 128, 64, 6]);
        emssl.max_iterations = 30;
        Self {
            chain: ChainSpec::default6(90.0),
            emssl,
            dataset: DatasetConfig {
                total: 25_000,
                train: 20_000,
                seed: 7,
            },
            eval_goals: 2_000,
            bench: BenchConfig::default(),
            adaptation: AdaptSettings::default(),
        }
    }

    /// Resolve the `--config` argument: a preset name or a JSON file path.
    pub fn resolve(arg: Option<&str>) -> Result<Self, CliError> {
        match arg {
            None | Some("desk") => Ok(Self::desk()),
            Some("paper") => Ok(Self::paper()),
            Some(path) => Self::load(Path::new(path)),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(selfik::Error::from)?;
        std::fs::write(path, text).map_err(selfik::Error::from)?;
        Ok(())
    }

    /// Replace every stochastic seed from one master seed.
    pub fn reseed(&mut self, master: u64) {
        self.dataset.seed = master;
        self.emssl.init_seed = derive_seed(master, 1, 0);
        self.emssl.shuffle_seed = derive_seed(master, 2, 0);
        self.adaptation.refit.seed = derive_seed(master, 3, 0);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let chain = self.chain.build()?;
        if self.emssl.net_dims.first() != Some(&3) {
            return Err(CliError::Config(format!(
                "net input width must be 3, got {:?}",
                self.emssl.net_dims.first()
            )));
        }
        if self.emssl.net_dims.last() != Some(&chain.n_joints()) {
            return Err(CliError::Config(format!(
                "net output width {:?} does not match the {}-joint chain",
                self.emssl.net_dims.last(),
                chain.n_joints()
            )));
        }
        if self.dataset.train == 0 || self.dataset.train >= self.dataset.total {
            return Err(CliError::Config(format!(
                "train size {} must be in 1..{}",
                self.dataset.train, self.dataset.total
            )));
        }
        if self.emssl.infer_batch > self.dataset.train || self.emssl.train_batch > self.dataset.train
        {
            return Err(CliError::Config(
                "batch sizes exceed the training split".into(),
            ));
        }
        if self.bench.repeats < 3 {
            return Err(CliError::Config("bench repeats must be >= 3".into()));
        }
        Ok(())
    }

    /// Seed for the train/test split, derived so dataset generation stays
    /// a single-seed affair in the config file.
    pub fn split_seed(&self) -> u64 {
        derive_seed(self.dataset.seed, 0x51, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use selfik::emssl::default_workers;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [ExperimentConfig::paper(), ExperimentConfig::desk()] {
            cfg.validate().unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
        assert_eq!(ExperimentConfig::desk().emssl.net_dims, vec![3, 128, 64, 6]);
        assert_eq!(
            ExperimentConfig::paper().emssl.net_dims,
            vec![3, 1024, 512, 256, 128, 6]
        );
        assert_eq!(ExperimentConfig::paper().emssl.workers, default_workers());
    }

    #[test]
    fn validation_catches_mismatched_net() {
        let mut cfg = ExperimentConfig::desk();
        cfg.emssl.net_dims = vec![3, 16, 5];
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));

        let mut cfg = ExperimentConfig::desk();
        cfg.dataset.train = cfg.dataset.total;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reseed_changes_every_seed_deterministically() {
        let mut a = ExperimentConfig::desk();
        let mut b = ExperimentConfig::desk();
        a.reseed(42);
        b.reseed(42);
        assert_eq!(a, b);
        assert_eq!(a.dataset.seed, 42);
        assert_ne!(a.emssl.init_seed, ExperimentConfig::desk().emssl.init_seed);
    }
}
