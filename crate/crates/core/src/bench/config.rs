//! `key = value` run configurations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::baselines::{AdamConfig, Schedule};
use crate::model::{parse_layer_sizes, Activation, LossKind, MlpSpec, ModelError};
use crate::qn::{QnConfig, DEFAULT_CURVATURE_TOL};

/// Environment variable naming the directory that relative data paths are
/// resolved against.
pub const DATA_DIR_ENV: &str = "NAGQN_DATA_DIR";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Digits8x8,
    Mnist28,
    Wine,
    Casp,
    Quadratic,
    Rosenbrock,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 6] = [
        Self::Digits8x8,
        Self::Mnist28,
        Self::Wine,
        Self::Casp,
        Self::Quadratic,
        Self::Rosenbrock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Digits8x8 => "digits8x8",
            Self::Mnist28 => "mnist28",
            Self::Wine => "wine",
            Self::Casp => "casp",
            Self::Quadratic => "quadratic",
            Self::Rosenbrock => "rosenbrock",
        }
    }

    pub fn is_synthetic(self) -> bool {
        matches!(self, Self::Quadratic | Self::Rosenbrock)
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Self::Digits8x8 | Self::Mnist28)
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown dataset `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Obfgs,
    Onaq,
    Olbfgs,
    Olnaq,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] =
        [Self::Sgd, Self::Adam, Self::Obfgs, Self::Onaq, Self::Olbfgs, Self::Olnaq];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
            Self::Obfgs => "obfgs",
            Self::Onaq => "onaq",
            Self::Olbfgs => "olbfgs",
            Self::Olnaq => "olnaq",
        }
    }

    /// oNAQ and oLNAQ.
    pub fn uses_momentum(self) -> bool {
        matches!(self, Self::Onaq | Self::Olnaq)
    }

    /// oLBFGS and oLNAQ.
    pub fn is_limited_memory(self) -> bool {
        matches!(self, Self::Olbfgs | Self::Olnaq)
    }

    pub fn is_quasi_newton(self) -> bool {
        !matches!(self, Self::Sgd | Self::Adam)
    }

    /// Gradient evaluations per iteration.
    pub fn grad_evals_per_step(self) -> usize {
        if self.is_quasi_newton() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown optimizer `{s}`"))
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    /// Digits, wine and CASP file.
    pub data_path: PathBuf,
    /// MNIST IDX files: train images, train labels, test images, test labels.
    pub idx_paths: [PathBuf; 4],
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    /// Required for oNAQ/oLNAQ, rejected otherwise.
    pub mu: Option<f64>,
    /// Required for oLBFGS/oLNAQ, rejected otherwise.
    pub memory: Option<usize>,
    pub lambda: f64,
    pub epsilon: f64,
    pub schedule: Schedule,
    pub normalize_direction: bool,
    pub curvature_tol: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub train_fraction: f64,
    /// Caps the training split (MNIST: first 55000 of the IDX training file).
    pub train_size: Option<usize>,
    pub normalize_features: bool,
    pub split_seed: u64,
    pub seed: u64,
    pub max_epochs: usize,
    pub loss_threshold: f64,
    pub quadratic_dim: usize,
    pub quadratic_condition: f64,
}

const KEYS: &[&str] = &[
    "dataset",
    "data_path",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "layers",
    "activation",
    "optimizer",
    "mu",
    "memory",
    "lambda",
    "epsilon",
    "schedule",
    "normalize_direction",
    "curvature_tol",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "batch_size",
    "train_fraction",
    "train_size",
    "normalize_features",
    "split_seed",
    "seed",
    "max_epochs",
    "loss_threshold",
    "quadratic_dim",
    "quadratic_condition",
];

impl RunConfig {
    /// Per-dataset defaults. `mu` and `memory` are filled from the same table
    /// when the optimizer needs them.
    pub fn new(dataset: DatasetKind, optimizer: OptimizerKind) -> Self {
        use DatasetKind::*;
        let (layers, activation, mu, batch, fraction, train_size, path): (&[usize], _, _, _, _, _, _) =
            match dataset {
                Digits8x8 => (&[64, 20, 10, 10], Activation::Relu, 0.8, 64, 2.0 / 3.0, None, "optdigits.csv"),
                Mnist28 => (&[784, 100, 50, 10], Activation::Relu, 0.85, 64, 0.8, Some(55_000), ""),
                Wine => (&[11, 10, 4, 1], Activation::Sigmoid, 0.95, 32, 0.8, None, "winequality-white.csv"),
                Casp => (&[9, 10, 6, 1], Activation::Sigmoid, 0.95, 64, 0.8, None, "CASP.csv"),
                Quadratic | Rosenbrock => (&[], Activation::Relu, 0.8, 1, 0.8, None, ""),
            };
        let schedule = match optimizer {
            OptimizerKind::Sgd => Schedule::Constant { alpha: 0.01 },
            OptimizerKind::Adam => Schedule::Constant { alpha: AdamConfig::default().alpha },
            _ => Schedule::SqrtDecay { alpha0: 1.0 },
        };
        Self {
            dataset,
            data_path: PathBuf::from(path),
            idx_paths: [
                "train-images-idx3-ubyte",
                "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte",
                "t10k-labels-idx1-ubyte",
            ]
            .map(PathBuf::from),
            layers: layers.to_vec(),
            activation,
            optimizer,
            mu: optimizer.uses_momentum().then_some(mu),
            memory: optimizer.is_limited_memory().then_some(4),
            lambda: 1.0,
            epsilon: 1.0,
            schedule,
            normalize_direction: true,
            curvature_tol: DEFAULT_CURVATURE_TOL,
            adam: AdamConfig::default(),
            batch_size: batch,
            train_fraction: fraction,
            train_size,
            normalize_features: true,
            split_seed: 0,
            seed: 0,
            max_epochs: if dataset.is_synthetic() { 200 } else { 80 },
            loss_threshold: if dataset.is_synthetic() { f64::NEG_INFINITY } else { 1e-3 },
            quadratic_dim: 10,
            quadratic_condition: 100.0,
        }
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored.
    /// `dataset` and `optimizer` are required; NAQ variants also need `mu`,
    /// limited-memory variants `memory`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, message: "expected `key = value`".into() });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
        }

        let dataset: DatasetKind = parse_req(&mut entries, "dataset")?;
        let optimizer: OptimizerKind = parse_req(&mut entries, "optimizer")?;
        let mut cfg = Self::new(dataset, optimizer);
        cfg.mu = parse_opt(&mut entries, "mu")?;
        cfg.memory = parse_opt(&mut entries, "memory")?;
        if optimizer.uses_momentum() && cfg.mu.is_none() {
            return Err(ConfigError::Missing("mu"));
        }
        if optimizer.is_limited_memory() && cfg.memory.is_none() {
            return Err(ConfigError::Missing("memory"));
        }

        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = parse_opt(&mut entries, $key)? {
                    $field = v;
                }
            };
        }
        set!(cfg.data_path, "data_path");
        set!(cfg.idx_paths[0], "train_images");
        set!(cfg.idx_paths[1], "train_labels");
        set!(cfg.idx_paths[2], "test_images");
        set!(cfg.idx_paths[3], "test_labels");
        set!(cfg.activation, "activation");
        set!(cfg.lambda, "lambda");
        set!(cfg.epsilon, "epsilon");
        set!(cfg.schedule, "schedule");
        set!(cfg.normalize_direction, "normalize_direction");
        set!(cfg.curvature_tol, "curvature_tol");
        set!(cfg.adam.beta1, "adam_beta1");
        set!(cfg.adam.beta2, "adam_beta2");
        set!(cfg.adam.epsilon, "adam_epsilon");
        set!(cfg.batch_size, "batch_size");
        set!(cfg.train_fraction, "train_fraction");
        set!(cfg.normalize_features, "normalize_features");
        set!(cfg.split_seed, "split_seed");
        set!(cfg.seed, "seed");
        set!(cfg.max_epochs, "max_epochs");
        set!(cfg.loss_threshold, "loss_threshold");
        set!(cfg.quadratic_dim, "quadratic_dim");
        set!(cfg.quadratic_condition, "quadratic_condition");
        if let Some(n) = parse_opt(&mut entries, "train_size")? {
            cfg.train_size = Some(n);
        }
        if let Some(layers) = entries.remove("layers") {
            cfg.layers = parse_layer_sizes(&layers).map_err(|e| invalid("layers", e.to_string()))?;
        }
        debug_assert!(entries.is_empty(), "unhandled keys {entries:?}");
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Checks ranges and optimizer-specific fields.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let opt = self.optimizer;
        match (opt.uses_momentum(), self.mu) {
            (true, None) => return Err(ConfigError::Missing("mu")),
            (true, Some(mu)) if !(mu > 0.0 && mu < 1.0) => return Err(invalid("mu", "must lie in (0, 1)")),
            (false, Some(_)) => return Err(invalid("mu", format!("only used by onaq and olnaq, not {opt}"))),
            _ => {}
        }
        match (opt.is_limited_memory(), self.memory) {
            (true, None) => return Err(ConfigError::Missing("memory")),
            (true, Some(0)) => return Err(invalid("memory", "must be positive")),
            (false, Some(_)) => return Err(invalid("memory", format!("only used by olbfgs and olnaq, not {opt}"))),
            _ => {}
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", "must be ≥ 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train_fraction", "must lie in (0, 1)"));
        }
        if self.loss_threshold.is_nan() {
            return Err(invalid("loss_threshold", "must be a number"));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(invalid("adam_beta1", "Adam decay rates must lie in [0, 1)"));
        }
        if self.dataset == DatasetKind::Quadratic && (self.quadratic_dim == 0 || !(self.quadratic_condition >= 1.0)) {
            return Err(invalid("quadratic_dim", "need dim ≥ 1 and condition ≥ 1"));
        }
        if !self.dataset.is_synthetic() {
            self.mlp_spec().map_err(|e| invalid("layers", e.to_string()))?;
        }
        Ok(())
    }

    /// Softmax cross-entropy for classification, MSE for regression.
    pub fn mlp_spec(&self) -> Result<MlpSpec, ModelError> {
        let loss = if self.dataset.is_classification() {
            LossKind::SoftmaxCrossEntropy
        } else {
            LossKind::MeanSquaredError
        };
        MlpSpec::new(self.layers.clone(), self.activation, loss)
    }

    pub fn qn_config(&self) -> QnConfig {
        QnConfig {
            momentum: self.mu.unwrap_or(0.0),
            lambda: self.lambda,
            schedule: self.schedule,
            normalize_direction: self.normalize_direction,
            curvature_tol: self.curvature_tol,
        }
    }

    /// Joins relative paths onto `$NAGQN_DATA_DIR` when it is set.
    pub fn resolve(path: &Path) -> PathBuf {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Serializes back to the `key = value` format.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("dataset = {}", self.dataset),
            format!("optimizer = {}", self.optimizer),
        ];
        if let Some(mu) = self.mu {
            lines.push(format!("mu = {mu}"));
        }
        if let Some(m) = self.memory {
            lines.push(format!("memory = {m}"));
        }
        match self.dataset {
            DatasetKind::Mnist28 => {
                for (key, p) in ["train_images", "train_labels", "test_images", "test_labels"].iter().zip(&self.idx_paths) {
                    lines.push(format!("{key} = {}", p.display()));
                }
            }
            d if !d.is_synthetic() => lines.push(format!("data_path = {}", self.data_path.display())),
            _ => {}
        }
        if !self.dataset.is_synthetic() {
            let layers: Vec<String> = self.layers.iter().map(usize::to_string).collect();
            lines.push(format!("layers = {}", layers.join("-")));
            lines.push(format!("activation = {}", self.activation));
            lines.push(format!("batch_size = {}", self.batch_size));
            lines.push(format!("train_fraction = {:?}", self.train_fraction));
            if let Some(n) = self.train_size {
                lines.push(format!("train_size = {n}"));
            }
            lines.push(format!("normalize_features = {}", self.normalize_features));
            lines.push(format!("split_seed = {}", self.split_seed));
        }
        if self.dataset == DatasetKind::Quadratic {
            lines.push(format!("quadratic_dim = {}", self.quadratic_dim));
            lines.push(format!("quadratic_condition = {:?}", self.quadratic_condition));
        }
        lines.push(format!("lambda = {:?}", self.lambda));
        lines.push(format!("epsilon = {:?}", self.epsilon));
        lines.push(format!("schedule = {}", self.schedule));
        lines.push(format!("normalize_direction = {}", self.normalize_direction));
        lines.push(format!("curvature_tol = {:?}", self.curvature_tol));
        lines.push(format!("adam_beta1 = {:?}", self.adam.beta1));
        lines.push(format!("adam_beta2 = {:?}", self.adam.beta2));
        lines.push(format!("adam_epsilon = {:?}", self.adam.epsilon));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("max_epochs = {}", self.max_epochs));
        lines.push(format!("loss_threshold = {:?}", self.loss_threshold));
        lines.join("\n") + "\n"
    }
}

fn parse_opt<T: FromStr>(entries: &mut BTreeMap<String, String>, key: &'static str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    entries
        .remove(key)
        .map(|v| v.parse::<T>().map_err(|e| invalid(key, format!("`{v}`: {e}"))))
        .transpose()
}

fn parse_req<T: FromStr>(entries: &mut BTreeMap<String, String>, key: &'static str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    parse_opt(entries, key)?.ok_or(ConfigError::Missing(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_digits_config_takes_table_defaults() {
        let cfg = RunConfig::parse("dataset = digits8x8\noptimizer = olnaq\nmu = 0.8\nmemory = 4\n").unwrap();
        assert_eq!(cfg.layers, vec![64, 20, 10, 10]);
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.max_epochs, 80);
        assert_eq!(cfg.loss_threshold, 1e-3);
        assert_eq!(cfg.mlp_spec().unwrap().param_count(), 1620);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# digits run\n\ndataset = digits8x8   # 8x8\noptimizer = sgd\nschedule = gain(10, 0.5)\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.schedule, Schedule::Gain { tau: 10.0, alpha0: 0.5 });
    }

    #[test]
    fn naq_without_mu_is_rejected() {
        let err = RunConfig::parse("dataset = digits8x8\noptimizer = olnaq\nmemory = 4\n").unwrap_err();
        assert_eq!(err, ConfigError::Missing("mu"));
    }

    #[test]
    fn field_for_other_family_is_rejected() {
        assert!(RunConfig::parse("dataset = wine\noptimizer = obfgs\nmemory = 4\n").is_err());
        assert!(RunConfig::parse("dataset = wine\noptimizer = olbfgs\nmemory = 4\nmu = 0.9\n").is_err());
        assert_eq!(
            RunConfig::parse("dataset = wine\noptimizer = olbfgs\n").unwrap_err(),
            ConfigError::Missing("memory")
        );
    }

    #[test]
    fn bad_lines_and_keys() {
        assert!(matches!(
            RunConfig::parse("dataset digits8x8"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert_eq!(
            RunConfig::parse("dataset = wine\nfoo = 1\n").unwrap_err(),
            ConfigError::UnknownKey("foo".into())
        );
        assert_eq!(
            RunConfig::parse("dataset = wine\ndataset = casp\n").unwrap_err(),
            ConfigError::DuplicateKey("dataset".into())
        );
        assert!(RunConfig::parse("dataset = wine\noptimizer = sgd\nbatch_size = 0\n").is_err());
        assert!(RunConfig::parse("dataset = iris\noptimizer = sgd\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        for d in DatasetKind::ALL {
            for o in OptimizerKind::ALL {
                let mut cfg = RunConfig::new(d, o);
                cfg.seed = 17;
                cfg.lambda = 0.3;
                let back = RunConfig::parse(&cfg.to_text()).unwrap();
                assert_eq!(back, cfg, "{d} {o}");
            }
        }
    }
}
