//! Training loop shared by every optimizer and dataset.

use std::time::Instant;

use ndarray::{Array1, ArrayView1, Axis};
use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, DatasetKind, OptimizerKind, RunConfig};
use crate::baselines::{sgd_step, AdamState, Schedule};
use crate::data::{
    load_casp, load_digits_csv, load_idx_mnist, load_wine, split_train_test, z_normalize, BatchSampler, DataError,
    Dataset,
};
use crate::linalg::norm2;
use crate::model::{
    CountingObjective, MlpObjective, ModelError, QuadraticObjective, RosenbrockObjective, StochasticObjective,
    Targets,
};
use crate::qn::{
    obfgs_step, olbfgs_step, olnaq_step, onaq_step, DenseQnState, InitialScaling, LimitedQnState, QnConfig,
    StepError, StepReport,
};
use crate::ParamVector;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Metrics at the end of an epoch (epoch 0 is the initial point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRecord {
    pub epoch: usize,
    /// Optimizer iterations so far.
    pub iteration: u64,
    /// Cumulative time spent inside optimizer steps.
    pub wall_ms: f64,
    /// Mean loss over the full training set.
    pub train_loss: f64,
    /// Accuracy (classification), RMSE (regression) or `‖∇E‖` (synthetic).
    pub test_metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Threshold,
    MaxEpochs,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub dataset: DatasetKind,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub loss_threshold: f64,
    pub records: Vec<TrainingRecord>,
    pub stop: StopReason,
    /// Optimizer iterations attempted, including skipped ones.
    pub steps: u64,
    /// Iterations skipped because the search direction vanished.
    pub skipped_steps: u64,
    /// Curvature pairs rejected by the guard.
    pub rejected_pairs: u64,
    /// Gradient evaluations made by the optimizer (metrics excluded).
    pub grad_evals: u64,
    pub final_params: ParamVector,
}

impl RunLog {
    pub fn epochs_to_threshold(&self) -> Option<usize> {
        epochs_to_threshold(&self.records, self.loss_threshold)
    }

    pub fn last(&self) -> &TrainingRecord {
        self.records.last().expect("a run always has the epoch-0 record")
    }
}

/// First epoch whose training loss is below `threshold`.
pub fn epochs_to_threshold(records: &[TrainingRecord], threshold: f64) -> Option<usize> {
    records.iter().find(|r| r.train_loss < threshold).map(|r| r.epoch)
}

/// Optimizer state behind one dispatch point.
#[derive(Debug, Clone)]
pub enum Stepper {
    Sgd { w: ParamVector, schedule: Schedule, k: u64 },
    Adam { w: ParamVector, state: AdamState, schedule: Schedule },
    Dense { state: DenseQnState, momentum: bool },
    Limited { state: LimitedQnState, momentum: bool },
}

impl Stepper {
    pub fn new(cfg: &RunConfig, w0: ParamVector) -> Self {
        let momentum = cfg.optimizer.uses_momentum();
        match cfg.optimizer {
            OptimizerKind::Sgd => Self::Sgd { w: w0, schedule: cfg.schedule, k: 1 },
            OptimizerKind::Adam => {
                let state = AdamState::new(w0.len(), cfg.adam);
                Self::Adam { w: w0, state, schedule: cfg.schedule }
            }
            OptimizerKind::Obfgs | OptimizerKind::Onaq => {
                Self::Dense { state: DenseQnState::new(w0, cfg.epsilon), momentum }
            }
            OptimizerKind::Olbfgs | OptimizerKind::Olnaq => {
                let m = cfg.memory.expect("validated config has memory");
                let scaling = InitialScaling::Stochastic { epsilon: cfg.epsilon };
                Self::Limited { state: LimitedQnState::new(w0, m, scaling), momentum }
            }
        }
    }

    pub fn params(&self) -> &ParamVector {
        match self {
            Self::Sgd { w, .. } | Self::Adam { w, .. } => w,
            Self::Dense { state, .. } => state.params(),
            Self::Limited { state, .. } => state.params(),
        }
    }

    pub fn step<O: StochasticObjective + ?Sized>(
        &mut self,
        obj: &O,
        batch: &O::Batch,
        qn: &QnConfig,
    ) -> Result<StepReport, StepError> {
        match self {
            Self::Sgd { w, schedule, k } => {
                let alpha = schedule.step_size(*k)?;
                let (loss, grad) = obj.evaluate(w.view(), batch)?;
                *w = sgd_step(w.view(), grad.view(), alpha);
                let report = first_order_report(*k, alpha, loss);
                *k += 1;
                Ok(report)
            }
            Self::Adam { w, state, schedule } => {
                let k = state.iterations() + 1;
                let alpha = schedule.step_size(k)?;
                let (loss, grad) = obj.evaluate(w.view(), batch)?;
                state.step_with(w, grad.view(), alpha);
                Ok(first_order_report(k, alpha, loss))
            }
            Self::Dense { state, momentum: false } => obfgs_step(state, obj, batch, qn),
            Self::Dense { state, momentum: true } => onaq_step(state, obj, batch, qn),
            Self::Limited { state, momentum: false } => olbfgs_step(state, obj, batch, qn),
            Self::Limited { state, momentum: true } => olnaq_step(state, obj, batch, qn),
        }
    }
}

fn first_order_report(k: u64, step_size: f64, loss: f64) -> StepReport {
    StepReport { k, step_size, loss_before: loss, loss_after: loss, pair_accepted: false, grad_evals: 1 }
}

/// Train/test splits after loading, splitting and normalization.
pub fn prepare_data(cfg: &RunConfig) -> Result<(Dataset, Dataset), RunError> {
    let resolve = RunConfig::resolve;
    let (train, test) = match cfg.dataset {
        DatasetKind::Mnist28 => {
            let p = &cfg.idx_paths;
            let train = load_idx_mnist(resolve(&p[0]), resolve(&p[1]))?;
            let test = load_idx_mnist(resolve(&p[2]), resolve(&p[3]))?;
            (train, test)
        }
        DatasetKind::Digits8x8 | DatasetKind::Wine | DatasetKind::Casp => {
            let path = resolve(&cfg.data_path);
            let all = match cfg.dataset {
                DatasetKind::Digits8x8 => load_digits_csv(&path)?,
                DatasetKind::Wine => load_wine(&path)?,
                _ => load_casp(&path)?,
            };
            split_train_test(&all, cfg.train_fraction, cfg.split_seed)
        }
        DatasetKind::Quadratic | DatasetKind::Rosenbrock => {
            return Err(ConfigError::Invalid { key: "dataset".into(), message: "synthetic datasets have no files".into() }.into())
        }
    };
    let train = match cfg.train_size {
        Some(n) => train.truncate(n),
        None => train,
    };
    if cfg.normalize_features {
        let (tr, te, _) = z_normalize(&train, &test);
        Ok((tr, te))
    } else {
        Ok((train, test))
    }
}

/// Classification accuracy or regression RMSE on `ds`.
pub fn test_metric(obj: &MlpObjective, w: ArrayView1<f64>, ds: &Dataset) -> Result<f64, ModelError> {
    let out = obj.predict(w, ds.features().view())?;
    match ds.targets() {
        Targets::Classes(classes) => {
            let hits = out
                .axis_iter(Axis(0))
                .zip(classes)
                .filter(|(row, &c)| argmax(*row) == c)
                .count();
            Ok(hits as f64 / classes.len() as f64)
        }
        Targets::Values(values) => {
            let sq: f64 = (&out - values).iter().map(|e| e * e).sum();
            Ok((sq / values.len() as f64).sqrt())
        }
    }
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Runs one experiment. Non-finite losses end the run with
/// [`StopReason::Diverged`] after a final diagnostic record.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunLog, RunError> {
    cfg.validate()?;
    match cfg.dataset {
        DatasetKind::Quadratic => {
            let obj = QuadraticObjective::random(cfg.quadratic_dim, cfg.quadratic_condition, cfg.seed)?;
            run_synthetic(cfg, obj, Array1::zeros(cfg.quadratic_dim))
        }
        DatasetKind::Rosenbrock => run_synthetic(cfg, RosenbrockObjective, ndarray::array![-1.2, 1.0]),
        _ => {
            let (train, test) = prepare_data(cfg)?;
            run_mlp(cfg, &train, &test)
        }
    }
}

/// Trains an MLP on already prepared splits.
pub fn run_mlp(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<RunLog, RunError> {
    cfg.validate()?;
    let spec = cfg.mlp_spec()?;
    let obj = CountingObjective::new(MlpObjective::new(spec.clone()));
    let qn = cfg.qn_config();
    let mut stepper = Stepper::new(cfg, spec.init_params(cfg.seed));
    let mut sampler = BatchSampler::new(train, cfg.batch_size, cfg.seed);
    let mut log = RunLog::start(cfg);

    let record = |w: ArrayView1<f64>, epoch: usize, iteration: u64, wall_ms: f64| -> Result<TrainingRecord, RunError> {
        let train_loss = obj.inner().mean_loss(w, train.features().view(), train.targets())?;
        let test_metric = test_metric(obj.inner(), w, test)?;
        Ok(TrainingRecord { epoch, iteration, wall_ms, train_loss, test_metric })
    };

    let mut wall_ms = 0.0;
    let first = record(stepper.params().view(), 0, 0, 0.0)?;
    if log.push(first) {
        return Ok(log.finish(stepper, obj.grad_evals()));
    }
    for epoch in 1..=cfg.max_epochs {
        let mut blew_up = false;
        for _ in 0..sampler.batches_per_epoch() {
            let batch = sampler.next_batch()?;
            let t = Instant::now();
            let outcome = stepper.step(&obj, &batch, &qn);
            wall_ms += t.elapsed().as_secs_f64() * 1e3;
            if !log.absorb(outcome)? {
                blew_up = true;
                break;
            }
        }
        let mut rec = record(stepper.params().view(), epoch, log.steps, wall_ms)?;
        if blew_up && rec.train_loss.is_finite() {
            rec.train_loss = f64::NAN;
        }
        if log.push(rec) {
            break;
        }
    }
    Ok(log.finish(stepper, obj.grad_evals()))
}

/// Full-batch run on a deterministic objective: one step per epoch and the
/// gradient norm as test metric.
fn run_synthetic<O: StochasticObjective<Batch = ()>>(
    cfg: &RunConfig,
    obj: O,
    w0: ParamVector,
) -> Result<RunLog, RunError> {
    let obj = CountingObjective::new(obj);
    let qn = cfg.qn_config();
    let mut stepper = Stepper::new(cfg, w0);
    let mut log = RunLog::start(cfg);
    let record = |w: ArrayView1<f64>, epoch: usize, iteration: u64, wall_ms: f64| -> Result<TrainingRecord, RunError> {
        let (train_loss, grad) = obj.inner().evaluate(w, &())?;
        Ok(TrainingRecord { epoch, iteration, wall_ms, train_loss, test_metric: norm2(grad.view()) })
    };
    let mut wall_ms = 0.0;
    if log.push(record(stepper.params().view(), 0, 0, 0.0)?) {
        return Ok(log.finish(stepper, obj.grad_evals()));
    }
    for epoch in 1..=cfg.max_epochs {
        let t = Instant::now();
        let outcome = stepper.step(&obj, &(), &qn);
        wall_ms += t.elapsed().as_secs_f64() * 1e3;
        let finite = log.absorb(outcome)?;
        let mut rec = record(stepper.params().view(), epoch, log.steps, wall_ms)?;
        if !finite && rec.train_loss.is_finite() {
            rec.train_loss = f64::NAN;
        }
        if log.push(rec) {
            break;
        }
    }
    Ok(log.finish(stepper, obj.grad_evals()))
}

impl RunLog {
    fn start(cfg: &RunConfig) -> Self {
        Self {
            dataset: cfg.dataset,
            optimizer: cfg.optimizer,
            seed: cfg.seed,
            loss_threshold: cfg.loss_threshold,
            records: Vec::new(),
            stop: StopReason::MaxEpochs,
            steps: 0,
            skipped_steps: 0,
            rejected_pairs: 0,
            grad_evals: 0,
            final_params: Array1::zeros(0),
        }
    }

    /// Books one step outcome. Returns `false` when the step saw a
    /// non-finite loss.
    fn absorb(&mut self, outcome: Result<StepReport, StepError>) -> Result<bool, RunError> {
        self.steps += 1;
        match outcome {
            Ok(rep) => {
                if self.optimizer.is_quasi_newton() && !rep.pair_accepted {
                    self.rejected_pairs += 1;
                }
                Ok(rep.loss_before.is_finite() && rep.loss_after.is_finite())
            }
            Err(StepError::ZeroDirection { .. }) => {
                self.skipped_steps += 1;
                Ok(true)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Appends a record. Returns `true` when the run should stop.
    fn push(&mut self, rec: TrainingRecord) -> bool {
        let loss = rec.train_loss;
        self.records.push(rec);
        if !loss.is_finite() || !rec.test_metric.is_finite() {
            self.stop = StopReason::Diverged;
            true
        } else if loss < self.loss_threshold {
            self.stop = StopReason::Threshold;
            true
        } else {
            false
        }
    }

    fn finish(mut self, stepper: Stepper, grad_evals: usize) -> Self {
        self.grad_evals = grad_evals as u64;
        self.final_params = stepper.params().clone();
        self
    }
}

/// Medians over a set of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seeds: Vec<u64>,
    /// `None` when the median run does not reach the threshold.
    pub median_epochs: Option<f64>,
    pub median_final_train_loss: f64,
    pub median_final_test_metric: f64,
    pub median_wall_ms: f64,
    pub diverged: usize,
}

/// Runs `cfg` once per seed, in parallel. Each run stays single-threaded.
pub fn run_seeds(cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<RunLog>, RunError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run_experiment(&c)
        })
        .collect()
}

/// Median of `values`; missing entries sort above every number.
pub fn median_with_missing(values: &[Option<f64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    m.is_finite().then_some(m)
}

pub fn median(values: &[f64]) -> f64 {
    median_with_missing(&values.iter().map(|&x| Some(x)).collect::<Vec<_>>()).unwrap_or(f64::NAN)
}

pub fn summarize(logs: &[RunLog]) -> SeedSummary {
    let epochs: Vec<Option<f64>> = logs.iter().map(|l| l.epochs_to_threshold().map(|e| e as f64)).collect();
    SeedSummary {
        seeds: logs.iter().map(|l| l.seed).collect(),
        median_epochs: median_with_missing(&epochs),
        median_final_train_loss: median(&logs.iter().map(|l| l.last().train_loss).collect::<Vec<_>>()),
        median_final_test_metric: median(&logs.iter().map(|l| l.last().test_metric).collect::<Vec<_>>()),
        median_wall_ms: median(&logs.iter().map(|l| l.last().wall_ms).collect::<Vec<_>>()),
        diverged: logs.iter().filter(|l| l.stop == StopReason::Diverged).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, train_loss: f64) -> TrainingRecord {
        TrainingRecord { epoch, iteration: epoch as u64, wall_ms: 0.0, train_loss, test_metric: 0.0 }
    }

    #[test]
    fn threshold_epochs() {
        assert_eq!(epochs_to_threshold(&[rec(1, 0.5), rec(2, 1e-4)], 1e-3), Some(2));
        assert_eq!(epochs_to_threshold(&[rec(0, 1e-4), rec(1, 1e-5)], 1e-3), Some(0));
        assert_eq!(epochs_to_threshold(&[rec(0, 0.5), rec(1, 0.2)], 1e-3), None);
    }

    #[test]
    fn medians() {
        assert_eq!(median_with_missing(&[Some(3.0), None, Some(1.0)]), Some(3.0));
        assert_eq!(median_with_missing(&[Some(3.0), None, None]), None);
        assert_eq!(median_with_missing(&[Some(4.0), Some(2.0)]), Some(3.0));
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }

    #[test]
    fn zero_epochs_gives_only_initial_record() {
        let mut cfg = RunConfig::new(DatasetKind::Quadratic, OptimizerKind::Onaq);
        cfg.max_epochs = 0;
        let log = run_experiment(&cfg).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].epoch, 0);
        assert_eq!(log.grad_evals, 0);
    }

    #[test]
    fn quadratic_onaq_full_batch() {
        let mut cfg = RunConfig::new(DatasetKind::Quadratic, OptimizerKind::Onaq);
        cfg.mu = Some(0.5);
        cfg.lambda = 0.0;
        cfg.epsilon = 0.1;
        cfg.normalize_direction = false;
        cfg.max_epochs = 100;
        let log = run_experiment(&cfg).unwrap();
        assert_eq!(log.records.len(), 101);
        assert!(log.last().test_metric <= 1e-6, "‖∇E‖ = {}", log.last().test_metric);
        assert_eq!(log.grad_evals, 2 * log.steps);
    }

    #[test]
    fn first_order_costs_one_evaluation() {
        for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut cfg = RunConfig::new(DatasetKind::Rosenbrock, opt);
            cfg.max_epochs = 7;
            cfg.schedule = Schedule::Constant { alpha: 1e-4 };
            let log = run_experiment(&cfg).unwrap();
            assert_eq!((log.steps, log.grad_evals), (7, 7));
            assert!(log.last().train_loss < log.records[0].train_loss);
        }
    }

    #[test]
    fn divergence_stops_with_diagnostic_record() {
        let mut cfg = RunConfig::new(DatasetKind::Rosenbrock, OptimizerKind::Sgd);
        cfg.schedule = Schedule::Constant { alpha: 1.0 };
        cfg.max_epochs = 50;
        let log = run_experiment(&cfg).unwrap();
        assert_eq!(log.stop, StopReason::Diverged);
        assert!(!log.last().train_loss.is_finite());
        assert!(log.records.len() < 51);
    }
}
