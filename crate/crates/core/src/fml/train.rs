use ndarray::s;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::Value;

use super::adam::AdamState;
use super::model::{FlowMapModel, Normalization};
use super::schedule::CyclicLr;
use crate::error::{Error, Result};
use crate::pipeline::{check_keys, field};
use crate::types::BurstDataset;

/// Optimizer and schedule settings.
///
/// Defaults reproduce the reference training run: Adam, batch 64, 3,000
/// epochs, a cyclic rate between 1e-7 and 1e-3 with decay 0.999997.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub n_r: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_base: f64,
    pub lr_max: f64,
    pub lr_decay: f64,
    pub lr_half_cycle: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Standard deviation of Gaussian noise added to the memory-window
    /// inputs of each training batch, in normalized units. Targets stay
    /// clean. Zero turns it off.
    pub input_noise: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_r: 10,
            batch_size: 64,
            epochs: 3000,
            lr_base: 1e-7,
            lr_max: 1e-3,
            lr_decay: 0.999997,
            lr_half_cycle: 2000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            input_noise: 0.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> CyclicLr {
        CyclicLr {
            base: self.lr_base,
            max: self.lr_max,
            decay: self.lr_decay,
            half_cycle: self.lr_half_cycle,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_r < 1 {
            v.push("n_R must be >= 1".into());
        }
        if self.batch_size < 1 {
            v.push("batch_size must be >= 1".into());
        }
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.lr_base) && pos(self.lr_max) && self.lr_base <= self.lr_max) {
            v.push(format!(
                "need 0 < lr_base <= lr_max, got {} and {}",
                self.lr_base, self.lr_max
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            v.push(format!("lr_decay must be in (0, 1], got {}", self.lr_decay));
        }
        if self.lr_half_cycle < 1 {
            v.push("lr_half_cycle must be >= 1".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                v.push(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !pos(self.adam_eps) {
            v.push(format!("adam_eps must be > 0, got {}", self.adam_eps));
        }
        if !(self.input_noise.is_finite() && self.input_noise >= 0.0) {
            v.push(format!("input_noise must be >= 0, got {}", self.input_noise));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigViolations(v))
        }
    }
}

/// Learning rate at a global iteration count.
pub fn cyclic_lr(iteration: u64, cfg: &TrainConfig) -> f64 {
    cfg.schedule().at(iteration)
}

/// Network shape plus optimizer settings, as read from a training config.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub hidden_widths: Vec<usize>,
    /// Build the model in increment form (see [`FlowMapModel::residual`]).
    pub residual: bool,
    pub config: TrainConfig,
}

const TRAIN_REQUIRED: &[&str] = &["hidden_widths", "epochs", "seed"];
const TRAIN_OPTIONAL: &[&str] = &[
    "n_R",
    "batch_size",
    "lr_base",
    "lr_max",
    "lr_decay",
    "lr_half_cycle",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "input_noise",
    "residual",
];

pub fn train_config_keys() -> impl Iterator<Item = &'static str> {
    TRAIN_REQUIRED.iter().chain(TRAIN_OPTIONAL).copied()
}

impl TrainSpec {
    /// Parses a strict JSON training config. `n_R`, when omitted, is left
    /// at 0 and taken from the dataset at training time.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let mut errs = Vec::new();
        check_keys(obj, TRAIN_REQUIRED, TRAIN_OPTIONAL, &mut errs);
        let d = TrainConfig::default();
        let hidden_widths: Option<Vec<usize>> = field(obj, "hidden_widths", &mut errs);
        let residual: bool = field(obj, "residual", &mut errs).unwrap_or(false);
        let config = TrainConfig {
            n_r: field(obj, "n_R", &mut errs).unwrap_or(0),
            batch_size: field(obj, "batch_size", &mut errs).unwrap_or(d.batch_size),
            epochs: field(obj, "epochs", &mut errs).unwrap_or(d.epochs),
            lr_base: field(obj, "lr_base", &mut errs).unwrap_or(d.lr_base),
            lr_max: field(obj, "lr_max", &mut errs).unwrap_or(d.lr_max),
            lr_decay: field(obj, "lr_decay", &mut errs).unwrap_or(d.lr_decay),
            lr_half_cycle: field(obj, "lr_half_cycle", &mut errs).unwrap_or(d.lr_half_cycle),
            adam_beta1: field(obj, "adam_beta1", &mut errs).unwrap_or(d.adam_beta1),
            adam_beta2: field(obj, "adam_beta2", &mut errs).unwrap_or(d.adam_beta2),
            adam_eps: field(obj, "adam_eps", &mut errs).unwrap_or(d.adam_eps),
            input_noise: field(obj, "input_noise", &mut errs).unwrap_or(d.input_noise),
            rng_seed: field(obj, "seed", &mut errs).unwrap_or(d.rng_seed),
        };
        // n_R = 0 means "from the dataset"; check the rest with a placeholder.
        errs.extend(TrainConfig { n_r: config.n_r.max(1), ..config.clone() }.violations());
        match &hidden_widths {
            Some(h) if h.is_empty() => errs.push("hidden_widths must not be empty".into()),
            Some(h) if h.contains(&0) => errs.push("hidden_widths entries must be >= 1".into()),
            _ => {}
        }
        if errs.is_empty() {
            Ok(Self {
                hidden_widths: hidden_widths.unwrap(),
                residual,
                config,
            })
        } else {
            Err(Error::ConfigViolations(errs))
        }
    }

    pub fn to_json(&self) -> Value {
        let c = &self.config;
        let mut v = serde_json::json!({
            "hidden_widths": self.hidden_widths,
            "epochs": c.epochs,
            "batch_size": c.batch_size,
            "lr_base": c.lr_base,
            "lr_max": c.lr_max,
            "lr_decay": c.lr_decay,
            "lr_half_cycle": c.lr_half_cycle,
            "adam_beta1": c.adam_beta1,
            "adam_beta2": c.adam_beta2,
            "adam_eps": c.adam_eps,
            "input_noise": c.input_noise,
            "seed": c.rng_seed,
        });
        if c.n_r > 0 {
            v["n_R"] = c.n_r.into();
        }
        if self.residual {
            v["residual"] = true.into();
        }
        v
    }
}

/// Iteration counts of a training run, computed without any arithmetic on data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrainPlan {
    pub n_data: usize,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub total_iterations: u64,
}

/// Validates a configuration against a dataset size and reports the
/// iteration plan (dry run).
pub fn plan_training(n_data: usize, cfg: &TrainConfig) -> Result<TrainPlan> {
    cfg.validate()?;
    if n_data == 0 {
        return Err(Error::Data("dataset is empty".into()));
    }
    let batches = n_data.div_ceil(cfg.batch_size);
    Ok(TrainPlan {
        n_data,
        batches_per_epoch: batches,
        epochs: cfg.epochs,
        total_iterations: batches as u64 * cfg.epochs as u64,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FlowMapModel,
    /// Mean training loss per epoch, in normalized units.
    pub loss_history: Vec<f64>,
}

pub fn train(model: FlowMapModel, dataset: &BurstDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, dataset, cfg, |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, mean_loss)` after each epoch.
pub fn train_with(
    mut model: FlowMapModel,
    dataset: &BurstDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let violations = crate::types::validate_dataset(dataset);
    if !violations.is_empty() {
        return Err(Error::Data(violations.join("; ")));
    }
    if dataset.n_v != model.n_v() || dataset.n_gamma != model.n_gamma() || dataset.n_m != model.n_m() {
        return Err(Error::Config(format!(
            "dataset (n_V {}, n_gamma {}, n_M {}) does not match model (n_V {}, n_gamma {}, n_M {})",
            dataset.n_v,
            dataset.n_gamma,
            dataset.n_m,
            model.n_v(),
            model.n_gamma(),
            model.n_m()
        )));
    }
    if dataset.n_r != cfg.n_r {
        return Err(Error::Config(format!(
            "dataset has n_R = {}, training config has n_R = {}",
            dataset.n_r, cfg.n_r
        )));
    }
    let plan = plan_training(dataset.n_data(), cfg)?;

    model.set_normalization(Normalization::fit(dataset))?;
    model.set_dt(Some(dataset.dt));
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            loss_history: Vec::new(),
        });
    }

    let data = model.normalize_batch(&dataset.bursts)?;
    let mut adam = AdamState::new(model.n_params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let schedule = cfg.schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    noise_rng.set_stream(1);
    let mut order: Vec<usize> = (0..plan.n_data).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut iteration = 0u64;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, idx) in order.chunks(cfg.batch_size).enumerate() {
            let lr = schedule.at(iteration);
            let mut batch = data.gather(idx);
            if cfg.input_noise > 0.0 {
                let noise = Normal::new(0.0, cfg.input_noise).expect("validated noise level");
                batch
                    .seq
                    .slice_mut(s![.., ..model.window_len(), ..])
                    .mapv_inplace(|v| v + noise.sample(&mut noise_rng));
            }
            let (loss, grad) = model.loss_and_gradient_normalized(&batch, true);
            let grad = grad.unwrap();
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDivergence {
                    epoch,
                    batch: batch_idx,
                    lr,
                });
            }
            adam.step(model.params_mut(), &grad, lr);
            total += loss * idx.len() as f64;
            iteration += 1;
        }
        let mean = total / plan.n_data as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}
