//! Training set, SGD with momentum and cosine decay, evaluation.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::NetworkModel;
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::gaussian::GaussianMixture;
use crate::homodyne::{PhaseSchedule, QuadratureRecord};
use crate::metrics::fidelity;

/// Where a sample's quadrature record comes from.
#[derive(Debug, Clone)]
pub enum SampleInput {
    Record(QuadratureRecord),
    /// Regenerated on demand (bit-identical every time) from the exact
    /// phase-space sampler, so large corpora need not be held in memory.
    Synthetic {
        mixture: GaussianMixture,
        schedule: PhaseSchedule,
        len: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub input: SampleInput,
    pub target: DensityMatrix,
    /// State parameters (squeezing, loss, ...), for reporting.
    pub metadata: BTreeMap<String, f64>,
}

impl TrainingSample {
    pub fn record(&self) -> Result<Cow<'_, QuadratureRecord>> {
        match &self.input {
            SampleInput::Record(r) => Ok(Cow::Borrowed(r)),
            SampleInput::Synthetic {
                mixture,
                schedule,
                len,
                seed,
            } => Ok(Cow::Owned(mixture.sample(schedule, *len, *seed)?)),
        }
    }
}

/// Samples with targets of one common dimension.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    samples: Vec<TrainingSample>,
}

impl TrainingSet {
    pub fn new(samples: Vec<TrainingSample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let d = first.target.dim();
            if let Some(bad) = samples.iter().find(|s| s.target.dim() != d) {
                return Err(Error::DimMismatch {
                    left: d,
                    right: bad.target.dim(),
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn from_records(
        records: Vec<QuadratureRecord>,
        targets: Vec<DensityMatrix>,
    ) -> Result<Self> {
        if records.len() != targets.len() {
            return Err(Error::ContractViolation(format!(
                "{} records but {} targets",
                records.len(),
                targets.len()
            )));
        }
        Self::new(
            records
                .into_iter()
                .zip(targets)
                .map(|(r, target)| TrainingSample {
                    input: SampleInput::Record(r),
                    target,
                    metadata: BTreeMap::new(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[TrainingSample] {
        &self.samples
    }

    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.target.dim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Cosine decay of the learning rate over all steps (to zero).
    pub cosine: bool,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            cosine: true,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || !(self.learning_rate.is_finite() && self.learning_rate > 0.0)
            || !(0.0..1.0).contains(&self.momentum)
        {
            return Err(Error::InvalidParameter(format!(
                "bad training options {self:?}"
            )));
        }
        Ok(())
    }

    fn rate(&self, step: usize, total: usize) -> f64 {
        if self.cosine && total > 0 {
            self.learning_rate * 0.5 * (1.0 + (PI * step as f64 / total as f64).cos())
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
    pub validation_loss: Option<f64>,
    pub validation_fidelity: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    pub history: Vec<EpochRecord>,
    /// Epoch at which the loss or weights became non-finite; `model` is
    /// then the checkpoint from the start of that epoch.
    pub diverged_at: Option<usize>,
}

/// Mean loss and fidelity of a model over a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub mean_fidelity: f64,
    pub fidelities: Vec<f64>,
}

pub fn evaluate(model: &NetworkModel, data: &TrainingSet) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InsufficientData("evaluation set is empty".into()));
    }
    let per: Vec<(f64, f64)> = data
        .samples
        .par_iter()
        .map(|s| {
            let input = model.encode(&*s.record()?)?;
            let rho = model.predict_input(&input)?;
            let loss = super::head::loss_frobenius(&rho, &s.target)?;
            Ok((loss, fidelity(&rho, &s.target)?))
        })
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    Ok(Evaluation {
        mean_loss: per.iter().map(|p| p.0).sum::<f64>() / n,
        mean_fidelity: per.iter().map(|p| p.1).sum::<f64>() / n,
        fidelities: per.into_iter().map(|p| p.1).collect(),
    })
}

pub fn train(
    model: &NetworkModel,
    data: &TrainingSet,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    train_with(model, data, None, opts, &mut |_| {})
}

/// Trains a copy of `model`. Per-sample gradients may be computed in
/// parallel but are summed in batch order, so the result depends only on
/// the inputs and `opts.seed`. `observer` sees every finished epoch.
pub fn train_with(
    model: &NetworkModel,
    data: &TrainingSet,
    validation: Option<&TrainingSet>,
    opts: &TrainOptions,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    opts.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    if data.dim() != Some(model.dim()) {
        return Err(Error::DimMismatch {
            left: model.dim(),
            right: data.dim().unwrap_or(0),
        });
    }
    let mut model = model.clone();
    let mut velocity = vec![0.0; model.param_count()];
    let batches_per_epoch = data.len().div_ceil(opts.batch_size);
    let total_steps = batches_per_epoch * opts.epochs;
    let mut history = Vec::with_capacity(opts.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut step = 0usize;

    for epoch in 0..opts.epochs {
        let start = Instant::now();
        let checkpoint = (model.clone(), velocity.clone());
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut diverged = false;
        let mut lr = opts.rate(step, total_steps);
        for batch in order.chunks(opts.batch_size) {
            let per: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &data.samples[i];
                    let input = model.encode(&*s.record()?)?;
                    model.backward(&input, &s.target)
                })
                .collect::<Result<_>>()?;
            let inv = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; model.param_count()];
            for (loss, g) in &per {
                loss_sum += loss;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            lr = opts.rate(step, total_steps);
            let weights = model.weights_mut();
            for ((w, v), g) in weights.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = opts.momentum * *v - lr * g * inv;
                *w += *v;
            }
            step += 1;
            if !loss_sum.is_finite() || weights.iter().any(|w| !w.is_finite()) {
                diverged = true;
                break;
            }
        }
        if diverged {
            log::warn!("training diverged in epoch {epoch}; returning the epoch-start checkpoint");
            return Ok(TrainOutcome {
                model: checkpoint.0,
                history,
                diverged_at: Some(epoch),
            });
        }
        let (validation_loss, validation_fidelity) = match validation {
            Some(v) if !v.is_empty() => {
                let e = evaluate(&model, v)?;
                (Some(e.mean_loss), Some(e.mean_fidelity))
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            learning_rate: lr,
            validation_loss,
            validation_fidelity,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        observer(&record);
        history.push(record);
    }
    Ok(TrainOutcome {
        model,
        history,
        diverged_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SqueezeParams;
    use crate::nn::{Architecture, LayerKind};
    use crate::states::{squeezed_thermal, ThermalParams};
    use crate::Truncation;

    fn tiny_set(n: usize, dim: usize, len: usize) -> TrainingSet {
        let samples = (0..n)
            .map(|i| {
                let db = 0.5 + i as f64 * 0.3;
                let phi = 0.4 * i as f64;
                let sq = SqueezeParams::from_db(db, phi).unwrap();
                let th = ThermalParams::new(0.02 * i as f64).unwrap();
                let target =
                    squeezed_thermal(&sq, &th, Truncation::new(dim).with_max_tail(0.05)).unwrap();
                TrainingSample {
                    input: SampleInput::Synthetic {
                        mixture: GaussianMixture::squeezed_thermal(&sq, &th),
                        schedule: PhaseSchedule::default(),
                        len,
                        seed: 100 + i as u64,
                    },
                    target,
                    metadata: BTreeMap::from([("db".to_string(), db)]),
                }
            })
            .collect();
        TrainingSet::new(samples).unwrap()
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let model = NetworkModel::initialize(Architecture::tiny(4, 32), 1).unwrap();
        let out = train(
            &model,
            &tiny_set(4, 4, 32),
            &TrainOptions {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.model, model);
        assert!(out.history.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let model = NetworkModel::initialize(Architecture::tiny(4, 32), 1).unwrap();
        let data = tiny_set(6, 4, 32);
        let opts = TrainOptions {
            epochs: 3,
            batch_size: 4,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let a = train(&model, &data, &opts).unwrap();
        let b = train(&model, &data, &opts).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.history[0].mean_loss, b.history[0].mean_loss);
    }

    #[test]
    fn divergence_returns_last_finite_checkpoint() {
        let model = NetworkModel::initialize(Architecture::tiny(4, 32), 1).unwrap();
        let data = tiny_set(4, 4, 32);
        let out = train(
            &model,
            &data,
            &TrainOptions {
                epochs: 50,
                batch_size: 2,
                learning_rate: 1e300,
                cosine: false,
                ..Default::default()
            },
        )
        .unwrap();
        let epoch = out.diverged_at.expect("diverges");
        assert_eq!(out.history.len(), epoch);
        assert!(out.model.weights().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = NetworkModel::initialize(Architecture::tiny(5, 32), 1).unwrap();
        assert!(train(&model, &tiny_set(2, 4, 32), &TrainOptions::default()).is_err());
        assert!(train(&model, &TrainingSet::default(), &TrainOptions::default()).is_err());
    }

    #[test]
    fn overfits_eight_samples() {
        let dim = 4;
        let data = tiny_set(8, dim, 64);
        let model = NetworkModel::initialize(Architecture::tiny(dim, 64), 11).unwrap();
        let out = train(
            &model,
            &data,
            &TrainOptions {
                epochs: 500,
                batch_size: 1,
                learning_rate: 0.05,
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let eval = evaluate(&out.model, &data).unwrap();
        assert!(eval.mean_fidelity >= 0.995, "{}", eval.mean_fidelity);
    }

    #[test]
    fn shortcuts_strengthen_first_layer_gradient() {
        let data = tiny_set(1, 12, 2048);
        let sample = &data.samples()[0];
        let record = sample.record().unwrap();
        let first_norm = |arch: Architecture, seed: u64| {
            let model = NetworkModel::initialize(arch, seed).unwrap();
            let input = model.encode(&record).unwrap();
            let (_, g) = model.backward(&input, &sample.target).unwrap();
            let kinds = model.layer_kinds();
            // the first entry convolution is the first EntryConv run
            let first = kinds
                .iter()
                .position(|k| *k == LayerKind::EntryConv)
                .unwrap();
            let end = first
                + kinds[first..]
                    .iter()
                    .position(|k| *k != LayerKind::EntryConv)
                    .unwrap();
            g[first..end].iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let mut ratio = 0.0;
        for seed in 0..20 {
            let with = first_norm(Architecture::desk(12), seed);
            let mut plain = Architecture::desk(12);
            plain.block_shortcuts = false;
            plain.long_skip = false;
            ratio += with / first_norm(plain, seed);
        }
        ratio /= 20.0;
        assert!(ratio > 1.0, "mean ratio {ratio}");
    }
}
