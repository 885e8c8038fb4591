//! Monte Carlo training over `(t, eps)` draws.
//!
//! Each epoch shuffles the training set, walks it in minibatches and draws a
//! fresh `t ~ U(t_min, 1 - t_min)` and `eps ~ N(0, I)` per example. The batch
//! loss is the mean of `c(form, space, t) ||target - pred||^2`; its gradient
//! with respect to the prediction, `-2 c (target - pred) / B`, is pushed
//! through the network and applied with Adam. `c` is held constant (no
//! gradient flows through `t`).

pub mod adam;

use std::time::Instant;

use ndarray::{Array2, Axis};

use crate::datasets::{DatasetKind, PointCloud};
use crate::denoiser::{Architecture, DenoiserModel, Gradients};
use crate::error::{check_dims, Error, Result};
use crate::eval::{draw_losses, BinAccumulator, BinStat, DrawBatch, Estimate};
use crate::losses::{loss_coefficient, LossForm};
use crate::rng::RngState;
use crate::schedule::TimePoint;
use crate::targetspace::TargetSpace;

pub use adam::{adam_step, Adam, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub space: TargetSpace,
    /// `Nelbo` or `Weighted`; rescaled losses are evaluation-only.
    pub form: LossForm,
    pub dataset: DatasetKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub t_min: f64,
    pub eval_draws_per_point: usize,
    pub hidden_width: usize,
    pub bins: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            space: TargetSpace::Eps,
            form: LossForm::Weighted,
            dataset: DatasetKind::Ring,
            epochs: 200,
            batch_size: 512,
            learning_rate: 1e-3,
            seed: 0,
            t_min: 1e-5,
            eval_draws_per_point: 8,
            hidden_width: 128,
            bins: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.form == LossForm::Rescaled {
            return bad("rescaled loss is evaluation-only; train with nelbo or weighted".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.t_min > 0.0 && self.t_min < 0.5) {
            return bad(format!("t_min {} not in (0, 0.5)", self.t_min));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.eval_draws_per_point == 0 {
            return bad("eval_draws_per_point must be positive".into());
        }
        if self.bins < 2 {
            return bad("need at least 2 timestep bins".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_nelbo: f64,
    pub test_weighted: f64,
    pub test_rescaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub epochs: Vec<EpochRecord>,
    /// Per epoch, training losses bucketed by timestep.
    pub bins: Vec<Vec<BinStat>>,
    pub model: DenoiserModel,
    pub wall_seconds: f64,
}

/// Per-example losses and the mean-loss gradient with respect to `pred`.
pub fn loss_and_pred_grad(
    form: LossForm,
    space: TargetSpace,
    batch: &DrawBatch,
    pred: &Array2<f64>,
) -> Result<(Vec<f64>, Array2<f64>)> {
    check_dims(batch.len(), pred.nrows())?;
    check_dims(batch.target.ncols(), pred.ncols())?;
    let scale = 1.0 / batch.len() as f64;
    let mut losses = Vec::with_capacity(batch.len());
    let mut grad = Array2::zeros(pred.raw_dim());
    for (i, (tr, pr)) in batch
        .target
        .axis_iter(Axis(0))
        .zip(pred.axis_iter(Axis(0)))
        .enumerate()
    {
        let c = loss_coefficient(form, space, TimePoint::new(batch.t[i])?)?;
        let mut sq = 0.0;
        for k in 0..tr.len() {
            let r = tr[k] - pr[k];
            sq += r * r;
            grad[[i, k]] = -2.0 * c * r * scale;
        }
        losses.push(c * sq);
    }
    Ok((losses, grad))
}

/// Parameter gradient of the mean batch loss, plus per-example losses.
pub fn batch_gradient(
    model: &DenoiserModel,
    form: LossForm,
    batch: &DrawBatch,
) -> Result<(Gradients, Vec<f64>)> {
    let (pred, cache) = model.forward_batch_cached(batch.z.view(), &batch.t)?;
    let (losses, grad) = loss_and_pred_grad(form, model.predict_space, batch, &pred)?;
    Ok((model.backward_batch(&cache, grad.view())?, losses))
}

/// Model, optimizer and step counter of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: DenoiserModel,
    pub adam: Adam,
    pub step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, data_dim: usize) -> Result<Self> {
        config.validate()?;
        let arch = Architecture::new(data_dim, config.hidden_width);
        let model = DenoiserModel::init(arch, config.space, config.seed)?;
        let adam = Adam::new(&model, config.learning_rate);
        Ok(Trainer {
            config,
            model,
            adam,
            step: 0,
        })
    }

    /// Draws `(t, eps)` for the given rows of `cloud` from the stream of the
    /// current step.
    pub fn draw_batch(&self, cloud: &PointCloud, rows: &[usize]) -> Result<DrawBatch> {
        let d = cloud.dim();
        let mut stream = RngState::new(self.config.seed).stream("train", self.step);
        let t_min = self.config.t_min;
        let x = cloud.points.select(Axis(0), rows);
        let t: Vec<f64> = rows
            .iter()
            .map(|_| stream.uniform_in(t_min, 1.0 - t_min))
            .collect();
        let eps = Array2::from_shape_simple_fn((rows.len(), d), || stream.normal());
        DrawBatch::assemble(self.config.space, x, eps, t)
    }

    /// One optimizer step on `batch`; returns per-example losses.
    pub fn step(&mut self, batch: &DrawBatch) -> Result<Vec<f64>> {
        self.step_with(batch, |_, pred| pred)
    }

    /// Like [`Trainer::step`], but `adjust` may replace the network output
    /// before the loss is formed. The gradient still flows through the
    /// network's own activations.
    pub fn step_with<F>(&mut self, batch: &DrawBatch, adjust: F) -> Result<Vec<f64>>
    where
        F: FnOnce(&DrawBatch, Array2<f64>) -> Array2<f64>,
    {
        let (pred, cache) = self.model.forward_batch_cached(batch.z.view(), &batch.t)?;
        let pred = adjust(batch, pred);
        let (losses, grad) = loss_and_pred_grad(self.config.form, self.config.space, batch, &pred)?;
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        if !mean.is_finite() {
            let t_lo = batch.t.iter().copied().fold(f64::INFINITY, f64::min);
            let t_hi = batch.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return Err(Error::NonFinite {
                step: self.step,
                t_lo,
                t_hi,
                loss: mean,
            });
        }
        let grads = self.model.backward_batch(&cache, grad.view())?;
        self.adam.step(&mut self.model, &grads)?;
        self.step += 1;
        Ok(losses)
    }

    /// One pass over `train`; returns the mean per-example loss and the
    /// timestep bins of this epoch.
    pub fn run_epoch(&mut self, train: &PointCloud, epoch: usize) -> Result<(f64, Vec<BinStat>)> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        RngState::new(self.config.seed)
            .stream("shuffle", epoch as u64)
            .shuffle(&mut order);
        let mut bins = BinAccumulator::new(self.config.bins, self.config.t_min);
        let mut total = 0.0;
        for rows in order.chunks(self.config.batch_size) {
            let batch = self.draw_batch(train, rows)?;
            let losses = self.step(&batch)?;
            for (&t, &l) in batch.t.iter().zip(&losses) {
                bins.add(t, l);
                total += l;
            }
        }
        Ok((total / train.len() as f64, bins.finish()))
    }

    /// Test losses in all three forms from one shared set of draws.
    pub fn evaluate_epoch(&self, test: &PointCloud) -> Result<(f64, f64, f64)> {
        evaluate_epoch(&self.model, test, &self.config)
    }
}

/// Test NELBO, weighted and rescaled losses on the stratified draws.
pub fn evaluate_epoch(
    model: &DenoiserModel,
    test: &PointCloud,
    config: &TrainConfig,
) -> Result<(f64, f64, f64)> {
    let draws = draw_losses(
        model,
        test,
        config.eval_draws_per_point,
        config.seed,
        config.t_min,
    )?;
    let mean =
        |f: fn(&crate::eval::DrawLoss) -> f64| Estimate::from_samples(draws.iter().map(f)).mean;
    Ok((
        mean(|d| d.nelbo),
        mean(|d| d.weighted),
        mean(|d| d.rescaled),
    ))
}

pub fn train(
    config: &TrainConfig,
    train_cloud: &PointCloud,
    test_cloud: &PointCloud,
) -> Result<RunRecord> {
    train_with(config, train_cloud, test_cloud, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F>(
    config: &TrainConfig,
    train_cloud: &PointCloud,
    test_cloud: &PointCloud,
    mut on_epoch: F,
) -> Result<RunRecord>
where
    F: FnMut(&EpochRecord),
{
    if train_cloud.is_empty() || test_cloud.is_empty() {
        return Err(Error::InvalidArgument(
            "train and test clouds must be non-empty".into(),
        ));
    }
    check_dims(train_cloud.dim(), test_cloud.dim())?;
    let started = Instant::now();
    let mut trainer = Trainer::new(config.clone(), train_cloud.dim())?;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut bins = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let (train_loss, epoch_bins) = trainer.run_epoch(train_cloud, epoch)?;
        let (test_nelbo, test_weighted, test_rescaled) = trainer.evaluate_epoch(test_cloud)?;
        let rec = EpochRecord {
            epoch,
            train_loss,
            test_nelbo,
            test_weighted,
            test_rescaled,
        };
        on_epoch(&rec);
        epochs.push(rec);
        bins.push(epoch_bins);
    }
    Ok(RunRecord {
        epochs,
        bins,
        model: trainer.model,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate, split};

    fn small_config(space: TargetSpace, form: LossForm) -> TrainConfig {
        TrainConfig {
            space,
            form,
            epochs: 2,
            batch_size: 64,
            hidden_width: 16,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.form = LossForm::Rescaled;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            t_min: 0.5,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn oracle_predictions_leave_parameters_unchanged() {
        let cloud = generate(DatasetKind::Ring, 256, 1).unwrap();
        let mut tr = Trainer::new(small_config(TargetSpace::S, LossForm::Nelbo), 2).unwrap();
        let before = tr.model.clone();
        let rows: Vec<usize> = (0..64).collect();
        let batch = tr.draw_batch(&cloud, &rows).unwrap();
        let losses = tr.step_with(&batch, |b, _| b.target.clone()).unwrap();
        assert!(losses.iter().all(|&l| l == 0.0));
        assert_eq!(tr.model, before);
        assert_eq!(tr.step, 1);
    }

    #[test]
    fn runs_are_bit_identical() {
        let cloud = generate(DatasetKind::Ring, 600, 3).unwrap();
        let (train_c, test_c) = split(&cloud, 0.2).unwrap();
        let cfg = small_config(TargetSpace::V, LossForm::Weighted);
        let a = train(&cfg, &train_c, &test_c).unwrap();
        let b = train(&cfg, &train_c, &test_c).unwrap();
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(a.bins, b.bins);
        assert_eq!(a.model, b.model);
        assert_eq!(a.epochs.len(), 2);
        assert_eq!(a.bins[0].len(), 20);
    }

    #[test]
    fn epoch_bins_account_for_train_loss() {
        let cloud = generate(DatasetKind::Cluster, 500, 3).unwrap();
        let mut tr = Trainer::new(small_config(TargetSpace::X, LossForm::Nelbo), 2).unwrap();
        let (loss, bins) = tr.run_epoch(&cloud, 1).unwrap();
        let count: usize = bins.iter().map(|b| b.count).sum();
        assert_eq!(count, 500);
        let pooled: f64 = bins
            .iter()
            .filter_map(|b| b.mean_loss.map(|m| m * b.count as f64))
            .sum();
        assert!(((pooled / 500.0) - loss).abs() <= 1e-10 * loss.abs());
        assert!(bins.iter().all(|b| b.mean_loss.is_none_or(|m| m >= 0.0)));
    }

    #[test]
    fn nelbo_gradient_is_weighted_gradient_over_w() {
        let cloud = generate(DatasetKind::Swiss, 32, 3).unwrap();
        for space in TargetSpace::ALL {
            let tr = Trainer::new(small_config(space, LossForm::Weighted), 2).unwrap();
            let rows: Vec<usize> = (0..16).collect();
            let batch = tr.draw_batch(&cloud, &rows).unwrap();
            for i in 0..batch.len() {
                let one = DrawBatch::assemble(
                    space,
                    batch.x.select(Axis(0), &[i]),
                    batch.eps.select(Axis(0), &[i]),
                    vec![batch.t[i]],
                )
                .unwrap();
                let (gw, _) = batch_gradient(&tr.model, LossForm::Weighted, &one).unwrap();
                let (gn, _) = batch_gradient(&tr.model, LossForm::Nelbo, &one).unwrap();
                let w =
                    crate::schedule::weight(space, TimePoint::new(batch.t[i]).unwrap()).unwrap();
                for (a, b) in gn.slices().zip(gw.slices()) {
                    for (n, wv) in a.iter().zip(b) {
                        let expect = wv / w;
                        assert!(
                            (n - expect).abs() <= 1e-10 * expect.abs().max(1e-300),
                            "{space}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn non_finite_loss_aborts() {
        let cloud = generate(DatasetKind::Ring, 64, 1).unwrap();
        let mut tr = Trainer::new(small_config(TargetSpace::X, LossForm::Weighted), 2).unwrap();
        let rows: Vec<usize> = (0..8).collect();
        let batch = tr.draw_batch(&cloud, &rows).unwrap();
        let err = tr
            .step_with(&batch, |_, p| p.mapv(|_| f64::NAN))
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 0, .. }));
    }
}
