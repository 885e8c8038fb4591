//! Ancestral sampling through the `x_hat`-parameterised posterior.
//!
//! Starting from `z_1 ~ N(0, I)`, each step `t = i/N -> s = (i-1)/N`
//! predicts `x_hat(z_t)`, then samples `z_s ~ q(z_s | z_t, x = x_hat)`.
//! The last step returns `x_hat(z, t = 1/N)` without adding noise.
//!
//! At `t = 1` we have `alpha = 0`, where eps- and score-space predictions
//! cannot be inverted. The first prediction is therefore made at the
//! midpoint `1 - 1/(2N)` of the top interval for every space; the latent
//! and the posterior still use the nominal grid.

use ndarray::{Array2, Axis};

use crate::datasets::PointCloud;
use crate::denoiser::DenoiserModel;
use crate::error::{Error, Result};
use crate::forward::posterior_params;
use crate::rng::{DrawStream, RngState};
use crate::schedule::TimePoint;
use crate::targetspace::{to_x_prediction, Prediction};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub num_steps: usize,
    pub num_samples: usize,
    pub seed: u64,
    /// Optional `(lo, hi)` box applied to every `x_hat` coordinate.
    pub clip_range: Option<(f64, f64)>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            num_steps: 512,
            num_samples: 2000,
            seed: 0,
            clip_range: None,
        }
    }
}

/// `[((i-1)/N, i/N)]` for `i = N, ..., 1`.
pub fn step_grid(n: usize) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "number of sampling steps must be at least 1".into(),
        ));
    }
    let nf = n as f64;
    Ok((1..=n)
        .rev()
        .map(|i| ((i - 1) as f64 / nf, i as f64 / nf))
        .collect())
}

/// Time at which the network is queried on the step whose nominal time is `t`.
pub fn prediction_time(t: f64, n: usize) -> f64 {
    if t >= 1.0 {
        1.0 - 0.5 / n as f64
    } else {
        t
    }
}

/// Data estimates for a batch of latents sharing one time.
pub fn predict_x(
    model: &DenoiserModel,
    z: &Array2<f64>,
    t: f64,
    clip: Option<(f64, f64)>,
) -> Result<Array2<f64>> {
    let ts = vec![t; z.nrows()];
    let raw = model.forward_batch(z.view(), &ts)?;
    let tp = TimePoint::new(t)?;
    let mut x_hat = Array2::zeros(z.raw_dim());
    for (i, (row, zi)) in raw.axis_iter(Axis(0)).zip(z.axis_iter(Axis(0))).enumerate() {
        let pred = Prediction::new(model.predict_space, row.to_vec());
        let x = to_x_prediction(&pred, zi.as_slice().expect("row-major"), tp)?;
        for (k, v) in x.into_iter().enumerate() {
            x_hat[[i, k]] = match clip {
                Some((lo, hi)) => v.clamp(lo, hi),
                None => v,
            };
        }
    }
    Ok(x_hat)
}

pub fn sample(model: &DenoiserModel, config: &SampleConfig) -> Result<PointCloud> {
    let grid = step_grid(config.num_steps)?;
    if let Some((lo, hi)) = config.clip_range {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "clip range ({lo}, {hi}) is empty"
            )));
        }
    }
    let d = model.arch.data_dim;
    let n = config.num_samples;
    let rng = RngState::new(config.seed);
    let mut chains: Vec<DrawStream> = (0..n).map(|i| rng.stream("sample", i as u64)).collect();
    let mut z = Array2::zeros((n, d));
    for (i, chain) in chains.iter_mut().enumerate() {
        for k in 0..d {
            z[[i, k]] = chain.normal();
        }
    }
    let last = grid.len() - 1;
    for (step, &(s, t)) in grid.iter().enumerate() {
        let t_pred = prediction_time(t, config.num_steps);
        let x_hat = predict_x(model, &z, t_pred, config.clip_range)?;
        if step == last {
            return Ok(PointCloud {
                points: x_hat,
                kind: None,
                seed: config.seed,
                normalized: false,
            });
        }
        let (sp, tp) = (TimePoint::new(s)?, TimePoint::new(t)?);
        for (i, chain) in chains.iter_mut().enumerate() {
            let zi = z.row(i).to_vec();
            let xi = x_hat.row(i).to_vec();
            let post = posterior_params(&zi, &xi, sp, tp)?;
            let sd = post.var.sqrt();
            for k in 0..d {
                z[[i, k]] = post.mean[k] + sd * chain.normal();
            }
        }
    }
    unreachable!("step grid is non-empty")
}
