//! Held-out loss estimation, loss-vs-timestep bins, Fig.-5-style scaling
//! curves and moment metrics between point clouds.
//!
//! All loss estimates share one estimator: each point gets `K` draws, draw
//! `k` taking `t` uniform in the `k`-th of `K` equal subintervals of
//! `[t_min, 1 - t_min]` with fresh Gaussian noise. The three loss forms are
//! evaluated on the same draws.

use ndarray::{Array1, Array2, Axis};

use crate::datasets::PointCloud;
use crate::denoiser::DenoiserModel;
use crate::error::{check_dims, Error, Result};
use crate::losses::{loss_coefficient, LossForm};
use crate::rng::RngState;
use crate::schedule::{alpha_sigma, snr_scaling, TimePoint};
use crate::targetspace::{target, TargetSpace};

/// Rows evaluated per network call.
const EVAL_CHUNK: usize = 4096;

/// A batch of `(x, eps, t)` draws with the latent and the regression target.
#[derive(Debug, Clone)]
pub struct DrawBatch {
    pub x: Array2<f64>,
    pub eps: Array2<f64>,
    pub z: Array2<f64>,
    pub t: Vec<f64>,
    pub target: Array2<f64>,
}

impl DrawBatch {
    /// Forms latents and `space` targets for given data, noise and times.
    pub fn assemble(
        space: TargetSpace,
        x: Array2<f64>,
        eps: Array2<f64>,
        t: Vec<f64>,
    ) -> Result<Self> {
        check_dims(x.nrows(), t.len())?;
        check_dims(x.dim().1, eps.dim().1)?;
        check_dims(x.nrows(), eps.nrows())?;
        let mut z = Array2::zeros(x.raw_dim());
        let mut tgt = Array2::zeros(x.raw_dim());
        for i in 0..t.len() {
            let tp = TimePoint::new(t[i])?;
            let (a, s) = alpha_sigma(tp);
            let xi = x.row(i);
            let ei = eps.row(i);
            for k in 0..x.ncols() {
                z[[i, k]] = a * xi[k] + s * ei[k];
            }
            let ti = target(space, xi.as_slice().unwrap(), ei.as_slice().unwrap(), tp)?;
            tgt.row_mut(i).assign(&Array1::from(ti));
        }
        Ok(DrawBatch {
            x,
            eps,
            z,
            t,
            target: tgt,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Losses of one evaluation draw in all three forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawLoss {
    pub t: f64,
    pub nelbo: f64,
    pub weighted: f64,
    pub rescaled: f64,
}

impl DrawLoss {
    pub fn get(&self, form: LossForm) -> f64 {
        match form {
            LossForm::Nelbo => self.nelbo,
            LossForm::Weighted => self.weighted,
            LossForm::Rescaled => self.rescaled,
        }
    }
}

/// Per-draw losses of `predict` on `cloud` under the stratified estimator.
/// Output is ordered point-major, then draw index.
pub fn draw_losses_with<F>(
    space: TargetSpace,
    cloud: &PointCloud,
    draws_per_point: usize,
    seed: u64,
    t_min: f64,
    mut predict: F,
) -> Result<Vec<DrawLoss>>
where
    F: FnMut(&DrawBatch) -> Result<Array2<f64>>,
{
    if draws_per_point == 0 {
        return Err(Error::InvalidArgument(
            "draws_per_point must be positive".into(),
        ));
    }
    if !(t_min > 0.0 && t_min < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "t_min {t_min} not in (0, 0.5)"
        )));
    }
    let rng = RngState::new(seed);
    let d = cloud.dim();
    let k = draws_per_point;
    let width = (1.0 - 2.0 * t_min) / k as f64;
    let points_per_chunk = (EVAL_CHUNK / k).max(1);
    let mut out = Vec::with_capacity(cloud.len() * k);
    let mut start = 0;
    while start < cloud.len() {
        let end = (start + points_per_chunk).min(cloud.len());
        let rows = (end - start) * k;
        let mut x = Array2::zeros((rows, d));
        let mut eps = Array2::zeros((rows, d));
        let mut t = Vec::with_capacity(rows);
        for i in start..end {
            let mut stream = rng.stream("eval", i as u64);
            let p = cloud.point(i);
            for j in 0..k {
                let r = (i - start) * k + j;
                x.row_mut(r).assign(&ndarray::ArrayView1::from(p));
                t.push(t_min + (j as f64 + stream.uniform()) * width);
                for c in 0..d {
                    eps[[r, c]] = stream.normal();
                }
            }
        }
        let batch = DrawBatch::assemble(space, x, eps, t)?;
        let pred = predict(&batch)?;
        check_dims(batch.len(), pred.nrows())?;
        check_dims(d, pred.ncols())?;
        for (r, (tr, pr)) in batch
            .target
            .axis_iter(Axis(0))
            .zip(pred.axis_iter(Axis(0)))
            .enumerate()
        {
            let sq: f64 = tr.iter().zip(pr).map(|(a, b)| (a - b) * (a - b)).sum();
            let tp = TimePoint::new(batch.t[r])?;
            out.push(DrawLoss {
                t: batch.t[r],
                nelbo: loss_coefficient(LossForm::Nelbo, space, tp)? * sq,
                weighted: sq,
                rescaled: loss_coefficient(LossForm::Rescaled, space, tp)? * sq,
            });
        }
        start = end;
    }
    Ok(out)
}

pub fn draw_losses(
    model: &DenoiserModel,
    cloud: &PointCloud,
    draws_per_point: usize,
    seed: u64,
    t_min: f64,
) -> Result<Vec<DrawLoss>> {
    draw_losses_with(
        model.predict_space,
        cloud,
        draws_per_point,
        seed,
        t_min,
        |b| model.forward_batch(b.z.view(), &b.t),
    )
}

/// Mean and standard error of a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for v in values {
            n += 1;
            sum += v;
            sq += v * v;
        }
        let nf = n as f64;
        let mean = if n > 0 { sum / nf } else { f64::NAN };
        let var = if n > 1 {
            ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: (var / nf).sqrt(),
            n,
        }
    }
}

/// Mean loss of `form` over the shared draws.
pub fn loss_estimate(
    model: &DenoiserModel,
    cloud: &PointCloud,
    form: LossForm,
    draws_per_point: usize,
    seed: u64,
    t_min: f64,
) -> Result<Estimate> {
    let draws = draw_losses(model, cloud, draws_per_point, seed, t_min)?;
    Ok(Estimate::from_samples(draws.iter().map(|d| d.get(form))))
}

pub fn nelbo_estimate(
    model: &DenoiserModel,
    cloud: &PointCloud,
    draws_per_point: usize,
    seed: u64,
    t_min: f64,
) -> Result<Estimate> {
    loss_estimate(model, cloud, LossForm::Nelbo, draws_per_point, seed, t_min)
}

/// One uniform timestep bin; `mean_loss` is `None` when no draw fell in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_loss: Option<f64>,
}

/// Accumulates losses into `bins` uniform bins over `[t_min, 1 - t_min]`.
#[derive(Debug, Clone)]
pub struct BinAccumulator {
    t_min: f64,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl BinAccumulator {
    pub fn new(bins: usize, t_min: f64) -> Self {
        BinAccumulator {
            t_min,
            sums: vec![0.0; bins],
            counts: vec![0; bins],
        }
    }

    pub fn bin_of(&self, t: f64) -> usize {
        let n = self.sums.len();
        let u = (t - self.t_min) / (1.0 - 2.0 * self.t_min);
        ((u * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    pub fn add(&mut self, t: f64, loss: f64) {
        let b = self.bin_of(t);
        self.sums[b] += loss;
        self.counts[b] += 1;
    }

    pub fn finish(&self) -> Vec<BinStat> {
        let n = self.sums.len();
        let width = (1.0 - 2.0 * self.t_min) / n as f64;
        (0..n)
            .map(|b| BinStat {
                lo: self.t_min + b as f64 * width,
                hi: self.t_min + (b + 1) as f64 * width,
                count: self.counts[b],
                mean_loss: (self.counts[b] > 0).then(|| self.sums[b] / self.counts[b] as f64),
            })
            .collect()
    }
}

pub fn bin_draws(
    draws: &[DrawLoss],
    form: LossForm,
    bins: usize,
    t_min: f64,
) -> Result<Vec<BinStat>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let mut acc = BinAccumulator::new(bins, t_min);
    for d in draws {
        acc.add(d.t, d.get(form));
    }
    Ok(acc.finish())
}

pub fn loss_vs_timestep(
    model: &DenoiserModel,
    cloud: &PointCloud,
    form: LossForm,
    bins: usize,
    draws_per_point: usize,
    seed: u64,
    t_min: f64,
) -> Result<Vec<BinStat>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let draws = draw_losses(model, cloud, draws_per_point, seed, t_min)?;
    bin_draws(&draws, form, bins, t_min)
}

/// `1 / w(t)` for x, eps, v, s at each grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub t: f64,
    pub values: [f64; 4],
}

impl ScalingRow {
    pub fn get(&self, space: TargetSpace) -> f64 {
        self.values[space as usize]
    }
}

pub fn scaling_curves(t_grid: &[f64]) -> Result<Vec<ScalingRow>> {
    t_grid
        .iter()
        .map(|&t| {
            let tp = TimePoint::new(t)?;
            let mut values = [0.0; 4];
            for (v, space) in values.iter_mut().zip(TargetSpace::ALL) {
                *v = snr_scaling(space, tp)?;
            }
            Ok(ScalingRow { t, values })
        })
        .collect()
}

/// `{0.01, 0.02, ..., 0.99}`.
pub fn default_scaling_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

fn column_means(p: &Array2<f64>) -> Array1<f64> {
    p.mean_axis(Axis(0)).expect("non-empty cloud")
}

/// Unbiased (`N - 1`) sample covariance.
pub fn covariance(p: &Array2<f64>) -> Result<Array2<f64>> {
    let n = p.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "covariance needs at least 2 points, got {n}"
        )));
    }
    let centered = p - &column_means(p);
    Ok(centered.t().dot(&centered) / (n as f64 - 1.0))
}

/// Euclidean distance between the cloud means.
pub fn mean_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("mean of an empty cloud".into()));
    }
    check_dims(a.dim(), b.dim())?;
    let diff = column_means(&a.points) - column_means(&b.points);
    Ok(diff.dot(&diff).sqrt())
}

/// Frobenius norm of the difference of unbiased covariances.
pub fn covariance_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let diff = covariance(&a.points)? - covariance(&b.points)?;
    Ok(diff.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub space: TargetSpace,
    pub form: LossForm,
    pub dataset: String,
    pub seed: u64,
    /// Test NELBO for NELBO-trained models, test weighted loss otherwise.
    pub loss: f64,
    pub mean_dist: f64,
    pub covar_dist: f64,
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}
