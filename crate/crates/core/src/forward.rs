//! Forward process: marginal sampling, the closed-form posterior
//! `q(z_s | z_t, x)` and the KL between two such posteriors.

use crate::error::{check_dims, Error, Result};
use crate::rng::DrawStream;
use crate::schedule::{alpha_sigma, snr, transition_coeffs, TimePoint};
use crate::targetspace::noisify;

/// Isotropic Gaussian: every dimension has variance `var`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub var: f64,
}

/// Draws `eps ~ N(0, I)` and returns `(z_t, eps)` with `z_t ~ q(z_t | x)`.
pub fn sample_marginal(x: &[f64], t: TimePoint, draws: &mut DrawStream) -> (Vec<f64>, Vec<f64>) {
    let eps = draws.normals(x.len());
    let z = noisify(x, &eps, t).expect("eps drawn with the dimension of x");
    (z, eps)
}

fn check_posterior_times(s: TimePoint, t: TimePoint) -> Result<()> {
    if s.get() <= 0.0 {
        return Err(Error::Divergent {
            what: "posterior at s = 0",
            t: s.get(),
        });
    }
    if s >= t {
        return Err(Error::Ordering {
            s: s.get(),
            t: t.get(),
        });
    }
    Ok(())
}

/// `q(z_s | z_t, x)` for `0 < s < t <= 1`:
/// mean `alpha_{t|s} sigma_s^2 / sigma_t^2 z_t + alpha_s sigma_{t|s}^2 / sigma_t^2 x`,
/// variance `sigma_{t|s}^2 sigma_s^2 / sigma_t^2`.
pub fn posterior_params(
    z_t: &[f64],
    x: &[f64],
    s: TimePoint,
    t: TimePoint,
) -> Result<GaussianParams> {
    check_posterior_times(s, t)?;
    check_dims(z_t.len(), x.len())?;
    let (alpha_s, sigma_s) = alpha_sigma(s);
    let (_, sigma_t) = alpha_sigma(t);
    let tr = transition_coeffs(s, t)?;
    let s2s = sigma_s * sigma_s;
    let s2t = sigma_t * sigma_t;
    let cz = tr.alpha_ts * s2s / s2t;
    let cx = alpha_s * tr.sigma2_ts / s2t;
    let mean = z_t.iter().zip(x).map(|(z, xi)| cz * z + cx * xi).collect();
    let var = (tr.sigma2_ts * s2s / s2t).clamp(0.0, s2s);
    Ok(GaussianParams { mean, var })
}

/// Closed form `1/2 (SNR(s) - SNR(t)) ||x - x_hat||^2` of
/// `KL(q(z_s | z_t, x) || q(z_s | z_t, x_hat))`; independent of `z_t`.
pub fn kl_transition(x: &[f64], x_hat: &[f64], s: TimePoint, t: TimePoint) -> Result<f64> {
    check_posterior_times(s, t)?;
    check_dims(x.len(), x_hat.len())?;
    let sq: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * (snr(s)? - snr(t)?) * sq)
}

/// Same KL from the two posterior parameterisations:
/// `||mu(x) - mu(x_hat)||^2 / (2 var)`.
pub fn kl_transition_via_posterior(
    z_t: &[f64],
    x: &[f64],
    x_hat: &[f64],
    s: TimePoint,
    t: TimePoint,
) -> Result<f64> {
    let p = posterior_params(z_t, x, s, t)?;
    let q = posterior_params(z_t, x_hat, s, t)?;
    let sq: f64 = p
        .mean
        .iter()
        .zip(&q.mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / (2.0 * p.var))
}

/// Empirical moments of two-step sampling `x -> z_s -> z_t` next to the
/// moments of the one-step marginal `q(z_t | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposeStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub expected_mean: Vec<f64>,
    pub expected_var: f64,
}

impl ComposeStats {
    /// Largest deviation of the empirical mean from `alpha_t x`, in standard errors.
    pub fn mean_z_score(&self) -> f64 {
        let se = (self.expected_var / self.n as f64).sqrt();
        self.mean
            .iter()
            .zip(&self.expected_mean)
            .map(|(m, e)| (m - e).abs() / se)
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the empirical variance from `sigma_t^2`, in
    /// standard errors of a Gaussian sample variance (`sqrt(2/(n-1)) var`).
    pub fn var_z_score(&self) -> f64 {
        let se = self.expected_var * (2.0 / (self.n as f64 - 1.0)).sqrt();
        if se == 0.0 {
            return if self.var.iter().all(|&v| v == 0.0) {
                0.0
            } else {
                f64::INFINITY
            };
        }
        self.var
            .iter()
            .map(|v| (v - self.expected_var).abs() / se)
            .fold(0.0, f64::max)
    }
}

/// Samples `z_s ~ q(z_s | x)` then `z_t ~ q(z_t | z_s)` `n` times.
pub fn compose_check(
    x: &[f64],
    s: TimePoint,
    t: TimePoint,
    draws: &mut DrawStream,
    n: usize,
) -> Result<ComposeStats> {
    if n < 2 {
        return Err(Error::InvalidArgument("compose_check needs n >= 2".into()));
    }
    let tr = transition_coeffs(s, t)?;
    let step_sd = tr.sigma2_ts.sqrt();
    let d = x.len();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..n {
        let (z_s, _) = sample_marginal(x, s, draws);
        for k in 0..d {
            let z_t = tr.alpha_ts * z_s[k] + step_sd * draws.normal();
            sum[k] += z_t;
            sum_sq[k] += z_t * z_t;
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let var = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq - nf * m * m) / (nf - 1.0))
        .collect();
    let (alpha_t, sigma_t) = alpha_sigma(t);
    Ok(ComposeStats {
        n,
        mean,
        var,
        expected_mean: x.iter().map(|xi| alpha_t * xi).collect(),
        expected_var: sigma_t * sigma_t,
    })
}
