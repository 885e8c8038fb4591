//! Variance-preserving cosine schedule.
//!
//! `alpha_t = cos(pi t / 2)`, `sigma_t = sin(pi t / 2)`, so
//! `alpha^2 + sigma^2 = 1` and `SNR(t) = cot^2(pi t / 2)`.
//!
//! Quantities that divide by `alpha_t` or `sigma_t` reject the endpoint
//! where that factor vanishes instead of clamping; callers that need to stay
//! clear of the endpoints sample from `[t_min, 1 - t_min]`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::targetspace::TargetSpace;

/// A diffusion time in `[0, 1]`; 0 is clean data, 1 is pure noise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(TimePoint(t))
    }

    pub const ZERO: TimePoint = TimePoint(0.0);
    pub const ONE: TimePoint = TimePoint(1.0);

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TimePoint {
    type Error = Error;

    fn try_from(t: f64) -> Result<Self> {
        TimePoint::new(t)
    }
}

/// Schedule quantities at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValues {
    pub alpha: f64,
    pub sigma: f64,
    pub snr: f64,
    pub snr_prime: f64,
}

impl ScheduleValues {
    /// Valid on `(0, 1]`; `t = 0` has unbounded SNR.
    pub fn at(t: TimePoint) -> Result<Self> {
        let (alpha, sigma) = alpha_sigma(t);
        Ok(ScheduleValues {
            alpha,
            sigma,
            snr: snr(t)?,
            snr_prime: snr_prime(t)?,
        })
    }
}

/// `alpha_{t|s}` and `sigma^2_{t|s}` of `q(z_t | z_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoeffs {
    pub alpha_ts: f64,
    pub sigma2_ts: f64,
}

/// Endpoints are returned exactly so that `alpha_1 = 0` and `sigma_0 = 0`.
pub fn alpha_sigma(t: TimePoint) -> (f64, f64) {
    let t = t.get();
    if t == 0.0 {
        (1.0, 0.0)
    } else if t == 1.0 {
        (0.0, 1.0)
    } else {
        let (s, c) = (FRAC_PI_2 * t).sin_cos();
        (c, s)
    }
}

pub fn alpha(t: TimePoint) -> f64 {
    alpha_sigma(t).0
}

pub fn sigma(t: TimePoint) -> f64 {
    alpha_sigma(t).1
}

pub fn snr(t: TimePoint) -> Result<f64> {
    let (a, s) = alpha_sigma(t);
    if s == 0.0 {
        return Err(Error::Divergent {
            what: "SNR",
            t: t.get(),
        });
    }
    Ok((a * a) / (s * s))
}

/// Analytic time derivative `SNR'(t) = -pi alpha_t / sigma_t^3`.
pub fn snr_prime(t: TimePoint) -> Result<f64> {
    let (a, s) = alpha_sigma(t);
    if s == 0.0 {
        return Err(Error::Divergent {
            what: "SNR'",
            t: t.get(),
        });
    }
    Ok(-PI * a / (s * s * s))
}

pub fn transition_coeffs(s: TimePoint, t: TimePoint) -> Result<TransitionCoeffs> {
    if s > t {
        return Err(Error::Ordering {
            s: s.get(),
            t: t.get(),
        });
    }
    let (alpha_s, sigma_s) = alpha_sigma(s);
    if alpha_s == 0.0 {
        return Err(Error::Divergent {
            what: "transition from alpha_s = 0",
            t: s.get(),
        });
    }
    if s == t {
        return Ok(TransitionCoeffs {
            alpha_ts: 1.0,
            sigma2_ts: 0.0,
        });
    }
    let (alpha_t, sigma_t) = alpha_sigma(t);
    let alpha_ts = alpha_t / alpha_s;
    // Round-off can push the difference a hair below zero for s close to t.
    let sigma2_ts = (sigma_t * sigma_t - alpha_ts * alpha_ts * sigma_s * sigma_s).max(0.0);
    Ok(TransitionCoeffs {
        alpha_ts,
        sigma2_ts,
    })
}

/// Weight `w(t)` turning the NELBO integrand of `space` into its plain
/// squared-error ("weighted") loss: `weighted = w(t) * nelbo`.
pub fn weight(space: TargetSpace, t: TimePoint) -> Result<f64> {
    let tv = t.get();
    if tv <= 0.0 || tv >= 1.0 {
        return Err(Error::Divergent {
            what: "loss weight",
            t: tv,
        });
    }
    let (a, s) = alpha_sigma(t);
    let a2 = a * a;
    let s2 = s * s;
    let dsnr = snr_prime(t)?;
    let w = match space {
        TargetSpace::X => -1.0 / dsnr,
        TargetSpace::Eps => -snr(t)? / dsnr,
        TargetSpace::V => -(a2 + s2) / (s2 * dsnr),
        TargetSpace::S => -a2 / (s2 * s2 * dsnr),
    };
    Ok(w)
}

/// `1 / w(t)`: the SNR factor multiplying the squared error in the NELBO.
pub fn snr_scaling(space: TargetSpace, t: TimePoint) -> Result<f64> {
    Ok(1.0 / weight(space, t)?)
}
