//! The four prediction targets and exact conversions between them.
//!
//! With `z = alpha x + sigma eps` the targets are
//! `eps`, `x`, `v = alpha eps - sigma x` and `s = -(z - alpha x) / sigma^2`.
//! Under the variance-preserving schedule the angular parameterisation of
//! `v` has `cos(phi) = alpha` and `sin(phi) = sigma`, so no angle is formed.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dims, Error, Result};
use crate::schedule::{alpha_sigma, TimePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetSpace {
    X,
    Eps,
    V,
    S,
}

impl TargetSpace {
    pub const ALL: [TargetSpace; 4] = [
        TargetSpace::X,
        TargetSpace::Eps,
        TargetSpace::V,
        TargetSpace::S,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetSpace::X => "x",
            TargetSpace::Eps => "eps",
            TargetSpace::V => "v",
            TargetSpace::S => "s",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            TargetSpace::X => 0,
            TargetSpace::Eps => 1,
            TargetSpace::V => 2,
            TargetSpace::S => 3,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        TargetSpace::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for TargetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(TargetSpace::X),
            "eps" | "epsilon" | "e" => Ok(TargetSpace::Eps),
            "v" => Ok(TargetSpace::V),
            "s" | "score" => Ok(TargetSpace::S),
            other => Err(Error::InvalidArgument(format!(
                "unknown target space '{other}'"
            ))),
        }
    }
}

/// A network output tagged with the target it estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub space: TargetSpace,
    pub value: Vec<f64>,
}

impl Prediction {
    pub fn new(space: TargetSpace, value: Vec<f64>) -> Self {
        Prediction { space, value }
    }
}

fn axpby(a: f64, x: &[f64], b: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_dims(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect())
}

/// `z_t = alpha_t x + sigma_t eps`.
pub fn noisify(x: &[f64], eps: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    let (a, s) = alpha_sigma(t);
    axpby(a, x, s, eps)
}

/// `v = alpha_t eps - sigma_t x`.
pub fn v_target(x: &[f64], eps: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    let (a, s) = alpha_sigma(t);
    axpby(a, eps, -s, x)
}

/// Score of `q(z_t | x)`: `-(z - alpha_t x) / sigma_t^2`.
pub fn score_target(x: &[f64], z: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    let (a, s) = alpha_sigma(t);
    if s == 0.0 {
        return Err(Error::Divergent {
            what: "score",
            t: t.get(),
        });
    }
    let s2 = s * s;
    check_dims(x.len(), z.len())?;
    Ok(z.iter()
        .zip(x)
        .map(|(zi, xi)| -(zi - a * xi) / s2)
        .collect())
}

/// Regression target of `space` for a clean point and its noise draw.
pub fn target(space: TargetSpace, x: &[f64], eps: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    match space {
        TargetSpace::X => {
            check_dims(x.len(), eps.len())?;
            Ok(x.to_vec())
        }
        TargetSpace::Eps => {
            check_dims(x.len(), eps.len())?;
            Ok(eps.to_vec())
        }
        TargetSpace::V => v_target(x, eps, t),
        TargetSpace::S => {
            let z = noisify(x, eps, t)?;
            score_target(x, &z, t)
        }
    }
}

/// `(z - sigma_t eps_hat) / alpha_t`; undefined at `t = 1`.
pub fn x_from_eps(z: &[f64], eps_hat: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    let (a, s) = alpha_sigma(t);
    if a == 0.0 {
        return Err(Error::Divergent {
            what: "x from eps",
            t: t.get(),
        });
    }
    axpby(1.0 / a, z, -s / a, eps_hat)
}

/// `alpha_t z - sigma_t v_hat`.
pub fn x_from_v(z: &[f64], v_hat: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    let (a, s) = alpha_sigma(t);
    axpby(a, z, -s, v_hat)
}

/// Tweedie: `(z + sigma_t^2 s_hat) / alpha_t`; undefined at `t = 1`.
pub fn x_from_score(z: &[f64], s_hat: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    let (a, s) = alpha_sigma(t);
    if a == 0.0 {
        return Err(Error::Divergent {
            what: "x from score",
            t: t.get(),
        });
    }
    axpby(1.0 / a, z, s * s / a, s_hat)
}

/// The data estimate implied by a prediction in any space.
pub fn to_x_prediction(pred: &Prediction, z: &[f64], t: TimePoint) -> Result<Vec<f64>> {
    match pred.space {
        TargetSpace::X => {
            check_dims(z.len(), pred.value.len())?;
            Ok(pred.value.clone())
        }
        TargetSpace::Eps => x_from_eps(z, &pred.value, t),
        TargetSpace::V => x_from_v(z, &pred.value, t),
        TargetSpace::S => x_from_score(z, &pred.value, t),
    }
}

/// Expresses a data estimate in `space`: `eps_hat = (z - alpha x_hat) / sigma`,
/// `v_hat = alpha eps_hat - sigma x_hat`, `s_hat = -eps_hat / sigma`.
pub fn from_x_prediction(
    space: TargetSpace,
    x_hat: &[f64],
    z: &[f64],
    t: TimePoint,
) -> Result<Prediction> {
    check_dims(z.len(), x_hat.len())?;
    let (a, s) = alpha_sigma(t);
    if space == TargetSpace::X {
        return Ok(Prediction::new(space, x_hat.to_vec()));
    }
    if s == 0.0 {
        return Err(Error::Divergent {
            what: "implied noise",
            t: t.get(),
        });
    }
    let eps_hat: Vec<f64> = z
        .iter()
        .zip(x_hat)
        .map(|(zi, xi)| (zi - a * xi) / s)
        .collect();
    let value = match space {
        TargetSpace::X => unreachable!(),
        TargetSpace::Eps => eps_hat,
        TargetSpace::V => axpby(a, &eps_hat, -s, x_hat)?,
        TargetSpace::S => eps_hat.iter().map(|e| -e / s).collect(),
    };
    Ok(Prediction::new(space, value))
}
