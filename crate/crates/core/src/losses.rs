//! Per-example loss integrands.
//!
//! Every integrand is `c(form, space, t) * ||target - pred||^2` with the
//! squared norm summed over dimensions:
//!
//! | space | NELBO `c`                      | weighted | rescaled `c`          |
//! |-------|--------------------------------|----------|-----------------------|
//! | x     | `-SNR'`                        | 1        | 1                     |
//! | eps   | `-SNR' / SNR`                  | 1        | `sigma^2 / alpha^2`   |
//! | v     | `-sigma^2/(alpha^2+sigma^2) SNR'` | 1     | `sigma^2/(alpha^2+sigma^2)` |
//! | s     | `-sigma^4/alpha^2 SNR'`        | 1        | `sigma^4 / alpha^2`   |
//!
//! NELBO integrands agree across spaces for a shared data estimate, and each
//! rescaled loss equals the weighted x-space loss. The constant 1/2 of the
//! transition KL is dropped in the continuous integrands and kept in
//! [`discrete_nelbo_term`].

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dims, Error, Result};
use crate::schedule::{alpha_sigma, snr, snr_prime, TimePoint};
use crate::targetspace::{from_x_prediction, noisify, target, TargetSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossForm {
    Nelbo,
    Weighted,
    Rescaled,
}

impl LossForm {
    pub const ALL: [LossForm; 3] = [LossForm::Nelbo, LossForm::Weighted, LossForm::Rescaled];

    pub fn name(self) -> &'static str {
        match self {
            LossForm::Nelbo => "nelbo",
            LossForm::Weighted => "weighted",
            LossForm::Rescaled => "rescaled",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            LossForm::Nelbo => 0,
            LossForm::Weighted => 1,
            LossForm::Rescaled => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        LossForm::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for LossForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nelbo" => Ok(LossForm::Nelbo),
            "weighted" => Ok(LossForm::Weighted),
            "rescaled" => Ok(LossForm::Rescaled),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss form '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub value: f64,
    pub space: TargetSpace,
    pub form: LossForm,
    pub t: TimePoint,
}

/// Coefficient on the squared error for `(form, space)` at `t`, valid on `(0, 1)`.
pub fn loss_coefficient(form: LossForm, space: TargetSpace, t: TimePoint) -> Result<f64> {
    let tv = t.get();
    if tv <= 0.0 || tv >= 1.0 {
        return Err(Error::Divergent {
            what: "loss coefficient",
            t: tv,
        });
    }
    let (a, s) = alpha_sigma(t);
    let (a2, s2) = (a * a, s * s);
    let c = match form {
        LossForm::Weighted => 1.0,
        LossForm::Nelbo => {
            let d = snr_prime(t)?;
            match space {
                TargetSpace::X => -d,
                TargetSpace::Eps => -d / snr(t)?,
                TargetSpace::V => -s2 / (a2 + s2) * d,
                TargetSpace::S => -(s2 * s2) / a2 * d,
            }
        }
        LossForm::Rescaled => match space {
            TargetSpace::X => 1.0,
            TargetSpace::Eps => s2 / a2,
            TargetSpace::V => s2 / (a2 + s2),
            TargetSpace::S => (s2 * s2) / a2,
        },
    };
    Ok(c)
}

pub fn squared_error(target: &[f64], pred: &[f64]) -> Result<f64> {
    check_dims(target.len(), pred.len())?;
    Ok(target
        .iter()
        .zip(pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `c(form, space, t) * ||target - pred||^2`, where `target` is expressed in `space`.
pub fn loss_integrand(
    form: LossForm,
    space: TargetSpace,
    target: &[f64],
    pred: &[f64],
    t: TimePoint,
) -> Result<LossSample> {
    let c = loss_coefficient(form, space, t)?;
    let value = c * squared_error(target, pred)?;
    Ok(LossSample {
        value,
        space,
        form,
        t,
    })
}

/// NELBO integrand in x, eps, v and s space computed from one data estimate
/// through its implied predictions in each space.
pub fn nelbo_equiv_check(x: &[f64], x_hat: &[f64], eps: &[f64], t: TimePoint) -> Result<[f64; 4]> {
    let z = noisify(x, eps, t)?;
    let mut out = [0.0; 4];
    for (slot, space) in out.iter_mut().zip(TargetSpace::ALL) {
        let tgt = target(space, x, eps, t)?;
        let pred = from_x_prediction(space, x_hat, &z, t)?;
        *slot = loss_integrand(LossForm::Nelbo, space, &tgt, &pred.value, t)?.value;
    }
    Ok(out)
}

/// Diffusion-loss term of one discrete step `s -> t`:
/// `1/2 (SNR(s) - SNR(t)) ||x - x_hat||^2`.
pub fn discrete_nelbo_term(x: &[f64], x_hat: &[f64], s: TimePoint, t: TimePoint) -> Result<f64> {
    if s >= t {
        return Err(Error::Ordering {
            s: s.get(),
            t: t.get(),
        });
    }
    let gap = snr(s)? - snr(t)?;
    Ok(0.5 * gap * squared_error(x, x_hat)?)
}
