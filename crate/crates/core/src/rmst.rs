//! Plug-in RMST estimates and their variance estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;
use crate::surv::{counting_processes, kaplan_meier, nelson_aalen, Sample};

/// The window `[0, tau]` over which survival curves are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    tau: f64,
}

impl TimeWindow {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!(
                "tau must be positive and finite, got {tau}"
            )));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// How to treat a Kaplan–Meier curve that stops before `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Refuse to integrate past the last observation.
    None,
    /// Carry the last value forward to `tau`.
    Horizontal,
}

/// Point estimate and variance estimate for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmstEstimate {
    pub mu_hat: f64,
    /// Estimate of the asymptotic variance of `sqrt(n) (mu_hat - mu)`.
    pub sigma2_hat: f64,
    pub group_size: usize,
    pub total_size: usize,
}

/// `∫_0^tau S(t) dt` for a survival step function.
pub fn rmst(km: &StepFunction, window: TimeWindow) -> Result<f64> {
    let tau = window.tau();
    if km.defined_to() < tau {
        return Err(Error::NotEstimable {
            group: 0,
            estimable_to: km.defined_to(),
            tau,
        });
    }
    km.integrate(0.0, tau)
}

fn tag_group(err: Error, group: u8) -> Error {
    match err {
        Error::NotEstimable {
            estimable_to, tau, ..
        } => Error::NotEstimable {
            group: group as usize,
            estimable_to,
            tau,
        },
        other => other,
    }
}

fn variance_from_curves(
    sample: &Sample,
    km: &StepFunction,
    tau: f64,
    total_size: usize,
) -> Result<f64> {
    let n_i = sample.len() as f64;
    let n = total_size as f64;
    let na = nelson_aalen(sample);
    let at_risk = counting_processes(sample).at_risk;

    let mut sum = 0.0;
    for &x in na.jump_times().iter().take_while(|&&x| x <= tau) {
        let remaining_area = km.integrate(x, tau)?;
        if remaining_area == 0.0 {
            continue;
        }
        let d_hazard = na.jump_at(x);
        let risk_fraction = at_risk.at(x) / n_i;
        sum += remaining_area * remaining_area * d_hazard / ((1.0 - d_hazard) * risk_fraction);
    }
    Ok(n / n_i * sum)
}

/// Plug-in estimate of the asymptotic variance of `sqrt(n) (mu_hat_i - mu_i)`.
///
/// Sums over event times `x <= tau` of
/// `(n / n_i) w(x)^2 dA(x) / ((1 - dA(x)) Y_i(x) / n_i)` with
/// `w(x) = ∫_x^tau S_i`. The risk fraction `Y_i / n_i` stands in for
/// `S_i(x-) G_i(x-)`, which it equals exactly. Terms whose remaining area is
/// zero contribute nothing, including those where the whole risk set fails.
pub fn rmst_variance(sample: &Sample, window: TimeWindow, total_size: usize) -> Result<f64> {
    let km = kaplan_meier(sample);
    rmst(&km, window).map_err(|e| tag_group(e, sample.group()))?;
    variance_from_curves(sample, &km, window.tau(), total_size)
}

/// RMST and variance estimate for one group, optionally extending the curve.
pub fn estimate_group(
    sample: &Sample,
    window: TimeWindow,
    total_size: usize,
    extension: Extension,
) -> Result<RmstEstimate> {
    if total_size < sample.len() {
        return Err(Error::invalid(format!(
            "total size {total_size} is smaller than the group size {}",
            sample.len()
        )));
    }
    let mut km = kaplan_meier(sample);
    if extension == Extension::Horizontal {
        km = km.extended_to(window.tau());
    }
    let mu_hat = rmst(&km, window).map_err(|e| tag_group(e, sample.group()))?;
    let sigma2_hat = variance_from_curves(sample, &km, window.tau(), total_size)?;
    Ok(RmstEstimate {
        mu_hat,
        sigma2_hat,
        group_size: sample.len(),
        total_size,
    })
}

/// Variance estimate for the log ratio `log mu_1 - log mu_2`.
pub fn ratio_variance(est1: &RmstEstimate, est2: &RmstEstimate) -> Result<f64> {
    if !(est1.mu_hat > 0.0) || !(est2.mu_hat > 0.0) {
        return Err(Error::Degenerate(format!(
            "log ratio needs positive RMST estimates, got {} and {}",
            est1.mu_hat, est2.mu_hat
        )));
    }
    Ok(est1.sigma2_hat / (est1.mu_hat * est1.mu_hat)
        + est2.sigma2_hat / (est2.mu_hat * est2.mu_hat))
}
