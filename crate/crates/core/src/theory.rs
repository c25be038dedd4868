//! Population quantities computed from known lifetime laws: the true RMST,
//! the asymptotic variance of a group's RMST estimator and the limiting
//! variance of the permuted (unstudentized) RMST difference.

use crate::error::{Error, Result};
use crate::model::{LifetimeModel, ParamDistribution, TheoreticalModel};
use crate::quad::{integrate, Antiderivative};
use crate::rmst::TimeWindow;

const RMST_ABS_TOL: f64 = 1e-12;
const TABLE_ABS_TOL: f64 = 1e-13;
const OUTER_ABS_TOL: f64 = 1e-11;
const REL_TOL: f64 = 1e-12;

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Model(format!("{what} is not finite")))
    }
}

fn in_window(points: Vec<f64>, tau: f64) -> Vec<f64> {
    points.into_iter().filter(|&x| x > 0.0 && x < tau).collect()
}

/// `∫_0^tau S(t) dt` by adaptive quadrature.
pub fn true_rmst(survival: &dyn LifetimeModel, window: TimeWindow) -> Result<f64> {
    let tau = window.tau();
    let mut breaks = survival.breakpoints();
    breaks.extend(survival.hazard_atoms().iter().map(|a| a.0));
    let q = integrate(
        |t| survival.survival(t),
        0.0,
        tau,
        &in_window(breaks, tau),
        RMST_ABS_TOL,
        REL_TOL,
    );
    if !q.converged {
        return Err(Error::Model(format!(
            "RMST quadrature did not converge (error estimate {:e})",
            q.error
        )));
    }
    finite(q.value, "RMST")
}

/// True RMST, using a closed form when the family has one.
pub fn true_rmst_param(dist: &ParamDistribution, window: TimeWindow) -> Result<f64> {
    match dist.rmst_closed_form(window.tau()) {
        Some(v) => Ok(v),
        None => true_rmst(dist, window),
    }
}

fn check_support(y_at_tau: f64, tau: f64) -> Result<()> {
    if !(y_at_tau > 0.0) {
        return Err(Error::Model(format!(
            "P(X >= tau) = 0 at tau = {tau}: the window extends beyond the support of the observed times"
        )));
    }
    Ok(())
}

/// Asymptotic variance of `sqrt(n) (mu_hat_i - mu_i)` for a group with
/// allocation fraction `kappa`.
///
/// `kappa^-1 ∫_0^tau w(x)^2 / ((1 - ΔA(x)) G(x-) S(x-)) dA(x)` with
/// `w(x) = ∫_x^tau S`, split into the continuous part of `A` (quadrature)
/// and its atoms (explicit sum).
pub fn true_sigma(model: &TheoreticalModel, kappa: f64, window: TimeWindow) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) && kappa != 1.0 {
        return Err(Error::invalid(format!(
            "kappa must lie in (0, 1], got {kappa}"
        )));
    }
    let tau = window.tau();
    let s = &model.survival;
    let g = &model.censoring;
    check_support(model.at_risk_fraction(tau), tau)?;

    let breaks = in_window(model.breakpoints(), tau);
    let area = Antiderivative::new(|t| s.survival(t), 0.0, tau, &breaks, TABLE_ABS_TOL, REL_TOL);
    let mu = area.total();

    let integrand = |x: f64| {
        let h = s.hazard(x);
        if h == 0.0 {
            return 0.0;
        }
        let w = mu - area.at(x);
        w * w * h / (g.survival_left(x) * s.survival_left(x))
    };
    let q = integrate(integrand, 0.0, tau, &breaks, OUTER_ABS_TOL, REL_TOL);
    if !(q.converged && area.converged()) {
        return Err(Error::Model(format!(
            "variance quadrature did not converge (error estimate {:e})",
            q.error
        )));
    }

    let mut jumps = 0.0;
    for (x, d_hazard) in s.hazard_atoms() {
        if x > tau || d_hazard <= 0.0 {
            continue;
        }
        let w = mu - area.at(x);
        if w == 0.0 {
            continue;
        }
        let y = g.survival_left(x) * s.survival_left(x);
        if !(y > 0.0) || d_hazard >= 1.0 {
            return Err(Error::Model(format!(
                "hazard atom at {x} has no mass at risk"
            )));
        }
        jumps += w * w * d_hazard / ((1.0 - d_hazard) * y);
    }
    finite((q.value + jumps) / kappa, "sigma^2")
}

/// Limiting variance of `sqrt(n) (mu_hat_1^π - mu_hat_2^π)` under random
/// relabelling of the pooled sample.
///
/// Builds the pooled limits `y = κ1 y1 + κ2 y2`, `dν = Σ κi G_i(x-) dF_i`,
/// `A = ∫ dν / y` and `S = exp(-A)`, then evaluates
/// `(κ1 κ2)^-1 ∫_0^tau (∫_x^tau S)^2 / y(x) dA(x)`.
/// Only continuous event-time laws are supported.
pub fn true_sigma_perm(
    model1: &TheoreticalModel,
    model2: &TheoreticalModel,
    kappa1: f64,
    window: TimeWindow,
) -> Result<f64> {
    if !(kappa1 > 0.0 && kappa1 < 1.0) {
        return Err(Error::invalid(format!(
            "kappa1 must lie in (0, 1), got {kappa1}"
        )));
    }
    if !model1.survival.hazard_atoms().is_empty() || !model2.survival.hazard_atoms().is_empty() {
        return Err(Error::Model(
            "pooled permutation variance requires continuous event-time laws".into(),
        ));
    }
    let kappa2 = 1.0 - kappa1;
    let tau = window.tau();
    let pooled_y =
        |x: f64| kappa1 * model1.at_risk_fraction(x) + kappa2 * model2.at_risk_fraction(x);
    check_support(pooled_y(tau), tau)?;

    let event_rate = |x: f64| {
        let part = |m: &TheoreticalModel| {
            let h = m.survival.hazard(x);
            if h == 0.0 {
                0.0
            } else {
                m.censoring.survival_left(x) * h * m.survival.survival(x)
            }
        };
        kappa1 * part(model1) + kappa2 * part(model2)
    };
    let pooled_hazard = |x: f64| {
        let dv = event_rate(x);
        if dv == 0.0 {
            0.0
        } else {
            dv / pooled_y(x)
        }
    };

    let mut breaks = model1.breakpoints();
    breaks.extend(model2.breakpoints());
    let breaks = in_window(breaks, tau);

    let cum_hazard = Antiderivative::new(pooled_hazard, 0.0, tau, &breaks, TABLE_ABS_TOL, REL_TOL);
    let pooled_s = |t: f64| (-cum_hazard.at(t)).exp();
    let area = Antiderivative::new(pooled_s, 0.0, tau, &breaks, TABLE_ABS_TOL, REL_TOL);
    let mu = area.total();

    let integrand = |x: f64| {
        let a = pooled_hazard(x);
        if a == 0.0 {
            return 0.0;
        }
        let w = mu - area.at(x);
        w * w * a / pooled_y(x)
    };
    let q = integrate(integrand, 0.0, tau, &breaks, OUTER_ABS_TOL, REL_TOL);
    if !(q.converged && area.converged() && cum_hazard.converged()) {
        return Err(Error::Model(format!(
            "permutation variance quadrature did not converge (error estimate {:e})",
            q.error
        )));
    }
    finite(q.value / (kappa1 * kappa2), "sigma_perm^2")
}
