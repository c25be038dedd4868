//! Parametric lifetime laws used for data generation and the theoretical
//! variance oracles.
//!
//! Parameter conventions follow R: Weibull is `(shape, scale)` with
//! `S(t) = exp(-(t/scale)^shape)`; lognormal is `(meanlog, sdlog)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, LogNormal, Uniform, Weibull};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A lifetime distribution described through its survival function and
/// cumulative hazard `A`.
///
/// The continuous part of `A` has density [`hazard`](Self::hazard); discrete
/// hazard masses `ΔA = 1 - S(x)/S(x-)` are listed by
/// [`hazard_atoms`](Self::hazard_atoms).
pub trait LifetimeModel: Send + Sync + fmt::Debug {
    /// `S(t) = P(T > t)`.
    fn survival(&self, t: f64) -> f64;

    /// `S(t-) = P(T >= t)`.
    fn survival_left(&self, t: f64) -> f64 {
        self.survival(t)
    }

    /// Density of the continuous part of the cumulative hazard.
    fn hazard(&self, t: f64) -> f64;

    fn hazard_atoms(&self) -> Vec<(f64, f64)> {
        Vec::new()
    }

    /// Points where the hazard is not smooth; used to split quadrature.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// The parametric families appearing in the simulation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution {
    Exponential {
        rate: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    LogNormal {
        meanlog: f64,
        sdlog: f64,
    },
    /// Hazard `rate_before` on `[0, breakpoint]` and `rate_after` beyond.
    PiecewiseExponential {
        breakpoint: f64,
        rate_before: f64,
        rate_after: f64,
    },
    /// Uniform on `[0, upper]`.
    Uniform {
        upper: f64,
    },
}

impl ParamDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Self::Weibull { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
            Self::LogNormal { meanlog, sdlog } => {
                meanlog.is_finite() && sdlog > 0.0 && sdlog.is_finite()
            }
            Self::PiecewiseExponential {
                breakpoint,
                rate_before,
                rate_after,
            } => {
                breakpoint > 0.0
                    && rate_before > 0.0
                    && rate_after > 0.0
                    && breakpoint.is_finite()
                    && rate_before.is_finite()
                    && rate_after.is_finite()
            }
            Self::Uniform { upper } => upper > 0.0 && upper.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("invalid parameters: {self}")))
        }
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => rate * t,
            Self::Weibull { shape, scale } => (t / scale).powf(shape),
            Self::LogNormal { meanlog, sdlog } => {
                let z = (t.ln() - meanlog) / sdlog;
                -(-0.5 * erfc(-z * FRAC_1_SQRT_2)).ln_1p()
            }
            Self::Uniform { .. } => -self.survival(t).ln(),
            Self::PiecewiseExponential {
                breakpoint,
                rate_before,
                rate_after,
            } => {
                if t <= breakpoint {
                    rate_before * t
                } else {
                    rate_before * breakpoint + rate_after * (t - breakpoint)
                }
            }
        }
    }

    /// Closed-form `∫_0^tau S(t) dt` where one exists.
    pub fn rmst_closed_form(&self, tau: f64) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(-(-rate * tau).exp_m1() / rate),
            Self::PiecewiseExponential {
                breakpoint,
                rate_before,
                rate_after,
            } => {
                let c = breakpoint.min(tau);
                let head = -(-rate_before * c).exp_m1() / rate_before;
                let tail = if tau > breakpoint {
                    (-rate_before * breakpoint).exp() * -(-rate_after * (tau - breakpoint)).exp_m1()
                        / rate_after
                } else {
                    0.0
                };
                Some(head + tail)
            }
            Self::Uniform { upper } => {
                let c = tau.min(upper);
                Some(c - c * c / (2.0 * upper))
            }
            Self::Weibull { .. } | Self::LogNormal { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
            Self::Weibull { shape, scale } => Weibull::new(scale, shape)
                .expect("validated weibull")
                .sample(rng),
            Self::LogNormal { meanlog, sdlog } => LogNormal::new(meanlog, sdlog)
                .expect("validated lognormal")
                .sample(rng),
            Self::PiecewiseExponential {
                breakpoint,
                rate_before,
                rate_after,
            } => {
                // invert the cumulative hazard at a unit-exponential level
                let e: f64 = Exp1.sample(rng);
                let head = rate_before * breakpoint;
                if e <= head {
                    e / rate_before
                } else {
                    breakpoint + (e - head) / rate_after
                }
            }
            Self::Uniform { upper } => Uniform::new(0.0, upper)
                .expect("validated uniform")
                .sample(rng),
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    pub fn shared(self) -> Arc<dyn LifetimeModel> {
        Arc::new(self)
    }
}

impl LifetimeModel for ParamDistribution {
    fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::LogNormal { meanlog, sdlog } => std_normal_sf((t.ln() - meanlog) / sdlog),
            Self::Uniform { upper } => (1.0 - t / upper).max(0.0),
            _ => (-self.cumulative_hazard(t)).exp(),
        }
    }

    fn hazard(&self, t: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => rate,
            Self::Weibull { shape, scale } => {
                if t <= 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    };
                }
                shape / scale * (t / scale).powf(shape - 1.0)
            }
            Self::LogNormal { meanlog, sdlog } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let z = (t.ln() - meanlog) / sdlog;
                std_normal_pdf(z) / (sdlog * t * std_normal_sf(z))
            }
            Self::PiecewiseExponential {
                breakpoint,
                rate_before,
                rate_after,
            } => {
                if t <= breakpoint {
                    rate_before
                } else {
                    rate_after
                }
            }
            Self::Uniform { upper } => {
                if t < upper {
                    1.0 / (upper - t)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::PiecewiseExponential { breakpoint, .. } => vec![breakpoint],
            Self::Uniform { upper } => vec![upper],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ParamDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { rate } => write!(f, "Exp({rate})"),
            Self::Weibull { shape, scale } => write!(f, "Weib({shape}, {scale})"),
            Self::LogNormal { meanlog, sdlog } => write!(f, "logN({meanlog}, {sdlog})"),
            Self::PiecewiseExponential {
                breakpoint,
                rate_before,
                rate_after,
            } => write!(
                f,
                "PWExp({rate_before} on [0,{breakpoint}], {rate_after} after)"
            ),
            Self::Uniform { upper } => write!(f, "Unif[0, {upper}]"),
        }
    }
}

/// `P(T > t) = 1` for every `t`: no censoring, or a degenerate survival law.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeverFails;

impl LifetimeModel for NeverFails {
    fn survival(&self, _t: f64) -> f64 {
        1.0
    }

    fn hazard(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Survival law of the event times together with that of the censoring times.
#[derive(Debug, Clone)]
pub struct TheoreticalModel {
    pub survival: Arc<dyn LifetimeModel>,
    pub censoring: Arc<dyn LifetimeModel>,
}

impl TheoreticalModel {
    pub fn new(survival: Arc<dyn LifetimeModel>, censoring: Arc<dyn LifetimeModel>) -> Self {
        Self {
            survival,
            censoring,
        }
    }

    pub fn from_params(survival: ParamDistribution, censoring: ParamDistribution) -> Self {
        Self::new(survival.shared(), censoring.shared())
    }

    pub fn uncensored(survival: Arc<dyn LifetimeModel>) -> Self {
        Self::new(survival, Arc::new(NeverFails))
    }

    /// `y(t) = S(t-) G(t-)`, the limit of the at-risk fraction.
    pub fn at_risk_fraction(&self, t: f64) -> f64 {
        self.survival.survival_left(t) * self.censoring.survival_left(t)
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.survival.breakpoints();
        b.extend(self.censoring.breakpoints());
        b.extend(self.survival.hazard_atoms().iter().map(|a| a.0));
        b.extend(self.censoring.hazard_atoms().iter().map(|a| a.0));
        b
    }
}
