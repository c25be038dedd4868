//! Data-generating scenarios of the simulation study.
//!
//! Survival scenarios S1–S7 fix the law of group 1 and give group 2 a
//! one-parameter family; the free parameter is calibrated so that the RMST
//! difference `mu_2 - mu_1` equals a requested `delta`. Censoring
//! configurations C1–C3 give each group its censoring law.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ParamDistribution, TheoreticalModel};
use crate::rmst::TimeWindow;
use crate::surv::{estimability, Observation, Sample};
use crate::theory::true_rmst_param;

/// Datasets are redrawn at most this many times before giving up.
pub const REGENERATION_CAP: usize = 10_000;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurvivalScenario {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
}

/// How the free parameter of group 2 is searched.
#[derive(Debug, Clone, Copy)]
enum Domain {
    /// Positive parameter, searched on the log scale from a starting value.
    Positive(f64),
    /// Unrestricted parameter, searched from a starting value.
    Real(f64),
    /// A hazard change point; only values in `(0, tau]` matter.
    ChangePoint,
}

impl SurvivalScenario {
    pub const ALL: [SurvivalScenario; 7] = [
        Self::S1,
        Self::S2,
        Self::S3,
        Self::S4,
        Self::S5,
        Self::S6,
        Self::S7,
    ];

    pub fn description(&self) -> &'static str {
        match self {
            Self::S1 => "exponential (proportional hazards)",
            Self::S2 => "exponential vs piecewise exponential (late departures)",
            Self::S3 => "exponential vs piecewise exponential (crossing curves)",
            Self::S4 => "lognormal scale alternatives",
            Self::S5 => "Weibull shape alternatives (crossing curves)",
            Self::S6 => "Weibull scale alternatives (crossing curves)",
            Self::S7 => "Weibull vs piecewise exponential (crossing curves)",
        }
    }

    /// Name of the calibrated parameter of group 2.
    pub fn parameter_name(&self) -> &'static str {
        match self {
            Self::S1 | Self::S2 => "rate",
            Self::S3 | Self::S7 => "breakpoint",
            Self::S4 => "meanlog",
            Self::S5 => "shape",
            Self::S6 => "scale",
        }
    }

    pub fn group1(&self) -> ParamDistribution {
        match self {
            Self::S1 | Self::S2 | Self::S3 => ParamDistribution::Exponential { rate: 0.2 },
            // log-variance 0.25
            Self::S4 => ParamDistribution::LogNormal {
                meanlog: 2.0,
                sdlog: 0.5,
            },
            Self::S5 | Self::S6 => ParamDistribution::Weibull {
                shape: 3.0,
                scale: 8.0,
            },
            Self::S7 => ParamDistribution::Weibull {
                shape: 2.0,
                scale: 7.0,
            },
        }
    }

    pub fn group2(&self, param: f64) -> ParamDistribution {
        match self {
            Self::S1 => ParamDistribution::Exponential { rate: param },
            Self::S2 => ParamDistribution::PiecewiseExponential {
                breakpoint: 2.0,
                rate_before: 0.2,
                rate_after: param,
            },
            Self::S3 => ParamDistribution::PiecewiseExponential {
                breakpoint: param,
                rate_before: 0.5,
                rate_after: 0.05,
            },
            Self::S4 => ParamDistribution::LogNormal {
                meanlog: param,
                sdlog: 0.5,
            },
            Self::S5 => ParamDistribution::Weibull {
                shape: param,
                scale: 14.0,
            },
            Self::S6 => ParamDistribution::Weibull {
                shape: 1.5,
                scale: param,
            },
            Self::S7 => ParamDistribution::PiecewiseExponential {
                breakpoint: param,
                rate_before: 0.15,
                rate_after: 0.02,
            },
        }
    }

    /// Parameter value for which group 2 has the law of group 1, if any.
    fn null_parameter(&self) -> Option<f64> {
        match self {
            Self::S1 | Self::S2 => Some(0.2),
            _ => None,
        }
    }

    fn domain(&self) -> Domain {
        match self {
            Self::S1 | Self::S2 => Domain::Positive(0.2),
            Self::S3 | Self::S7 => Domain::ChangePoint,
            Self::S4 => Domain::Real(2.0),
            Self::S5 => Domain::Positive(1.5),
            Self::S6 => Domain::Positive(8.0),
        }
    }
}

impl fmt::Display for SurvivalScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SurvivalScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::invalid(format!("unknown survival scenario `{s}` (expected S1..S7)"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CensoringScenario {
    C1,
    C2,
    C3,
}

impl CensoringScenario {
    pub const ALL: [CensoringScenario; 3] = [Self::C1, Self::C2, Self::C3];

    pub fn description(&self) -> &'static str {
        match self {
            Self::C1 => "Weib (uneq)",
            Self::C2 => "Unif (eq)",
            Self::C3 => "Weib (eq)",
        }
    }

    /// Censoring laws of groups 1 and 2.
    pub fn laws(&self) -> [ParamDistribution; 2] {
        match self {
            Self::C1 => [
                ParamDistribution::Weibull {
                    shape: 3.0,
                    scale: 18.0,
                },
                ParamDistribution::Weibull {
                    shape: 0.5,
                    scale: 40.0,
                },
            ],
            Self::C2 => [ParamDistribution::Uniform { upper: 25.0 }; 2],
            Self::C3 => {
                [ParamDistribution::Weibull {
                    shape: 3.0,
                    scale: 15.0,
                }; 2]
            }
        }
    }
}

impl fmt::Display for CensoringScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for CensoringScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown censoring scenario `{s}` (expected C1..C3)"
                ))
            })
    }
}

/// One simulation setting: laws, RMST difference and group sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub survival: SurvivalScenario,
    pub censoring: CensoringScenario,
    /// Target `mu_2 - mu_1`.
    pub delta: f64,
    pub n1: usize,
    pub n2: usize,
    pub tau: f64,
}

impl ScenarioSpec {
    pub fn new(
        survival: SurvivalScenario,
        censoring: CensoringScenario,
        delta: f64,
        n1: usize,
        n2: usize,
        tau: f64,
    ) -> Result<Self> {
        let spec = Self {
            survival,
            censoring,
            delta,
            n1,
            n2,
            tau,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!(
                "delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::invalid(format!(
                "group sizes must be at least 2, got ({}, {})",
                self.n1, self.n2
            )));
        }
        TimeWindow::new(self.tau)?;
        Ok(())
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow::new(self.tau).expect("validated tau")
    }

    /// Stable text key of the setting, also used to derive random streams.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/n=({},{})/delta={}/tau={}",
            self.survival, self.censoring, self.n1, self.n2, self.delta, self.tau
        )
    }

    pub fn calibrate(&self) -> Result<CalibratedScenario> {
        let param = solve_param(self)?;
        let survival = [self.survival.group1(), self.survival.group2(param)];
        let window = self.window();
        let true_rmst = [
            true_rmst_param(&survival[0], window)?,
            true_rmst_param(&survival[1], window)?,
        ];
        Ok(CalibratedScenario {
            spec: *self,
            solved_param: param,
            survival,
            censoring: self.censoring.laws(),
            true_rmst,
        })
    }
}

/// Group-2 parameter giving `true_rmst(group 2) = true_rmst(group 1) + delta`.
pub fn solve_param(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    let scenario = spec.survival;
    let window = spec.window();
    if spec.delta == 0.0 {
        if let Some(p) = scenario.null_parameter() {
            return Ok(p);
        }
    }
    let target = true_rmst_param(&scenario.group1(), window)? + spec.delta;
    let residual =
        |p: f64| -> Result<f64> { Ok(true_rmst_param(&scenario.group2(p), window)? - target) };
    let unreachable = |lo: f64, hi: f64| {
        Error::Calibration(format!(
            "{scenario}: target RMST {target:.6} is outside the attainable range ({:.6}, {:.6}) \
             of the {} family at tau = {}",
            lo.min(hi) + target,
            lo.max(hi) + target,
            scenario.parameter_name(),
            spec.tau
        ))
    };

    // work on a transformed axis u with p = to_param(u)
    let (to_param, mut lo, mut hi): (Box<dyn Fn(f64) -> f64>, f64, f64) = match scenario.domain() {
        Domain::Positive(start) => (Box::new(f64::exp), start.ln() - 0.5, start.ln() + 0.5),
        Domain::Real(start) => (Box::new(|u| u), start - 0.5, start + 0.5),
        Domain::ChangePoint => (Box::new(|u| u), spec.tau * 1e-9, spec.tau),
    };
    let mut f_lo = residual(to_param(lo))?;
    let mut f_hi = residual(to_param(hi))?;
    if let Domain::ChangePoint = scenario.domain() {
        if f_lo * f_hi > 0.0 {
            return Err(unreachable(f_lo, f_hi));
        }
    } else {
        let mut step = 1.0;
        let mut expansions = 0;
        while f_lo * f_hi > 0.0 {
            if expansions == 60 {
                return Err(unreachable(f_lo, f_hi));
            }
            // move the end whose residual is smaller in magnitude outward
            if f_lo.abs() < f_hi.abs() {
                lo -= step;
                f_lo = residual(to_param(lo))?;
            } else {
                hi += step;
                f_hi = residual(to_param(hi))?;
            }
            step *= 2.0;
            expansions += 1;
        }
    }
    if f_lo == 0.0 {
        return Ok(to_param(lo));
    }
    if f_hi == 0.0 {
        return Ok(to_param(hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = residual(to_param(mid))?;
        if f_mid.abs() < RESIDUAL_TOL * 1e-2 {
            return Ok(to_param(mid));
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (best, f_best) = if f_lo.abs() < f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    if f_best.abs() < RESIDUAL_TOL {
        Ok(to_param(best))
    } else {
        Err(Error::Calibration(format!(
            "{scenario}: bisection stalled with residual {f_best:e}"
        )))
    }
}

/// A scenario with its group-2 parameter solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedScenario {
    pub spec: ScenarioSpec,
    pub solved_param: f64,
    pub survival: [ParamDistribution; 2],
    pub censoring: [ParamDistribution; 2],
    pub true_rmst: [f64; 2],
}

/// A simulated two-sample dataset.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub sample1: Sample,
    pub sample2: Sample,
    /// Datasets discarded before this one was accepted.
    pub regenerations: usize,
}

impl CalibratedScenario {
    /// True `mu_1 - mu_2`.
    pub fn true_difference(&self) -> f64 {
        self.true_rmst[0] - self.true_rmst[1]
    }

    /// True `mu_1 / mu_2`.
    pub fn true_ratio(&self) -> f64 {
        self.true_rmst[0] / self.true_rmst[1]
    }

    /// Event and censoring laws of `group` (1 or 2).
    pub fn model(&self, group: usize) -> TheoreticalModel {
        assert!(group == 1 || group == 2, "group must be 1 or 2");
        TheoreticalModel::from_params(self.survival[group - 1], self.censoring[group - 1])
    }

    /// Allocation fraction of group 1.
    pub fn kappa1(&self) -> f64 {
        self.spec.n1 as f64 / (self.spec.n1 + self.spec.n2) as f64
    }

    fn draw_group<R: Rng + ?Sized>(&self, group: usize, rng: &mut R) -> Sample {
        let n = if group == 1 {
            self.spec.n1
        } else {
            self.spec.n2
        };
        let t = sample_survival(&self.survival[group - 1], rng, n);
        let c = sample_survival(&self.censoring[group - 1], rng, n);
        let observations = t
            .iter()
            .zip(&c)
            .map(|(&t, &c)| {
                Observation::new(t.min(c), t <= c, group as u8).expect("positive draws")
            })
            .collect();
        Sample::from_observations(observations).expect("non-empty group")
    }

    /// Draws both groups, redrawing the whole dataset until both Kaplan–Meier
    /// curves are estimable on `[0, tau]`.
    pub fn generate_dataset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GeneratedDataset> {
        let tau = self.spec.tau;
        for regenerations in 0..=REGENERATION_CAP {
            let sample1 = self.draw_group(1, rng);
            let sample2 = self.draw_group(2, rng);
            if estimability(&sample1, tau)?.fully_estimable_on_window
                && estimability(&sample2, tau)?.fully_estimable_on_window
            {
                return Ok(GeneratedDataset {
                    sample1,
                    sample2,
                    regenerations,
                });
            }
        }
        Err(Error::Pathological(format!(
            "{}: no estimable dataset after {REGENERATION_CAP} regenerations",
            self.spec.label()
        )))
    }
}

/// `count` i.i.d. draws from `dist`.
pub fn sample_survival<R: Rng + ?Sized>(
    dist: &ParamDistribution,
    rng: &mut R,
    count: usize,
) -> Vec<f64> {
    dist.sample_n(rng, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn spec(s: SurvivalScenario, c: CensoringScenario, delta: f64) -> ScenarioSpec {
        ScenarioSpec::new(s, c, delta, 20, 20, 10.0).unwrap()
    }

    fn exp_rmst(rate: f64) -> f64 {
        (1.0 - (-10.0 * rate).exp()) / rate
    }

    #[test]
    fn s1_and_s2_coincide_under_the_null() {
        for s in [SurvivalScenario::S1, SurvivalScenario::S2] {
            let cal = spec(s, CensoringScenario::C2, 0.0).calibrate().unwrap();
            assert_eq!(cal.solved_param, 0.2);
            assert_eq!(cal.true_rmst[0], cal.true_rmst[1]);
        }
        let a = spec(SurvivalScenario::S1, CensoringScenario::C2, 0.0)
            .calibrate()
            .unwrap();
        let b = spec(SurvivalScenario::S2, CensoringScenario::C2, 0.0)
            .calibrate()
            .unwrap();
        for t in [0.5, 2.0, 3.0, 9.0] {
            use crate::model::LifetimeModel;
            assert!((a.survival[1].survival(t) - b.survival[1].survival(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn s1_delta_one_rate() {
        let lambda = solve_param(&spec(SurvivalScenario::S1, CensoringScenario::C1, 1.0)).unwrap();
        assert!((exp_rmst(lambda) - exp_rmst(0.2) - 1.0).abs() < 1e-9);
        assert!((lambda - 0.1428).abs() < 5e-4, "{lambda}");
    }

    #[test]
    fn s3_null_breakpoint_matches_closed_form() {
        let c = solve_param(&spec(SurvivalScenario::S3, CensoringScenario::C1, 0.0)).unwrap();
        let mu = 2.0 * (1.0 - (-0.5 * c).exp())
            + 20.0 * (-0.5 * c).exp() * (1.0 - (-0.05 * (10.0 - c)).exp());
        assert!((mu - exp_rmst(0.2)).abs() < 1e-9);
        assert!(c > 0.0 && c < 10.0);
    }

    #[test]
    fn every_grid_setting_calibrates() {
        for s in SurvivalScenario::ALL {
            for delta in [0.0, 0.5, 1.0, 1.5, 2.0] {
                let cal = spec(s, CensoringScenario::C1, delta).calibrate().unwrap();
                let gap = cal.true_rmst[1] - cal.true_rmst[0] - delta;
                assert!(gap.abs() < 1e-8, "{s} delta {delta}: {gap}");
                cal.survival[1].validate().unwrap();
            }
        }
    }

    #[test]
    fn unreachable_targets_report_the_range() {
        let err = solve_param(&spec(SurvivalScenario::S3, CensoringScenario::C1, 4.0)).unwrap_err();
        match err {
            Error::Calibration(msg) => assert!(msg.contains("attainable range"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(solve_param(&spec(SurvivalScenario::S1, CensoringScenario::C1, 6.0)).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ScenarioSpec::new(
            SurvivalScenario::S1,
            CensoringScenario::C1,
            -1.0,
            20,
            20,
            10.0
        )
        .is_err());
        assert!(ScenarioSpec::new(
            SurvivalScenario::S1,
            CensoringScenario::C1,
            0.0,
            1,
            20,
            10.0
        )
        .is_err());
        assert!(ScenarioSpec::new(
            SurvivalScenario::S1,
            CensoringScenario::C1,
            0.0,
            20,
            20,
            0.0
        )
        .is_err());
    }

    #[test]
    fn generated_datasets_are_estimable() {
        let cal = spec(SurvivalScenario::S5, CensoringScenario::C1, 0.0)
            .calibrate()
            .unwrap();
        let mut rng = Stream::root(1).rng();
        let mut regenerations = 0;
        for _ in 0..300 {
            let d = cal.generate_dataset(&mut rng).unwrap();
            assert_eq!(d.sample1.len(), 20);
            assert_eq!(d.sample2.len(), 20);
            assert_eq!(d.sample1.group(), 1);
            assert_eq!(d.sample2.group(), 2);
            assert!(
                estimability(&d.sample1, 10.0)
                    .unwrap()
                    .fully_estimable_on_window
            );
            assert!(
                estimability(&d.sample2, 10.0)
                    .unwrap()
                    .fully_estimable_on_window
            );
            regenerations += d.regenerations;
        }
        // group 1 survives past tau with probability ~ e^{-(10/8)^3}: regeneration does occur
        assert!(regenerations > 0);
    }

    #[test]
    fn pathological_settings_hit_the_cap() {
        // tau far beyond the support of the uniform censoring: never estimable
        let spec = ScenarioSpec::new(SurvivalScenario::S4, CensoringScenario::C2, 0.0, 5, 5, 30.0)
            .unwrap();
        let cal = CalibratedScenario {
            spec,
            solved_param: 2.0,
            survival: [ParamDistribution::Exponential { rate: 1e-6 }; 2],
            censoring: CensoringScenario::C2.laws(),
            true_rmst: [0.0; 2],
        };
        let mut rng = Stream::root(2).rng();
        assert!(matches!(
            cal.generate_dataset(&mut rng),
            Err(Error::Pathological(_))
        ));
    }

    #[test]
    fn names_parse() {
        assert_eq!(
            "s5".parse::<SurvivalScenario>().unwrap(),
            SurvivalScenario::S5
        );
        assert_eq!(
            "C3".parse::<CensoringScenario>().unwrap(),
            CensoringScenario::C3
        );
        assert!("S8".parse::<SurvivalScenario>().is_err());
        let json = serde_json::to_string(&SurvivalScenario::S2).unwrap();
        assert_eq!(json, "\"S2\"");
    }
}
