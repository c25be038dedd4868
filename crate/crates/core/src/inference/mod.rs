//! Two-sample RMST tests and confidence intervals.
//!
//! Three procedures are provided:
//!
//! * the asymptotic Wald-type test with normal critical values,
//! * the unstudentized permutation test on `|mu_1 - mu_2|`, which is exact
//!   only when both groups share survival and censoring laws,
//! * the studentized permutation test, which divides every permuted
//!   difference by its own variance estimate and stays asymptotically valid
//!   without exchangeability. Its permutation quantile also yields confidence
//!   intervals for the difference and (on the log scale) the ratio.
//!
//! Permutations relabel whole `(time, status)` pairs. Permuted curves that
//! stop before `tau` are extended horizontally; the original data must be
//! estimable on the full window.

mod pooled;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rmst::{RmstEstimate, TimeWindow};
use crate::rng::Stream;
use crate::serde_ext;
use crate::step::StepFunction;
use crate::surv::{Observation, Sample};

use pooled::{GroupStats, PooledData, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Asymptotic,
    StudentizedPerm,
    UnstudentizedPerm,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::Asymptotic,
        Method::StudentizedPerm,
        Method::UnstudentizedPerm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Asymptotic => "asymptotic",
            Method::StudentizedPerm => "studentized-perm",
            Method::UnstudentizedPerm => "unstudentized-perm",
        }
    }

    pub fn is_permutation(&self) -> bool {
        !matches!(self, Method::Asymptotic)
    }

    /// Whether the method yields a confidence interval for `estimand`.
    pub fn supports(&self, estimand: Estimand) -> bool {
        !(matches!(self, Method::UnstudentizedPerm) && estimand == Estimand::Ratio)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" | "asym" => Ok(Method::Asymptotic),
            "studentized-perm" | "studentized" | "stp" => Ok(Method::StudentizedPerm),
            "unstudentized-perm" | "unstudentized" | "unp" => Ok(Method::UnstudentizedPerm),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimand {
    /// `mu_1 - mu_2`
    Difference,
    /// `mu_1 / mu_2`, handled on the log scale
    Ratio,
}

impl Estimand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimand::Difference => "difference",
            Estimand::Ratio => "ratio",
        }
    }

    /// Value of the estimand when the two RMSTs coincide.
    pub fn null_value(&self) -> f64 {
        match self {
            Estimand::Difference => 0.0,
            Estimand::Ratio => 1.0,
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" | "diff" => Ok(Estimand::Difference),
            "ratio" | "rat" => Ok(Estimand::Ratio),
            other => Err(Error::invalid(format!("unknown estimand `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
    pub method: Method,
    pub estimand: Estimand,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_perm: 2000,
            seed: 0,
            method: Method::StudentizedPerm,
            estimand: Estimand::Difference,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n_perm == 0 {
            return Err(Error::invalid(
                "the number of permutations must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    #[serde(with = "serde_ext::f64_ext")]
    pub lower: f64,
    #[serde(with = "serde_ext::f64_ext")]
    pub upper: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Number of permutation replicates evaluated.
    pub replicates: usize,
    /// Replicates in which at least one group's curve had to be extended.
    pub extended_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub method: Method,
    pub estimand: Estimand,
    /// Asymptotic: signed Wald statistic. Permutation methods: the
    /// absolute statistic compared against the permutation quantile.
    #[serde(with = "serde_ext::f64_ext")]
    pub statistic: f64,
    /// `z_{1-alpha/2}` or the permutation quantile.
    #[serde(with = "serde_ext::f64_ext")]
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub point_estimate: f64,
    pub ci: Option<ConfidenceInterval>,
    pub diagnostics: Diagnostics,
}

/// Sorted permutation statistics and the quantile used for decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationDistribution {
    pub replicate_stats: Vec<f64>,
    /// `k = ceil((1 - alpha)(B + 1))`.
    pub quantile_order: usize,
    /// The `k`-th smallest replicate statistic, or infinity if `k > B`.
    pub q_pi: f64,
}

impl PermutationDistribution {
    pub fn new(mut stats: Vec<f64>, alpha: f64) -> Self {
        stats.sort_by(f64::total_cmp);
        let b = stats.len();
        let k = quantile_order(alpha, b);
        let q_pi = if k <= b { stats[k - 1] } else { f64::INFINITY };
        Self {
            replicate_stats: stats,
            quantile_order: k,
            q_pi,
        }
    }

    /// `(1 + #{T_b >= observed}) / (B + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        let below = self.replicate_stats.partition_point(|&t| t < observed);
        let at_least = self.replicate_stats.len() - below;
        (1 + at_least) as f64 / (self.replicate_stats.len() + 1) as f64
    }
}

/// `ceil((1 - alpha)(B + 1))`, guarded against representation error in the
/// product (e.g. `0.95 * 20`).
pub fn quantile_order(alpha: f64, b: usize) -> usize {
    let x = (1.0 - alpha) * (b + 1) as f64;
    ((x - 1e-9).ceil() as usize).max(1)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn normal_two_sided_p(z: f64) -> f64 {
    (2.0 * Normal::standard().sf(z.abs())).min(1.0)
}

/// Carries the last value of a survival curve forward to `tau`.
pub fn horizontal_extension(km: &StepFunction, tau: f64) -> StepFunction {
    km.extended_to(tau)
}

/// Uniformly random split of pooled `(time, status)` pairs into groups of
/// sizes `n1` and `len - n1`, relabelled 1 and 2.
pub fn permute_pairs<R: Rng + ?Sized>(
    pooled: &[Observation],
    n1: usize,
    rng: &mut R,
) -> Result<(Sample, Sample)> {
    let n = pooled.len();
    if n1 == 0 || n1 >= n {
        return Err(Error::invalid(format!(
            "group 1 size must lie in 1..{n}, got {n1}"
        )));
    }
    let mut order = Vec::with_capacity(n);
    pooled::draw_subset(n, n1, rng, &mut order);
    let relabel = |idx: &[usize], group: u8| -> Result<Sample> {
        let obs = idx
            .iter()
            .map(|&i| Observation::new(pooled[i].time, pooled[i].event, group))
            .collect::<Result<Vec<_>>>()?;
        Sample::from_observations(obs)
    };
    Ok((relabel(&order[..n1], 1)?, relabel(&order[n1..], 2)?))
}

/// Statistics recomputed on one relabelled dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateStats {
    /// `sqrt(n) |mu_1 - mu_2| / sigma`
    pub diff_studentized: f64,
    /// `|mu_1 - mu_2|`
    pub diff_unstudentized: f64,
    /// `sqrt(n) |log mu_1 - log mu_2| / sigma_rat`
    pub ratio_studentized: f64,
    /// Number of groups (0..=2) whose curve was extended.
    pub extended_groups: u8,
}

/// A ratio of a non-negative numerator to a scale that may vanish: a zero
/// scale maps to 0 when the numerator is also 0 and to infinity otherwise.
fn guarded_ratio(numerator: f64, scale: f64) -> f64 {
    if scale > 0.0 && numerator.is_finite() {
        numerator / scale
    } else if numerator == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn replicate_stats(g1: &GroupStats, g2: &GroupStats, n: f64) -> ReplicateStats {
    let sqrt_n = n.sqrt();
    let diff = (g1.mu - g2.mu).abs();
    let sigma = (g1.sigma2 + g2.sigma2).sqrt();
    let ratio_studentized = if g1.mu > 0.0 && g2.mu > 0.0 {
        let log_diff = (g1.mu.ln() - g2.mu.ln()).abs();
        let sigma_rat = (g1.sigma2 / (g1.mu * g1.mu) + g2.sigma2 / (g2.mu * g2.mu)).sqrt();
        guarded_ratio(sqrt_n * log_diff, sigma_rat)
    } else {
        f64::INFINITY
    };
    ReplicateStats {
        diff_studentized: guarded_ratio(sqrt_n * diff, sigma),
        diff_unstudentized: diff,
        ratio_studentized,
        extended_groups: u8::from(g1.extended) + u8::from(g2.extended),
    }
}

/// Replicate statistics for `n_perm` relabellings, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationRun {
    pub replicates: Vec<ReplicateStats>,
}

impl PermutationRun {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn extended_replicates(&self) -> usize {
        self.replicates
            .iter()
            .filter(|r| r.extended_groups > 0)
            .count()
    }

    pub fn distribution(
        &self,
        method: Method,
        estimand: Estimand,
        alpha: f64,
    ) -> Result<PermutationDistribution> {
        let pick: fn(&ReplicateStats) -> f64 = match (method, estimand) {
            (Method::StudentizedPerm, Estimand::Difference) => |r| r.diff_studentized,
            (Method::StudentizedPerm, Estimand::Ratio) => |r| r.ratio_studentized,
            (Method::UnstudentizedPerm, Estimand::Difference) => |r| r.diff_unstudentized,
            _ => {
                return Err(Error::invalid(format!(
                    "no permutation distribution for {method} / {estimand}"
                )))
            }
        };
        Ok(PermutationDistribution::new(
            self.replicates.iter().map(pick).collect(),
            alpha,
        ))
    }
}

/// Both groups' estimates on the original data, prepared for repeated
/// relabelling.
#[derive(Debug, Clone)]
pub struct TwoSampleAnalysis {
    data: PooledData,
    window: TimeWindow,
    est1: RmstEstimate,
    est2: RmstEstimate,
}

impl TwoSampleAnalysis {
    /// Fails if either group's Kaplan–Meier curve stops before `tau`.
    pub fn new(sample1: &Sample, sample2: &Sample, window: TimeWindow) -> Result<Self> {
        let data = PooledData::new(sample1, sample2, window)?;
        let mut scratch = Scratch::new(data.n());
        let (g1, g2) = data.evaluate(data.original_assignment(), &mut scratch);
        for (group, g) in [(1usize, &g1), (2, &g2)] {
            if g.extended {
                return Err(Error::NotEstimable {
                    group,
                    estimable_to: g.estimable_to,
                    tau: window.tau(),
                });
            }
        }
        let n = data.n();
        let est = |g: &GroupStats, size| RmstEstimate {
            mu_hat: g.mu,
            sigma2_hat: g.sigma2,
            group_size: size,
            total_size: n,
        };
        Ok(Self {
            est1: est(&g1, data.n1()),
            est2: est(&g2, data.n2()),
            data,
            window,
        })
    }

    pub fn estimates(&self) -> (RmstEstimate, RmstEstimate) {
        (self.est1, self.est2)
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    pub fn total_size(&self) -> usize {
        self.data.n()
    }

    /// Pooled `(time, status)` pairs in canonical order.
    pub fn pooled_pairs(&self) -> Vec<(f64, bool)> {
        self.data.pairs().collect()
    }

    fn sigma(&self) -> f64 {
        (self.est1.sigma2_hat + self.est2.sigma2_hat).sqrt()
    }

    fn log_ratio_parts(&self) -> Result<(f64, f64)> {
        let sigma_rat2 = crate::rmst::ratio_variance(&self.est1, &self.est2)?;
        Ok((
            self.est1.mu_hat.ln() - self.est2.mu_hat.ln(),
            sigma_rat2.sqrt(),
        ))
    }

    /// Statistics of the original labelling, as a permutation replicate would
    /// compute them.
    pub fn observed_stats(&self) -> ReplicateStats {
        let mut scratch = Scratch::new(self.data.n());
        let (g1, g2) = self
            .data
            .evaluate(self.data.original_assignment(), &mut scratch);
        replicate_stats(&g1, &g2, self.data.n() as f64)
    }

    /// Statistics for an explicit labelling of the canonical pooled order
    /// (`true` = group 1). The labelling must keep the group sizes.
    pub fn stats_for_assignment(&self, assignment: &[bool]) -> Result<ReplicateStats> {
        if assignment.len() != self.data.n()
            || assignment.iter().filter(|&&g| g).count() != self.data.n1()
        {
            return Err(Error::invalid(
                "assignment does not preserve the group sizes",
            ));
        }
        let mut scratch = Scratch::new(self.data.n());
        let (g1, g2) = self.data.evaluate(assignment, &mut scratch);
        Ok(replicate_stats(&g1, &g2, self.data.n() as f64))
    }

    /// Evaluates `n_perm` relabellings. Replicate `b` draws from
    /// `stream.child(b)`, so the result does not depend on `parallel`.
    pub fn permute(&self, n_perm: usize, stream: Stream, parallel: bool) -> PermutationRun {
        let n = self.data.n();
        let one = |scratch: &mut Scratch, b: usize| {
            let mut rng = stream.child(b as u64).rng();
            let (g1, g2) = self.data.evaluate_random(&mut rng, scratch);
            replicate_stats(&g1, &g2, n as f64)
        };
        let replicates = if parallel {
            (0..n_perm)
                .into_par_iter()
                .map_init(|| Scratch::new(n), one)
                .collect()
        } else {
            let mut scratch = Scratch::new(n);
            (0..n_perm).map(|b| one(&mut scratch, b)).collect()
        };
        PermutationRun { replicates }
    }

    /// Wald test and normal-quantile interval.
    pub fn asymptotic(&self, estimand: Estimand, alpha: f64) -> Result<InferenceResult> {
        check_alpha(alpha)?;
        let sqrt_n = (self.data.n() as f64).sqrt();
        let z = normal_quantile(1.0 - alpha / 2.0);
        let (center, scale) = self.center_and_scale(estimand)?;
        let statistic = sqrt_n * center / scale;
        let half = scale * z / sqrt_n;
        let (ci, point_estimate) = interval(estimand, center, half);
        let reject = match estimand {
            Estimand::Difference => statistic.abs() > z,
            Estimand::Ratio => !ci.contains(1.0),
        };
        Ok(InferenceResult {
            method: Method::Asymptotic,
            estimand,
            statistic,
            critical_value: z,
            p_value: normal_two_sided_p(statistic),
            reject,
            point_estimate,
            ci: Some(ci),
            diagnostics: Diagnostics::default(),
        })
    }

    /// Studentized permutation test and interval from a permutation run.
    pub fn studentized(
        &self,
        run: &PermutationRun,
        estimand: Estimand,
        alpha: f64,
    ) -> Result<InferenceResult> {
        check_alpha(alpha)?;
        let sqrt_n = (self.data.n() as f64).sqrt();
        let (center, scale) = self.center_and_scale(estimand)?;
        let statistic = sqrt_n * center.abs() / scale;
        let dist = run.distribution(Method::StudentizedPerm, estimand, alpha)?;
        let q = dist.q_pi;
        let half = scale * q / sqrt_n;
        let (ci, point_estimate) = interval(estimand, center, half);
        let reject = match estimand {
            Estimand::Difference => statistic > q,
            Estimand::Ratio => !ci.contains(1.0),
        };
        Ok(InferenceResult {
            method: Method::StudentizedPerm,
            estimand,
            statistic,
            critical_value: q,
            p_value: dist.p_value(statistic),
            reject,
            point_estimate,
            ci: Some(ci),
            diagnostics: Diagnostics {
                replicates: run.len(),
                extended_replicates: run.extended_replicates(),
            },
        })
    }

    /// Unstudentized permutation test on `|mu_1 - mu_2|`; no interval.
    pub fn unstudentized(&self, run: &PermutationRun, alpha: f64) -> Result<InferenceResult> {
        check_alpha(alpha)?;
        let diff = self.est1.mu_hat - self.est2.mu_hat;
        let statistic = diff.abs();
        let dist = run.distribution(Method::UnstudentizedPerm, Estimand::Difference, alpha)?;
        Ok(InferenceResult {
            method: Method::UnstudentizedPerm,
            estimand: Estimand::Difference,
            statistic,
            critical_value: dist.q_pi,
            p_value: dist.p_value(statistic),
            reject: statistic > dist.q_pi,
            point_estimate: diff,
            ci: None,
            diagnostics: Diagnostics {
                replicates: run.len(),
                extended_replicates: run.extended_replicates(),
            },
        })
    }

    /// Runs one method for one estimand, using `run` for permutation methods.
    pub fn result(
        &self,
        method: Method,
        estimand: Estimand,
        alpha: f64,
        run: Option<&PermutationRun>,
    ) -> Result<InferenceResult> {
        let need_run =
            || run.ok_or_else(|| Error::invalid("permutation method needs a permutation run"));
        match (method, estimand) {
            (Method::Asymptotic, e) => self.asymptotic(e, alpha),
            (Method::StudentizedPerm, e) => self.studentized(need_run()?, e, alpha),
            (Method::UnstudentizedPerm, Estimand::Difference) => {
                self.unstudentized(need_run()?, alpha)
            }
            (Method::UnstudentizedPerm, Estimand::Ratio) => Err(Error::invalid(
                "the unstudentized permutation test is defined for the difference only",
            )),
        }
    }

    /// Centre (difference or log ratio) and its standard-deviation estimate.
    fn center_and_scale(&self, estimand: Estimand) -> Result<(f64, f64)> {
        let (center, scale) = match estimand {
            Estimand::Difference => (self.est1.mu_hat - self.est2.mu_hat, self.sigma()),
            Estimand::Ratio => self.log_ratio_parts()?,
        };
        if !(scale > 0.0) {
            return Err(Error::Degenerate(format!(
                "variance estimate of the {estimand} is zero (no events with positive weight in [0, tau])"
            )));
        }
        Ok((center, scale))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Interval `center ± half` on the estimand scale, plus the point estimate.
fn interval(estimand: Estimand, center: f64, half: f64) -> (ConfidenceInterval, f64) {
    match estimand {
        Estimand::Difference => (
            ConfidenceInterval {
                lower: center - half,
                upper: center + half,
            },
            center,
        ),
        Estimand::Ratio => (
            ConfidenceInterval {
                lower: (center - half).exp(),
                upper: (center + half).exp(),
            },
            center.exp(),
        ),
    }
}

fn analysis_with_run(
    sample1: &Sample,
    sample2: &Sample,
    window: TimeWindow,
    config: &TestConfig,
) -> Result<(TwoSampleAnalysis, PermutationRun)> {
    config.validate()?;
    let analysis = TwoSampleAnalysis::new(sample1, sample2, window)?;
    let run = analysis.permute(config.n_perm, Stream::root(config.seed), true);
    Ok((analysis, run))
}

/// Asymptotic test for `config.estimand`.
pub fn asymptotic_test(
    sample1: &Sample,
    sample2: &Sample,
    window: TimeWindow,
    config: &TestConfig,
) -> Result<InferenceResult> {
    config.validate()?;
    TwoSampleAnalysis::new(sample1, sample2, window)?.asymptotic(config.estimand, config.alpha)
}

/// Studentized permutation test for `config.estimand`.
pub fn studentized_perm_test(
    sample1: &Sample,
    sample2: &Sample,
    window: TimeWindow,
    config: &TestConfig,
) -> Result<InferenceResult> {
    let (analysis, run) = analysis_with_run(sample1, sample2, window, config)?;
    analysis.studentized(&run, config.estimand, config.alpha)
}

/// Unstudentized permutation test of equal RMSTs.
pub fn unstudentized_perm_test(
    sample1: &Sample,
    sample2: &Sample,
    window: TimeWindow,
    config: &TestConfig,
) -> Result<InferenceResult> {
    if config.estimand != Estimand::Difference {
        return Err(Error::invalid(
            "the unstudentized permutation test is defined for the difference only",
        ));
    }
    let (analysis, run) = analysis_with_run(sample1, sample2, window, config)?;
    analysis.unstudentized(&run, config.alpha)
}
