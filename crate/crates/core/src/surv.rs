//! Right-censored samples, counting processes and the product-limit /
//! cumulative-hazard estimators.
//!
//! Ties between events and censorings at the same time are resolved with
//! events first: censored subjects at time `t` are still at risk for the
//! events at `t`. Under that convention the left limits of the survival and
//! censoring estimators satisfy `S(t-) G(t-) = Y(t) / n` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;

/// One subject: observed time `min(T, C)`, whether the event was seen, and
/// the group it belongs to (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub group: u8,
}

impl Observation {
    pub fn new(time: f64, event: bool, group: u8) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::invalid(format!(
                "observation time must be finite and non-negative, got {time}"
            )));
        }
        if group != 1 && group != 2 {
            return Err(Error::invalid(format!("group must be 1 or 2, got {group}")));
        }
        Ok(Self { time, event, group })
    }

    pub fn status(&self) -> u8 {
        u8::from(self.event)
    }
}

/// Per-distinct-time summary of a sample: the raw material of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    pub times: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub censored: Vec<usize>,
}

impl RiskTable {
    fn build(observations: &[Observation]) -> Self {
        let mut sorted: Vec<(f64, bool)> = observations.iter().map(|o| (o.time, o.event)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let n = sorted.len();
        let mut table = RiskTable {
            times: Vec::new(),
            at_risk: Vec::new(),
            events: Vec::new(),
            censored: Vec::new(),
        };
        let mut i = 0;
        while i < n {
            let t = sorted[i].0;
            let (mut d, mut c) = (0, 0);
            let start = i;
            while i < n && sorted[i].0 == t {
                if sorted[i].1 {
                    d += 1;
                } else {
                    c += 1;
                }
                i += 1;
            }
            table.times.push(t);
            table.at_risk.push(n - start);
            table.events.push(d);
            table.censored.push(c);
        }
        table
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Observations of a single group.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    group: u8,
    observations: Vec<Observation>,
    table: RiskTable,
}

impl Sample {
    pub fn from_observations(observations: Vec<Observation>) -> Result<Self> {
        let Some(first) = observations.first() else {
            return Err(Error::invalid("sample is empty"));
        };
        let group = first.group;
        for o in &observations {
            Observation::new(o.time, o.event, o.group)?;
            if o.group != group {
                return Err(Error::invalid(format!(
                    "sample mixes groups {group} and {}",
                    o.group
                )));
            }
        }
        let table = RiskTable::build(&observations);
        Ok(Self {
            group,
            observations,
            table,
        })
    }

    /// Builds a sample from parallel time / status slices (status 1 = event).
    pub fn new(group: u8, times: &[f64], statuses: &[u8]) -> Result<Self> {
        if times.len() != statuses.len() {
            return Err(Error::invalid(format!(
                "{} times but {} statuses",
                times.len(),
                statuses.len()
            )));
        }
        let observations = times
            .iter()
            .zip(statuses)
            .map(|(&t, &s)| match s {
                0 | 1 => Observation::new(t, s == 1, group),
                _ => Err(Error::invalid(format!("status must be 0 or 1, got {s}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_observations(observations)
    }

    pub fn group(&self) -> u8 {
        self.group
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn risk_table(&self) -> &RiskTable {
        &self.table
    }

    pub fn event_count(&self) -> usize {
        self.table.events.iter().sum()
    }

    pub fn censoring_rate(&self) -> f64 {
        1.0 - self.event_count() as f64 / self.len() as f64
    }

    /// Copy with every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let obs = self
            .observations
            .iter()
            .map(|o| Observation::new(o.time * factor, o.event, o.group))
            .collect::<Result<Vec<_>>>()?;
        Self::from_observations(obs)
    }

    /// Copy relabelled to `group`.
    pub fn relabeled(&self, group: u8) -> Result<Self> {
        let obs = self
            .observations
            .iter()
            .map(|o| Observation::new(o.time, o.event, group))
            .collect::<Result<Vec<_>>>()?;
        Self::from_observations(obs)
    }
}

/// The at-risk process `Y(t) = #{X >= t}`, a left-continuous step function.
///
/// Stored as its right-continuous counterpart `#{X > t}`; `at(t)` is the
/// left limit of that, which is `Y(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtRiskProcess {
    beyond: StepFunction,
}

impl AtRiskProcess {
    /// `Y(t)`: number of subjects with observed time `>= t`.
    pub fn at(&self, t: f64) -> f64 {
        self.beyond.left_limit(t)
    }

    /// Number of subjects with observed time `> t`.
    pub fn beyond(&self, t: f64) -> f64 {
        self.beyond.eval(t)
    }

    pub fn as_step(&self) -> &StepFunction {
        &self.beyond
    }
}

/// `N(t)`, the observed-event counting process, and `Y(t)`, the at-risk process.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingProcesses {
    pub events: StepFunction,
    pub at_risk: AtRiskProcess,
}

pub fn counting_processes(sample: &Sample) -> CountingProcesses {
    let table = sample.risk_table();
    let n = sample.len();

    let mut event_times = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0usize;
    for k in 0..table.len() {
        if table.events[k] > 0 {
            total += table.events[k];
            event_times.push(table.times[k]);
            cumulative.push(total as f64);
        }
    }
    let events = StepFunction::from_parts(0.0, event_times, cumulative, f64::INFINITY);

    let beyond_values = (0..table.len())
        .map(|k| (table.at_risk[k] - table.events[k] - table.censored[k]) as f64)
        .collect();
    let beyond =
        StepFunction::from_parts(n as f64, table.times.clone(), beyond_values, f64::INFINITY);

    CountingProcesses {
        events,
        at_risk: AtRiskProcess { beyond },
    }
}

/// Largest time up to which the product-limit estimate is determined by the
/// data: infinity when the largest observation is an event, otherwise the
/// (censored) largest observation time.
pub fn estimable_to(table: &RiskTable) -> f64 {
    match table.events.last() {
        Some(&0) => *table.times.last().expect("non-empty table"),
        _ => f64::INFINITY,
    }
}

/// Kaplan–Meier estimate of the event-time survival function.
pub fn kaplan_meier(sample: &Sample) -> StepFunction {
    let table = sample.risk_table();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut s = 1.0;
    for k in 0..table.len() {
        let d = table.events[k];
        if d > 0 {
            let y = table.at_risk[k];
            s *= 1.0 - d as f64 / y as f64;
            times.push(table.times[k]);
            values.push(s);
        }
    }
    StepFunction::from_parts(1.0, times, values, estimable_to(table))
}

/// Nelson–Aalen estimate of the cumulative hazard.
pub fn nelson_aalen(sample: &Sample) -> StepFunction {
    let table = sample.risk_table();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut a = 0.0;
    for k in 0..table.len() {
        let d = table.events[k];
        if d > 0 {
            a += d as f64 / table.at_risk[k] as f64;
            times.push(table.times[k]);
            values.push(a);
        }
    }
    StepFunction::from_parts(0.0, times, values, estimable_to(table))
}

/// Product-limit estimate of the censoring survival function, with events
/// removed from the risk set before censorings at tied times.
pub fn censoring_km(sample: &Sample) -> StepFunction {
    let table = sample.risk_table();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut g = 1.0;
    for k in 0..table.len() {
        let c = table.censored[k];
        if c > 0 {
            let remaining = table.at_risk[k] - table.events[k];
            g *= 1.0 - c as f64 / remaining as f64;
            times.push(table.times[k]);
            values.push(g);
        }
    }
    StepFunction::from_parts(1.0, times, values, f64::INFINITY)
}

/// Whether a sample's Kaplan–Meier curve covers a window `[0, tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimabilityReport {
    pub estimable_to: f64,
    pub fully_estimable_on_window: bool,
}

pub fn estimability(sample: &Sample, tau: f64) -> Result<EstimabilityReport> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let estimable_to = estimable_to(sample.risk_table());
    Ok(EstimabilityReport {
        estimable_to,
        fully_estimable_on_window: estimable_to >= tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(times: &[f64], statuses: &[u8]) -> Sample {
        Sample::new(1, times, statuses).unwrap()
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(matches!(
            Sample::new(1, &[], &[]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn invalid_observations_are_rejected() {
        assert!(Sample::new(1, &[-1.0], &[1]).is_err());
        assert!(Sample::new(1, &[1.0], &[2]).is_err());
        assert!(Sample::new(1, &[f64::NAN], &[1]).is_err());
        assert!(Observation::new(1.0, true, 3).is_err());
        let mixed = vec![
            Observation::new(1.0, true, 1).unwrap(),
            Observation::new(2.0, true, 2).unwrap(),
        ];
        assert!(Sample::from_observations(mixed).is_err());
    }

    #[test]
    fn counting_processes_two_subjects() {
        let cp = counting_processes(&sample(&[2.0, 5.0], &[1, 0]));
        assert_eq!(cp.events.eval(1.9), 0.0);
        assert_eq!(cp.events.eval(2.0), 1.0);
        assert_eq!(cp.events.eval(100.0), 1.0);
        assert_eq!(cp.at_risk.at(0.0), 2.0);
        assert_eq!(cp.at_risk.at(2.0), 2.0);
        assert_eq!(cp.at_risk.at(2.5), 1.0);
        assert_eq!(cp.at_risk.at(5.0), 1.0);
        assert_eq!(cp.at_risk.at(5.1), 0.0);
    }

    #[test]
    fn counting_processes_without_events() {
        let cp = counting_processes(&sample(&[1.0, 4.0, 6.0], &[0, 0, 0]));
        assert!(cp.events.jump_times().is_empty());
        assert_eq!(cp.events.eval(10.0), 0.0);
    }

    #[test]
    fn counting_processes_with_ties() {
        let cp = counting_processes(&sample(&[3.0, 3.0, 3.0], &[1, 1, 0]));
        assert_eq!(cp.events.jump_at(3.0), 2.0);
        assert_eq!(cp.at_risk.at(3.0), 3.0);
        assert_eq!(cp.at_risk.beyond(3.0), 0.0);
    }

    #[test]
    fn km_examples() {
        let km = kaplan_meier(&sample(&[5.0], &[1]));
        assert_eq!(km.eval(4.99), 1.0);
        assert_eq!(km.eval(5.0), 0.0);

        let km = kaplan_meier(&sample(&[1.0, 2.0, 3.0], &[0, 0, 0]));
        assert!(km.jump_times().is_empty());
        assert_eq!(km.eval(10.0), 1.0);

        let km = kaplan_meier(&sample(&[1.0, 2.0, 3.0], &[1, 0, 1]));
        assert_eq!(km.eval(0.5), 1.0);
        assert!((km.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.eval(2.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(3.0), 0.0);
    }

    #[test]
    fn nelson_aalen_examples() {
        let na = nelson_aalen(&sample(&[1.0, 2.0, 3.0], &[1, 0, 1]));
        assert_eq!(na.jump_times(), &[1.0, 3.0]);
        assert!((na.jump_at(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((na.jump_at(3.0) - 1.0).abs() < 1e-15);

        let na = nelson_aalen(&sample(&[1.0, 2.0], &[0, 0]));
        assert_eq!(na.eval(5.0), 0.0);

        let na = nelson_aalen(&sample(&[4.0, 4.0], &[1, 1]));
        assert_eq!(na.jump_times(), &[4.0]);
        assert_eq!(na.eval(4.0), 1.0);
    }

    #[test]
    fn censoring_km_examples() {
        let g = censoring_km(&sample(&[1.0, 2.0, 3.0], &[1, 1, 1]));
        assert_eq!(g.eval(10.0), 1.0);

        let s = sample(&[1.0, 2.0, 3.0], &[1, 0, 1]);
        let g = censoring_km(&s);
        assert_eq!(g.eval(1.99), 1.0);
        assert_eq!(g.eval(2.0), 0.5);
        assert_eq!(g.eval(50.0), 0.5);

        let km = kaplan_meier(&s);
        let cp = counting_processes(&s);
        for &t in &[1.0, 2.0, 3.0] {
            let lhs = km.left_limit(t) * g.left_limit(t);
            assert!((lhs - cp.at_risk.at(t) / 3.0).abs() < 1e-15, "t = {t}");
        }
    }

    #[test]
    fn censoring_at_final_tied_time_is_well_defined() {
        let s = sample(&[2.0, 2.0, 2.0], &[1, 0, 0]);
        let g = censoring_km(&s);
        assert_eq!(g.eval(2.0), 0.0);
        assert!(g.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn estimability_examples() {
        let r = estimability(&sample(&[1.0, 8.0], &[1, 0]), 10.0).unwrap();
        assert!(!r.fully_estimable_on_window);
        assert_eq!(r.estimable_to, 8.0);
        assert!(
            estimability(&sample(&[1.0, 8.0], &[1, 1]), 10.0)
                .unwrap()
                .fully_estimable_on_window
        );
        assert!(
            estimability(&sample(&[1.0, 12.0], &[1, 0]), 10.0)
                .unwrap()
                .fully_estimable_on_window
        );
        // tied maximum with one event
        assert!(
            estimability(&sample(&[1.0, 8.0, 8.0], &[1, 0, 1]), 10.0)
                .unwrap()
                .fully_estimable_on_window
        );
        // censored exactly at tau
        assert!(
            estimability(&sample(&[1.0, 10.0], &[1, 0]), 10.0)
                .unwrap()
                .fully_estimable_on_window
        );
        assert!(estimability(&sample(&[1.0], &[1]), 0.0).is_err());
    }
}
