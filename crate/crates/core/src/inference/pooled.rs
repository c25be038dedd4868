//! Pooled two-sample data laid out for fast repeated relabelling.
//!
//! Observations are sorted by `(time, event)` once. A label assignment is a
//! boolean mask over that order (`true` = group 1), and one pass over the
//! distinct times yields both groups' RMST and variance estimate. The sort
//! is canonical: it does not depend on which sample was passed first.

use crate::error::{Error, Result};
use crate::rmst::TimeWindow;
use crate::surv::Sample;

#[derive(Debug, Clone)]
pub(crate) struct PooledData {
    /// Distinct observed times `<= tau`, ascending.
    times: Vec<f64>,
    /// `runs[k]..runs[k+1]` indexes the observations at `times[k]`.
    runs: Vec<usize>,
    events: Vec<bool>,
    observed_times: Vec<f64>,
    original: Vec<bool>,
    n1: usize,
    n2: usize,
    tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GroupStats {
    pub mu: f64,
    pub sigma2: f64,
    /// The curve stopped before `tau` and was carried forward.
    pub extended: bool,
    /// Where the unextended curve stops (infinity when estimable throughout).
    pub estimable_to: f64,
}

#[derive(Debug, Default)]
pub(crate) struct Scratch {
    marks: [Vec<(f64, f64)>; 2],
    order: Vec<usize>,
    mask: Vec<bool>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Self {
            marks: [Vec::with_capacity(n), Vec::with_capacity(n)],
            order: Vec::with_capacity(n),
            mask: vec![false; n],
        }
    }
}

struct Running {
    at_risk: usize,
    survival: f64,
    area: f64,
    last_time: f64,
    last_had_event: bool,
}

impl PooledData {
    pub fn new(sample1: &Sample, sample2: &Sample, window: TimeWindow) -> Result<Self> {
        if sample1.len() < 2 || sample2.len() < 2 {
            return Err(Error::invalid(format!(
                "each group needs at least 2 observations (got {} and {})",
                sample1.len(),
                sample2.len()
            )));
        }
        let tau = window.tau();
        let mut rows: Vec<(f64, bool, bool)> = sample1
            .observations()
            .iter()
            .map(|o| (o.time, o.event, true))
            .chain(
                sample2
                    .observations()
                    .iter()
                    .map(|o| (o.time, o.event, false)),
            )
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut times = Vec::new();
        let mut runs = vec![0];
        let mut i = 0;
        while i < rows.len() && rows[i].0 <= tau {
            let t = rows[i].0;
            while i < rows.len() && rows[i].0 == t {
                i += 1;
            }
            times.push(t);
            runs.push(i);
        }
        Ok(Self {
            times,
            runs,
            events: rows.iter().map(|r| r.1).collect(),
            observed_times: rows.iter().map(|r| r.0).collect(),
            original: rows.iter().map(|r| r.2).collect(),
            n1: sample1.len(),
            n2: sample2.len(),
            tau,
        })
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn original_assignment(&self) -> &[bool] {
        &self.original
    }

    /// The pooled `(time, event)` pairs in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.observed_times
            .iter()
            .copied()
            .zip(self.events.iter().copied())
    }

    /// RMST and variance estimates of both groups under `assignment`.
    /// Curves that stop early are extended horizontally and flagged.
    pub fn evaluate(&self, assignment: &[bool], scratch: &mut Scratch) -> (GroupStats, GroupStats) {
        debug_assert_eq!(assignment.len(), self.n());
        debug_assert_eq!(assignment.iter().filter(|&&g| g).count(), self.n1);

        let [marks1, marks2] = &mut scratch.marks;
        marks1.clear();
        marks2.clear();
        let mut groups = [
            Running {
                at_risk: self.n1,
                survival: 1.0,
                area: 0.0,
                last_time: f64::NAN,
                last_had_event: false,
            },
            Running {
                at_risk: self.n2,
                survival: 1.0,
                area: 0.0,
                last_time: f64::NAN,
                last_had_event: false,
            },
        ];
        let mut prev = 0.0;
        for (k, &t) in self.times.iter().enumerate() {
            let span = t - prev;
            prev = t;
            let (mut m1, mut d1, mut m2, mut d2) = (0usize, 0usize, 0usize, 0usize);
            let run = self.runs[k]..self.runs[k + 1];
            for (&event, &in_first) in self.events[run.clone()].iter().zip(&assignment[run]) {
                let e = usize::from(event);
                if in_first {
                    m1 += 1;
                    d1 += e;
                } else {
                    m2 += 1;
                    d2 += e;
                }
            }
            for (g, (m, d), marks) in [
                (0usize, (m1, d1), &mut *marks1),
                (1, (m2, d2), &mut *marks2),
            ] {
                let run = &mut groups[g];
                run.area += run.survival * span;
                if m == 0 {
                    continue;
                }
                if d > 0 {
                    let y = run.at_risk;
                    if y > d {
                        let yf = y as f64;
                        marks.push((run.area, d as f64 / (yf * (yf - d as f64))));
                    }
                    run.survival *= 1.0 - d as f64 / y as f64;
                }
                run.at_risk -= m;
                run.last_time = t;
                run.last_had_event = d > 0;
            }
        }
        let n = self.n() as f64;
        let finish = |run: &mut Running, marks: &[(f64, f64)]| {
            run.area += run.survival * (self.tau - prev);
            let mu = run.area;
            let sum: f64 = marks
                .iter()
                .map(|&(area, coef)| {
                    let w = mu - area;
                    w * w * coef
                })
                .sum();
            // nobody left beyond tau: the curve stops at the last observation
            let estimable_to = if run.at_risk > 0 || run.last_had_event {
                f64::INFINITY
            } else {
                run.last_time
            };
            GroupStats {
                mu,
                sigma2: n * sum,
                extended: estimable_to < self.tau,
                estimable_to,
            }
        };
        let [ref mut g1, ref mut g2] = groups;
        (finish(g1, marks1), finish(g2, marks2))
    }

    /// Draws a uniformly random relabelling with the original group sizes.
    ///
    /// A subset of the size of the smaller group is drawn by a partial
    /// Fisher–Yates shuffle and given that group's label, so swapping the
    /// input samples yields the same unordered partitions.
    pub fn draw_assignment<R: rand::Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Scratch) {
        let n = self.n();
        let (m, smaller_is_first) = if self.n1 <= self.n2 {
            (self.n1, true)
        } else {
            (self.n2, false)
        };
        draw_subset(n, m, rng, &mut scratch.order);
        scratch.mask.clear();
        scratch.mask.resize(n, !smaller_is_first);
        for &i in &scratch.order[..m] {
            scratch.mask[i] = smaller_is_first;
        }
    }

    /// Draws a relabelling and evaluates it.
    pub fn evaluate_random<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        scratch: &mut Scratch,
    ) -> (GroupStats, GroupStats) {
        self.draw_assignment(rng, scratch);
        let mask = std::mem::take(&mut scratch.mask);
        let out = self.evaluate(&mask, scratch);
        scratch.mask = mask;
        out
    }
}

/// Leaves a uniformly random `m`-subset of `0..n` in `order[..m]`.
pub(crate) fn draw_subset<R: rand::Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
    order: &mut Vec<usize>,
) {
    order.clear();
    order.extend(0..n);
    for i in 0..m {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
}
