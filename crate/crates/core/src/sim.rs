//! Monte Carlo harness for rejection rates and interval coverage.
//!
//! Each grid cell gets its own random stream, derived from the root seed and
//! the cell's label; replication `r` of a cell uses child `r` of that stream,
//! with the dataset drawn from its child 0 and the permutations from child 1.
//! Results are therefore identical for any number of worker threads.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Estimand, Method, TwoSampleAnalysis};
use crate::rng::Stream;
use crate::scenarios::{CalibratedScenario, CensoringScenario, ScenarioSpec, SurvivalScenario};
use crate::serde_ext;

/// Two-sided 95% binomial band `p ± 1.96 sqrt(p(1-p)/n_sim)`, in percent.
pub fn binomial_band(nominal: f64, n_sim: usize) -> (f64, f64) {
    let half = 1.96 * (nominal * (1.0 - nominal) / n_sim as f64).sqrt();
    (100.0 * (nominal - half), 100.0 * (nominal + half))
}

/// The balanced and the two unbalanced base designs.
pub const BASE_SAMPLE_SIZES: [[usize; 2]; 3] = [[20, 20], [16, 24], [24, 16]];

fn default_seed() -> u64 {
    1
}
fn default_n_sim() -> usize {
    5000
}
fn default_n_perm() -> usize {
    2000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_tau() -> f64 {
    10.0
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_estimands() -> Vec<Estimand> {
    vec![Estimand::Difference]
}
fn default_sizes() -> Vec<[usize; 2]> {
    BASE_SAMPLE_SIZES.to_vec()
}
fn default_k() -> Vec<usize> {
    vec![1]
}
fn default_delta() -> Vec<f64> {
    vec![0.0]
}
fn default_true() -> bool {
    true
}

/// A block of the grid: the Cartesian product of its lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub survival: Vec<SurvivalScenario>,
    pub censoring: Vec<CensoringScenario>,
    #[serde(default = "default_sizes")]
    pub sample_sizes: Vec<[usize; 2]>,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_delta")]
    pub delta: Vec<f64>,
    /// S1 and S2 coincide at `delta = 0`; keep only S1 there.
    #[serde(default = "default_true")]
    pub skip_s2_under_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_sim")]
    pub n_sim: usize,
    #[serde(default = "default_n_perm")]
    pub n_perm: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_estimands")]
    pub estimands: Vec<Estimand>,
    /// Thread budget; `None` uses every available core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub grid: Vec<GridBlock>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            n_sim: default_n_sim(),
            n_perm: default_n_perm(),
            alpha: default_alpha(),
            tau: default_tau(),
            methods: default_methods(),
            estimands: default_estimands(),
            workers: None,
            grid: Vec::new(),
        }
    }
}

/// One grid cell: a scenario setting and its size multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub spec: ScenarioSpec,
    pub k: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sim == 0 {
            return Err(Error::config("n_sim", "must be at least 1"));
        }
        if self.n_perm == 0 {
            return Err(Error::config("n_perm", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(
                "tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        for (i, block) in self.grid.iter().enumerate() {
            let at = |field: &str, j: usize| format!("grid[{i}].{field}[{j}]");
            for (j, size) in block.sample_sizes.iter().enumerate() {
                if size[0] < 2 || size[1] < 2 {
                    return Err(Error::config(
                        at("sample_sizes", j),
                        "group sizes must be at least 2",
                    ));
                }
            }
            for (j, &k) in block.k.iter().enumerate() {
                if k == 0 {
                    return Err(Error::config(at("k", j), "must be at least 1"));
                }
            }
            for (j, &d) in block.delta.iter().enumerate() {
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(Error::config(
                        at("delta", j),
                        format!("must be finite and >= 0, got {d}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The grid cells in a fixed order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        for block in &self.grid {
            for &survival in &block.survival {
                for &censoring in &block.censoring {
                    for &delta in &block.delta {
                        if block.skip_s2_under_null
                            && survival == SurvivalScenario::S2
                            && delta == 0.0
                        {
                            continue;
                        }
                        for &k in &block.k {
                            for size in &block.sample_sizes {
                                let spec = ScenarioSpec::new(
                                    survival,
                                    censoring,
                                    delta,
                                    k * size[0],
                                    k * size[1],
                                    self.tau,
                                )?;
                                cells.push(Cell { spec, k });
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    fn slots(&self) -> Vec<(Method, Estimand)> {
        let mut slots = Vec::new();
        for &m in &self.methods {
            for &e in &self.estimands {
                if m.supports(e) && !slots.contains(&(m, e)) {
                    slots.push((m, e));
                }
            }
        }
        slots
    }
}

/// Operating characteristics of one method/estimand in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub estimand: Estimand,
    /// Replications that produced a decision.
    pub valid: usize,
    /// Replications with a zero variance estimate.
    pub degenerate: usize,
    #[serde(with = "serde_ext::f64_ext")]
    pub rejection_rate: f64,
    #[serde(with = "serde_ext::f64_ext")]
    pub mc_se: f64,
    #[serde(default, with = "serde_ext::opt_f64_ext")]
    pub coverage: Option<f64>,
    #[serde(default, with = "serde_ext::opt_f64_ext")]
    pub mean_width: Option<f64>,
    /// Under the null: whether the rate lies in the binomial band around alpha.
    pub within_band: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub solved_param: Option<f64>,
    pub true_difference: Option<f64>,
    pub true_ratio: Option<f64>,
    pub replications: usize,
    pub regenerations: usize,
    /// Mean censoring proportion of each group.
    pub censoring_rates: Option<[f64; 2]>,
    pub methods: Vec<MethodSummary>,
    pub error: Option<String>,
    /// Wall-clock seconds; not serialized so output files stay reproducible.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl CellResult {
    pub fn summary(&self, method: Method, estimand: Estimand) -> Option<&MethodSummary> {
        self.methods
            .iter()
            .find(|s| s.method == method && s.estimand == estimand)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub version: String,
    pub config: SimConfig,
    /// Binomial band around alpha, in percent.
    pub band: (f64, f64),
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    reject: bool,
    covered: Option<bool>,
    width: Option<f64>,
}

struct Replication {
    regenerations: usize,
    censoring: [f64; 2],
    outcomes: Vec<Option<Outcome>>,
}

fn replicate(
    cal: &CalibratedScenario,
    config: &SimConfig,
    slots: &[(Method, Estimand)],
    stream: Stream,
) -> Result<Replication> {
    let data = cal.generate_dataset(&mut stream.child(0).rng())?;
    let analysis = TwoSampleAnalysis::new(&data.sample1, &data.sample2, cal.spec.window())?;
    let run = slots
        .iter()
        .any(|(m, _)| m.is_permutation())
        .then(|| analysis.permute(config.n_perm, stream.child(1), false));
    let mut outcomes = Vec::with_capacity(slots.len());
    for &(method, estimand) in slots {
        match analysis.result(method, estimand, config.alpha, run.as_ref()) {
            Ok(r) => {
                let truth = match estimand {
                    Estimand::Difference => cal.true_difference(),
                    Estimand::Ratio => cal.true_ratio(),
                };
                outcomes.push(Some(Outcome {
                    reject: r.reject,
                    covered: r.ci.map(|ci| ci.contains(truth)),
                    width: r.ci.map(|ci| ci.width()),
                }));
            }
            Err(Error::Degenerate(_)) => outcomes.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Replication {
        regenerations: data.regenerations,
        censoring: [data.sample1.censoring_rate(), data.sample2.censoring_rate()],
        outcomes,
    })
}

/// Runs every replication of one cell. Errors abort the cell only.
pub fn run_cell(cell: Cell, config: &SimConfig) -> CellResult {
    let start = Instant::now();
    let mut result = CellResult {
        cell,
        solved_param: None,
        true_difference: None,
        true_ratio: None,
        replications: config.n_sim,
        regenerations: 0,
        censoring_rates: None,
        methods: Vec::new(),
        error: None,
        elapsed_secs: 0.0,
    };
    let cal = match cell.spec.calibrate() {
        Ok(c) => c,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    result.solved_param = Some(cal.solved_param);
    result.true_difference = Some(cal.true_difference());
    result.true_ratio = Some(cal.true_ratio());

    let slots = config.slots();
    let cell_stream = Stream::root(config.seed).child_labeled(&cell.spec.label());
    let reps: Result<Vec<Replication>> = (0..config.n_sim)
        .into_par_iter()
        .map(|r| replicate(&cal, config, &slots, cell_stream.child(r as u64)))
        .collect();
    let reps = match reps {
        Ok(r) => r,
        Err(e) => {
            result.error = Some(e.to_string());
            result.elapsed_secs = start.elapsed().as_secs_f64();
            return result;
        }
    };

    let n = reps.len() as f64;
    result.regenerations = reps.iter().map(|r| r.regenerations).sum();
    result.censoring_rates = Some([
        reps.iter().map(|r| r.censoring[0]).sum::<f64>() / n,
        reps.iter().map(|r| r.censoring[1]).sum::<f64>() / n,
    ]);
    let band = binomial_band(config.alpha, config.n_sim);
    for (i, &(method, estimand)) in slots.iter().enumerate() {
        let outcomes: Vec<Outcome> = reps.iter().filter_map(|r| r.outcomes[i]).collect();
        let valid = outcomes.len();
        let rate = outcomes.iter().filter(|o| o.reject).count() as f64 / valid as f64;
        let coverage = method_has_interval(method).then(|| {
            outcomes.iter().filter(|o| o.covered == Some(true)).count() as f64 / valid as f64
        });
        let mean_width = method_has_interval(method)
            .then(|| outcomes.iter().filter_map(|o| o.width).sum::<f64>() / valid as f64);
        let within_band = (cell.spec.delta == 0.0).then(|| {
            let pct = 100.0 * rate;
            pct >= band.0 && pct <= band.1
        });
        result.methods.push(MethodSummary {
            method,
            estimand,
            valid,
            degenerate: reps.len() - valid,
            rejection_rate: rate,
            mc_se: (rate * (1.0 - rate) / valid as f64).sqrt(),
            coverage,
            mean_width,
            within_band,
        });
    }
    result.elapsed_secs = start.elapsed().as_secs_f64();
    result
}

fn method_has_interval(method: Method) -> bool {
    method != Method::UnstudentizedPerm
}

/// Runs the whole grid. Fails only on an invalid configuration.
pub fn run_study(config: &SimConfig) -> Result<SimResult> {
    run_study_with(config, |_| {})
}

/// As [`run_study`], calling `progress` after each finished cell.
pub fn run_study_with(
    config: &SimConfig,
    mut progress: impl FnMut(&CellResult),
) -> Result<SimResult> {
    config.validate()?;
    let cells = config.cells()?;
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let r = run_cell(cell, config);
        progress(&r);
        results.push(r);
    }
    Ok(SimResult {
        version: crate::VERSION.to_string(),
        config: config.clone(),
        band: binomial_band(config.alpha, config.n_sim),
        cells: results,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl SimResult {
    /// One row per cell and method/estimand; failed cells get one row
    /// carrying the error.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "survival\tcensoring\tn1\tn2\tk\tdelta\ttau\tsolved_param\tmethod\testimand\treplications\tvalid\t\
             degenerate\trejection_rate\tmc_se\tcoverage\tmean_width\tregenerations\tcens_rate_1\tcens_rate_2\t\
             within_band\terror\n",
        );
        for c in &self.cells {
            let s = &c.cell.spec;
            let head = format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.survival,
                s.censoring,
                s.n1,
                s.n2,
                c.cell.k,
                s.delta,
                s.tau,
                opt(c.solved_param)
            );
            let (cr1, cr2) = match c.censoring_rates {
                Some([a, b]) => (a.to_string(), b.to_string()),
                None => ("NA".into(), "NA".into()),
            };
            let error = c.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ");
            if c.methods.is_empty() {
                let _ = writeln!(
                    out,
                    "{head}\tNA\tNA\t{}\t0\t0\tNA\tNA\tNA\tNA\t{}\t{cr1}\t{cr2}\tNA\t{error}",
                    c.replications, c.regenerations
                );
            }
            for m in &c.methods {
                let _ = writeln!(
                    out,
                    "{head}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{cr1}\t{cr2}\t{}\t{error}",
                    m.method,
                    m.estimand,
                    c.replications,
                    m.valid,
                    m.degenerate,
                    m.rejection_rate,
                    m.mc_se,
                    opt(m.coverage),
                    opt(m.mean_width),
                    c.regenerations,
                    m.within_band.map_or("NA", |b| if b { "yes" } else { "no" }),
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable result")
    }

    /// Human-readable table of rejection rates in percent; `*` marks rates
    /// inside the binomial band.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "binomial band at alpha = {}: [{:.2}%, {:.2}%]  (* = inside band, delta = 0 only)",
            self.config.alpha, self.band.0, self.band.1
        );
        let _ = writeln!(
            out,
            "     {:<12} {:<12} {:>2} {:<10} {:>5}  rejection % [coverage %]",
            "censoring", "cens. rates", "K", "n", "delta"
        );
        for c in &self.cells {
            let s = &c.cell.spec;
            let rates = c.censoring_rates.map_or("NA".to_string(), |[a, b]| {
                format!("({:.0}%, {:.0}%)", 100.0 * a, 100.0 * b)
            });
            let mut line = format!(
                "{:<4} {:<12} {:<12} {:>2} {:<10} {:>5}  ",
                s.survival.to_string(),
                s.censoring.description(),
                rates,
                c.cell.k,
                format!("({},{})", s.n1, s.n2),
                s.delta
            );
            if let Some(e) = &c.error {
                line.push_str(&format!("error: {e}"));
            }
            for m in &c.methods {
                let flag = if m.within_band == Some(true) { "*" } else { "" };
                let cov = m
                    .coverage
                    .map_or(String::new(), |v| format!(" [{:.1}]", 100.0 * v));
                line.push_str(&format!(
                    "{} {}: {:.1}{flag}{cov}   ",
                    short(m.method),
                    m.estimand,
                    100.0 * m.rejection_rate
                ));
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }
}

fn short(method: Method) -> &'static str {
    match method {
        Method::Asymptotic => "Asym",
        Method::StudentizedPerm => "stP",
        Method::UnstudentizedPerm => "unP",
    }
}
