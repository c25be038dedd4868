//! CSV datasets, Kaplan–Meier tables, simulation configs and test reports.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Estimand, InferenceResult, Method, TwoSampleAnalysis};
use crate::rmst::TimeWindow;
use crate::rng::Stream;
use crate::serde_ext;
use crate::sim::SimConfig;
use crate::surv::{
    censoring_km, counting_processes, estimable_to, kaplan_meier, Observation, Sample,
};

/// A two-group dataset read from `time,status,group` CSV.
///
/// Group labels are mapped to groups 1 and 2 in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub labels: [String; 2],
    pub sample1: Sample,
    pub sample2: Sample,
}

fn parse_err(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn round_to(t: f64, decimals: u32) -> f64 {
    let f = 10f64.powi(decimals as i32);
    (t * f).round() / f
}

impl DatasetFile {
    /// Parses CSV with header `time,status,group`, optionally rounding times.
    pub fn parse<R: Read>(reader: R, decimals: Option<u32>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("cannot read header: {e}")))?
            .clone();
        let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
        if names.iter().all(|h| h.is_empty()) {
            return Err(Error::Parse("file is empty".into()));
        }
        if names != ["time", "status", "group"] {
            return Err(Error::Parse(format!(
                "header must be `time,status,group`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut labels: Vec<String> = Vec::new();
        let mut rows: [Vec<Observation>; 2] = [Vec::new(), Vec::new()];
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 3 || record.iter().any(str::is_empty) {
                return Err(parse_err(
                    line,
                    format!("expected 3 non-empty fields, found {}", record.len()),
                ));
            }
            let time: f64 = record[0]
                .parse()
                .map_err(|_| parse_err(line, format!("time `{}` is not a number", &record[0])))?;
            if !time.is_finite() || time < 0.0 {
                return Err(parse_err(
                    line,
                    format!("time must be finite and non-negative, got {}", &record[0]),
                ));
            }
            let time = decimals.map_or(time, |d| round_to(time, d));
            let event = match &record[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(parse_err(
                        line,
                        format!("status must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            let label = record[2].to_string();
            let index = match labels.iter().position(|l| *l == label) {
                Some(i) => i,
                None if labels.len() < 2 => {
                    labels.push(label);
                    labels.len() - 1
                }
                None => {
                    return Err(parse_err(
                        line,
                        format!(
                            "third group label `{label}` (already have `{}` and `{}`)",
                            labels[0], labels[1]
                        ),
                    ))
                }
            };
            rows[index].push(
                Observation::new(time, event, index as u8 + 1).map_err(|e| parse_err(line, e))?,
            );
        }
        if labels.len() != 2 {
            return Err(Error::Parse(format!(
                "expected exactly 2 groups, found {}{}",
                labels.len(),
                labels
                    .first()
                    .map_or(String::new(), |l| format!(" (`{l}`)"))
            )));
        }
        let [r1, r2] = rows;
        Ok(Self {
            labels: [labels[0].clone(), labels[1].clone()],
            sample1: Sample::from_observations(r1)?,
            sample2: Sample::from_observations(r2)?,
        })
    }

    pub fn read(path: &Path, decimals: Option<u32>) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))?;
        Self::parse(file, decimals)
    }

    pub fn from_samples(labels: [String; 2], sample1: Sample, sample2: Sample) -> Result<Self> {
        if sample1.group() != 1 || sample2.group() != 2 {
            return Err(Error::invalid("samples must be groups 1 and 2"));
        }
        if labels[0] == labels[1] {
            return Err(Error::invalid("group labels must differ"));
        }
        Ok(Self {
            labels,
            sample1,
            sample2,
        })
    }

    pub fn samples(&self) -> [&Sample; 2] {
        [&self.sample1, &self.sample2]
    }

    /// CSV text that parses back to the same dataset.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,status,group\n");
        for (sample, label) in self.samples().into_iter().zip(&self.labels) {
            for o in sample.observations() {
                let _ = writeln!(out, "{},{},{}", o.time, o.status(), quote(label));
            }
        }
        out
    }
}

fn quote(label: &str) -> String {
    if label.contains([',', '"', '\n']) || label.trim() != label {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

/// Step points of `S`, `G`, `Y` and `N` for both groups as TSV: one row at
/// time 0 and one per distinct observed time (up to `tau` if given).
pub fn km_table(data: &DatasetFile, tau: Option<f64>) -> String {
    let mut out =
        String::from("group\tlabel\ttime\tsurvival\tcensoring_survival\tat_risk\tevents\n");
    for (sample, label) in data.samples().into_iter().zip(&data.labels) {
        let s = kaplan_meier(sample);
        let g = censoring_km(sample);
        let cp = counting_processes(sample);
        let mut times = vec![0.0];
        times.extend(
            sample
                .risk_table()
                .times
                .iter()
                .copied()
                .filter(|&t| t > 0.0),
        );
        for t in times
            .into_iter()
            .filter(|&t| tau.is_none_or(|tau| t <= tau))
        {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                sample.group(),
                label,
                t,
                s.eval(t),
                g.eval(t),
                cp.at_risk.at(t),
                cp.events.eval(t)
            );
        }
    }
    out
}

/// Per-group summary in a test report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: u8,
    pub label: String,
    pub n: usize,
    pub events: usize,
    pub censoring_rate: f64,
    /// Kaplan–Meier curve is determined up to this time.
    #[serde(with = "serde_ext::f64_ext")]
    pub estimable_to: f64,
    pub rmst: f64,
    /// Estimated variance of `sqrt(n) (mu_hat - mu)`, `n` the total size.
    pub sigma2: f64,
    /// Standard error of the group's RMST estimate.
    pub std_error: f64,
}

/// Settings for [`ReportDocument::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub tau: f64,
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub estimands: Vec<Estimand>,
}

/// Everything a two-sample test run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub settings: ReportSettings,
    pub groups: [GroupReport; 2],
    pub results: Vec<InferenceResult>,
    /// Method/estimand pairs that were requested but are not defined.
    #[serde(default)]
    pub skipped: Vec<String>,
}

impl ReportDocument {
    pub fn build(data: &DatasetFile, settings: ReportSettings) -> Result<Self> {
        let window = TimeWindow::new(settings.tau)?;
        if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                settings.alpha
            )));
        }
        if settings.n_perm == 0 {
            return Err(Error::invalid(
                "the number of permutations must be at least 1",
            ));
        }
        let analysis = TwoSampleAnalysis::new(&data.sample1, &data.sample2, window)?;
        let needs_run = settings.methods.iter().any(Method::is_permutation);
        let run =
            needs_run.then(|| analysis.permute(settings.n_perm, Stream::root(settings.seed), true));

        let mut results = Vec::new();
        let mut skipped = Vec::new();
        for &method in &settings.methods {
            for &estimand in &settings.estimands {
                if method.supports(estimand) {
                    results.push(analysis.result(
                        method,
                        estimand,
                        settings.alpha,
                        run.as_ref(),
                    )?);
                } else {
                    skipped.push(format!("{method}/{estimand}"));
                }
            }
        }

        let (e1, e2) = analysis.estimates();
        let n = analysis.total_size() as f64;
        let group = |sample: &Sample, label: &str, est: crate::rmst::RmstEstimate| GroupReport {
            group: sample.group(),
            label: label.to_string(),
            n: sample.len(),
            events: sample.event_count(),
            censoring_rate: sample.censoring_rate(),
            estimable_to: estimable_to(sample.risk_table()),
            rmst: est.mu_hat,
            sigma2: est.sigma2_hat,
            std_error: (est.sigma2_hat / n).sqrt(),
        };
        Ok(Self {
            tool: "rmst".into(),
            version: crate::VERSION.into(),
            input: None,
            groups: [
                group(&data.sample1, &data.labels[0], e1),
                group(&data.sample2, &data.labels[1], e2),
            ],
            settings,
            results,
            skipped,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
    }

    /// Plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let s = &self.settings;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "rmst {}  tau = {}  alpha = {}  B = {}  seed = {}",
            self.version, s.tau, s.alpha, s.n_perm, s.seed
        );
        if let Some(input) = &self.input {
            let _ = writeln!(out, "input: {input}");
        }
        let _ = writeln!(
            out,
            "{:<6} {:<16} {:>5} {:>7} {:>8} {:>10} {:>10}",
            "group", "label", "n", "events", "cens %", "RMST", "SE"
        );
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{:<6} {:<16} {:>5} {:>7} {:>8.1} {:>10.4} {:>10.4}",
                g.group,
                g.label,
                g.n,
                g.events,
                100.0 * g.censoring_rate,
                g.rmst,
                g.std_error
            );
        }
        let _ = writeln!(
            out,
            "difference = mu(group 1) - mu(group 2), ratio = mu(group 1) / mu(group 2)"
        );
        let _ = writeln!(
            out,
            "{:<20} {:<11} {:>10} {:>10} {:>10} {:>9} {:>24} {:>7}",
            "method",
            "estimand",
            "estimate",
            "statistic",
            "critical",
            "p-value",
            "confidence interval",
            "reject"
        );
        for r in &self.results {
            let ci = r.ci.map_or("-".to_string(), |c| {
                format!("[{:.4}, {:.4}]", c.lower, c.upper)
            });
            let _ = writeln!(
                out,
                "{:<20} {:<11} {:>10.4} {:>10.4} {:>10.4} {:>9.4} {:>24} {:>7}",
                r.method.as_str(),
                r.estimand.as_str(),
                r.point_estimate,
                r.statistic,
                r.critical_value,
                r.p_value,
                ci,
                if r.reject { "yes" } else { "no" }
            );
        }
        let extended = self
            .results
            .iter()
            .map(|r| r.diagnostics.extended_replicates)
            .max()
            .unwrap_or(0);
        if extended > 0 {
            let _ = writeln!(
                out,
                "permutation replicates with a horizontally extended curve: {extended}"
            );
        }
        for s in &self.skipped {
            let _ = writeln!(out, "skipped {s}: not defined for this estimand");
        }
        out
    }
}

/// Parses a TOML simulation config. Errors name the offending key.
pub fn parse_sim_config(text: &str) -> Result<SimConfig> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| Error::config("<document>", e.message().to_string()))?;
    let config: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::config(
            if path == "." {
                "<document>".into()
            } else {
                path
            },
            inner.message().to_string(),
        )
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
    parse_sim_config(&text)
}
