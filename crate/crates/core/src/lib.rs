//! Two-sample comparison of restricted mean survival times (RMST) from
//! right-censored data.
//!
//! The crate covers the whole pipeline:
//!
//! * [`surv`] and [`step`]: counting processes, Kaplan–Meier and
//!   Nelson–Aalen estimators as exact step functions;
//! * [`rmst`]: the plug-in RMST and its variance estimator;
//! * [`theory`]: true RMST and asymptotic variances for known laws;
//! * [`inference`]: asymptotic, unstudentized-permutation and
//!   studentized-permutation tests and intervals;
//! * [`scenarios`] and [`sim`]: the simulation scenarios and a
//!   deterministic Monte Carlo harness;
//! * [`io`]: CSV datasets, grid configuration files and reports.
//!
//! ```
//! use rmst_core::{Sample, TimeWindow, TestConfig, studentized_perm_test};
//!
//! let g1 = Sample::new(1, &[2.0, 3.5, 4.0, 6.0, 7.5, 9.0], &[1, 1, 0, 1, 1, 0]).unwrap();
//! let g2 = Sample::new(2, &[1.0, 1.5, 2.5, 3.0, 5.0, 8.0], &[1, 1, 1, 0, 1, 1]).unwrap();
//! let window = TimeWindow::new(7.0).unwrap();
//! let config = TestConfig { n_perm: 500, seed: 1, ..TestConfig::default() };
//! let result = studentized_perm_test(&g1, &g2, window, &config).unwrap();
//! assert!(result.p_value > 0.0 && result.p_value <= 1.0);
//! ```

pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod quad;
pub mod rmst;
pub mod rng;
pub mod scenarios;
mod serde_ext;
pub mod sim;
pub mod step;
pub mod surv;
pub mod theory;

/// Version string embedded in reports and simulation outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use inference::{
    asymptotic_test, horizontal_extension, permute_pairs, studentized_perm_test,
    unstudentized_perm_test, ConfidenceInterval, Estimand, InferenceResult, Method,
    PermutationDistribution, PermutationRun, TestConfig, TwoSampleAnalysis,
};
pub use io::{km_table, DatasetFile, ReportDocument, ReportSettings};
pub use model::{LifetimeModel, ParamDistribution, TheoreticalModel};
pub use rmst::{
    estimate_group, ratio_variance, rmst, rmst_variance, Extension, RmstEstimate, TimeWindow,
};
pub use rng::Stream;
pub use scenarios::{
    solve_param, CalibratedScenario, CensoringScenario, ScenarioSpec, SurvivalScenario,
};
pub use sim::{binomial_band, run_study, SimConfig, SimResult};
pub use step::{integrate_step, StepFunction};
pub use surv::{
    censoring_km, counting_processes, estimability, kaplan_meier, nelson_aalen, EstimabilityReport,
    Observation, Sample,
};
pub use theory::{true_rmst, true_sigma, true_sigma_perm};
