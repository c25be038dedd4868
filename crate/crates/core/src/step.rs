//! Right-continuous piecewise-constant functions on `[0, ∞)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous step function stored as an exact jump list.
///
/// `value(t)` is the value attached to the largest jump time `<= t`, or
/// `initial_value` before the first jump. `defined_to` records how far the
/// function is backed by data; evaluation past it simply carries the last
/// value, but callers that care (RMST over a window) check it explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
    defined_to: f64,
}

impl StepFunction {
    pub fn new(initial_value: f64, jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::invalid(format!(
                "step function has {} jump times but {} values",
                jump_times.len(),
                values.len()
            )));
        }
        if jump_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("jump times must be finite and non-negative"));
        }
        if jump_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("jump times must be strictly increasing"));
        }
        Ok(Self {
            jump_times,
            values,
            initial_value,
            defined_to: f64::INFINITY,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
            initial_value: value,
            defined_to: f64::INFINITY,
        }
    }

    /// Builder used by the estimators, which already guarantee ordering.
    pub(crate) fn from_parts(
        initial_value: f64,
        jump_times: Vec<f64>,
        values: Vec<f64>,
        defined_to: f64,
    ) -> Self {
        debug_assert_eq!(jump_times.len(), values.len());
        debug_assert!(jump_times.windows(2).all(|w| w[0] < w[1]));
        Self {
            jump_times,
            values,
            initial_value,
            defined_to,
        }
    }

    pub fn with_defined_to(mut self, defined_to: f64) -> Self {
        self.defined_to = defined_to;
        self
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// Largest time up to which the function is supported by data.
    pub fn defined_to(&self) -> f64 {
        self.defined_to
    }

    /// Value of the function after its last jump.
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial_value)
    }

    /// Number of jump times `<= t`.
    fn count_le(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&x| x <= t)
    }

    /// Right-continuous evaluation `f(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => self.initial_value,
            k => self.values[k - 1],
        }
    }

    /// Left limit `f(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|&x| x < t) {
            0 => self.initial_value,
            k => self.values[k - 1],
        }
    }

    /// Jump size `f(t) - f(t-)`; zero away from the jump times.
    pub fn jump_at(&self, t: f64) -> f64 {
        self.eval(t) - self.left_limit(t)
    }

    /// Exact integral over `[a, b]` as a sum of value × length terms.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::invalid(format!(
                "integration bounds out of order: a = {a}, b = {b}"
            )));
        }
        if a == b {
            return Ok(0.0);
        }
        let mut k = self.count_le(a);
        let mut left = a;
        let mut current = if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        };
        let mut total = 0.0;
        while k < self.jump_times.len() && self.jump_times[k] < b {
            let t = self.jump_times[k];
            total += current * (t - left);
            left = t;
            current = self.values[k];
            k += 1;
        }
        total += current * (b - left);
        Ok(total)
    }

    /// Copy of the function whose last value is carried forward to `tau`.
    pub fn extended_to(&self, tau: f64) -> Self {
        let mut out = self.clone();
        if out.defined_to < tau {
            out.defined_to = tau;
        }
        out
    }
}

/// Exact Riemann integral of a step function over `[a, b]`.
pub fn integrate_step(f: &StepFunction, a: f64, b: f64) -> Result<f64> {
    f.integrate(a, b)
}
