use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

/// Right-continuous step function stored as its jump locations.
///
/// `values[k]` holds on `[times[k], times[k+1])`; `initial_value` holds on
/// `[0, times[0])`. Survival curves start at 1, cumulative hazards at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    times: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
}

impl StepCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, initial_value: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(SurvError::DimensionMismatch(
                "step curve times and values differ in length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SurvError::InvalidInput(
                "step curve times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            initial_value,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            initial_value: value,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// Value at `t`: the most recent jump at or before `t`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(SurvError::InvalidInput(format!("curve evaluated at negative time {t}")));
        }
        Ok(self.at(t))
    }

    /// Left limit at `t`: the most recent jump strictly before `t`.
    pub fn eval_left(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(SurvError::InvalidInput(format!("curve evaluated at negative time {t}")));
        }
        Ok(self.left(t))
    }

    pub(crate) fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => self.initial_value,
            k => self.values[k - 1],
        }
    }

    pub(crate) fn left(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x < t) {
            0 => self.initial_value,
            k => self.values[k - 1],
        }
    }

    /// Pointwise map over the values, keeping jump locations.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            initial_value: f(self.initial_value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_at_two() -> StepCurve {
        StepCurve::new(vec![2.0], vec![0.5], 1.0).unwrap()
    }

    #[test]
    fn right_continuous_eval() {
        let c = half_at_two();
        assert_eq!(c.eval(1.9).unwrap(), 1.0);
        assert_eq!(c.eval(2.0).unwrap(), 0.5);
        assert_eq!(c.eval(10.0).unwrap(), 0.5);
        assert_eq!(c.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn left_limit() {
        let c = half_at_two();
        assert_eq!(c.eval_left(2.0).unwrap(), 1.0);
        assert_eq!(c.eval_left(2.0001).unwrap(), 0.5);
    }

    #[test]
    fn negative_time_rejected() {
        assert!(half_at_two().eval(-0.1).is_err());
        assert!(half_at_two().eval_left(-0.1).is_err());
    }

    #[test]
    fn rejects_unsorted() {
        assert!(StepCurve::new(vec![2.0, 1.0], vec![0.5, 0.2], 1.0).is_err());
        assert!(StepCurve::new(vec![1.0, 1.0], vec![0.5, 0.2], 1.0).is_err());
    }
}
