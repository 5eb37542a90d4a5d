//! Sampled 1-D functions of time: signal, concentration and residue curves.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What a series measures. The kind tags the unit convention; it does not
/// change the arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// Raw scanner signal, arbitrary units, nonnegative.
    Signal,
    /// Contrast concentration (proportional to the relaxation rate change).
    Concentration,
    /// Flow-scaled residue function, units 1/s.
    Residue,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Signal => "signal",
            SeriesKind::Concentration => "concentration",
            SeriesKind::Residue => "residue",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "signal" => Some(SeriesKind::Signal),
            "concentration" => Some(SeriesKind::Concentration),
            "residue" => Some(SeriesKind::Residue),
            _ => None,
        }
    }
}

/// Uniformly sampled time series with sampling interval `dt_s` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T: Scalar> {
    pub values: Vec<T>,
    pub dt_s: T,
    pub kind: SeriesKind,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(values: Vec<T>, dt_s: T, kind: SeriesKind) -> Result<Self> {
        let s = TimeSeries { values, dt_s, kind };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::Invalid(format!(
                "time series needs at least 2 samples, got {}",
                self.values.len()
            )));
        }
        if !(self.dt_s > T::zero()) || !self.dt_s.is_finite() {
            return Err(Error::Invalid(format!(
                "sampling interval must be positive, got {}",
                self.dt_s
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("time series contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid and kind, values replaced.
    pub fn with_values(&self, values: Vec<T>, kind: SeriesKind) -> Self {
        TimeSeries {
            values,
            dt_s: self.dt_s,
            kind,
        }
    }
}
