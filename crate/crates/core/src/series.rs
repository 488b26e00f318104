use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum length accepted by [`TimeSeries::new`].
pub const MIN_LEN: usize = 8;

/// An ordered, finite, real-valued series `x_1, ..., x_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        if values.len() < MIN_LEN {
            return Err(Error::invalid(format!(
                "series has {} observations, need at least {MIN_LEN}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `x_i` with the 1-based indexing used throughout the estimators.
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// Leading `len` observations as a new series.
    pub fn head(&self, len: usize) -> Result<Self> {
        Self::new(self.values[..len.min(self.values.len())].to_vec())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
