use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistParams {
    /// Nominal print threshold on normalized intensity.
    pub threshold: f64,
    /// Sigmoid steepness.
    pub steepness: f64,
    /// Relative dose offset; the effective threshold is
    /// `threshold / (1 + dose_latitude)`.
    pub dose_latitude: f64,
}

impl Default for ResistParams {
    fn default() -> Self {
        Self {
            threshold: 0.225,
            steepness: 50.0,
            dose_latitude: 0.0,
        }
    }
}

impl ResistParams {
    pub fn with_dose(self, dose_latitude: f64) -> Self {
        Self {
            dose_latitude,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::param("threshold", "must be > 0"));
        }
        if !(self.steepness > 0.0) {
            return Err(Error::param("steepness", "must be > 0"));
        }
        if !(self.dose_latitude > -1.0) {
            return Err(Error::param("dose_latitude", "must be > -1"));
        }
        Ok(())
    }

    #[inline]
    pub fn effective_threshold(&self) -> f64 {
        self.threshold / (1.0 + self.dose_latitude)
    }

    #[inline]
    pub fn sigmoid(&self, intensity: f64) -> f64 {
        1.0 / (1.0 + (-self.steepness * (intensity - self.effective_threshold())).exp())
    }
}

/// Binary print: 1 where `I >= threshold / (1 + t_q)`.
pub fn resist_step(intensity: &ScalarField, resist: &ResistParams) -> Result<ScalarField> {
    resist.validate()?;
    let th = resist.effective_threshold();
    Ok(intensity.map(|i| if i >= th { 1.0 } else { 0.0 }))
}

/// Sigmoid relaxation of [`resist_step`].
pub fn resist_sigmoid(intensity: &ScalarField, resist: &ResistParams) -> Result<ScalarField> {
    resist.validate()?;
    Ok(intensity.map(|i| resist.sigmoid(i)))
}
