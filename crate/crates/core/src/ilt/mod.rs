//! Process-variation aware level-set inverse lithography.

mod gradient;
mod optimize;

pub use gradient::{
    grad_wrt_mask, levelset_gradient, pattern_error, pattern_error_values, total_error, velocity,
    IltEngine,
};
pub use optimize::{optimize, run as optimize_with_engine, OptResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lithosim::ResistParams;

/// One (defocus, dose) sampling point and its Gaussian weight
/// `exp(-h^2 / 2 sigma_h^2) * exp(-t^2 / 2 sigma_q^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessCondition {
    /// nm
    pub defocus: f64,
    /// Relative dose offset `t_q`.
    pub dose: f64,
    pub weight: f64,
}

impl ProcessCondition {
    pub fn new(defocus: f64, dose: f64, sigma_h: f64, sigma_q: f64) -> Self {
        let xi = (-defocus * defocus / (2.0 * sigma_h * sigma_h)).exp();
        let zeta = (-dose * dose / (2.0 * sigma_q * sigma_q)).exp();
        Self {
            defocus,
            dose,
            weight: xi * zeta,
        }
    }

    pub fn nominal() -> Self {
        Self {
            defocus: 0.0,
            dose: 0.0,
            weight: 1.0,
        }
    }

    pub fn is_nominal(&self) -> bool {
        self.defocus == 0.0 && self.dose == 0.0
    }
}

/// Optimizer and loss hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IltConfig {
    /// Pattern error exponent.
    pub gamma: f64,
    /// Sigmoid resist steepness.
    pub theta_z: f64,
    /// Resist threshold.
    pub i_th: f64,
    /// Curvature (TV) penalty weight.
    pub lambda_tv: f64,
    /// Physics loss weight used by the network trainer; unused here.
    pub alpha: f64,
    /// Maximum level-set change per iteration, in pixels.
    pub dt: f64,
    pub max_iters: usize,
    pub reinit_every: usize,
    /// nm
    pub sigma_h: f64,
    pub sigma_q: f64,
    /// Stop once the best loss improved by less than `stop_tolerance`
    /// (relative) over the last `stop_window` iterations.
    pub stop_window: usize,
    pub stop_tolerance: f64,
    pub conditions: Vec<ProcessCondition>,
}

impl Default for IltConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            theta_z: 50.0,
            i_th: 0.225,
            lambda_tv: 0.01,
            alpha: 0.008,
            dt: 0.5,
            max_iters: 100,
            reinit_every: 20,
            sigma_h: 80.0,
            sigma_q: 0.1,
            stop_window: 10,
            stop_tolerance: 1e-5,
            conditions: vec![ProcessCondition::nominal()],
        }
    }
}

/// Defocus sampling points of the process-variation grid, nm.
pub const PV_DEFOCUS: [f64; 3] = [-80.0, 0.0, 80.0];
/// Dose sampling points of the process-variation grid.
pub const PV_DOSE: [f64; 3] = [-0.1, 0.0, 0.1];

impl IltConfig {
    pub fn nominal() -> Self {
        Self::default()
    }

    /// Default hyperparameters over the 3x3 (defocus, dose) grid.
    pub fn process_variation() -> Self {
        let mut cfg = Self::default();
        cfg.set_process_variation(true);
        cfg
    }

    /// Switches between the single nominal condition and the 3x3 grid,
    /// with weights from the current `sigma_h` / `sigma_q`.
    pub fn set_process_variation(&mut self, on: bool) {
        self.conditions = if on {
            PV_DEFOCUS
                .iter()
                .flat_map(|&h| PV_DOSE.iter().map(move |&t| (h, t)))
                .map(|(h, t)| ProcessCondition::new(h, t, self.sigma_h, self.sigma_q))
                .collect()
        } else {
            vec![ProcessCondition::nominal()]
        };
    }

    pub fn is_process_variation(&self) -> bool {
        self.conditions.len() > 1
    }

    pub fn resist(&self, dose: f64) -> ResistParams {
        ResistParams {
            threshold: self.i_th,
            steepness: self.theta_z,
            dose_latitude: dose,
        }
    }

    /// Distinct defocus values in first-appearance order.
    pub fn defocus_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.conditions {
            if !out.iter().any(|&d| d == c.defocus) {
                out.push(c.defocus);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::param("gamma", "must be >= 1"));
        }
        if !(self.theta_z > 0.0) || !(self.i_th > 0.0) {
            return Err(Error::param("theta_z", "resist parameters must be > 0"));
        }
        if !(self.lambda_tv >= 0.0) {
            return Err(Error::param("lambda_tv", "must be >= 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be >= 1"));
        }
        if self.reinit_every == 0 {
            return Err(Error::param("reinit_every", "must be >= 1"));
        }
        if self.conditions.is_empty() {
            return Err(Error::param("conditions", "must not be empty"));
        }
        if !self.conditions.iter().any(ProcessCondition::is_nominal) {
            return Err(Error::param("conditions", "nominal (0, 0) condition missing"));
        }
        for c in &self.conditions {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::param("conditions", format!("weight {} outside (0, 1]", c.weight)));
            }
            if !(c.dose > -1.0) {
                return Err(Error::param("conditions", "dose must be > -1"));
            }
        }
        Ok(())
    }
}
