//! Pattern error and its analytic gradients.
//!
//! For one defocus `h` and dose `t`, with `Z = sigmoid(theta (I - I_th / (1 + t)))`:
//!
//! ```text
//! dL/dM = gamma theta sum_k w_k 2 Re[ h_k^flip * ((Z - Zt)^(gamma-1) Z (1 - Z) conj(M * h_k)) ]
//! ```
//!
//! Dose conditions at the same defocus share the coherent fields, so their
//! sensitivities are summed before the single back-projection.

use super::{IltConfig, ProcessCondition};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::levelset::{curvature, gradient, mask_from_levelset, LevelSet, CURVATURE_EPS};
use crate::lithosim::{Imager, KernelBank, KernelSet};

#[inline]
fn loss_term(d: f64, gamma: f64) -> f64 {
    if gamma == 2.0 {
        d * d
    } else {
        d.abs().powf(gamma)
    }
}

/// Sign-preserving `d^p`.
#[inline]
fn signed_pow(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else {
        d.signum() * d.abs().powf(p)
    }
}

/// `sum (z - z_target)^gamma` over raw values; odd or fractional exponents
/// use `|z - z_target|^gamma`.
pub fn pattern_error_values(z: &[f64], z_target: &[f64], gamma: f64) -> Result<f64> {
    if z.len() != z_target.len() {
        return Err(Error::ShapeMismatch {
            expected: (z.len(), 1),
            found: (z_target.len(), 1),
        });
    }
    Ok(z.iter()
        .zip(z_target)
        .map(|(a, b)| loss_term(a - b, gamma))
        .sum())
}

pub fn pattern_error(z: &ScalarField, z_target: &ScalarField, gamma: f64) -> Result<f64> {
    z.ensure_same_shape(z_target)?;
    pattern_error_values(z.data(), z_target.data(), gamma)
}

struct DefocusGroup {
    imager: Imager,
    /// (condition, resist threshold)
    doses: Vec<(ProcessCondition, f64)>,
}

/// Kernels prepared for one target and configuration; evaluates the
/// weighted loss and its mask/level-set gradients.
pub struct IltEngine {
    width: usize,
    height: usize,
    pixel_size: f64,
    target: Vec<f64>,
    groups: Vec<DefocusGroup>,
    cfg: IltConfig,
}

impl IltEngine {
    pub fn new(z_target: &ScalarField, kernels: &KernelBank, cfg: &IltConfig) -> Result<Self> {
        cfg.validate()?;
        if !z_target.is_binary() {
            return Err(Error::param("z_target", "must be binary"));
        }
        let (width, height) = z_target.shape();
        let mut groups = Vec::new();
        for defocus in cfg.defocus_values() {
            let set = kernels.get(defocus)?;
            if (set.pixel_size() - z_target.pixel_size()).abs() > 1e-9 * z_target.pixel_size() {
                return Err(Error::PixelSizeMismatch {
                    left: z_target.pixel_size(),
                    right: set.pixel_size(),
                });
            }
            let doses = cfg
                .conditions
                .iter()
                .filter(|c| c.defocus == defocus)
                .map(|c| (*c, cfg.resist(c.dose).effective_threshold()))
                .collect();
            groups.push(DefocusGroup {
                imager: Imager::new(set, width, height),
                doses,
            });
        }
        Ok(Self {
            width,
            height,
            pixel_size: z_target.pixel_size(),
            target: z_target.data().to_vec(),
            groups,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &IltConfig {
        &self.cfg
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn check(&self, field: &ScalarField) -> Result<()> {
        if field.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: field.shape(),
            });
        }
        Ok(())
    }

    fn sigmoid(&self, intensity: f64, threshold: f64) -> f64 {
        1.0 / (1.0 + (-self.cfg.theta_z * (intensity - threshold)).exp())
    }

    /// Weighted pattern error `L_LS` of a mask.
    pub fn loss(&self, mask: &[f64]) -> f64 {
        let gamma = self.cfg.gamma;
        let mut total = 0.0;
        for group in &self.groups {
            let intensity = group.imager.intensity(mask);
            for (cond, th) in &group.doses {
                let err: f64 = intensity
                    .iter()
                    .zip(&self.target)
                    .map(|(&i, &t)| loss_term(self.sigmoid(i, *th) - t, gamma))
                    .sum();
                total += cond.weight * err;
            }
        }
        total
    }

    /// `L_LS` and the weighted mask gradient `v = sum w dL_Aerial/dM`.
    pub fn loss_and_velocity(&self, mask: &[f64]) -> (f64, Vec<f64>) {
        let gamma = self.cfg.gamma;
        let scale = gamma * self.cfg.theta_z;
        let n = self.width * self.height;
        let mut total = 0.0;
        let mut velocity = vec![0.0; n];
        for group in &self.groups {
            let (intensity, amplitudes) = group.imager.fields(mask);
            let mut sensitivity = vec![0.0; n];
            for (cond, th) in &group.doses {
                let mut err = 0.0;
                for ((s, &i), &t) in sensitivity.iter_mut().zip(&intensity).zip(&self.target) {
                    let z = self.sigmoid(i, *th);
                    let d = z - t;
                    err += loss_term(d, gamma);
                    *s += cond.weight * scale * signed_pow(d, gamma - 1.0) * z * (1.0 - z);
                }
                total += cond.weight * err;
            }
            let g = group.imager.backproject(&sensitivity, &amplitudes);
            for (v, gi) in velocity.iter_mut().zip(g) {
                *v += gi;
            }
        }
        (total, velocity)
    }

    /// Loss at `mask_from_levelset(psi)` and `dL/dpsi = -(v + lambda kappa) |grad psi|`.
    ///
    /// The sign makes this a true gradient: `psi - eps * grad` lowers the
    /// loss, and it can be fed directly as an upstream gradient.
    pub fn levelset_gradient(&self, psi: &LevelSet) -> Result<(f64, ScalarField)> {
        self.check(psi.field())?;
        if !psi.has_interface() {
            return Err(Error::NoInterface);
        }
        let mask = mask_from_levelset(psi);
        let (loss, v) = self.loss_and_velocity(mask.data());
        let (gx, gy) = gradient(psi.field());
        let lambda = self.cfg.lambda_tv;
        let kappa = if lambda != 0.0 {
            Some(curvature(psi, CURVATURE_EPS)?)
        } else {
            None
        };
        let grad = (0..v.len())
            .map(|i| {
                let speed = v[i] + kappa.as_ref().map_or(0.0, |k| lambda * k.data()[i]);
                -speed * gx[i].hypot(gy[i])
            })
            .collect();
        Ok((loss, psi.field().with_data(grad)?))
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }
}

/// `L_LS` of a mask with the sigmoid resist.
pub fn total_error(
    mask: &ScalarField,
    z_target: &ScalarField,
    kernels: &KernelBank,
    cfg: &IltConfig,
) -> Result<f64> {
    mask.ensure_same_shape(z_target)?;
    let engine = IltEngine::new(z_target, kernels, cfg)?;
    Ok(engine.loss(mask.data()))
}

/// Unweighted `dL_Aerial/dM` for one kernel set and dose.
pub fn grad_wrt_mask(
    mask: &ScalarField,
    z_target: &ScalarField,
    kernels: &KernelSet,
    dose: f64,
    cfg: &IltConfig,
) -> Result<ScalarField> {
    mask.ensure_same_shape(z_target)?;
    cfg.resist(dose).validate()?;
    let imager = Imager::new(kernels, mask.width(), mask.height());
    imager.check(mask)?;
    let th = cfg.resist(dose).effective_threshold();
    let (intensity, amplitudes) = imager.fields(mask.data());
    let scale = cfg.gamma * cfg.theta_z;
    let sensitivity: Vec<f64> = intensity
        .iter()
        .zip(z_target.data())
        .map(|(&i, &t)| {
            let z = 1.0 / (1.0 + (-cfg.theta_z * (i - th)).exp());
            scale * signed_pow(z - t, cfg.gamma - 1.0) * z * (1.0 - z)
        })
        .collect();
    mask.with_data(imager.backproject(&sensitivity, &amplitudes))
}

/// `v = sum_conditions w * dL_Aerial/dM`.
pub fn velocity(
    mask: &ScalarField,
    z_target: &ScalarField,
    kernels: &KernelBank,
    cfg: &IltConfig,
) -> Result<ScalarField> {
    mask.ensure_same_shape(z_target)?;
    let engine = IltEngine::new(z_target, kernels, cfg)?;
    let (_, v) = engine.loss_and_velocity(mask.data());
    mask.with_data(v)
}

/// `dL_LS/dpsi` at `psi`; see [`IltEngine::levelset_gradient`].
pub fn levelset_gradient(
    psi: &LevelSet,
    z_target: &ScalarField,
    kernels: &KernelBank,
    cfg: &IltConfig,
) -> Result<ScalarField> {
    let engine = IltEngine::new(z_target, kernels, cfg)?;
    Ok(engine.levelset_gradient(psi)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_error_examples() {
        let t = vec![0.0; 4];
        assert_eq!(pattern_error_values(&t, &t, 2.0).unwrap(), 0.0);
        assert_eq!(pattern_error_values(&[0.5; 4], &t, 2.0).unwrap(), 1.0);

        // 4x4 hand count: three flipped pixels.
        let target: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
        let mut z = target.clone();
        for i in [1, 5, 14] {
            z[i] = 1.0 - z[i];
        }
        assert_eq!(pattern_error_values(&z, &target, 2.0).unwrap(), 3.0);
        assert!(pattern_error_values(&z, &target[..15], 2.0).is_err());
    }

    #[test]
    fn odd_powers_keep_sign() {
        assert_eq!(signed_pow(-0.5, 2.0), -0.25);
        assert_eq!(signed_pow(0.5, 1.0), 0.5);
        assert_eq!(loss_term(-0.5, 3.0), 0.125);
    }
}
