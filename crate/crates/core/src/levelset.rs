//! Level-set representation of masks.
//!
//! Convention: `psi <= 0` is inside (mask = 1). Distances are in pixels;
//! multiply by `pixel_size` for nm.

use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Default floor on `|grad psi|` in the curvature denominator.
pub const CURVATURE_EPS: f64 = 1e-8;

/// A finite scalar field interpreted as an implicit boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    field: ScalarField,
}

impl LevelSet {
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some(index) = field.first_non_finite() {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(Self { field })
    }

    #[inline]
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.field.shape()
    }

    pub fn has_interface(&self) -> bool {
        let d = self.field.data();
        d.iter().any(|&v| v <= 0.0) && d.iter().any(|&v| v > 0.0)
    }
}

/// Signed Euclidean distance of a binary mask.
///
/// Each pixel gets the center-to-center distance `d` to the nearest pixel of
/// the opposite phase, stored as `-(d - 0.5)` inside and `d - 0.5` outside,
/// which puts the zero level set on pixel edges.
pub fn signed_distance(mask: &ScalarField) -> Result<LevelSet> {
    let data = mask.data();
    if let Some(index) = data.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::param(
            "mask",
            format!("value {} at index {index} is not binary", data[index]),
        ));
    }
    let inside = |i: usize| data[i] == 1.0;
    let n_inside = data.iter().filter(|&&v| v == 1.0).count();
    if n_inside == 0 || n_inside == data.len() {
        return Err(Error::NoInterface);
    }
    let (w, h) = mask.shape();
    let to_outside = squared_edt(w, h, |i| !inside(i));
    let to_inside = squared_edt(w, h, inside);
    let psi = (0..data.len())
        .map(|i| {
            if inside(i) {
                -(to_outside[i].sqrt() - 0.5)
            } else {
                to_inside[i].sqrt() - 0.5
            }
        })
        .collect();
    LevelSet::new(mask.with_data(psi)?)
}

/// Binary mask: 1 where `psi <= 0`, else 0.
pub fn mask_from_levelset(psi: &LevelSet) -> ScalarField {
    psi.field.map(|v| if v <= 0.0 { 1.0 } else { 0.0 })
}

/// Central differences in the interior, one-sided at the borders.
pub(crate) fn gradient(field: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = field.shape();
    let d = field.data();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if x == 0 {
                d[i + 1] - d[i]
            } else if x == w - 1 {
                d[i] - d[i - 1]
            } else {
                0.5 * (d[i + 1] - d[i - 1])
            };
            gy[i] = if y == 0 {
                d[i + w] - d[i]
            } else if y == h - 1 {
                d[i] - d[i - w]
            } else {
                0.5 * (d[i + w] - d[i - w])
            };
        }
    }
    (gx, gy)
}

pub fn grad_magnitude(psi: &LevelSet) -> ScalarField {
    let (gx, gy) = gradient(&psi.field);
    let data = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    psi.field.with_data(data).expect("same geometry")
}

/// Mean curvature `div(grad psi / |grad psi|)`.
///
/// Uses the expanded second-order form with compact central stencils;
/// border pixels clamp the stencil to the grid. `|grad psi|` is floored at
/// `eps`.
pub fn curvature(psi: &LevelSet, eps: f64) -> Result<ScalarField> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be > 0"));
    }
    let f = &psi.field;
    let (w, h) = f.shape();
    let (gx, gy) = gradient(f);
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        f.get(xc, yc)
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (xi, yi) = (x as isize, y as isize);
            let c = at(xi, yi);
            let fxx = at(xi + 1, yi) - 2.0 * c + at(xi - 1, yi);
            let fyy = at(xi, yi + 1) - 2.0 * c + at(xi, yi - 1);
            let fxy = 0.25
                * (at(xi + 1, yi + 1) - at(xi + 1, yi - 1) - at(xi - 1, yi + 1)
                    + at(xi - 1, yi - 1));
            let (fx, fy) = (gx[i], gy[i]);
            let norm = fx.hypot(fy).max(eps);
            out[i] = (fxx * fy * fy - 2.0 * fx * fy * fxy + fyy * fx * fx) / (norm * norm * norm);
        }
    }
    f.with_data(out)
}

/// One explicit time step `psi + dt * dpsi_dt`.
pub fn evolve_step(psi: &LevelSet, dpsi_dt: &ScalarField, dt: f64) -> Result<LevelSet> {
    psi.field.ensure_same_shape(dpsi_dt)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("{dt} must be > 0")));
    }
    let data = psi
        .field
        .data()
        .iter()
        .zip(dpsi_dt.data())
        .map(|(p, v)| p + dt * v)
        .collect();
    LevelSet::new(psi.field.with_data(data)?)
}

/// Restores the signed-distance property while keeping the mask.
pub fn reinitialize(psi: &LevelSet) -> Result<LevelSet> {
    signed_distance(&mask_from_levelset(psi))
}
