//! Printability and robustness metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::ilt::IltConfig;
use crate::lithosim::{resist_step, Imager, KernelBank};

fn ensure_binary(field: &ScalarField, name: &'static str) -> Result<()> {
    if !field.is_binary() {
        return Err(Error::param(name, "must be binary"));
    }
    Ok(())
}

/// Number of 4-neighbour edges between inside and outside pixels. Pixels
/// beyond the grid count as outside.
pub fn perimeter_edges(target: &ScalarField) -> usize {
    let (w, h) = target.shape();
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && target.get(x as usize, y as usize) == 1.0
    };
    let mut edges = 0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            if inside(x, y) {
                edges += [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter(|(dx, dy)| !inside(x + dx, y + dy))
                    .count();
            }
        }
    }
    edges
}

/// Edge distance error in nm: differing area over target perimeter.
pub fn ede(wafer: &ScalarField, target: &ScalarField, pixel_size: f64) -> Result<f64> {
    wafer.ensure_same_shape(target)?;
    ensure_binary(wafer, "wafer")?;
    ensure_binary(target, "target")?;
    if !(pixel_size > 0.0) {
        return Err(Error::param("pixel_size", "must be > 0"));
    }
    let perimeter = perimeter_edges(target);
    if perimeter == 0 {
        return Err(Error::ZeroPerimeter);
    }
    let differing = wafer
        .data()
        .iter()
        .zip(target.data())
        .filter(|(a, b)| a != b)
        .count();
    let area = differing as f64 * pixel_size * pixel_size;
    Ok(area / (perimeter as f64 * pixel_size))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdeReport {
    /// nm
    pub per_clip_ede: Vec<f64>,
    pub aede: f64,
    /// `max - min` of the per-clip values.
    pub max_min_spread: f64,
}

impl EdeReport {
    pub fn from_values(per_clip_ede: Vec<f64>) -> Result<Self> {
        if per_clip_ede.is_empty() {
            return Err(Error::Empty("no clips"));
        }
        let aede = per_clip_ede.iter().sum::<f64>() / per_clip_ede.len() as f64;
        let max = per_clip_ede.iter().cloned().fold(f64::MIN, f64::max);
        let min = per_clip_ede.iter().cloned().fold(f64::MAX, f64::min);
        Ok(Self {
            per_clip_ede,
            aede,
            max_min_spread: max - min,
        })
    }
}

pub fn ede_report<'a>(
    pairs: impl IntoIterator<Item = (&'a ScalarField, &'a ScalarField)>,
    pixel_size: f64,
) -> Result<EdeReport> {
    let values = pairs
        .into_iter()
        .map(|(wafer, target)| ede(wafer, target, pixel_size))
        .collect::<Result<Vec<_>>>()?;
    EdeReport::from_values(values)
}

/// One classified (defocus, dose) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwPoint {
    pub defocus: f64,
    pub dose: f64,
    pub ede: f64,
    pub pass: bool,
}

/// Passing dose interval around nominal dose at one defocus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseWindow {
    pub defocus: f64,
    /// `None` when the nominal dose fails.
    pub interval: Option<(f64, f64)>,
    /// Interval width in percent.
    pub max_el: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwSample {
    /// nm
    pub dof: f64,
    /// percent
    pub max_el: f64,
}

/// Exposure latitude versus depth of focus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwCurve {
    /// Ascending in `dof`.
    pub samples: Vec<PwSample>,
    /// Trapezoidal area under `samples`, nm * percent.
    pub area: f64,
    pub windows: Vec<DoseWindow>,
    pub grid: Vec<PwPoint>,
}

impl PwCurve {
    /// Exposure latitude available over the focus range `dof` (linear
    /// interpolation; zero beyond the last sample).
    pub fn el_at_dof(&self, dof: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() || dof > s[s.len() - 1].dof {
            return 0.0;
        }
        if dof <= s[0].dof {
            return s[0].max_el;
        }
        let i = s.partition_point(|p| p.dof < dof);
        let (a, b) = (s[i - 1], s[i]);
        a.max_el + (b.max_el - a.max_el) * (dof - a.dof) / (b.dof - a.dof)
    }

    /// Largest focus range keeping at least `el` percent of exposure
    /// latitude (linear interpolation).
    pub fn dof_at_el(&self, el: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() || s[0].max_el < el {
            return 0.0;
        }
        for i in 1..s.len() {
            if s[i].max_el < el {
                let (a, b) = (s[i - 1], s[i]);
                return a.dof + (b.dof - a.dof) * (a.max_el - el) / (a.max_el - b.max_el);
            }
        }
        s[s.len() - 1].dof
    }
}

/// Largest contiguous run of passing doses that contains the nominal dose.
fn dose_window(defocus: f64, doses: &[f64], pass: &[bool], zero: usize) -> DoseWindow {
    if !pass[zero] {
        return DoseWindow {
            defocus,
            interval: None,
            max_el: 0.0,
        };
    }
    let mut lo = zero;
    while lo > 0 && pass[lo - 1] {
        lo -= 1;
    }
    let mut hi = zero;
    while hi + 1 < pass.len() && pass[hi + 1] {
        hi += 1;
    }
    DoseWindow {
        defocus,
        interval: Some((doses[lo], doses[hi])),
        max_el: (doses[hi] - doses[lo]) * 100.0,
    }
}

/// Builds the EL-DOF curve from per-defocus dose windows.
///
/// A focus range of `dof` is centered on best focus; its latitude is the
/// width of the intersection of the dose windows of every sampled defocus
/// within `dof / 2`.
pub fn curve_from_windows(windows: Vec<DoseWindow>, grid: Vec<PwPoint>) -> PwCurve {
    let mut radii: Vec<f64> = windows.iter().map(|w| w.defocus.abs()).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let samples: Vec<PwSample> = radii
        .iter()
        .map(|&r| {
            let mut acc: Option<(f64, f64)> = Some((f64::NEG_INFINITY, f64::INFINITY));
            for w in windows.iter().filter(|w| w.defocus.abs() <= r) {
                acc = match (acc, w.interval) {
                    (Some((a, b)), Some((lo, hi))) => Some((a.max(lo), b.min(hi))),
                    _ => None,
                };
            }
            let max_el = match acc {
                Some((a, b)) if b >= a => (b - a) * 100.0,
                _ => 0.0,
            };
            PwSample { dof: 2.0 * r, max_el }
        })
        .collect();
    let area = samples
        .windows(2)
        .map(|p| 0.5 * (p[0].max_el + p[1].max_el) * (p[1].dof - p[0].dof))
        .sum();
    PwCurve {
        samples,
        area,
        windows,
        grid,
    }
}

/// Process window of `mask` against `target` over every defocus in
/// `kernels` and every dose in `dose_grid`. A point passes when the EDE of
/// the thresholded print is at most `pass_ede_nm`.
pub fn pw_curve(
    mask: &ScalarField,
    target: &ScalarField,
    kernels: &KernelBank,
    dose_grid: &[f64],
    pass_ede_nm: f64,
    cfg: &IltConfig,
) -> Result<PwCurve> {
    mask.ensure_same_shape(target)?;
    if kernels.is_empty() {
        return Err(Error::Empty("kernel bank"));
    }
    if dose_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::param("dose_grid", "must be strictly ascending"));
    }
    let zero = dose_grid
        .iter()
        .position(|&t| t == 0.0)
        .ok_or_else(|| Error::param("dose_grid", "must contain the nominal dose 0"))?;
    let mut sets: Vec<_> = kernels.sets().iter().collect();
    sets.sort_by(|a, b| a.defocus().total_cmp(&b.defocus()));

    let mut windows = Vec::with_capacity(sets.len());
    let mut grid = Vec::with_capacity(sets.len() * dose_grid.len());
    for set in sets {
        let imager = Imager::new(set, mask.width(), mask.height());
        imager.check(mask)?;
        let intensity = mask.with_data(imager.intensity(mask.data()))?;
        let mut pass = Vec::with_capacity(dose_grid.len());
        for &dose in dose_grid {
            let wafer = resist_step(&intensity, &cfg.resist(dose))?;
            let e = ede(&wafer, target, mask.pixel_size())?;
            let ok = e <= pass_ede_nm;
            pass.push(ok);
            grid.push(PwPoint {
                defocus: set.defocus(),
                dose,
                ede: e,
                pass: ok,
            });
        }
        windows.push(dose_window(set.defocus(), dose_grid, &pass, zero));
    }
    Ok(curve_from_windows(windows, grid))
}

/// Minimum image log slope `|grad I| / I` over target edge pixels (outside
/// pixels 4-adjacent to the pattern), in 1/um.
pub fn worst_ils(intensity: &ScalarField, target: &ScalarField, pixel_size: f64) -> Result<f64> {
    intensity.ensure_same_shape(target)?;
    ensure_binary(target, "target")?;
    let (w, h) = target.shape();
    let (gx, gy) = crate::levelset::gradient(intensity);
    let per_um = 1000.0 / pixel_size;
    let mut worst: Option<f64> = None;
    for y in 0..h {
        for x in 0..w {
            if target.get(x, y) != 0.0 {
                continue;
            }
            let touches = (x > 0 && target.get(x - 1, y) == 1.0)
                || (x + 1 < w && target.get(x + 1, y) == 1.0)
                || (y > 0 && target.get(x, y - 1) == 1.0)
                || (y + 1 < h && target.get(x, y + 1) == 1.0);
            if !touches {
                continue;
            }
            let i = intensity.get(x, y);
            if !(i > 0.0) {
                return Err(Error::ZeroIntensity { x, y });
            }
            let k = y * w + x;
            let ils = gx[k].hypot(gy[k]) / i * per_um;
            worst = Some(worst.map_or(ils, |m: f64| m.min(ils)));
        }
    }
    worst.ok_or(Error::ZeroPerimeter)
}
