//! Hopkins TCC assembly and eigen-kernel extraction.
//!
//! The TCC is sampled on the discrete frequency grid of a
//! `kernel_size * freq_oversample` periodic window. Spatial kernels are the
//! inverse transforms of its leading eigenvectors, center-cropped to
//! `kernel_size`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::kernels::KernelSet;
use crate::error::{Error, Result};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsParams {
    /// nm
    pub wavelength: f64,
    pub numerical_aperture: f64,
    /// Source radius as a fraction of NA.
    pub partial_coherence_sigma: f64,
    /// Spatial kernel edge in pixels; odd.
    pub kernel_size: usize,
    /// nm per pixel
    pub pixel_size: f64,
    /// Periodic window used for the TCC, as a multiple of `kernel_size`.
    pub freq_oversample: usize,
    /// Source disk radius in sample steps (the source is a uniform disk
    /// sampled on a square lattice).
    pub source_samples: usize,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            wavelength: 193.0,
            numerical_aperture: 1.35,
            partial_coherence_sigma: 0.3,
            kernel_size: 71,
            pixel_size: 4.0,
            freq_oversample: 3,
            source_samples: 10,
        }
    }
}

impl OpticsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::param("wavelength", "must be > 0"));
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.5) {
            return Err(Error::param("numerical_aperture", "must lie in (0, 1.5)"));
        }
        if !(0.0..=1.0).contains(&self.partial_coherence_sigma) {
            return Err(Error::param("partial_coherence_sigma", "must lie in [0, 1]"));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::param("kernel_size", "must be odd"));
        }
        if !(self.pixel_size > 0.0) {
            return Err(Error::param("pixel_size", "must be > 0"));
        }
        if self.freq_oversample == 0 || self.source_samples == 0 {
            return Err(Error::param("freq_oversample", "sampling factors must be >= 1"));
        }
        let nyquist = 0.5 / self.pixel_size;
        if self.support_radius() >= nyquist {
            return Err(Error::param(
                "pixel_size",
                "grid too coarse: imaging band exceeds the sampling Nyquist limit",
            ));
        }
        Ok(())
    }

    /// Pupil cutoff NA / lambda in 1/nm.
    pub fn cutoff(&self) -> f64 {
        self.numerical_aperture / self.wavelength
    }

    fn support_radius(&self) -> f64 {
        (1.0 + self.partial_coherence_sigma) * self.cutoff()
    }

    fn window(&self) -> usize {
        self.kernel_size * self.freq_oversample
    }
}

/// Hermitian transmission cross coefficient on the in-band frequency samples.
#[derive(Debug, Clone)]
pub struct Tcc {
    /// Signed frequency indices `(jx, jy)` of each row/column.
    points: Vec<(i64, i64)>,
    window: usize,
    matrix: DMatrix<Complex64>,
}

impl Tcc {
    /// `TCC(f, g) = sum_s J(s) P(f + s) conj(P(g + s))` with a uniform disk
    /// source of radius `sigma * NA / lambda` and a circular pupil carrying
    /// the paraxial defocus phase `exp(i pi lambda h |rho|^2)`.
    pub fn build(optics: &OpticsParams, defocus: f64) -> Result<Self> {
        optics.validate()?;
        let window = optics.window();
        let df = 1.0 / (window as f64 * optics.pixel_size);
        let cutoff = optics.cutoff();
        let cutoff2 = cutoff * cutoff;
        let support = optics.support_radius();

        let reach = (support / df).ceil() as i64;
        let mut points = Vec::new();
        for jy in -reach..=reach {
            for jx in -reach..=reach {
                let r2 = ((jx * jx + jy * jy) as f64) * df * df;
                if r2 <= support * support {
                    points.push((jx, jy));
                }
            }
        }

        let source = source_points(optics);
        let amp = (1.0 / source.len() as f64).sqrt();
        let phase_coeff = PI * optics.wavelength * defocus;
        // Rows: frequency points; columns: source points.
        let columns: Vec<Vec<Complex64>> = source
            .iter()
            .map(|&(sx, sy)| {
                points
                    .iter()
                    .map(|&(jx, jy)| {
                        let fx = jx as f64 * df + sx;
                        let fy = jy as f64 * df + sy;
                        let r2 = fx * fx + fy * fy;
                        if r2 <= cutoff2 {
                            Complex64::from_polar(amp, phase_coeff * r2)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();

        let n = points.len();
        let mut matrix = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for col in &columns {
                    acc += col[i] * col[j].conj();
                }
                matrix[(i, j)] = acc;
                matrix[(j, i)] = acc.conj();
            }
        }
        Ok(Self {
            points,
            window,
            matrix,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Eigenpairs sorted by descending eigenvalue, keeping at most `k`
    /// numerically nonzero ones. Each eigenvector has unit norm and its
    /// largest-magnitude entry is real positive.
    pub fn eigen(&self, k: usize) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = order.first().map(|&i| eig.eigenvalues[i]).unwrap_or(0.0);
        let mut weights = Vec::new();
        let mut vectors = Vec::new();
        for &i in order.iter().take(k) {
            let w = eig.eigenvalues[i];
            if !(w > RANK_TOL * top) {
                break;
            }
            let mut v: Vec<Complex64> = eig.eigenvectors.column(i).iter().copied().collect();
            let pivot = v
                .iter()
                .enumerate()
                .fold((0, 0.0), |best, (j, z)| {
                    if z.norm() > best.1 {
                        (j, z.norm())
                    } else {
                        best
                    }
                })
                .0;
            let phase = v[pivot].conj() / v[pivot].norm();
            v.iter_mut().for_each(|z| *z *= phase);
            weights.push(w);
            vectors.push(v);
        }
        (weights, vectors)
    }

    /// Spatial kernel of a frequency-sampled vector: unitary inverse DFT on
    /// the periodic window, center-cropped to `size`.
    fn spatial_kernel(&self, spectrum: &[Complex64], size: usize) -> Vec<Complex64> {
        let n = self.window;
        let mut grid = vec![Complex64::new(0.0, 0.0); n * n];
        let wrap = |j: i64| j.rem_euclid(n as i64) as usize;
        for (&(jx, jy), &value) in self.points.iter().zip(spectrum) {
            grid[wrap(jy) * n + wrap(jx)] = value;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n);
        for row in grid.chunks_exact_mut(n) {
            fft.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for x in 0..n {
            for y in 0..n {
                column[y] = grid[y * n + x];
            }
            fft.process(&mut column);
            for y in 0..n {
                grid[y * n + x] = column[y];
            }
        }
        let scale = 1.0 / n as f64;
        let c = (size / 2) as i64;
        let mut out = Vec::with_capacity(size * size);
        for v in -c..=c {
            for u in -c..=c {
                out.push(grid[wrap(v) * n + wrap(u)] * scale);
            }
        }
        out
    }
}

fn source_points(optics: &OpticsParams) -> Vec<(f64, f64)> {
    let sigma = optics.partial_coherence_sigma;
    if sigma == 0.0 {
        return vec![(0.0, 0.0)];
    }
    let r = optics.source_samples as i64;
    let ds = sigma * optics.cutoff() / r as f64;
    let mut pts = Vec::new();
    for b in -r..=r {
        for a in -r..=r {
            if a * a + b * b <= r * r {
                pts.push((a as f64 * ds, b as f64 * ds));
            }
        }
    }
    pts
}

/// Result of kernel generation.
#[derive(Debug, Clone)]
pub struct GeneratedKernels {
    pub kernels: KernelSet,
    /// Requested kernels that were dropped because the TCC rank is smaller.
    pub shortfall: usize,
    /// Factor applied to the raw eigenvalues so that a clear field images
    /// to unit intensity.
    pub normalization: f64,
    /// Trace of the unnormalized TCC.
    pub tcc_trace: f64,
}

/// Leading `k_count` coherent kernels at `defocus` nm, with weights scaled
/// so that an open frame prints at intensity 1.
pub fn generate_kernels(optics: &OpticsParams, k_count: usize, defocus: f64) -> Result<GeneratedKernels> {
    if k_count == 0 {
        return Err(Error::param("k_count", "must be >= 1"));
    }
    let tcc = Tcc::build(optics, defocus)?;
    let (weights, vectors) = tcc.eigen(k_count);
    let kernels: Vec<Vec<Complex64>> = vectors
        .iter()
        .map(|v| tcc.spatial_kernel(v, optics.kernel_size))
        .collect();
    let shortfall = k_count - weights.len();
    let raw = KernelSet::new(defocus, optics.kernel_size, optics.pixel_size, weights, kernels)?;
    let open = raw.open_frame_intensity();
    if !(open > 0.0) {
        return Err(Error::param("optics", "kernels pass no DC light"));
    }
    let normalization = 1.0 / open;
    Ok(GeneratedKernels {
        kernels: raw.scaled(normalization),
        shortfall,
        normalization,
        tcc_trace: tcc.trace(),
    })
}
