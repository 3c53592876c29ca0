//! Zero-padded frequency-domain convolution against a prepared kernel set.
//!
//! Spectra are kept in transposed layout (`kx` major) so a forward/inverse
//! pair needs no transpose back to row order in between.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::kernels::KernelSet;
use crate::error::{Error, Result};
use crate::field::ScalarField;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest integer >= `n` with no prime factor above 7.
fn smooth_size(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5, 7] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("unbounded search")
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            col_fwd: planner.plan_fft_forward(rows),
            row_inv: planner.plan_fft_inverse(cols),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn len(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major `rows x cols` in, transposed spectrum (`cols x rows`) out.
    fn forward(&self, buf: &mut [Complex64], tmp: &mut [Complex64]) {
        self.row_fwd.process(buf);
        transpose(buf, self.rows, self.cols, tmp);
        self.col_fwd.process(tmp);
        buf.copy_from_slice(tmp);
    }

    /// Transposed spectrum in, normalized row-major signal out.
    fn inverse(&self, buf: &mut [Complex64], tmp: &mut [Complex64]) {
        self.col_inv.process(buf);
        transpose(buf, self.cols, self.rows, tmp);
        self.row_inv.process(tmp);
        let scale = 1.0 / self.len() as f64;
        for (d, s) in buf.iter_mut().zip(tmp.iter()) {
            *d = s * scale;
        }
    }
}

/// A kernel set prepared for one grid shape.
pub struct Imager {
    width: usize,
    height: usize,
    pixel_size: f64,
    kernel_size: usize,
    weights: Vec<f64>,
    /// Transposed spectra of the zero-padded kernels.
    spectra: Vec<Vec<Complex64>>,
    /// Linear phase ramps turning `H(-k)` into the spectrum of the
    /// 180-degree rotated kernel, per axis.
    flip_x: Vec<Complex64>,
    flip_y: Vec<Complex64>,
    fft: Fft2,
}

impl Imager {
    pub fn new(kernels: &KernelSet, width: usize, height: usize) -> Self {
        let s = kernels.kernel_size();
        let c = s / 2;
        // Only the centered window must be free of wraparound.
        let cols = smooth_size(width + c);
        let rows = smooth_size(height + c);
        let fft = Fft2::new(rows, cols);
        let mut tmp = vec![ZERO; fft.len()];
        let spectra = kernels
            .kernels()
            .iter()
            .map(|h| {
                let mut buf = vec![ZERO; fft.len()];
                for v in 0..s {
                    buf[v * cols..v * cols + s].copy_from_slice(&h[v * s..(v + 1) * s]);
                }
                fft.forward(&mut buf, &mut tmp);
                buf
            })
            .collect();
        let ramp = |n: usize| -> Vec<Complex64> {
            (0..n)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * (k * (s - 1)) as f64 / n as f64))
                .collect()
        };
        Self {
            width,
            height,
            pixel_size: kernels.pixel_size(),
            kernel_size: s,
            weights: kernels.weights().to_vec(),
            spectra,
            flip_x: ramp(cols),
            flip_y: ramp(rows),
            fft,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn check(&self, field: &ScalarField) -> Result<()> {
        if field.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: field.shape(),
            });
        }
        if (field.pixel_size() - self.pixel_size).abs() > 1e-9 * self.pixel_size {
            return Err(Error::PixelSizeMismatch {
                left: field.pixel_size(),
                right: self.pixel_size,
            });
        }
        Ok(())
    }

    fn pad_real(&self, values: &[f64]) -> Vec<Complex64> {
        let cols = self.fft.cols;
        let mut buf = vec![ZERO; self.fft.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                buf[y * cols + x] = Complex64::new(values[y * self.width + x], 0.0);
            }
        }
        buf
    }

    fn crop(&self, full: &[Complex64], out: &mut Vec<Complex64>) {
        let c = self.kernel_size / 2;
        let cols = self.fft.cols;
        out.clear();
        for y in 0..self.height {
            let start = (y + c) * cols + c;
            out.extend_from_slice(&full[start..start + self.width]);
        }
    }

    /// Coherent fields `A_k = M * h_k` on the grid and the intensity
    /// `sum_k w_k |A_k|^2` (clamped at zero).
    pub fn fields(&self, mask: &[f64]) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let mut tmp = vec![ZERO; self.fft.len()];
        let mut mspec = self.pad_real(mask);
        self.fft.forward(&mut mspec, &mut tmp);
        let mut intensity = vec![0.0; self.width * self.height];
        let mut amplitudes = Vec::with_capacity(self.spectra.len());
        let mut buf = vec![ZERO; self.fft.len()];
        for (w, hspec) in self.weights.iter().zip(&self.spectra) {
            for ((b, m), h) in buf.iter_mut().zip(&mspec).zip(hspec) {
                *b = m * h;
            }
            self.fft.inverse(&mut buf, &mut tmp);
            let mut a = Vec::with_capacity(intensity.len());
            self.crop(&buf, &mut a);
            for (i, z) in intensity.iter_mut().zip(&a) {
                *i += w * z.norm_sqr();
            }
            amplitudes.push(a);
        }
        for v in &mut intensity {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        (intensity, amplitudes)
    }

    pub fn intensity(&self, mask: &[f64]) -> Vec<f64> {
        self.fields(mask).0
    }

    /// `2 Re sum_k w_k (h_k^flip * (g . conj(A_k)))`: the pullback of a
    /// per-pixel sensitivity `g = dL/dI` onto the mask.
    pub fn backproject(&self, sensitivity: &[f64], amplitudes: &[Vec<Complex64>]) -> Vec<f64> {
        let cols = self.fft.cols;
        let rows = self.fft.rows;
        let mut tmp = vec![ZERO; self.fft.len()];
        let mut acc = vec![ZERO; self.fft.len()];
        let mut buf = vec![ZERO; self.fft.len()];
        for ((w, hspec), a) in self.weights.iter().zip(&self.spectra).zip(amplitudes) {
            buf.fill(ZERO);
            for y in 0..self.height {
                for x in 0..self.width {
                    let i = y * self.width + x;
                    buf[y * cols + x] = a[i].conj() * sensitivity[i];
                }
            }
            self.fft.forward(&mut buf, &mut tmp);
            // Transposed layout: index = kx * rows + ky.
            for kx in 0..cols {
                let nkx = (cols - kx) % cols;
                let px = self.flip_x[kx] * w;
                let base = kx * rows;
                let nbase = nkx * rows;
                for ky in 0..rows {
                    let nky = (rows - ky) % rows;
                    let flipped = hspec[nbase + nky] * self.flip_y[ky] * px;
                    acc[base + ky] += buf[base + ky] * flipped;
                }
            }
        }
        self.fft.inverse(&mut acc, &mut tmp);
        let mut cropped = Vec::new();
        self.crop(&acc, &mut cropped);
        cropped.iter().map(|z| 2.0 * z.re).collect()
    }
}

/// `I(x, y) = sum_k w_k |(M * h_k)(x, y)|^2` with zero padding.
pub fn aerial_image(mask: &ScalarField, kernels: &KernelSet) -> Result<ScalarField> {
    if let Some(i) = mask.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::param(
            "mask",
            format!("value {} at index {i} outside [0, 1]", mask.data()[i]),
        ));
    }
    let imager = Imager::new(kernels, mask.width(), mask.height());
    imager.check(mask)?;
    mask.with_data(imager.intensity(mask.data()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(547), 560);
        assert_eq!(smooth_size(64), 64);
        assert_eq!(smooth_size(11), 12);
    }

    #[test]
    fn fft_round_trip() {
        let fft = Fft2::new(6, 10);
        let orig: Vec<Complex64> = (0..60).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut buf = orig.clone();
        let mut tmp = vec![ZERO; 60];
        fft.forward(&mut buf, &mut tmp);
        fft.inverse(&mut buf, &mut tmp);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
