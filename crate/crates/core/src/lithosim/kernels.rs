use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coherent kernels and weights for one defocus condition.
///
/// Each kernel is a `kernel_size x kernel_size` row-major array whose center
/// element sits at offset zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    defocus: f64,
    kernel_size: usize,
    pixel_size: f64,
    weights: Vec<f64>,
    kernels: Vec<Vec<Complex64>>,
}

impl KernelSet {
    pub fn new(
        defocus: f64,
        kernel_size: usize,
        pixel_size: f64,
        weights: Vec<f64>,
        kernels: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if kernel_size == 0 || kernel_size % 2 == 0 {
            return Err(Error::param("kernel_size", format!("{kernel_size} must be odd")));
        }
        if !(pixel_size > 0.0) {
            return Err(Error::param("pixel_size", "must be > 0"));
        }
        if !defocus.is_finite() {
            return Err(Error::param("defocus", "must be finite"));
        }
        if weights.is_empty() || weights.len() != kernels.len() {
            return Err(Error::param(
                "kernels",
                format!("{} weights for {} kernels", weights.len(), kernels.len()),
            ));
        }
        if weights.len() > kernel_size * kernel_size {
            return Err(Error::param("kernels", "more kernels than kernel pixels"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::param("weights", "must be finite and >= 0"));
        }
        if weights.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::param("weights", "must be sorted descending"));
        }
        let area = kernel_size * kernel_size;
        if kernels.iter().any(|k| k.len() != area) {
            return Err(Error::param("kernels", format!("each kernel needs {area} values")));
        }
        Ok(Self {
            defocus,
            kernel_size,
            pixel_size,
            weights,
            kernels,
        })
    }

    #[inline]
    pub fn defocus(&self) -> f64 {
        self.defocus
    }

    #[inline]
    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    #[inline]
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn kernel(&self, k: usize) -> &[Complex64] {
        &self.kernels[k]
    }

    pub fn kernels(&self) -> &[Vec<Complex64>] {
        &self.kernels
    }

    /// Kernel value at offset `(u, v)` from the center; zero outside.
    #[inline]
    pub fn at(&self, k: usize, u: isize, v: isize) -> Complex64 {
        let c = (self.kernel_size / 2) as isize;
        let (x, y) = (u + c, v + c);
        let s = self.kernel_size as isize;
        if x < 0 || y < 0 || x >= s || y >= s {
            return Complex64::new(0.0, 0.0);
        }
        self.kernels[k][(y * s + x) as usize]
    }

    /// The leading `k` kernels.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.clamp(1, self.count());
        Self {
            weights: self.weights[..k].to_vec(),
            kernels: self.kernels[..k].to_vec(),
            ..self.clone()
        }
    }

    /// Same kernels with all weights multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }

    /// Clear-field intensity `sum_k w_k |sum_u h_k(u)|^2`.
    pub fn open_frame_intensity(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.kernels)
            .map(|(w, h)| w * h.iter().sum::<Complex64>().norm_sqr())
            .sum()
    }
}

/// Kernel sets keyed by defocus.
#[derive(Debug, Clone, Default)]
pub struct KernelBank {
    sets: Vec<KernelSet>,
}

/// Defocus values closer than this are treated as the same condition.
const DEFOCUS_MATCH_NM: f64 = 1e-9;

impl KernelBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a set, replacing any existing set at the same defocus.
    pub fn insert(&mut self, set: KernelSet) {
        match self.position(set.defocus()) {
            Some(i) => self.sets[i] = set,
            None => self.sets.push(set),
        }
    }

    fn position(&self, defocus: f64) -> Option<usize> {
        self.sets
            .iter()
            .position(|s| (s.defocus() - defocus).abs() <= DEFOCUS_MATCH_NM)
    }

    pub fn get(&self, defocus: f64) -> Result<&KernelSet> {
        self.position(defocus)
            .map(|i| &self.sets[i])
            .ok_or(Error::MissingKernels { defocus })
    }

    pub fn sets(&self) -> &[KernelSet] {
        &self.sets
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

impl FromIterator<KernelSet> for KernelBank {
    fn from_iter<T: IntoIterator<Item = KernelSet>>(iter: T) -> Self {
        let mut bank = KernelBank::new();
        for set in iter {
            bank.insert(set);
        }
        bank
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(size: usize) -> Vec<Complex64> {
        let mut k = vec![Complex64::new(0.0, 0.0); size * size];
        k[size * size / 2] = Complex64::new(1.0, 0.0);
        k
    }

    #[test]
    fn validates_invariants() {
        assert!(KernelSet::new(0.0, 4, 1.0, vec![1.0], vec![unit(4)]).is_err());
        assert!(KernelSet::new(0.0, 3, 1.0, vec![0.5, 1.0], vec![unit(3), unit(3)]).is_err());
        assert!(KernelSet::new(0.0, 3, 1.0, vec![-1.0], vec![unit(3)]).is_err());
        assert!(KernelSet::new(0.0, 3, 1.0, vec![1.0, 0.5], vec![unit(3), unit(3)]).is_ok());
    }

    #[test]
    fn bank_lookup_by_defocus() {
        let bank: KernelBank = [-80.0, 0.0, 80.0]
            .into_iter()
            .map(|d| KernelSet::new(d, 3, 1.0, vec![1.0], vec![unit(3)]).unwrap())
            .collect();
        assert_eq!(bank.get(80.0).unwrap().defocus(), 80.0);
        assert!(matches!(bank.get(40.0), Err(Error::MissingKernels { .. })));
    }

    #[test]
    fn centered_access() {
        let set = KernelSet::new(0.0, 3, 1.0, vec![1.0], vec![unit(3)]).unwrap();
        assert_eq!(set.at(0, 0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(set.at(0, 2, 0), Complex64::new(0.0, 0.0));
        assert_eq!(set.open_frame_intensity(), 1.0);
    }
}
