//! Run configuration in flat `key = value` form with dotted keys.
//!
//! ```text
//! # comment
//! grid.width = 512
//! ilt.lambda_tv = 0.01
//! pw.dose_grid = -0.1, -0.05, 0, 0.05, 0.1
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilt::IltConfig;
use crate::layout::GenConstraints;
use crate::lithosim::{OpticsParams, ResistParams};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    /// Directory of LKRN files, one per defocus.
    pub kernels: Option<PathBuf>,
    /// Target PGM(s).
    pub target: Vec<PathBuf>,
    /// Mask PGM(s).
    pub mask: Vec<PathBuf>,
    /// Raw level-set dump.
    pub psi: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub width: usize,
    pub height: usize,
    /// nm
    pub pixel_size: f64,
    pub optics: OpticsParams,
    /// Number of coherent kernels per defocus.
    pub kernel_count: usize,
    pub resist: ResistParams,
    pub ilt: IltConfig,
    pub seed: u64,
    pub layout: GenConstraints,
    /// Number of clips for `gen-layouts`.
    pub layout_count: usize,
    /// Defocus values sampled for process-window curves, nm.
    pub pw_defocus: Vec<f64>,
    pub pw_dose_grid: Vec<f64>,
    pub pw_pass_ede_nm: f64,
    /// Condition used by `simulate`.
    pub simulate_defocus: f64,
    pub simulate_dose: f64,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let optics = OpticsParams::default();
        Self {
            width: 512,
            height: 512,
            pixel_size: optics.pixel_size,
            optics,
            kernel_count: 24,
            resist: ResistParams::default(),
            ilt: IltConfig::default(),
            seed: 0,
            layout: GenConstraints::default(),
            layout_count: 1,
            pw_defocus: vec![-120.0, -80.0, -40.0, 0.0, 40.0, 80.0, 120.0],
            pw_dose_grid: (-20..=20).map(|i| i as f64 * 0.025).collect(),
            pw_pass_ede_nm: 8.0,
            simulate_defocus: 0.0,
            simulate_dose: 0.0,
            paths: Paths {
                output: PathBuf::from("out"),
                ..Paths::default()
            },
        }
    }
}

fn err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| err(key, format!("cannot parse `{value}` as {}", std::any::type_name::<T>())))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(err(key, format!("expected a boolean, got `{value}`"))),
    }
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn paths(value: &str) -> Vec<PathBuf> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

fn join<T: std::fmt::Debug>(values: &[T]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line, format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| err(assignment, "expected `key=value`"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "grid.width" => self.width = num(key, value)?,
            "grid.height" => self.height = num(key, value)?,
            "grid.pixel_size" => self.pixel_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "optics.wavelength" => self.optics.wavelength = num(key, value)?,
            "optics.na" => self.optics.numerical_aperture = num(key, value)?,
            "optics.sigma" => self.optics.partial_coherence_sigma = num(key, value)?,
            "optics.kernel_size" => self.optics.kernel_size = num(key, value)?,
            "optics.kernel_count" => self.kernel_count = num(key, value)?,
            "optics.freq_oversample" => self.optics.freq_oversample = num(key, value)?,
            "optics.source_samples" => self.optics.source_samples = num(key, value)?,
            "resist.threshold" => self.resist.threshold = num(key, value)?,
            "resist.steepness" => self.resist.steepness = num(key, value)?,
            "ilt.gamma" => self.ilt.gamma = num(key, value)?,
            "ilt.lambda_tv" => self.ilt.lambda_tv = num(key, value)?,
            "ilt.alpha" => self.ilt.alpha = num(key, value)?,
            "ilt.dt" => self.ilt.dt = num(key, value)?,
            "ilt.max_iters" => self.ilt.max_iters = num(key, value)?,
            "ilt.reinit_every" => self.ilt.reinit_every = num(key, value)?,
            "ilt.sigma_h" => self.ilt.sigma_h = num(key, value)?,
            "ilt.sigma_q" => self.ilt.sigma_q = num(key, value)?,
            "ilt.stop_window" => self.ilt.stop_window = num(key, value)?,
            "ilt.stop_tolerance" => self.ilt.stop_tolerance = num(key, value)?,
            "ilt.process_variation" => {
                let on = boolean(key, value)?;
                self.ilt.set_process_variation(on);
            }
            "layout.count" => self.layout_count = num(key, value)?,
            "layout.min_cd" => self.layout.min_cd = num(key, value)?,
            "layout.margin" => self.layout.margin = num(key, value)?,
            "layout.min_rects" => self.layout.min_rects = num(key, value)?,
            "layout.max_rects" => self.layout.max_rects = num(key, value)?,
            "pw.defocus" => self.pw_defocus = list(key, value)?,
            "pw.dose_grid" => self.pw_dose_grid = list(key, value)?,
            "pw.pass_ede_nm" => self.pw_pass_ede_nm = num(key, value)?,
            "simulate.defocus" => self.simulate_defocus = num(key, value)?,
            "simulate.dose" => self.simulate_dose = num(key, value)?,
            "paths.kernels" => self.paths.kernels = Some(PathBuf::from(value)),
            "paths.target" => self.paths.target = paths(value),
            "paths.mask" => self.paths.mask = paths(value),
            "paths.psi" => self.paths.psi = Some(PathBuf::from(value)),
            "paths.output" => self.paths.output = PathBuf::from(value),
            _ => return Err(err(key, "unknown key")),
        }
        Ok(())
    }

    /// Resolved configuration: grid settings propagated into the nested
    /// parameter blocks, then validated.
    pub fn resolved(&self) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.optics.pixel_size = cfg.pixel_size;
        cfg.layout.width = cfg.width;
        cfg.layout.height = cfg.height;
        cfg.layout.pixel_size = cfg.pixel_size;
        cfg.ilt.i_th = cfg.resist.threshold;
        cfg.ilt.theta_z = cfg.resist.steepness;
        // Gaussian weights depend on sigma_h / sigma_q.
        let pv = cfg.ilt.is_process_variation();
        cfg.ilt.set_process_variation(pv);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let wrap = |key: &str, e: Error| err(key, e.to_string());
        if self.width < crate::field::MIN_EDGE || self.height < crate::field::MIN_EDGE {
            return Err(err("grid.width", format!("grid must be at least {} px", crate::field::MIN_EDGE)));
        }
        if !(self.pixel_size > 0.0) {
            return Err(err("grid.pixel_size", "must be > 0"));
        }
        self.optics.validate().map_err(|e| wrap("optics", e))?;
        if self.kernel_count == 0 {
            return Err(err("optics.kernel_count", "must be >= 1"));
        }
        self.resist.validate().map_err(|e| wrap("resist", e))?;
        self.ilt.validate().map_err(|e| wrap("ilt", e))?;
        if self.layout_count == 0 {
            return Err(err("layout.count", "must be >= 1"));
        }
        if !self.pw_dose_grid.contains(&0.0) {
            return Err(err("pw.dose_grid", "must contain 0"));
        }
        if self.pw_dose_grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(err("pw.dose_grid", "must be strictly ascending"));
        }
        if self.pw_dose_grid.iter().any(|&t| !(t > -1.0)) {
            return Err(err("pw.dose_grid", "doses must be > -1"));
        }
        if self.pw_defocus.is_empty() || self.pw_defocus.iter().any(|h| !h.is_finite()) {
            return Err(err("pw.defocus", "must be a non-empty list of finite values"));
        }
        if !(self.pw_pass_ede_nm >= 0.0) {
            return Err(err("pw.pass_ede_nm", "must be >= 0"));
        }
        Ok(())
    }

    /// Canonical text form; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.width", self.width.to_string());
        kv("grid.height", self.height.to_string());
        kv("grid.pixel_size", format!("{:?}", self.pixel_size));
        kv("seed", self.seed.to_string());
        kv("optics.wavelength", format!("{:?}", self.optics.wavelength));
        kv("optics.na", format!("{:?}", self.optics.numerical_aperture));
        kv("optics.sigma", format!("{:?}", self.optics.partial_coherence_sigma));
        kv("optics.kernel_size", self.optics.kernel_size.to_string());
        kv("optics.kernel_count", self.kernel_count.to_string());
        kv("optics.freq_oversample", self.optics.freq_oversample.to_string());
        kv("optics.source_samples", self.optics.source_samples.to_string());
        kv("resist.threshold", format!("{:?}", self.resist.threshold));
        kv("resist.steepness", format!("{:?}", self.resist.steepness));
        kv("ilt.gamma", format!("{:?}", self.ilt.gamma));
        kv("ilt.lambda_tv", format!("{:?}", self.ilt.lambda_tv));
        kv("ilt.alpha", format!("{:?}", self.ilt.alpha));
        kv("ilt.dt", format!("{:?}", self.ilt.dt));
        kv("ilt.max_iters", self.ilt.max_iters.to_string());
        kv("ilt.reinit_every", self.ilt.reinit_every.to_string());
        kv("ilt.sigma_h", format!("{:?}", self.ilt.sigma_h));
        kv("ilt.sigma_q", format!("{:?}", self.ilt.sigma_q));
        kv("ilt.stop_window", self.ilt.stop_window.to_string());
        kv("ilt.stop_tolerance", format!("{:?}", self.ilt.stop_tolerance));
        kv("ilt.process_variation", self.ilt.is_process_variation().to_string());
        kv("layout.count", self.layout_count.to_string());
        kv("layout.min_cd", format!("{:?}", self.layout.min_cd));
        kv("layout.margin", format!("{:?}", self.layout.margin));
        kv("layout.min_rects", self.layout.min_rects.to_string());
        kv("layout.max_rects", self.layout.max_rects.to_string());
        kv("pw.defocus", join(&self.pw_defocus));
        kv("pw.dose_grid", join(&self.pw_dose_grid));
        kv("pw.pass_ede_nm", format!("{:?}", self.pw_pass_ede_nm));
        kv("simulate.defocus", format!("{:?}", self.simulate_defocus));
        kv("simulate.dose", format!("{:?}", self.simulate_dose));
        if let Some(p) = &self.paths.kernels {
            kv("paths.kernels", p.display().to_string());
        }
        if !self.paths.target.is_empty() {
            kv("paths.target", join_paths(&self.paths.target));
        }
        if !self.paths.mask.is_empty() {
            kv("paths.mask", join_paths(&self.paths.mask));
        }
        if let Some(p) = &self.paths.psi {
            kv("paths.psi", p.display().to_string());
        }
        kv("paths.output", self.paths.output.display().to_string());
        s
    }
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let cfg = RunConfig::parse(
            "# demo\ngrid.width = 256\n\nilt.lambda_tv = 0.02  # stronger\npw.dose_grid = -0.1, 0, 0.1\nilt.process_variation = true\n",
        )
        .unwrap();
        assert_eq!(cfg.width, 256);
        assert_eq!(cfg.ilt.lambda_tv, 0.02);
        assert_eq!(cfg.pw_dose_grid, vec![-0.1, 0.0, 0.1]);
        assert_eq!(cfg.ilt.conditions.len(), 9);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse("ilt.dt = fast\n").unwrap_err();
        assert!(e.to_string().contains("ilt.dt"), "{e}");
        let e = RunConfig::parse("ilt.bogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("ilt.bogus"), "{e}");
        let e = RunConfig::parse("just words\n").unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
        let e = RunConfig::parse("pw.dose_grid = -0.1, 0.1\n").unwrap().resolved().unwrap_err();
        assert!(e.to_string().contains("pw.dose_grid"), "{e}");
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::parse("seed = 1\n").unwrap();
        cfg.apply_override("seed=9").unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.apply_override("seed").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("ilt.process_variation = on\nilt.sigma_q = 0.2\npaths.target = a.pgm, b.pgm\npaths.kernels = k\n")
            .unwrap();
        let cfg = cfg.resolved().unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap().resolved().unwrap();
        assert_eq!(again, cfg);
    }
}
