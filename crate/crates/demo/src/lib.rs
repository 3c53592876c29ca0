//! WebAssembly front end for `www/index.html`.
//!
//! [`Scene`] holds the state and is plain Rust; [`Demo`] is the JS-facing
//! wrapper.

use ildls_core::analysis::ede;
use ildls_core::ilt::{optimize, IltConfig};
use ildls_core::layout::{gen_layouts, GenConstraints};
use ildls_core::levelset::{mask_from_levelset, signed_distance, LevelSet};
use ildls_core::lithosim::{aerial_image, generate_kernels, resist_step, KernelBank, OpticsParams, ResistParams};
use ildls_core::{Result, ScalarField};
use wasm_bindgen::prelude::*;

pub const SIZE: usize = 128;
pub const PIXEL_NM: f64 = 8.0;

pub struct Scene {
    target: ScalarField,
    psi: LevelSet,
    bank: KernelBank,
    cfg: IltConfig,
    trace: Vec<f64>,
}

impl Scene {
    /// Random clip from `seed` with 12 kernels at nominal focus.
    pub fn new(seed: u64) -> Result<Self> {
        let optics = OpticsParams {
            kernel_size: 35,
            pixel_size: PIXEL_NM,
            ..OpticsParams::default()
        };
        let bank = std::iter::once(generate_kernels(&optics, 12, 0.0)?.kernels).collect();
        let constraints = GenConstraints {
            width: SIZE,
            height: SIZE,
            pixel_size: PIXEL_NM,
            max_rects: 5,
            ..GenConstraints::default()
        };
        let target = gen_layouts(1, &constraints, seed)?.remove(0).target;
        let psi = signed_distance(&target)?;
        Ok(Self {
            target,
            psi,
            bank,
            cfg: IltConfig::default(),
            trace: Vec::new(),
        })
    }

    pub fn mask(&self) -> ScalarField {
        mask_from_levelset(&self.psi)
    }

    pub fn aerial(&self) -> Result<ScalarField> {
        aerial_image(&self.mask(), self.bank.get(0.0)?)
    }

    pub fn printed(&self) -> Result<ScalarField> {
        let resist = ResistParams {
            threshold: self.cfg.i_th,
            steepness: self.cfg.theta_z,
            dose_latitude: 0.0,
        };
        resist_step(&self.aerial()?, &resist)
    }

    /// Nominal EDE of the current mask, nm.
    pub fn ede(&self) -> Result<f64> {
        ede(&self.printed()?, &self.target, PIXEL_NM)
    }

    /// Up to `iterations` more ILT iterations from the current level set.
    /// Returns the best loss seen in this call.
    pub fn step(&mut self, iterations: usize) -> Result<f64> {
        let mut cfg = self.cfg.clone();
        cfg.max_iters = iterations.max(1);
        let result = optimize(&self.target, &self.bank, &cfg, Some(&self.psi))?;
        self.trace.extend_from_slice(&result.loss_trace);
        let best = result.best_loss();
        self.psi = result.final_psi;
        Ok(best)
    }

    pub fn reset(&mut self) -> Result<()> {
        self.psi = signed_distance(&self.target)?;
        self.trace.clear();
        Ok(())
    }

    pub fn target(&self) -> &ScalarField {
        &self.target
    }

    pub fn psi(&self) -> &LevelSet {
        &self.psi
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }
}

fn js(e: ildls_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn bytes(f: &ScalarField) -> Vec<u8> {
    f.data().iter().map(|&v| (v * 255.0) as u8).collect()
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            scene: Scene::new(seed as u64).map_err(js)?,
        })
    }

    pub fn size(&self) -> usize {
        SIZE
    }

    /// Aerial image of the current mask, row-major.
    pub fn simulate(&self) -> std::result::Result<Vec<f64>, JsError> {
        Ok(self.scene.aerial().map_err(js)?.into_data())
    }

    pub fn printed(&self) -> std::result::Result<Vec<u8>, JsError> {
        Ok(bytes(&self.scene.printed().map_err(js)?))
    }

    pub fn step(&mut self, iterations: usize) -> std::result::Result<f64, JsError> {
        self.scene.step(iterations).map_err(js)
    }

    /// Current level set in pixel units, row-major.
    pub fn distance(&self) -> Vec<f64> {
        self.scene.psi().field().data().to_vec()
    }

    pub fn mask(&self) -> Vec<u8> {
        bytes(&self.scene.mask())
    }

    pub fn target(&self) -> Vec<u8> {
        bytes(self.scene.target())
    }

    pub fn ede(&self) -> std::result::Result<f64, JsError> {
        self.scene.ede().map_err(js)
    }

    pub fn iterations(&self) -> usize {
        self.scene.trace().len()
    }

    pub fn reset(&mut self) -> std::result::Result<(), JsError> {
        self.scene.reset().map_err(js)
    }
}
