use std::path::{Path, PathBuf};
use std::time::Instant;

use ildls_core::analysis::{ede, ede_report, pw_curve, worst_ils, PwCurve};
use ildls_core::config::RunConfig;
use ildls_core::ilt::{optimize_with_engine, IltEngine};
use ildls_core::io;
use ildls_core::layout::gen_layouts as generate_layouts;
use ildls_core::levelset::{signed_distance, LevelSet};
use ildls_core::lithosim::{aerial_image, generate_kernels, resist_step, KernelBank};
use ildls_core::ScalarField;
use serde::Serialize;

use crate::{CliError, Result};

/// `defocus_<h>nm.lkrn`, with `h` in shortest round-trip form.
pub fn kernel_file_name(defocus: f64) -> String {
    format!("defocus_{}nm.lkrn", defocus + 0.0)
}

fn push_unique(out: &mut Vec<f64>, values: impl IntoIterator<Item = f64>) {
    for h in values {
        if !out.contains(&h) {
            out.push(h);
        }
    }
}

/// Every defocus a run with `cfg` can ask for: the PV grid, the PW sweep and
/// the simulate setting, ascending.
pub fn required_defocus(cfg: &RunConfig) -> Vec<f64> {
    let mut pv = cfg.ilt.clone();
    pv.set_process_variation(true);
    let mut out = vec![0.0];
    push_unique(&mut out, pv.defocus_values());
    push_unique(&mut out, cfg.pw_defocus.iter().copied());
    push_unique(&mut out, [cfg.simulate_defocus]);
    out.sort_by(f64::total_cmp);
    out
}

/// Kernel sets for `defocus`, read from `paths.kernels` when set and
/// generated from the optics otherwise.
pub fn load_bank(cfg: &RunConfig, defocus: &[f64]) -> Result<KernelBank> {
    let mut bank = KernelBank::new();
    match &cfg.paths.kernels {
        Some(dir) => {
            for &h in defocus {
                let path = dir.join(kernel_file_name(h));
                let set = io::read_kernels(&path).map_err(CliError::file(&path))?;
                bank.insert(set);
            }
        }
        None => {
            for &h in defocus {
                bank.insert(generate(cfg, h)?.kernels);
            }
        }
    }
    Ok(bank)
}

fn generate(cfg: &RunConfig, defocus: f64) -> Result<ildls_core::lithosim::GeneratedKernels> {
    let g = generate_kernels(&cfg.optics, cfg.kernel_count, defocus)?;
    if g.shortfall > 0 {
        eprintln!(
            "ildls: defocus {defocus} nm: TCC rank allows only {} of {} kernels",
            g.kernels.count(),
            cfg.kernel_count
        );
    }
    Ok(g)
}

fn required<'a>(list: &'a [PathBuf], key: &str) -> Result<&'a [PathBuf]> {
    if list.is_empty() {
        return Err(CliError::Usage(format!("config key `{key}` is required")));
    }
    Ok(list)
}

fn read_mask(path: &Path, cfg: &RunConfig) -> Result<ScalarField> {
    io::read_pgm(path, cfg.pixel_size).map_err(CliError::file(path))
}

/// Masks paired with targets, one to one.
fn pairs(cfg: &RunConfig) -> Result<Vec<(PathBuf, PathBuf)>> {
    let masks = required(&cfg.paths.mask, "paths.mask")?;
    let targets = required(&cfg.paths.target, "paths.target")?;
    if masks.len() != targets.len() {
        return Err(CliError::Usage(format!(
            "paths.mask lists {} files but paths.target lists {}",
            masks.len(),
            targets.len()
        )));
    }
    Ok(masks.iter().cloned().zip(targets.iter().cloned()).collect())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes()).map_err(CliError::file(path))
}

/// Output directory for clip `i` of `n`: the output root itself for a
/// single clip, a per-clip subdirectory otherwise.
fn clip_dir(cfg: &RunConfig, target: &Path, n: usize) -> PathBuf {
    if n == 1 {
        return cfg.paths.output.clone();
    }
    let stem = target.file_stem().map(|s| s.to_string_lossy().into_owned());
    cfg.paths.output.join(stem.unwrap_or_else(|| "clip".into()))
}

/// Nominal printed pattern and its aerial image.
fn print_nominal(mask: &ScalarField, bank: &KernelBank, cfg: &RunConfig) -> Result<(ScalarField, ScalarField)> {
    let image = aerial_image(mask, bank.get(0.0)?)?;
    let wafer = resist_step(&image, &cfg.resist.with_dose(0.0))?;
    Ok((image, wafer))
}

pub fn gen_kernels(cfg: &RunConfig) -> Result<()> {
    for h in required_defocus(cfg) {
        let t = Instant::now();
        let g = generate(cfg, h)?;
        let path = cfg.paths.output.join(kernel_file_name(h));
        io::write_kernels(&path, &g.kernels).map_err(CliError::file(&path))?;
        eprintln!("ildls: {} ({} kernels, {:.2} s)", path.display(), g.kernels.count(), t.elapsed().as_secs_f64());
    }
    Ok(())
}

pub fn gen_layouts(cfg: &RunConfig) -> Result<()> {
    let clips = generate_layouts(cfg.layout_count, &cfg.layout, cfg.seed)?;
    for (i, clip) in clips.iter().enumerate() {
        let pgm = cfg.paths.output.join(format!("clip_{i:04}.pgm"));
        io::write_pgm(&pgm, &clip.target).map_err(CliError::file(&pgm))?;
        write_json(&cfg.paths.output.join(format!("clip_{i:04}.json")), &clip.spec)?;
    }
    eprintln!("ildls: {} clips in {}", clips.len(), cfg.paths.output.display());
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let input = cfg.paths.mask.first().or(cfg.paths.target.first());
    let path = input.ok_or_else(|| CliError::Usage("config key `paths.mask` is required".into()))?;
    let mask = read_mask(path, cfg)?;
    let bank = load_bank(cfg, &[cfg.simulate_defocus])?;
    let image = aerial_image(&mask, bank.get(cfg.simulate_defocus)?)?;
    let wafer = resist_step(&image, &cfg.resist.with_dose(cfg.simulate_dose))?;
    let out = &cfg.paths.output;
    io::write_raw(&out.join("aerial.f64"), &image).map_err(CliError::file(out))?;
    io::write_pgm(&out.join("wafer.pgm"), &wafer).map_err(CliError::file(out))?;
    Ok(())
}

#[derive(Serialize)]
struct IltSummary {
    target: PathBuf,
    process_variation: bool,
    iterations_run: usize,
    initial_loss: f64,
    best_loss: f64,
    /// Nominal EDE with the target itself as the mask, nm.
    ede_unoptimized: f64,
    ede_optimized: f64,
}

pub fn ilt(cfg: &RunConfig) -> Result<()> {
    let targets = required(&cfg.paths.target, "paths.target")?;
    let start_psi = match &cfg.paths.psi {
        Some(p) => Some(LevelSet::new(io::read_raw(p).map_err(CliError::file(p))?)?),
        None => None,
    };
    let mut defocus = cfg.ilt.defocus_values();
    push_unique(&mut defocus, [0.0]);
    let bank = load_bank(cfg, &defocus)?;
    for target_path in targets {
        let t = Instant::now();
        let target = read_mask(target_path, cfg)?;
        let engine = IltEngine::new(&target, &bank, &cfg.ilt)?;
        let start = match &start_psi {
            Some(p) => {
                p.field().ensure_same_shape(&target)?;
                p.clone()
            }
            None => signed_distance(&target)?,
        };
        let result = optimize_with_engine(&engine, start)?;
        let dir = clip_dir(cfg, target_path, targets.len());
        io::write_pgm(&dir.join("mask.pgm"), &result.final_mask).map_err(CliError::file(&dir))?;
        io::write_raw(&dir.join("psi.f64"), result.final_psi.field()).map_err(CliError::file(&dir))?;
        let trace = dir.join("loss.csv");
        io::write_atomic(&trace, io::encode_trace(&result.loss_trace).as_bytes()).map_err(CliError::file(&trace))?;
        let before = ede(&print_nominal(&target, &bank, cfg)?.1, &target, cfg.pixel_size)?;
        let after = ede(&print_nominal(&result.final_mask, &bank, cfg)?.1, &target, cfg.pixel_size)?;
        let summary = IltSummary {
            target: target_path.clone(),
            process_variation: cfg.ilt.is_process_variation(),
            iterations_run: result.iterations_run,
            initial_loss: result.loss_trace[0],
            best_loss: result.best_loss(),
            ede_unoptimized: before,
            ede_optimized: after,
        };
        write_json(&dir.join("summary.json"), &summary)?;
        eprintln!(
            "ildls: {}: EDE {before:.3} -> {after:.3} nm in {} iterations ({:.1} s)",
            target_path.display(),
            result.iterations_run,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ClipMetrics {
    mask: PathBuf,
    target: PathBuf,
    ede: f64,
    /// 1/um
    worst_ils: f64,
}

#[derive(Serialize)]
struct MetricsReport {
    clips: Vec<ClipMetrics>,
    report: ildls_core::analysis::EdeReport,
}

pub fn metrics(cfg: &RunConfig) -> Result<()> {
    let bank = load_bank(cfg, &[0.0])?;
    let mut clips = Vec::new();
    let mut printed = Vec::new();
    for (mask_path, target_path) in pairs(cfg)? {
        let mask = read_mask(&mask_path, cfg)?;
        let target = read_mask(&target_path, cfg)?;
        mask.ensure_same_shape(&target)?;
        let (image, wafer) = print_nominal(&mask, &bank, cfg)?;
        clips.push(ClipMetrics {
            mask: mask_path,
            target: target_path,
            ede: ede(&wafer, &target, cfg.pixel_size)?,
            worst_ils: worst_ils(&image, &target, cfg.pixel_size)?,
        });
        printed.push((wafer, target));
    }
    let report = ede_report(printed.iter().map(|(w, t)| (w, t)), cfg.pixel_size)?;
    eprintln!("ildls: AEDE {:.3} nm over {} clips", report.aede, clips.len());
    write_json(&cfg.paths.output.join("metrics.json"), &MetricsReport { clips, report })
}

#[derive(Serialize)]
struct ClipPw {
    mask: PathBuf,
    target: PathBuf,
    curve: PwCurve,
}

pub fn pw(cfg: &RunConfig) -> Result<()> {
    let bank = load_bank(cfg, &cfg.pw_defocus)?;
    let mut clips = Vec::new();
    for (mask_path, target_path) in pairs(cfg)? {
        let mask = read_mask(&mask_path, cfg)?;
        let target = read_mask(&target_path, cfg)?;
        let curve = pw_curve(&mask, &target, &bank, &cfg.pw_dose_grid, cfg.pw_pass_ede_nm, &cfg.ilt)?;
        eprintln!("ildls: {}: PW area {:.2}", mask_path.display(), curve.area);
        clips.push(ClipPw {
            mask: mask_path,
            target: target_path,
            curve,
        });
    }
    write_json(&cfg.paths.output.join("pw.json"), &clips)
}

#[derive(Serialize)]
struct GradSummary {
    loss: f64,
    width: usize,
    height: usize,
}

pub fn export_grad(cfg: &RunConfig) -> Result<()> {
    let target_path = &required(&cfg.paths.target, "paths.target")?[0];
    let psi_path = cfg
        .paths
        .psi
        .as_ref()
        .ok_or_else(|| CliError::Usage("config key `paths.psi` is required".into()))?;
    let target = read_mask(target_path, cfg)?;
    let psi = LevelSet::new(io::read_raw(psi_path).map_err(CliError::file(psi_path))?)?;
    let bank = load_bank(cfg, &cfg.ilt.defocus_values())?;
    let engine = IltEngine::new(&target, &bank, &cfg.ilt)?;
    let (loss, grad) = engine.levelset_gradient(&psi)?;
    let out = cfg.paths.output.join("grad.f64");
    io::write_raw(&out, &grad).map_err(CliError::file(&out))?;
    let (width, height) = grad.shape();
    write_json(&cfg.paths.output.join("grad.json"), &GradSummary { loss, width, height })
}
