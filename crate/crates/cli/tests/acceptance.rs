//! Acceptance suite. Each test checks one release criterion and writes a
//! single `PASS`/`FAIL` line to stderr, outside the harness's capture.
//!
//! The ILT and process-window checks run full optimizations and take tens
//! of minutes together.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ildls_core::analysis::{ede, pw_curve, worst_ils};
use ildls_core::config::RunConfig;
use ildls_core::ilt::{grad_wrt_mask, optimize, IltConfig};
use ildls_core::layout::gen_layouts;
use ildls_core::levelset::{
    curvature, grad_magnitude, mask_from_levelset, signed_distance, LevelSet, CURVATURE_EPS,
};
use ildls_core::lithosim::{aerial_image, generate_kernels, resist_step, KernelBank, OpticsParams};
use ildls_core::ScalarField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criteria include wall-clock limits, so they run one at a time.
static SERIAL: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|p| p.into_inner())
}

fn report(name: &str, pass: bool, detail: String) {
    let line = format!("acceptance {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(line.as_bytes());
    let _ = err.flush();
    assert!(pass, "{name}: {detail}");
}

fn nominal_print(mask: &ScalarField, bank: &KernelBank, cfg: &RunConfig) -> (ScalarField, ScalarField) {
    let image = aerial_image(mask, bank.get(0.0).unwrap()).unwrap();
    let wafer = resist_step(&image, &cfg.resist.with_dose(0.0)).unwrap();
    (image, wafer)
}

fn bank_for(cfg: &RunConfig, defocus: &[f64]) -> KernelBank {
    defocus
        .iter()
        .map(|&h| generate_kernels(&cfg.optics, cfg.kernel_count, h).unwrap().kernels)
        .collect()
}

#[test]
fn gradient_oracle() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cfg = IltConfig::default();
    let optics = OpticsParams {
        kernel_size: 9,
        pixel_size: 16.0,
        source_samples: 4,
        ..OpticsParams::default()
    };
    let mut worst = 0.0f64;
    for i in 0..20 {
        let count = 1 + i % 3;
        // Half the instances use imaging kernels, half arbitrary complex ones.
        let kernels = if i % 2 == 0 {
            let h = [-80.0, 0.0, 80.0][rng.random_range(0..3)];
            generate_kernels(&optics, count, h).unwrap().kernels
        } else {
            let size = [5, 7, 9][rng.random_range(0..3)];
            common::random_kernels(&mut rng, count, size, 16.0)
        };
        let mut rect_mask = |n| {
            let m = common::random_rect_mask(&mut rng, 32, 32, n);
            ScalarField::new(32, 32, 16.0, m.into_data()).unwrap()
        };
        let mask = rect_mask(4);
        let target = rect_mask(3);
        let analytic = grad_wrt_mask(&mask, &target, &kernels, 0.0, &cfg).unwrap();
        let fd = common::fd_mask_gradient(&mask, &target, &kernels, cfg.i_th, cfg.theta_z, 1e-4);
        let (err, n) = common::max_relative_error(analytic.data(), &fd, 1e-8);
        assert!(n > 0);
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "gradient-oracle",
        worst < 1e-4 && secs < 60.0,
        format!("20 instances, max relative error {worst:.2e} (< 1e-4), {secs:.1} s (< 60 s)"),
    );
}

#[test]
fn convolution_oracle() {
    let _serial = serial();
    let cfg = RunConfig::default().resolved().unwrap();
    let kernels = generate_kernels(&cfg.optics, 3, 0.0).unwrap().kernels;
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mask = ScalarField::from_fn(64, 64, cfg.pixel_size, |_, _| rng.random_bool(0.5) as u8 as f64).unwrap();
    let fast = aerial_image(&mask, &kernels).unwrap();
    let (direct, _) = common::direct_fields(&mask, &kernels);
    let peak = direct.iter().fold(0.0f64, |m, v| m.max(*v));
    let err = fast.data().iter().zip(&direct).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / peak;
    report(
        "convolution-oracle",
        err < 1e-10,
        format!("64x64, K = 3, {} px kernels, relative max error {err:.2e} (< 1e-10)", kernels.kernel_size()),
    );
}

#[test]
fn level_set_suite() {
    let _serial = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut exact = 0;
    let mut tried = 0;
    while tried < 100 {
        let mask = common::random_rect_mask(&mut rng, 64, 48, 1 + tried % 6);
        let Ok(psi) = signed_distance(&mask) else { continue };
        tried += 1;
        exact += (mask_from_levelset(&psi) == mask) as usize;
    }

    let (mut ok, mut total) = (0.0, 0usize);
    for _ in 0..20 {
        let (x0, y0) = (rng.random_range(4..20), rng.random_range(4..20));
        let rect = [x0, y0, x0 + rng.random_range(20..50), y0 + rng.random_range(20..50)];
        let mask = ScalarField::from_fn(80, 80, 1.0, |x, y| {
            ((rect[0]..rect[2]).contains(&x) && (rect[1]..rect[3]).contains(&y)) as u8 as f64
        })
        .unwrap();
        let psi = signed_distance(&mask).unwrap();
        let (frac, n) =
            common::eikonal_fraction(psi.field(), &grad_magnitude(&psi), |x, y| common::near_rect_skeleton(rect, x, y));
        ok += frac * n as f64;
        total += n;
    }
    // Large pixelated disk; its skeleton is the center.
    let (n, r) = (160usize, 60.0);
    let c = n as f64 / 2.0;
    let disk = ScalarField::from_fn(n, n, 1.0, |x, y| ((x as f64 + 0.5 - c).hypot(y as f64 + 0.5 - c) <= r) as u8 as f64)
        .unwrap();
    let psi = signed_distance(&disk).unwrap();
    let (disk_frac, _) = common::eikonal_fraction(psi.field(), &grad_magnitude(&psi), |x, y| {
        (x as f64 + 0.5 - c).hypot(y as f64 + 0.5 - c) < 3.0
    });
    let eikonal = ok / total as f64;

    let radius = 20.0;
    let psi = LevelSet::new(common::disk_distance(96, radius)).unwrap();
    let kappa = curvature(&psi, CURVATURE_EPS).unwrap();
    let ring_mask = mask_from_levelset(&psi);
    let worst_kappa = [0.0, 1.0]
        .iter()
        .flat_map(|&p| common::boundary_pixels(&ring_mask, p))
        .map(|(x, y)| (kappa.get(x, y) * radius - 1.0).abs())
        .fold(0.0f64, f64::max);

    report(
        "level-set-suite",
        exact == 100 && eikonal >= 0.95 && disk_frac >= 0.95 && worst_kappa <= 0.25,
        format!(
            "round trip exact {exact}/100; eikonal {:.1}% on rectangles, {:.1}% on r = 60 disk (>= 95%); \
             disk r = 20 curvature worst relative error {:.1}% (<= 25%)",
            100.0 * eikonal,
            100.0 * disk_frac,
            100.0 * worst_kappa
        ),
    );
}

#[test]
fn ilt_improvement() {
    let _serial = serial();
    let cfg = RunConfig::default().resolved().unwrap();
    assert_eq!((cfg.width, cfg.height, cfg.layout.min_cd), (512, 512, 80.0));
    let bank = bank_for(&cfg, &[0.0]);
    let clips = gen_layouts(20, &cfg.layout, 2024).unwrap();
    let mut reductions = Vec::new();
    let mut slowest = 0.0f64;
    for (i, clip) in clips.iter().enumerate() {
        let t = Instant::now();
        let result = optimize(&clip.target, &bank, &cfg.ilt, None).unwrap();
        let secs = t.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let before = ede(&nominal_print(&clip.target, &bank, &cfg).1, &clip.target, cfg.pixel_size).unwrap();
        let after = ede(&nominal_print(&result.final_mask, &bank, &cfg).1, &clip.target, cfg.pixel_size).unwrap();
        let reduction = 1.0 - after / before;
        reductions.push(reduction);
        let _ = writeln!(
            std::io::stderr().lock(),
            "  clip {i:2}: EDE {before:.2} -> {after:.2} nm ({:.0}%), {} iterations, {secs:.0} s",
            100.0 * reduction,
            result.iterations_run
        );
    }
    let min = reductions.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = reductions.iter().sum::<f64>() / reductions.len() as f64;
    report(
        "ilt-improvement",
        min >= 0.5 && slowest < 300.0,
        format!(
            "20 clips 512x512 @ {} nm: EDE reduction min {:.0}%, mean {:.0}% (>= 50% each); slowest clip {slowest:.0} s (< 300 s)",
            cfg.pixel_size,
            100.0 * min,
            100.0 * mean
        ),
    );
}

#[test]
fn pv_directionality() {
    let _serial = serial();
    let mut cfg = RunConfig::default();
    cfg.width = 256;
    cfg.height = 256;
    let cfg = cfg.resolved().unwrap();
    let bank = bank_for(&cfg, &cfg.pw_defocus);
    let pv_cfg = {
        let mut c = cfg.ilt.clone();
        c.set_process_variation(true);
        c
    };
    let clips = gen_layouts(10, &cfg.layout, 77).unwrap();
    let (mut wins, mut ils_nominal, mut ils_pv) = (0, 0.0, 0.0);
    for (i, clip) in clips.iter().enumerate() {
        let mut area = [0.0; 2];
        let mut ils = [0.0; 2];
        for (j, ilt) in [&cfg.ilt, &pv_cfg].into_iter().enumerate() {
            let mask = optimize(&clip.target, &bank, ilt, None).unwrap().final_mask;
            let curve = pw_curve(&mask, &clip.target, &bank, &cfg.pw_dose_grid, cfg.pw_pass_ede_nm, &cfg.ilt).unwrap();
            area[j] = curve.area;
            ils[j] = worst_ils(&nominal_print(&mask, &bank, &cfg).0, &clip.target, cfg.pixel_size).unwrap();
        }
        wins += (area[1] >= area[0]) as usize;
        ils_nominal += ils[0] / clips.len() as f64;
        ils_pv += ils[1] / clips.len() as f64;
        let _ = writeln!(
            std::io::stderr().lock(),
            "  clip {i}: PW area nominal {:.1} vs PV {:.1}; worst ILS {:.1} vs {:.1} 1/um",
            area[0],
            area[1],
            ils[0],
            ils[1]
        );
    }
    report(
        "pv-directionality",
        wins >= 8 && ils_pv >= ils_nominal,
        format!(
            "10 clips 256x256: PV area >= nominal on {wins}/10 (>= 8); mean worst ILS PV {ils_pv:.1} vs nominal {ils_nominal:.1} 1/um"
        ),
    );
}

#[test]
fn metric_unit_tests() {
    let _serial = serial();
    // Notch: a 2x10 px bite out of a 100x100 px square at 1 nm/px.
    let target = ScalarField::from_fn(128, 128, 1.0, |x, y| {
        ((10..110).contains(&x) && (10..110).contains(&y)) as u8 as f64
    })
    .unwrap();
    let mut wafer = target.clone();
    for y in 10..12 {
        for x in 50..60 {
            wafer.set(x, y, 0.0);
        }
    }
    let notch = ede(&wafer, &target, 1.0).unwrap();
    let notch_ok = notch == 0.05 && common::oracle_ede(wafer.data(), &target) == 0.05;

    let optics = OpticsParams {
        kernel_size: 15,
        pixel_size: 16.0,
        source_samples: 4,
        ..OpticsParams::default()
    };
    let defocus = [-80.0, 0.0, 80.0];
    let bank: KernelBank = defocus.iter().map(|&h| generate_kernels(&optics, 6, h).unwrap().kernels).collect();
    let bars = ScalarField::from_fn(36, 36, 16.0, |x, y| {
        let bar = |x0: usize| (x0..x0 + 6).contains(&x) && (8..28).contains(&y);
        (bar(8) || bar(20)) as u8 as f64
    })
    .unwrap();

    let image = aerial_image(&bars, bank.get(0.0).unwrap()).unwrap();
    let base = worst_ils(&image, &bars, 16.0).unwrap();
    let ils_err = [1e-3, 0.37, 2.0, 1e4]
        .iter()
        .map(|&c| (worst_ils(&image.map(|v| c * v), &bars, 16.0).unwrap() - base).abs() / base)
        .fold(0.0f64, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mask = ScalarField::from_fn(36, 36, 16.0, |x, y| {
        let t = bars.get(x, y);
        if rng.random_bool(0.03) {
            1.0 - t
        } else {
            t
        }
    })
    .unwrap();
    let doses = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let ilt = IltConfig::default();
    let curve = pw_curve(&mask, &bars, &bank, &doses, 10.0, &ilt).unwrap();
    let mut matches = 0;
    let mut passing = 0;
    for (i, &h) in defocus.iter().enumerate() {
        let (intensity, _) = common::direct_fields(&mask, bank.get(h).unwrap());
        for (j, &t) in doses.iter().enumerate() {
            let th = ilt.i_th / (1.0 + t);
            let printed: Vec<f64> = intensity.iter().map(|&v| (v >= th) as u8 as f64).collect();
            let pass = common::oracle_ede(&printed, &bars) <= 10.0;
            let point = curve.grid[i * doses.len() + j];
            matches += (point.defocus == h && point.dose == t && point.pass == pass) as usize;
            passing += pass as usize;
        }
    }
    report(
        "metric-unit-tests",
        notch_ok && ils_err <= 1e-12 && matches == 15 && passing > 0 && passing < 15,
        format!(
            "notch EDE {notch} (exact 0.05); ILS scale error {ils_err:.1e} (<= 1e-12); \
             PW 3x5 oracle agreement {matches}/15 ({passing} passing points)"
        ),
    );
}

const PIPELINE_CONFIG: &str = "\
grid.width = 64
grid.height = 64
grid.pixel_size = 16
seed = 42
optics.kernel_size = 15
optics.kernel_count = 6
optics.source_samples = 4
layout.count = 2
layout.margin = 96
ilt.max_iters = 15
pw.defocus = -80, 0, 80
pw.dose_grid = -0.1, -0.05, 0, 0.05, 0.1
";

fn run_pipeline(dir: &Path) {
    std::fs::write(dir.join("run.cfg"), PIPELINE_CONFIG).unwrap();
    let steps: &[&[&str]] = &[
        &["gen-kernels", "--set", "paths.output=kernels"],
        &["gen-layouts", "--set", "paths.output=clips"],
        &["ilt", "--set", "paths.kernels=kernels", "--set", "paths.target=clips/clip_0000.pgm,clips/clip_0001.pgm", "--set", "paths.output=opt"],
        &["ilt", "--set", "paths.kernels=kernels", "--set", "paths.target=clips/clip_0000.pgm", "--set", "ilt.process_variation=true", "--set", "paths.output=opt_pv"],
        &["metrics", "--set", "paths.kernels=kernels", "--set", "paths.mask=opt/clip_0000/mask.pgm,opt/clip_0001/mask.pgm", "--set", "paths.target=clips/clip_0000.pgm,clips/clip_0001.pgm", "--set", "paths.output=metrics"],
        &["pw", "--set", "paths.kernels=kernels", "--set", "paths.mask=opt_pv/mask.pgm", "--set", "paths.target=clips/clip_0000.pgm", "--set", "paths.output=pw"],
        &["simulate", "--set", "paths.kernels=kernels", "--set", "paths.mask=opt/clip_0001/mask.pgm", "--set", "paths.output=sim"],
        &["export-grad", "--set", "paths.kernels=kernels", "--set", "paths.target=clips/clip_0000.pgm", "--set", "paths.psi=opt_pv/psi.f64", "--set", "paths.output=grad"],
    ];
    for step in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_ildls"))
            .args(&step[..1])
            .args(["--config", "run.cfg"])
            .args(&step[1..])
            .current_dir(dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{step:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn determinism() {
    let _serial = serial();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path());
    run_pipeline(b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    report(
        "determinism",
        fa.len() == fb.len() && fa.len() > 20 && differing.is_empty(),
        format!(
            "two end-to-end CLI runs, {} artifacts each, {} differing {differing:?}",
            fa.len(),
            differing.len()
        ),
    );
}
