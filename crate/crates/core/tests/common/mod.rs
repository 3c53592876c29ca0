//! Reference implementations for the integration tests. Nothing here calls
//! into the FFT path or the analytic gradient.
#![allow(dead_code)]

use ildls_core::lithosim::{Complex64, KernelSet};
use ildls_core::ScalarField;
use rand::Rng;

/// Coherent fields and intensity by direct spatial convolution with zero
/// padding: `A_k(x) = sum_u h_k(u) M(x - u)`.
pub fn direct_fields(mask: &ScalarField, set: &KernelSet) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let (w, h) = mask.shape();
    let c = (set.kernel_size() / 2) as isize;
    let mut intensity = vec![0.0; w * h];
    let mut fields = Vec::new();
    for k in 0..set.count() {
        let mut a = vec![Complex64::new(0.0, 0.0); w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = Complex64::new(0.0, 0.0);
                for v in -c..=c {
                    for u in -c..=c {
                        let (mx, my) = (x - u, y - v);
                        if mx < 0 || my < 0 || mx >= w as isize || my >= h as isize {
                            continue;
                        }
                        let m = mask.get(mx as usize, my as usize);
                        if m != 0.0 {
                            acc += set.at(k, u, v) * m;
                        }
                    }
                }
                a[(y as usize) * w + x as usize] = acc;
            }
        }
        for (i, z) in intensity.iter_mut().zip(&a) {
            *i += set.weights()[k] * z.norm_sqr();
        }
        fields.push(a);
    }
    (intensity, fields)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Central finite difference of `sum (sigmoid(theta (I - th)) - t)^2` with
/// respect to each mask pixel, step `delta`.
///
/// The perturbation only reaches pixels inside the kernel footprint, so the
/// difference is accumulated there alone. Differences are formed without
/// subtracting nearly equal losses: `I+ - I-` is expanded exactly (the
/// intensity is quadratic in the mask) and the sigmoid difference uses
/// `expm1`.
pub fn fd_mask_gradient(
    mask: &ScalarField,
    target: &ScalarField,
    set: &KernelSet,
    threshold: f64,
    theta: f64,
    delta: f64,
) -> Vec<f64> {
    let (w, h) = mask.shape();
    let (intensity, fields) = direct_fields(mask, set);
    let c = (set.kernel_size() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for py in 0..h as isize {
        for px in 0..w as isize {
            let mut diff = 0.0;
            for y in (py - c).max(0)..=(py + c).min(h as isize - 1) {
                for x in (px - c).max(0)..=(px + c).min(w as isize - 1) {
                    let i = y as usize * w + x as usize;
                    // A_k(x) moves by +-delta h_k(x - p).
                    let mut cross = 0.0;
                    let mut square = 0.0;
                    for k in 0..set.count() {
                        let hk = set.at(k, x - px, y - py);
                        let wk = set.weights()[k];
                        cross += wk * (fields[k][i].conj() * hk).re;
                        square += wk * hk.norm_sqr();
                    }
                    let base = intensity[i] + delta * delta * square;
                    let i_plus = base + 2.0 * delta * cross;
                    let i_minus = base - 2.0 * delta * cross;
                    let gap = theta * 4.0 * delta * cross;
                    let (a, b) = (theta * (i_plus - threshold), theta * (i_minus - threshold));
                    // sigmoid(a) - sigmoid(b) = -sigmoid(a) sigmoid(-b) expm1(-(a - b))
                    let dz = -sigmoid(a) * sigmoid(-b) * (-gap).exp_m1();
                    let t = target.data()[i];
                    diff += dz * (sigmoid(a) + sigmoid(b) - 2.0 * t);
                }
            }
            out[py as usize * w + px as usize] = diff / (2.0 * delta);
        }
    }
    out
}

/// Largest `|a - b| / max(|a|, |b|)` over pixels where
/// `|reference| > floor * max |reference|`, and the count of such pixels.
pub fn max_relative_error(analytic: &[f64], reference: &[f64], floor: f64) -> (f64, usize) {
    let peak = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    let mut n = 0;
    for (a, r) in analytic.iter().zip(reference) {
        if r.abs() > floor * peak {
            n += 1;
            worst = worst.max((a - r).abs() / a.abs().max(r.abs()));
        }
    }
    (worst, n)
}

/// Random Gaussian-enveloped complex kernels, open-frame intensity 1.
pub fn random_kernels(rng: &mut impl Rng, count: usize, size: usize, pixel_size: f64) -> KernelSet {
    let c = (size / 2) as f64;
    let spread = rng.random_range(1.0..2.5);
    let kernels: Vec<Vec<Complex64>> = (0..count)
        .map(|_| {
            (0..size * size)
                .map(|i| {
                    let (u, v) = ((i % size) as f64 - c, (i / size) as f64 - c);
                    let env = (-(u * u + v * v) / (2.0 * spread * spread)).exp();
                    Complex64::new(rng.random_range(0.2..1.0), rng.random_range(-0.5..0.5)) * env
                })
                .collect()
        })
        .collect();
    let mut weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    let raw = KernelSet::new(0.0, size, pixel_size, weights, kernels).unwrap();
    let open = raw.open_frame_intensity();
    raw.scaled(1.0 / open)
}

/// Union of `n` random axis-aligned rectangles.
pub fn random_rect_mask(rng: &mut impl Rng, w: usize, h: usize, n: usize) -> ScalarField {
    let rects: Vec<[usize; 4]> = (0..n)
        .map(|_| {
            let x0 = rng.random_range(0..w - 1);
            let y0 = rng.random_range(0..h - 1);
            let x1 = rng.random_range(x0 + 1..=w);
            let y1 = rng.random_range(y0 + 1..=h);
            [x0, y0, x1, y1]
        })
        .collect();
    ScalarField::from_fn(w, h, 1.0, |x, y| {
        rects.iter().any(|r| x >= r[0] && x < r[2] && y >= r[1] && y < r[3]) as u8 as f64
    })
    .unwrap()
}

/// Exact signed distance of a disk, sampled at pixel centers.
pub fn disk_distance(n: usize, radius: f64) -> ScalarField {
    let c = n as f64 / 2.0;
    ScalarField::from_fn(n, n, 1.0, |x, y| {
        (x as f64 + 0.5 - c).hypot(y as f64 + 0.5 - c) - radius
    })
    .unwrap()
}

/// Pixels of phase `phase` with a 4-neighbour of the other phase.
pub fn boundary_pixels(mask: &ScalarField, phase: f64) -> Vec<(usize, usize)> {
    let (w, h) = mask.shape();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) != phase {
                continue;
            }
            let other = (x > 0 && mask.get(x - 1, y) != phase)
                || (x + 1 < w && mask.get(x + 1, y) != phase)
                || (y > 0 && mask.get(x, y - 1) != phase)
                || (y + 1 < h && mask.get(x, y + 1) != phase);
            if other {
                out.push((x, y));
            }
        }
    }
    out
}

/// Fraction of qualifying pixels with `|grad psi|` in [0.9, 1.1], and their
/// count. A pixel qualifies when it is at least 3 px from the boundary and
/// `near_skeleton(x, y)` is false.
pub fn eikonal_fraction(
    psi: &ScalarField,
    norm: &ScalarField,
    near_skeleton: impl Fn(usize, usize) -> bool,
) -> (f64, usize) {
    let (w, h) = psi.shape();
    let (mut ok, mut n) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            if psi.get(x, y).abs() < 3.0 || near_skeleton(x, y) {
                continue;
            }
            n += 1;
            if (0.9..=1.1).contains(&norm.get(x, y)) {
                ok += 1;
            }
        }
    }
    (ok as f64 / n.max(1) as f64, n)
}

/// Inside an axis-aligned rectangle `[x0, x1) x [y0, y1)`, pixels whose two
/// nearest edges are within 6 px of each other lie near the medial axis.
pub fn near_rect_skeleton(rect: [usize; 4], x: usize, y: usize) -> bool {
    let [x0, y0, x1, y1] = rect;
    if !((x0..x1).contains(&x) && (y0..y1).contains(&y)) {
        return false;
    }
    let mut d = [x - x0, x1 - 1 - x, y - y0, y1 - 1 - y];
    d.sort();
    d[1] - d[0] < 6
}

/// Edge distance error by hand: differing area over the 4-neighbour
/// boundary length of the target, nm.
pub fn oracle_ede(wafer: &[f64], target: &ScalarField) -> f64 {
    let (w, h) = target.shape();
    let p = target.pixel_size();
    let inside = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && target.get(x as usize, y as usize) == 1.0
    };
    let mut edges = 0usize;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if inside(x, y) {
                edges += [(0, 1), (1, 0), (0, -1), (-1, 0)]
                    .iter()
                    .filter(|(a, b)| !inside(x + a, y + b))
                    .count();
            }
        }
    }
    let diff = wafer.iter().zip(target.data()).filter(|(a, b)| a != b).count();
    diff as f64 * p * p / (edges as f64 * p)
}
