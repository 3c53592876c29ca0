//! Exact squared Euclidean distance transform (Felzenszwalb & Huttenlocher
//! lower-envelope-of-parabolas method), applied separably per dimension.

const INF: f64 = 1e20;

/// Squared distance from each pixel to the nearest pixel where `seed` is
/// true. Pixels outside the grid never act as seeds. Returns `INF` values
/// everywhere when there are no seeds.
pub(crate) fn squared_edt(width: usize, height: usize, seed: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..width * height)
        .map(|i| if seed(i) { 0.0 } else { INF })
        .collect();

    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        transform_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        transform_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        row.copy_from_slice(&d[..width]);
    }
    grid
}

fn transform_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if f.iter().all(|&x| x >= INF) {
        d.fill(INF);
        return;
    }
    let mut k = 0usize;
    v[0] = f.iter().position(|&x| x < INF).unwrap_or(0);
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in v[0] + 1..n {
        if f[q] >= INF {
            continue;
        }
        let qf = q as f64;
        let intersect = |p: usize| {
            let pf = p as f64;
            ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
        };
        // z[0] is -inf, so this always terminates with k >= 0.
        let mut s = intersect(v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(width: usize, height: usize, seeds: &[bool]) -> Vec<f64> {
        (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                seeds
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s)
                    .map(|(j, _)| {
                        let (sx, sy) = ((j % width) as f64, (j / width) as f64);
                        (x - sx).powi(2) + (y - sy).powi(2)
                    })
                    .fold(INF, f64::min)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_random_seeds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
            let density = rng.random_range(0.01..0.5);
            let seeds: Vec<bool> = (0..w * h).map(|_| rng.random_bool(density)).collect();
            let fast = squared_edt(w, h, |i| seeds[i]);
            let slow = brute(w, h, &seeds);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn no_seeds_is_infinite() {
        let d = squared_edt(5, 4, |_| false);
        assert!(d.iter().all(|&v| v >= INF));
    }
}
