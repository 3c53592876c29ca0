//! Rectilinear layout clips and their synthesis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Axis-aligned rectangle in nm; `(x, y)` is the low corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub rectangles: Vec<Rect>,
    /// nm
    pub min_cd: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            rectangles: Vec::new(),
            min_cd: 80.0,
        }
    }
}

/// Pixel `(i, j)` is 1 iff its center lies in some rectangle (half-open on
/// the high sides, so abutting rectangles do not overlap).
pub fn rasterize(
    spec: &LayoutSpec,
    width: usize,
    height: usize,
    pixel_size: f64,
) -> Result<ScalarField> {
    let (ew, eh) = (width as f64 * pixel_size, height as f64 * pixel_size);
    for (i, r) in spec.rectangles.iter().enumerate() {
        let finite = [r.x, r.y, r.w, r.h].iter().all(|v| v.is_finite());
        if !finite || r.w < 0.0 || r.h < 0.0 || r.x < 0.0 || r.y < 0.0 || r.x + r.w > ew || r.y + r.h > eh
        {
            return Err(Error::param(
                "rectangles",
                format!("rectangle {i} ({}, {}, {}, {}) outside the {ew} x {eh} nm clip", r.x, r.y, r.w, r.h),
            ));
        }
    }
    ScalarField::from_fn(width, height, pixel_size, |x, y| {
        let (cx, cy) = ((x as f64 + 0.5) * pixel_size, (y as f64 + 0.5) * pixel_size);
        spec.rectangles.iter().any(|r| r.contains(cx, cy)) as u8 as f64
    })
}

/// Smallest feature run and smallest space between features, in pixels,
/// over all rows and columns. Spaces touching the clip border are not
/// counted. `None` where no such run exists.
pub fn min_runs(field: &ScalarField) -> (Option<usize>, Option<usize>) {
    let (w, h) = field.shape();
    let mut feature = None::<usize>;
    let mut space = None::<usize>;
    let mut scan = |line: &mut dyn Iterator<Item = f64>| {
        let mut current = None::<(f64, usize)>;
        let mut seen_feature = false;
        let mut close = |value: f64, len: usize, bounded: bool| {
            if value == 1.0 {
                feature = Some(feature.map_or(len, |m| m.min(len)));
            } else if bounded {
                space = Some(space.map_or(len, |m| m.min(len)));
            }
        };
        for v in line {
            match current {
                Some((c, n)) if c == v => current = Some((c, n + 1)),
                Some((c, n)) => {
                    // A space closed by a feature is interior iff a feature preceded it.
                    close(c, n, seen_feature);
                    seen_feature |= c == 1.0;
                    current = Some((v, 1));
                }
                None => current = Some((v, 1)),
            }
        }
        if let Some((c, n)) = current {
            if c == 1.0 {
                close(c, n, false);
            }
        }
    };
    for y in 0..h {
        scan(&mut (0..w).map(|x| field.get(x, y)));
    }
    for x in 0..w {
        scan(&mut (0..h).map(|y| field.get(x, y)));
    }
    (feature, space)
}

/// Constraints for [`gen_layouts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConstraints {
    pub width: usize,
    pub height: usize,
    /// nm
    pub pixel_size: f64,
    /// nm
    pub min_cd: f64,
    /// Feature-free border, nm.
    pub margin: f64,
    pub min_rects: usize,
    pub max_rects: usize,
}

impl Default for GenConstraints {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            pixel_size: 4.0,
            min_cd: 80.0,
            margin: 160.0,
            min_rects: 2,
            max_rects: 8,
        }
    }
}

/// A generated clip.
#[derive(Debug, Clone)]
pub struct Clip {
    pub spec: LayoutSpec,
    pub target: ScalarField,
}

const PLACEMENT_ATTEMPTS: usize = 400;
const CLIP_ATTEMPTS: usize = 50;

/// `n` random clips of 2-8 (by default) merged rectangles obeying the
/// min-CD width and spacing rule on the raster. Deterministic per `seed`.
pub fn gen_layouts(n: usize, c: &GenConstraints, seed: u64) -> Result<Vec<Clip>> {
    if n == 0 {
        return Err(Error::param("count", "must be >= 1"));
    }
    if !(c.pixel_size > 0.0) || !(c.min_cd > 0.0) || !(c.margin >= 0.0) {
        return Err(Error::param("constraints", "pixel_size and min_cd must be > 0, margin >= 0"));
    }
    if c.min_rects == 0 || c.min_rects > c.max_rects {
        return Err(Error::param("constraints", "need 1 <= min_rects <= max_rects"));
    }
    let cd = (c.min_cd / c.pixel_size).ceil() as usize;
    let margin = (c.margin / c.pixel_size).ceil() as usize;
    let usable_w = c.width.saturating_sub(2 * margin);
    let usable_h = c.height.saturating_sub(2 * margin);
    if usable_w < cd || usable_h < cd || c.width < crate::field::MIN_EDGE || c.height < crate::field::MIN_EDGE {
        return Err(Error::Unsatisfiable(format!(
            "a {} nm feature does not fit a {}x{} px clip with a {} nm margin",
            c.min_cd, c.width, c.height, c.margin
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clips = Vec::with_capacity(n);
    for index in 0..n {
        let clip = (0..CLIP_ATTEMPTS)
            .find_map(|_| try_clip(&mut rng, c, cd, margin).transpose())
            .transpose()?
            .ok_or_else(|| {
                Error::Unsatisfiable(format!(
                    "clip {index}: could not place {} rectangles under the spacing rule",
                    c.min_rects
                ))
            })?;
        clips.push(clip);
    }
    Ok(clips)
}

/// Random rectangle in pixel units inside the usable area.
fn draw_rect(rng: &mut ChaCha8Rng, c: &GenConstraints, cd: usize, margin: usize, anchor: Option<[usize; 4]>) -> [usize; 4] {
    let (uw, uh) = (c.width - 2 * margin, c.height - 2 * margin);
    let long_max = |u: usize| (u * 3 / 5).max(cd);
    let (w, h) = if rng.random_bool(0.5) {
        (rng.random_range(cd..=(2 * cd).min(uw)), rng.random_range(cd..=long_max(uh)))
    } else {
        (rng.random_range(cd..=long_max(uw)), rng.random_range(cd..=(2 * cd).min(uh)))
    };
    let (w, h) = (w.min(uw), h.min(uh));
    let pick = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| {
        let hi = hi.max(lo);
        rng.random_range(lo..=hi)
    };
    let (x, y) = match anchor {
        // Overlap an existing rectangle to form L/T/U shapes.
        Some([ax, ay, aw, ah]) => {
            let x_lo = (ax + cd).saturating_sub(w).max(margin);
            let x_hi = (ax + aw - cd).min(c.width - margin - w);
            let y_lo = (ay + cd).saturating_sub(h).max(margin);
            let y_hi = (ay + ah - cd).min(c.height - margin - h);
            (pick(rng, x_lo, x_hi.max(x_lo)), pick(rng, y_lo, y_hi.max(y_lo)))
        }
        None => (pick(rng, margin, c.width - margin - w), pick(rng, margin, c.height - margin - h)),
    };
    [x.min(c.width - margin - w), y.min(c.height - margin - h), w, h]
}

fn to_spec(rects: &[[usize; 4]], c: &GenConstraints) -> LayoutSpec {
    let p = c.pixel_size;
    LayoutSpec {
        rectangles: rects
            .iter()
            .map(|r| Rect::new(r[0] as f64 * p, r[1] as f64 * p, r[2] as f64 * p, r[3] as f64 * p))
            .collect(),
        min_cd: c.min_cd,
    }
}

/// Pairwise rule on pixel rectangles: touching rectangles must share a
/// contact of at least `cd`, separate ones must be `cd` apart (Euclidean).
fn compatible(a: &[usize; 4], b: &[usize; 4], cd: usize) -> bool {
    let overlap = |a0: usize, a1: usize, b0: usize, b1: usize| a1.min(b1) as i64 - a0.max(b0) as i64;
    let ox = overlap(a[0], a[0] + a[2], b[0], b[0] + b[2]);
    let oy = overlap(a[1], a[1] + a[3], b[1], b[1] + b[3]);
    if ox >= 0 && oy >= 0 {
        return ox.max(oy) >= cd as i64;
    }
    let gx = (-ox).max(0) as f64;
    let gy = (-oy).max(0) as f64;
    gx.hypot(gy) >= cd as f64
}

fn satisfies(field: &ScalarField, cd: usize) -> bool {
    let (feature, space) = min_runs(field);
    feature.is_none_or(|f| f >= cd) && space.is_none_or(|s| s >= cd)
}

fn try_clip(rng: &mut ChaCha8Rng, c: &GenConstraints, cd: usize, margin: usize) -> Result<Option<Clip>> {
    let count = rng.random_range(c.min_rects..=c.max_rects);
    let mut rects: Vec<[usize; 4]> = Vec::with_capacity(count);
    for _ in 0..PLACEMENT_ATTEMPTS {
        if rects.len() == count {
            break;
        }
        let anchor = if !rects.is_empty() && rng.random_bool(0.35) {
            Some(rects[rng.random_range(0..rects.len())])
        } else {
            None
        };
        let candidate = draw_rect(rng, c, cd, margin, anchor);
        if !rects.iter().all(|r| compatible(r, &candidate, cd)) {
            continue;
        }
        rects.push(candidate);
        let field = rasterize(&to_spec(&rects, c), c.width, c.height, c.pixel_size)?;
        if !satisfies(&field, cd) {
            rects.pop();
        }
    }
    if rects.len() < c.min_rects {
        return Ok(None);
    }
    let spec = to_spec(&rects, c);
    let target = rasterize(&spec, c.width, c.height, c.pixel_size)?;
    Ok(Some(Clip { spec, target }))
}
