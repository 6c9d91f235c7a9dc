//! 8x8 digit-like glyphs drawn from seven-segment strokes.
//!
//! A glyph is rendered from a class prototype, a style (stroke half-width,
//! shear, horizontal scale) and a per-sample latent drawn from a finite grid
//! (pixel shift and thickness factor). Because the latent grid is finite, the
//! noise-free distribution is a finite set of templates and the ground-truth
//! labeler is exact nearest-template matching.

use crate::error::{Error, Result};

pub const SIDE: usize = 8;
pub const PIXELS: usize = SIDE * SIDE;

// Segment endpoints in canvas coordinates (x right, y down, pixel centers at +0.5).
const LEFT: f64 = 2.0;
const RIGHT: f64 = 6.0;
const TOP: f64 = 1.5;
const MID: f64 = 4.0;
const BOTTOM: f64 = 6.5;

type Segment = ((f64, f64), (f64, f64));

const SEG_A: Segment = ((LEFT, TOP), (RIGHT, TOP));
const SEG_B: Segment = ((RIGHT, TOP), (RIGHT, MID));
const SEG_C: Segment = ((RIGHT, MID), (RIGHT, BOTTOM));
const SEG_D: Segment = ((LEFT, BOTTOM), (RIGHT, BOTTOM));
const SEG_E: Segment = ((LEFT, MID), (LEFT, BOTTOM));
const SEG_F: Segment = ((LEFT, TOP), (LEFT, MID));
const SEG_G: Segment = ((LEFT, MID), (RIGHT, MID));

fn prototype(class: usize) -> &'static [Segment] {
    match class {
        0 => &[SEG_A, SEG_B, SEG_C, SEG_D, SEG_E, SEG_F],
        1 => &[SEG_B, SEG_C],
        2 => &[SEG_A, SEG_B, SEG_G, SEG_E, SEG_D],
        3 => &[SEG_A, SEG_B, SEG_G, SEG_C, SEG_D],
        4 => &[SEG_F, SEG_G, SEG_B, SEG_C],
        5 => &[SEG_A, SEG_F, SEG_G, SEG_C, SEG_D],
        6 => &[SEG_A, SEG_F, SEG_G, SEG_E, SEG_D, SEG_C],
        7 => &[SEG_A, SEG_B, SEG_C],
        8 => &[SEG_A, SEG_B, SEG_C, SEG_D, SEG_E, SEG_F, SEG_G],
        _ => &[SEG_A, SEG_B, SEG_F, SEG_G, SEG_C, SEG_D],
    }
}

pub const MAX_CLASSES: usize = 10;

/// Rendering parameters of a named style.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlyphStyle {
    pub half_width: f64,
    pub shear: f64,
    pub x_scale: f64,
}

pub const STYLE_NAMES: &[&str] = &["plain", "bold", "thin", "slant", "wide"];

impl GlyphStyle {
    pub fn named(style_id: &str) -> Result<Self> {
        let s = match style_id {
            "plain" => GlyphStyle { half_width: 0.55, shear: 0.0, x_scale: 1.0 },
            "bold" => GlyphStyle { half_width: 1.0, shear: 0.0, x_scale: 1.0 },
            "thin" => GlyphStyle { half_width: 0.3, shear: 0.0, x_scale: 1.0 },
            "slant" => GlyphStyle { half_width: 0.55, shear: 0.35, x_scale: 1.0 },
            "wide" => GlyphStyle { half_width: 0.55, shear: 0.0, x_scale: 1.3 },
            other => {
                return Err(Error::Config(format!(
                    "unknown glyph style '{other}' (known: {})",
                    STYLE_NAMES.join(", ")
                )))
            }
        };
        Ok(s)
    }
}

/// Per-sample latent variation; every field indexes a small finite grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latent {
    pub shift_x: i8,
    pub shift_y: i8,
    pub thickness: u8,
}

const THICKNESS: [f64; 3] = [0.8, 1.0, 1.2];

impl Latent {
    pub fn all() -> impl Iterator<Item = Latent> {
        (-1i8..=1).flat_map(|sx| {
            (-1i8..=1).flat_map(move |sy| {
                (0u8..3).map(move |t| Latent { shift_x: sx, shift_y: sy, thickness: t })
            })
        })
    }

    pub fn count() -> usize {
        27
    }

    pub fn from_index(i: usize) -> Latent {
        Latent::all().nth(i % Self::count()).expect("latent index in range")
    }
}

fn point_segment_distance(px: f64, py: f64, seg: &Segment) -> f64 {
    let ((ax, ay), (bx, by)) = *seg;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Render one noise-free glyph, row-major, values in [0,1].
pub fn render(class: usize, style: &GlyphStyle, latent: Latent) -> Vec<f64> {
    let center = SIDE as f64 / 2.0;
    let hw = style.half_width * THICKNESS[latent.thickness as usize];
    let place = |(x, y): (f64, f64)| {
        let x = center + (x - center) * style.x_scale + style.shear * (center - y);
        (x + latent.shift_x as f64, y + latent.shift_y as f64)
    };
    let segments: Vec<Segment> = prototype(class)
        .iter()
        .map(|&(a, b)| (place(a), place(b)))
        .collect();
    let mut img = vec![0.0; PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
            let d = segments
                .iter()
                .map(|s| point_segment_distance(px, py, s))
                .fold(f64::INFINITY, f64::min);
            img[r * SIDE + c] = (hw + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    img
}

/// Discrete Gaussian blur with radius ceil(3 sigma) and symmetric
/// (half-sample) reflective padding, applied separably.
pub fn blur(img: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return img.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let n = SIDE as i64;
    let reflect = |i: i64| -> usize {
        let m = i.rem_euclid(2 * n);
        (if m >= n { 2 * n - 1 - m } else { m }) as usize
    };
    let mut tmp = vec![0.0; PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            tmp[r * SIDE + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * img[r * SIDE + reflect(c as i64 + k as i64 - radius)])
                .sum();
        }
    }
    let mut out = vec![0.0; PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            out[r * SIDE + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(r as i64 + k as i64 - radius) * SIDE + c])
                .sum();
        }
    }
    out
}

/// Bilinear rotation about the grid center; samples falling outside the
/// grid read as 0.
pub fn rotate(img: &[f64], degrees: f64) -> Vec<f64> {
    if degrees.rem_euclid(360.0) == 0.0 {
        return img.to_vec();
    }
    let (s, c) = degrees.to_radians().sin_cos();
    let center = SIDE as f64 / 2.0;
    let at = |r: i64, col: i64| -> f64 {
        if (0..SIDE as i64).contains(&r) && (0..SIDE as i64).contains(&col) {
            img[r as usize * SIDE + col as usize]
        } else {
            0.0
        }
    };
    let mut out = vec![0.0; PIXELS];
    for r in 0..SIDE {
        for col in 0..SIDE {
            let x = col as f64 + 0.5 - center;
            let y = r as f64 + 0.5 - center;
            // inverse rotation of the output location
            let sx = c * x + s * y + center - 0.5;
            let sy = -s * x + c * y + center - 0.5;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let v = at(y0, x0) * (1.0 - fx) * (1.0 - fy)
                + at(y0, x0 + 1) * fx * (1.0 - fy)
                + at(y0 + 1, x0) * (1.0 - fx) * fy
                + at(y0 + 1, x0 + 1) * fx * fy;
            out[r * SIDE + col] = v.clamp(0.0, 1.0);
        }
    }
    out
}

/// Horizontal mirror of a row-major glyph.
pub fn hflip(img: &mut [f64]) {
    for row in img.chunks_mut(SIDE) {
        row.reverse();
    }
}

/// Translate by whole pixels with zero fill (pad-then-crop).
pub fn shift(img: &[f64], dx: i64, dy: i64) -> Vec<f64> {
    let mut out = vec![0.0; PIXELS];
    for r in 0..SIDE as i64 {
        for c in 0..SIDE as i64 {
            let (sr, sc) = (r - dy, c - dx);
            if (0..SIDE as i64).contains(&sr) && (0..SIDE as i64).contains(&sc) {
                out[(r * SIDE as i64 + c) as usize] = img[(sr * SIDE as i64 + sc) as usize];
            }
        }
    }
    out
}
