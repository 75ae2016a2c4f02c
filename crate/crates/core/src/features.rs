//! FAST-9 corners, BRIEF-style binary descriptors and Hamming matching.
//!
//! Keypoint coordinates are pixel-index coordinates: the center of pixel
//! `(col, row)` is `(col as f64, row as f64)`. Detected corners are refined
//! to subpixel precision; descriptors sample at the rounded position.

use std::sync::OnceLock;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame_io::LumaFrame;

pub const DEFAULT_FAST_THRESHOLD: f64 = 0.08;
pub const DEFAULT_MAX_KEYPOINTS: usize = 1000;
pub const DEFAULT_RATIO: f64 = 0.8;

/// Keypoints closer than this to any edge are dropped, and descriptors refuse them.
pub const BORDER: usize = 8;
const MIN_FRAME: usize = 16;

pub const DESCRIPTOR_BITS: usize = 256;
const PATCH_RADIUS: i32 = 7;

/// Bresenham circle of radius 3, clockwise from twelve o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];
const ARC: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub response: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor {
    pub bits: [u64; 4],
}

impl Descriptor {
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub threshold: f64,
    pub max_count: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_FAST_THRESHOLD,
            max_count: DEFAULT_MAX_KEYPOINTS,
        }
    }
}

/// Returns the FAST score at `(x, y)` or 0 when the pixel is not a corner.
fn fast_response(f: &LumaFrame, x: usize, y: usize, t: f64) -> f64 {
    let c = f.get(x, y);
    let mut ring = [0.0f64; 16];
    for (v, &(dx, dy)) in ring.iter_mut().zip(CIRCLE.iter()) {
        *v = f.get((x as i32 + dx) as usize, (y as i32 + dy) as usize);
    }
    let mut best = 0.0f64;
    for sign in [1.0, -1.0] {
        // sign = +1 checks brighter, -1 darker
        let diff = |v: f64| sign * (v - c) - t;
        let mut run = 0usize;
        let mut longest = 0usize;
        for k in 0..32 {
            if diff(ring[k % 16]) > 0.0 {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        if longest.min(16) >= ARC {
            let score: f64 = ring.iter().map(|&v| diff(v).max(0.0)).sum();
            best = best.max(score);
        }
    }
    best
}

/// FAST-9 detection with 3x3 non-maximum suppression.
///
/// Result is sorted by response (descending, ties in raster order) and
/// truncated to `params.max_count`.
pub fn detect_corners(f: &LumaFrame, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    let (w, h) = (f.width(), f.height());
    if w < MIN_FRAME || h < MIN_FRAME {
        return Err(Error::FrameTooSmall {
            width: w,
            height: h,
            min: MIN_FRAME,
        });
    }
    if params.max_count == 0 {
        return Err(Error::InvalidParams("max_count must be at least 1".into()));
    }
    // Responses are computed one pixel beyond the kept region so suppression
    // sees every neighbor of a kept pixel.
    let lo = BORDER - 1;
    let mut resp = vec![0.0f64; w * h];
    for y in lo..h - lo {
        for x in lo..w - lo {
            resp[y * w + x] = fast_response(f, x, y, params.threshold);
        }
    }

    let mut kps = Vec::new();
    for y in BORDER..h - BORDER {
        for x in BORDER..w - BORDER {
            let r = resp[y * w + x];
            if r <= 0.0 {
                continue;
            }
            let idx = y * w + x;
            let mut is_max = true;
            'nb: for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    let nidx = ny * w + nx;
                    if nidx == idx {
                        continue;
                    }
                    let nr = resp[nidx];
                    if nr > r || (nr == r && nidx < idx) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                let (ox, oy) = subpixel_offset(f, x, y);
                let (kx, ky) = (x as f64 + ox, y as f64 + oy);
                if inside_border(kx, w) && inside_border(ky, h) {
                    kps.push(Keypoint {
                        x: kx,
                        y: ky,
                        response: r,
                    });
                }
            }
        }
    }
    kps.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    kps.truncate(params.max_count);
    Ok(kps)
}

fn inside_border(v: f64, dim: usize) -> bool {
    let c = v.round();
    c >= BORDER as f64 && c < (dim - BORDER) as f64
}

const REFINE_RADIUS: i32 = 3;
/// Largest accepted distance (per axis) between a detection and its refined
/// position. With the window radius and the gradient stencil this stays
/// inside the excluded border.
const MAX_SHIFT: f64 = 4.0;
const REFINE_STEPS: usize = 4;
/// Offsets are snapped to this grid so integer shifts move keypoints exactly.
const REFINE_GRID: f64 = 256.0;

/// Least-squares point where the edge tangents in a 7x7 window meet: solves
/// `sum(g g^T) q = sum(g g^T p)` with central-difference gradients `g`,
/// re-centering the window on the estimate until it settles. Falls back to
/// the pixel center when the system is ill-conditioned or the solution moves
/// more than `MAX_SHIFT` pixels.
fn subpixel_offset(f: &LumaFrame, x: usize, y: usize) -> (f64, f64) {
    let (mut cx, mut cy) = (0i32, 0i32);
    let mut q = (0.0, 0.0);
    for _ in 0..REFINE_STEPS {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for dy in cy - REFINE_RADIUS..=cy + REFINE_RADIUS {
            for dx in cx - REFINE_RADIUS..=cx + REFINE_RADIUS {
                let (px, py) = ((x as i32 + dx) as usize, (y as i32 + dy) as usize);
                let gx = 0.5 * (f.get(px + 1, py) - f.get(px - 1, py));
                let gy = 0.5 * (f.get(px, py + 1) - f.get(px, py - 1));
                let (xx, xy, yy) = (gx * gx, gx * gy, gy * gy);
                a11 += xx;
                a12 += xy;
                a22 += yy;
                b1 += xx * dx as f64 + xy * dy as f64;
                b2 += xy * dx as f64 + yy * dy as f64;
            }
        }
        let det = a11 * a22 - a12 * a12;
        let trace = a11 + a22;
        if !(det > 1e-3 * trace * trace) {
            return (0.0, 0.0);
        }
        q = ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);
        if q.0.abs() > MAX_SHIFT || q.1.abs() > MAX_SHIFT {
            return (0.0, 0.0);
        }
        let next = (q.0.round() as i32, q.1.round() as i32);
        if next == (cx, cy) {
            break;
        }
        (cx, cy) = next;
    }
    let snap = |v: f64| (v * REFINE_GRID).round() / REFINE_GRID;
    (snap(q.0), snap(q.1))
}

/// A test-point pair `(px, py, qx, qy)` relative to the keypoint.
pub type SamplePair = (i8, i8, i8, i8);

/// Seed the shipped sampling pattern was drawn from.
pub const PATTERN_SEED: u64 = 0x0B21_EF5E_ED00_0001;
const PATTERN_FILE: &str = include_str!("../data/brief_pattern_v1.txt");

/// Draws the 256 test pairs from `seed`: ChaCha8 seeded via `seed_from_u64`,
/// each coordinate `next_u64() % 15 - 7`, pairs with `p == q` redrawn.
pub fn generate_pattern(seed: u64) -> Vec<SamplePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (2 * PATCH_RADIUS + 1) as u64;
    let mut draw = move || ((rng.next_u64() % span) as i32 - PATCH_RADIUS) as i8;
    let mut pairs = Vec::with_capacity(DESCRIPTOR_BITS);
    while pairs.len() < DESCRIPTOR_BITS {
        let p = (draw(), draw(), draw(), draw());
        if (p.0, p.1) != (p.2, p.3) {
            pairs.push(p);
        }
    }
    pairs
}

fn parse_pattern(text: &str) -> Vec<SamplePair> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<i8> = l
                .split_whitespace()
                .map(|t| t.parse().expect("pattern file: bad integer"))
                .collect();
            assert_eq!(v.len(), 4, "pattern file: expected 4 offsets per line");
            (v[0], v[1], v[2], v[3])
        })
        .collect()
}

/// The versioned sampling pattern shipped in `data/brief_pattern_v1.txt`.
pub fn sampling_pattern() -> &'static [SamplePair] {
    static PATTERN: OnceLock<Vec<SamplePair>> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let p = parse_pattern(PATTERN_FILE);
        assert_eq!(p.len(), DESCRIPTOR_BITS, "pattern file must hold 256 pairs");
        p
    })
}

/// 256-bit descriptors; bit i is set iff `I(p_i) < I(q_i)`.
pub fn describe(f: &LumaFrame, kps: &[Keypoint]) -> Result<Vec<Descriptor>> {
    let pattern = sampling_pattern();
    let (w, h) = (f.width() as i64, f.height() as i64);
    let b = BORDER as i64;
    kps.iter()
        .map(|kp| {
            let (cx, cy) = (kp.x.round() as i64, kp.y.round() as i64);
            if !(kp.x.is_finite() && kp.y.is_finite()) || cx < b || cy < b || cx > w - 1 - b || cy > h - 1 - b {
                return Err(Error::KeypointNearBorder { x: kp.x, y: kp.y });
            }
            let at = |dx: i8, dy: i8| f.get((cx + dx as i64) as usize, (cy + dy as i64) as usize);
            let mut d = Descriptor { bits: [0; 4] };
            for (i, &(px, py, qx, qy)) in pattern.iter().enumerate() {
                if at(px, py) < at(qx, qy) {
                    d.bits[i / 64] |= 1 << (i % 64);
                }
            }
            Ok(d)
        })
        .collect()
}

fn nearest_two(d: &Descriptor, set: &[Descriptor]) -> (usize, u32, u32) {
    let mut best = (usize::MAX, u32::MAX, u32::MAX);
    for (j, e) in set.iter().enumerate() {
        let dist = d.hamming(e);
        if dist < best.1 {
            best = (j, dist, best.1);
        } else if dist < best.2 {
            best.2 = dist;
        }
    }
    best
}

/// Ratio-test plus mutual-best matching.
///
/// A pair `(i, j)` is kept when `j` is the nearest neighbor of `a[i]` in `b`,
/// `i` is the nearest neighbor of `b[j]` in `a` (first index on ties), and the
/// nearest distance is strictly below `ratio` times the second nearest. With a
/// single candidate in `b` the ratio test passes.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f64) -> Result<Vec<Match>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParams(format!("ratio {ratio} outside (0, 1]")));
    }
    let back: Vec<usize> = b.iter().map(|d| nearest_two(d, a).0).collect();
    let mut out = Vec::new();
    for (i, d) in a.iter().enumerate() {
        let (j, d1, d2) = nearest_two(d, b);
        let passes_ratio = d2 == u32::MAX || (d1 as f64) < ratio * d2 as f64;
        if passes_ratio && back[j] == i {
            out.push(Match {
                index_a: i,
                index_b: j,
                distance: d1,
            });
        }
    }
    Ok(out)
}
