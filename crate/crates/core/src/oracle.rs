//! Ground-truth assets: procedural textures and sequences warped by known
//! homography chains.

use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{Frame, FrameSequence};
use crate::homography::{CoordinateSpace, Homography};
use crate::motion::MotionChain;
use crate::warp::synthesize_pseudo_video;

const MIN_TEXTURE: usize = 32;

/// Lattice spacing (pixels) and weight of each noise octave.
const OCTAVES: [(usize, f64); 4] = [(37, 1.0), (23, 0.9), (13, 0.8), (8, 0.7)];
/// Width in pixels of the intensity ramp across a cell edge.
const EDGE_RAMP: f64 = 3.0;
/// Gain applied around mid-gray; averaging octaves compresses the range.
const CONTRAST: f64 = 2.0;
const TINT_CELL: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OracleMotion {
    /// Per-step translation in normalized units.
    Pan { dx: f64, dy: f64 },
    /// Per-step isotropic scale about the frame center.
    Zoom { scale: f64 },
    /// Per-step rotation (radians) about the frame center, in pixel space.
    Rotate { theta: f64 },
    /// Explicit per-step normalized matrices, row-major; exactly `N - 1` of them.
    Script { steps: Vec<[f64; 9]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub motion: OracleMotion,
    pub texture_seed: u64,
}

struct Lattice {
    cell: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn new(w: usize, h: usize, cell: usize, rng: &mut ChaCha8Rng) -> Self {
        let cols = w / cell + 3;
        let rows = h / cell + 3;
        let values = (0..cols * rows).map(|_| rng.random::<f64>()).collect();
        Self { cell, cols, values }
    }

    /// Interpolates between lattice values placed at cell centers. `ramp` is
    /// the width in pixels of the transition across a cell boundary; the
    /// interior of each cell is flat.
    fn sample(&self, x: usize, y: usize, ramp: f64) -> f64 {
        let cell = self.cell as f64;
        let weight = |p: usize| {
            let u = (p as f64 + 0.5) / cell + 0.5;
            let i = u.floor();
            let t = ((u - i - 0.5) * cell / ramp + 0.5).clamp(0.0, 1.0);
            (i as usize, t * t * (3.0 - 2.0 * t))
        };
        let ((gx, tx), (gy, ty)) = (weight(x), weight(y));
        let v = |i: usize, j: usize| self.values[j * self.cols + i];
        let top = v(gx, gy) * (1.0 - tx) + v(gx + 1, gy) * tx;
        let bottom = v(gx, gy + 1) * (1.0 - tx) + v(gx + 1, gy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Multi-octave value noise with steep interpolation.
///
/// Cells are flat with short ramps at their edges, so lattice vertices are
/// well-localized corners that survive resampling. A shared intensity field
/// is tinted per channel by a coarse smooth field. Same seed, same bytes.
pub fn generate_texture(width: usize, height: usize, seed: u64) -> Result<Frame> {
    if width < MIN_TEXTURE || height < MIN_TEXTURE {
        return Err(Error::InvalidSpec(format!(
            "texture must be at least {MIN_TEXTURE}x{MIN_TEXTURE}, got {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattices: Vec<Lattice> = OCTAVES
        .iter()
        .map(|&(cell, _)| Lattice::new(width, height, cell, &mut rng))
        .collect();
    let tints: Vec<Lattice> = (0..3)
        .map(|_| Lattice::new(width, height, TINT_CELL, &mut rng))
        .collect();
    let total: f64 = OCTAVES.iter().map(|o| o.1).sum();

    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let v: f64 = lattices
                .iter()
                .zip(OCTAVES.iter())
                .map(|(l, &(_, weight))| weight * l.sample(x, y, EDGE_RAMP))
                .sum::<f64>()
                / total;
            let v = (0.5 + CONTRAST * (v - 0.5)).clamp(0.0, 1.0);
            for tint in &tints {
                let c = 0.1 + 0.9 * v * (0.7 + 0.3 * tint.sample(x, y, TINT_CELL as f64));
                pixels.push((c * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(width, height, pixels)
}

fn about_center(linear: [[f64; 2]; 2], cx: f64, cy: f64) -> Matrix3<f64> {
    let [[a, b], [c, d]] = linear;
    Matrix3::new(a, b, cx - a * cx - b * cy, c, d, cy - c * cx - d * cy, 0.0, 0.0, 1.0)
}

impl OracleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(Error::InvalidSpec(format!("frame_count {} < 2", self.frame_count)));
        }
        if self.width < MIN_TEXTURE || self.height < MIN_TEXTURE {
            return Err(Error::InvalidSpec(format!(
                "frames must be at least {MIN_TEXTURE}x{MIN_TEXTURE}"
            )));
        }
        match &self.motion {
            OracleMotion::Pan { dx, dy } if !(dx.is_finite() && dy.is_finite()) => {
                Err(Error::InvalidSpec("pan offsets must be finite".into()))
            }
            OracleMotion::Zoom { scale } if !(scale.is_finite() && *scale > 0.0) => {
                Err(Error::InvalidSpec(format!("zoom scale {scale} must be positive")))
            }
            OracleMotion::Rotate { theta } if !theta.is_finite() => {
                Err(Error::InvalidSpec("rotation must be finite".into()))
            }
            OracleMotion::Script { steps } if steps.len() != self.frame_count - 1 => Err(Error::InvalidSpec(format!(
                "script has {} steps, {} frames need {}",
                steps.len(),
                self.frame_count,
                self.frame_count - 1
            ))),
            _ => Ok(()),
        }
    }

    /// Ground-truth per-step homography for step `i` (1-based).
    fn step(&self, i: usize) -> Result<Homography> {
        let n = CoordinateSpace::Normalized;
        let invalid = |e: Error| Error::InvalidSpec(format!("step {i}: {e}"));
        match &self.motion {
            OracleMotion::Pan { dx, dy } => Ok(Homography::translation(*dx, *dy, n)),
            OracleMotion::Zoom { scale } => {
                Homography::new(about_center([[*scale, 0.0], [0.0, *scale]], 0.5, 0.5), n).map_err(invalid)
            }
            OracleMotion::Rotate { theta } => {
                let (c, s) = (theta.cos(), theta.sin());
                let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
                Homography::new(about_center([[c, -s], [s, c]], cx, cy), CoordinateSpace::Pixel)
                    .and_then(|h| h.to_normalized(self.width, self.height))
                    .map_err(invalid)
            }
            OracleMotion::Script { steps } => Homography::from_row_major(&steps[i - 1], n).map_err(invalid),
        }
    }

    pub fn ground_truth(&self) -> Result<MotionChain> {
        self.validate()?;
        let steps = (1..self.frame_count)
            .map(|i| self.step(i))
            .collect::<Result<Vec<_>>>()?;
        MotionChain::from_homographies(self.width, self.height, &steps)
    }
}

/// Renders the texture and warps it by the cumulative ground-truth motion.
/// The returned chain holds the exact per-step matrices.
pub fn generate_sequence(spec: &OracleSpec) -> Result<(FrameSequence, MotionChain)> {
    let truth = spec.ground_truth()?;
    let texture = generate_texture(spec.width, spec.height, spec.texture_seed)?;
    let video = synthesize_pseudo_video(&texture, &truth, false)?;
    Ok((video.frames, truth))
}
