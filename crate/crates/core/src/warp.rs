//! Inverse-mapping bilinear warps and pseudo-video synthesis.
//!
//! Output pixel `(x, y)` is sampled at its center `(x + 0.5, y + 0.5)` mapped
//! through the inverse homography. Samples that land outside the source are
//! black and flagged invalid in the [`ValidityMask`].

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame_io::{encode_pgm, Frame, FrameSequence};
use crate::homography::{CoordinateSpace, Homography};
use crate::motion::MotionChain;

/// Slack, in source pixels, when deciding whether a sample is inside.
const INSIDE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ValidityMask {
    pub fn all_valid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.bits.len() as f64
    }

    /// `P5` bytes, 255 = valid.
    pub fn to_pgm(&self) -> Vec<u8> {
        let v: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        encode_pgm(self.width, self.height, &v)
    }
}

/// Warps `src` by a normalized-coordinate homography into an `out_w x out_h` frame.
pub fn warp_frame(src: &Frame, h: &Homography, out_w: usize, out_h: usize) -> Result<(Frame, ValidityMask)> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidFrame(format!("zero output size {out_w}x{out_h}")));
    }
    let (sw, sh) = (src.width(), src.height());
    let h_norm = match h.space() {
        CoordinateSpace::Normalized => *h.matrix(),
        CoordinateSpace::Pixel => *h.to_normalized(sw, sh)?.matrix(),
    };
    let inv = h_norm.try_inverse().ok_or(Error::SingularHomography)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHomography);
    }
    // output pixels -> output normalized -> source normalized -> source pixels
    let to_src = Matrix3::new(sw as f64, 0.0, 0.0, 0.0, sh as f64, 0.0, 0.0, 0.0, 1.0)
        * inv
        * Matrix3::new(
            1.0 / out_w as f64,
            0.0,
            0.0,
            0.0,
            1.0 / out_h as f64,
            0.0,
            0.0,
            0.0,
            1.0,
        );

    let px = src.pixels();
    let rows: Vec<(Vec<u8>, Vec<bool>)> = (0..out_h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0u8; out_w * 3];
            let mut valid = vec![false; out_w];
            for x in 0..out_w {
                let v = to_src * Vector3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
                if !(v.z > 0.0) {
                    continue;
                }
                let fx = v.x / v.z - 0.5;
                let fy = v.y / v.z - 0.5;
                let inside = fx >= -INSIDE_EPS
                    && fy >= -INSIDE_EPS
                    && fx <= (sw - 1) as f64 + INSIDE_EPS
                    && fy <= (sh - 1) as f64 + INSIDE_EPS;
                if !inside {
                    continue;
                }
                let fx = fx.clamp(0.0, (sw - 1) as f64);
                let fy = fy.clamp(0.0, (sh - 1) as f64);
                let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
                let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
                let at = |xx: usize, yy: usize, c: usize| px[(yy * sw + xx) * 3 + c] as f64;
                for c in 0..3 {
                    let top = at(x0, y0, c) * (1.0 - ax) + at(x1, y0, c) * ax;
                    let bottom = at(x0, y1, c) * (1.0 - ax) + at(x1, y1, c) * ax;
                    let value = top * (1.0 - ay) + bottom * ay;
                    row[x * 3 + c] = value.round().clamp(0.0, 255.0) as u8;
                }
                valid[x] = true;
            }
            (row, valid)
        })
        .collect();

    let mut pixels = Vec::with_capacity(out_w * out_h * 3);
    let mut bits = Vec::with_capacity(out_w * out_h);
    for (row, valid) in rows {
        pixels.extend_from_slice(&row);
        bits.extend_from_slice(&valid);
    }
    Ok((
        Frame::new(out_w, out_h, pixels)?,
        ValidityMask {
            width: out_w,
            height: out_h,
            bits,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoVideo {
    pub frames: FrameSequence,
    pub masks: Vec<ValidityMask>,
    /// Pair indices whose failed estimate was replaced by identity.
    pub substituted_pairs: Vec<usize>,
}

/// Builds the pseudo-weak video: frame 1 is `image`, frame `i + 1` is `image`
/// warped by the cumulative motion `compose(1, i + 1)`.
///
/// Each frame resamples the original image once. With `skip_gaps`, failed
/// pairs act as identity and are listed in `substituted_pairs`; otherwise a
/// failed pair is a `GapInChain` error.
pub fn synthesize_pseudo_video(image: &Frame, chain: &MotionChain, skip_gaps: bool) -> Result<PseudoVideo> {
    let (chain, substituted_pairs) = if skip_gaps {
        chain.with_identity_gaps()
    } else {
        (chain.clone(), Vec::new())
    };
    let n = chain.frame_count();
    let cumulative = (1..=n).map(|k| chain.compose(1, k)).collect::<Result<Vec<_>>>()?;
    let (w, h) = (image.width(), image.height());
    let warped = cumulative
        .par_iter()
        .enumerate()
        .map(|(k, hk)| {
            if k == 0 {
                Ok((image.clone(), ValidityMask::all_valid(w, h)))
            } else {
                warp_frame(image, hk, w, h)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (frames, masks): (Vec<_>, Vec<_>) = warped.into_iter().unzip();
    Ok(PseudoVideo {
        frames: FrameSequence::new(frames)?,
        masks,
        substituted_pairs,
    })
}
