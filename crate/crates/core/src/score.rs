//! CameraScore: summed squared Frobenius distance between per-pair
//! homographies of two motion chains, divided by the frame count.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_io::FrameSequence;
use crate::homography::{PairConfig, PairStatus};
use crate::motion::{extract_motion_chain, MotionChain, PairEntry};

/// Minimum fraction of pairs that must be compared for a valid score.
pub const COVERAGE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreOptions {
    /// Return a report even when coverage is below the threshold.
    pub allow_low_coverage: bool,
    /// Map generated pairs onto reference pairs by nearest fraction when the
    /// chains have different lengths.
    pub resample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDistance {
    pub i: usize,
    /// Squared Frobenius distance; `None` when either side failed.
    pub distance: Option<f64>,
    /// Generated pair index compared against reference pair `i`.
    pub generated_index: usize,
    pub reference_status: &'static str,
    pub generated_status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraScoreReport {
    pub score: f64,
    /// Mean distance over compared pairs; absent when nothing was compared.
    pub mean_over_pairs: Option<f64>,
    pub coverage: f64,
    pub compared_pairs: usize,
    pub frame_count: usize,
    pub per_pair: Vec<PairDistance>,
}

impl CameraScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Generated pair index for reference pair `i` when the reference has `n_ref`
/// frames and the generated chain `n_gen`.
pub fn resampled_index(i: usize, n_ref: usize, n_gen: usize) -> usize {
    let j = (i as f64 * (n_gen - 1) as f64 / (n_ref - 1) as f64).round() as usize;
    j.clamp(1, n_gen - 1)
}

pub fn camera_score(
    reference: &MotionChain,
    generated: &MotionChain,
    opts: &ScoreOptions,
) -> Result<CameraScoreReport> {
    let (n_ref, n_gen) = (reference.frame_count(), generated.frame_count());
    if n_ref != n_gen && !opts.resample {
        return Err(Error::LengthMismatch {
            reference: n_ref - 1,
            generated: n_gen - 1,
        });
    }
    let status = |e: &PairEntry| e.status.as_str();
    let mut per_pair = Vec::with_capacity(n_ref - 1);
    let mut sum = 0.0;
    let mut compared = 0usize;
    for r in reference.pairs() {
        let j = resampled_index(r.index, n_ref, n_gen);
        let g = &generated.pairs()[j - 1];
        let distance = match (r.status, g.status, r.homography, g.homography) {
            (PairStatus::Ok, PairStatus::Ok, Some(hr), Some(hg)) => {
                let d = (hr.matrix() - hg.matrix()).norm_squared();
                sum += d;
                compared += 1;
                Some(d)
            }
            _ => None,
        };
        per_pair.push(PairDistance {
            i: r.index,
            distance,
            generated_index: j,
            reference_status: status(r),
            generated_status: status(g),
        });
    }
    let coverage = compared as f64 / (n_ref - 1) as f64;
    if coverage < COVERAGE_THRESHOLD && !opts.allow_low_coverage {
        return Err(Error::LowCoverage {
            coverage,
            threshold: COVERAGE_THRESHOLD,
        });
    }
    Ok(CameraScoreReport {
        score: sum / n_ref as f64,
        mean_over_pairs: (compared > 0).then(|| sum / compared as f64),
        coverage,
        compared_pairs: compared,
        frame_count: n_ref,
        per_pair,
    })
}

/// Extracts both chains (concurrently) and scores them.
pub fn camera_score_videos(
    reference: &FrameSequence,
    generated: &FrameSequence,
    config: &PairConfig,
    opts: &ScoreOptions,
) -> Result<CameraScoreReport> {
    if reference.len() != generated.len() && !opts.resample {
        return Err(Error::LengthMismatch {
            reference: reference.len().saturating_sub(1),
            generated: generated.len().saturating_sub(1),
        });
    }
    let (r, g) = rayon::join(
        || extract_motion_chain(reference, config),
        || extract_motion_chain(generated, config),
    );
    camera_score(&r?, &g?, opts)
}
