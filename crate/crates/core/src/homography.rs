//! Planar homographies: canonical gauge, normalized DLT, RANSAC, and the
//! frame-pair estimation pipeline.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, DetectorParams};
use crate::frame_io::{to_luma, Frame};

pub type Point = (f64, f64);
pub type PointPair = (Point, Point);

/// Below this magnitude `h33` is treated as zero when fixing the gauge.
const H33_EPS: f64 = 1e-8;
const COLLINEAR_EPS: f64 = 1e-9;
const W_EPS: f64 = 1e-12;
/// A RANSAC model must gather at least this many inliers.
pub const MIN_CONSENSUS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateSpace {
    Pixel,
    Normalized,
}

/// Returns the canonical representative of `m`'s projective class:
/// `m[2][2] = 1` when `|m[2][2]| > 1e-8`, else unit Frobenius norm with the
/// largest-magnitude entry positive.
pub fn canonicalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let h33 = m[(2, 2)];
    if h33.abs() > H33_EPS {
        if h33 == 1.0 {
            return *m;
        }
        return m / h33;
    }
    let norm = m.norm();
    let mut out = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        *m
    } else {
        m / norm
    };
    // first entry of largest magnitude, row-major
    let mut lead = out[(0, 0)];
    for r in 0..3 {
        for c in 0..3 {
            if out[(r, c)].abs() > lead.abs() {
                lead = out[(r, c)];
            }
        }
    }
    if lead < 0.0 {
        out = -out;
    }
    out
}

/// An invertible 3x3 projective transform stored in canonical scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    space: CoordinateSpace,
}

impl Homography {
    pub fn new(m: Matrix3<f64>, space: CoordinateSpace) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite homography entry"));
        }
        if m.norm() == 0.0 {
            return Err(Error::SingularHomography);
        }
        let m = canonicalize(&m);
        let scale = m.norm();
        if m.determinant().abs() <= 1e-14 * scale.powi(3) {
            return Err(Error::SingularHomography);
        }
        Ok(Self { m, space })
    }

    pub fn identity(space: CoordinateSpace) -> Self {
        Self {
            m: Matrix3::identity(),
            space,
        }
    }

    pub fn from_row_major(v: &[f64; 9], space: CoordinateSpace) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(v), space)
    }

    pub fn translation(tx: f64, ty: f64, space: CoordinateSpace) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0),
            space,
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn space(&self) -> CoordinateSpace {
        self.space
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.m[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.m.try_inverse().ok_or(Error::SingularHomography)?;
        Self::new(inv, self.space)
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn after(&self, first: &Homography) -> Result<Self> {
        Self::new(self.m * first.m, self.space)
    }

    pub fn apply(&self, p: Point) -> Result<Point> {
        project(&self.m, p)
    }

    /// Pixel-space (`[0, w] x [0, h]`) to normalized (`[0, 1]^2`) coordinates.
    pub fn to_normalized(&self, width: usize, height: usize) -> Result<Self> {
        match self.space {
            CoordinateSpace::Normalized => Ok(*self),
            CoordinateSpace::Pixel => {
                let d = scaling(1.0 / width as f64, 1.0 / height as f64);
                let d_inv = scaling(width as f64, height as f64);
                Self::new(d * self.m * d_inv, CoordinateSpace::Normalized)
            }
        }
    }

    pub fn to_pixel(&self, width: usize, height: usize) -> Result<Self> {
        match self.space {
            CoordinateSpace::Pixel => Ok(*self),
            CoordinateSpace::Normalized => {
                let d = scaling(1.0 / width as f64, 1.0 / height as f64);
                let d_inv = scaling(width as f64, height as f64);
                Self::new(d_inv * self.m * d, CoordinateSpace::Pixel)
            }
        }
    }

    /// Largest absolute entry difference between canonical matrices.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.m - other.m).amax()
    }
}

fn scaling(sx: f64, sy: f64) -> Matrix3<f64> {
    Matrix3::new(sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0)
}

fn project(m: &Matrix3<f64>, p: Point) -> Result<Point> {
    let v = m * Vector3::new(p.0, p.1, 1.0);
    if v.z.abs() < W_EPS || !v.z.is_finite() {
        return Err(Error::PointAtInfinity);
    }
    Ok((v.x / v.z, v.y / v.z))
}

/// `sqrt(|Hp - p'|^2 + |H^-1 p' - p|^2)`.
pub fn symmetric_transfer_error(h: &Homography, pair: &PointPair) -> Result<f64> {
    let inv = h.m.try_inverse().ok_or(Error::SingularHomography)?;
    transfer_error_with(&h.m, &inv, pair)
}

fn transfer_error_with(m: &Matrix3<f64>, inv: &Matrix3<f64>, (p, q): &PointPair) -> Result<f64> {
    let fwd = project(m, *p)?;
    let back = project(inv, *q)?;
    let e = (fwd.0 - q.0).powi(2) + (fwd.1 - q.1).powi(2) + (back.0 - p.0).powi(2) + (back.1 - p.1).powi(2);
    Ok(e.sqrt())
}

/// Similarity taking `pts` to zero centroid and mean distance `sqrt(2)`.
fn hartley(pts: &[Point]) -> Result<(Matrix3<f64>, Vec<Point>)> {
    let n = pts.len() as f64;
    let (cx, cy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (cx, cy) = (cx / n, cy / n);
    let mean = pts
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::DegenerateConfiguration("coincident points"));
    }
    let s = std::f64::consts::SQRT_2 / mean;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts.iter().map(|p| (s * (p.0 - cx), s * (p.1 - cy))).collect();
    Ok((t, out))
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs()
}

fn check_minimal_configuration(pts: &[Point]) -> Result<()> {
    for i in 0..4 {
        let tri: Vec<Point> = (0..4).filter(|&k| k != i).map(|k| pts[k]).collect();
        if triangle_area(tri[0], tri[1], tri[2]) < COLLINEAR_EPS {
            return Err(Error::DegenerateConfiguration("three collinear points"));
        }
    }
    Ok(())
}

/// Normalized DLT.
///
/// Both point sets are Hartley-normalized, the stacked `2n x 9` system is
/// solved by SVD (right singular vector of the smallest singular value) and
/// the result is denormalized into the input coordinates. For a minimal set of
/// four pairs no three points on either side may be collinear; larger sets must
/// determine the system to full rank.
pub fn dlt_homography(pairs: &[PointPair], space: CoordinateSpace) -> Result<Homography> {
    let n = pairs.len();
    if n < 4 {
        return Err(Error::InsufficientMatches(n));
    }
    if pairs
        .iter()
        .any(|((a, b), (c, d))| !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()))
    {
        return Err(Error::NumericalFailure("non-finite coordinate"));
    }
    let src: Vec<Point> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point> = pairs.iter().map(|p| p.1).collect();
    let (t_src, src_n) = hartley(&src)?;
    let (t_dst, dst_n) = hartley(&dst)?;
    if n == 4 {
        check_minimal_configuration(&src_n)?;
        check_minimal_configuration(&dst_n)?;
    }

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (&(x, y), &(u, v))) in src_n.iter().zip(&dst_n).enumerate() {
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NumericalFailure("SVD did not converge"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let (largest, second_smallest) = (svd.singular_values[order[0]], svd.singular_values[order[7]]);
    if !(largest > 0.0) || second_smallest <= 1e-10 * largest {
        return Err(Error::DegenerateConfiguration("rank-deficient DLT system"));
    }
    let h = v_t.row(order[8]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or(Error::NumericalFailure("normalization not invertible"))?;
    Homography::new(t_dst_inv * hn * t_src, space).map_err(|e| match e {
        Error::SingularHomography => Error::DegenerateConfiguration("singular solution"),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// Symmetric transfer error bound, in the units of the correspondences.
    pub inlier_threshold: f64,
    pub confidence: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 3.0,
            confidence: 0.995,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "inlier_threshold {} must be positive",
                self.inlier_threshold
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParams(format!(
                "confidence {} outside (0, 1)",
                self.confidence
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub iterations: usize,
}

impl RansacFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Iterations needed to draw one all-inlier 4-sample with `confidence`,
/// given inlier ratio `w`.
pub fn adaptive_iterations(confidence: f64, w: f64) -> f64 {
    let p_good = w.powi(4);
    if p_good >= 1.0 {
        return 1.0;
    }
    if p_good <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - confidence).ln() / (1.0 - p_good).ln()).ceil().max(1.0)
}

fn score(m: &Matrix3<f64>, pairs: &[PointPair], threshold: f64) -> Option<(Vec<bool>, usize, f64)> {
    let inv = m.try_inverse()?;
    let mut mask = Vec::with_capacity(pairs.len());
    let (mut count, mut total) = (0usize, 0.0f64);
    for p in pairs {
        let e = transfer_error_with(m, &inv, p).unwrap_or(f64::INFINITY);
        let inlier = e < threshold;
        if inlier {
            count += 1;
            total += e;
        }
        mask.push(inlier);
    }
    Some((mask, count, total))
}

/// Robust homography fit.
///
/// Minimal 4-samples are drawn from a ChaCha8 stream seeded by
/// `params.seed`; the iteration bound shrinks adaptively with the best inlier
/// ratio seen so far. The winner is refit on all of its inliers and the mask is
/// reported against that final model.
pub fn ransac_homography(pairs: &[PointPair], params: &RansacParams, space: CoordinateSpace) -> Result<RansacFit> {
    params.validate()?;
    let n = pairs.len();
    if n < 4 {
        return Err(Error::InsufficientMatches(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, usize, f64)> = None;
    let mut bound = params.max_iterations as f64;
    let mut iterations = 0usize;
    let mut minimal = [((0.0, 0.0), (0.0, 0.0)); 4];

    while (iterations as f64) < bound {
        iterations += 1;
        for (slot, idx) in minimal.iter_mut().zip(sample(&mut rng, n, 4).iter()) {
            *slot = pairs[idx];
        }
        let Ok(model) = dlt_homography(&minimal, space) else {
            continue;
        };
        let Some((_, count, total)) = score(&model.m, pairs, params.inlier_threshold) else {
            continue;
        };
        let better = match &best {
            None => count > 0,
            Some((_, c, t)) => count > *c || (count == *c && total < *t),
        };
        if better {
            best = Some((model, count, total));
            let w = count as f64 / n as f64;
            bound = adaptive_iterations(params.confidence, w).min(params.max_iterations as f64);
        }
    }

    let (model, count, _) = best.ok_or(Error::NoConsensus(0))?;
    if count < MIN_CONSENSUS {
        return Err(Error::NoConsensus(count));
    }
    let (mask, _, _) = score(&model.m, pairs, params.inlier_threshold).expect("model is invertible");
    let inlier_pairs: Vec<PointPair> = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    let refit = dlt_homography(&inlier_pairs, space).unwrap_or(model);
    let (final_model, final_mask) = match score(&refit.m, pairs, params.inlier_threshold) {
        Some((m, c, _)) if c >= MIN_CONSENSUS => (refit, m),
        _ => (model, mask),
    };
    Ok(RansacFit {
        homography: final_model,
        inliers: final_mask,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairStatus {
    Ok,
    InsufficientMatches,
    NoConsensus,
}

impl PairStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PairStatus::Ok => "Ok",
            PairStatus::InsufficientMatches => "InsufficientMatches",
            PairStatus::NoConsensus => "NoConsensus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Ok" => Some(PairStatus::Ok),
            "InsufficientMatches" => Some(PairStatus::InsufficientMatches),
            "NoConsensus" => Some(PairStatus::NoConsensus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairResult {
    pub status: PairStatus,
    /// Normalized-coordinate homography, present iff `status` is `Ok`.
    pub homography: Option<Homography>,
    pub inlier_count: usize,
    pub match_count: usize,
}

/// Detector and matcher settings used ahead of RANSAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub detector: DetectorParams,
    pub ratio: f64,
    pub ransac: RansacParams,
}

impl From<RansacParams> for PairConfig {
    fn from(ransac: RansacParams) -> Self {
        Self {
            detector: DetectorParams::default(),
            ratio: features::DEFAULT_RATIO,
            ransac,
        }
    }
}

/// detect → describe → match → RANSAC on one frame pair.
///
/// The returned homography maps frame `a` to frame `b` in normalized
/// coordinates. Keypoint pixel indices are shifted by half a pixel into
/// continuous image coordinates before fitting.
pub fn estimate_pair_homography(a: &Frame, b: &Frame, config: &PairConfig) -> Result<PairResult> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::MixedDimensions {
            file: "second frame of pair".into(),
            want_w: a.width(),
            want_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    config.ransac.validate()?;
    let (la, lb) = (to_luma(a), to_luma(b));
    let ka = features::detect_corners(&la, &config.detector)?;
    let kb = features::detect_corners(&lb, &config.detector)?;
    let failed = |status, inliers, matches| PairResult {
        status,
        homography: None,
        inlier_count: inliers,
        match_count: matches,
    };
    if ka.is_empty() || kb.is_empty() {
        return Ok(failed(PairStatus::InsufficientMatches, 0, 0));
    }
    let da = features::describe(&la, &ka)?;
    let db = features::describe(&lb, &kb)?;
    let matches = features::match_descriptors(&da, &db, config.ratio)?;
    let pairs: Vec<PointPair> = matches
        .iter()
        .map(|m| {
            let (p, q) = (ka[m.index_a], kb[m.index_b]);
            ((p.x + 0.5, p.y + 0.5), (q.x + 0.5, q.y + 0.5))
        })
        .collect();
    match ransac_homography(&pairs, &config.ransac, CoordinateSpace::Pixel) {
        Ok(fit) => Ok(PairResult {
            status: PairStatus::Ok,
            inlier_count: fit.inlier_count(),
            homography: Some(fit.homography.to_normalized(a.width(), a.height())?),
            match_count: pairs.len(),
        }),
        Err(Error::InsufficientMatches(_)) => Ok(failed(PairStatus::InsufficientMatches, 0, pairs.len())),
        Err(Error::NoConsensus(c)) => Ok(failed(PairStatus::NoConsensus, c, pairs.len())),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_h(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        loop {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let c = canonicalize(&m);
            if c.determinant().abs() > 1e-2 && c.amax() < 50.0 {
                return c;
            }
        }
    }

    fn apply(m: &Matrix3<f64>, p: Point) -> Point {
        project(m, p).unwrap()
    }

    #[test]
    fn canonical_gauge_and_idempotence() {
        let m = Matrix3::new(2.0, 0.0, 4.0, 0.0, 2.0, -6.0, 0.0, 0.0, 2.0);
        let c = canonicalize(&m);
        assert_eq!(c, Matrix3::new(1.0, 0.0, 2.0, 0.0, 1.0, -3.0, 0.0, 0.0, 1.0));
        assert_eq!(canonicalize(&c), c);

        let z = Matrix3::new(0.0, -3.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5, 0.0);
        let cz = canonicalize(&z);
        assert!((cz.norm() - 1.0).abs() < 1e-15);
        assert!(cz[(0, 1)] > 0.0);
        assert_eq!(canonicalize(&cz), cz);
    }

    #[test]
    fn singular_matrices_rejected() {
        let px = CoordinateSpace::Pixel;
        assert!(matches!(
            Homography::new(Matrix3::zeros(), px),
            Err(Error::SingularHomography)
        ));
        let rank2 = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(matches!(Homography::new(rank2, px), Err(Error::SingularHomography)));
        let nan = Matrix3::new(f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Homography::new(nan, px).is_err());
    }

    #[test]
    fn identity_from_fixed_corners() {
        let pts = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)];
        let pairs: Vec<PointPair> = pts.iter().map(|&p| (p, p)).collect();
        let h = dlt_homography(&pairs, CoordinateSpace::Pixel).unwrap();
        assert!((h.matrix() - Matrix3::identity()).amax() < 1e-12);
    }

    #[test]
    fn pure_translation() {
        let pts = [(1.0, 2.0), (30.0, 4.0), (25.0, 40.0), (3.0, 33.0)];
        let pairs: Vec<PointPair> = pts.iter().map(|&(x, y)| ((x, y), (x + 5.0, y - 3.0))).collect();
        let h = dlt_homography(&pairs, CoordinateSpace::Pixel).unwrap();
        let want = Matrix3::new(1.0, 0.0, 5.0, 0.0, 1.0, -3.0, 0.0, 0.0, 1.0);
        assert!((h.matrix() - want).amax() < 1e-9);
    }

    #[test]
    fn recovers_random_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let gt = random_h(&mut rng);
            let pairs: Vec<PointPair> = (0..8)
                .map(|_| {
                    let p = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    (p, project(&gt, p).unwrap_or((f64::NAN, f64::NAN)))
                })
                .collect();
            if pairs.iter().any(|(_, q)| !(q.0.abs() < 1e3 && q.1.abs() < 1e3)) {
                continue;
            }
            let h = dlt_homography(&pairs, CoordinateSpace::Normalized).unwrap();
            assert!((h.matrix() - gt).amax() < 1e-8, "{} vs {}", h.matrix(), gt);
            checked += 1;
        }
    }

    #[test]
    fn collinear_and_coincident_rejected() {
        let line: Vec<PointPair> = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (5.0, 0.0)]
            .iter()
            .map(|&p| (p, p))
            .collect();
        assert!(matches!(
            dlt_homography(&line, CoordinateSpace::Pixel),
            Err(Error::DegenerateConfiguration(_))
        ));
        let same: Vec<PointPair> = vec![((1.0, 1.0), (2.0, 2.0)); 6];
        assert!(matches!(
            dlt_homography(&same, CoordinateSpace::Pixel),
            Err(Error::DegenerateConfiguration(_))
        ));
        let all_on_line: Vec<PointPair> = (0..10).map(|i| ((i as f64, 2.0 * i as f64), (i as f64, 0.5))).collect();
        assert!(dlt_homography(&all_on_line, CoordinateSpace::Pixel).is_err());
    }

    #[test]
    fn transfer_error_cases() {
        let id = Homography::identity(CoordinateSpace::Pixel);
        assert_eq!(symmetric_transfer_error(&id, &((2.0, 3.0), (2.0, 3.0))).unwrap(), 0.0);
        let e = symmetric_transfer_error(&id, &((0.0, 0.0), (3.0, 4.0))).unwrap();
        assert!((e - 50f64.sqrt()).abs() < 1e-12);

        // w = x - 1 vanishes at x = 1
        let h = Homography::new(
            Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0),
            CoordinateSpace::Pixel,
        )
        .unwrap();
        assert!(matches!(
            symmetric_transfer_error(&h, &((1.0, 5.0), (0.0, 0.0))),
            Err(Error::PointAtInfinity)
        ));
    }

    fn grid_pairs(gt: &Matrix3<f64>, n: usize, rng: &mut ChaCha8Rng) -> Vec<PointPair> {
        (0..n)
            .map(|_| {
                let p = (rng.random_range(20.0..236.0), rng.random_range(20.0..236.0));
                (p, apply(gt, p))
            })
            .collect()
    }

    fn mild_h() -> Matrix3<f64> {
        Matrix3::new(1.02, 0.03, 4.0, -0.02, 0.98, -3.0, 2e-5, -1e-5, 1.0)
    }

    #[test]
    fn ransac_exact_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = mild_h();
        let pairs = grid_pairs(&gt, 100, &mut rng);
        let fit = ransac_homography(&pairs, &RansacParams::default(), CoordinateSpace::Pixel).unwrap();
        assert_eq!(fit.inlier_count(), 100);
        assert!((fit.homography.matrix() - gt).amax() < 1e-8);
        let dlt = dlt_homography(&pairs, CoordinateSpace::Pixel).unwrap();
        assert!((fit.homography.matrix() - dlt.matrix()).amax() < 1e-8);
    }

    #[test]
    fn ransac_with_thirty_percent_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt = mild_h();
        let mut pairs = grid_pairs(&gt, 70, &mut rng);
        for _ in 0..30 {
            pairs.push((
                (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)),
                (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)),
            ));
        }
        let fit = ransac_homography(&pairs, &RansacParams::default(), CoordinateSpace::Pixel).unwrap();
        assert!(fit.inlier_count() >= 70);
        assert!(fit.inliers[..70].iter().all(|&b| b));
        let got = fit.homography.to_normalized(256, 256).unwrap();
        let want = Homography::new(gt, CoordinateSpace::Pixel)
            .unwrap()
            .to_normalized(256, 256)
            .unwrap();
        assert!(got.max_abs_diff(&want) < 1e-3);
    }

    #[test]
    fn ransac_rejects_tiny_input_and_no_consensus() {
        let pairs = vec![((0.0, 0.0), (0.0, 0.0)); 3];
        assert!(matches!(
            ransac_homography(&pairs, &RansacParams::default(), CoordinateSpace::Pixel),
            Err(Error::InsufficientMatches(3))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<PointPair> = (0..30)
            .map(|_| {
                (
                    (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)),
                    (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)),
                )
            })
            .collect();
        assert!(matches!(
            ransac_homography(&noise, &RansacParams::default(), CoordinateSpace::Pixel),
            Err(Error::NoConsensus(_))
        ));
    }

    #[test]
    fn ransac_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pairs = grid_pairs(&mild_h(), 60, &mut rng);
        for _ in 0..40 {
            pairs.push((
                (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)),
                (rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)),
            ));
        }
        let p = RansacParams {
            seed: 42,
            ..Default::default()
        };
        let a = ransac_homography(&pairs, &p, CoordinateSpace::Pixel).unwrap();
        let b = ransac_homography(&pairs, &p, CoordinateSpace::Pixel).unwrap();
        assert_eq!(
            a.homography.to_row_major().map(f64::to_bits),
            b.homography.to_row_major().map(f64::to_bits)
        );
        assert_eq!(a.inliers, b.inliers);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn adaptive_bound() {
        assert_eq!(adaptive_iterations(0.995, 1.0), 1.0);
        assert!(adaptive_iterations(0.995, 0.0).is_infinite());
        let n = adaptive_iterations(0.995, 0.5);
        // log(0.005)/log(1 - 1/16) = 82.1
        assert_eq!(n, 83.0);
    }

    #[test]
    fn params_validated() {
        let bad = RansacParams {
            confidence: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RansacParams {
            inlier_threshold: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RansacParams {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn normalized_conversion_round_trips() {
        let h = Homography::new(mild_h(), CoordinateSpace::Pixel).unwrap();
        let n = h.to_normalized(320, 240).unwrap();
        assert_eq!(n.space(), CoordinateSpace::Normalized);
        let back = n.to_pixel(320, 240).unwrap();
        assert!(back.max_abs_diff(&h) < 1e-12);
        // translation of 4 px on a 320-wide frame is 4/320 normalized
        let t = Homography::translation(4.0, 0.0, CoordinateSpace::Pixel)
            .to_normalized(320, 240)
            .unwrap();
        assert!((t.matrix()[(0, 2)] - 4.0 / 320.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn canonicalize_is_idempotent(v in proptest::array::uniform9(-10.0f64..10.0), s in prop_oneof![Just(0.0), -3.0f64..3.0]) {
                let mut m = Matrix3::from_row_slice(&v);
                m[(2, 2)] = s;
                let c = canonicalize(&m);
                prop_assert_eq!(canonicalize(&c), c);
            }

            #[test]
            fn dlt_is_similarity_equivariant(seed in 0u64..10_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let gt = random_h(&mut rng);
                let pairs: Vec<PointPair> = (0..12).map(|_| {
                    let p = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    (p, apply(&gt, p))
                }).collect();
                prop_assume!(pairs.iter().all(|(_, q)| q.0.abs() < 50.0 && q.1.abs() < 50.0));
                let sim = |rng: &mut ChaCha8Rng| {
                    let (th, s): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(0.5..2.0));
                    Matrix3::new(s * th.cos(), -s * th.sin(), rng.random_range(-5.0..5.0),
                                 s * th.sin(), s * th.cos(), rng.random_range(-5.0..5.0), 0.0, 0.0, 1.0)
                };
                let (s1, s2) = (sim(&mut rng), sim(&mut rng));
                let moved: Vec<PointPair> = pairs.iter().map(|(p, q)| (apply(&s1, *p), apply(&s2, *q))).collect();
                let h = dlt_homography(&pairs, CoordinateSpace::Pixel).unwrap();
                let hm = dlt_homography(&moved, CoordinateSpace::Pixel).unwrap();
                let predicted = canonicalize(&(s2 * h.matrix() * s1.try_inverse().unwrap()));
                prop_assert!((hm.matrix() - predicted).amax() < 1e-8);
            }
        }
    }
}
