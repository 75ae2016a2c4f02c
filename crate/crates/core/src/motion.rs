//! Motion chains: the per-pair homographies `H_1 .. H_{N-1}` of a video,
//! where `H_i` maps frame `i` to frame `i + 1` in normalized coordinates
//! (`x / width`, `y / height`).

use std::fmt::Write as _;

use nalgebra::{Matrix2, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::frame_io::FrameSequence;
use crate::homography::{estimate_pair_homography, CoordinateSpace, Homography, PairConfig, PairStatus};

pub const CHAIN_VERSION: u64 = 1;

/// Inlier/match count used for ground-truth entries that were never estimated.
pub const SENTINEL_COUNT: i64 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct PairEntry {
    /// 1-based pair index; the entry maps frame `index` to frame `index + 1`.
    pub index: usize,
    pub status: PairStatus,
    pub homography: Option<Homography>,
    pub inlier_count: i64,
    pub match_count: i64,
}

impl PairEntry {
    pub fn ok(index: usize, h: Homography, inliers: i64, matches: i64) -> Self {
        Self {
            index,
            status: PairStatus::Ok,
            homography: Some(h),
            inlier_count: inliers,
            match_count: matches,
        }
    }

    pub fn failed(index: usize, status: PairStatus, inliers: i64, matches: i64) -> Self {
        Self {
            index,
            status,
            homography: None,
            inlier_count: inliers,
            match_count: matches,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionChain {
    frame_count: usize,
    source_width: usize,
    source_height: usize,
    pairs: Vec<PairEntry>,
}

impl MotionChain {
    pub fn new(frame_count: usize, source_width: usize, source_height: usize, pairs: Vec<PairEntry>) -> Result<Self> {
        if frame_count < 2 {
            return Err(Error::TooFewFrames(frame_count));
        }
        if source_width == 0 || source_height == 0 {
            return Err(Error::SchemaViolation("source dimensions must be positive".into()));
        }
        if pairs.len() != frame_count - 1 {
            return Err(Error::SchemaViolation(format!(
                "{} pair entries for {} frames",
                pairs.len(),
                frame_count
            )));
        }
        for (k, e) in pairs.iter().enumerate() {
            if e.index != k + 1 {
                return Err(Error::SchemaViolation(format!("entry {} has index {}", k + 1, e.index)));
            }
            match (e.status, &e.homography) {
                (PairStatus::Ok, Some(h)) if h.space() == CoordinateSpace::Normalized => {}
                (PairStatus::Ok, Some(_)) => {
                    return Err(Error::SchemaViolation(format!(
                        "pair {} is not in normalized coordinates",
                        e.index
                    )))
                }
                (PairStatus::Ok, None) => {
                    return Err(Error::SchemaViolation(format!(
                        "pair {} is Ok without a homography",
                        e.index
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::SchemaViolation(format!(
                        "failed pair {} carries a homography",
                        e.index
                    )))
                }
                (_, None) => {}
            }
        }
        Ok(Self {
            frame_count,
            source_width,
            source_height,
            pairs,
        })
    }

    /// A chain whose every entry is a ground-truth matrix (counts set to the sentinel).
    pub fn from_homographies(source_width: usize, source_height: usize, hs: &[Homography]) -> Result<Self> {
        let pairs = hs
            .iter()
            .enumerate()
            .map(|(k, h)| PairEntry::ok(k + 1, *h, SENTINEL_COUNT, SENTINEL_COUNT))
            .collect();
        Self::new(hs.len() + 1, source_width, source_height, pairs)
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }

    pub fn pairs(&self) -> &[PairEntry] {
        &self.pairs
    }

    /// Entry for 1-based pair index `i`.
    pub fn pair(&self, i: usize) -> Option<&PairEntry> {
        i.checked_sub(1).and_then(|k| self.pairs.get(k))
    }

    pub fn ok_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.status == PairStatus::Ok).count()
    }

    pub fn is_complete(&self) -> bool {
        self.ok_count() == self.pairs.len()
    }

    /// Cumulative motion from frame `i` to frame `j` (1-based, `i <= j`):
    /// `H_{j-1} ... H_i`, identity when `i == j`.
    pub fn compose(&self, i: usize, j: usize) -> Result<Homography> {
        if i < 1 || i > j || j > self.frame_count {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                frames: self.frame_count,
            });
        }
        let mut acc = Homography::identity(CoordinateSpace::Normalized);
        for k in i..j {
            let h = self.pairs[k - 1].homography.as_ref().ok_or(Error::GapInChain(k))?;
            acc = h.after(&acc)?;
        }
        Ok(acc)
    }

    /// Same chain with every failed entry replaced by identity. Returns the
    /// substituted pair indices.
    pub fn with_identity_gaps(&self) -> (MotionChain, Vec<usize>) {
        let mut filled = Vec::new();
        let pairs = self
            .pairs
            .iter()
            .map(|e| {
                if e.status == PairStatus::Ok {
                    e.clone()
                } else {
                    filled.push(e.index);
                    PairEntry::ok(
                        e.index,
                        Homography::identity(CoordinateSpace::Normalized),
                        e.inlier_count,
                        e.match_count,
                    )
                }
            })
            .collect();
        let chain = MotionChain { pairs, ..self.clone() };
        (chain, filled)
    }
}

/// Estimates every consecutive pair of `seq`. Failed pairs are kept with their status.
pub fn extract_motion_chain(seq: &FrameSequence, config: &PairConfig) -> Result<MotionChain> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::TooFewFrames(n));
    }
    let frames = seq.frames();
    let pairs = (1..n)
        .into_par_iter()
        .map(|i| {
            let r = estimate_pair_homography(&frames[i - 1], &frames[i], config)?;
            Ok(PairEntry {
                index: i,
                status: r.status,
                homography: r.homography,
                inlier_count: r.inlier_count as i64,
                match_count: r.match_count as i64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MotionChain::new(n, seq.width(), seq.height(), pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Translation,
    Zoom,
    Rotation,
    Mixed,
    None,
}

impl MotionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionKind::Translation => "translation",
            MotionKind::Zoom => "zoom",
            MotionKind::Rotation => "rotation",
            MotionKind::Mixed => "mixed",
            MotionKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLabel {
    pub label: MotionKind,
    /// Displacement of the frame center, in normalized (width) units.
    pub translation: (f64, f64),
    pub scale: f64,
    /// Radians; positive turns +x toward +y.
    pub rotation: f64,
}

impl MotionLabel {
    pub fn translation_magnitude(&self) -> f64 {
        self.translation.0.hypot(self.translation.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionThresholds {
    pub translation: f64,
    pub scale: f64,
    pub rotation_degrees: f64,
    /// How many times larger (relative to its threshold) the winning component
    /// must be than every other component.
    pub dominance: f64,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self {
            translation: 0.005,
            scale: 0.01,
            rotation_degrees: 0.5,
            dominance: 2.0,
        }
    }
}

/// Labels a normalized-coordinate homography from a square frame.
pub fn classify_motion(h: &Homography, thresholds: &MotionThresholds) -> Result<MotionLabel> {
    classify_motion_with_aspect(h, 1.0, thresholds)
}

/// Labels a normalized-coordinate homography from a frame with
/// `aspect = height / width`.
///
/// The matrix is first rescaled so both axes use width units. The upper-left
/// 2x2 block is split by polar decomposition `A = R S`: rotation comes from
/// `R`, scale is `sqrt|det A|`, and translation is the displacement of the
/// frame center, so zooms and rotations about the center carry no translation.
pub fn classify_motion_with_aspect(h: &Homography, aspect: f64, thresholds: &MotionThresholds) -> Result<MotionLabel> {
    let iso = Matrix3::new(1.0, 0.0, 0.0, 0.0, aspect, 0.0, 0.0, 0.0, 1.0);
    let iso_inv = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0 / aspect, 0.0, 0.0, 0.0, 1.0);
    let m = iso * h.matrix() * iso_inv;
    let m = m / m[(2, 2)];
    let a = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);

    let svd = a.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFiniteDecomposition),
    };
    let r = u * v_t;
    let rotation = r[(1, 0)].atan2(r[(0, 0)]);
    let scale = a.determinant().abs().sqrt();

    let (cx, cy) = (0.5, 0.5 * aspect);
    let w = m[(2, 0)] * cx + m[(2, 1)] * cy + m[(2, 2)];
    let tx = (m[(0, 0)] * cx + m[(0, 1)] * cy + m[(0, 2)]) / w - cx;
    let ty = (m[(1, 0)] * cx + m[(1, 1)] * cy + m[(1, 2)]) / w - cy;

    if ![rotation, scale, tx, ty].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteDecomposition);
    }

    let rel = [
        (MotionKind::Translation, tx.hypot(ty) / thresholds.translation),
        (MotionKind::Zoom, (scale - 1.0).abs() / thresholds.scale),
        (
            MotionKind::Rotation,
            rotation.abs() / thresholds.rotation_degrees.to_radians(),
        ),
    ];
    let mut sorted = rel;
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (kind, strength) = sorted[0];
    let label = if strength <= 1.0 {
        MotionKind::None
    } else if sorted[1..].iter().all(|(_, s)| strength >= thresholds.dominance * s) {
        kind
    } else {
        MotionKind::Mixed
    };
    Ok(MotionLabel {
        label,
        translation: (tx, ty),
        scale,
        rotation,
    })
}

fn fmt_f64(v: f64) -> String {
    // 17 significant digits: one before the point, sixteen after
    format!("{v:.16e}")
}

/// Renders the versioned chain JSON.
pub fn serialize_chain(chain: &MotionChain) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"version\": {CHAIN_VERSION},");
    let _ = writeln!(s, "  \"frame_count\": {},", chain.frame_count);
    let _ = writeln!(s, "  \"source_width\": {},", chain.source_width);
    let _ = writeln!(s, "  \"source_height\": {},", chain.source_height);
    s.push_str("  \"pairs\": [");
    for (k, e) in chain.pairs.iter().enumerate() {
        s.push_str(if k == 0 { "\n" } else { ",\n" });
        let h = match &e.homography {
            Some(h) => format!(
                "[{}]",
                h.to_row_major()
                    .iter()
                    .map(|&v| fmt_f64(v))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            None => "null".to_string(),
        };
        let _ = write!(
            s,
            "    {{\"i\": {}, \"status\": \"{}\", \"h\": {}, \"inliers\": {}, \"matches\": {}}}",
            e.index,
            e.status.as_str(),
            h,
            e.inlier_count,
            e.match_count
        );
    }
    s.push_str(if chain.pairs.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
    s
}

fn violation(msg: impl Into<String>) -> Error {
    Error::SchemaViolation(msg.into())
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| violation(format!("missing field \"{key}\"")))
}

fn uint(obj: &serde_json::Map<String, Value>, key: &str) -> Result<u64> {
    field(obj, key)?
        .as_u64()
        .ok_or_else(|| violation(format!("\"{key}\" must be a nonnegative integer")))
}

fn count(obj: &serde_json::Map<String, Value>, key: &str) -> Result<i64> {
    let v = field(obj, key)?
        .as_i64()
        .ok_or_else(|| violation(format!("\"{key}\" must be an integer")))?;
    if v < SENTINEL_COUNT {
        return Err(violation(format!("\"{key}\" below -1")));
    }
    Ok(v)
}

/// Parses and validates chain JSON produced by [`serialize_chain`].
pub fn parse_chain(text: &str) -> Result<MotionChain> {
    let root: Value = serde_json::from_str(text).map_err(|e| violation(format!("invalid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| violation("top level must be an object"))?;
    let version = uint(obj, "version")?;
    if version != CHAIN_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHAIN_VERSION,
        });
    }
    let frame_count = uint(obj, "frame_count")? as usize;
    let width = uint(obj, "source_width")? as usize;
    let height = uint(obj, "source_height")? as usize;
    let raw_pairs = field(obj, "pairs")?
        .as_array()
        .ok_or_else(|| violation("\"pairs\" must be an array"))?;
    if frame_count < 2 || raw_pairs.len() != frame_count - 1 {
        return Err(violation(format!(
            "pairs array has {} entries, frame_count {} needs {}",
            raw_pairs.len(),
            frame_count,
            frame_count.saturating_sub(1)
        )));
    }

    let mut pairs = Vec::with_capacity(raw_pairs.len());
    for (k, raw) in raw_pairs.iter().enumerate() {
        let p = raw
            .as_object()
            .ok_or_else(|| violation(format!("pair entry {} must be an object", k + 1)))?;
        let index = uint(p, "i")? as usize;
        let status_text = field(p, "status")?
            .as_str()
            .ok_or_else(|| violation("\"status\" must be a string"))?;
        let status =
            PairStatus::parse(status_text).ok_or_else(|| violation(format!("unknown status \"{status_text}\"")))?;
        let homography = match p.get("h") {
            None | Some(Value::Null) => None,
            Some(Value::Array(vals)) => {
                if vals.len() != 9 {
                    return Err(violation(format!(
                        "pair {index}: \"h\" has {} numbers, expected 9",
                        vals.len()
                    )));
                }
                let mut m = [0.0; 9];
                for (slot, v) in m.iter_mut().zip(vals) {
                    *slot = v
                        .as_f64()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| violation(format!("pair {index}: non-numeric entry in \"h\"")))?;
                }
                Some(
                    Homography::from_row_major(&m, CoordinateSpace::Normalized)
                        .map_err(|e| violation(format!("pair {index}: {e}")))?,
                )
            }
            Some(_) => return Err(violation(format!("pair {index}: \"h\" must be an array or null"))),
        };
        pairs.push(PairEntry {
            index,
            status,
            homography,
            inlier_count: count(p, "inliers")?,
            match_count: count(p, "matches")?,
        });
    }
    MotionChain::new(frame_count, width, height, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const N: CoordinateSpace = CoordinateSpace::Normalized;

    fn about_center(a: Matrix2<f64>) -> Homography {
        let c = 0.5;
        let m = Matrix3::new(
            a[(0, 0)],
            a[(0, 1)],
            c - a[(0, 0)] * c - a[(0, 1)] * c,
            a[(1, 0)],
            a[(1, 1)],
            c - a[(1, 0)] * c - a[(1, 1)] * c,
            0.0,
            0.0,
            1.0,
        );
        Homography::new(m, N).unwrap()
    }

    fn zoom(s: f64) -> Homography {
        about_center(Matrix2::new(s, 0.0, 0.0, s))
    }

    fn rotation(t: f64) -> Homography {
        about_center(Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos()))
    }

    fn chain_of(hs: &[Homography]) -> MotionChain {
        MotionChain::from_homographies(64, 64, hs).unwrap()
    }

    #[test]
    fn compose_identity_and_translations() {
        let c = chain_of(&[
            Homography::translation(0.1, 0.0, N),
            Homography::translation(0.25, 0.0, N),
        ]);
        for k in 1..=3 {
            assert_eq!(*c.compose(k, k).unwrap().matrix(), Matrix3::identity());
        }
        let h = c.compose(1, 3).unwrap();
        assert!((h.matrix() - Homography::translation(0.35, 0.0, N).matrix()).amax() < 1e-9);
    }

    #[test]
    fn compose_zoom_steps() {
        let c = chain_of(&[zoom(1.05); 4]);
        let h = c.compose(1, 5).unwrap();
        // dense oracle: multiply the four matrices directly
        let z = *zoom(1.05).matrix();
        let dense = z * z * z * z;
        assert!((h.matrix() - dense).amax() < 1e-12);
        assert!((h.matrix()[(0, 0)] - 1.05f64.powi(4)).abs() < 1e-6);
        assert!((1.05f64.powi(4) - 1.2155).abs() < 1e-4);
    }

    #[test]
    fn compose_gap_and_range() {
        let mut pairs = chain_of(&[zoom(1.01); 3]).pairs().to_vec();
        pairs[1] = PairEntry::failed(2, PairStatus::NoConsensus, 3, 20);
        let c = MotionChain::new(4, 64, 64, pairs).unwrap();
        assert!(matches!(c.compose(1, 4), Err(Error::GapInChain(2))));
        assert!(c.compose(1, 2).is_ok());
        assert!(c.compose(3, 4).is_ok());
        assert!(matches!(c.compose(0, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(c.compose(3, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(c.compose(1, 5), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn classify_basic() {
        let t = MotionThresholds::default();
        assert_eq!(
            classify_motion(&Homography::identity(N), &t).unwrap().label,
            MotionKind::None
        );

        let z = classify_motion(&zoom(1.05), &t).unwrap();
        assert_eq!(z.label, MotionKind::Zoom);
        assert!((z.scale - 1.05).abs() < 1e-6);
        assert!(z.translation_magnitude() < 1e-12);

        let p = classify_motion(&Homography::translation(0.05, 0.0, N), &t).unwrap();
        assert_eq!(p.label, MotionKind::Translation);
        assert!((p.translation_magnitude() - 0.05).abs() < 1e-12);

        let r = classify_motion(&rotation(2f64.to_radians()), &t).unwrap();
        assert_eq!(r.label, MotionKind::Rotation);
        assert!((r.rotation - 2f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn classify_mixed() {
        let t = MotionThresholds::default();
        // zoom of 3% and pan of 0.015: both three times their threshold
        let h = Homography::translation(0.015, 0.0, N).after(&zoom(1.03)).unwrap();
        assert_eq!(classify_motion(&h, &t).unwrap().label, MotionKind::Mixed);
    }

    #[test]
    fn classify_inverse_negates_and_inverts() {
        let t = MotionThresholds::default();
        for th in [0.01, -0.2, 0.7] {
            let h = rotation(th);
            let a = classify_motion(&h, &t).unwrap();
            let b = classify_motion(&h.inverse().unwrap(), &t).unwrap();
            assert!((a.rotation + b.rotation).abs() < 1e-9);
        }
        for s in [0.9, 1.02, 1.3] {
            let h = zoom(s);
            let a = classify_motion(&h, &t).unwrap();
            let b = classify_motion(&h.inverse().unwrap(), &t).unwrap();
            assert!((a.scale - 1.0 / b.scale).abs() < 1e-9);
        }
    }

    #[test]
    fn classify_aspect_corrected_rotation() {
        // 2-degree rotation about the center of a 320x240 frame, built in pixels
        let th = 2f64.to_radians();
        let (w, h) = (320.0, 240.0);
        let (cx, cy) = (w / 2.0, h / 2.0);
        let (c, s) = (th.cos(), th.sin());
        let px = Matrix3::new(c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy, 0.0, 0.0, 1.0);
        let hn = Homography::new(px, CoordinateSpace::Pixel)
            .unwrap()
            .to_normalized(320, 240)
            .unwrap();
        let l = classify_motion_with_aspect(&hn, h / w, &MotionThresholds::default()).unwrap();
        assert_eq!(l.label, MotionKind::Rotation);
        assert!((l.rotation - th).abs() < 1e-12);
        assert!(l.translation_magnitude() < 1e-12);
    }

    fn random_chain(rng: &mut ChaCha8Rng) -> MotionChain {
        let n = rng.random_range(2..20);
        let pairs = (1..n)
            .map(|i| {
                if rng.random_bool(0.15) {
                    PairEntry::failed(
                        i,
                        PairStatus::NoConsensus,
                        rng.random_range(0..8),
                        rng.random_range(0..500),
                    )
                } else {
                    let mut m = Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0));
                    m[(2, 2)] = if rng.random_bool(0.1) {
                        0.0
                    } else {
                        rng.random_range(0.5..2.0)
                    };
                    let h = Homography::new(m, N).unwrap();
                    PairEntry::ok(i, h, rng.random_range(8..900), rng.random_range(8..900))
                }
            })
            .collect();
        MotionChain::new(n, rng.random_range(1..4000), rng.random_range(1..4000), pairs).unwrap()
    }

    #[test]
    fn round_trip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = random_chain(&mut rng);
            let back = parse_chain(&serialize_chain(&c)).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn fifteen_entry_round_trip() {
        let c = chain_of(&[zoom(1.02); 15]);
        let text = serialize_chain(&c);
        let back = parse_chain(&text).unwrap();
        assert_eq!(back.pairs().len(), 15);
        for (a, b) in c.pairs().iter().zip(back.pairs()) {
            let (ha, hb) = (a.homography.unwrap(), b.homography.unwrap());
            assert!(ha.max_abs_diff(&hb) < 1e-12);
        }
        assert!(text.contains("\"inliers\": -1"));
    }

    #[test]
    fn schema_violations() {
        let c = chain_of(&[zoom(1.02); 3]);
        let text = serialize_chain(&c);
        let mut v: Value = serde_json::from_str(&text).unwrap();

        let mut short = v.clone();
        short["frame_count"] = 5.into();
        assert!(matches!(
            parse_chain(&short.to_string()),
            Err(Error::SchemaViolation(_))
        ));

        let mut eight = v.clone();
        eight["pairs"][0]["h"].as_array_mut().unwrap().pop();
        assert!(matches!(
            parse_chain(&eight.to_string()),
            Err(Error::SchemaViolation(_))
        ));

        let mut bad_status = v.clone();
        bad_status["pairs"][1]["status"] = "Maybe".into();
        assert!(matches!(
            parse_chain(&bad_status.to_string()),
            Err(Error::SchemaViolation(_))
        ));

        let mut bad_index = v.clone();
        bad_index["pairs"][2]["i"] = 7.into();
        assert!(matches!(
            parse_chain(&bad_index.to_string()),
            Err(Error::SchemaViolation(_))
        ));

        let mut no_h = v.clone();
        no_h["pairs"][0]["h"] = Value::Null;
        assert!(matches!(parse_chain(&no_h.to_string()), Err(Error::SchemaViolation(_))));

        assert!(matches!(parse_chain("{not json"), Err(Error::SchemaViolation(_))));

        v["version"] = 2.into();
        assert!(matches!(
            parse_chain(&v.to_string()),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn failed_entries_serialize_as_null() {
        let pairs = vec![
            PairEntry::failed(1, PairStatus::InsufficientMatches, 0, 0),
            PairEntry::ok(2, Homography::identity(N), 100, 120),
        ];
        let c = MotionChain::new(3, 10, 10, pairs).unwrap();
        let text = serialize_chain(&c);
        assert!(text.contains("\"status\": \"InsufficientMatches\", \"h\": null"));
        assert_eq!(parse_chain(&text).unwrap(), c);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn serialize_parse_round_trip(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c = random_chain(&mut rng);
                let back = parse_chain(&serialize_chain(&c)).unwrap();
                for (a, b) in c.pairs().iter().zip(back.pairs()) {
                    prop_assert_eq!(a.status, b.status);
                    if let (Some(x), Some(y)) = (a.homography, b.homography) {
                        prop_assert!(x.max_abs_diff(&y) < 1e-12);
                    }
                }
            }
        }
    }
}
