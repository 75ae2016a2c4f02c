//! Low-rank adapter numerics: composition, stage-loss combinators, the
//! spatial/temporal orthogonality regularizer with its gradient, and the
//! guidance update on latents.

use nalgebra::DMatrix;
use ndarray::{ArrayD, Zip};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `W0 + B A` with `B: d x r`, `A: r x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankAdapter {
    w0: DMatrix<f64>,
    b: DMatrix<f64>,
    a: DMatrix<f64>,
}

fn shape(m: &DMatrix<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

impl LowRankAdapter {
    pub fn new(w0: DMatrix<f64>, b: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let (d, k, r) = (w0.nrows(), w0.ncols(), b.ncols());
        if b.nrows() != d || a.nrows() != r || a.ncols() != k {
            return Err(Error::ShapeMismatch(format!(
                "w0 {}, b {}, a {}",
                shape(&w0),
                shape(&b),
                shape(&a)
            )));
        }
        if r == 0 || r > d.min(k) {
            return Err(Error::InvalidAdapter(format!("rank {r} outside 1..={}", d.min(k))));
        }
        if w0.iter().chain(b.iter()).chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidAdapter("non-finite entry".into()));
        }
        Ok(Self { w0, b, a })
    }

    /// Adapter with a zero base weight.
    pub fn from_factors(b: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        Self::new(DMatrix::zeros(b.nrows(), a.ncols()), b, a)
    }

    pub fn w0(&self) -> &DMatrix<f64> {
        &self.w0
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.b.ncols()
    }

    pub fn delta(&self) -> DMatrix<f64> {
        &self.b * &self.a
    }

    pub fn effective_weight(&self) -> DMatrix<f64> {
        &self.w0 + self.delta()
    }

    /// The same adapter acting on transposed weights: `W0^T + A^T B^T`.
    pub fn transpose(&self) -> Self {
        Self {
            w0: self.w0.transpose(),
            b: self.a.transpose(),
            a: self.b.transpose(),
        }
    }

    /// Parses `{"w0": [[..]], "b": [[..]], "a": [[..]]}` (rows of numbers).
    /// `w0` may be omitted for a zero base weight.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: AdapterJson = serde_json::from_str(text).map_err(|e| Error::InvalidAdapter(e.to_string()))?;
        let b = rows_to_matrix("b", &raw.b)?;
        let a = rows_to_matrix("a", &raw.a)?;
        match raw.w0 {
            Some(w0) => Self::new(rows_to_matrix("w0", &w0)?, b, a),
            None => Self::from_factors(b, a),
        }
    }

    pub fn to_json(&self) -> String {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        serde_json::to_string(&AdapterJson {
            w0: Some(rows(&self.w0)),
            b: rows(&self.b),
            a: rows(&self.a),
        })
        .expect("adapter serializes")
    }

    /// Random adapter with entries uniform in `[-1, 1)`.
    pub fn random(d: usize, k: usize, r: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut m = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let (w0, b, a) = (m(d, k), m(d, r), m(r, k));
        Self::new(w0, b, a)
    }
}

#[derive(Serialize, Deserialize)]
struct AdapterJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w0: Option<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ShapeMismatch(format!(
            "{name} must be a non-empty rectangular array"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn frobenius_inner(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.component_mul(y).sum()
}

/// Best rank-`k` approximation by singular values.
pub fn truncate_rank(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &i in order.iter().take(k) {
        out += svd.singular_values[i] * u.column(i) * vt.row(i);
    }
    out
}

fn check_pair(s: &LowRankAdapter, t: &LowRankAdapter) -> Result<()> {
    if s.w0.shape() != t.w0.shape() {
        return Err(Error::ShapeMismatch(format!(
            "spatial update {} vs temporal update {}",
            shape(&s.w0),
            shape(&t.w0)
        )));
    }
    Ok(())
}

fn canonical_order(s: &LowRankAdapter, t: &LowRankAdapter) -> std::cmp::Ordering {
    s.rank().cmp(&t.rank()).then_with(|| {
        let key = |x: &LowRankAdapter| x.b.iter().chain(x.a.iter()).map(|v| v.to_bits()).collect::<Vec<_>>();
        key(s).cmp(&key(t))
    })
}

/// Signed `<T_k(dW_s), T_k(dW_t)>_F`.
///
/// When `k_sig` is at least both ranks the truncation is the identity and the
/// product is evaluated in factored form, `tr((B_s^T B_t)(A_t A_s^T))`, which
/// never forms a `d x k` matrix.
fn ortho_inner(s: &LowRankAdapter, t: &LowRankAdapter, k_sig: usize) -> Result<f64> {
    check_pair(s, t)?;
    if k_sig == 0 {
        return Err(Error::InvalidParams("k_sig must be at least 1".into()));
    }
    if k_sig >= s.rank().max(t.rank()) {
        // a fixed argument order keeps the result bit-for-bit symmetric
        let (s, t) = if canonical_order(s, t).is_le() { (s, t) } else { (t, s) };
        let left = s.b.transpose() * &t.b;
        let right = &t.a * s.a.transpose();
        return Ok(frobenius_inner(&left, &right.transpose()));
    }
    Ok(frobenius_inner(
        &truncate_rank(&s.delta(), k_sig),
        &truncate_rank(&t.delta(), k_sig),
    ))
}

/// `|<T_k(dW_s), T_k(dW_t)>_F|`.
pub fn ortho_loss(spatial: &LowRankAdapter, temporal: &LowRankAdapter, k_sig: usize) -> Result<f64> {
    ortho_inner(spatial, temporal, k_sig).map(f64::abs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthoGrad {
    pub d_b: DMatrix<f64>,
    pub d_a: DMatrix<f64>,
}

/// Gradient of [`ortho_loss`] with respect to the spatial factors. Only the
/// untruncated regime (`k_sig` at least both ranks) has this closed form; the
/// subgradient at zero inner product is zero.
pub fn ortho_loss_grad(spatial: &LowRankAdapter, temporal: &LowRankAdapter, k_sig: usize) -> Result<OrthoGrad> {
    if k_sig < spatial.rank().max(temporal.rank()) {
        return Err(Error::InvalidParams(format!(
            "gradient needs k_sig >= {}, got {k_sig}",
            spatial.rank().max(temporal.rank())
        )));
    }
    let inner = ortho_inner(spatial, temporal, k_sig)?;
    let sigma = if inner > 0.0 {
        1.0
    } else if inner < 0.0 {
        -1.0
    } else {
        0.0
    };
    let dt = temporal.delta();
    Ok(OrthoGrad {
        d_b: sigma * &dt * spatial.a.transpose(),
        d_a: sigma * spatial.b.transpose() * &dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub delta: f64,
    pub lambda: f64,
    pub k_sig: usize,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        check_lambda(self.lambda)?;
        if self.k_sig == 0 {
            return Err(Error::WeightOutOfRange("k_sig must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::WeightOutOfRange(format!("delta {delta} not in (0, 1)")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::WeightOutOfRange(format!(
            "lambda {lambda} must be finite and >= 0"
        )));
    }
    Ok(())
}

fn check_loss(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidLoss(format!("{name} = {v}")));
    }
    Ok(())
}

/// Temporal loss plus `delta` times the spatial loss.
pub fn first_stage_loss(l_temporal: f64, l_spatial: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_loss("temporal loss", l_temporal)?;
    check_loss("spatial loss", l_spatial)?;
    Ok(l_temporal + delta * l_spatial)
}

/// Spatial loss plus `lambda` times the orthogonality loss.
pub fn second_stage_loss(l_spatial: f64, l_ortho: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_loss("spatial loss", l_spatial)?;
    check_loss("orthogonality loss", l_ortho)?;
    Ok(l_spatial + lambda * l_ortho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceState {
    pub z: ArrayD<f64>,
    pub z_p: ArrayD<f64>,
    pub lambda_g: f64,
    /// Elements where the mask is false are left unchanged.
    pub mask: Option<ArrayD<bool>>,
}

/// One guidance step: `z - 2 lambda_g (z - z_p)` elementwise.
pub fn guidance_update(g: &GuidanceState) -> Result<ArrayD<f64>> {
    if g.z.shape() != g.z_p.shape() {
        return Err(Error::ShapeMismatch(format!(
            "z {:?} vs z_p {:?}",
            g.z.shape(),
            g.z_p.shape()
        )));
    }
    if let Some(m) = &g.mask {
        if m.shape() != g.z.shape() {
            return Err(Error::ShapeMismatch(format!(
                "mask {:?} vs z {:?}",
                m.shape(),
                g.z.shape()
            )));
        }
    }
    check_lambda(g.lambda_g)?;
    if g.z.iter().chain(g.z_p.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("latents must be finite".into()));
    }
    let step = 2.0 * g.lambda_g;
    let mut out = g.z.clone();
    match &g.mask {
        None => Zip::from(&mut out).and(&g.z_p).for_each(|z, &p| *z -= step * (*z - p)),
        Some(m) => Zip::from(&mut out).and(&g.z_p).and(m).for_each(|z, &p, &keep| {
            if keep {
                *z -= step * (*z - p)
            }
        }),
    }
    Ok(out)
}

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub seed: u64,
    pub loss: f64,
    pub rel_error_b: f64,
    pub rel_error_a: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.rel_error_b < GRADCHECK_TOLERANCE && self.rel_error_a < GRADCHECK_TOLERANCE
    }
}

fn rel_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    let scale = analytic.norm().max(numeric.norm());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).norm() / scale
    }
}

/// Central differences of `ortho_loss` over every entry of `B_s` and `A_s`,
/// compared with [`ortho_loss_grad`].
pub fn gradcheck_pair(
    spatial: &LowRankAdapter,
    temporal: &LowRankAdapter,
    k_sig: usize,
    seed: u64,
) -> Result<GradCheck> {
    let grad = ortho_loss_grad(spatial, temporal, k_sig)?;
    let h = GRADCHECK_STEP;
    let loss_with = |b: &DMatrix<f64>, a: &DMatrix<f64>| {
        let s = LowRankAdapter {
            w0: spatial.w0.clone(),
            b: b.clone(),
            a: a.clone(),
        };
        ortho_loss(&s, temporal, k_sig)
    };
    let mut num_b = DMatrix::zeros(spatial.b.nrows(), spatial.b.ncols());
    for idx in 0..spatial.b.len() {
        let (mut plus, mut minus) = (spatial.b.clone(), spatial.b.clone());
        plus[idx] += h;
        minus[idx] -= h;
        num_b[idx] = (loss_with(&plus, &spatial.a)? - loss_with(&minus, &spatial.a)?) / (2.0 * h);
    }
    let mut num_a = DMatrix::zeros(spatial.a.nrows(), spatial.a.ncols());
    for idx in 0..spatial.a.len() {
        let (mut plus, mut minus) = (spatial.a.clone(), spatial.a.clone());
        plus[idx] += h;
        minus[idx] -= h;
        num_a[idx] = (loss_with(&spatial.b, &plus)? - loss_with(&spatial.b, &minus)?) / (2.0 * h);
    }
    Ok(GradCheck {
        seed,
        loss: ortho_loss(spatial, temporal, k_sig)?,
        rel_error_b: rel_error(&grad.d_b, &num_b),
        rel_error_a: rel_error(&grad.d_a, &num_a),
    })
}

/// Gradient check on a random `d x k` adapter pair of rank `r` drawn from `seed`.
pub fn gradcheck(seed: u64, d: usize, k: usize, r: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = LowRankAdapter::random(d, k, r, &mut rng)?;
    let t = LowRankAdapter::random(d, k, r, &mut rng)?;
    gradcheck_pair(&s, &t, r, seed)
}
