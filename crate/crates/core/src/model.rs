//! Two-layer GCN head, linear head on document features, and their
//! probability-level fusion.
//!
//! Forward pass for `N` nodes (`n_doc` documents first), features `X` (`N x d`):
//!
//! ```text
//! H0 = Ã X          P1 = H0 W1        L1 = relu(P1)
//! H1 = Ã L1         L2 = H1 W2        Z_gcn = softmax(L2[..n_doc])
//! Z_aux = softmax(X[..n_doc] W_aux)
//! Z = λ Z_gcn + (1 - λ) Z_aux
//! loss = -1/|T| Σ_{(i, y) ∈ T} ln max(Z[i, y], 1e-12)
//! ```
//!
//! Backward is hand-written reverse mode over exactly these steps.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::NodeFeatures;
use crate::sparse::SparseMatrix;

pub const DEFAULT_HIDDEN_DIM: usize = 200;
pub const LOG_EPSILON: f64 = 1e-12;

/// Which heads are present and how their outputs combine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Architecture {
    /// Both heads, `Z = λ Z_gcn + (1 - λ) Z_aux`.
    Fused { lambda: f64 },
    /// GCN head alone, `Z = Z_gcn`.
    GcnOnly,
    /// Linear head alone, `Z = Z_aux`; the graph is unused.
    AuxOnly,
}

impl Architecture {
    pub fn fused(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Architecture::Fused { lambda })
    }

    pub fn has_gcn(self) -> bool {
        !matches!(self, Architecture::AuxOnly)
    }

    pub fn has_aux(self) -> bool {
        !matches!(self, Architecture::GcnOnly)
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Fused { .. } => "fused",
            Architecture::GcnOnly => "gcn",
            Architecture::AuxOnly => "aux",
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    /// `d x h`
    pub w1: Array2<f64>,
    /// `h x n_classes`
    pub w2: Array2<f64>,
}

impl GcnParams {
    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxHeadParams {
    /// `d x n_classes`
    pub w_aux: Array2<f64>,
}

/// Everything the optimizer updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gcn: Option<GcnParams>,
    pub aux: Option<AuxHeadParams>,
    /// Trainable document feature rows; `None` when features are fixed.
    pub x_doc: Option<Array2<f64>>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-r..=r))
}

impl ModelParams {
    /// Seeded Glorot-uniform weights, drawn in the order W1, W2, W_aux so
    /// that architectures sharing a head start from identical values.
    pub fn init(
        arch: Architecture,
        features: &NodeFeatures,
        hidden_dim: usize,
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let d = features.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gcn = arch.has_gcn().then(|| {
            let w1 = glorot(&mut rng, d, hidden_dim);
            let w2 = glorot(&mut rng, hidden_dim, n_classes);
            GcnParams { w1, w2 }
        });
        let aux = arch.has_aux().then(|| AuxHeadParams {
            w_aux: glorot(&mut rng, d, n_classes),
        });
        let x_doc = features.trainable.then(|| features.doc_rows().to_owned());
        ModelParams { gcn, aux, x_doc }
    }

    pub fn n_classes(&self) -> usize {
        match (&self.gcn, &self.aux) {
            (Some(g), _) => g.w2.ncols(),
            (None, Some(a)) => a.w_aux.ncols(),
            (None, None) => 0,
        }
    }

    pub fn all_finite(&self) -> bool {
        let mut tensors: Vec<&Array2<f64>> = Vec::new();
        if let Some(g) = &self.gcn {
            tensors.extend([&g.w1, &g.w2]);
        }
        if let Some(a) = &self.aux {
            tensors.push(&a.w_aux);
        }
        tensors.extend(self.x_doc.as_ref());
        tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Gradient w.r.t. logits given the softmax output and the upstream gradient.
fn softmax_backward(probs: ArrayView2<'_, f64>, upstream: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    Zip::from(out.rows_mut())
        .and(probs.rows())
        .and(upstream.rows())
        .for_each(|mut o, p, g| {
            let dot = p.dot(&g);
            Zip::from(&mut o)
                .and(&p)
                .and(&g)
                .for_each(|o, &p, &g| *o = p * (g - dot));
        });
    out
}

fn shape_error(context: &'static str, expected: String, found: String) -> Error {
    Error::DimensionMismatch {
        context,
        expected,
        found,
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GcnCache {
    pub h0: Array2<f64>,
    pub pre1: Array2<f64>,
    pub post1: Array2<f64>,
    pub h1: Array2<f64>,
    pub z: Array2<f64>,
}

/// Two propagation layers; softmax over the first `n_doc` rows only.
pub fn gcn_forward(
    a_norm: &SparseMatrix,
    x: ArrayView2<'_, f64>,
    n_doc: usize,
    params: &GcnParams,
) -> Result<GcnCache> {
    if a_norm.n_rows() != x.nrows() || a_norm.n_cols() != x.nrows() {
        return Err(shape_error(
            "gcn input",
            format!("{0}x{0} adjacency", x.nrows()),
            format!("{}x{}", a_norm.n_rows(), a_norm.n_cols()),
        ));
    }
    if params.w1.nrows() != x.ncols() {
        return Err(shape_error(
            "W1",
            format!("{} rows", x.ncols()),
            format!("{} rows", params.w1.nrows()),
        ));
    }
    if params.w2.nrows() != params.w1.ncols() {
        return Err(shape_error(
            "W2",
            format!("{} rows", params.w1.ncols()),
            format!("{} rows", params.w2.nrows()),
        ));
    }
    if n_doc > x.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "document count",
            index: n_doc,
            limit: x.nrows(),
        });
    }
    let h0 = a_norm.mul_dense(x)?;
    let pre1 = h0.dot(&params.w1);
    let post1 = pre1.mapv(|v| v.max(0.0));
    let h1 = a_norm.mul_dense(post1.view())?;
    let logits = h1.slice(s![..n_doc, ..]).dot(&params.w2);
    let z = softmax_rows(logits.view());
    Ok(GcnCache {
        h0,
        pre1,
        post1,
        h1,
        z,
    })
}

pub fn aux_forward(x_doc: ArrayView2<'_, f64>, params: &AuxHeadParams) -> Result<Array2<f64>> {
    if params.w_aux.nrows() != x_doc.ncols() {
        return Err(shape_error(
            "W_aux",
            format!("{} rows", x_doc.ncols()),
            format!("{} rows", params.w_aux.nrows()),
        ));
    }
    Ok(softmax_rows(x_doc.dot(&params.w_aux).view()))
}

/// `λ z_gcn + (1 - λ) z_aux`; the endpoints return exact copies.
pub fn fuse(z_gcn: &Array2<f64>, z_aux: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    check_lambda(lambda)?;
    if z_gcn.dim() != z_aux.dim() {
        return Err(shape_error(
            "fusion",
            format!("{:?}", z_gcn.dim()),
            format!("{:?}", z_aux.dim()),
        ));
    }
    if lambda == 1.0 {
        return Ok(z_gcn.clone());
    }
    if lambda == 0.0 {
        return Ok(z_aux.clone());
    }
    Ok(z_gcn * lambda + z_aux * (1.0 - lambda))
}

/// Mean negative log-probability of the target class over `targets`
/// (`(document row, class)` pairs).
pub fn nll_loss(z: &Array2<f64>, targets: &[(usize, usize)]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut total = 0.0;
    for &(i, y) in targets {
        if i >= z.nrows() || y >= z.ncols() {
            return Err(Error::IndexOutOfRange {
                what: "loss target",
                index: if i >= z.nrows() { i } else { y },
                limit: if i >= z.nrows() { z.nrows() } else { z.ncols() },
            });
        }
        total -= z[[i, y]].max(LOG_EPSILON).ln();
    }
    Ok(total / targets.len() as f64)
}

fn nll_backward(z: &Array2<f64>, targets: &[(usize, usize)]) -> Array2<f64> {
    let scale = 1.0 / targets.len() as f64;
    let mut g = Array2::zeros(z.raw_dim());
    for &(i, y) in targets {
        let p = z[[i, y]];
        if p > LOG_EPSILON {
            g[[i, y]] -= scale / p;
        }
    }
    g
}

/// Lowest index wins ties.
pub fn argmax_rows(z: &Array2<f64>) -> Vec<usize> {
    z.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub arch: Architecture,
    /// Effective `N x d` features (trainable document rows substituted).
    pub x: Array2<f64>,
    pub n_doc: usize,
    pub gcn: Option<GcnCache>,
    pub z_aux: Option<Array2<f64>>,
    pub z: Array2<f64>,
}

impl ForwardPass {
    pub fn z_gcn(&self) -> Option<&Array2<f64>> {
        self.gcn.as_ref().map(|c| &c.z)
    }

    pub fn predictions(&self) -> Vec<usize> {
        argmax_rows(&self.z)
    }
}

pub fn effective_features(features: &NodeFeatures, params: &ModelParams) -> Result<Array2<f64>> {
    let mut x = features.matrix.clone();
    if let Some(x_doc) = &params.x_doc {
        if x_doc.dim() != (features.n_doc, features.dim()) {
            return Err(shape_error(
                "trainable document features",
                format!("{:?}", (features.n_doc, features.dim())),
                format!("{:?}", x_doc.dim()),
            ));
        }
        x.slice_mut(s![..features.n_doc, ..]).assign(x_doc);
    }
    Ok(x)
}

pub fn forward(
    arch: Architecture,
    a_norm: &SparseMatrix,
    features: &NodeFeatures,
    params: &ModelParams,
) -> Result<ForwardPass> {
    let x = effective_features(features, params)?;
    let n_doc = features.n_doc;
    let missing = |what: &str| Error::Config(format!("{} architecture needs {what}", arch.name()));

    let gcn = if arch.has_gcn() {
        let p = params.gcn.as_ref().ok_or_else(|| missing("GCN weights"))?;
        Some(gcn_forward(a_norm, x.view(), n_doc, p)?)
    } else {
        None
    };
    let z_aux = if arch.has_aux() {
        let p = params.aux.as_ref().ok_or_else(|| missing("head weights"))?;
        Some(aux_forward(x.slice(s![..n_doc, ..]), p)?)
    } else {
        None
    };
    let z = match (arch, &gcn, &z_aux) {
        (Architecture::Fused { lambda }, Some(g), Some(a)) => fuse(&g.z, a, lambda)?,
        (Architecture::GcnOnly, Some(g), _) => g.z.clone(),
        (Architecture::AuxOnly, _, Some(a)) => a.clone(),
        _ => unreachable!("heads computed per architecture"),
    };
    Ok(ForwardPass {
        arch,
        x,
        n_doc,
        gcn,
        z_aux,
        z,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Option<Array2<f64>>,
    pub w2: Option<Array2<f64>>,
    pub w_aux: Option<Array2<f64>>,
    pub x_doc: Option<Array2<f64>>,
}

/// Exact gradients of [`nll_loss`] on `pass.z` with respect to every
/// parameter in `params`.
pub fn backward(
    pass: &ForwardPass,
    a_norm: &SparseMatrix,
    params: &ModelParams,
    targets: &[(usize, usize)],
) -> Result<Gradients> {
    if targets.is_empty() {
        return Err(Error::EmptyMask);
    }
    let d_z = nll_backward(&pass.z, targets);
    let (d_gcn, d_aux) = match pass.arch {
        Architecture::Fused { lambda } => (Some(&d_z * lambda), Some(&d_z * (1.0 - lambda))),
        Architecture::GcnOnly => (Some(d_z), None),
        Architecture::AuxOnly => (None, Some(d_z)),
    };
    let n_doc = pass.n_doc;
    let mut d_x_doc = params
        .x_doc
        .as_ref()
        .map(|x| Array2::<f64>::zeros(x.raw_dim()));

    let (mut g_w1, mut g_w2) = (None, None);
    if let (Some(cache), Some(p), Some(d_z_gcn)) = (&pass.gcn, &params.gcn, d_gcn) {
        let d_logits = softmax_backward(cache.z.view(), d_z_gcn.view());
        g_w2 = Some(cache.h1.slice(s![..n_doc, ..]).t().dot(&d_logits));

        let mut d_h1 = Array2::zeros(cache.h1.raw_dim());
        d_h1.slice_mut(s![..n_doc, ..])
            .assign(&d_logits.dot(&p.w2.t()));
        let mut d_pre1 = a_norm.transpose_mul_dense(d_h1.view())?;
        Zip::from(&mut d_pre1).and(&cache.pre1).for_each(|g, &pre| {
            if pre <= 0.0 {
                *g = 0.0;
            }
        });
        g_w1 = Some(cache.h0.t().dot(&d_pre1));

        if let Some(dx) = d_x_doc.as_mut() {
            let d_h0 = d_pre1.dot(&p.w1.t());
            let d_x = a_norm.transpose_mul_dense(d_h0.view())?;
            *dx += &d_x.slice(s![..n_doc, ..]);
        }
    }

    let mut g_w_aux = None;
    if let (Some(z_aux), Some(p), Some(d_z_aux)) = (&pass.z_aux, &params.aux, d_aux) {
        let d_logits = softmax_backward(z_aux.view(), d_z_aux.view());
        let x_doc = pass.x.slice(s![..n_doc, ..]);
        g_w_aux = Some(x_doc.t().dot(&d_logits));
        if let Some(dx) = d_x_doc.as_mut() {
            *dx += &d_logits.dot(&p.w_aux.t());
        }
    }

    Ok(Gradients {
        w1: g_w1,
        w2: g_w2,
        w_aux: g_w_aux,
        x_doc: d_x_doc,
    })
}

/// Largest absolute deviation of any row sum from 1, and whether all
/// entries lie in `[0, 1]`.
pub fn row_stochastic_error(z: &Array2<f64>) -> (f64, bool) {
    let dev = z
        .sum_axis(Axis(1))
        .iter()
        .fold(0.0f64, |m, &s| m.max((s - 1.0).abs()));
    let in_range = z.iter().all(|&v| (0.0..=1.0).contains(&v));
    (dev, in_range)
}
