//! Gram matrices, HSIC, normalized HSIC (centered kernel alignment), and the
//! Gaussian mutual information used to cross-check the linear-kernel score.
//!
//! All kernel arithmetic is done in `f64`. Inputs are `n x d` sample matrices
//! with one row per sample.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation_store::{center_columns, ActivationMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("need at least 2 samples, got {0}")]
    DegenerateInput(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("joint covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("rbf bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Kernel {
    /// k(x, y) = x . y
    #[default]
    Linear,
    /// k(x, y) = exp(-|x - y|^2 / (2 sigma^2)); `None` picks the median pairwise distance.
    Rbf { bandwidth: Option<f64> },
}

impl Kernel {
    pub fn name(&self) -> String {
        match self {
            Kernel::Linear => "linear".into(),
            Kernel::Rbf { bandwidth: None } => "rbf".into(),
            Kernel::Rbf { bandwidth: Some(s) } => format!("rbf:{s}"),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    /// Accepts `linear`, `rbf`, or `rbf:<bandwidth>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Kernel::Linear),
            "rbf" => Ok(Kernel::Rbf { bandwidth: None }),
            other => match other.strip_prefix("rbf:") {
                Some(v) => {
                    let sigma: f64 = v.parse().map_err(|_| format!("bad bandwidth {v:?}"))?;
                    if !(sigma.is_finite() && sigma > 0.0) {
                        return Err(format!("bandwidth must be positive, got {sigma}"));
                    }
                    Ok(Kernel::Rbf { bandwidth: Some(sigma) })
                }
                None => Err(format!("unknown kernel {other:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub data: Array2<f64>,
    pub kernel: Kernel,
    pub centered: bool,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// tr(K K) = |K|_F^2 for symmetric K.
    pub fn self_alignment(&self) -> f64 {
        frobenius_inner(self.data.view(), self.data.view())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let k = &self.data;
        let mut worst = 0.0f64;
        for i in 0..k.nrows() {
            for j in 0..i {
                worst = worst.max((k[[i, j]] - k[[j, i]]).abs());
            }
        }
        worst
    }

    /// Largest absolute row or column sum.
    pub fn max_margin_sum(&self) -> f64 {
        let rows = self.data.sum_axis(Axis(1));
        let cols = self.data.sum_axis(Axis(0));
        rows.iter()
            .chain(cols.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sum of elementwise products, i.e. tr(A B) for symmetric A, B.
fn frobenius_inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn check_samples(x: ArrayView2<f64>) -> Result<(), KernelError> {
    if x.nrows() < 2 {
        return Err(KernelError::DegenerateInput(x.nrows()));
    }
    Ok(())
}

fn sq_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let norms: Vec<f64> = x.outer_iter().map(|r| r.dot(&r)).collect();
    let inner = x.dot(&x.t());
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            (norms[i] + norms[j] - 2.0 * inner[[i, j]]).max(0.0)
        }
    })
}

/// Median of the pairwise (i < j) Euclidean distances. Returns 1.0 when every
/// distance is zero.
pub fn median_bandwidth(x: ArrayView2<f64>) -> f64 {
    let d2 = sq_distances(x);
    let n = x.nrows();
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in 0..i {
            dists.push(d2[[i, j]].sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len().is_multiple_of(2) {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Uncentered kernel matrix K[i, j] = k(x_i, x_j).
pub fn raw_gram(x: ArrayView2<f64>, kernel: Kernel) -> Result<Array2<f64>, KernelError> {
    check_samples(x)?;
    match kernel {
        Kernel::Linear => Ok(x.dot(&x.t())),
        Kernel::Rbf { bandwidth } => {
            let sigma = bandwidth.unwrap_or_else(|| median_bandwidth(x));
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(KernelError::InvalidBandwidth(sigma));
            }
            let scale = 1.0 / (2.0 * sigma * sigma);
            Ok(sq_distances(x).mapv(|d| (-d * scale).exp()))
        }
    }
}

/// The centering matrix I - (1/n) 1 1^T.
pub fn centering_matrix(n: usize) -> Array2<f64> {
    let off = 1.0 / n as f64;
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 - off } else { -off })
}

/// H K H computed without materializing H.
pub fn double_center(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows() as f64;
    let row_means = k.mean_axis(Axis(1)).expect("non-empty");
    let col_means = k.mean_axis(Axis(0)).expect("non-empty");
    let grand = row_means.sum() / n;
    let mut out = k.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    out
}

/// Centered Gram matrix of an `f64` sample matrix.
///
/// Linear: the features are column-centered first and K = X X^T, which equals
/// H (X X^T) H. RBF: the kernel matrix is double-centered.
pub fn gram_f64(x: ArrayView2<f64>, kernel: Kernel) -> Result<GramMatrix, KernelError> {
    check_samples(x)?;
    let data = match kernel {
        Kernel::Linear => {
            let mut xc = x.to_owned();
            center_columns(&mut xc);
            let k = xc.dot(&xc.t());
            symmetrize(k)
        }
        Kernel::Rbf { .. } => symmetrize(double_center(&raw_gram(x, kernel)?)),
    };
    Ok(GramMatrix {
        data,
        kernel,
        centered: true,
    })
}

fn symmetrize(mut k: Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (k[[i, j]] + k[[j, i]]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Centered Gram matrix of a layer's activations.
pub fn gram(x: &ActivationMatrix, kernel: Kernel) -> Result<GramMatrix, KernelError> {
    gram_f64(x.to_f64().view(), kernel)
}

fn check_pair(kx: &GramMatrix, ky: &GramMatrix) -> Result<usize, KernelError> {
    if kx.data.dim() != ky.data.dim() || kx.n() != kx.data.ncols() {
        return Err(KernelError::DimensionMismatch(format!(
            "gram shapes {:?} vs {:?}",
            kx.data.dim(),
            ky.data.dim()
        )));
    }
    Ok(kx.n())
}

/// Biased HSIC estimate (n-1)^-2 tr(K_X K_Y) on centered Grams.
pub fn hsic(kx: &GramMatrix, ky: &GramMatrix) -> Result<f64, KernelError> {
    let n = check_pair(kx, ky)?;
    let denom = ((n - 1) * (n - 1)) as f64;
    Ok(frobenius_inner(kx.data.view(), ky.data.view()) / denom)
}

/// HSIC from uncentered kernel matrices via the explicit centering matrix:
/// (n-1)^-2 tr(K_X H K_Y H).
pub fn hsic_explicit_centering(kx: &Array2<f64>, ky: &Array2<f64>) -> Result<f64, KernelError> {
    if kx.dim() != ky.dim() || kx.nrows() != kx.ncols() {
        return Err(KernelError::DimensionMismatch(format!(
            "kernel shapes {:?} vs {:?}",
            kx.dim(),
            ky.dim()
        )));
    }
    let n = kx.nrows();
    if n < 2 {
        return Err(KernelError::DegenerateInput(n));
    }
    let h = centering_matrix(n);
    let left = kx.dot(&h);
    let right = ky.dot(&h);
    // tr(A B) = sum_ij A_ij B_ji
    let tr: f64 = left.iter().zip(right.t().iter()).map(|(a, b)| a * b).sum();
    Ok(tr / ((n - 1) * (n - 1)) as f64)
}

/// Normalized HSIC. `degenerate` is set when either Gram has zero norm, in
/// which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nhsic {
    pub value: f64,
    pub degenerate: bool,
}

impl Nhsic {
    fn from_parts(cross: f64, norm_x: f64, norm_y: f64) -> Self {
        if !(norm_x > 0.0 && norm_y > 0.0) || !norm_x.is_finite() || !norm_y.is_finite() {
            return Nhsic {
                value: 0.0,
                degenerate: true,
            };
        }
        Nhsic {
            value: cross / (norm_x * norm_y),
            degenerate: false,
        }
    }
}

/// tr(K_X K_Y) / (sqrt(tr(K_X K_X)) sqrt(tr(K_Y K_Y))).
pub fn nhsic(kx: &GramMatrix, ky: &GramMatrix) -> Result<Nhsic, KernelError> {
    check_pair(kx, ky)?;
    let cross = frobenius_inner(kx.data.view(), ky.data.view());
    Ok(Nhsic::from_parts(
        cross,
        kx.self_alignment().sqrt(),
        ky.self_alignment().sqrt(),
    ))
}

/// |A^T B|_F^2 without forming the product when one side is narrow.
fn cross_frobenius_sq(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let p = a.t().dot(&b);
    p.iter().map(|v| v * v).sum()
}

/// Linear-kernel nHSIC on column-centered features:
/// |Y^T X|_F^2 / (|X^T X|_F |Y^T Y|_F). Costs O(n d_x d_y) instead of O(n^2 d).
pub fn nhsic_linear_features(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Nhsic, KernelError> {
    check_samples(x)?;
    if x.nrows() != y.nrows() {
        return Err(KernelError::DimensionMismatch(format!(
            "sample counts {} vs {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let mut xc = x.to_owned();
    let mut yc = y.to_owned();
    center_columns(&mut xc);
    center_columns(&mut yc);
    let cross = cross_frobenius_sq(yc.view(), xc.view());
    let norm_x = cross_frobenius_sq(xc.view(), xc.view()).sqrt();
    let norm_y = cross_frobenius_sq(yc.view(), yc.view()).sqrt();
    Ok(Nhsic::from_parts(cross, norm_x, norm_y))
}

/// Precomputed per-layer state for repeated linear-kernel nHSIC evaluation.
///
/// Narrow layers (d < n) keep their centered features and use the
/// `|Y^T X|_F^2` form; wide layers keep their n x n Gram.
#[derive(Debug, Clone)]
pub struct LinearRepr {
    features: Array2<f64>,
    gram: Option<Array2<f64>>,
    norm: f64,
}

impl LinearRepr {
    pub fn new(x: ArrayView2<f64>) -> Result<Self, KernelError> {
        check_samples(x)?;
        let mut features = x.to_owned();
        center_columns(&mut features);
        let (n, d) = features.dim();
        if d < n {
            let norm = cross_frobenius_sq(features.view(), features.view()).sqrt();
            Ok(Self {
                features,
                gram: None,
                norm,
            })
        } else {
            let k = symmetrize(features.dot(&features.t()));
            let norm = frobenius_inner(k.view(), k.view()).sqrt();
            Ok(Self {
                features,
                gram: Some(k),
                norm,
            })
        }
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.norm > 0.0 && self.norm.is_finite())
    }

    pub fn uses_gram(&self) -> bool {
        self.gram.is_some()
    }

    fn gram_or_build(&self) -> std::borrow::Cow<'_, Array2<f64>> {
        match &self.gram {
            Some(k) => std::borrow::Cow::Borrowed(k),
            None => std::borrow::Cow::Owned(symmetrize(self.features.dot(&self.features.t()))),
        }
    }

    pub fn nhsic(&self, other: &LinearRepr) -> Result<Nhsic, KernelError> {
        if self.n() != other.n() {
            return Err(KernelError::DimensionMismatch(format!(
                "sample counts {} vs {}",
                self.n(),
                other.n()
            )));
        }
        if self.is_degenerate() || other.is_degenerate() {
            return Ok(Nhsic {
                value: 0.0,
                degenerate: true,
            });
        }
        let cross = match (&self.gram, &other.gram) {
            (None, None) => cross_frobenius_sq(other.features.view(), self.features.view()),
            _ => {
                let kx = self.gram_or_build();
                let ky = other.gram_or_build();
                frobenius_inner(kx.view(), ky.view())
            }
        };
        Ok(Nhsic::from_parts(cross, self.norm, other.norm))
    }
}

/// Cholesky log-determinant; `None` if the matrix is not positive definite.
fn log_det_spd(a: &Array2<f64>) -> Option<f64> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    let mut log_det = 0.0;
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        log_det += 2.0 * ljj.ln();
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    Some(log_det)
}

/// Mutual information of jointly Gaussian X, Y:
/// 1/2 (ln|S_X| + ln|S_Y| - ln|S_XY joint|).
pub fn gaussian_mutual_information(
    sigma_x: &Array2<f64>,
    sigma_y: &Array2<f64>,
    sigma_xy: &Array2<f64>,
) -> Result<f64, KernelError> {
    let dx = sigma_x.nrows();
    let dy = sigma_y.nrows();
    if sigma_x.ncols() != dx || sigma_y.ncols() != dy || sigma_xy.dim() != (dx, dy) {
        return Err(KernelError::DimensionMismatch(format!(
            "covariance blocks {:?}, {:?}, cross {:?}",
            sigma_x.dim(),
            sigma_y.dim(),
            sigma_xy.dim()
        )));
    }
    let mut joint = Array2::<f64>::zeros((dx + dy, dx + dy));
    joint.slice_mut(ndarray::s![..dx, ..dx]).assign(sigma_x);
    joint.slice_mut(ndarray::s![dx.., dx..]).assign(sigma_y);
    joint.slice_mut(ndarray::s![..dx, dx..]).assign(sigma_xy);
    joint.slice_mut(ndarray::s![dx.., ..dx]).assign(&sigma_xy.t());
    for i in 0..joint.nrows() {
        for j in 0..i {
            if (joint[[i, j]] - joint[[j, i]]).abs() > 1e-12 * (1.0 + joint[[i, j]].abs()) {
                return Err(KernelError::NotPositiveDefinite);
            }
        }
    }
    let lx = log_det_spd(sigma_x).ok_or(KernelError::NotPositiveDefinite)?;
    let ly = log_det_spd(sigma_y).ok_or(KernelError::NotPositiveDefinite)?;
    let lj = log_det_spd(&joint).ok_or(KernelError::NotPositiveDefinite)?;
    Ok((0.5 * (lx + ly - lj)).max(0.0))
}
