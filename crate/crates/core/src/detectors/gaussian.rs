//! Gaussian approximation of the compressed measurements and its LLR.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linops::{compress_block_scalar, symmetrize, BlockProjection};
use crate::scalar::Scalar;
use crate::scenarios::HypothesisStats;

const MIN_EIGENVALUE: f64 = 1e-12;
const RIDGE_FACTOR: f64 = 1e-10;
const POWER_ITERATIONS: usize = 60;

/// What the inversion had to do to a covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InversionInfo {
    /// Ridge added to the diagonal, if any.
    pub ridge: Option<f64>,
    /// Estimated minimum eigenvalue before any ridge.
    pub min_eigenvalue: f64,
    /// The matrix was exactly diagonal and inverted elementwise.
    pub diagonal: bool,
}

/// Mean/covariance pair for both hypotheses with cached inverses.
#[derive(Debug, Clone)]
pub struct GaussianModel<S: Scalar> {
    mu0: DVector<S>,
    mu1: DVector<S>,
    c0: DMatrix<S>,
    c1: DMatrix<S>,
    c0_inv: DMatrix<S>,
    c1_inv: DMatrix<S>,
    logdet0: S,
    logdet1: S,
    tau0: S,
    /// `½(C⁰⁻¹ - C¹⁻¹)`.
    half_quad: DMatrix<S>,
    /// `C¹⁻¹μ¹ - C⁰⁻¹μ⁰`.
    lin: DVector<S>,
    info0: InversionInfo,
    info1: InversionInfo,
}

impl<S: Scalar> GaussianModel<S> {
    /// `block` is the partition size used by the nested inversion (normally `M`).
    pub fn new(mu0: DVector<S>, c0: DMatrix<S>, mu1: DVector<S>, c1: DMatrix<S>, block: usize) -> Result<Self> {
        let dim = mu0.len();
        if mu1.len() != dim || c0.shape() != (dim, dim) || c1.shape() != (dim, dim) {
            return Err(Error::InvalidDimension(format!(
                "model moments disagree: mu0 {dim}, mu1 {}, c0 {:?}, c1 {:?}",
                mu1.len(),
                c0.shape(),
                c1.shape()
            )));
        }
        let (c0_inv, logdet0, info0) = invert_spd(&c0, block)?;
        let (c1_inv, logdet1, info1) = invert_spd(&c1, block)?;
        let a0 = &c0_inv * &mu0;
        let a1 = &c1_inv * &mu1;
        let half = S::lit(0.5);
        let tau0 = half * (logdet0 - logdet1 + mu0.dot(&a0) - mu1.dot(&a1));
        let half_quad = symmetrize((&c0_inv - &c1_inv) * half);
        let lin = a1 - a0;
        Ok(Self {
            mu0,
            mu1,
            c0,
            c1,
            c0_inv,
            c1_inv,
            logdet0,
            logdet1,
            tau0,
            half_quad,
            lin,
            info0,
            info1,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &DVector<S> {
        &self.mu0
    }

    pub fn mu1(&self) -> &DVector<S> {
        &self.mu1
    }

    pub fn c0(&self) -> &DMatrix<S> {
        &self.c0
    }

    pub fn c1(&self) -> &DMatrix<S> {
        &self.c1
    }

    pub fn c0_inv(&self) -> &DMatrix<S> {
        &self.c0_inv
    }

    pub fn c1_inv(&self) -> &DMatrix<S> {
        &self.c1_inv
    }

    pub fn logdet0(&self) -> S {
        self.logdet0
    }

    pub fn logdet1(&self) -> S {
        self.logdet1
    }

    pub fn tau0(&self) -> S {
        self.tau0
    }

    pub fn info0(&self) -> InversionInfo {
        self.info0
    }

    pub fn info1(&self) -> InversionInfo {
        self.info1
    }

    /// True when either covariance needed a ridge.
    pub fn ridged(&self) -> bool {
        self.info0.ridge.is_some() || self.info1.ridge.is_some()
    }

    /// `½yᵀ(C⁰⁻¹ - C¹⁻¹)y + (μ¹ᵀC¹⁻¹ - μ⁰ᵀC⁰⁻¹)y + τ₀`.
    pub fn llr(&self, y: &DVector<S>) -> Result<S> {
        if y.len() != self.dim() {
            return Err(Error::InvalidDimension(format!(
                "observation length {} does not match model dimension {}",
                y.len(),
                self.dim()
            )));
        }
        Ok(y.dot(&(&self.half_quad * y)) + self.lin.dot(y) + self.tau0)
    }
}

/// Compresses the closed-form moments through `bp` and builds the model.
pub fn build_gaussian_model<S: Scalar>(stats: &HypothesisStats, bp: &BlockProjection<S>) -> Result<GaussianModel<S>> {
    if stats.l() != bp.l() || stats.n != bp.n() {
        return Err(Error::InvalidDimension(format!(
            "stats are for N={}, L={} but projection is N={}, L={}",
            stats.n,
            stats.l(),
            bp.n(),
            bp.l()
        )));
    }
    let (mu0, c0) = compress_block_scalar(bp, &stats.h0.mean, &stats.h0.cov)?;
    let (mu1, c1) = compress_block_scalar(bp, &stats.h1.mean, &stats.h1.cov)?;
    GaussianModel::new(mu0, c0, mu1, c1, bp.m())
}

pub fn llr_ga<S: Scalar>(y: &DVector<S>, model: &GaussianModel<S>) -> Result<S> {
    model.llr(y)
}

/// Inverse and log-determinant of a symmetric positive definite matrix,
/// with the ridge fallback for (near) singular input.
pub fn invert_spd<S: Scalar>(c: &DMatrix<S>, block: usize) -> Result<(DMatrix<S>, S, InversionInfo)> {
    let n = c.nrows();
    if n == 0 || c.ncols() != n {
        return Err(Error::InvalidDimension(format!("covariance must be square and non-empty, got {:?}", c.shape())));
    }
    crate::linops::check_symmetric(c)?;
    if is_diagonal(c) {
        let min = (0..n).map(|i| c[(i, i)]).fold(S::max_value().unwrap_or(S::one()), |a, b| a.min(b));
        let min_f = min.to_f64_lossy();
        let ridge = (min_f < MIN_EIGENVALUE).then(|| ridge_for(c));
        let shift = S::lit(ridge.unwrap_or(0.0));
        let mut inv = DMatrix::zeros(n, n);
        let mut logdet = S::zero();
        for i in 0..n {
            let d = c[(i, i)] + shift;
            if d <= S::zero() {
                return Err(Error::ModelConstruction {
                    reason: "diagonal covariance has a non-positive entry after ridge".into(),
                    min_eigenvalue: min_f,
                });
            }
            inv[(i, i)] = S::one() / d;
            logdet += d.ln();
        }
        return Ok((
            inv,
            logdet,
            InversionInfo {
                ridge,
                min_eigenvalue: min_f,
                diagonal: true,
            },
        ));
    }

    if let Ok((inv, logdet)) = nested_block_inverse(c, block) {
        let min_eig = min_eigenvalue_from_inverse(&inv);
        if min_eig >= MIN_EIGENVALUE {
            return Ok((
                inv,
                logdet,
                InversionInfo {
                    ridge: None,
                    min_eigenvalue: min_eig,
                    diagonal: false,
                },
            ));
        }
    }
    let min_eig = exact_min_eigenvalue(c);
    let ridge = ridge_for(c);
    log::warn!("covariance of size {n} is near singular (min eigenvalue {min_eig:e}); adding ridge {ridge:e}");
    let mut ridged = c.clone();
    for i in 0..n {
        ridged[(i, i)] += S::lit(ridge);
    }
    match nested_block_inverse(&ridged, block) {
        Ok((inv, logdet)) => Ok((
            inv,
            logdet,
            InversionInfo {
                ridge: Some(ridge),
                min_eigenvalue: min_eig,
                diagonal: false,
            },
        )),
        Err(_) => Err(Error::ModelConstruction {
            reason: format!("covariance of size {n} is singular even after ridge {ridge:e}"),
            min_eigenvalue: min_eig,
        }),
    }
}

fn ridge_for<S: Scalar>(c: &DMatrix<S>) -> f64 {
    let n = c.nrows() as f64;
    let trace = c.trace().to_f64_lossy();
    let r = RIDGE_FACTOR * trace / n;
    if r > 0.0 {
        r
    } else {
        RIDGE_FACTOR
    }
}

fn is_diagonal<S: Scalar>(c: &DMatrix<S>) -> bool {
    let n = c.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || c[(i, j)] == S::zero()))
}

/// `1/λ_max(C⁻¹)` by power iteration on the (symmetric) inverse.
fn min_eigenvalue_from_inverse<S: Scalar>(inv: &DMatrix<S>) -> f64 {
    let n = inv.nrows();
    let mut v = DVector::from_fn(n, |i, _| S::one() + S::lit(i as f64 / n as f64));
    let mut lambda = S::zero();
    for _ in 0..POWER_ITERATIONS {
        let norm = v.norm();
        if norm <= S::zero() {
            return 0.0;
        }
        v /= norm;
        let w = inv * &v;
        lambda = v.dot(&w);
        v = w;
    }
    let l = lambda.to_f64_lossy();
    if l > 0.0 && l.is_finite() {
        1.0 / l
    } else {
        0.0
    }
}

fn exact_min_eigenvalue<S: Scalar>(c: &DMatrix<S>) -> f64 {
    c.clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.to_f64_lossy())
        .fold(f64::INFINITY, f64::min)
}

/// Inverse and log-determinant by recursive 2×2 block partitioning: the
/// leading `block × block` piece is Cholesky-factored and the remainder is
/// handled through its Schur complement, which keeps the same nested block
/// structure.
pub fn nested_block_inverse<S: Scalar>(c: &DMatrix<S>, block: usize) -> Result<(DMatrix<S>, S)> {
    let n = c.nrows();
    let block = block.max(1);
    let not_pd = || Error::ModelConstruction {
        reason: format!("leading block of a {n}x{n} covariance is not positive definite"),
        min_eigenvalue: f64::NAN,
    };
    if n <= block {
        let chol = c.clone().cholesky().ok_or_else(not_pd)?;
        let logdet = chol_logdet(chol.l_dirty(), n);
        return Ok((symmetrize(chol.inverse()), logdet));
    }
    let rest = n - block;
    let a = c.view((0, 0), (block, block)).into_owned();
    let b = c.view((0, block), (block, rest)).into_owned();
    let d = c.view((block, block), (rest, rest)).into_owned();
    let chol_a = a.cholesky().ok_or_else(not_pd)?;
    let logdet_a = chol_logdet(chol_a.l_dirty(), block);
    let a_inv = chol_a.inverse();
    let a_inv_b = chol_a.solve(&b);
    let schur = symmetrize(d - b.transpose() * &a_inv_b);
    let (schur_inv, logdet_s) = nested_block_inverse(&schur, block)?;
    let top_right = -(&a_inv_b * &schur_inv);
    let top_left = a_inv - &top_right * a_inv_b.transpose();
    let mut inv = DMatrix::zeros(n, n);
    inv.view_mut((0, 0), (block, block)).copy_from(&top_left);
    inv.view_mut((0, block), (block, rest)).copy_from(&top_right);
    inv.view_mut((block, 0), (rest, block)).copy_from(&top_right.transpose());
    inv.view_mut((block, block), (rest, rest)).copy_from(&schur_inv);
    Ok((symmetrize(inv), logdet_a + logdet_s))
}

fn chol_logdet<S: Scalar>(l: &DMatrix<S>, n: usize) -> S {
    let mut acc = S::zero();
    for i in 0..n {
        acc += l[(i, i)].ln();
    }
    acc * S::lit(2.0)
}
