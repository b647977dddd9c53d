//! Random orthoprojectors and the block-diagonal fused compression operator.
//!
//! A sensor compresses its length-`N` window `x_j` to `y_j = A_j x_j` with a
//! wide `M × N` matrix whose rows are orthonormal (`A_j A_jᵀ = I_M`). The
//! fusion center sees `y = A x` where `A = diag(A_1, …, A_L)`; the
//! block-diagonal matrix is never materialized.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, TAG_BLOCK, TAG_RETRY};
use crate::scalar::Scalar;

const MAX_RETRIES: usize = 3;

/// An `M × N` matrix with orthonormal rows, regenerated from `(m, n, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<S: Scalar> {
    entries: DMatrix<S>,
    seed: u64,
}

impl<S: Scalar> Projection<S> {
    /// Draws an iid Gaussian `N × M` matrix and keeps the Q factor of its
    /// QR decomposition, transposed.
    pub fn random(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidDimension(format!(
                "orthoprojector needs 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        let mut attempt_seed = seed;
        for attempt in 0..=MAX_RETRIES {
            if let Some(entries) = orthonormal_rows::<S>(m, n, attempt_seed) {
                return Ok(Self { entries, seed });
            }
            log::warn!("rank-deficient projection draw (m={m}, n={n}, seed={seed}, attempt={attempt})");
            attempt_seed = rng::derive(seed, &[TAG_RETRY, attempt as u64]);
        }
        Err(Error::DegenerateProjection {
            m,
            n,
            seed,
            attempts: MAX_RETRIES + 1,
        })
    }

    /// `M = N` identity, for uncompressed comparisons through the same code path.
    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            seed: 0,
        }
    }

    /// Wraps an explicit matrix after checking row orthonormality.
    pub fn from_matrix(entries: DMatrix<S>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() > entries.ncols() {
            return Err(Error::InvalidDimension(format!(
                "projection must be wide, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let p = Self { entries, seed: 0 };
        let err = p.orthonormality_error();
        if err > S::ORTHO_TOL {
            return Err(Error::InvalidDimension(format!(
                "rows are not orthonormal (max |AAᵀ - I| = {err:e})"
            )));
        }
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &DMatrix<S> {
        &self.entries
    }

    /// `max |A Aᵀ - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = &self.entries * self.entries.transpose();
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { S::one() } else { S::zero() };
                worst = worst.max((gram[(i, j)] - target).abs().to_f64_lossy());
            }
        }
        worst
    }

    pub fn compress(&self, x: &DVector<S>) -> Result<DVector<S>> {
        if x.len() != self.n() {
            return Err(Error::InvalidDimension(format!(
                "input length {} does not match projection width {}",
                x.len(),
                self.n()
            )));
        }
        Ok(&self.entries * x)
    }
}

fn orthonormal_rows<S: Scalar>(m: usize, n: usize, seed: u64) -> Option<DMatrix<S>> {
    let mut rng = rng::rng_from(seed);
    // Column-major fill of the N × M transpose: column k is row k of the draw.
    let draw = DMatrix::<S>::from_fn(n, m, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        S::lit(v)
    })
    .transpose();
    cholesky_qr2(&draw).or_else(|| householder_rows(draw))
}

/// CholeskyQR2: `A ← L⁻¹A` with `LLᵀ = AAᵀ`, repeated once unless the first
/// pass already lands within 1% of `ORTHO_TOL`. `None` when the Gram matrix
/// is too ill-conditioned for the Cholesky factor to be trusted.
fn cholesky_qr2<S: Scalar>(a: &DMatrix<S>) -> Option<DMatrix<S>> {
    let gram = a * a.transpose();
    let q = cholesky_step(gram, a, S::lit(1e-6))?;
    let gram = &q * q.transpose();
    let m = q.nrows();
    let tol = S::lit(S::ORTHO_TOL * 1e-2);
    let done = (0..m).all(|i| (0..m).all(|j| (gram[(i, j)] - if i == j { S::one() } else { S::zero() }).abs() <= tol));
    if done {
        return Some(q);
    }
    cholesky_step(gram, &q, S::lit(0.5))
}

fn cholesky_step<S: Scalar>(gram: DMatrix<S>, a: &DMatrix<S>, min_ratio: S) -> Option<DMatrix<S>> {
    let l = gram.cholesky()?.unpack();
    let diag = l.diagonal();
    let largest = diag.iter().copied().fold(S::zero(), |x, y| x.max(y));
    let smallest = diag.iter().copied().fold(largest, |x, y| x.min(y));
    if largest <= S::zero() || smallest <= largest * min_ratio {
        return None;
    }
    Some(lower_inverse(&l) * a)
}

/// Inverse of a lower-triangular matrix by row-wise forward substitution.
fn lower_inverse<S: Scalar>(l: &DMatrix<S>) -> DMatrix<S> {
    let m = l.nrows();
    // Row-major storage so each update is a contiguous axpy.
    let mut x = vec![S::zero(); m * m];
    for i in 0..m {
        let (done, rest) = x.split_at_mut(i * m);
        let row = &mut rest[..m];
        row[i] = S::one();
        for k in 0..i {
            let c = l[(i, k)];
            if c != S::zero() {
                for (r, v) in row[..=k].iter_mut().zip(&done[k * m..k * m + k + 1]) {
                    *r -= c * *v;
                }
            }
        }
        let inv = S::one() / l[(i, i)];
        row[..=i].iter_mut().for_each(|v| *v *= inv);
    }
    DMatrix::from_row_slice(m, m, &x)
}

fn householder_rows<S: Scalar>(draw: DMatrix<S>) -> Option<DMatrix<S>> {
    let m = draw.nrows();
    let qr = draw.transpose().qr();
    let r = qr.r();
    let diag: Vec<S> = (0..m).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().copied().fold(S::zero(), |a, b| a.max(b));
    let smallest = diag.iter().copied().fold(largest, |a, b| a.min(b));
    if largest <= S::zero() || smallest <= largest * S::lit(1e-10) {
        return None;
    }
    Some(qr.q().transpose())
}

/// Shorthand for [`Projection::random`].
pub fn make_orthoprojector<S: Scalar>(m: usize, n: usize, seed: u64) -> Result<Projection<S>> {
    Projection::random(m, n, seed)
}

/// `y = A x`.
pub fn compress<S: Scalar>(p: &Projection<S>, x: &DVector<S>) -> Result<DVector<S>> {
    p.compress(x)
}

/// The fused operator `diag(A_1, …, A_L)`, stored block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection<S: Scalar> {
    blocks: Vec<Projection<S>>,
}

impl<S: Scalar> BlockProjection<S> {
    pub fn new(blocks: Vec<Projection<S>>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidDimension("block projection needs at least one block".into()))?;
        let (m, n) = (first.m(), first.n());
        if blocks.iter().any(|b| b.m() != m || b.n() != n) {
            return Err(Error::InvalidDimension(
                "all blocks must share the same (M, N)".into(),
            ));
        }
        Ok(Self { blocks })
    }

    /// `L` independent orthoprojectors; block `j` uses a sub-seed derived from `(seed, j)`.
    pub fn random(m: usize, n: usize, l: usize, seed: u64) -> Result<Self> {
        let blocks = (0..l)
            .map(|j| Projection::random(m, n, rng::derive(seed, &[TAG_BLOCK, j as u64])))
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    pub fn identity(n: usize, l: usize) -> Self {
        Self {
            blocks: (0..l).map(|_| Projection::identity(n)).collect(),
        }
    }

    pub fn l(&self) -> usize {
        self.blocks.len()
    }

    pub fn m(&self) -> usize {
        self.blocks[0].m()
    }

    pub fn n(&self) -> usize {
        self.blocks[0].n()
    }

    pub fn blocks(&self) -> &[Projection<S>] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &Projection<S> {
        &self.blocks[j]
    }

    /// Column `i` (0-based, in `[0, NL)`) of the fused `ML × NL` operator.
    pub fn column(&self, i: usize) -> DVector<S> {
        let (m, n) = (self.m(), self.n());
        let (j, local) = (i / n, i % n);
        let mut col = DVector::zeros(m * self.l());
        col.rows_mut(j * m, m)
            .copy_from(&self.blocks[j].entries().column(local));
        col
    }

    /// Dense `ML × NL` matrix. Only meant for oracles on small instances.
    pub fn to_dense(&self) -> DMatrix<S> {
        let (m, n, l) = (self.m(), self.n(), self.l());
        let mut dense = DMatrix::zeros(m * l, n * l);
        for (j, b) in self.blocks.iter().enumerate() {
            dense.view_mut((j * m, j * n), (m, n)).copy_from(b.entries());
        }
        dense
    }

    pub fn compress(&self, x: &DVector<S>) -> Result<DVector<S>> {
        let (m, n, l) = (self.m(), self.n(), self.l());
        if x.len() != n * l {
            return Err(Error::InvalidDimension(format!(
                "input length {} is not N*L = {}",
                x.len(),
                n * l
            )));
        }
        let mut y = DVector::zeros(m * l);
        for (j, b) in self.blocks.iter().enumerate() {
            let seg = x.rows(j * n, n);
            y.rows_mut(j * m, m).copy_from(&(b.entries() * seg));
        }
        Ok(y)
    }
}

/// Segment-wise `y_j = A_j x_j`.
pub fn block_compress<S: Scalar>(bp: &BlockProjection<S>, x: &DVector<S>) -> Result<DVector<S>> {
    bp.compress(x)
}

/// Propagates first and second moments: `μ = A β`, `C = A D Aᵀ` (block by block,
/// then symmetrized).
pub fn compress_stats<S: Scalar>(
    bp: &BlockProjection<S>,
    beta: &DVector<S>,
    d: &DMatrix<S>,
) -> Result<(DVector<S>, DMatrix<S>)> {
    let (m, n, l) = (bp.m(), bp.n(), bp.l());
    if beta.len() != n * l || d.nrows() != n * l || d.ncols() != n * l {
        return Err(Error::InvalidDimension(format!(
            "moments must be length {0} and {0}x{0}",
            n * l
        )));
    }
    check_symmetric(d)?;
    let mu = bp.compress(beta)?;
    let mut c = DMatrix::zeros(m * l, m * l);
    for j in 0..l {
        let aj = bp.block(j).entries();
        for k in j..l {
            let ak = bp.block(k).entries();
            let djk = d.view((j * n, k * n), (n, n));
            let cjk = aj * djk * ak.transpose();
            c.view_mut((j * m, k * m), (m, m)).copy_from(&cjk);
            if j != k {
                let cjk_t = d.view((k * n, j * n), (n, n));
                let ckj = ak * cjk_t * aj.transpose();
                c.view_mut((k * m, j * m), (m, m)).copy_from(&ckj);
            }
        }
    }
    Ok((mu, symmetrize(c)))
}

/// Fast path of [`compress_stats`] for moments whose blocks are scalar
/// multiples: `β_j = b_j·1` and `D_jk = d_jk·I`. Then `C_jk = d_jk A_j A_kᵀ`.
pub fn compress_block_scalar<S: Scalar>(
    bp: &BlockProjection<S>,
    means: &[f64],
    cov: &[Vec<f64>],
) -> Result<(DVector<S>, DMatrix<S>)> {
    let (m, l) = (bp.m(), bp.l());
    if means.len() != l || cov.len() != l || cov.iter().any(|r| r.len() != l) {
        return Err(Error::InvalidDimension(format!(
            "block-scalar moments must be {l} means and an {l}x{l} grid"
        )));
    }
    for j in 0..l {
        for k in 0..l {
            if (cov[j][k] - cov[k][j]).abs() > 1e-9 * (1.0 + cov[j][k].abs()) {
                return Err(Error::InvalidCovariance(format!(
                    "block grid not symmetric at ({j},{k})"
                )));
            }
        }
    }
    let mut mu = DVector::zeros(m * l);
    for (j, b) in bp.blocks().iter().enumerate() {
        let row_sums = b.entries().column_sum();
        mu.rows_mut(j * m, m).copy_from(&(row_sums * S::lit(means[j])));
    }
    let mut c = DMatrix::zeros(m * l, m * l);
    for j in 0..l {
        for k in j..l {
            if cov[j][k] == 0.0 {
                continue;
            }
            if j == k {
                // A_j A_jᵀ = I as built, so diagonal blocks stay exactly diagonal.
                for i in 0..m {
                    c[(j * m + i, j * m + i)] = S::lit(cov[j][j]);
                }
                continue;
            }
            let g = bp.block(j).entries() * bp.block(k).entries().transpose() * S::lit(cov[j][k]);
            c.view_mut((k * m, j * m), (m, m)).copy_from(&g.transpose());
            c.view_mut((j * m, k * m), (m, m)).copy_from(&g);
        }
    }
    Ok((mu, symmetrize(c)))
}

pub(crate) fn check_symmetric<S: Scalar>(d: &DMatrix<S>) -> Result<()> {
    let scale = d.amax().max(S::one());
    let tol = S::lit(S::SYMMETRY_TOL) * scale;
    for i in 0..d.nrows() {
        for j in (i + 1)..d.ncols() {
            if (d[(i, j)] - d[(j, i)]).abs() > tol {
                return Err(Error::InvalidCovariance(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    d[(i, j)],
                    d[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// `(C + Cᵀ) / 2`.
pub fn symmetrize<S: Scalar>(c: DMatrix<S>) -> DMatrix<S> {
    let ct = c.transpose();
    (c + ct) * S::lit(0.5)
}
