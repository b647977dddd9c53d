//! Sample covariance, structured least-squares recovery of off-diagonal
//! covariance entries from compressed data, and the CAV statistic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::BlockProjection;
use crate::scalar::Scalar;

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsMode {
    /// Full normal equations of the Frobenius objective.
    #[default]
    Exact,
    /// Normal equations without the `(a_iᵀa_s)(a_jᵀa_r)` cross term.
    Reduced,
}

/// Recovered off-diagonal entries and the resulting CAV statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct OffDiagEstimate {
    /// 0-based `(i, j)` pairs into `[0, NL)`, `i < j`.
    pub u_set: Vec<(usize, usize)>,
    /// One entry per pair, or a single shared value when tied.
    pub d_hat: Vec<f64>,
    pub tied: bool,
    pub eta: f64,
    pub lambda_cov: f64,
}

impl OffDiagEstimate {
    /// `‖d̂_U‖₁` over all pairs. A tied value counts once per pair.
    pub fn l1(&self) -> f64 {
        if self.tied {
            self.u_set.len() as f64 * self.d_hat.first().map_or(0.0, |d| d.abs())
        } else {
            self.d_hat.iter().map(|d| d.abs()).sum()
        }
    }
}

/// `(1/T) Σ (y_t - m)(y_t - m)ᵀ` with `m` the known mean or the sample mean.
pub fn sample_cov<S: Scalar>(frames: &[DVector<S>], known_mean: Option<&DVector<S>>) -> Result<DMatrix<S>> {
    let t = frames.len();
    let needed = if known_mean.is_some() { 1 } else { 2 };
    if t < needed {
        return Err(Error::InsufficientData(format!("sample covariance needs at least {needed} frames, got {t}")));
    }
    let dim = frames[0].len();
    if frames.iter().any(|f| f.len() != dim) || known_mean.is_some_and(|m| m.len() != dim) {
        return Err(Error::InvalidDimension("frames and mean must share one length".into()));
    }
    let mean = match known_mean {
        Some(m) => m.clone(),
        None => frames.iter().fold(DVector::zeros(dim), |acc, f| acc + f) / S::lit(t as f64),
    };
    let mut centered = DMatrix::zeros(dim, t);
    for (k, f) in frames.iter().enumerate() {
        centered.set_column(k, &(f - &mean));
    }
    let mut c = &centered * centered.transpose() / S::lit(t as f64);
    // Exact symmetry regardless of GEMM rounding.
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = c[(i, j)];
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Pairs `(j·N + n, k·N + n)` for `n < N`: same time index, sensors `j < k`.
pub fn cross_sensor_pairs(n: usize, j: usize, k: usize) -> Vec<(usize, usize)> {
    assert!(j < k, "sensor indices must satisfy j < k");
    (0..n).map(|t| (j * n + t, k * n + t)).collect()
}

/// Everything about the LS problem that depends only on the projection and
/// `U`, so repeated trials with a fixed projection only pay for `b`.
#[derive(Debug, Clone)]
pub struct LsPattern<S: Scalar> {
    u_set: Vec<(usize, usize)>,
    mode: LsMode,
    kind: PatternKind<S>,
    /// `N/M`, the trace rescaling in `η`.
    trace_scale: f64,
}

#[derive(Debug, Clone)]
enum PatternKind<S: Scalar> {
    /// `d̂ = ⟨C, W⟩ / denom` with `W = S` (reduced) or `S + Sᵀ` (exact), `S = P_I P_Jᵀ`.
    Tied { weight: DMatrix<S>, denom: S },
    /// `B d = b`, `B = V Λ Vᵀ` cached; `b[m] = a_iᵀ C a_j` (symmetrised in exact mode).
    Untied {
        p_i: DMatrix<S>,
        p_j: DMatrix<S>,
        eigvecs: DMatrix<S>,
        eigvals: DVector<S>,
    },
}

impl<S: Scalar> LsPattern<S> {
    pub fn new(bp: &BlockProjection<S>, u_set: &[(usize, usize)], mode: LsMode, tied: bool) -> Result<Self> {
        let nl = bp.n() * bp.l();
        if u_set.is_empty() {
            return Err(Error::Config("index set U must be non-empty".into()));
        }
        if let Some(&(i, j)) = u_set.iter().find(|&&(i, j)| !(i < j && j < nl)) {
            return Err(Error::Config(format!("pair ({i}, {j}) invalid: need i < j < NL = {nl}")));
        }
        let ml = bp.m() * bp.l();
        let k = u_set.len();
        let mut p_i = DMatrix::zeros(ml, k);
        let mut p_j = DMatrix::zeros(ml, k);
        for (c, &(i, j)) in u_set.iter().enumerate() {
            p_i.set_column(c, &bp.column(i));
            p_j.set_column(c, &bp.column(j));
        }
        let kind = if tied {
            let s = &p_i * p_j.transpose();
            let weight = match mode {
                LsMode::Reduced => s,
                LsMode::Exact => &s + s.transpose(),
            };
            let denom = weight.norm_squared();
            if denom.to_f64_lossy() <= 0.0 {
                return Err(Error::LeastSquares { condition: f64::INFINITY });
            }
            PatternKind::Tied { weight, denom }
        } else {
            let g_ii = p_i.transpose() * &p_i;
            let g_jj = p_j.transpose() * &p_j;
            let mut b = g_ii.component_mul(&g_jj);
            if mode == LsMode::Exact {
                let g_ij = p_i.transpose() * &p_j;
                b += g_ij.component_mul(&g_ij.transpose());
            }
            let eig = b.symmetric_eigen();
            let max = eig.eigenvalues.max().to_f64_lossy();
            let min = eig.eigenvalues.min().to_f64_lossy();
            let condition = if min > 0.0 { max / min } else { f64::INFINITY };
            if condition > MAX_CONDITION {
                return Err(Error::LeastSquares { condition });
            }
            PatternKind::Untied {
                p_i,
                p_j,
                eigvecs: eig.eigenvectors,
                eigvals: eig.eigenvalues,
            }
        };
        Ok(Self {
            u_set: u_set.to_vec(),
            mode,
            kind,
            trace_scale: bp.n() as f64 / bp.m() as f64,
        })
    }

    pub fn mode(&self) -> LsMode {
        self.mode
    }

    pub fn u_set(&self) -> &[(usize, usize)] {
        &self.u_set
    }

    pub fn is_tied(&self) -> bool {
        matches!(self.kind, PatternKind::Tied { .. })
    }

    pub fn solve(&self, c_tilde: &DMatrix<S>) -> Result<OffDiagEstimate> {
        let (d_hat, tied) = match &self.kind {
            PatternKind::Tied { weight, denom } => {
                if c_tilde.shape() != weight.shape() {
                    return Err(shape_error(c_tilde, weight.nrows()));
                }
                (vec![(c_tilde.dot(weight) / *denom).to_f64_lossy()], true)
            }
            PatternKind::Untied {
                p_i,
                p_j,
                eigvecs,
                eigvals,
            } => {
                if c_tilde.shape() != (p_i.nrows(), p_i.nrows()) {
                    return Err(shape_error(c_tilde, p_i.nrows()));
                }
                let cj = c_tilde * p_j;
                let mut b = DVector::from_iterator(cj.ncols(), (0..cj.ncols()).map(|c| p_i.column(c).dot(&cj.column(c))));
                if self.mode == LsMode::Exact {
                    let ci = c_tilde * p_i;
                    let other = DVector::from_iterator(ci.ncols(), (0..ci.ncols()).map(|c| p_j.column(c).dot(&ci.column(c))));
                    b = (b + other) * S::lit(0.5);
                }
                let coeffs = eigvecs.transpose() * b;
                let scaled = coeffs.component_div(eigvals);
                let d = eigvecs * scaled;
                (d.iter().map(|v| v.to_f64_lossy()).collect(), false)
            }
        };
        let eta = self.trace_scale * c_tilde.trace().to_f64_lossy();
        let mut est = OffDiagEstimate {
            u_set: self.u_set.clone(),
            d_hat,
            tied,
            eta,
            lambda_cov: f64::NAN,
        };
        est.lambda_cov = cav_stat(&est)?;
        Ok(est)
    }
}

fn shape_error<S: Scalar>(c: &DMatrix<S>, expected: usize) -> Error {
    Error::InvalidDimension(format!("sample covariance is {:?}, expected {expected}x{expected}", c.shape()))
}

/// One-shot least-squares recovery of `D_x[i, j]` for `(i, j) ∈ U` (untied).
pub fn ls_offdiag<S: Scalar>(
    c_tilde: &DMatrix<S>,
    bp: &BlockProjection<S>,
    u_set: &[(usize, usize)],
    mode: LsMode,
) -> Result<OffDiagEstimate> {
    LsPattern::new(bp, u_set, mode, false)?.solve(c_tilde)
}

/// `Λ_cov = (η + 2‖d̂_U‖₁)/η`.
pub fn cav_stat(est: &OffDiagEstimate) -> Result<f64> {
    if !(est.eta > 0.0) {
        return Err(Error::DegenerateData(format!("eta = {} must be positive", est.eta)));
    }
    Ok((est.eta + 2.0 * est.l1()) / est.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::scenarios::{sample_frames, Hypothesis, ScenarioId, ScenarioParams, ScenarioSpec};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn forward(bp: &BlockProjection<f64>, u: &[(usize, usize)], d: &[f64]) -> DMatrix<f64> {
        let a = bp.to_dense();
        let nl = a.ncols();
        let mut dx = DMatrix::zeros(nl, nl);
        for (&(i, j), &v) in u.iter().zip(d) {
            dx[(i, j)] = v;
            dx[(j, i)] = v;
        }
        &a * dx * a.transpose()
    }

    #[test]
    fn sample_cov_trivial_cases() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let zero = sample_cov(&vec![c.clone(); 5], None).unwrap();
        assert!(zero.amax() < 1e-15);
        let v = DVector::from_vec(vec![1.0, 2.0]);
        let frames = vec![v.clone(), -v.clone()];
        let got = sample_cov(&frames, Some(&DVector::zeros(2))).unwrap();
        assert!((got - &v * v.transpose()).amax() < 1e-15);
        assert!(sample_cov(&[v], None).is_err());
    }

    #[test]
    fn sample_cov_of_white_noise() {
        let mut rng = rng_from(4);
        let frames: Vec<DVector<f64>> = (0..10_000)
            .map(|_| DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let c = sample_cov(&frames, None).unwrap();
        assert!((c - DMatrix::identity(6, 6)).amax() <= 0.1);
    }

    #[test]
    fn exact_mode_recovers_noiseless_pairs() {
        let bp = BlockProjection::<f64>::random(6, 10, 2, 11).unwrap();
        let u = vec![(0, 10), (3, 13), (2, 15)];
        let d = [0.7, -0.3, 0.2];
        // The identity is D_x's diagonal; it is invisible to cross-sensor pairs.
        let c = forward(&bp, &u, &d) + DMatrix::identity(12, 12) * 5.0;
        let est = ls_offdiag(&c, &bp, &u, LsMode::Exact).unwrap();
        for (got, want) in est.d_hat.iter().zip(d) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        let zero = ls_offdiag(&DMatrix::identity(12, 12), &bp, &u, LsMode::Exact).unwrap();
        assert!(zero.d_hat.iter().all(|v| v.abs() <= 1e-8));
        assert_eq!(zero.lambda_cov, 1.0);
    }

    #[test]
    fn tied_recovers_shared_value() {
        let bp = BlockProjection::<f64>::random(8, 40, 2, 12).unwrap();
        let u = cross_sensor_pairs(40, 0, 1);
        let c = forward(&bp, &u, &vec![-0.4; 40]) + DMatrix::identity(16, 16) * 3.0;
        for mode in [LsMode::Exact, LsMode::Reduced] {
            let est = LsPattern::new(&bp, &u, mode, true).unwrap().solve(&c).unwrap();
            assert!((est.d_hat[0] + 0.4).abs() < 1e-10);
            assert!((est.l1() - 16.0).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_matches_dense_least_squares() {
        // NL = 8, ML = 6, |U| = 2.
        let bp = BlockProjection::<f64>::random(3, 4, 2, 13).unwrap();
        let u = vec![(0, 4), (1, 6)];
        let mut rng = rng_from(14);
        let g = DMatrix::<f64>::from_fn(6, 6, |_, _| StandardNormal.sample(&mut rng));
        let c = &g * g.transpose();
        let est = ls_offdiag(&c, &bp, &u, LsMode::Exact).unwrap();
        // Columns are vec(a_i a_jᵀ + a_j a_iᵀ); solve min ‖vec(C) - X d‖ by SVD.
        let x = DMatrix::from_fn(36, 2, |row, m| {
            let (i, j) = u[m];
            let (ai, aj) = (bp.column(i), bp.column(j));
            let (r, col) = (row % 6, row / 6);
            ai[r] * aj[col] + aj[r] * ai[col]
        });
        let rhs = DVector::from_column_slice(c.as_slice());
        let oracle = x.svd(true, true).solve(&rhs, 1e-14).unwrap();
        for m in 0..2 {
            assert!((est.d_hat[m] - oracle[m]).abs() < 1e-8);
        }
    }

    #[test]
    fn reduced_and_exact_agree_on_cross_sensor_pairs() {
        let bp = BlockProjection::<f64>::random(5, 12, 2, 15).unwrap();
        let u = vec![(0, 12), (4, 16), (7, 19)];
        let mut rng = rng_from(16);
        let g = DMatrix::<f64>::from_fn(10, 10, |_, _| StandardNormal.sample(&mut rng));
        let c = &g * g.transpose();
        let exact = ls_offdiag(&c, &bp, &u, LsMode::Exact).unwrap();
        let reduced = ls_offdiag(&c, &bp, &u, LsMode::Reduced).unwrap();
        for (a, b) in exact.d_hat.iter().zip(&reduced.d_hat) {
            assert!((a - b).abs() < 1e-9);
        }
        // Within one sensor the dropped cross term matters.
        let within = vec![(0, 3), (1, 5)];
        let e = ls_offdiag(&c, &bp, &within, LsMode::Exact).unwrap();
        let p = ls_offdiag(&c, &bp, &within, LsMode::Reduced).unwrap();
        assert!((e.d_hat[0] - p.d_hat[0]).abs() > 1e-6);
    }

    #[test]
    fn singular_system_is_reported() {
        let bp = BlockProjection::<f64>::random(2, 10, 2, 17).unwrap();
        let u = cross_sensor_pairs(10, 0, 1);
        match ls_offdiag(&DMatrix::identity(4, 4), &bp, &u, LsMode::Exact) {
            Err(Error::LeastSquares { condition }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected LS error, got {other:?}"),
        }
        assert!(LsPattern::new(&bp, &[(3, 3)], LsMode::Exact, false).is_err());
        assert!(LsPattern::new(&bp, &[], LsMode::Exact, true).is_err());
    }

    #[test]
    fn cav_arithmetic() {
        let est = OffDiagEstimate {
            u_set: vec![(0, 1)],
            d_hat: vec![0.5],
            tied: false,
            eta: 2.0,
            lambda_cov: 0.0,
        };
        assert_eq!(cav_stat(&est).unwrap(), 1.5);
        assert!(cav_stat(&OffDiagEstimate { eta: 0.0, ..est }).is_err());
    }

    #[test]
    fn tied_estimate_is_nearly_unbiased_for_case2() {
        let spec = ScenarioSpec::new(ScenarioId::Case2, 200, ScenarioParams::default());
        let truth = crate::scenarios::closed_form_stats(&spec).unwrap().h1.cov[0][1];
        let bp = BlockProjection::<f64>::random(40, 200, 2, 18).unwrap();
        let pattern = LsPattern::new(&bp, &cross_sensor_pairs(200, 0, 1), LsMode::Exact, true).unwrap();
        let mut mean = 0.0;
        for trial in 0..200u64 {
            let frames = sample_frames(&spec, Hypothesis::H1, 1000 + trial, 100).unwrap();
            let y: Vec<_> = frames.iter().map(|x| bp.compress(x).unwrap()).collect();
            mean += pattern.solve(&sample_cov(&y, None).unwrap()).unwrap().d_hat[0] / 200.0;
        }
        assert!((mean - truth).abs() < 0.1 * truth.abs(), "{mean} vs {truth}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn cav_at_least_one(seed in any::<u64>()) {
            let bp = BlockProjection::<f64>::random(4, 8, 2, seed).unwrap();
            let mut rng = rng_from(seed);
            let g = DMatrix::<f64>::from_fn(8, 8, |_, _| StandardNormal.sample(&mut rng));
            let c = &g * g.transpose();
            let est = LsPattern::new(&bp, &cross_sensor_pairs(8, 0, 1), LsMode::Exact, true).unwrap().solve(&c).unwrap();
            prop_assert!(est.lambda_cov >= 1.0);
            prop_assert_eq!(est.lambda_cov == 1.0, est.d_hat[0] == 0.0);
        }
    }
}
