//! Diagonal-plus-low-rank GP posterior for large sample counts.
//!
//! A sample-space Gaussian map `phi` (rank `m_phi`) replaces the exact
//! posterior's dense `n x n` solve with Sherman-Woodbury-Morrison solves
//! against `H1 + U C U'`, where `U = K1 phi'`, `C = (phi K1 phi')^{-1}` and
//! `H1 = diag(K1 - U C U') + I`. The smoother satisfies `H2 K1 = U C U'`, and
//! the posterior moments are evaluated through push-through identities so no
//! `n x n` matrix is ever inverted or factorized:
//!
//! * rate: `b = y' (H1 + U C U')^{-1} y / 2`
//! * mean: `U C U' (H1 + U C U')^{-1} y`
//! * scale: `(2 b / n) [K1 - U C U' (H1 + U C U')^{-1} U C U']`
//!
//! With `phi` the identity these collapse to the exact posterior, which the
//! tests use as a reduction oracle.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::gamma::ln_gamma;

use crate::error::{CgpError, Result};
use crate::exact::PredictiveDistribution;
use crate::kernel::{cross_gram, Bandwidth};
use crate::par;
use crate::projection::{ProjectionKind, ProjectionMatrix};

/// Escalating ridge applied to `phi K1 phi'` when its factorization fails.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Solver applying `(diag(h) + U C U')^{-1}` through the m-dimensional core.
pub struct SwmSolver {
    h: DVector<f64>,
    u: DMatrix<f64>,
    core_chol: Cholesky<f64, Dyn>,
    core_ln_det: f64,
}

impl SwmSolver {
    /// Builds the solver from the diagonal `h`, the low-rank factor `u`, and
    /// the core inverse `g = C^{-1}` (already including any ridge).
    pub fn new(h: DVector<f64>, u: DMatrix<f64>, g: &DMatrix<f64>) -> Result<Self> {
        let n = h.len();
        if u.nrows() != n || g.nrows() != u.ncols() || g.ncols() != u.ncols() {
            return Err(CgpError::Dimension(format!(
                "inconsistent solver dims: h {}, u {}x{}, core {}x{}",
                n,
                u.nrows(),
                u.ncols(),
                g.nrows(),
                g.ncols()
            )));
        }
        if h.iter().any(|v| *v <= 0.0) {
            return Err(CgpError::Numerical("diagonal must be positive".into()));
        }
        // core = C^{-1} + U' D^{-1} U
        let mut dinv_u = u.clone();
        for i in 0..n {
            let inv = 1.0 / h[i];
            dinv_u.row_mut(i).scale_mut(inv);
        }
        let core = g + u.tr_mul(&dinv_u);
        let core_chol = Cholesky::new(core)
            .ok_or_else(|| CgpError::Numerical("low-rank core matrix is singular".into()))?;
        let core_ln_det = 2.0
            * core_chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok(SwmSolver {
            h,
            u,
            core_chol,
            core_ln_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    fn ln_det_core(&self) -> f64 {
        self.core_ln_det
    }

    /// Diagonal of the corrected noise matrix.
    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    /// Applies `(diag(h) + U C U')^{-1}` to each column of `rhs`.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut dr = rhs.clone();
        for i in 0..self.h.len() {
            let inv = 1.0 / self.h[i];
            dr.row_mut(i).scale_mut(inv);
        }
        let t = self.u.tr_mul(&dr);
        let s = self.core_chol.solve(&t);
        let mut us = &self.u * s;
        for i in 0..self.h.len() {
            let inv = 1.0 / self.h[i];
            us.row_mut(i).scale_mut(inv);
        }
        dr - us
    }

    pub fn solve_vector(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        DVector::from_column_slice(self.solve_matrix(&m).as_slice())
    }
}

/// Low-rank conjugate posterior for one member.
pub struct LowRankPosterior {
    n: usize,
    b: f64,
    degenerate: bool,
    lambda: Bandwidth,
    zc: DMatrix<f64>,
    solver: SwmSolver,
    /// `W y` with `W = (H1 + U C U')^{-1}`.
    w_y: DVector<f64>,
    /// Factor with `V V' = U C U'`.
    v: DMatrix<f64>,
    ln_det: f64,
    /// Ridge that was applied to `phi K1 phi'` before factorization.
    pub applied_jitter: f64,
}

const FIT_CHUNK: usize = 256;

/// Fits the low-rank posterior.
///
/// Kernel rows are assembled in fixed chunks and immediately contracted with
/// `phi'`, so memory stays `O(n m_phi)` and no dense `n x n` matrix is formed
/// or factorized. Total cost is `O(n^2 (m + m_phi))` for the assembly plus
/// `O(n m_phi^2)` for the solver setup.
pub fn fit_lowrank(
    zc: DMatrix<f64>,
    y: DVector<f64>,
    lambda: Bandwidth,
    phi: &ProjectionMatrix,
) -> Result<LowRankPosterior> {
    let n = zc.nrows();
    if n < 2 {
        return Err(CgpError::Config(format!(
            "posterior needs at least 2 observations, got {n}"
        )));
    }
    if y.len() != n {
        return Err(CgpError::Dimension(format!(
            "response length {} does not match {} design rows",
            y.len(),
            n
        )));
    }
    if phi.spec.kind != ProjectionKind::Sample {
        return Err(CgpError::Config(
            "low-rank fit expects a sample-kind projection".into(),
        ));
    }
    if phi.cols() != n || phi.rows() > n {
        return Err(CgpError::Dimension(format!(
            "sample projection is {}x{}, need m_phi <= n = {n} columns",
            phi.rows(),
            phi.cols()
        )));
    }
    let scale = y.amax().max(1.0);
    if y.mean().abs() > 1e-10 * scale {
        return Err(CgpError::Data(format!(
            "response must be centered, found mean {}",
            y.mean()
        )));
    }

    let parts = assemble_solver(&zc, lambda, phi)?;
    let w_y = parts.solver.solve_vector(&y);
    let b = 0.5 * y.dot(&w_y);
    Ok(parts.into_posterior(zc, lambda, w_y, b))
}

/// Rebuilds a posterior from stored parts (design, bandwidth, sample map,
/// solve vector, rate). The solver reassembles through the same code path as
/// fitting, and the stored solve vector is used as-is, so predictions
/// reproduce bit-exactly.
pub fn rebuild(
    zc: DMatrix<f64>,
    lambda: Bandwidth,
    phi: &ProjectionMatrix,
    w_y: DVector<f64>,
    b: f64,
) -> Result<LowRankPosterior> {
    if w_y.len() != zc.nrows() {
        return Err(CgpError::Dimension(format!(
            "solve vector length {} does not match {} design rows",
            w_y.len(),
            zc.nrows()
        )));
    }
    let parts = assemble_solver(&zc, lambda, phi)?;
    Ok(parts.into_posterior(zc, lambda, w_y, b))
}

struct SolverParts {
    solver: SwmSolver,
    v: DMatrix<f64>,
    ln_det: f64,
    applied_jitter: f64,
}

impl SolverParts {
    fn into_posterior(
        self,
        zc: DMatrix<f64>,
        lambda: Bandwidth,
        w_y: DVector<f64>,
        b: f64,
    ) -> LowRankPosterior {
        LowRankPosterior {
            n: zc.nrows(),
            b,
            degenerate: b <= 0.0,
            lambda,
            zc,
            solver: self.solver,
            w_y,
            v: self.v,
            ln_det: self.ln_det,
            applied_jitter: self.applied_jitter,
        }
    }
}

fn assemble_solver(
    zc: &DMatrix<f64>,
    lambda: Bandwidth,
    phi: &ProjectionMatrix,
) -> Result<SolverParts> {
    let n = zc.nrows();

    // U = K1 phi', assembled from kernel row chunks.
    let phi_t = phi.transposed(); // n x m_phi
    let chunks = par::chunk_ranges(n, FIT_CHUNK);
    let blocks: Vec<DMatrix<f64>> = par::map_indexed(&chunks, |_, &(lo, hi)| {
        let rows = zc.rows_range(lo..hi).into_owned();
        let k_block = cross_gram(&rows, zc, lambda).expect("matching widths");
        k_block * phi_t
    });
    let m_phi = phi.rows();
    let mut u = DMatrix::zeros(n, m_phi);
    for (&(lo, hi), block) in chunks.iter().zip(&blocks) {
        u.rows_range_mut(lo..hi).copy_from(block);
    }

    // Core Gram phi K1 phi', symmetrized, with escalating ridge.
    let mut g = phi_t.tr_mul(&u);
    for i in 0..m_phi {
        for j in (i + 1)..m_phi {
            let s = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    let mut applied_jitter = f64::NAN;
    let mut g_chol = None;
    for &jitter in JITTER_LADDER.iter() {
        let mut gj = g.clone();
        for i in 0..m_phi {
            gj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(gj) {
            applied_jitter = jitter;
            g_chol = Some(c);
            break;
        }
    }
    let g_chol = g_chol.ok_or_else(|| {
        CgpError::Numerical(format!(
            "compressed core matrix not positive definite after ridge {}",
            JITTER_LADDER[JITTER_LADDER.len() - 1]
        ))
    })?;
    for i in 0..m_phi {
        g[(i, i)] += applied_jitter;
    }
    let g_ln_det = 2.0
        * g_chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();

    // V = U L^{-T} so that V V' = U C U'; h_i = 1 + (1 - ||V_i||^2).
    let v = g_chol
        .l()
        .solve_lower_triangular(&u.transpose())
        .ok_or_else(|| CgpError::Numerical("triangular solve failed".into()))?
        .transpose();
    let h = DVector::from_fn(n, |i, _| (2.0 - v.row(i).norm_squared()).max(1.0));
    let sum_ln_h: f64 = h.iter().map(|x| x.ln()).sum();

    let solver = SwmSolver::new(h, u, &g)?;
    let ln_det = sum_ln_h + solver.ln_det_core() - g_ln_det;
    Ok(SolverParts {
        solver,
        v,
        ln_det,
        applied_jitter,
    })
}

impl LowRankPosterior {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.solver.rank()
    }

    /// Shape parameter of the residual-variance posterior, `n / 2`.
    pub fn a(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// Rate parameter `y' (H2 K1 + H1)^{-1} y / 2`.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn lambda(&self) -> Bandwidth {
        self.lambda
    }

    pub fn solver(&self) -> &SwmSolver {
        &self.solver
    }

    /// Solution of `(H2 K1 + H1) v = y`.
    pub fn y_solve(&self) -> &DVector<f64> {
        &self.w_y
    }

    pub fn compressed_design(&self) -> &DMatrix<f64> {
        &self.zc
    }

    /// Posterior mean of the latent regression values without any dense
    /// `n x n` product: `V (V' W y)`.
    pub fn posterior_mean(&self) -> DVector<f64> {
        &self.v * (self.v.tr_mul(&self.w_y))
    }

    /// Diagonal of the posterior scale matrix,
    /// `(2 b / n) [1 - diag(V (V' W V) V')]` entrywise.
    pub fn posterior_scale_diag(&self) -> DVector<f64> {
        let wv = self.solver.solve_matrix(&self.v);
        let m = self.v.tr_mul(&wv);
        let vm = &self.v * m;
        let factor = 2.0 * self.b / self.n as f64;
        DVector::from_fn(self.n, |i, _| {
            let t = self.v.row(i).tr_dot(&vm.row(i).transpose());
            (factor * (1.0 - t)).max(0.0)
        })
    }

    /// Student-t predictive distribution at compressed test rows; every
    /// training-size solve goes through the low-rank solver.
    pub fn predict(
        &self,
        zc_star: &DMatrix<f64>,
        want_full: bool,
    ) -> Result<PredictiveDistribution> {
        if zc_star.ncols() != self.zc.ncols() {
            return Err(CgpError::Dimension(format!(
                "test design has {} columns, training used {}",
                zc_star.ncols(),
                self.zc.ncols()
            )));
        }
        let k_pred_1 = cross_gram(zc_star, &self.zc, self.lambda)?;
        let locations = &k_pred_1 * &self.w_y;
        let solved = self.solver.solve_matrix(&k_pred_1.transpose());
        let factor = 2.0 * self.b / self.n as f64;
        let n_pred = zc_star.nrows();

        let mut scales = DVector::zeros(n_pred);
        for i in 0..n_pred {
            let q = k_pred_1.row(i).tr_dot(&solved.column(i));
            scales[i] = (factor * (2.0 - q)).max(0.0).sqrt();
        }
        let full_scale = if want_full {
            let k_pred = crate::kernel::gram(zc_star, self.lambda).k;
            let mut full = k_pred - &k_pred_1 * &solved;
            for i in 0..n_pred {
                full[(i, i)] += 1.0;
            }
            full *= factor;
            Some(full)
        } else {
            None
        };
        Ok(PredictiveDistribution {
            df: self.n,
            locations,
            scales,
            full_scale,
        })
    }

    /// Log marginal likelihood with the determinant evaluated through the
    /// low-rank determinant lemma.
    pub fn log_marginal(&self) -> f64 {
        if self.degenerate {
            return f64::NEG_INFINITY;
        }
        let n = self.n as f64;
        -0.5 * self.ln_det + 0.5 * n * 2f64.ln() + ln_gamma(0.5 * n)
            - 0.5 * n * (2.0 * self.b).ln()
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::kernel::gram;
    use crate::projection::{generate, ProjectionSpec};
    use crate::rng::SeedStream;

    fn random_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut stream = SeedStream::new(seed);
        DMatrix::from_fn(n, m, |_, _| stream.normal())
    }

    fn centered_response(n: usize, seed: u64) -> DVector<f64> {
        let mut stream = SeedStream::new(seed);
        let mut y = DVector::from_fn(n, |_, _| stream.normal());
        let mean = y.mean();
        for v in y.iter_mut() {
            *v -= mean;
        }
        y
    }

    /// Dense evaluation of the low-rank posterior from its literal
    /// definitions, with an explicit (ridged) kernel inverse.
    struct DenseOracle {
        b: f64,
        mean: DVector<f64>,
        scale: DMatrix<f64>,
        w: DMatrix<f64>,
        ln_det: f64,
    }

    fn dense_oracle(
        zc: &DMatrix<f64>,
        y: &DVector<f64>,
        lambda: Bandwidth,
        phi: &ProjectionMatrix,
        ridge: f64,
    ) -> DenseOracle {
        let n = zc.nrows();
        let k = gram(zc, lambda).k;
        let phi_m = phi.transposed().transpose(); // m_phi x n
        let g = &phi_m * &k * phi_m.transpose();
        let g_inv = g.try_inverse().unwrap();
        let h2 = &k * phi_m.transpose() * &g_inv * &phi_m;
        let h2k = &h2 * &k;
        let mut h1 = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            h1[(i, i)] = k[(i, i)] - h2k[(i, i)] + 1.0;
        }
        let sys = &h2k + &h1;
        let w = sys.clone().try_inverse().unwrap();
        let b = 0.5 * y.dot(&(&w * y));

        let mut kr = k.clone();
        for i in 0..n {
            kr[(i, i)] += ridge;
        }
        let k_inv = kr.try_inverse().unwrap();
        let h1_inv = h1.clone().try_inverse().unwrap();
        let inner = (h2.transpose() * &h1_inv * &h2 + &k_inv)
            .try_inverse()
            .unwrap();
        let mean = &inner * (h2.transpose() * &h1_inv * y);
        let scale = inner * (2.0 * b / n as f64);
        let ln_det = sys.determinant().ln();
        DenseOracle {
            b,
            mean,
            scale,
            w,
            ln_det,
        }
    }

    fn sample_projection(m_phi: usize, n: usize, seed: u64) -> ProjectionMatrix {
        generate(ProjectionSpec::sample(m_phi, n, seed)).unwrap()
    }

    #[test]
    fn swm_with_zero_u_is_diagonal_solve() {
        let h = DVector::from_row_slice(&[1.0, 2.0, 4.0]);
        let u = DMatrix::zeros(3, 2);
        let solver = SwmSolver::new(h, u, &DMatrix::identity(2, 2)).unwrap();
        let rhs = DVector::from_row_slice(&[2.0, 2.0, 2.0]);
        let x = solver.solve_vector(&rhs);
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert!((x[1] - 1.0).abs() < 1e-15);
        assert!((x[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn swm_identity_plus_identity_halves() {
        let n = 4;
        let solver = SwmSolver::new(
            DVector::from_element(n, 1.0),
            DMatrix::identity(n, n),
            &DMatrix::identity(n, n),
        )
        .unwrap();
        let rhs = DVector::from_row_slice(&[1.0, -2.0, 3.0, 0.5]);
        let x = solver.solve_vector(&rhs);
        for i in 0..n {
            assert!((x[i] - rhs[i] / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn swm_matches_dense_inverse() {
        let n = 30;
        let m = 6;
        let u = random_matrix(n, m, 3);
        let q = random_matrix(m, m, 4);
        let g = &q * q.transpose() + DMatrix::<f64>::identity(m, m) * 0.5; // PD core inverse
        let mut h = DVector::from_element(n, 0.0);
        let mut stream = SeedStream::new(5);
        for i in 0..n {
            h[i] = 1.0 + stream.uniform();
        }
        let dense = {
            let c = g.clone().try_inverse().unwrap();
            let mut a = &u * c * u.transpose();
            for i in 0..n {
                a[(i, i)] += h[i];
            }
            a.try_inverse().unwrap()
        };
        let solver = SwmSolver::new(h, u, &g).unwrap();
        let rhs = random_matrix(n, 3, 6);
        let got = solver.solve_matrix(&rhs);
        let want = dense * rhs;
        assert!((got - &want).amax() <= 1e-9 * want.amax().max(1.0));
    }

    #[test]
    fn identity_phi_reduces_to_exact_posterior() {
        let n = 12;
        let zc = random_matrix(n, 3, 7);
        let y = centered_response(n, 8);
        let lambda = Bandwidth::new(0.8).unwrap();
        let phi = ProjectionMatrix::identity_sample(n, 0);

        let low = fit_lowrank(zc.clone(), y.clone(), lambda, &phi).unwrap();
        let ex = exact::fit(zc, y, lambda).unwrap();

        assert!((low.b() - ex.b()).abs() <= 1e-8 * ex.b());
        let (ex_mean, ex_scale) = ex.posterior_mu();
        let low_mean = low.posterior_mean();
        assert!((&low_mean - &ex_mean).amax() <= 1e-8 * ex_mean.amax().max(1e-12));
        let low_diag = low.posterior_scale_diag();
        for i in 0..n {
            assert!((low_diag[i] - ex_scale[(i, i)]).abs() <= 1e-8);
        }
        assert!((low.log_marginal() - ex.log_marginal()).abs() < 1e-8);

        let zs = random_matrix(5, 3, 9);
        let lp = low.predict(&zs, true).unwrap();
        let ep = ex.predict(&zs, true).unwrap();
        assert!((&lp.locations - &ep.locations).amax() < 1e-8);
        assert!((&lp.scales - &ep.scales).amax() < 1e-8);
        assert!((lp.full_scale.unwrap() - ep.full_scale.unwrap()).amax() < 1e-8);
    }

    #[test]
    fn smoother_identity_holds_densely() {
        // H2 K1 = U C U', checked against dense algebra on a small instance.
        let n = 20;
        let zc = random_matrix(n, 4, 11);
        let lambda = Bandwidth::new(0.6).unwrap();
        let phi = sample_projection(5, n, 12);
        let k = gram(&zc, lambda).k;
        let phi_m = phi.transposed().transpose();
        let g = &phi_m * &k * phi_m.transpose();
        let g_inv = g.try_inverse().unwrap();
        let u = &k * phi_m.transpose();
        let ucu = &u * &g_inv * u.transpose();
        let h2k = &k * phi_m.transpose() * &g_inv * &phi_m * &k;
        assert!((&ucu - &h2k).amax() < 1e-9 * ucu.amax());
    }

    #[test]
    fn matches_dense_oracle() {
        let n = 50;
        let m_phi = 10;
        let zc = random_matrix(n, 4, 21);
        let y = centered_response(n, 22);
        let lambda = Bandwidth::new(0.7).unwrap();
        let phi = sample_projection(m_phi, n, 23);

        let oracle = dense_oracle(&zc, &y, lambda, &phi, 1e-8);
        let low = fit_lowrank(zc.clone(), y.clone(), lambda, &phi).unwrap();
        assert_eq!(low.applied_jitter, 0.0);

        assert!((low.b() - oracle.b).abs() <= 1e-5 * oracle.b);
        let mean = low.posterior_mean();
        assert!((&mean - &oracle.mean).amax() <= 1e-5 * oracle.mean.amax().max(1e-12));
        let diag = low.posterior_scale_diag();
        for i in 0..n {
            let want = oracle.scale[(i, i)];
            assert!(
                (diag[i] - want).abs() <= 1e-5 * want.abs().max(1e-12),
                "scale diag {i}: {} vs {}",
                diag[i],
                want
            );
        }

        let zs = random_matrix(5, 4, 24);
        let pred = low.predict(&zs, true).unwrap();
        let kp1 = cross_gram(&zs, &zc, lambda).unwrap();
        let kp = gram(&zs, lambda).k;
        let oracle_loc = &kp1 * (&oracle.w * &y);
        let factor = 2.0 * oracle.b / n as f64;
        let oracle_scale =
            (DMatrix::<f64>::identity(5, 5) + &kp - &kp1 * &oracle.w * kp1.transpose()) * factor;
        assert!((&pred.locations - &oracle_loc).amax() <= 1e-5 * oracle_loc.amax().max(1e-12));
        assert!((pred.full_scale.unwrap() - &oracle_scale).amax() <= 1e-5 * oracle_scale.amax());

        let n_f = n as f64;
        let oracle_lm = -0.5 * oracle.ln_det + 0.5 * n_f * 2f64.ln() + ln_gamma(0.5 * n_f)
            - 0.5 * n_f * (2.0 * oracle.b).ln()
            - 0.5 * n_f * (2.0 * std::f64::consts::PI).ln();
        assert!(
            (low.log_marginal() - oracle_lm).abs() < 1e-7,
            "log ml {} vs {}",
            low.log_marginal(),
            oracle_lm
        );
    }

    #[test]
    fn diagonal_correction_stays_in_unit_band() {
        let n = 40;
        let zc = random_matrix(n, 3, 31);
        let y = centered_response(n, 32);
        let phi = sample_projection(8, n, 33);
        let low = fit_lowrank(zc, y, Bandwidth::new(0.9).unwrap(), &phi).unwrap();
        for i in 0..n {
            let h = low.solver.h()[i];
            assert!((1.0..=2.0 + 1e-12).contains(&h), "h[{i}] = {h}");
        }
    }

    #[test]
    fn far_test_point_recovers_prior_plus_noise_width() {
        let n = 25;
        let zc = random_matrix(n, 2, 41);
        let y = centered_response(n, 42);
        let phi = sample_projection(6, n, 43);
        let low = fit_lowrank(zc, y, Bandwidth::new(1.0).unwrap(), &phi).unwrap();
        let star = DMatrix::from_row_slice(1, 2, &[1e5, -1e5]);
        let pred = low.predict(&star, false).unwrap();
        assert_eq!(pred.locations[0], 0.0);
        let want = (2.0 * low.b() / n as f64 * 2.0).sqrt();
        assert!((pred.scales[0] - want).abs() < 1e-12);
    }

    #[test]
    fn log_marginal_scales_exactly_with_response() {
        let n = 40;
        let zc = random_matrix(n, 3, 51);
        let y = centered_response(n, 52);
        let lambda = Bandwidth::new(0.5).unwrap();
        let phi = sample_projection(8, n, 53);
        let lm1 = fit_lowrank(zc.clone(), y.clone(), lambda, &phi)
            .unwrap()
            .log_marginal();
        let lm2 = fit_lowrank(zc, y * 2.0, lambda, &phi)
            .unwrap()
            .log_marginal();
        assert!((lm2 - (lm1 - 40.0 * 2f64.ln())).abs() < 1e-8);
    }

    #[test]
    fn zero_response_is_degenerate() {
        let n = 10;
        let zc = random_matrix(n, 2, 61);
        let phi = sample_projection(4, n, 62);
        let low = fit_lowrank(zc, DVector::zeros(n), Bandwidth::new(1.0).unwrap(), &phi).unwrap();
        assert!(low.degenerate());
        assert_eq!(low.log_marginal(), f64::NEG_INFINITY);
    }

    #[test]
    fn fit_gates_reject_bad_projection() {
        let zc = random_matrix(10, 2, 71);
        let y = centered_response(10, 72);
        let lambda = Bandwidth::new(1.0).unwrap();
        let feature = generate(ProjectionSpec::feature(4, 10, 73)).unwrap();
        assert!(matches!(
            fit_lowrank(zc.clone(), y.clone(), lambda, &feature),
            Err(CgpError::Config(_))
        ));
        let wrong_cols = sample_projection(4, 9, 74);
        assert!(matches!(
            fit_lowrank(zc.clone(), y.clone(), lambda, &wrong_cols),
            Err(CgpError::Dimension(_))
        ));
        let too_many_rows = sample_projection(11, 10, 75);
        assert!(matches!(
            fit_lowrank(zc, y, lambda, &too_many_rows),
            Err(CgpError::Dimension(_))
        ));
    }
}
