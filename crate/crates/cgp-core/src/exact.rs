//! Closed-form conjugate GP posterior on compressed features.
//!
//! With a zero-mean GP prior scaled by the residual variance and the Jeffreys
//! prior on that variance, the posterior, predictive distribution, and
//! marginal likelihood are all available in closed form from one symmetric
//! factorization of `K1 + I`. The expressions are evaluated through the
//! identity `K1 (K1 + I)^{-1} = I - (K1 + I)^{-1}`, so the kernel matrix is
//! never inverted on its own: `K1` may be numerically singular while `K1 + I`
//! stays safely positive definite.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::gamma::ln_gamma;

use crate::error::{CgpError, Result};
use crate::kernel::{cross_gram, gram, Bandwidth};

/// Conjugate posterior for one compression/bandwidth member.
pub struct GpPosterior {
    n: usize,
    b: f64,
    degenerate: bool,
    chol: Cholesky<f64, Dyn>,
    y_solve: DVector<f64>,
    y: DVector<f64>,
    lambda: Bandwidth,
    zc: DMatrix<f64>,
    ln_det: f64,
}

/// Per-point Student-t predictive summary.
#[derive(Debug, Clone)]
pub struct PredictiveDistribution {
    /// Degrees of freedom, equal to the training sample count.
    pub df: usize,
    pub locations: DVector<f64>,
    /// Square roots of the diagonal of the predictive scale matrix.
    pub scales: DVector<f64>,
    pub full_scale: Option<DMatrix<f64>>,
}

/// Fits the conjugate posterior on a compressed design and centered response.
pub fn fit(zc: DMatrix<f64>, y: DVector<f64>, lambda: Bandwidth) -> Result<GpPosterior> {
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
    let scale = y.amax().max(1.0);
    if y.mean().abs() > 1e-10 * scale {
        return Err(CgpError::Data(format!(
            "response must be centered, found mean {}",
            y.mean()
        )));
    }
    fit_unchecked(zc, y, lambda)
}

/// Fit without the sample-size and centering gates; shared inner path.
fn fit_unchecked(zc: DMatrix<f64>, y: DVector<f64>, lambda: Bandwidth) -> Result<GpPosterior> {
    let (chol, ln_det) = shifted_kernel_chol(&zc, lambda)?;
    let y_solve = chol.solve(&y);
    let b = 0.5 * y.dot(&y_solve);
    Ok(GpPosterior {
        n: zc.nrows(),
        b,
        degenerate: b <= 0.0,
        chol,
        y_solve,
        y,
        lambda,
        zc,
        ln_det,
    })
}

fn shifted_kernel_chol(
    zc: &DMatrix<f64>,
    lambda: Bandwidth,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = zc.nrows();
    let mut a = gram(zc, lambda).k;
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        CgpError::Numerical("factorization of the shifted kernel matrix failed".into())
    })?;
    let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((chol, ln_det))
}

/// Rebuilds a posterior from stored parts (design, bandwidth, solve vector,
/// rate). The factorization is reassembled from the design through the same
/// code path as fitting, and the stored solve vector is used as-is, so
/// predictions reproduce bit-exactly.
pub fn rebuild(
    zc: DMatrix<f64>,
    lambda: Bandwidth,
    y_solve: DVector<f64>,
    b: f64,
) -> Result<GpPosterior> {
    let n = zc.nrows();
    if y_solve.len() != n {
        return Err(CgpError::Dimension(format!(
            "solve vector length {} does not match {} design rows",
            y_solve.len(),
            n
        )));
    }
    let mut a = gram(&zc, lambda).k;
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    // Recover the response from the stored solve for the posterior-mean path.
    let y = &a * &y_solve;
    let chol = Cholesky::new(a).ok_or_else(|| {
        CgpError::Numerical("factorization of the shifted kernel matrix failed".into())
    })?;
    let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(GpPosterior {
        n,
        b,
        degenerate: b <= 0.0,
        chol,
        y_solve,
        y,
        lambda,
        zc,
        ln_det,
    })
}

impl GpPosterior {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Shape parameter of the residual-variance posterior, `n / 2`.
    pub fn a(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// Rate parameter `y' (K1 + I)^{-1} y / 2`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// True when the response carried no signal (`b = 0`).
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn lambda(&self) -> Bandwidth {
        self.lambda
    }

    /// Solution of `(K1 + I) v = y`.
    pub fn y_solve(&self) -> &DVector<f64> {
        &self.y_solve
    }

    pub fn compressed_design(&self) -> &DMatrix<f64> {
        &self.zc
    }

    /// Posterior location and scale matrix of the latent regression values.
    ///
    /// Location is `K1 (K1 + I)^{-1} y`, evaluated as `y - (K1 + I)^{-1} y`;
    /// the scale matrix is `(2 b / n) (I - (K1 + I)^{-1})`.
    pub fn posterior_mu(&self) -> (DVector<f64>, DMatrix<f64>) {
        let mean = &self.y - &self.y_solve;
        let mut scale = self.chol.inverse();
        let factor = 2.0 * self.b / self.n as f64;
        for j in 0..self.n {
            for i in 0..self.n {
                let id = if i == j { 1.0 } else { 0.0 };
                scale[(i, j)] = factor * (id - scale[(i, j)]);
            }
        }
        (mean, scale)
    }

    /// Student-t predictive distribution at compressed test rows.
    pub fn predict(&self, zc_star: &DMatrix<f64>, want_full: bool) -> Result<PredictiveDistribution> {
        if zc_star.ncols() != self.zc.ncols() {
            return Err(CgpError::Dimension(format!(
                "test design has {} columns, training used {}",
                zc_star.ncols(),
                self.zc.ncols()
            )));
        }
        let k_pred_1 = cross_gram(zc_star, &self.zc, self.lambda)?;
        let locations = &k_pred_1 * &self.y_solve;
        let solved = self.chol.solve(&k_pred_1.transpose());
        let factor = 2.0 * self.b / self.n as f64;
        let n_pred = zc_star.nrows();

        let mut scales = DVector::zeros(n_pred);
        for i in 0..n_pred {
            let q = k_pred_1.row(i).tr_dot(&solved.column(i));
            scales[i] = (factor * (2.0 - q)).max(0.0).sqrt();
        }
        let full_scale = if want_full {
            let k_pred = gram(zc_star, self.lambda).k;
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

    /// Log marginal likelihood of the member, fully in the log domain.
    ///
    /// Returns negative infinity for a degenerate (zero-signal) posterior.
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
