//! Model averaging over compression dimensions and bandwidths.
//!
//! One member is a seeded feature map of some dimension `m` paired with a
//! bandwidth drawn uniformly between the reciprocal pairwise-distance
//! extremes of its own compressed features. Members are fitted independently
//! (in parallel with the `parallel` feature), weighted by their marginal
//! likelihoods with equal priors, and combined into a per-point mixture of
//! Student-t predictive distributions. The combination step folds members in
//! index order, so results are bit-identical regardless of worker count.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CgpError, Result};
use crate::exact::{self, GpPosterior};
use crate::kernel::{pairwise_sq_dists, Bandwidth};
use crate::lowrank::{self, LowRankPosterior};
use crate::par;
use crate::projection::{self, ProjectionMatrix, ProjectionSpec};
use crate::rng::{sub_seed, SeedStream};
use crate::student::{mixture_quantile, MixtureComponent};

/// Which posterior backs each member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Exact,
    LowRank,
}

/// One grid member before fitting; the bandwidth stays unset until the
/// member's compressed features exist.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MemberConfig {
    pub m: usize,
    pub psi_seed: u64,
    pub lambda_seed: u64,
    pub lambda: Option<Bandwidth>,
    pub mode: FitMode,
}

/// Grid and sampling policy for an ensemble fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPolicy {
    /// Spacing between consecutive compression dimensions.
    pub stride: usize,
    /// Optional cap on the top of the dimension window, for scaled runs.
    pub m_cap: Option<usize>,
    /// Largest point count used when estimating pairwise-distance extremes.
    pub subsample_cap: usize,
    /// Rank of the sample-space map in low-rank mode.
    pub m_phi: usize,
    /// Use an independent sample-space map per member instead of one shared.
    pub per_member_phi: bool,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            stride: 1,
            m_cap: None,
            subsample_cap: 1000,
            m_phi: 150,
            per_member_phi: false,
        }
    }
}

/// Low end of the dimension window, `ceil(2 ln p)`.
pub fn grid_m_lo(p: usize) -> usize {
    (2.0 * (p as f64).ln()).ceil() as usize
}

/// Builds the member grid for the dimension window.
///
/// The window is `[ceil(2 ln p), min(n, p)]` in exact mode and
/// `[ceil(2 ln p), min(m_phi, p)]` in low-rank mode, thinned by the stride.
/// Seeds are derived per member from the master seed.
pub fn build_grid(
    n: usize,
    p: usize,
    mode: FitMode,
    policy: &GridPolicy,
    master_seed: u64,
) -> Result<Vec<MemberConfig>> {
    if p < 2 {
        return Err(CgpError::Config(format!("need at least 2 features, got {p}")));
    }
    if policy.stride == 0 {
        return Err(CgpError::Config("stride must be positive".into()));
    }
    let m_lo = grid_m_lo(p);
    let mut m_hi = match mode {
        FitMode::Exact => n.min(p),
        FitMode::LowRank => policy.m_phi.min(p),
    };
    if let Some(cap) = policy.m_cap {
        m_hi = m_hi.min(cap);
    }
    if m_lo > m_hi {
        return Err(CgpError::Config(format!(
            "dimension window [{m_lo}, {m_hi}] is empty; p too small for this sample"
        )));
    }
    Ok((m_lo..=m_hi)
        .step_by(policy.stride)
        .enumerate()
        .map(|(l, m)| {
            let member_seed = sub_seed(master_seed, l as u64);
            MemberConfig {
                m,
                psi_seed: sub_seed(member_seed, 0),
                lambda_seed: sub_seed(member_seed, 1),
                lambda: None,
                mode,
            }
        })
        .collect())
}

/// Draws a bandwidth uniformly on `[3/d_max, 3/d_min]`, the reciprocal
/// extremes of nonzero squared pairwise distances over at most
/// `subsample_cap` of the member's compressed rows.
pub fn draw_lambda(zc: &DMatrix<f64>, seed: u64, subsample_cap: usize) -> Result<Bandwidth> {
    let n = zc.nrows();
    if n < 2 {
        return Err(CgpError::Config(
            "bandwidth draw needs at least two rows".into(),
        ));
    }
    let mut stream = SeedStream::new(seed);
    let sub = if subsample_cap < n {
        let idx = stream.sample_indices(n, subsample_cap.max(2));
        let mut sub = DMatrix::zeros(idx.len(), zc.ncols());
        for (r, &i) in idx.iter().enumerate() {
            sub.row_mut(r).copy_from(&zc.row(i));
        }
        sub
    } else {
        zc.clone()
    };

    let d2 = pairwise_sq_dists(&sub, &sub);
    let mut d_min = f64::INFINITY;
    let mut d_max: f64 = 0.0;
    for i in 0..sub.nrows() {
        for j in (i + 1)..sub.nrows() {
            let d = d2[(i, j)];
            if d > 0.0 {
                d_min = d_min.min(d);
                d_max = d_max.max(d);
            }
        }
    }
    if d_max == 0.0 {
        return Err(CgpError::Config(
            "all points identical; bandwidth bounds undefined".into(),
        ));
    }
    let lo = 3.0 / d_max;
    let hi = 3.0 / d_min;
    let lambda = if lo == hi {
        lo
    } else {
        stream.uniform_in(lo, hi)
    };
    Bandwidth::new(lambda)
}

/// Distance extremes used by the bandwidth draw; exposed for oracle tests.
pub fn lambda_bounds(zc: &DMatrix<f64>) -> Option<(f64, f64)> {
    let d2 = pairwise_sq_dists(zc, zc);
    let mut d_min = f64::INFINITY;
    let mut d_max: f64 = 0.0;
    for i in 0..zc.nrows() {
        for j in (i + 1)..zc.nrows() {
            let d = d2[(i, j)];
            if d > 0.0 {
                d_min = d_min.min(d);
                d_max = d_max.max(d);
            }
        }
    }
    (d_max > 0.0).then_some((3.0 / d_max, 3.0 / d_min))
}

/// Equal-prior posterior model weights from log marginal likelihoods.
///
/// Normalization happens after subtracting the maximum, so the weights are
/// invariant under a common shift. When every member is degenerate (all
/// log marginal likelihoods negative infinity), the weights fall back to
/// uniform so pathological replicates still predict.
pub fn weights_from_log_ml(log_ml: &[f64]) -> Vec<f64> {
    let s = log_ml.len();
    debug_assert!(s > 0);
    let max = log_ml.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / s as f64; s];
    }
    let unnorm: Vec<f64> = log_ml.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|w| w / total).collect()
}

/// Fitted posterior of one member.
pub enum MemberPosterior {
    Exact(GpPosterior),
    LowRank(LowRankPosterior),
}

impl MemberPosterior {
    pub fn log_marginal(&self) -> f64 {
        match self {
            MemberPosterior::Exact(p) => p.log_marginal(),
            MemberPosterior::LowRank(p) => p.log_marginal(),
        }
    }

    pub fn predict(
        &self,
        zc_star: &DMatrix<f64>,
        want_full: bool,
    ) -> Result<crate::exact::PredictiveDistribution> {
        match self {
            MemberPosterior::Exact(p) => p.predict(zc_star, want_full),
            MemberPosterior::LowRank(p) => p.predict(zc_star, want_full),
        }
    }

    pub fn b(&self) -> f64 {
        match self {
            MemberPosterior::Exact(p) => p.b(),
            MemberPosterior::LowRank(p) => p.b(),
        }
    }
}

/// One surviving ensemble member.
pub struct FittedMember {
    pub config: MemberConfig,
    pub posterior: MemberPosterior,
    pub log_ml: f64,
}

/// Centering statistics applied before fitting and re-applied at prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Centering {
    pub y_mean: f64,
    pub x_means: Vec<f64>,
}

/// Fitted model-averaging ensemble.
pub struct EnsembleModel {
    pub mode: FitMode,
    pub members: Vec<FittedMember>,
    pub weights: Vec<f64>,
    pub centering: Centering,
    /// Seed of the shared sample-space map (low-rank mode, shared map only).
    pub phi_seed: Option<u64>,
    /// Rank of the sample map actually used.
    pub m_phi: Option<usize>,
    /// True when the sample map was clamped to the identity (`m_phi >= n`).
    pub phi_identity: bool,
    /// Members dropped for numerical failures, with diagnostics.
    pub dropped: Vec<(usize, String)>,
    /// Training sample count.
    pub n: usize,
}

/// Per-point mixture predictions at a coverage level.
pub struct EnsemblePrediction {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per-point mixture components (weight, location, scale), in member
    /// order, locations already un-centered.
    pub components: Vec<Vec<MixtureComponent>>,
    pub df: f64,
}

/// Centers columns of `x` and entries of `y`, returning the statistics.
pub fn center_xy(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, Centering) {
    let n = x.nrows() as f64;
    let x_means: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).sum() / n).collect();
    let mut xc = x.clone();
    for (j, mu) in x_means.iter().enumerate() {
        xc.column_mut(j).add_scalar_mut(-mu);
    }
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    (xc, yc, Centering { y_mean, x_means })
}

fn validate_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() < 3 {
        return Err(CgpError::Config(format!(
            "ensemble fit needs at least 3 rows, got {}",
            x.nrows()
        )));
    }
    if y.len() != x.nrows() {
        return Err(CgpError::Dimension(format!(
            "{} responses for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(CgpError::Data("non-finite entries in input".into()));
    }
    Ok(())
}

const PHI_STREAM: u64 = 0xF1;

/// Fits an ensemble over the standard dimension window.
pub fn fit_ensemble(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mode: FitMode,
    policy: &GridPolicy,
    master_seed: u64,
) -> Result<EnsembleModel> {
    let grid = build_grid(x.nrows(), x.ncols(), mode, policy, master_seed)?;
    fit_ensemble_with_grid(x, y, grid, policy, master_seed)
}

/// Fits an ensemble over an explicit member grid.
pub fn fit_ensemble_with_grid(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: Vec<MemberConfig>,
    policy: &GridPolicy,
    master_seed: u64,
) -> Result<EnsembleModel> {
    validate_inputs(x, y)?;
    if grid.is_empty() {
        return Err(CgpError::Config("empty member grid".into()));
    }
    let n = x.nrows();
    let (xc, yc, centering) = center_xy(x, y);

    let lowrank_mode = grid.iter().any(|g| g.mode == FitMode::LowRank);
    let mode = grid[0].mode;
    let (shared_phi, phi_seed, m_phi, phi_identity) = if lowrank_mode && !policy.per_member_phi {
        let seed = sub_seed(master_seed, PHI_STREAM);
        if policy.m_phi >= n {
            (Some(ProjectionMatrix::identity_sample(n, seed)), Some(seed), Some(n), true)
        } else {
            let phi = projection::generate(ProjectionSpec::sample(policy.m_phi, n, seed))?;
            (Some(phi), Some(seed), Some(policy.m_phi), false)
        }
    } else {
        (None, None, None, false)
    };

    let outcomes: Vec<std::result::Result<FittedMember, String>> =
        par::map_indexed(&grid, |l, cfg| {
            fit_one_member(
                &xc,
                &yc,
                cfg,
                policy,
                shared_phi.as_ref(),
                master_seed,
                l as u64,
            )
            .map_err(|e| e.to_string())
        });

    let mut members = Vec::new();
    let mut dropped = Vec::new();
    for (l, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(m) => members.push(m),
            Err(msg) => dropped.push((l, msg)),
        }
    }
    if members.is_empty() {
        return Err(CgpError::Numerical(format!(
            "all {} ensemble members failed; first: {}",
            grid.len(),
            dropped
                .first()
                .map(|(_, m)| m.as_str())
                .unwrap_or("unknown")
        )));
    }
    let log_mls: Vec<f64> = members.iter().map(|m| m.log_ml).collect();
    let weights = weights_from_log_ml(&log_mls);

    Ok(EnsembleModel {
        mode,
        members,
        weights,
        centering,
        phi_seed,
        m_phi,
        phi_identity,
        dropped,
        n,
    })
}

fn fit_one_member(
    xc: &DMatrix<f64>,
    yc: &DVector<f64>,
    cfg: &MemberConfig,
    policy: &GridPolicy,
    shared_phi: Option<&ProjectionMatrix>,
    master_seed: u64,
    member_index: u64,
) -> Result<FittedMember> {
    let psi = projection::generate(ProjectionSpec::feature(cfg.m, xc.ncols(), cfg.psi_seed))?;
    let zc = projection::apply(&psi, xc)?;
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => draw_lambda(&zc, cfg.lambda_seed, policy.subsample_cap)?,
    };
    let posterior = match cfg.mode {
        FitMode::Exact => MemberPosterior::Exact(exact::fit(zc, yc.clone(), lambda)?),
        FitMode::LowRank => {
            let n = xc.nrows();
            let owned_phi;
            let phi = if let Some(phi) = shared_phi {
                phi
            } else {
                let seed = sub_seed(master_seed, PHI_STREAM ^ (member_index.wrapping_add(1) << 8));
                owned_phi = if policy.m_phi >= n {
                    ProjectionMatrix::identity_sample(n, seed)
                } else {
                    projection::generate(ProjectionSpec::sample(policy.m_phi, n, seed))?
                };
                &owned_phi
            };
            MemberPosterior::LowRank(lowrank::fit_lowrank(zc, yc.clone(), lambda, phi)?)
        }
    };
    let log_ml = posterior.log_marginal();
    let mut config = *cfg;
    config.lambda = Some(lambda);
    Ok(FittedMember {
        config,
        posterior,
        log_ml,
    })
}

impl EnsembleModel {
    /// Number of surviving members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Feature count the model expects.
    pub fn p(&self) -> usize {
        self.centering.x_means.len()
    }

    /// True when every member was degenerate and weights fell back to uniform.
    pub fn degenerate(&self) -> bool {
        self.members.iter().all(|m| !m.log_ml.is_finite())
    }

    /// Mixture predictions with central intervals at `level` coverage.
    pub fn predict(&self, x_star: &DMatrix<f64>, level: f64) -> Result<EnsemblePrediction> {
        if x_star.ncols() != self.p() {
            return Err(CgpError::Dimension(format!(
                "test features have {} columns, model expects {}",
                x_star.ncols(),
                self.p()
            )));
        }
        if !(0.0 < level && level < 1.0) {
            return Err(CgpError::Config(format!(
                "coverage level must be in (0,1), got {level}"
            )));
        }
        let mut xc_star = x_star.clone();
        for (j, mu) in self.centering.x_means.iter().enumerate() {
            xc_star.column_mut(j).add_scalar_mut(-mu);
        }

        // Per-member predictive locations and scales, members in index order.
        let per_member: Vec<Result<(DVector<f64>, DVector<f64>)>> =
            par::map_indexed(&self.members, |_, member| {
                let psi = projection::generate(ProjectionSpec::feature(
                    member.config.m,
                    self.p(),
                    member.config.psi_seed,
                ))?;
                let zc_star = projection::apply(&psi, &xc_star)?;
                let pred = member.posterior.predict(&zc_star, false)?;
                Ok((pred.locations, pred.scales))
            });
        let mut locations = Vec::with_capacity(self.members.len());
        let mut scales = Vec::with_capacity(self.members.len());
        for r in per_member {
            let (loc, sc) = r?;
            locations.push(loc);
            scales.push(sc);
        }

        let n_pred = x_star.nrows();
        let df = self.n as f64;
        let alpha = 0.5 * (1.0 - level);
        let y_mean = self.centering.y_mean;

        let point_ids: Vec<usize> = (0..n_pred).collect();
        let rows: Vec<(f64, f64, f64, Vec<MixtureComponent>)> =
            par::map_indexed(&point_ids, |_, &j| {
                let components: Vec<MixtureComponent> = self
                    .members
                    .iter()
                    .enumerate()
                    .map(|(l, _)| MixtureComponent {
                        weight: self.weights[l],
                        location: locations[l][j] + y_mean,
                        scale: scales[l][j],
                    })
                    .collect();
                let mean = components.iter().map(|c| c.weight * c.location).sum();
                let lower = mixture_quantile(&components, df, alpha);
                let upper = mixture_quantile(&components, df, 1.0 - alpha);
                (mean, lower, upper, components)
            });

        let mut out = EnsemblePrediction {
            mean: Vec::with_capacity(n_pred),
            lower: Vec::with_capacity(n_pred),
            upper: Vec::with_capacity(n_pred),
            components: Vec::with_capacity(n_pred),
            df,
        };
        for (mean, lower, upper, comps) in rows {
            out.mean.push(mean);
            out.lower.push(lower);
            out.upper.push(upper);
            out.components.push(comps);
        }
        Ok(out)
    }
}
