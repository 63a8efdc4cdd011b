//! Versioned serializable form of a fitted ensemble.
//!
//! Members are stored as seeds plus the per-member quantities prediction
//! needs: the compression seed regenerates the map, the compressed training
//! design and bandwidth regenerate the factorizations, and the stored solve
//! vector and rate are reused as-is. Reloading therefore reproduces
//! predictions bit-exactly without storing any map entries or factors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    Centering, EnsembleModel, FitMode, FittedMember, MemberConfig, MemberPosterior,
};
use crate::error::{CgpError, Result};
use crate::exact;
use crate::kernel::Bandwidth;
use crate::lowrank;
use crate::projection::{self, ProjectionMatrix, ProjectionSpec};

pub const FORMAT_VERSION: u32 = 1;

/// One stored ensemble member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedMember {
    pub psi_seed: u64,
    pub m: usize,
    pub lambda: f64,
    /// `None` encodes a degenerate member (log marginal negative infinity).
    pub log_ml: Option<f64>,
    pub weight: f64,
    /// Rate parameter of the member posterior.
    pub b: f64,
    /// `(K1 + I)^{-1} y` (exact) or `(H2 K1 + H1)^{-1} y` (low-rank).
    pub y_solve: Vec<f64>,
    /// Compressed training design, row-major `n x m`.
    pub zc: Vec<f64>,
}

/// Stored ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub mode: FitMode,
    pub n: usize,
    pub p: usize,
    pub centering: Centering,
    pub m_phi: Option<usize>,
    pub phi_seed: Option<u64>,
    pub phi_identity: bool,
    pub members: Vec<SavedMember>,
}

/// Extracts the storable form of a fitted ensemble.
pub fn to_saved(model: &EnsembleModel) -> SavedModel {
    let members = model
        .members
        .iter()
        .zip(&model.weights)
        .map(|(member, &weight)| {
            let (zc, y_solve, b) = match &member.posterior {
                MemberPosterior::Exact(p) => (p.compressed_design(), p.y_solve(), p.b()),
                MemberPosterior::LowRank(p) => (p.compressed_design(), p.y_solve(), p.b()),
            };
            let mut zc_rows = Vec::with_capacity(zc.nrows() * zc.ncols());
            for i in 0..zc.nrows() {
                for j in 0..zc.ncols() {
                    zc_rows.push(zc[(i, j)]);
                }
            }
            SavedMember {
                psi_seed: member.config.psi_seed,
                m: member.config.m,
                lambda: member.config.lambda.expect("fitted member").value(),
                log_ml: member.log_ml.is_finite().then_some(member.log_ml),
                weight,
                b,
                y_solve: y_solve.as_slice().to_vec(),
                zc: zc_rows,
            }
        })
        .collect();
    SavedModel {
        format_version: FORMAT_VERSION,
        mode: model.mode,
        n: model.n,
        p: model.p(),
        centering: model.centering.clone(),
        m_phi: model.m_phi,
        phi_seed: model.phi_seed,
        phi_identity: model.phi_identity,
        members,
    }
}

/// Rebuilds a predictable ensemble from its stored form.
pub fn from_saved(saved: SavedModel) -> Result<EnsembleModel> {
    if saved.format_version != FORMAT_VERSION {
        return Err(CgpError::Data(format!(
            "model format version {} not supported (expected {})",
            saved.format_version, FORMAT_VERSION
        )));
    }
    if saved.members.is_empty() {
        return Err(CgpError::Data("model has no members".into()));
    }
    if saved.centering.x_means.len() != saved.p {
        return Err(CgpError::Data(
            "centering statistics do not match feature count".into(),
        ));
    }
    let phi: Option<ProjectionMatrix> = match (saved.mode, saved.m_phi) {
        (FitMode::LowRank, Some(m_phi)) => Some(if saved.phi_identity {
            ProjectionMatrix::identity_sample(saved.n, saved.phi_seed.unwrap_or(0))
        } else {
            projection::generate(ProjectionSpec::sample(
                m_phi,
                saved.n,
                saved.phi_seed.ok_or_else(|| {
                    CgpError::Data("low-rank model is missing its sample-map seed".into())
                })?,
            ))?
        }),
        (FitMode::LowRank, None) => {
            return Err(CgpError::Data("low-rank model is missing its rank".into()))
        }
        (FitMode::Exact, _) => None,
    };

    let mut members = Vec::with_capacity(saved.members.len());
    let mut weights = Vec::with_capacity(saved.members.len());
    for sm in &saved.members {
        if sm.zc.len() != saved.n * sm.m || sm.y_solve.len() != saved.n {
            return Err(CgpError::Data(format!(
                "member with m={} has inconsistent stored sizes",
                sm.m
            )));
        }
        let zc = DMatrix::from_row_slice(saved.n, sm.m, &sm.zc);
        let y_solve = DVector::from_row_slice(&sm.y_solve);
        let lambda = Bandwidth::new(sm.lambda)?;
        let posterior = match saved.mode {
            FitMode::Exact => {
                MemberPosterior::Exact(exact::rebuild(zc, lambda, y_solve, sm.b)?)
            }
            FitMode::LowRank => MemberPosterior::LowRank(lowrank::rebuild(
                zc,
                lambda,
                phi.as_ref().expect("present in low-rank mode"),
                y_solve,
                sm.b,
            )?),
        };
        members.push(FittedMember {
            config: MemberConfig {
                m: sm.m,
                psi_seed: sm.psi_seed,
                lambda_seed: 0,
                lambda: Some(lambda),
                mode: saved.mode,
            },
            posterior,
            log_ml: sm.log_ml.unwrap_or(f64::NEG_INFINITY),
        });
        weights.push(sm.weight);
    }

    Ok(EnsembleModel {
        mode: saved.mode,
        members,
        weights,
        centering: saved.centering,
        phi_seed: saved.phi_seed,
        m_phi: saved.m_phi,
        phi_identity: saved.phi_identity,
        dropped: Vec::new(),
        n: saved.n,
    })
}
