//! Random compression maps.
//!
//! Two kinds of maps are generated from seeds: feature maps that compress
//! p-dimensional inputs to m dimensions with mutually orthonormal rows, and
//! sample maps of raw i.i.d. standard-normal entries used by the low-rank
//! posterior. A map is a pure function of its [`ProjectionSpec`], so model
//! files store seeds instead of entries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CgpError, Result};
use crate::kernel::pairwise_sq_dists;
use crate::par;
use crate::rng::{sub_seed, SeedStream};

/// Which compression map to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    /// Row-orthonormalized map applied to feature vectors.
    Feature,
    /// Raw Gaussian map applied in sample space; never orthonormalized.
    Sample,
}

/// Seeded description of a compression map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

impl ProjectionSpec {
    pub fn feature(rows: usize, cols: usize, seed: u64) -> Self {
        ProjectionSpec {
            kind: ProjectionKind::Feature,
            rows,
            cols,
            seed,
        }
    }

    pub fn sample(rows: usize, cols: usize, seed: u64) -> Self {
        ProjectionSpec {
            kind: ProjectionKind::Sample,
            rows,
            cols,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(CgpError::Dimension(format!(
                "projection must have positive dims, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.kind == ProjectionKind::Feature && self.rows > self.cols {
            return Err(CgpError::Dimension(format!(
                "feature projection needs rows <= cols for orthonormalization, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// Materialized compression map; immutable after construction.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    pub spec: ProjectionSpec,
    /// The transposed map, `cols x rows`; column `i` is map row `i`.
    transposed: DMatrix<f64>,
    /// Rows regenerated after a rank-deficiency rejection (expected 0).
    pub regenerated_rows: u32,
}

impl ProjectionMatrix {
    pub fn rows(&self) -> usize {
        self.spec.rows
    }

    pub fn cols(&self) -> usize {
        self.spec.cols
    }

    /// Map row `i` as a contiguous slice of length `cols`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.transposed.as_slice()[i * self.spec.cols..(i + 1) * self.spec.cols]
    }

    /// The map transposed, ready to right-multiply a design matrix.
    pub fn transposed(&self) -> &DMatrix<f64> {
        &self.transposed
    }

    /// Identity map in sample space, used when the requested rank reaches the
    /// sample count and the low-rank posterior degenerates to the exact one.
    pub fn identity_sample(n: usize, seed: u64) -> Self {
        ProjectionMatrix {
            spec: ProjectionSpec::sample(n, n, seed),
            transposed: DMatrix::identity(n, n),
            regenerated_rows: 0,
        }
    }
}

/// Threshold below which an orthogonalized row is treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Generates the map described by `spec`.
///
/// Each row is filled from its own counter-derived sub-stream, so generation
/// is deterministic regardless of execution order. Feature-kind rows are then
/// orthonormalized with modified Gram-Schmidt; a row whose residual collapses
/// (probability zero, but guarded) is refilled from a perturbed sub-stream.
pub fn generate(spec: ProjectionSpec) -> Result<ProjectionMatrix> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);

    let row_ids: Vec<usize> = (0..rows).collect();
    let filled: Vec<Vec<f64>> = par::map_indexed(&row_ids, |_, &i| {
        let mut stream = SeedStream::new(sub_seed(spec.seed, i as u64));
        let mut row = vec![0.0; cols];
        stream.fill_normal(&mut row);
        row
    });
    let mut entries = Vec::with_capacity(rows * cols);
    for row in filled {
        entries.extend_from_slice(&row);
    }

    let mut regenerated_rows = 0;
    if spec.kind == ProjectionKind::Feature {
        regenerated_rows = orthonormalize_rows(&mut entries, rows, cols, spec.seed)?;
    }

    // Row-major rows x cols is exactly column-major cols x rows: the buffer
    // moves into the transposed matrix without a copy.
    Ok(ProjectionMatrix {
        spec,
        transposed: DMatrix::from_vec(cols, rows, entries),
        regenerated_rows,
    })
}

/// Modified Gram-Schmidt over the rows of a row-major buffer.
fn orthonormalize_rows(entries: &mut [f64], rows: usize, cols: usize, seed: u64) -> Result<u32> {
    let mut regenerated = 0u32;
    let mut i = 0;
    while i < rows {
        // Subtract projections onto all previously fixed rows, in order.
        for j in 0..i {
            let (head, tail) = entries.split_at_mut(i * cols);
            let prev = &head[j * cols..(j + 1) * cols];
            let cur = &mut tail[..cols];
            let dot: f64 = cur.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (c, p) in cur.iter_mut().zip(prev) {
                *c -= dot * p;
            }
        }
        let cur = &mut entries[i * cols..(i + 1) * cols];
        let norm = cur.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL {
            regenerated += 1;
            if regenerated > 32 {
                return Err(CgpError::Numerical(
                    "orthogonalization failed to find an independent row".into(),
                ));
            }
            let mut stream = SeedStream::new(sub_seed(
                seed,
                (rows as u64) + (i as u64) * 33 + regenerated as u64,
            ));
            stream.fill_normal(cur);
            continue;
        }
        let inv = 1.0 / norm;
        for v in cur.iter_mut() {
            *v *= inv;
        }
        i += 1;
    }
    Ok(regenerated)
}

/// Applies the map to each row of `x` (`n x cols`), producing `n x rows`.
pub fn apply(p: &ProjectionMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != p.cols() {
        return Err(CgpError::Dimension(format!(
            "input has {} columns, projection expects {}",
            x.ncols(),
            p.cols()
        )));
    }
    Ok(x * p.transposed())
}

/// Outcome of the pairwise distance-distortion check.
#[derive(Debug, Clone, Copy)]
pub struct DistortionReport {
    /// Fraction of nonzero-distance pairs inside the `(1 ± kappa) sqrt(m/p)` band.
    pub fraction: f64,
    /// Pairs entering the denominator.
    pub pairs: usize,
    /// Pairs excluded for zero original distance.
    pub zero_distance_pairs: usize,
}

impl DistortionReport {
    /// True when no pair had a nonzero distance, making the fraction vacuous.
    pub fn vacuous(&self) -> bool {
        self.pairs == 0
    }
}

/// Measures how well the map preserves pairwise distances.
///
/// For every pair of distinct rows of `x` with nonzero distance, checks
/// whether the compressed distance lies strictly inside
/// `(1 - kappa) * sqrt(m/p) * d .. (1 + kappa) * sqrt(m/p) * d`. An empty
/// denominator reports fraction 1.0 with [`DistortionReport::vacuous`] set.
pub fn distortion_check(
    p: &ProjectionMatrix,
    x: &DMatrix<f64>,
    kappa: f64,
) -> Result<DistortionReport> {
    if !(0.0..1.0).contains(&kappa) || kappa == 0.0 {
        return Err(CgpError::Config(format!(
            "kappa must be in (0,1), got {kappa}"
        )));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(CgpError::Dimension(
            "distortion check needs at least two rows".into(),
        ));
    }
    let compressed = apply(p, x)?;
    let scale = ((p.rows() as f64) / (p.cols() as f64)).sqrt();
    let d_orig = pairwise_sq_dists(x, x);
    let d_comp = pairwise_sq_dists(&compressed, &compressed);

    let (mut inside, mut pairs, mut zero_distance_pairs) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = d_orig[(i, j)].sqrt();
            if d == 0.0 {
                zero_distance_pairs += 1;
                continue;
            }
            pairs += 1;
            let dc = d_comp[(i, j)].sqrt();
            if dc > (1.0 - kappa) * scale * d && dc < (1.0 + kappa) * scale * d {
                inside += 1;
            }
        }
    }
    let fraction = if pairs == 0 {
        1.0
    } else {
        inside as f64 / pairs as f64
    };
    Ok(DistortionReport {
        fraction,
        pairs,
        zero_distance_pairs,
    })
}
