//! Clustered linear baseline: spectral clustering of the features followed by
//! an independent ridge-regularized linear model per cluster.
//!
//! Clustering follows the normalized-affinity recipe: Gaussian affinities
//! with zero diagonal, symmetric degree normalization, the top eigenvectors
//! stacked and row-normalized, then k-means on the embedding rows. K-means
//! decisions (initial centers, tie breaks, summation order) are functions of
//! the embedding values in canonical lexicographic order, never of row
//! order, so permuting the input rows permutes the assignments identically.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CgpError, Result};
use crate::kernel::pairwise_sq_dists;
use crate::par;
use crate::rng::{sub_seed, SeedStream};

/// Spectral clustering configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub n_clust: usize,
    /// Affinity bandwidth; defaults to the median pairwise squared distance.
    pub sigma_sq: Option<f64>,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n_clust: 10,
            sigma_sq: None,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

/// Clustering output plus diagnostics.
pub struct SpectralOutcome {
    pub assignments: Vec<usize>,
    /// Row-normalized spectral embedding, `n x n_clust`.
    pub embedding: DMatrix<f64>,
    /// Rows whose affinity sum was floored to avoid a zero degree.
    pub floored_rows: usize,
    /// Leading eigenvalues of the normalized affinity operator.
    pub eigenvalues: Vec<f64>,
}

const DEGREE_FLOOR: f64 = 1e-300;

/// Clusters the rows of `x` through the normalized affinity operator.
pub fn spectral_cluster(x: &DMatrix<f64>, cfg: &SpectralConfig) -> Result<SpectralOutcome> {
    let n = x.nrows();
    if cfg.n_clust == 0 || cfg.n_clust > n {
        return Err(CgpError::Config(format!(
            "cluster count {} must lie in 1..={n}",
            cfg.n_clust
        )));
    }
    let d2 = pairwise_sq_dists(x, x);
    let sigma_sq = match cfg.sigma_sq {
        Some(s) if s > 0.0 => s,
        Some(s) => {
            return Err(CgpError::Config(format!(
                "affinity bandwidth must be positive, got {s}"
            )))
        }
        None => median_offdiag(&d2).max(DEGREE_FLOOR),
    };

    // Affinity with zero diagonal, mirrored for exact symmetry.
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-d2[(i, j)] / (2.0 * sigma_sq)).exp();
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }

    let mut floored_rows = 0;
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let mut deg = a.row(i).sum();
            if deg < DEGREE_FLOOR {
                deg = DEGREE_FLOOR;
                floored_rows += 1;
            }
            1.0 / deg.sqrt()
        })
        .collect();
    let mut l = a;
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }

    let eig = SymmetricEigen::new(l);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let k = cfg.n_clust;
    let mut s = DMatrix::zeros(n, k);
    for (c, &src) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // Fix the sign so the first entry of meaningful magnitude is positive.
        let max_abs = col.amax();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-8 * max_abs) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        s.column_mut(c).copy_from(&col);
    }
    for i in 0..n {
        let norm = s.row(i).norm();
        if norm > DEGREE_FLOOR {
            let inv = 1.0 / norm;
            s.row_mut(i).scale_mut(inv);
        }
    }

    let assignments = kmeans_rows(&s, k, cfg.kmeans_restarts.max(1), cfg.seed);
    Ok(SpectralOutcome {
        assignments,
        embedding: s,
        floored_rows,
        eigenvalues: eigenvalues.into_iter().take(k).collect(),
    })
}

fn median_offdiag(d2: &DMatrix<f64>) -> f64 {
    let n = d2.nrows();
    let mut vals = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            vals.push(d2[(i, j)]);
        }
    }
    if vals.is_empty() {
        return 1.0;
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    let m = vals.len();
    if m % 2 == 1 {
        vals[m / 2]
    } else {
        0.5 * (vals[m / 2 - 1] + vals[m / 2])
    }
}

/// Indices of the rows of `s` in lexicographic value order.
fn canonical_order(s: &DMatrix<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&i, &j| {
        for c in 0..s.ncols() {
            match s[(i, c)].total_cmp(&s[(j, c)]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    order
}

/// Seeded k-means over the rows of `s`, deterministic in the row values.
fn kmeans_rows(s: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let n = s.nrows();
    if k == 1 {
        return vec![0; n];
    }
    let order = canonical_order(s);
    let rank_of: Vec<usize> = {
        let mut r = vec![0usize; n];
        for (rank, &i) in order.iter().enumerate() {
            r[i] = rank;
        }
        r
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts {
        let start = if restart == 0 {
            order[0]
        } else {
            let mut stream = SeedStream::new(sub_seed(seed, restart as u64));
            order[stream.index(n)]
        };
        let (inertia, assignments) = lloyd(s, k, start, &rank_of, &order);
        let better = match &best {
            None => true,
            Some((bi, _)) => inertia < *bi,
        };
        if better {
            best = Some((inertia, assignments));
        }
    }
    best.expect("at least one restart").1
}

fn lloyd(
    s: &DMatrix<f64>,
    k: usize,
    start: usize,
    rank_of: &[usize],
    order: &[usize],
) -> (f64, Vec<usize>) {
    let n = s.nrows();
    // Farthest-first seeding from the start row; ties resolve to the point
    // earliest in canonical order.
    let mut centers: Vec<DVector<f64>> = vec![s.row(start).transpose()];
    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| (s.row(i).transpose() - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let mut pick = order[0];
        let mut best_d = f64::NEG_INFINITY;
        for &i in order {
            if min_d2[i] > best_d {
                best_d = min_d2[i];
                pick = i;
            }
        }
        let c = s.row(pick).transpose();
        for i in 0..n {
            min_d2[i] = min_d2[i].min((s.row(i).transpose() - &c).norm_squared());
        }
        centers.push(c);
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let row = s.row(i).transpose();
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = (&row - center).norm_squared();
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if assignments[i] != best_c {
                assignments[i] = best_c;
                changed = true;
            }
        }
        // Recompute centers over members visited in canonical order.
        let mut counts = vec![0usize; k];
        let mut sums = vec![DVector::<f64>::zeros(s.ncols()); k];
        for &i in order {
            counts[assignments[i]] += 1;
            sums[assignments[i]] += s.row(i).transpose();
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Revive an empty cluster at the point farthest from its center.
                let mut pick = order[0];
                let mut best_d = f64::NEG_INFINITY;
                for &i in order {
                    let d = (s.row(i).transpose() - &centers[assignments[i]]).norm_squared();
                    if d > best_d && counts[assignments[i]] > 1 {
                        best_d = d;
                        pick = i;
                    }
                }
                counts[assignments[pick]] -= 1;
                sums[assignments[pick]] -= s.row(pick).transpose();
                assignments[pick] = c;
                counts[c] = 1;
                sums[c] = s.row(pick).transpose();
                changed = true;
            }
            centers[c] = &sums[c] / counts[c] as f64;
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| (s.row(i).transpose() - &centers[assignments[i]]).norm_squared())
        .sum();
    let _ = rank_of;
    (inertia, assignments)
}

/// Per-cluster linear predictor.
enum ClusterFit {
    Linear { coef: DVector<f64> },
    Constant,
}

/// Trained clustered-linear baseline.
pub struct ClusterModel {
    pub assignments: Vec<usize>,
    /// Raw-feature centroid per cluster; also the regression centering point.
    centroids: Vec<DVector<f64>>,
    y_means: Vec<f64>,
    fits: Vec<ClusterFit>,
    resid_sd: Vec<f64>,
    pub ridge: f64,
    /// Per-cluster solve diagnostics (cluster id, message).
    pub solve_warnings: Vec<(usize, String)>,
}

/// Fits the baseline: spectral clusters, then one ridge model per cluster.
pub fn fit_dsl(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &SpectralConfig,
    ridge: f64,
) -> Result<ClusterModel> {
    if y.len() != x.nrows() {
        return Err(CgpError::Dimension(format!(
            "{} responses for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if ridge < 0.0 {
        return Err(CgpError::Config("ridge must be nonnegative".into()));
    }
    let outcome = spectral_cluster(x, cfg)?;
    let assignments = outcome.assignments;
    let k = cfg.n_clust;
    let p = x.ncols();

    let members: Vec<Vec<usize>> = {
        let mut m = vec![Vec::new(); k];
        for (i, &c) in assignments.iter().enumerate() {
            m[c].push(i);
        }
        m
    };

    let mut centroids = Vec::with_capacity(k);
    let mut y_means = Vec::with_capacity(k);
    let mut fits = Vec::with_capacity(k);
    let mut resid_sd = vec![0.0; k];
    let mut solve_warnings = Vec::new();
    let mut all_sq_resid = Vec::with_capacity(x.nrows());

    for (c, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            return Err(CgpError::Numerical(format!("cluster {c} is empty")));
        }
        let nc = rows.len();
        let mut xc = DMatrix::zeros(nc, p);
        let mut yc = DVector::zeros(nc);
        for (r, &i) in rows.iter().enumerate() {
            xc.row_mut(r).copy_from(&x.row(i));
            yc[r] = y[i];
        }
        let centroid = DVector::from_fn(p, |j, _| xc.column(j).mean());
        let y_mean = yc.mean();
        for j in 0..p {
            xc.column_mut(j).add_scalar_mut(-centroid[j]);
        }
        yc.add_scalar_mut(-y_mean);

        let fit = if nc == 1 {
            ClusterFit::Constant
        } else {
            match ridge_solve(&xc, &yc, ridge) {
                Ok(coef) => ClusterFit::Linear { coef },
                Err(e) => {
                    solve_warnings.push((c, e.to_string()));
                    ClusterFit::Constant
                }
            }
        };
        let mut sq = Vec::with_capacity(nc);
        for r in 0..nc {
            let pred = match &fit {
                ClusterFit::Linear { coef } => xc.row(r).transpose().dot(coef),
                ClusterFit::Constant => 0.0,
            };
            sq.push((yc[r] - pred) * (yc[r] - pred));
        }
        resid_sd[c] = if nc >= 3 {
            (sq.iter().sum::<f64>() / (nc - 1) as f64).sqrt()
        } else {
            f64::NAN // patched with the global scale below
        };
        all_sq_resid.extend_from_slice(&sq);
        centroids.push(centroid);
        y_means.push(y_mean);
        fits.push(fit);
    }

    let global_sd = if all_sq_resid.len() >= 2 {
        (all_sq_resid.iter().sum::<f64>() / (all_sq_resid.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    for sd in resid_sd.iter_mut() {
        if !sd.is_finite() {
            *sd = global_sd;
        }
    }

    Ok(ClusterModel {
        assignments,
        centroids,
        y_means,
        fits,
        resid_sd,
        ridge,
        solve_warnings,
    })
}

/// Ridge solve on centered data, routed through whichever Gram matrix is
/// smaller (features or samples).
fn ridge_solve(xc: &DMatrix<f64>, yc: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let (nc, p) = (xc.nrows(), xc.ncols());
    if p <= nc {
        let mut gram = xc.tr_mul(xc);
        for j in 0..p {
            gram[(j, j)] += ridge;
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| CgpError::Numerical("feature normal equations singular".into()))?;
        Ok(chol.solve(&xc.tr_mul(yc)))
    } else {
        let mut gram = xc * xc.transpose();
        for i in 0..nc {
            gram[(i, i)] += ridge;
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| CgpError::Numerical("sample normal equations singular".into()))?;
        let alpha = chol.solve(yc);
        Ok(xc.tr_mul(&alpha))
    }
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.fits.len()
    }

    /// Cluster id of the nearest raw-feature centroid.
    fn route(&self, row: &DVector<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in self.centroids.iter().enumerate() {
            let d = (row - centroid).norm_squared();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    /// Point predictions and the cluster each test row was routed to.
    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<usize>)> {
        if x_star.ncols() != self.centroids[0].len() {
            return Err(CgpError::Dimension(format!(
                "test features have {} columns, model expects {}",
                x_star.ncols(),
                self.centroids[0].len()
            )));
        }
        let ids: Vec<usize> = par::map_indexed(
            &(0..x_star.nrows()).collect::<Vec<_>>(),
            |_, &i| self.route(&x_star.row(i).transpose()),
        );
        let preds = ids
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let row = x_star.row(i).transpose();
                let centered = &row - &self.centroids[c];
                match &self.fits[c] {
                    ClusterFit::Linear { coef } => centered.dot(coef) + self.y_means[c],
                    ClusterFit::Constant => self.y_means[c],
                }
            })
            .collect();
        Ok((preds, ids))
    }

    /// Plug-in normal predictive intervals around the point predictions,
    /// using each cluster's residual scale.
    pub fn predict_with_interval(
        &self,
        x_star: &DMatrix<f64>,
        level: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (preds, ids) = self.predict(x_star)?;
        let z = Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(0.5 + level / 2.0);
        let mut lower = Vec::with_capacity(preds.len());
        let mut upper = Vec::with_capacity(preds.len());
        for (p, &c) in preds.iter().zip(&ids) {
            lower.push(p - z * self.resid_sd[c]);
            upper.push(p + z * self.resid_sd[c]);
        }
        Ok((preds, lower, upper))
    }
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for i in 0..n {
        table[a[i]][b[i]] += 1;
    }
    let comb2 = |v: usize| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&v| comb2(v)).sum();
    let sum_a: f64 = table.iter().map(|row| comb2(row.iter().sum())).sum();
    let sum_b: f64 = (0..kb)
        .map(|j| comb2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = comb2(n);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-300 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}
