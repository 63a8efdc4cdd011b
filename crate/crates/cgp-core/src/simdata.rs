//! Synthetic swiss-roll regression benchmarks.
//!
//! Manifold coordinates `t ~ U(3 pi/2, 9 pi/2)` and `h ~ U(0, h_max)` are
//! embedded as `(t cos t, h, t sin t)` in the first three of `p` ambient
//! coordinates, every coordinate perturbed by `N(0, tau^2)` feature noise;
//! the response is `sin(5 pi t) + h^2` plus observation noise. Rows are
//! generated from per-row counter-derived streams, so a dataset is a pure
//! function of its config and rows can be generated in parallel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{center_xy, Centering};
use crate::error::{CgpError, Result};
use crate::par;
use crate::rng::{sub_seed, SeedStream};

pub const T_LO: f64 = 1.5 * std::f64::consts::PI;
pub const T_HI: f64 = 4.5 * std::f64::consts::PI;

/// Configuration of one synthetic draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwissRollConfig {
    /// Rows to generate.
    pub n: usize,
    /// Ambient feature count, at least 3.
    pub p: usize,
    /// Feature noise standard deviation.
    pub tau: f64,
    /// Upper end of the second manifold coordinate.
    pub h_max: f64,
    /// Observation noise standard deviation.
    pub response_noise_sd: f64,
    pub seed: u64,
}

impl SwissRollConfig {
    pub fn new(n: usize, p: usize, tau: f64, h_max: f64, seed: u64) -> Self {
        SwissRollConfig {
            n,
            p,
            tau,
            h_max,
            response_noise_sd: 0.02,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p < 3 {
            return Err(CgpError::Config(format!(
                "swiss roll needs p >= 3, got {}",
                self.p
            )));
        }
        if self.n == 0 {
            return Err(CgpError::Config("need at least one row".into()));
        }
        if self.tau < 0.0 || self.response_noise_sd < 0.0 || self.h_max < 0.0 {
            return Err(CgpError::Config("noise levels must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Generated design, response, and (for synthetic data) latent coordinates.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// `(t, h)` per row; present only for generated data.
    pub latent: Option<Vec<(f64, f64)>>,
}

/// Noiseless response surface over the manifold coordinates.
pub fn response_surface(t: f64, h: f64) -> f64 {
    (5.0 * std::f64::consts::PI * t).sin() + h * h
}

/// Generates a dataset from the config.
///
/// Per row the stream draws, in frozen order: `t`, `h`, the `p` feature
/// noises, and the response noise. The same seed therefore yields the same
/// latent coordinates and response for every noise level `tau`.
pub fn gen_swiss_roll(cfg: &SwissRollConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);

    let rows: Vec<usize> = (0..n).collect();
    let generated: Vec<(Vec<f64>, f64, (f64, f64))> = par::map_indexed(&rows, |_, &i| {
        let mut stream = SeedStream::new(sub_seed(cfg.seed, i as u64));
        let t = stream.uniform_in(T_LO, T_HI);
        let h = stream.uniform_in(0.0, cfg.h_max);
        let mut row = vec![0.0; p];
        for v in row.iter_mut() {
            *v = cfg.tau * stream.normal();
        }
        row[0] += t * t.cos();
        row[1] += h;
        row[2] += t * t.sin();
        let y = response_surface(t, h) + cfg.response_noise_sd * stream.normal();
        (row, y, (t, h))
    });

    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut latent = Vec::with_capacity(n);
    for (i, (row, yi, th)) in generated.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        y[i] = yi;
        latent.push(th);
    }
    Ok(Dataset {
        x,
        y,
        latent: Some(latent),
    })
}

/// Splits the first `n_train` rows off as a training set, rest as test.
pub fn split(ds: &Dataset, n_train: usize) -> Result<(Dataset, Dataset)> {
    let n = ds.x.nrows();
    if n_train == 0 || n_train >= n {
        return Err(CgpError::Config(format!(
            "split point {n_train} must be inside 1..{n}"
        )));
    }
    let take = |lo: usize, hi: usize| Dataset {
        x: ds.x.rows_range(lo..hi).into_owned(),
        y: ds.y.rows_range(lo..hi).into_owned(),
        latent: ds.latent.as_ref().map(|l| l[lo..hi].to_vec()),
    };
    Ok((take(0, n_train), take(n_train, n)))
}

/// Centers the design columns and the response, returning the statistics
/// needed to undo the shift.
pub fn center(ds: &Dataset) -> (Dataset, Centering) {
    let (x, y, stats) = center_xy(&ds.x, &ds.y);
    (
        Dataset {
            x,
            y,
            latent: ds.latent.clone(),
        },
        stats,
    )
}

/// Which published scenario table to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTable {
    /// Six small-sample settings: n=100, p in {10k, 20k}, tau in {.02,.05,.10}.
    SmallN,
    /// Six large-sample settings: n=5000, p in {10k, 20k}, tau in {.03,.06,.10}.
    LargeN,
}

/// The scenario matrix for a table; seeds are zeroed for the caller to fill.
pub fn scenario_matrix(table: ScenarioTable) -> Vec<SwissRollConfig> {
    let (n, taus, h_max) = match table {
        ScenarioTable::SmallN => (100, [0.02, 0.05, 0.10], 3.0),
        ScenarioTable::LargeN => (5000, [0.03, 0.06, 0.10], 5.0),
    };
    let mut out = Vec::with_capacity(6);
    for tau in taus {
        for p in [10_000, 20_000] {
            out.push(SwissRollConfig::new(n, p, tau, h_max, 0));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_rows_sit_on_the_roll() {
        let cfg = SwissRollConfig::new(50, 8, 0.0, 3.0, 11);
        let ds = gen_swiss_roll(&cfg).unwrap();
        let latent = ds.latent.as_ref().unwrap();
        for i in 0..50 {
            let (t, _) = latent[i];
            let r2 = ds.x[(i, 0)].powi(2) + ds.x[(i, 2)].powi(2);
            assert!((r2 - t * t).abs() < 1e-10 * t * t);
            for j in 3..8 {
                assert_eq!(ds.x[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn response_at_integer_latents() {
        // sin(25 pi) vanishes, so (t, h) = (5, 2) maps to exactly 4.
        assert!((response_surface(5.0, 2.0) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn latent_range_is_respected() {
        let cfg = SwissRollConfig::new(100_000, 3, 0.0, 3.0, 7);
        let ds = gen_swiss_roll(&cfg).unwrap();
        let latent = ds.latent.unwrap();
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        let mut h_max: f64 = 0.0;
        for (t, h) in latent {
            t_min = t_min.min(t);
            t_max = t_max.max(t);
            h_max = h_max.max(h);
            assert!((T_LO..T_HI).contains(&t));
            assert!((0.0..3.0).contains(&h));
        }
        assert!(t_min < T_LO + 0.01, "min t {t_min}");
        assert!(t_max > T_HI - 0.01, "max t {t_max}");
        assert!(h_max > 3.0 - 0.01);
    }

    #[test]
    fn feature_noise_has_configured_scale() {
        let tau = 0.05;
        let cfg = SwissRollConfig::new(100_000, 4, tau, 3.0, 13);
        let ds = gen_swiss_roll(&cfg).unwrap();
        // Column 4 is pure noise.
        let col = ds.x.column(3);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (col.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - tau).abs() < 0.05 * tau, "sd {sd}");
    }

    #[test]
    fn response_ignores_feature_noise_level() {
        let a = gen_swiss_roll(&SwissRollConfig::new(40, 6, 0.02, 3.0, 17)).unwrap();
        let b = gen_swiss_roll(&SwissRollConfig::new(40, 6, 0.10, 3.0, 17)).unwrap();
        for i in 0..40 {
            assert_eq!(a.y[i].to_bits(), b.y[i].to_bits());
        }
        assert!((&a.x - &b.x).amax() > 0.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SwissRollConfig::new(30, 10, 0.05, 5.0, 23);
        let a = gen_swiss_roll(&cfg).unwrap();
        let b = gen_swiss_roll(&cfg).unwrap();
        for (u, v) in a.x.iter().zip(b.x.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        for (u, v) in a.y.iter().zip(b.y.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn centering_round_trips() {
        let cfg = SwissRollConfig::new(25, 5, 0.1, 3.0, 29);
        let ds = gen_swiss_roll(&cfg).unwrap();
        let (centered, stats) = center(&ds);
        for j in 0..5 {
            assert!(centered.x.column(j).mean().abs() < 1e-12);
        }
        assert!(centered.y.mean().abs() < 1e-12);
        for i in 0..25 {
            assert!((centered.y[i] + stats.y_mean - ds.y[i]).abs() < 1e-12);
            for j in 0..5 {
                assert!((centered.x[(i, j)] + stats.x_means[j] - ds.x[(i, j)]).abs() < 1e-12);
            }
        }

        // Centering an already-centered set changes nothing.
        let (again, stats2) = center(&centered);
        assert!((&again.x - &centered.x).amax() < 1e-12);
        assert!(stats2.y_mean.abs() < 1e-12);
    }

    #[test]
    fn constant_column_centers_to_zero() {
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 7.5 } else { i as f64 });
        let y = DVector::zeros(6);
        let ds = Dataset { x, y, latent: None };
        let (centered, _) = center(&ds);
        assert!(centered.x.column(0).amax() < 1e-12);
    }

    #[test]
    fn scenario_matrices_match_published_tables() {
        let small = scenario_matrix(ScenarioTable::SmallN);
        assert_eq!(small.len(), 6);
        assert_eq!((small[0].n, small[0].p, small[0].tau), (100, 10_000, 0.02));
        assert_eq!((small[1].n, small[1].p, small[1].tau), (100, 20_000, 0.02));
        assert!(small.iter().all(|c| c.h_max == 3.0));

        let large = scenario_matrix(ScenarioTable::LargeN);
        assert_eq!(large.len(), 6);
        assert_eq!(
            (large[5].n, large[5].p, large[5].tau),
            (5000, 20_000, 0.10)
        );
        assert!(large.iter().all(|c| c.h_max == 5.0));
    }

    #[test]
    fn split_partitions_rows_and_latents() {
        let cfg = SwissRollConfig::new(20, 4, 0.0, 3.0, 31);
        let ds = gen_swiss_roll(&cfg).unwrap();
        let (train, test) = split(&ds, 15).unwrap();
        assert_eq!(train.x.nrows(), 15);
        assert_eq!(test.x.nrows(), 5);
        assert_eq!(train.latent.as_ref().unwrap().len(), 15);
        assert_eq!(test.y[0], ds.y[15]);
        assert!(split(&ds, 20).is_err());
    }
}
