//! Student-t quantiles and weighted t-mixture quantiles.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One member of a per-point predictive mixture; the degrees of freedom are
/// shared across the mixture.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub location: f64,
    pub scale: f64,
}

/// Quantile of the standard Student-t with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("valid standard t parameters")
        .inverse_cdf(p)
}

/// CDF of the standard Student-t.
pub fn t_cdf(z: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("valid standard t parameters")
        .cdf(z)
}

/// CDF of the weighted t-mixture at `x`. Zero-scale components contribute a
/// step at their location.
pub fn mixture_cdf(x: f64, components: &[MixtureComponent], df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("valid standard t parameters");
    components
        .iter()
        .map(|c| {
            if c.scale > 0.0 {
                c.weight * t.cdf((x - c.location) / c.scale)
            } else if x >= c.location {
                c.weight
            } else {
                0.0
            }
        })
        .sum()
}

/// Target precision of [`mixture_quantile`] on the CDF scale.
pub const QUANTILE_CDF_TOL: f64 = 1e-8;

/// Quantile of the weighted t-mixture, found by bisection on the CDF.
///
/// The bracket starts from the sharpest per-component quantile bounds, is
/// widened until it straddles `p`, and is then bisected all the way to
/// floating-point collapse. Running to full bracket convergence (rather than
/// stopping at a CDF tolerance) keeps the result a stable function of the
/// mixture: for continuous mixtures the CDF at the result is within
/// [`QUANTILE_CDF_TOL`] of `p`, and perturbing any weight by less than
/// `1e-300` moves the endpoint by less than `1e-10`.
pub fn mixture_quantile(components: &[MixtureComponent], df: f64, p: f64) -> f64 {
    debug_assert!(!components.is_empty());
    debug_assert!((0.0..1.0).contains(&p) && p > 0.0);

    let zq = t_quantile(p, df).abs().max(1.0) + 1.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut widest = 0.0f64;
    for c in components {
        lo = lo.min(c.location - zq * c.scale);
        hi = hi.max(c.location + zq * c.scale);
        widest = widest.max(c.scale);
    }
    let mut pad = widest.max(1e-12);
    while mixture_cdf(lo, components, df) > p {
        lo -= pad;
        pad *= 2.0;
    }
    let mut pad = widest.max(1e-12);
    while mixture_cdf(hi, components, df) < p {
        hi += pad;
        pad *= 2.0;
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mixture_cdf(mid, components, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    mid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_quantiles_match_tables() {
        // Two-sided 95% points from the usual t table.
        assert!((t_quantile(0.975, 1.0) - 12.706).abs() < 1e-2);
        assert!((t_quantile(0.975, 10.0) - 2.228).abs() < 1e-3);
        assert!((t_quantile(0.975, 100.0) - 1.984).abs() < 1e-3);
        assert!((t_quantile(0.5, 7.0)).abs() < 1e-12);
        assert!((t_quantile(0.025, 10.0) + t_quantile(0.975, 10.0)).abs() < 1e-12);
    }

    #[test]
    fn single_component_quantile_matches_closed_form() {
        let c = [MixtureComponent {
            weight: 1.0,
            location: 2.0,
            scale: 0.5,
        }];
        let q = mixture_quantile(&c, 12.0, 0.975);
        let want = 2.0 + 0.5 * t_quantile(0.975, 12.0);
        assert!((q - want).abs() < 1e-5, "{q} vs {want}");
    }

    #[test]
    fn symmetric_two_component_median_is_zero() {
        let c = [
            MixtureComponent {
                weight: 0.5,
                location: 3.0,
                scale: 1.0,
            },
            MixtureComponent {
                weight: 0.5,
                location: -3.0,
                scale: 1.0,
            },
        ];
        let q = mixture_quantile(&c, 9.0, 0.5);
        assert!(q.abs() < 1e-6, "median {q}");
    }

    #[test]
    fn quantile_hits_cdf_target() {
        let c = [
            MixtureComponent {
                weight: 0.7,
                location: 0.0,
                scale: 1.0,
            },
            MixtureComponent {
                weight: 0.3,
                location: 5.0,
                scale: 0.2,
            },
        ];
        for p in [0.025, 0.5, 0.975] {
            let q = mixture_quantile(&c, 20.0, p);
            let f = mixture_cdf(q, &c, 20.0);
            assert!((f - p).abs() <= QUANTILE_CDF_TOL, "p={p}: cdf {f}");
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let c = [
            MixtureComponent {
                weight: 0.4,
                location: -1.0,
                scale: 0.3,
            },
            MixtureComponent {
                weight: 0.6,
                location: 2.0,
                scale: 1.5,
            },
        ];
        let mut last = 0.0;
        let mut x = -20.0;
        while x <= 20.0 {
            let f = mixture_cdf(x, &c, 8.0);
            assert!(f >= last);
            last = f;
            x += 0.25;
        }
    }

    #[test]
    fn negligible_weight_component_is_inert() {
        let base = [
            MixtureComponent {
                weight: 0.6,
                location: 0.0,
                scale: 1.0,
            },
            MixtureComponent {
                weight: 0.4,
                location: 1.0,
                scale: 2.0,
            },
        ];
        let mut padded = base.to_vec();
        padded.push(MixtureComponent {
            weight: 1e-310,
            location: 50.0,
            scale: 0.1,
        });
        for p in [0.025, 0.975] {
            let a = mixture_quantile(&base, 15.0, p);
            let b = mixture_quantile(&padded, 15.0, p);
            assert!((a - b).abs() < 1e-10, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_scale_component_acts_as_step() {
        let c = [MixtureComponent {
            weight: 1.0,
            location: 1.5,
            scale: 0.0,
        }];
        let q = mixture_quantile(&c, 5.0, 0.975);
        assert!((q - 1.5).abs() < 1e-9, "step quantile {q}");
    }
}
