//! Seeded G(n, p) sampling and the regime arithmetic shared by every experiment.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, which is portable and
//! platform independent, so a seed always reproduces the same graph. Child
//! seeds for trials are derived with [`child_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

/// Default half-width of the excluded window around `alpha = j/(j+1)`.
pub const DEFAULT_DELTA: f64 = 0.02;

/// Integer regime boundaries closer than this are treated as exact hits.
const BOUNDARY_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("dense regime (alpha = {alpha:.4}): expected diameter at most 2, every pair must be queried")]
    DenseRegime { alpha: f64 },
    #[error("sparse regime (alpha = {alpha:.4} >= 1): diameter is not bounded")]
    SparseRegime { alpha: f64 },
    #[error("bound overflow: {0}")]
    Overflow(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnpParams {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl GnpParams {
    pub fn new(n: usize, p: f64, seed: u64) -> Result<Self, RegimeError> {
        if n == 0 {
            return Err(RegimeError::Invalid("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(RegimeError::Invalid(format!("p = {p} is not a probability")));
        }
        Ok(GnpParams { n, p, seed })
    }
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `point`:
/// `mix64(mix64(base ^ mix64(point)) ^ trial)`.
pub fn child_seed(base: u64, point: u64, trial: u64) -> u64 {
    mix64(mix64(base ^ mix64(point)) ^ trial)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples G(n, p), skipping over the pair sequence `(0,1), (0,2), .., (n-2,n-1)`
/// with geometric gaps so the cost is proportional to the number of edges.
pub fn sample_gnp(params: &GnpParams) -> Graph {
    let n = params.n;
    let p = params.p;
    if n < 2 || p <= 0.0 {
        return Graph::empty(n);
    }
    if p >= 1.0 {
        return Graph::complete(n);
    }
    let mut rng = rng_from_seed(params.seed);
    let gaps = Geometric::new(p).expect("0 < p < 1");
    let mut pairs = Vec::with_capacity((p * (n * (n - 1) / 2) as f64 * 1.1) as usize + 16);
    // (u, v) is the next candidate pair; the walk advances row by row.
    let mut u = 0usize;
    let mut v = 0usize;
    loop {
        let mut skip = rng.sample(gaps).saturating_add(1);
        while skip > 0 {
            let left_in_row = (n - 1 - v) as u64;
            if skip <= left_in_row {
                v += skip as usize;
                skip = 0;
            } else {
                skip -= left_in_row;
                u += 1;
                if u >= n - 1 {
                    return Graph::from_sorted_pairs(n, &pairs);
                }
                v = u;
            }
        }
        pairs.push((u as u32, v as u32));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub k: u32,
    pub alpha: f64,
    pub lambda: f64,
    pub expected_diameter: u32,
    pub boundary_flag: bool,
}

/// `alpha = ln(1/p)/ln n`.
pub fn alpha_of(n: usize, p: f64) -> f64 {
    (1.0 / p).ln() / (n as f64).ln()
}

/// `lambda = n^k p^(k+1)`.
pub fn lambda_of(n: usize, p: f64, k: u32) -> f64 {
    (n as f64).powi(k as i32) * p.powi(k as i32 + 1)
}

/// Classifies `p = n^(-alpha)` into the regime `k = floor(alpha/(1-alpha))`,
/// where the random graph has diameter `k + 2` with high probability.
pub fn regime_from(n: usize, p: f64, delta: f64) -> Result<RegimeParams, RegimeError> {
    if n < 3 {
        return Err(RegimeError::Invalid("regime needs n >= 3".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(RegimeError::Invalid(format!("regime needs 0 < p < 1, got {p}")));
    }
    let alpha = alpha_of(n, p);
    if alpha >= 1.0 {
        return Err(RegimeError::SparseRegime { alpha });
    }
    let ratio = alpha / (1.0 - alpha);
    let k = (ratio + BOUNDARY_SNAP).floor();
    if k < 1.0 {
        return Err(RegimeError::DenseRegime { alpha });
    }
    let k = k as u32;
    let on_integer = (ratio - ratio.round()).abs() < BOUNDARY_SNAP;
    let near_window = [k, k + 1]
        .iter()
        .any(|&j| (alpha - j as f64 / (j as f64 + 1.0)).abs() < delta);
    Ok(RegimeParams {
        k,
        alpha,
        lambda: lambda_of(n, p, k),
        expected_diameter: k + 2,
        boundary_flag: on_integer || near_window,
    })
}

/// The closed-form query-complexity bounds at `(n, p, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    /// `C / (n^(k-2) p^k)`
    pub adaptive_upper: f64,
    /// `1 / (2 (k+1+eps) n^(k-2) p^k)`
    pub adaptive_lower: f64,
    /// `3 e^lambda ln n / (n^(k-2) p^k)`
    pub nonadaptive_upper: f64,
    /// `e^lambda ln n / (8 (k+1)^2 n^(k-2) p^k)`
    pub nonadaptive_lower: f64,
    /// `n (n-1) / 2`
    pub all_pairs: u64,
    pub lambda: f64,
}

/// `1 / (n^(k-2) p^k)`, i.e. `n^(4-d) p^(2-d)` at `d = k + 2`.
pub fn scale_factor(n: usize, p: f64, k: u32) -> f64 {
    let k = k as f64;
    (n as f64).powf(2.0 - k) * p.powf(-k)
}

pub fn bounds_table(n: usize, p: f64, k: u32, c: f64, eps: f64) -> Result<BoundsTable, RegimeError> {
    if k < 1 {
        return Err(RegimeError::Invalid("k must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(RegimeError::Invalid(format!("p = {p} must lie in (0, 1)")));
    }
    if !(c > 0.0) || !(eps > 0.0) {
        return Err(RegimeError::Invalid("C and eps must be positive".into()));
    }
    if n < 2 {
        return Err(RegimeError::Invalid("n must be at least 2".into()));
    }
    let scale = scale_factor(n, p, k);
    let lambda = lambda_of(n, p, k);
    let growth = lambda.exp() * (n as f64).ln();
    let kf = k as f64;
    let table = BoundsTable {
        adaptive_upper: c * scale,
        adaptive_lower: scale / (2.0 * (kf + 1.0 + eps)),
        nonadaptive_upper: 3.0 * growth * scale,
        nonadaptive_lower: growth * scale / (8.0 * (kf + 1.0) * (kf + 1.0)),
        all_pairs: (n as u64) * (n as u64 - 1) / 2,
        lambda,
    };
    let values = [
        table.adaptive_upper,
        table.adaptive_lower,
        table.nonadaptive_upper,
        table.nonadaptive_lower,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RegimeError::Overflow("a bound is not representable as f64"));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn sample_extremes() {
        for seed in [0, 1, 99] {
            assert_eq!(sample_gnp(&GnpParams::new(5, 0.0, seed).unwrap()).m(), 0);
            assert_eq!(sample_gnp(&GnpParams::new(5, 1.0, seed).unwrap()), Graph::complete(5));
        }
        assert_eq!(sample_gnp(&GnpParams::new(1, 0.5, 3).unwrap()).n(), 1);
    }

    /// Per-pair Bernoulli sampler, independent of the geometric-skip walk.
    fn bernoulli_edge_count(n: usize, p: f64, seed: u64) -> usize {
        let mut rng = rng_from_seed(seed);
        (0..n * (n - 1) / 2).filter(|_| rng.random_bool(p)).count()
    }

    #[test]
    fn sample_edge_count_in_four_sigma_window() {
        // mean 4950 * 0.05 = 247.5, sigma = sqrt(247.5 * 0.95) ~ 15.33
        let g = sample_gnp(&GnpParams::new(100, 0.05, 7).unwrap());
        assert!((186..=309).contains(&g.m()), "m = {}", g.m());
        let reference = bernoulli_edge_count(100, 0.05, 7);
        assert!((186..=309).contains(&reference), "reference m = {reference}");
    }

    #[test]
    fn sample_mean_matches_binomial() {
        // Averaged over 200 seeds, the edge count of G(60, 0.1) has mean 177
        // and standard error sqrt(177 * 0.9 / 200) ~ 0.89.
        let total: usize = (0..200)
            .map(|s| sample_gnp(&GnpParams::new(60, 0.1, s).unwrap()).m())
            .sum();
        let mean = total as f64 / 200.0;
        assert!((mean - 177.0).abs() < 4.0 * 0.9, "mean = {mean}");
        let reference: usize = (0..200).map(|s| bernoulli_edge_count(60, 0.1, s)).sum();
        let reference = reference as f64 / 200.0;
        assert!((reference - 177.0).abs() < 4.0 * 0.9);
    }

    #[test]
    fn sample_is_reproducible_and_seed_sensitive() {
        let a = sample_gnp(&GnpParams::new(300, 0.03, 42).unwrap());
        let b = sample_gnp(&GnpParams::new(300, 0.03, 42).unwrap());
        let c = sample_gnp(&GnpParams::new(300, 0.03, 43).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_covers_last_pair() {
        // With p close to one the walk must reach (n-2, n-1).
        let g = sample_gnp(&GnpParams::new(6, 0.999_999, 5).unwrap());
        assert_eq!(g, Graph::complete(6));
    }

    #[test]
    fn params_validation() {
        assert!(GnpParams::new(0, 0.5, 0).is_err());
        assert!(GnpParams::new(5, 1.5, 0).is_err());
        assert!(GnpParams::new(5, -0.1, 0).is_err());
    }

    #[test]
    fn regime_examples() {
        let r = regime_from(10_000, 10f64.powf(-2.4), DEFAULT_DELTA).unwrap();
        assert!((r.alpha - 0.6).abs() < 1e-12);
        assert_eq!(r.k, 1);
        assert_eq!(r.expected_diameter, 3);

        let r = regime_from(1_000_000, 10f64.powf(-4.2), DEFAULT_DELTA).unwrap();
        assert_eq!(r.k, 2);
        assert!(!r.boundary_flag);

        let n = 10_000usize;
        let r = regime_from(n, (n as f64).powf(-0.5), DEFAULT_DELTA).unwrap();
        assert_eq!(r.k, 1);
        assert!(r.boundary_flag);
    }

    #[test]
    fn regime_errors_and_flags() {
        assert!(matches!(
            regime_from(10_000, 0.1, DEFAULT_DELTA),
            Err(RegimeError::DenseRegime { .. })
        ));
        assert!(matches!(
            regime_from(100, 0.001, DEFAULT_DELTA),
            Err(RegimeError::SparseRegime { .. })
        ));
        assert!(matches!(regime_from(2, 0.5, DEFAULT_DELTA), Err(RegimeError::Invalid(_))));
        assert!(matches!(regime_from(10, 1.0, DEFAULT_DELTA), Err(RegimeError::Invalid(_))));
        // alpha = 0.66 sits inside the window around 2/3
        let r = regime_from(10_000, 10f64.powf(-2.64), DEFAULT_DELTA).unwrap();
        assert_eq!(r.k, 1);
        assert!(r.boundary_flag);
    }

    #[test]
    fn regime_k_is_floor_of_ratio() {
        for &alpha in &[0.51, 0.55, 0.6, 0.64, 0.7, 0.72, 0.76, 0.8, 0.85, 0.9] {
            let n = 1usize << 20;
            let p = (n as f64).powf(-alpha);
            let r = regime_from(n, p, DEFAULT_DELTA).unwrap();
            assert_eq!(r.k, (alpha / (1.0 - alpha)).floor() as u32, "alpha {alpha}");
            assert!(r.lambda > 0.0);
        }
    }

    #[test]
    fn bounds_reference_point() {
        let t = bounds_table(16384, 0.005, 1, 16.0, 0.1).unwrap();
        assert!(rel(t.adaptive_upper, 52_428_800.0) < 1e-9);
        assert!(rel(t.adaptive_lower, 3_276_800.0 / 4.2) < 1e-9);
        assert!((t.adaptive_lower - 780_190.476).abs() < 1e-2);
        assert!(rel(t.lambda, 0.4096) < 1e-9);
        let growth = 0.4096f64.exp() * 16384f64.ln();
        assert!(rel(t.nonadaptive_upper, 3.0 * growth * 3_276_800.0) < 1e-9);
        assert!(rel(t.nonadaptive_upper, 1.437e8) < 1e-3);
        assert!(rel(t.nonadaptive_lower, growth * 3_276_800.0 / 32.0) < 1e-9);
        assert!(rel(t.nonadaptive_lower, 1.497e6) < 1e-3);
        assert_eq!(t.all_pairs, 16384 * 16383 / 2);
    }

    #[test]
    fn scale_factor_matches_diameter_form() {
        for &(n, p, k) in &[(4096usize, 0.01f64, 1u32), (100_000, 1e-3, 2), (50_000, 2e-4, 3)] {
            let d = (k + 2) as f64;
            let direct = (n as f64).powf(4.0 - d) * p.powf(2.0 - d);
            assert!(rel(scale_factor(n, p, k), direct) < 1e-12);
        }
    }

    #[test]
    fn bounds_are_ordered_inside_regimes() {
        for &(n, alpha) in &[(16384usize, 0.55), (32768, 0.6), (1 << 20, 0.7), (1 << 20, 0.78)] {
            let p = (n as f64).powf(-alpha);
            let r = regime_from(n, p, DEFAULT_DELTA).unwrap();
            let t = bounds_table(n, p, r.k, 16.0, 0.1).unwrap();
            assert!(t.adaptive_lower < t.nonadaptive_lower);
            assert!(t.nonadaptive_lower < t.nonadaptive_upper);
            assert!(t.adaptive_lower < t.adaptive_upper);
        }
    }

    #[test]
    fn bounds_reject_bad_inputs() {
        assert!(bounds_table(100, 0.1, 0, 16.0, 0.1).is_err());
        assert!(bounds_table(100, 0.0, 1, 16.0, 0.1).is_err());
        assert!(bounds_table(100, 0.1, 1, 0.0, 0.1).is_err());
        assert!(matches!(
            bounds_table(1_000_000, 0.5, 3000, 16.0, 0.1),
            Err(RegimeError::Overflow(_))
        ));
    }

    #[test]
    fn child_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for g in 0..20 {
            for t in 0..20 {
                assert!(seen.insert(child_seed(7, g, t)));
            }
        }
        assert_eq!(child_seed(7, 3, 4), child_seed(7, 3, 4));
    }
}
