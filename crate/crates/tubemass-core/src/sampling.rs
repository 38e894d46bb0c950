//! Deterministic Monte Carlo plumbing shared by the estimators.
//!
//! Every randomized routine takes a single u64 seed and fans it out to
//! per-batch ChaCha streams, so results are reproducible bit for bit across
//! runs and across thread counts. Parallel batches are collected in index
//! order; reductions never depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// splitmix64 step, used to decorrelate derived seeds.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent child seed for stream `stream` of the run seeded by `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_mul(0xd1b54a32d192ed03)))
}

pub fn rng_for(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}

/// Standard normal via Box-Muller; consumes two uniforms per pair of calls.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // 1 - u keeps the argument of ln strictly positive.
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Uniform point in an axis-aligned box.
pub fn sample_box<R: Rng>(rng: &mut R, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// Uniform point in the unit ball of R^dim (Gaussian direction, radius
/// distributed as u^(1/dim)).
pub fn sample_unit_ball<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let r = rng.random::<f64>().powf(1.0 / dim as f64);
        return dir.into_iter().map(|v| v * r / norm).collect();
    }
}

/// Run `n_batches` independent jobs on the rayon pool and return their
/// results in index order, independent of scheduling.
pub fn parallel_batches<T, F>(n_batches: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n_batches).into_par_iter().map(job).collect()
}

/// Mean and standard error from independent batch means.
#[derive(Debug, Clone, Default)]
pub struct BatchStats {
    batch_means: Vec<f64>,
}

impl BatchStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_means(batch_means: Vec<f64>) -> Self {
        Self { batch_means }
    }

    pub fn push(&mut self, batch_mean: f64) {
        self.batch_means.push(batch_mean);
    }

    pub fn len(&self) -> usize {
        self.batch_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batch_means.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.batch_means.is_empty() {
            return 0.0;
        }
        self.batch_means.iter().sum::<f64>() / self.batch_means.len() as f64
    }

    /// Standard error of the overall mean, from the sample variance of the
    /// batch means.
    pub fn standard_error(&self) -> f64 {
        let b = self.batch_means.len();
        if b < 2 {
            return f64::INFINITY;
        }
        let mean = self.mean();
        let var = self
            .batch_means
            .iter()
            .map(|m| (m - mean).powi(2))
            .sum::<f64>()
            / (b - 1) as f64;
        (var / b as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_reproduces_samples_exactly() {
        let a: Vec<f64> = {
            let mut rng = rng_for(42, 3);
            (0..16).map(|_| rng.random()).collect()
        };
        let b: Vec<f64> = {
            let mut rng = rng_for(42, 3);
            (0..16).map(|_| rng.random()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<f64> = {
            let mut rng = rng_for(42, 4);
            (0..16).map(|_| rng.random()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_do_not_collide_on_small_streams() {
        let mut seen = std::collections::HashSet::new();
        for stream in 0..10_000u64 {
            assert!(seen.insert(derive_seed(7, stream)));
        }
    }

    #[test]
    fn box_samples_stay_inside_and_average_to_center() {
        let bounds = [(-1.0, 3.0), (0.5, 0.75)];
        let mut rng = rng_for(1, 0);
        let mut sums = [0.0; 2];
        let n = 20_000;
        for _ in 0..n {
            let p = sample_box(&mut rng, &bounds);
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                assert!(p[i] >= lo && p[i] < hi);
                sums[i] += p[i];
            }
        }
        assert!((sums[0] / n as f64 - 1.0).abs() < 0.05);
        assert!((sums[1] / n as f64 - 0.625).abs() < 0.005);
    }

    #[test]
    fn ball_samples_have_the_right_radial_moment() {
        // E |x|^2 = d / (d + 2) for the uniform unit ball.
        for dim in [2usize, 4] {
            let mut rng = rng_for(9, dim as u64);
            let n = 40_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let p = sample_unit_ball(&mut rng, dim);
                let r2 = p.iter().map(|v| v * v).sum::<f64>();
                assert!(r2 <= 1.0 + 1e-12);
                sum += r2;
            }
            let expected = dim as f64 / (dim as f64 + 2.0);
            assert!(
                (sum / n as f64 - expected).abs() < 0.01,
                "dim {dim}: {} vs {expected}",
                sum / n as f64
            );
        }
    }

    #[test]
    fn normal_moments_are_plausible() {
        let mut rng = rng_for(5, 0);
        let n = 60_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let g = standard_normal(&mut rng);
            s1 += g;
            s2 += g * g;
        }
        assert!((s1 / n as f64).abs() < 0.02);
        assert!((s2 / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn parallel_batches_preserve_index_order() {
        let out = parallel_batches(64, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn batch_stats_match_hand_computation() {
        let stats = BatchStats::from_means(vec![1.0, 2.0, 3.0, 4.0]);
        assert!((stats.mean() - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12).
        assert!((stats.standard_error() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(BatchStats::from_means(vec![1.0]).standard_error(), f64::INFINITY);
    }
}
