//! Per-path random streams and order-fixed reductions shared by the
//! simulators.
//!
//! Path `i` always draws from ChaCha8 stream `i` of the run seed, and
//! results are collected in index order, so estimates depend on the seed
//! alone and not on how rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::numerics::stats::{effective_sample_size, mean_se, pairwise_sum};

pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` for paths `0..n` in parallel and returns the results in path
/// order.
pub fn map_paths<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i, &mut path_rng(seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    /// Effective number of samples (the sample count for plain averages).
    pub n: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        let (mean, se) = mean_se(xs);
        Self {
            mean,
            se,
            n: xs.len() as f64,
            seed,
        }
    }

    /// Self-normalized weighted mean `Σ w f / Σ w` with its delta-method
    /// standard error; `n` is the Kish effective sample size.
    pub fn weighted(weights: &[f64], values: &[f64], seed: u64) -> Self {
        let total = pairwise_sum(weights);
        let wf: Vec<f64> = weights.iter().zip(values).map(|(w, f)| w * f).collect();
        let mean = pairwise_sum(&wf) / total;
        let sq: Vec<f64> = weights
            .iter()
            .zip(values)
            .map(|(w, f)| (w * (f - mean)).powi(2))
            .collect();
        Self {
            mean,
            se: pairwise_sum(&sq).sqrt() / total,
            n: effective_sample_size(weights),
            seed,
        }
    }

    /// `(self - target) / se`, or 0 when both the deviation and se vanish.
    pub fn z(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_against(&self, other: &McEstimate) -> f64 {
        let d = self.mean - other.mean;
        if d == 0.0 {
            0.0
        } else {
            d / self.se.hypot(other.se)
        }
    }
}

/// Numerically stable `log(mean(exp(xs)))` in index order.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let scaled: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    max + (pairwise_sum(&scaled) / xs.len() as f64).ln()
}
