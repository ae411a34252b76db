//! Direct Monte Carlo of the Edwards polymer: Brownian paths reweighted by
//! `e^{-βH_T}` with `H_T = ∫ L(T, x)² dx` computed from binned occupation.
//!
//! Paths may be proposed from a symmetric mixture of drifts `±b` instead of
//! plain Wiener measure; the likelihood ratio `e^{b²T/2} / cosh(b B_T)` is
//! folded into the weights, so every estimate stays unbiased.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::besselsim::{exact_step, first_passage_density, Dim, EquilibriumSampler, SimError};
use crate::mc::{log_mean_exp, map_paths, McEstimate};
use crate::numerics::stats::{effective_sample_size, linear_fit, loglog_slope, mean_se};
use crate::spectral;
use crate::sturm::{self, EigenSolution, SolverConfig, SturmError};

#[derive(Debug, Error)]
pub enum PolymerError {
    #[error("invalid polymer config: {0}")]
    InvalidConfig(String),
    #[error("effective sample size {ess:.1} is below 0.1% of {n} paths; use a smaller T or an importance drift")]
    Degenerate { ess: f64, n: usize },
    #[error("conditioning accepted {accepted} of {tried} composite draws; widen the bins")]
    ConditioningTooTight { accepted: usize, tried: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sturm(#[from] SturmError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolymerConfig {
    /// Path length `T`.
    pub t: f64,
    pub beta: f64,
    pub dt: f64,
    /// Spatial bin width for the local time.
    pub bin: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Importance drift `b` of the `±b` mixture proposal (0: Wiener measure).
    pub drift: f64,
}

impl Default for PolymerConfig {
    fn default() -> Self {
        Self {
            t: 8.0,
            beta: 1.0,
            dt: 0.0025,
            bin: 0.05,
            n_paths: 100_000,
            seed: 1,
            drift: 0.0,
        }
    }
}

impl PolymerConfig {
    pub fn steps(&self) -> usize {
        (self.t / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), PolymerError> {
        let bad = |m: String| Err(PolymerError::InvalidConfig(m));
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.dt > 0.0 && self.bin > 0.0 && self.dt.is_finite() && self.bin.is_finite()) {
            return bad("dt and bin must be positive".into());
        }
        if self.dt > self.bin * self.bin * (1.0 + 1e-12) {
            return bad(format!("dt = {} exceeds bin² = {}", self.dt, self.bin * self.bin));
        }
        let ratio = self.t / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad(format!("T / dt = {ratio} is not an integer"));
        }
        if self.n_paths < 2 {
            return bad("n_paths must be at least 2".into());
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return bad(format!("drift must be non-negative, got {}", self.drift));
        }
        Ok(())
    }
}

/// Step counts per spatial bin; occupation time is `count · dt`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalTimeHistogram {
    /// Index of the bin stored at `counts[0]`.
    pub first_bin: i64,
    pub counts: Vec<u32>,
    pub dt: f64,
    pub bin: f64,
}

impl LocalTimeHistogram {
    fn with_capacity(dt: f64, bin: f64, half_width: usize) -> Self {
        Self {
            first_bin: -(half_width as i64),
            counts: vec![0; 2 * half_width + 1],
            dt,
            bin,
        }
    }

    fn add(&mut self, index: i64) {
        if index < self.first_bin {
            let grow = (self.first_bin - index) as usize + self.counts.len() / 2;
            let mut counts = vec![0; grow];
            counts.extend_from_slice(&self.counts);
            self.counts = counts;
            self.first_bin -= grow as i64;
        }
        let slot = (index - self.first_bin) as usize;
        if slot >= self.counts.len() {
            self.counts.resize(slot + 1 + self.counts.len() / 2, 0);
        }
        self.counts[slot] += 1;
    }

    pub fn bin_of(&self, x: f64) -> i64 {
        (x / self.bin).floor() as i64
    }

    /// Occupation time of bin `index`.
    pub fn occupation(&self, index: i64) -> f64 {
        let slot = index - self.first_bin;
        if slot < 0 || slot as usize >= self.counts.len() {
            0.0
        } else {
            self.counts[slot as usize] as f64 * self.dt
        }
    }

    /// Local time `L(T, x)` as occupation / bin width.
    pub fn local_time(&self, x: f64) -> f64 {
        self.occupation(self.bin_of(x)) / self.bin
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().map(|&c| c as u64).sum::<u64>() as f64 * self.dt
    }

    /// `Σ_bins L² · bin`.
    pub fn intersection(&self) -> f64 {
        let sq: u64 = self.counts.iter().map(|&c| c as u64 * c as u64).sum();
        sq as f64 * self.dt * self.dt / self.bin
    }

    /// Occupation time strictly above (`above = true`) or below the bin of `x`,
    /// plus half of that bin's own occupation.
    pub fn occupation_beyond(&self, x: f64, above: bool) -> f64 {
        let k = self.bin_of(x);
        let own = 0.5 * self.occupation(k);
        let rest: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let idx = self.first_bin + *i as i64;
                if above {
                    idx > k
                } else {
                    idx < k
                }
            })
            .map(|(_, &c)| c as u64)
            .sum();
        rest as f64 * self.dt + own
    }
}

/// One proposal path: `H_T`, `B_T` and the log likelihood ratio of Wiener
/// measure against the proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    pub h: f64,
    pub end: f64,
    pub log_lr: f64,
}

fn simulate_path(cfg: &PolymerConfig, rng: &mut ChaCha8Rng) -> (LocalTimeHistogram, f64, f64) {
    let steps = cfg.steps();
    let sqdt = cfg.dt.sqrt();
    let drift = if cfg.drift > 0.0 {
        if rng.random::<bool>() {
            cfg.drift
        } else {
            -cfg.drift
        }
    } else {
        0.0
    };
    let spread = (6.0 * cfg.t.sqrt() + cfg.drift * cfg.t) / cfg.bin;
    let mut occ = LocalTimeHistogram::with_capacity(cfg.dt, cfg.bin, spread as usize + 1);
    let mut x = 0.0;
    let inv_bin = 1.0 / cfg.bin;
    for _ in 0..steps {
        occ.add((x * inv_bin).floor() as i64);
        let z: f64 = rng.sample(StandardNormal);
        x += drift * cfg.dt + sqdt * z;
    }
    let log_lr = if cfg.drift > 0.0 {
        let b = cfg.drift;
        // log(e^{b²T/2} / cosh(b x)), written to avoid overflow.
        0.5 * b * b * cfg.t - (b * x).abs() - (0.5 * (1.0 + (-2.0 * (b * x).abs()).exp())).ln()
    } else {
        0.0
    };
    (occ, x, log_lr)
}

pub fn simulate_paths(cfg: &PolymerConfig) -> Result<Vec<PathSummary>, PolymerError> {
    cfg.validate()?;
    Ok(map_paths(cfg.n_paths, cfg.seed, |_, rng| {
        let (occ, end, log_lr) = simulate_path(cfg, rng);
        PathSummary {
            h: occ.intersection(),
            end,
            log_lr,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolymerEstimate {
    pub log_z: f64,
    pub log_z_se: f64,
    /// `-log Z / T`.
    pub rate_at_t: f64,
    pub rate_se: f64,
    /// `E_Q |B_T| / T`.
    pub endpoint_mean: f64,
    pub endpoint_mean_se: f64,
    /// Standard deviation of `|B_T|` under `Q`, divided by `√T`.
    pub endpoint_sd: f64,
    pub endpoint_sd_se: f64,
    pub ess: f64,
    pub n: usize,
}

/// Weighted view of a batch of paths under `Q_T^β`.
#[derive(Debug, Clone)]
pub struct WeightedPaths {
    pub paths: Vec<PathSummary>,
    /// `log(e^{-βH} · dP/dQ)` per path.
    pub log_weights: Vec<f64>,
    pub cfg: PolymerConfig,
}

impl WeightedPaths {
    pub fn new(cfg: &PolymerConfig) -> Result<Self, PolymerError> {
        let paths = simulate_paths(cfg)?;
        let log_weights = paths.iter().map(|p| -cfg.beta * p.h + p.log_lr).collect();
        Ok(Self {
            paths,
            log_weights,
            cfg: *cfg,
        })
    }

    /// Weights rescaled by the largest one.
    pub fn relative_weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights.iter().map(|l| (l - max).exp()).collect()
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.relative_weights())
    }

    fn check_ess(&self) -> Result<f64, PolymerError> {
        let ess = self.ess();
        if ess < 1e-3 * self.paths.len() as f64 {
            return Err(PolymerError::Degenerate {
                ess,
                n: self.paths.len(),
            });
        }
        Ok(ess)
    }

    /// Self-normalized `E_Q f(B_T)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> McEstimate {
        let v: Vec<f64> = self.paths.iter().map(|p| f(p.end)).collect();
        McEstimate::weighted(&self.relative_weights(), &v, self.cfg.seed)
    }

    /// `(log mean w, se)` with the delta-method error `se(w̄)/w̄`.
    pub fn log_z(&self) -> (f64, f64) {
        let log_z = log_mean_exp(&self.log_weights);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - log_z).exp()).collect();
        let (_, se) = mean_se(&w);
        (log_z, se)
    }

    pub fn estimate(&self) -> Result<PolymerEstimate, PolymerError> {
        let ess = self.check_ess()?;
        let t = self.cfg.t;
        let (log_z, log_z_se) = self.log_z();
        let mean = self.expect(|x| x.abs() / t);
        let second = self.expect(|x| x * x / t);
        let var = (second.mean - mean.mean * mean.mean * t).max(0.0);
        let sd = var.sqrt();
        Ok(PolymerEstimate {
            log_z,
            log_z_se,
            rate_at_t: -log_z / t,
            rate_se: log_z_se / t,
            endpoint_mean: mean.mean,
            endpoint_mean_se: mean.se,
            endpoint_sd: sd,
            endpoint_sd_se: sd / (2.0 * ess).sqrt(),
            ess,
            n: self.paths.len(),
        })
    }

    /// Weighted skewness of `B_T` and its standard error `√(6/ESS)`.
    pub fn skewness(&self) -> (f64, f64) {
        let m = self.expect(|x| x).mean;
        let m2 = self.expect(|x| (x - m).powi(2)).mean;
        let m3 = self.expect(|x| (x - m).powi(3)).mean;
        (m3 / m2.powf(1.5), (6.0 / self.ess()).sqrt())
    }

    /// Weighted variance of `(|B_T| - b T) / (c √T)`.
    pub fn standardized_variance(&self, b: f64, c: f64) -> f64 {
        let t = self.cfg.t;
        let z = |x: f64| (x.abs() - b * t) / (c * t.sqrt());
        let m = self.expect(z).mean;
        self.expect(|x| (z(x) - m).powi(2)).mean
    }

    /// `(1/T) log E[e^{-βH + μB_T} 1{B_T ≥ 0}]` over Wiener measure.
    pub fn mgf(&self, mu: f64) -> Result<McEstimate, PolymerError> {
        let logs: Vec<f64> = self
            .paths
            .iter()
            .zip(&self.log_weights)
            .map(|(p, l)| {
                if p.end >= 0.0 {
                    l + mu * p.end
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let ess = effective_sample_size(&w);
        if !(ess >= 1e-3 * self.paths.len() as f64) {
            return Err(PolymerError::Degenerate {
                ess,
                n: self.paths.len(),
            });
        }
        let (mean, se) = mean_se(&w);
        let t = self.cfg.t;
        Ok(McEstimate {
            mean: (max + mean.ln()) / t,
            se: se / mean / t,
            n: ess,
            seed: self.cfg.seed,
        })
    }
}

pub fn sample_polymer(cfg: &PolymerConfig) -> Result<PolymerEstimate, PolymerError> {
    WeightedPaths::new(cfg)?.estimate()
}

/// Finite-T estimate of `Λ⁺(μ)`.
pub fn tilted_mgf(mu: f64, cfg: &PolymerConfig) -> Result<McEstimate, PolymerError> {
    WeightedPaths::new(cfg)?.mgf(mu)
}

/// `(intercept, slope)` of `y` against `1/T`: the intercept extrapolates to
/// `T = ∞`.
pub fn extrapolate_inverse_t(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let inv: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
    let (slope, intercept) = linear_fit(&inv, ys);
    (intercept, slope)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseRow {
    pub beta: f64,
    pub t: f64,
    pub estimate: PolymerEstimate,
    /// `log Z` against the reference run.
    pub z_log_z: f64,
    /// `β^{1/3} E|B_T|` against the reference run's `E|B_T|`.
    pub z_endpoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    /// Scaled horizon `β^{2/3} T` shared by all runs.
    pub horizon: f64,
    pub reference: PolymerEstimate,
    pub rows: Vec<CollapseRow>,
    /// Fitted exponent of `-log Z / T` against `β`.
    pub exponent: f64,
}

impl CollapseReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.z_log_z.abs(), r.z_endpoint.abs()])
            .fold(0.0, f64::max)
    }
}

/// Runs each `β` at `T_β = S / β^{2/3}` with `dt_β = dt / β^{2/3}` and
/// `bin_β = bin / β^{1/3}`, where `S = cfg.t`. Brownian scaling maps every
/// such run onto the `β = 1` run at horizon `S`, discretization included,
/// so the matched statistics differ only by Monte Carlo noise. The
/// reference uses `cfg.seed`; other `β` use `cfg.seed + 1 + i`.
pub fn scaling_collapse(betas: &[f64], cfg: &PolymerConfig) -> Result<CollapseReport, PolymerError> {
    if betas.is_empty() || betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(PolymerError::InvalidConfig("betas must be positive".into()));
    }
    let reference_cfg = PolymerConfig { beta: 1.0, ..*cfg };
    let reference = sample_polymer(&reference_cfg)?;
    let s = cfg.t;
    let mut rows = Vec::with_capacity(betas.len());
    for (i, &beta) in betas.iter().enumerate() {
        let scale = beta.powf(2.0 / 3.0);
        let run_cfg = PolymerConfig {
            t: s / scale,
            beta,
            dt: cfg.dt / scale,
            bin: cfg.bin / beta.cbrt(),
            seed: if beta == 1.0 { cfg.seed } else { cfg.seed + 1 + i as u64 },
            ..*cfg
        };
        let est = sample_polymer(&run_cfg)?;
        let z = |a: f64, sa: f64, b: f64, sb: f64| {
            let d = a - b;
            if d == 0.0 {
                0.0
            } else {
                d / sa.hypot(sb)
            }
        };
        // E|B_T| / T_β · β^{1/3} T_β / S compares to E|B_S| / S.
        let k = beta.cbrt() * run_cfg.t / s;
        rows.push(CollapseRow {
            beta,
            t: run_cfg.t,
            z_log_z: z(est.log_z, est.log_z_se, reference.log_z, reference.log_z_se),
            z_endpoint: z(
                k * est.endpoint_mean,
                k * est.endpoint_mean_se,
                reference.endpoint_mean,
                reference.endpoint_mean_se,
            ),
            estimate: est,
        });
    }
    let exponent = if rows.len() >= 2 {
        let bs: Vec<f64> = rows.iter().map(|r| r.beta).collect();
        let rates: Vec<f64> = rows.iter().map(|r| r.estimate.rate_at_t).collect();
        loglog_slope(&bs, &rates)
    } else {
        f64::NAN
    };
    Ok(CollapseReport {
        horizon: s,
        reference,
        rows,
        exponent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayKnightConfig {
    /// Template for the direct paths; `t` is overridden per check.
    pub polymer: PolymerConfig,
    /// Horizon of the conditioned composite check.
    pub t_conditioned: f64,
    /// Horizon of the weight bookkeeping check.
    pub t_weights: f64,
    /// Space step of the BESQ pieces.
    pub dv: f64,
    pub conditioned_samples: usize,
    pub weight_samples: usize,
    /// Half-width of the acceptance window for occupation times.
    pub time_window: f64,
    /// Half-width of the acceptance window for the local time at 0.
    pub level_window: f64,
    /// Tries per conditioned piece before giving up on a sample.
    pub max_tries: usize,
    pub bridge_steps: usize,
    /// Random evaluation points along the middle piece.
    pub y_points: usize,
    /// Euler step of the tilted diffusion.
    pub tilted_dv: f64,
    /// Importance drift of the direct paths in the weight check.
    pub weight_drift: f64,
}

impl Default for RayKnightConfig {
    fn default() -> Self {
        Self {
            polymer: PolymerConfig {
                dt: 0.000625,
                bin: 0.025,
                n_paths: 40_000,
                ..PolymerConfig::default()
            },
            t_conditioned: 2.0,
            t_weights: 3.0,
            dv: 0.01,
            conditioned_samples: 2_000,
            weight_samples: 40_000,
            time_window: 0.1,
            level_window: 0.2,
            max_tries: 20_000,
            bridge_steps: 64,
            y_points: 4,
            tilted_dv: 0.001,
            weight_drift: 1.5,
        }
    }
}

/// Endpoint and local-time data of one direct path, mirrored so that the
/// endpoint is non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointData {
    pub y: f64,
    /// `L(T, B_T)`.
    pub h1: f64,
    /// `L(T, 0)`.
    pub h2: f64,
    /// Occupation beyond the endpoint.
    pub t1: f64,
    /// Occupation on the far side of the origin.
    pub t2: f64,
    pub h: f64,
}

fn local_time_at(occ: &LocalTimeHistogram, x: f64) -> f64 {
    // Average of the two bins nearest to x.
    let k = occ.bin_of(x);
    let frac = x / occ.bin - k as f64;
    let other = if frac < 0.5 { k - 1 } else { k + 1 };
    0.5 * (occ.occupation(k) + occ.occupation(other)) / occ.bin
}

fn endpoint_data(occ: &LocalTimeHistogram, end: f64) -> EndpointData {
    let above = end >= 0.0;
    let k = occ.bin_of(end);
    let own = occ.occupation(k);
    let frac = end / occ.bin - k as f64;
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for (i, &c) in occ.counts.iter().enumerate() {
        let idx = occ.first_bin + i as i64;
        let time = c as f64 * occ.dt;
        if (above && idx > k) || (!above && idx < k) {
            t1 += time;
        }
        if (above && idx < 0) || (!above && idx >= 0) {
            t2 += time;
        }
    }
    t1 += own * if above { 1.0 - frac } else { frac };
    EndpointData {
        y: end.abs(),
        h1: local_time_at(occ, end),
        h2: local_time_at(occ, 0.0),
        t1,
        t2,
        h: occ.intersection(),
    }
}

pub fn direct_endpoint_data(cfg: &PolymerConfig) -> Result<Vec<EndpointData>, PolymerError> {
    cfg.validate()?;
    Ok(map_paths(cfg.n_paths, cfg.seed, |_, rng| {
        let (occ, end, _) = simulate_path(cfg, rng);
        endpoint_data(&occ, end)
    }))
}

/// BESQ⁰ from `h` to absorption: `(∫X*, ∫X*²)`.
fn besq0_run(h: f64, dv: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut x, mut area, mut quad) = (h, 0.0, 0.0);
    while x > 0.0 {
        let next = exact_step(Dim::Zero, x, dv, rng);
        area += 0.5 * (x + next) * dv;
        quad += 0.5 * (x * x + next * next) * dv;
        x = next;
    }
    (area, quad)
}

/// BESQ² from `h` over `[0, y]`: `(X_y, ∫X, ∫X²)`.
fn besq2_run(h: f64, y: f64, dv: f64, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let steps = (y / dv).ceil().max(1.0) as usize;
    let dv = y / steps as f64;
    let (mut x, mut area, mut quad) = (h, 0.0, 0.0);
    for _ in 0..steps {
        let next = exact_step(Dim::Two, x, dv, rng);
        area += 0.5 * (x + next) * dv;
        quad += 0.5 * (x * x + next * next) * dv;
        x = next;
    }
    (x, area, quad)
}

/// Unbiased estimate of `w(h, s)`: the first-passage density of Brownian
/// motion from `h/2` times `exp(-2∫R)` along a 3d Bessel bridge from `h/2`
/// to 0 over `[0, s]`.
pub fn w_bridge_sample(h: f64, s: f64, steps: usize, rng: &mut ChaCha8Rng) -> f64 {
    if h <= 0.0 || s <= 0.0 {
        return 0.0;
    }
    let density = match first_passage_density(h, s) {
        Ok(d) => d,
        Err(_) => return 0.0,
    };
    let dt = s / steps as f64;
    let mut p = [0.5 * h, 0.0, 0.0];
    let mut r = 0.5 * h;
    let mut integral = 0.0;
    for k in 0..steps {
        let left = s - k as f64 * dt;
        let right = (left - dt).max(0.0);
        let pull = dt / left;
        let sd = (dt * right / left).sqrt();
        for c in p.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *c += -*c * pull + sd * z;
        }
        let next = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        integral += 0.5 * (r + next) * dt;
        r = next;
    }
    density * (-2.0 * integral).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayKnightReport {
    pub direct_mean: McEstimate,
    pub composite_mean: McEstimate,
    pub direct_var: (f64, f64),
    pub composite_var: (f64, f64),
    pub z_mean: f64,
    pub z_var: f64,
    /// z-scores of mean and variance after exchanging the two BESQ⁰ pieces.
    pub swap_z_mean: f64,
    pub swap_z_var: f64,
    /// Accepted over tried piece draws.
    pub acceptance: f64,
    /// Conditioned samples dropped after `max_tries`.
    pub dropped: usize,
    /// `e^{aT} E[e^{-H_T - ρ(a) B_T}; B_T ≥ 0]` from direct paths.
    pub weights_direct: McEstimate,
    /// The same quantity from the three-piece construction.
    pub weights_composite: McEstimate,
    pub z_weights: f64,
}

fn var_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (m, _) = mean_se(xs);
    let c2: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let (v, _) = mean_se(&c2);
    let m4 = c2.iter().map(|c| c * c).sum::<f64>() / n;
    (v, ((m4 - v * v).max(0.0) / n).sqrt())
}

fn z_diff(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let d = a - b;
    if d == 0.0 {
        0.0
    } else {
        d / sa.hypot(sb)
    }
}

struct Conditioned {
    pieces: Option<[f64; 3]>,
    tried: usize,
    accepted: usize,
}

/// Draws the three pieces under the windowed conditioning of `e`.
fn conditioned_pieces(e: &EndpointData, t: f64, rk: &RayKnightConfig, rng: &mut ChaCha8Rng) -> Conditioned {
    let mut out = Conditioned {
        pieces: None,
        tried: 0,
        accepted: 0,
    };
    let mut star = |h: f64, target: f64, out: &mut Conditioned| -> Option<f64> {
        for _ in 0..rk.max_tries {
            out.tried += 1;
            let (area, quad) = besq0_run(h, rk.dv, rng);
            if (area - target).abs() <= rk.time_window {
                out.accepted += 1;
                return Some(quad);
            }
        }
        None
    };
    let Some(qa) = star(e.h1, e.t1, &mut out) else {
        return out;
    };
    let Some(qc) = star(e.h2, e.t2, &mut out) else {
        return out;
    };
    let middle_time = t - e.t1 - e.t2;
    for _ in 0..rk.max_tries {
        out.tried += 1;
        let (end, area, quad) = besq2_run(e.h1, e.y, rk.dv, rng);
        if (end - e.h2).abs() <= rk.level_window && (area - middle_time).abs() <= rk.time_window {
            out.accepted += 1;
            out.pieces = Some([qa, quad, qc]);
            return out;
        }
    }
    out
}

/// `x_a'/x_a` from the piecewise-linear eigenfunction, floored so the
/// drift stays finite near `h_max`.
fn log_slope(eigen: &EigenSolution, h: f64) -> f64 {
    let g = &eigen.grid;
    let j = g.partition_point(|&v| v <= h).clamp(1, g.len() - 1);
    let slope = (eigen.xvals[j] - eigen.xvals[j - 1]) / (g[j] - g[j - 1]);
    let x = eigen.eval(h);
    if x > 0.0 {
        (slope / x).max(-LOG_SLOPE_FLOOR)
    } else {
        -LOG_SLOPE_FLOOR
    }
}

const LOG_SLOPE_FLOOR: f64 = 50.0;

/// One draw of `e^{-aT}` times the right side of the weight identity.
///
/// `X_0` comes from the equilibrium `x_a² dh`; a BESQ⁰ piece from `X_0`
/// yields `t1`; the tilted BESQ² diffusion (extra drift `4X x_a'/x_a`) runs
/// in space `y` until its area reaches `T - t1`. The middle piece is
/// integrated over its length `y` with `t2 = T - t1 - A(y)`; `y` is drawn
/// from an even mixture of the uniform law on the path and the image of the
/// first-passage law at the final level, which carries the `t2 → 0`
/// singularity of `w`.
fn weight_composite_draw(
    eigen: &EigenSolution,
    sampler: &EquilibriumSampler,
    t: f64,
    rk: &RayKnightConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let a = eigen.a;
    let x0 = sampler.sample(rng);
    let (t1, qa) = besq0_run(x0, rk.dv, rng);
    if t1 >= t {
        return 0.0;
    }
    let budget = t - t1;
    let dv = rk.tilted_dv;
    let mut xs = vec![x0];
    let mut areas = vec![0.0];
    let (mut x, mut area) = (x0, 0.0);
    while area < budget {
        let z: f64 = rng.sample(StandardNormal);
        let drift = 2.0 + 4.0 * x * log_slope(eigen, x);
        let next = (x + drift * dv + 2.0 * (x * dv).sqrt() * z).abs();
        area += 0.5 * (x + next) * dv;
        x = next;
        xs.push(x);
        areas.push(area);
    }
    let n = xs.len() - 1;
    let (a0, a1) = (areas[n - 1], areas[n]);
    let length = (n as f64 - 1.0 + if a1 > a0 { (budget - a0) / (a1 - a0) } else { 1.0 }) * dv;
    let state = |y: f64| -> (f64, f64) {
        let pos = y / dv;
        let k = (pos.floor() as usize).min(n - 1);
        let f = pos - k as f64;
        (
            xs[k] * (1.0 - f) + xs[k + 1] * f,
            areas[k] * (1.0 - f) + areas[k + 1] * f,
        )
    };
    let end_level = state(length).0;
    let mut sum = 0.0;
    for _ in 0..rk.y_points {
        let y = if rng.random::<bool>() {
            length * rng.random::<f64>()
        } else {
            let z: f64 = rng.sample(StandardNormal);
            let t2 = 0.25 * end_level * end_level / (z * z);
            if !(t2 < budget) {
                continue;
            }
            // y with A(y) = budget - t2.
            let s = budget - t2;
            let k = areas.partition_point(|&v| v < s).clamp(1, n);
            let (a0, a1) = (areas[k - 1], areas[k]);
            let f = if a1 > a0 {
                ((s - a0) / (a1 - a0)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            (k as f64 - 1.0 + f) * dv
        };
        let (xy, ay) = state(y);
        let t2 = budget - ay;
        if !(t2 > 0.0) || xy <= 0.0 {
            continue;
        }
        let density = 0.5 / length + 0.5 * xy * first_passage_density(end_level, t2).unwrap_or(0.0);
        let x_eig = eigen.eval(xy);
        if x_eig <= 0.0 {
            continue;
        }
        sum += (a * t2).exp() * w_bridge_sample(xy, t2, rk.bridge_steps, rng) / x_eig / density;
    }
    (a * (t1 - t) - qa).exp() / eigen.eval(x0) * sum / rk.y_points as f64
}

/// Desk-scale checks of the Ray-Knight description of `H_T`: direct paths
/// against the three-piece BESQ construction under windowed conditioning,
/// the piece-exchange symmetry, and both sides of the weight identity at
/// tilt `a`.
pub fn rayknight_consistency(a: f64, rk: &RayKnightConfig) -> Result<RayKnightReport, PolymerError> {
    let a_dstar = spectral::a_dstar();
    if !(a < a_dstar) {
        return Err(PolymerError::InvalidConfig(format!("a = {a} must be below {a_dstar}")));
    }
    if rk.conditioned_samples >= rk.polymer.n_paths || rk.conditioned_samples < 2 || rk.weight_samples < 2 {
        return Err(PolymerError::InvalidConfig(
            "need 2 ≤ conditioned_samples < n_paths and weight_samples ≥ 2".into(),
        ));
    }
    let direct_cfg = PolymerConfig {
        t: rk.t_conditioned,
        beta: 1.0,
        drift: 0.0,
        ..rk.polymer
    };
    let data = direct_endpoint_data(&direct_cfg)?;
    let (cond, rest) = data.split_at(rk.conditioned_samples);
    let direct_h: Vec<f64> = rest.iter().map(|e| e.h).collect();
    let draws = map_paths(cond.len(), rk.polymer.seed.wrapping_add(1), |i, rng| {
        conditioned_pieces(&cond[i], rk.t_conditioned, rk, rng)
    });
    let tried: usize = draws.iter().map(|d| d.tried).sum();
    let accepted: usize = draws.iter().map(|d| d.accepted).sum();
    let pieces: Vec<[f64; 3]> = draws.iter().filter_map(|d| d.pieces).collect();
    if (accepted as f64) < 1e-4 * tried as f64 || pieces.len() < 2 {
        return Err(PolymerError::ConditioningTooTight { accepted, tried });
    }
    let dropped = draws.len() - pieces.len();
    let composite: Vec<f64> = pieces.iter().map(|p| p[0] + p[1] + p[2]).collect();
    let swapped: Vec<f64> = pieces.iter().map(|p| p[2] + p[1] + p[0]).collect();
    let seed = rk.polymer.seed;
    let direct_mean = McEstimate::from_samples(&direct_h, seed);
    let composite_mean = McEstimate::from_samples(&composite, seed);
    let swapped_mean = McEstimate::from_samples(&swapped, seed);
    let direct_var = var_se(&direct_h);
    let composite_var = var_se(&composite);
    let swapped_var = var_se(&swapped);

    let eigen = sturm::principal_eigen(a, &SolverConfig::default())?;
    let sampler = EquilibriumSampler::new(&eigen);
    let rho = eigen.rho;
    let t = rk.t_weights;
    let lhs_cfg = PolymerConfig {
        t,
        drift: rk.weight_drift,
        ..direct_cfg
    };
    let lhs: Vec<f64> = simulate_paths(&lhs_cfg)?
        .iter()
        .map(|p| {
            if p.end >= 0.0 {
                (-p.h - rho * p.end + p.log_lr).exp()
            } else {
                0.0
            }
        })
        .collect();
    let rhs: Vec<f64> = map_paths(rk.weight_samples, seed.wrapping_add(2), |_, rng| {
        weight_composite_draw(&eigen, &sampler, t, rk, rng)
    });
    let scale = (a * t).exp();
    let scaled = |e: McEstimate| McEstimate {
        mean: e.mean * scale,
        se: e.se * scale,
        ..e
    };
    let weights_direct = scaled(McEstimate::from_samples(&lhs, seed));
    let weights_composite = scaled(McEstimate::from_samples(&rhs, seed.wrapping_add(2)));
    Ok(RayKnightReport {
        z_mean: composite_mean.z_against(&direct_mean),
        z_var: z_diff(composite_var.0, composite_var.1, direct_var.0, direct_var.1),
        swap_z_mean: z_diff(
            swapped_mean.mean,
            swapped_mean.se,
            composite_mean.mean,
            composite_mean.se,
        ),
        swap_z_var: z_diff(swapped_var.0, swapped_var.1, composite_var.0, composite_var.1),
        direct_mean,
        composite_mean,
        direct_var,
        composite_var,
        acceptance: accepted as f64 / tried as f64,
        dropped,
        z_weights: weights_composite.z_against(&weights_direct),
        weights_direct,
        weights_composite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::path_rng;

    fn small(t: f64, n: usize) -> PolymerConfig {
        PolymerConfig {
            t,
            n_paths: n,
            ..PolymerConfig::default()
        }
    }

    #[test]
    fn config_invariants() {
        assert!(small(4.0, 100).validate().is_ok());
        let coarse = PolymerConfig {
            dt: 0.01,
            bin: 0.05,
            ..small(4.0, 100)
        };
        assert!(matches!(coarse.validate(), Err(PolymerError::InvalidConfig(_))));
        let ragged = PolymerConfig {
            t: 1.001,
            ..small(4.0, 100)
        };
        assert!(ragged.validate().is_err());
        assert!(PolymerConfig {
            beta: -1.0,
            ..small(4.0, 100)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn occupation_adds_up_to_t() {
        let cfg = small(3.0, 1);
        let (occ, end, _) = simulate_path(&cfg, &mut path_rng(4, 0));
        assert!((occ.total() - 3.0).abs() < 1e-12);
        assert_eq!(occ.counts.iter().map(|&c| c as usize).sum::<usize>(), cfg.steps());
        let beyond = occ.occupation_beyond(end, true) + occ.occupation_beyond(end, false);
        assert!((beyond - 3.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_grows_both_ways() {
        let mut occ = LocalTimeHistogram::with_capacity(0.1, 1.0, 1);
        for k in [-7, 0, 12, 12] {
            occ.add(k);
        }
        assert_eq!(occ.occupation(12), 0.2);
        assert_eq!(occ.occupation(-7), 0.1);
        assert_eq!(occ.occupation(3), 0.0);
        assert!((occ.intersection() - (0.01 + 0.01 + 0.04)).abs() < 1e-15);
    }

    #[test]
    fn free_paths_have_zero_log_z() {
        let cfg = PolymerConfig {
            beta: 0.0,
            ..small(2.0, 4_000)
        };
        let w = WeightedPaths::new(&cfg).unwrap();
        let (log_z, se) = w.log_z();
        assert_eq!(log_z, 0.0);
        assert_eq!(se, 0.0);
        let end = w.expect(|x| x);
        assert!(end.z(0.0).abs() < 3.0);
    }

    #[test]
    fn weights_are_bounded_by_one() {
        let w = WeightedPaths::new(&small(2.0, 2_000)).unwrap();
        assert!(w.log_weights.iter().all(|l| *l <= 0.0 && l.is_finite()));
        assert!(w.log_z().0 <= 0.0);
    }

    #[test]
    fn endpoint_law_is_symmetric() {
        let w = WeightedPaths::new(&small(4.0, 20_000)).unwrap();
        let (skew, se) = w.skewness();
        assert!(skew.abs() < 3.0 * se, "skewness {skew} ± {se}");
    }

    #[test]
    fn refinement_moves_mean_h_by_under_two_percent() {
        let coarse = small(2.0, 20_000);
        let fine = PolymerConfig {
            dt: coarse.dt / 4.0,
            bin: coarse.bin / 2.0,
            ..coarse
        };
        let mean_h = |c: &PolymerConfig| {
            let p = simulate_paths(c).unwrap();
            p.iter().map(|p| p.h).sum::<f64>() / p.len() as f64
        };
        let (hc, hf) = (mean_h(&coarse), mean_h(&fine));
        assert!(((hf - hc) / hf).abs() < 0.02, "{hc} vs {hf}");
    }

    #[test]
    fn drift_proposal_is_unbiased() {
        let plain = sample_polymer(&small(4.0, 20_000)).unwrap();
        let tilted = sample_polymer(&PolymerConfig {
            drift: 1.1,
            seed: 2,
            ..small(4.0, 20_000)
        })
        .unwrap();
        let z = (plain.log_z - tilted.log_z) / plain.log_z_se.hypot(tilted.log_z_se);
        assert!(z.abs() < 3.0, "z = {z}");
        assert!(tilted.ess > 0.0);
    }

    #[test]
    fn degenerate_weights_are_reported() {
        let cfg = PolymerConfig {
            beta: 200.0,
            ..small(4.0, 5_000)
        };
        assert!(matches!(sample_polymer(&cfg), Err(PolymerError::Degenerate { .. })));
    }

    #[test]
    fn mgf_slope_sits_in_the_convex_range() {
        let w = WeightedPaths::new(&PolymerConfig {
            drift: 1.5,
            ..small(6.0, 20_000)
        })
        .unwrap();
        let (m0, m05, m1) = (w.mgf(0.0).unwrap(), w.mgf(0.5).unwrap(), w.mgf(1.0).unwrap());
        assert!(m1.mean - m0.mean > 2.0 * m1.se.hypot(m0.se));
        let slope = (m1.mean - m05.mean) / 0.5;
        assert!(slope > 0.85 && slope < 2.0, "slope {slope}");
    }

    #[test]
    fn self_collapse_is_exact() {
        let report = scaling_collapse(&[1.0], &small(2.0, 2_000)).unwrap();
        assert_eq!(report.max_abs_z(), 0.0);
        assert!(scaling_collapse(&[0.0], &small(2.0, 10)).is_err());
    }

    #[test]
    fn bridge_estimator_matches_the_series() {
        let exp = spectral::w_coefficients(spectral::DEFAULT_TERMS).unwrap();
        for (h, t) in [(1.0, 0.5), (2.0, 1.0)] {
            let v = map_paths(20_000, 3, |_, r| w_bridge_sample(h, t, 64, r));
            let e = McEstimate::from_samples(&v, 3);
            let exact = spectral::w_eval(h, t, &exp).unwrap().value;
            assert!(e.z(exact).abs() < 4.0, "w({h}, {t}) = {} ± {} vs {exact}", e.mean, e.se);
        }
    }

    #[test]
    fn inverse_t_extrapolation_recovers_a_line() {
        let ts = [4.0, 6.0, 8.0];
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 - 1.5 / t).collect();
        let (c, k) = extrapolate_inverse_t(&ts, &ys);
        assert!((c - 2.0).abs() < 1e-12 && (k + 1.5).abs() < 1e-12);
    }
}
