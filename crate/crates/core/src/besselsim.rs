//! Monte Carlo for squared Bessel processes of dimension 0 and 2, their
//! additive functionals, and the Girsanov-tilted BESQ² diffusion.
//!
//! The estimators here are oracles for the analytic side: `y_a`, `w`, the
//! absorption law `P*_h(X*_δ = 0) = e^{-h/2δ}`, and the martingale and
//! equilibrium properties of the tilt `D^{(a)}`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

use crate::mc::{map_paths, McEstimate};
use crate::numerics::stats::{effective_sample_size, pairwise_sum};
use crate::spectral;
use crate::sturm::EigenSolution;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("non-finite state on path {path} at step {step}")]
    NonFinite { path: usize, step: usize },
    #[error("{unresolved} of {n} paths were neither absorbed nor negligible by t_cap = {t_cap}")]
    Horizon { unresolved: usize, n: usize, t_cap: f64 },
    #[error("effective sample size {ess:.1} is below 1% of {n} paths")]
    Degenerate { ess: f64, n: usize },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Sturm(#[from] crate::sturm::SturmError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Full-truncation Euler–Maruyama, `√(X⁺)` in the noise.
    EulerAbs,
    /// Exact noncentral chi-square transitions on the time grid.
    ExactBesq0,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::EulerAbs => "euler_abs",
            Scheme::ExactBesq0 => "exact_besq0",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler_abs" => Ok(Scheme::EulerAbs),
            "exact_besq0" => Ok(Scheme::ExactBesq0),
            other => Err(SimError::InvalidConfig(format!(
                "unknown scheme `{other}` (expected euler_abs or exact_besq0)"
            ))),
        }
    }
}

/// Dimension of the squared Bessel process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Zero,
    Two,
}

impl Dim {
    fn delta(self) -> f64 {
        match self {
            Dim::Zero => 0.0,
            Dim::Two => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_paths: 100_000,
            seed: 1,
            scheme: Scheme::EulerAbs,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(SimError::InvalidConfig("n_paths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFunctionalSample {
    pub terminal: f64,
    /// `∫_0^t X_v dv`.
    pub additive: f64,
    /// `∫_0^t X_v² dv`.
    pub quad: f64,
    pub absorbed_at: Option<f64>,
}

/// Per-step hard cap for runs to absorption.
pub const MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy)]
struct Stepper {
    delta: f64,
    dt: f64,
    sqdt: f64,
    scheme: Scheme,
}

impl Stepper {
    fn new(dim: Dim, dt: f64, scheme: Scheme) -> Self {
        Self {
            delta: dim.delta(),
            dt,
            sqdt: dt.sqrt(),
            scheme,
        }
    }

    fn step(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self.scheme {
            Scheme::EulerAbs => {
                let z: f64 = rng.sample(StandardNormal);
                x + 2.0 * x.max(0.0).sqrt() * self.sqdt * z + self.delta * self.dt
            }
            Scheme::ExactBesq0 => {
                // X_t = Gamma(N + δ/2, scale 2t) with N ~ Poisson(x / 2t).
                let lambda = x / (2.0 * self.dt);
                let n = if lambda > 0.0 {
                    Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(f64::NAN)
                } else {
                    0.0
                };
                let shape = n + 0.5 * self.delta;
                if shape == 0.0 {
                    0.0
                } else {
                    Gamma::new(shape, 2.0 * self.dt)
                        .map(|g| g.sample(rng))
                        .unwrap_or(f64::NAN)
                }
            }
        }
    }

    /// Fraction of the step before absorption when `x > 0 ≥ next`.
    fn crossing(&self, x: f64, next: f64) -> f64 {
        match self.scheme {
            Scheme::EulerAbs => x / (x - next),
            Scheme::ExactBesq0 => 1.0,
        }
    }
}

/// One exact transition of BESQ^0 or BESQ^2 over `dt`.
pub fn exact_step(dim: Dim, x: f64, dt: f64, rng: &mut ChaCha8Rng) -> f64 {
    Stepper::new(dim, dt, Scheme::ExactBesq0).step(x, rng)
}

fn steps_for(t: f64, dt: f64) -> Result<usize, SimError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SimError::Domain(format!(
            "time must be finite and non-negative, got {t}"
        )));
    }
    Ok((t / dt).round() as usize)
}

/// Independent paths of BESQ^0 or BESQ^2 from `h0` up to `t_end`.
pub fn simulate_besq(dim: Dim, h0: f64, t_end: f64, cfg: &SimConfig) -> Result<Vec<PathFunctionalSample>, SimError> {
    cfg.validate()?;
    if !(h0 >= 0.0 && h0.is_finite()) {
        return Err(SimError::Domain(format!("h0 must be non-negative, got {h0}")));
    }
    let steps = steps_for(t_end, cfg.dt)?.max(1);
    let dt = t_end / steps as f64;
    let stepper = Stepper::new(dim, dt, cfg.scheme);
    map_paths(cfg.n_paths, cfg.seed, |path, rng| {
        let mut s = PathFunctionalSample {
            terminal: h0,
            additive: 0.0,
            quad: 0.0,
            absorbed_at: None,
        };
        if dim == Dim::Zero && h0 == 0.0 {
            s.absorbed_at = Some(0.0);
            return Ok(s);
        }
        let mut x = h0;
        for step in 0..steps {
            let next = stepper.step(x, rng);
            if !next.is_finite() {
                return Err(SimError::NonFinite { path, step });
            }
            if dim == Dim::Zero && next <= 0.0 {
                let theta = stepper.crossing(x, next);
                s.additive += 0.5 * x * theta * dt;
                s.quad += 0.5 * x * x * theta * dt;
                s.absorbed_at = Some((step as f64 + theta) * dt);
                x = 0.0;
                break;
            }
            let next = next.max(0.0);
            s.additive += 0.5 * (x + next) * dt;
            s.quad += 0.5 * (x * x + next * next) * dt;
            x = next;
        }
        s.terminal = x;
        Ok(s)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Absorbed,
    /// The weight can no longer exceed e^{-50}.
    Negligible,
    Unresolved,
}

#[derive(Debug, Clone, Copy)]
struct Absorption {
    additive: f64,
    log_weight: f64,
    fate: Fate,
}

/// BESQ^0 from `h0` until absorption, accumulating `∫(aX - X²)`.
fn run_to_absorption(
    a: f64,
    h0: f64,
    stepper: &Stepper,
    rng: &mut ChaCha8Rng,
    path: usize,
) -> Result<Absorption, SimError> {
    let dt = stepper.dt;
    let t_cap = MAX_STEPS as f64 * dt;
    let gain = 0.25 * a.max(0.0).powi(2);
    let mut out = Absorption {
        additive: 0.0,
        log_weight: 0.0,
        fate: Fate::Unresolved,
    };
    let mut x = h0;
    if x == 0.0 {
        out.fate = Fate::Absorbed;
        return Ok(out);
    }
    for step in 0..MAX_STEPS {
        let next = stepper.step(x, rng);
        if !next.is_finite() {
            return Err(SimError::NonFinite { path, step });
        }
        let (theta, next) = if next <= 0.0 {
            (stepper.crossing(x, next), 0.0)
        } else {
            (1.0, next)
        };
        let h = theta * dt;
        let area = 0.5 * (x + next) * h;
        out.additive += area;
        out.log_weight += a * area - 0.5 * (x * x + next * next) * h;
        if next == 0.0 {
            out.fate = Fate::Absorbed;
            return Ok(out);
        }
        x = next;
        // aX - X² ≤ a²/4, so the weight cannot recover past this point.
        let t = (step + 1) as f64 * dt;
        if out.log_weight + gain * (t_cap - t) < -50.0 {
            out.fate = Fate::Negligible;
            return Ok(out);
        }
    }
    Ok(out)
}

fn absorption_runs(a: f64, h0: f64, cfg: &SimConfig) -> Result<Vec<Absorption>, SimError> {
    cfg.validate()?;
    if !(h0 >= 0.0 && h0.is_finite()) {
        return Err(SimError::Domain(format!("h0 must be non-negative, got {h0}")));
    }
    let stepper = Stepper::new(Dim::Zero, cfg.dt, cfg.scheme);
    let runs: Vec<Absorption> = map_paths(cfg.n_paths, cfg.seed, |path, rng| {
        run_to_absorption(a, h0, &stepper, rng, path)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let unresolved = runs.iter().filter(|r| r.fate == Fate::Unresolved).count();
    if unresolved * 100 > cfg.n_paths {
        return Err(SimError::Horizon {
            unresolved,
            n: cfg.n_paths,
            t_cap: MAX_STEPS as f64 * cfg.dt,
        });
    }
    Ok(runs)
}

fn weight(r: &Absorption) -> f64 {
    match r.fate {
        Fate::Negligible => 0.0,
        _ => r.log_weight.exp(),
    }
}

/// `y_a(h0) = E*_{h0} exp ∫(aX* - X*²)` by running BESQ^0 to absorption.
/// Close to `a**` the weights become heavy-tailed and the standard error
/// is unreliable.
pub fn estimate_y(a: f64, h0: f64, cfg: &SimConfig) -> Result<McEstimate, SimError> {
    let a_dstar = spectral::a_dstar();
    if !(a < a_dstar) {
        return Err(SimError::Domain(format!(
            "y_a is infinite for a >= a** = {a_dstar}, got {a}"
        )));
    }
    if h0 == 0.0 {
        cfg.validate()?;
        return Ok(McEstimate {
            mean: 1.0,
            se: 0.0,
            n: cfg.n_paths as f64,
            seed: cfg.seed,
        });
    }
    let runs = absorption_runs(a, h0, cfg)?;
    let w: Vec<f64> = runs.iter().map(weight).collect();
    Ok(McEstimate::from_samples(&w, cfg.seed))
}

/// Binned Monte Carlo density of `w(h0, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WHistogram {
    pub edges: Vec<f64>,
    /// Average of `w(h0, t)` over each bin.
    pub density: Vec<McEstimate>,
    /// Weighted mass with `A*(∞) = 0` (only for `h0 = 0`).
    pub atom: f64,
    /// Total weighted mass `∫ w dt + atom`, an estimate of `y_0(h0)`.
    pub total: McEstimate,
}

pub fn estimate_w(h0: f64, edges: &[f64], cfg: &SimConfig) -> Result<WHistogram, SimError> {
    if edges.len() < 2 || edges.windows(2).any(|e| !(e[1] > e[0])) || edges[0] < 0.0 {
        return Err(SimError::Domain("bin edges must be non-negative and increasing".into()));
    }
    let runs = absorption_runs(0.0, h0, cfg)?;
    let w: Vec<f64> = runs.iter().map(weight).collect();
    let area: Vec<f64> = runs.iter().map(|r| r.additive).collect();
    let density = edges
        .windows(2)
        .map(|e| {
            let width = e[1] - e[0];
            let v: Vec<f64> = w
                .iter()
                .zip(&area)
                .map(|(w, t)| {
                    if *t > 0.0 && e[0] <= *t && *t < e[1] {
                        w / width
                    } else {
                        0.0
                    }
                })
                .collect();
            McEstimate::from_samples(&v, cfg.seed)
        })
        .collect();
    let atom_samples: Vec<f64> = w
        .iter()
        .zip(&area)
        .map(|(w, t)| if *t == 0.0 { *w } else { 0.0 })
        .collect();
    Ok(WHistogram {
        edges: edges.to_vec(),
        density,
        atom: pairwise_sum(&atom_samples) / cfg.n_paths as f64,
        total: McEstimate::from_samples(&w, cfg.seed),
    })
}

/// Density of the first hitting time of 0 for Brownian motion from `h/2`:
/// `φ_h(t) = (8π)^{-1/2} t^{-3/2} h e^{-h²/8t}`.
pub fn first_passage_density(h: f64, t: f64) -> Result<f64, SimError> {
    if !(h > 0.0 && t > 0.0 && h.is_finite() && t.is_finite()) {
        return Err(SimError::Domain(format!(
            "first passage density needs h, t > 0, got ({h}, {t})"
        )));
    }
    Ok((8.0 * std::f64::consts::PI).powf(-0.5) * t.powf(-1.5) * h * (-h * h / (8.0 * t)).exp())
}

/// Fraction of Brownian paths from `x0` whose first hit of 0 falls in
/// `[lo, hi)`. Crossings between grid points are caught with the bridge
/// probability `exp(-2 x_i x_{i+1} / dt)`.
pub fn first_passage_mc(x0: f64, lo: f64, hi: f64, cfg: &SimConfig) -> Result<McEstimate, SimError> {
    cfg.validate()?;
    if !(x0 > 0.0 && 0.0 <= lo && lo < hi && hi.is_finite()) {
        return Err(SimError::Domain(format!(
            "first passage bin [{lo}, {hi}) from {x0} is invalid"
        )));
    }
    let steps = steps_for(hi, cfg.dt)?.max(1);
    let dt = hi / steps as f64;
    let sqdt = dt.sqrt();
    let hits: Vec<f64> = map_paths(cfg.n_paths, cfg.seed, |_, rng| {
        let mut x = x0;
        for step in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            let next = x + sqdt * z;
            let crossed = next <= 0.0 || rng.random::<f64>() < (-2.0 * x * next / dt).exp();
            if crossed {
                let mid = (step as f64 + 0.5) * dt;
                return if mid >= lo { 1.0 } else { 0.0 };
            }
            x = next;
        }
        0.0
    });
    Ok(McEstimate::from_samples(&hits, cfg.seed))
}

/// Inverse-CDF sampler for the density `x_a(h)² dh` on the eigen grid.
#[derive(Debug, Clone)]
pub struct EquilibriumSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl EquilibriumSampler {
    pub fn new(eigen: &EigenSolution) -> Self {
        let g = &eigen.grid;
        let mut cdf = vec![0.0; g.len()];
        for i in 1..g.len() {
            let (a, b) = (eigen.xvals[i - 1], eigen.xvals[i]);
            cdf[i] = cdf[i - 1] + 0.5 * (a * a + b * b) * (g[i] - g[i - 1]);
        }
        let total = cdf[g.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { grid: g.clone(), cdf }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, self.grid.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let s = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid[j - 1] + s * (self.grid[j] - self.grid[j - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    At(f64),
    /// `X_0 ~ x_a(h)² dh`.
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedPath {
    pub x0: f64,
    /// `X` at each observation time.
    pub states: Vec<f64>,
    /// `log D^{(a)}` at each observation time.
    pub log_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedRun {
    pub times: Vec<f64>,
    pub paths: Vec<TiltedPath>,
    pub seed: u64,
}

impl TiltedRun {
    pub fn weights(&self, j: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.log_weights[j].exp()).collect()
    }

    pub fn ess(&self, j: usize) -> f64 {
        effective_sample_size(&self.weights(j))
    }

    /// Plain mean of `D_{t_j}`, equal to 1 for a martingale.
    pub fn martingale_mean(&self, j: usize) -> McEstimate {
        McEstimate::from_samples(&self.weights(j), self.seed)
    }

    /// Tilted expectation of `f(X_{t_j})`, self-normalized.
    pub fn expect<F: Fn(f64) -> f64>(&self, j: usize, f: F) -> McEstimate {
        let v: Vec<f64> = self.paths.iter().map(|p| f(p.states[j])).collect();
        McEstimate::weighted(&self.weights(j), &v, self.seed)
    }

    /// Tilted correlation of `f(X_0)` and `g(X_{t_j})`.
    pub fn correlation<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(&self, j: usize, f: F, g: G) -> f64 {
        let w = self.weights(j);
        let total = pairwise_sum(&w);
        let fx: Vec<f64> = self.paths.iter().map(|p| f(p.x0)).collect();
        let gx: Vec<f64> = self.paths.iter().map(|p| g(p.states[j])).collect();
        let mean = |v: &[f64]| {
            let s: Vec<f64> = w.iter().zip(v).map(|(w, x)| w * x).collect();
            pairwise_sum(&s) / total
        };
        let (mf, mg) = (mean(&fx), mean(&gx));
        let cf: Vec<f64> = fx.iter().map(|x| x - mf).collect();
        let cg: Vec<f64> = gx.iter().map(|x| x - mg).collect();
        let cov = mean(&cf.iter().zip(&cg).map(|(a, b)| a * b).collect::<Vec<_>>());
        let vf = mean(&cf.iter().map(|a| a * a).collect::<Vec<_>>());
        let vg = mean(&cg.iter().map(|a| a * a).collect::<Vec<_>>());
        cov / (vf * vg).sqrt()
    }
}

/// BESQ² paths carrying the Girsanov weight
/// `D_y = x_a(X_y)/x_a(X_0) exp(-∫[X² - aX + ρ(a)])`, accumulated in log
/// form and recorded at `times`.
pub fn simulate_tilted(
    eigen: &EigenSolution,
    start: Start,
    times: &[f64],
    cfg: &SimConfig,
) -> Result<TiltedRun, SimError> {
    cfg.validate()?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(SimError::Domain(
            "observation times must be non-negative and increasing".into(),
        ));
    }
    if let Start::At(h) = start {
        if !(h >= 0.0 && h < eigen.h_max) {
            return Err(SimError::Domain(format!("start {h} outside [0, {})", eigen.h_max)));
        }
    }
    let marks: Vec<usize> = times.iter().map(|&t| steps_for(t, cfg.dt)).collect::<Result<_, _>>()?;
    let last = *marks.last().unwrap_or(&0);
    let stepper = Stepper::new(Dim::Two, cfg.dt, cfg.scheme);
    let sampler = EquilibriumSampler::new(eigen);
    let (a, rho, dt) = (eigen.a, eigen.rho, cfg.dt);
    let paths: Vec<TiltedPath> = map_paths(cfg.n_paths, cfg.seed, |path, rng| {
        let x0 = match start {
            Start::At(h) => h,
            Start::Equilibrium => sampler.sample(rng),
        };
        let log_x0 = eigen.eval(x0).ln();
        let mut out = TiltedPath {
            x0,
            states: Vec::with_capacity(marks.len()),
            log_weights: Vec::with_capacity(marks.len()),
        };
        let (mut x, mut integral) = (x0, 0.0);
        let mut next_mark = 0;
        for step in 0..=last {
            while next_mark < marks.len() && marks[next_mark] == step {
                out.states.push(x);
                out.log_weights.push(eigen.eval(x).ln() - log_x0 - integral);
                next_mark += 1;
            }
            if step == last {
                break;
            }
            let next = stepper.step(x, rng);
            if !next.is_finite() {
                return Err(SimError::NonFinite { path, step });
            }
            let next = next.max(0.0);
            let v = |h: f64| h * h - a * h + rho;
            integral += 0.5 * (v(x) + v(next)) * dt;
            x = next;
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let run = TiltedRun {
        times: times.to_vec(),
        paths,
        seed: cfg.seed,
    };
    let ess = run.ess(times.len() - 1);
    if ess < 0.01 * cfg.n_paths as f64 {
        return Err(SimError::Degenerate { ess, n: cfg.n_paths });
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Absorption,
    Y,
    W,
    Tilted,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Absorption, Suite::Y, Suite::W, Suite::Tilted];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Absorption => "absorption",
            Suite::Y => "y",
            Suite::W => "w",
            Suite::Tilted => "tilted",
        }
    }
}

impl FromStr for Suite {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| SimError::Domain(format!("unknown suite `{s}` (absorption, y, w, tilted)")))
    }
}

/// One row of an oracle suite.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub check: String,
    pub estimate: f64,
    pub target: f64,
    pub se: f64,
    pub z: f64,
}

impl OracleCheck {
    fn new(check: impl Into<String>, est: &McEstimate, target: f64) -> Self {
        Self {
            check: check.into(),
            estimate: est.mean,
            target,
            se: est.se,
            z: est.z(target),
        }
    }
}

/// Runs a suite of Monte Carlo estimates against their closed forms.
///
/// The absorption check always uses exact transitions over the whole
/// window, since the law it tests is a property of the exact kernel; the
/// other checks use `cfg` as given.
pub fn oracle_suite(suite: Suite, cfg: &SimConfig) -> Result<Vec<OracleCheck>, SimError> {
    cfg.validate()?;
    let mut out = Vec::new();
    match suite {
        Suite::Absorption => {
            for (h, window) in [(1.0, 0.5), (0.5, 1.0)] {
                let c = SimConfig {
                    dt: window,
                    scheme: Scheme::ExactBesq0,
                    ..*cfg
                };
                let paths = simulate_besq(Dim::Zero, h, window, &c)?;
                let hit: Vec<f64> = paths.iter().map(|p| f64::from(p.terminal == 0.0)).collect();
                let est = McEstimate::from_samples(&hit, cfg.seed);
                out.push(OracleCheck::new(
                    format!("absorbed_h{h}_t{window}"),
                    &est,
                    (-h / (2.0 * window)).exp(),
                ));
            }
        }
        Suite::Y => {
            for (a, h) in [(0.0, 1.0), (2.0, 0.5)] {
                let est = estimate_y(a, h, cfg)?;
                out.push(OracleCheck::new(
                    format!("y_a{a}_h{h}"),
                    &est,
                    spectral::y_kernel(a, h)?,
                ));
            }
        }
        Suite::W => {
            let exp = spectral::w_coefficients(spectral::DEFAULT_TERMS)?;
            let edges = [0.2, 0.3, 1.0, 1.5];
            let hist = estimate_w(1.0, &edges, cfg)?;
            let quad = crate::numerics::QuadConfig::default();
            for (i, pair) in edges.windows(2).enumerate().step_by(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let (mass, _) = crate::numerics::integrate(
                    |t| spectral::w_eval(1.0, t, &exp).map(|w| w.value).unwrap_or(f64::NAN),
                    lo,
                    hi,
                    &quad,
                )
                .map_err(|e| SimError::Domain(e.to_string()))?;
                out.push(OracleCheck::new(
                    format!("w_h1_t{lo}-{hi}"),
                    &hist.density[i],
                    mass / (hi - lo),
                ));
            }
        }
        Suite::Tilted => {
            let eigen = crate::sturm::principal_eigen(2.0, &crate::sturm::SolverConfig::default())?;
            let run = simulate_tilted(&eigen, Start::At(1.0), &[0.5, 1.0], cfg)?;
            for (j, t) in [0.5, 1.0].into_iter().enumerate() {
                out.push(OracleCheck::new(
                    format!("martingale_a2_t{t}"),
                    &run.martingale_mean(j),
                    1.0,
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadConfig};
    use crate::sturm::{principal_eigen, SolverConfig};

    fn cfg(n: usize, dt: f64, scheme: Scheme) -> SimConfig {
        SimConfig {
            dt,
            n_paths: n,
            seed: 11,
            scheme,
        }
    }

    #[test]
    fn besq2_drift() {
        let c = cfg(100_000, 1e-2, Scheme::EulerAbs);
        let paths = simulate_besq(Dim::Two, 1.0, 2.0, &c).unwrap();
        let term: Vec<f64> = paths.iter().map(|p| p.terminal).collect();
        let est = McEstimate::from_samples(&term, c.seed);
        assert!(est.z(5.0).abs() <= 3.0, "{est:?}");
        assert!(paths.iter().all(|p| p.absorbed_at.is_none()));
    }

    #[test]
    fn besq0_absorption_law() {
        let c = cfg(100_000, 0.5, Scheme::ExactBesq0);
        let paths = simulate_besq(Dim::Zero, 1.0, 0.5, &c).unwrap();
        let hit: Vec<f64> = paths.iter().map(|p| f64::from(p.terminal == 0.0)).collect();
        let est = McEstimate::from_samples(&hit, c.seed);
        assert!(est.z((-1f64).exp()).abs() <= 3.0, "{est:?}");
    }

    #[test]
    fn absorbing_start() {
        let paths = simulate_besq(Dim::Zero, 0.0, 1.0, &cfg(10, 1e-2, Scheme::EulerAbs)).unwrap();
        for p in paths {
            assert_eq!((p.terminal, p.additive, p.quad), (0.0, 0.0, 0.0));
            assert_eq!(p.absorbed_at, Some(0.0));
        }
    }

    #[test]
    fn functionals_are_monotone_and_zero_after_absorption() {
        let c = cfg(200, 1e-3, Scheme::EulerAbs);
        let short = simulate_besq(Dim::Zero, 0.5, 0.5, &c).unwrap();
        let long = simulate_besq(Dim::Zero, 0.5, 1.0, &c).unwrap();
        for (s, l) in short.iter().zip(&long) {
            assert!(0.0 <= s.additive && s.additive <= l.additive);
            assert!(0.0 <= s.quad && s.quad <= l.quad);
            if let Some(t) = s.absorbed_at {
                assert_eq!(l.absorbed_at, Some(t));
                assert_eq!(l.terminal, 0.0);
                assert_eq!(s.additive, l.additive);
            }
        }
    }

    #[test]
    fn besq2_stays_positive() {
        let paths = simulate_besq(Dim::Two, 0.3, 5.0, &cfg(500, 1e-3, Scheme::EulerAbs)).unwrap();
        assert!(paths.iter().all(|p| p.absorbed_at.is_none() && p.terminal >= 0.0));
    }

    #[test]
    fn y_matches_airy_form() {
        let c = cfg(100_000, 1e-3, Scheme::EulerAbs);
        assert_eq!(estimate_y(0.7, 0.0, &c).unwrap().se, 0.0);
        for (a, h) in [(0.0, 1.0), (2.0, 0.5)] {
            let est = estimate_y(a, h, &c).unwrap();
            let exact = spectral::y_kernel(a, h).unwrap();
            assert!(est.z(exact).abs() <= 3.0, "a = {a}, h = {h}: {est:?} vs {exact}");
        }
        assert!(estimate_y(3.0, 1.0, &c).is_err());
    }

    #[test]
    fn w_histogram_mass() {
        let c = cfg(50_000, 1e-3, Scheme::EulerAbs);
        let edges: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let hist = estimate_w(1.0, &edges, &c).unwrap();
        let binned: f64 = hist.density.iter().map(|d| d.mean * 0.25).sum();
        assert!(binned <= 1.0);
        let y0 = spectral::y_kernel(0.0, 1.0).unwrap();
        assert!(hist.total.z(y0).abs() <= 3.0);
        assert!((binned - hist.total.mean).abs() < 1e-3);
        let zero = estimate_w(0.0, &edges, &cfg(100, 1e-3, Scheme::EulerAbs)).unwrap();
        assert_eq!(zero.atom, 1.0);
        assert!(zero.density.iter().all(|d| d.mean == 0.0));
    }

    #[test]
    fn first_passage_closed_form() {
        let quad = QuadConfig::default();
        let f = |t: f64| first_passage_density(1.0, t).unwrap();
        let mut total = 0.0;
        let edges = [0.0, 0.05, 0.5, 5.0, 50.0, 500.0, 5e3, 5e4, 5e5, 5e6, 5e7];
        for w in edges.windows(2) {
            total += integrate(|t| if t == 0.0 { 0.0 } else { f(t) }, w[0], w[1], &quad)
                .unwrap()
                .0;
        }
        // The tail beyond 5e7 is ∫ φ ≈ h / sqrt(2π t_end).
        total += 1.0 / (2.0 * std::f64::consts::PI * 5e7).sqrt();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let (mode, _) = crate::numerics::golden_max(|t| Ok::<_, SimError>(f(t)), 0.01, 1.0, 1e-10).unwrap();
        assert!((mode - 1.0 / 12.0).abs() < 1e-6);
        assert!(first_passage_density(0.0, 1.0).is_err());
    }

    #[test]
    fn first_passage_mc_matches_density() {
        let c = cfg(100_000, 1e-3, Scheme::EulerAbs);
        let est = first_passage_mc(0.5, 0.2, 0.3, &c).unwrap();
        let target = integrate(
            |t| first_passage_density(1.0, t).unwrap(),
            0.2,
            0.3,
            &QuadConfig::default(),
        )
        .unwrap()
        .0;
        assert!(est.z(target).abs() <= 3.0, "{est:?} vs {target}");
    }

    #[test]
    fn tilted_martingale_and_equilibrium() {
        let eigen = principal_eigen(2.0, &SolverConfig::default()).unwrap();
        let c = cfg(100_000, 2e-3, Scheme::EulerAbs);
        let run = simulate_tilted(&eigen, Start::At(1.0), &[1.0], &c).unwrap();
        let m = run.martingale_mean(0);
        assert!(m.z(1.0).abs() <= 3.0, "{m:?}");

        let run = simulate_tilted(&eigen, Start::Equilibrium, &[1.0], &c).unwrap();
        let mean = run.expect(0, |x| x);
        let w = eigen.weights();
        let target: f64 = eigen
            .grid
            .iter()
            .zip(&eigen.xvals)
            .zip(&w)
            .map(|((h, x), w)| h * x * x * w)
            .sum();
        assert!(mean.z(target).abs() <= 3.0, "{mean:?} vs {target}");
    }

    #[test]
    fn euler_bias_is_first_order() {
        let exact = spectral::y_kernel(0.0, 1.0).unwrap();
        let bias = |dt: f64| {
            let c = cfg(400_000, dt, Scheme::EulerAbs);
            estimate_y(0.0, 1.0, &c).unwrap().mean - exact
        };
        let (coarse, fine) = (bias(0.04), bias(0.02));
        let ratio = fine / coarse;
        assert!((0.25..=0.75).contains(&ratio), "{coarse} -> {fine}");
    }

    #[test]
    fn y_agrees_with_integrated_w() {
        let edges = [0.0, 1.0, 2.0, 4.0, 8.0];
        let hist = estimate_w(1.0, &edges, &cfg(50_000, 1e-3, Scheme::EulerAbs)).unwrap();
        let y = estimate_y(
            0.0,
            1.0,
            &SimConfig {
                seed: 99,
                ..cfg(50_000, 1e-3, Scheme::EulerAbs)
            },
        )
        .unwrap();
        assert!(hist.total.z_against(&y).abs() <= 3.0);
    }

    #[test]
    fn tilted_equilibrium_decorrelates() {
        let eigen = principal_eigen(2.0, &SolverConfig::default()).unwrap();
        let c = cfg(100_000, 5e-3, Scheme::EulerAbs);
        let run = simulate_tilted(&eigen, Start::Equilibrium, &[0.05, 5.0], &c).unwrap();
        let unit = |x: f64| f64::from(x <= 1.0);
        assert!(run.correlation(0, unit, unit) > 0.5);
        assert!(run.correlation(1, unit, unit).abs() < 0.05);
    }

    #[test]
    fn seeds_reproduce_bit_for_bit() {
        let c = cfg(2_000, 1e-3, Scheme::EulerAbs);
        let a = estimate_y(1.0, 0.8, &c).unwrap();
        let b = estimate_y(1.0, 0.8, &c).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let other = estimate_y(1.0, 0.8, &SimConfig { seed: 12, ..c }).unwrap();
        assert_ne!(a.mean, other.mean);
    }

    #[test]
    fn oracle_suites_pass() {
        let c = cfg(20_000, 2e-3, Scheme::EulerAbs);
        for suite in Suite::ALL {
            let rows = oracle_suite(suite, &c).unwrap();
            assert!(!rows.is_empty());
            for r in rows {
                assert!(r.z.abs() <= 4.0, "{suite:?}: {r:?}");
            }
        }
        assert_eq!("w".parse::<Suite>().unwrap(), Suite::W);
        assert!("nope".parse::<Suite>().is_err());
    }
}
