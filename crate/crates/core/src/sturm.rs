//! Principal eigenpair of `K^a x = (2h x')' + (a h - h^2) x` on the half-line.
//!
//! The operator is discretized in conservative finite-volume form on a
//! quadratically graded grid (dense near the degenerate end `h = 0`), with
//! zero flux at `h = 0` and a Dirichlet wall at `h_max`. The generalized
//! problem `S x = ρ V x` (V the cell volumes) is symmetrized by `V^{1/2}`,
//! the top eigenvalue is isolated by Sturm bisection and polished by inverse
//! iteration, and estimates on grids of size n, 2n, 4n, ... are combined by
//! Richardson extrapolation.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use thiserror::Error;

use crate::numerics::tridiag::SymTridiag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SturmError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("operator parameter must be finite, got {0}")]
    NonFinite(f64),
    #[error("eigenvalue did not converge: last two estimates {last} and {previous}")]
    NotConverged { last: f64, previous: f64 },
    #[error("eigenfunction changes sign at h = {h} (value {value})")]
    Degenerate { h: f64, value: f64 },
    #[error("Rayleigh bound needs a < 0, got {0}")]
    Domain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HMax {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Grid size of the coarsest level.
    pub n: usize,
    pub h_max: HMax,
    /// Number of grid levels (n, 2n, 4n, ...) fed to the extrapolation.
    pub refine_levels: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 500,
            h_max: HMax::Auto,
            refine_levels: 3,
            tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SturmError> {
        if self.n < 64 {
            return Err(SturmError::InvalidConfig(format!("n = {} < 64", self.n)));
        }
        if !(self.tol > 0.0) {
            return Err(SturmError::InvalidConfig(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        if self.refine_levels == 0 || self.refine_levels > 8 {
            return Err(SturmError::InvalidConfig(format!(
                "refine_levels = {} outside 1..=8",
                self.refine_levels
            )));
        }
        if let HMax::Fixed(h) = self.h_max {
            if !(h.is_finite() && h > 0.0) {
                return Err(SturmError::InvalidConfig(format!("h_max = {h} must be positive")));
            }
        }
        Ok(())
    }

    fn key(&self) -> (usize, u64, usize, u64) {
        let h = match self.h_max {
            HMax::Auto => u64::MAX,
            HMax::Fixed(h) => h.to_bits(),
        };
        (self.n, h, self.refine_levels, self.tol.to_bits())
    }
}

/// `h_i = h_max (i/n)^2`, `i = 0..=n`.
pub fn graded_grid(h_max: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            h_max * s * s
        })
        .collect()
}

pub fn uniform_grid(h_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| h_max * i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftBoundary {
    /// Zero flux; the flux coefficient must vanish at the left end.
    Natural,
    Dirichlet,
}

/// Conservative discretization of `(p x')' + q x` on a grid with a Dirichlet
/// wall at the last node, symmetrized so the matrix acts on `V^{1/2} x`.
#[derive(Debug, Clone)]
pub struct FvOperator {
    pub grid: Vec<f64>,
    /// Cell volumes of the unknowns (trapezoid weights).
    pub volumes: Vec<f64>,
    /// Index of the first unknown in `grid` (1 under a left Dirichlet wall).
    pub first: usize,
    pub matrix: SymTridiag,
}

impl FvOperator {
    pub fn assemble<P, Q>(grid: Vec<f64>, flux: P, potential: Q, left: LeftBoundary) -> Self
    where
        P: Fn(f64) -> f64,
        Q: Fn(f64) -> f64,
    {
        let n = grid.len() - 1;
        let coupling: Vec<f64> = grid
            .windows(2)
            .map(|w| flux(0.5 * (w[0] + w[1])) / (w[1] - w[0]))
            .collect();
        let first = match left {
            LeftBoundary::Natural => 0,
            LeftBoundary::Dirichlet => 1,
        };
        let mut volumes = Vec::with_capacity(n - first);
        let mut diag = Vec::with_capacity(n - first);
        for i in first..n {
            let left_width = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let v = 0.5 * (left_width + grid[i + 1] - grid[i]);
            let c_left = if i > 0 { coupling[i - 1] } else { 0.0 };
            volumes.push(v);
            diag.push((-(c_left + coupling[i]) + v * potential(grid[i])) / v);
        }
        let off = (first..n - 1)
            .map(|i| coupling[i] / (volumes[i - first] * volumes[i + 1 - first]).sqrt())
            .collect();
        Self {
            grid,
            volumes,
            first,
            matrix: SymTridiag::new(diag, off),
        }
    }

    pub fn unknowns(&self) -> usize {
        self.volumes.len()
    }

    /// Grid function (one value per unknown) to symmetrized coordinates.
    pub fn to_sym(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.volumes).map(|(v, w)| v * w.sqrt()).collect()
    }

    pub fn from_sym(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.volumes).map(|(v, w)| v / w.sqrt()).collect()
    }

    /// Pointwise action of the discrete operator on the unknowns.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.from_sym(&self.matrix.matvec(&self.to_sym(x)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub a: f64,
    /// Extrapolated principal eigenvalue.
    pub rho: f64,
    /// Extrapolated `∫ h x_a^2 dh`.
    pub rho1: f64,
    /// Finest grid, `h_0 = 0` to `h_N = h_max`.
    pub grid: Vec<f64>,
    /// Eigenfunction on `grid`, positive, trapezoid-normalized, zero at `h_max`.
    pub xvals: Vec<f64>,
    pub h_max: f64,
    pub n: usize,
    /// Eigenvalue of the finest discrete problem (before extrapolation).
    pub rho_grid: f64,
}

impl EigenSolution {
    /// Piecewise-linear interpolation of `x_a`; zero beyond `h_max`.
    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return self.xvals[0];
        }
        if h >= self.h_max {
            return 0.0;
        }
        let j = self.grid.partition_point(|&g| g <= h) - 1;
        let t = (h - self.grid[j]) / (self.grid[j + 1] - self.grid[j]);
        self.xvals[j] * (1.0 - t) + self.xvals[j + 1] * t
    }

    /// Trapezoid weights on `grid`.
    pub fn weights(&self) -> Vec<f64> {
        crate::numerics::quad::trapezoid_weights(&self.grid)
    }

    /// `‖K^a x - ρ x‖ / ‖x‖` for the finest discrete operator over the
    /// interior nodes.
    pub fn residual(&self) -> f64 {
        let op = kernel_operator(self.a, self.grid.clone());
        let x = &self.xvals[..self.grid.len() - 1];
        let kx = op.apply(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..x.len() {
            let r = kx[i] - self.rho_grid * x[i];
            num += op.volumes[i] * r * r;
            den += op.volumes[i] * x[i] * x[i];
        }
        (num / den).sqrt()
    }
}

fn kernel_operator(a: f64, grid: Vec<f64>) -> FvOperator {
    FvOperator::assemble(grid, |h| 2.0 * h, |h| a * h - h * h, LeftBoundary::Natural)
}

struct Level {
    rho: f64,
    rho1: f64,
    op: FvOperator,
    y: Vec<f64>,
}

/// Principal eigenpair of one discrete problem. With a `warm` start (an
/// eigenvalue estimate and a nearby solution on another grid) the Sturm
/// bisection is replaced by inverse iteration from the interpolated vector,
/// confirmed by a single Sturm count.
fn solve_level(a: f64, h_max: f64, n: usize, warm: Option<&Level>) -> Level {
    let op = kernel_operator(a, graded_grid(h_max, n));
    let m = op.unknowns();
    let polished = warm.and_then(|w| {
        let x = w.op.from_sym(&w.y);
        let start = interpolate_sorted(&w.op.grid, &x, &op.grid[..m]);
        let (y, rq) = op.matrix.inverse_iteration_from(w.rho, op.to_sym(&start), 1);
        let (y, rq) = op.matrix.inverse_iteration_from(rq, y, 2);
        let margin = 1e-6 * rq.abs().max(1.0);
        (op.matrix.count_below(rq - margin) == m - 1).then_some((y, rq))
    });
    let (mut y, rq) = polished.unwrap_or_else(|| {
        // (2h x')' is negative semidefinite, so ρ ≤ max_h (a h - h^2). Below:
        // the trial-function bound for a < 0 and ρ(0) > -2 otherwise, widened
        // to absorb discretization error; a wrong bracket falls back to
        // Gershgorin inside the bisection.
        let upper = if a > 0.0 { 0.25 * a * a } else { 0.0 } + 1e-9;
        let lower = if a < 0.0 {
            1.5 * rayleigh_lower_bound(a).unwrap_or(-2.0) - 2.0
        } else {
            -3.0
        };
        let coarse = op.matrix.largest_eigenvalue(Some((lower, upper)), 1e-4);
        // Two sweeps at the bisection shift make the Rayleigh quotient
        // accurate to ~1e-12; sweeps at that shift converge by ~1e-12 each.
        let (y, rq) = op.matrix.inverse_iteration(coarse, 2);
        op.matrix.inverse_iteration_from(rq, y, 4)
    });
    if y.iter().map(|v| v.signum()).sum::<f64>() < 0.0 {
        y.iter_mut().for_each(|v| *v = -*v);
    }
    let rho1 = y.iter().zip(&op.grid).map(|(v, h)| h * v * v).sum::<f64>();
    Level { rho: rq, rho1, op, y }
}

/// Linear interpolation of `values` (given on the leading nodes of `grid`,
/// zero afterwards) at increasing abscissae `at`.
fn interpolate_sorted(grid: &[f64], values: &[f64], at: &[f64]) -> Vec<f64> {
    let last = values.len() - 1;
    let mut j = 0;
    at.iter()
        .map(|&h| {
            while j < last && grid[j + 1] <= h {
                j += 1;
            }
            if j == last {
                // Between the last unknown and the Dirichlet node.
                let end = grid[last + 1];
                return if h >= end {
                    0.0
                } else {
                    values[last] * (end - h) / (end - grid[last])
                };
            }
            let t = (h - grid[j]) / (grid[j + 1] - grid[j]);
            values[j] * (1.0 - t) + values[j + 1] * t
        })
        .collect()
}

/// Romberg extrapolation for an error expansion in powers of `(1/n)^2`.
fn romberg(values: &[f64]) -> f64 {
    let mut table = values.to_vec();
    let mut factor = 4.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    table[0]
}

/// Extrapolation over all levels and over all but the finest.
fn richardson(values: &[f64]) -> (f64, f64) {
    let best = romberg(values);
    let previous = if values.len() > 1 {
        romberg(&values[..values.len() - 1])
    } else {
        best
    };
    (best, previous)
}

/// Truncation point where the WKB decay exponent of `x_a` reaches 40.
pub fn auto_h_max(a: f64) -> f64 {
    let rho_up = if a > 0.0 { 0.25 * a * a } else { 0.0 };
    let rate = |t: f64| ((t * t - a * t - rho_up).max(0.0) / (2.0 * t)).sqrt();
    let step = 1e-3 * (1.0 + a.abs()).recip().max(1e-4);
    let mut h = 0.0;
    let mut s = 0.0;
    let mut dh = step;
    while s < 40.0 {
        s += dh * rate(h + 0.5 * dh);
        h += dh;
        dh = (dh * 1.01).min(0.05);
    }
    h
}

/// Solves at a fixed `h_max`, refining the grid until the extrapolated
/// eigenvalue is stable to `tol`.
fn solve_fixed(
    a: f64,
    h_max: f64,
    cfg: &SolverConfig,
    warm: Option<&Level>,
) -> Result<(Vec<Level>, f64, f64), SturmError> {
    let mut n = cfg.n;
    loop {
        let mut levels: Vec<Level> = Vec::with_capacity(cfg.refine_levels);
        for j in 0..cfg.refine_levels {
            let start = levels.last().or(warm);
            levels.push(solve_level(a, h_max, n << j, start));
        }
        let rhos: Vec<f64> = levels.iter().map(|l| l.rho).collect();
        let slopes: Vec<f64> = levels.iter().map(|l| l.rho1).collect();
        let (rho, prev) = richardson(&rhos);
        let (rho1, _) = richardson(&slopes);
        let scale = rho.abs().max(1.0);
        if (rho - prev).abs() <= cfg.tol * scale || cfg.refine_levels == 1 {
            return Ok((levels, rho, rho1));
        }
        if n << cfg.refine_levels > 1 << 21 {
            return Err(SturmError::NotConverged {
                last: rho,
                previous: prev,
            });
        }
        n *= 2;
    }
}

pub fn principal_eigen(a: f64, cfg: &SolverConfig) -> Result<EigenSolution, SturmError> {
    cfg.validate()?;
    if !a.is_finite() {
        return Err(SturmError::NonFinite(a));
    }
    let (levels, rho, rho1, h_max) = match cfg.h_max {
        HMax::Fixed(h) => {
            let (levels, rho, rho1) = solve_fixed(a, h, cfg, None)?;
            (levels, rho, rho1, h)
        }
        HMax::Auto => {
            let mut h = auto_h_max(a);
            let (mut levels, mut rho, mut rho1) = solve_fixed(a, h, cfg, None)?;
            let mut doublings = 0;
            loop {
                let (l2, r2, s2) = solve_fixed(a, 2.0 * h, cfg, levels.first())?;
                if (r2 - rho).abs() < 0.1 * cfg.tol * rho.abs().max(1.0) {
                    break;
                }
                doublings += 1;
                if doublings > 6 {
                    return Err(SturmError::NotConverged {
                        last: r2,
                        previous: rho,
                    });
                }
                h *= 2.0;
                levels = l2;
                rho = r2;
                rho1 = s2;
            }
            (levels, rho, rho1, h)
        }
    };
    let finest = levels.into_iter().last().unwrap();
    let mut xvals = finest.op.from_sym(&finest.y);
    for (i, v) in xvals.iter().enumerate() {
        if *v <= 0.0 {
            return Err(SturmError::Degenerate {
                h: finest.op.grid[i],
                value: *v,
            });
        }
    }
    xvals.push(0.0);
    let n = finest.op.grid.len() - 1;
    Ok(EigenSolution {
        a,
        rho,
        rho1,
        grid: finest.op.grid,
        xvals,
        h_max,
        n,
        rho_grid: finest.rho,
    })
}

type CacheKey = (u64, (usize, u64, usize, u64));

fn cache() -> &'static RwLock<HashMap<CacheKey, (f64, f64)>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, (f64, f64)>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `(ρ(a), ρ'(a))`, memoized per `(a, cfg)`.
pub fn rho_and_slope(a: f64, cfg: &SolverConfig) -> Result<(f64, f64), SturmError> {
    let key = (a.to_bits(), cfg.key());
    if let Some(v) = cache().read().unwrap().get(&key) {
        return Ok(*v);
    }
    let sol = principal_eigen(a, cfg)?;
    let value = (sol.rho, sol.rho1);
    let mut map = cache().write().unwrap();
    if map.len() > 100_000 {
        map.clear();
    }
    Ok(*map.entry(key).or_insert(value))
}

pub fn rho(a: f64, cfg: &SolverConfig) -> Result<f64, SturmError> {
    rho_and_slope(a, cfg).map(|v| v.0)
}

/// `(ρ'(a), ρ''(a))`: ρ' from the perturbation identity `∫ h x_a^2`, ρ'' by
/// central differences of ρ' with a step halved until stable.
pub fn rho_derivative(a: f64, cfg: &SolverConfig) -> Result<(f64, f64), SturmError> {
    let (_, rho1) = rho_and_slope(a, cfg)?;
    let central = |step: f64| -> Result<f64, SturmError> {
        let up = rho_and_slope(a + step, cfg)?.1;
        let down = rho_and_slope(a - step, cfg)?.1;
        Ok((up - down) / (2.0 * step))
    };
    let mut step = 1e-3;
    let mut last = central(step)?;
    for _ in 0..8 {
        step *= 0.5;
        let next = central(step)?;
        if (next - last).abs() <= 1e-5 * next.abs() {
            return Ok((rho1, next));
        }
        last = next;
    }
    Ok((rho1, last))
}

/// Trial-function lower bound `-√2 (-a)^{1/2} - (-a)^{-1}` from the
/// normalized profile `2^{1/4} e^{-h/√2}`, whose second moment is 1.
pub fn rayleigh_lower_bound(a: f64) -> Result<f64, SturmError> {
    if !(a < 0.0) {
        return Err(SturmError::Domain(a));
    }
    let m = -a;
    Ok(-std::f64::consts::SQRT_2 * m.sqrt() - 1.0 / m)
}
