//! The operator `𝒦* x = 2x'' - h x` on the half-line with a Dirichlet wall
//! at 0: the overshoot kernel `y_a`, the Airy expansion of `w(h, t)`, the
//! Green kernel of `𝒦*`, and a Crank–Nicolson solver for `∂_t u = 𝒦* u`.

use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::airy::{self, AiryError, EigenBasisElement, SCALE};
use crate::numerics::{integrate, trapezoid, QuadConfig, QuadError};
use crate::sturm::{self, FvOperator, LeftBoundary};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Airy(#[from] AiryError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("y_a requires a < a** = {a_dstar}, got a = {a}")]
    AboveThreshold { a: f64, a_dstar: f64 },
    #[error("series for w is only certified for t >= {t_min}; at t = {t} the tail bound is {bound:e}")]
    Accuracy { t: f64, t_min: f64, bound: f64 },
    #[error("{0}")]
    Domain(String),
}

/// Largest value of |Ai| on the real line, attained near -1.0188.
const AI_MAX: f64 = 0.535_656_656_015_7;

/// The critical parameter `a** = -2^{1/3} a_0`.
pub fn a_dstar() -> f64 {
    -airy::first_zero() / SCALE
}

/// `y_a(h) = Ai(2^{-1/3}(h - a)) / Ai(-2^{-1/3} a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvershootKernel {
    pub a: f64,
    denom: f64,
}

impl OvershootKernel {
    pub fn new(a: f64) -> Result<Self, SpectralError> {
        let a_dstar = a_dstar();
        if !a.is_finite() {
            return Err(SpectralError::Domain(format!("a must be finite, got {a}")));
        }
        if a >= a_dstar {
            return Err(SpectralError::AboveThreshold { a, a_dstar });
        }
        Ok(Self {
            a,
            denom: airy::ai(-SCALE * a)?,
        })
    }

    pub fn eval(&self, h: f64) -> Result<f64, SpectralError> {
        if !(h >= 0.0) {
            return Err(SpectralError::Domain(format!("h must be non-negative, got {h}")));
        }
        if h == 0.0 {
            return Ok(1.0);
        }
        let s = SCALE * (h - self.a);
        if s > airy::MAX_ARG {
            return Ok(0.0);
        }
        Ok(airy::ai(s)? / self.denom)
    }
}

pub fn y_kernel(a: f64, h: f64) -> Result<f64, SpectralError> {
    OvershootKernel::new(a)?.eval(h)
}

/// `w(h, t) = Σ_k γ_k e^{a^{(k)} t} e_k(h)`, truncated at `K` terms.
#[derive(Debug, Clone)]
pub struct WExpansion {
    pub basis: Vec<EigenBasisElement>,
    pub gamma: Vec<f64>,
    /// `t_min(K)`: below it the tail bound exceeds [`TAIL_TARGET`].
    pub t_min: f64,
}

pub const DEFAULT_TERMS: usize = 200;
pub const TAIL_TARGET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WValue {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn w_coefficients(terms: usize) -> Result<WExpansion, SpectralError> {
    if terms == 0 {
        return Err(SpectralError::Domain("the expansion needs at least one term".into()));
    }
    let basis = airy::eigenbasis(terms, &QuadConfig::default())?;
    // Residue of a ↦ y_a(h) at a = -a^{(k)}.
    let gamma = basis.iter().map(|e| 2f64.cbrt() / (e.c_k * e.slope)).collect();
    let mut exp = WExpansion {
        basis,
        gamma,
        t_min: 0.0,
    };
    exp.t_min = exp.find_t_min();
    Ok(exp)
}

impl WExpansion {
    pub fn terms(&self) -> usize {
        self.basis.len()
    }

    /// Eigenvalue `a^{(k)}` of the k-th term.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.basis[k].a_scaled
    }

    /// Bound on `Σ_{k ≥ K} |γ_k| max|e_k| e^{a^{(k)} t}`. The dropped
    /// eigenvalues come from the asymptotic zero formula and `c_k` is
    /// bounded by the last retained one (the sequence decreases).
    pub fn tail_bound(&self, t: f64) -> f64 {
        let last = self.basis.last().expect("non-empty basis");
        let scale = SQRT_2 * AI_MAX * last.c_k;
        let mut sum = 0.0;
        for k in self.terms().. {
            let term = (airy::zero_guess(k) / SCALE * t).exp();
            sum += term;
            if term <= 1e-17 * sum || k > self.terms() + 5_000_000 {
                break;
            }
        }
        scale * sum
    }

    fn find_t_min(&self) -> f64 {
        let (mut lo, mut hi) = (1e-4f64, 1.0f64);
        while self.tail_bound(hi) > TAIL_TARGET {
            hi *= 2.0;
        }
        if self.tail_bound(lo) <= TAIL_TARGET {
            return lo;
        }
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            if self.tail_bound(mid) > TAIL_TARGET {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn leading(&self, h: f64, t: f64) -> f64 {
        self.gamma[0] * (self.eigenvalue(0) * t).exp() * self.basis[0].eval(h)
    }

    /// The series without the `t_min` guard.
    pub fn sum(&self, h: f64, t: f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.gamma)
            .map(|(e, g)| g * (e.a_scaled * t).exp() * e.eval(h))
            .sum()
    }

    /// `Σ_k γ_k e_k(h) e^{a^{(k)} t0} / (-a^{(k)})`, the series integrated
    /// over `[t0, ∞)`.
    pub fn integrated_tail(&self, h: f64, t0: f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.gamma)
            .map(|(e, g)| g * (e.a_scaled * t0).exp() * e.eval(h) / -e.a_scaled)
            .sum()
    }

    /// Termwise Laplace transform `Σ γ_k e_k(h) / (-a - a^{(k)})`.
    pub fn laplace_series(&self, a: f64, h: f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.gamma)
            .map(|(e, g)| g * e.eval(h) / (-a - e.a_scaled))
            .sum()
    }
}

pub fn w_eval(h: f64, t: f64, exp: &WExpansion) -> Result<WValue, SpectralError> {
    if !(h >= 0.0 && h.is_finite()) || !(t > 0.0 && t.is_finite()) {
        return Err(SpectralError::Domain(format!(
            "w needs h >= 0 and t > 0, got ({h}, {t})"
        )));
    }
    let tail_bound = exp.tail_bound(t);
    if t < exp.t_min {
        return Err(SpectralError::Accuracy {
            t,
            t_min: exp.t_min,
            bound: tail_bound,
        });
    }
    Ok(WValue {
        value: exp.sum(h, t),
        tail_bound,
    })
}

/// `G(u, v) = K y₁(u ∧ v) y₂(u ∨ v)` with `y₁(u) = Bi(2^{-1/3}u) -
/// Bi(0)Ai(2^{-1/3}u)/Ai(0)`, `y₂(u) = Ai(2^{-1/3}u)` and
/// `K = 1/(-2 y₁'(0) y₂(0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    pub k: f64,
}

impl Default for GreenKernel {
    fn default() -> Self {
        let y1_slope = SCALE * (airy::BIP_0 - airy::BI_0 * airy::AIP_0 / airy::AI_0);
        Self {
            k: 1.0 / (-2.0 * y1_slope * airy::AI_0),
        }
    }
}

impl GreenKernel {
    pub fn y1(&self, u: f64) -> Result<f64, SpectralError> {
        let v = airy::airy(SCALE * u)?;
        Ok(v.bi - airy::BI_0 * v.ai / airy::AI_0)
    }

    pub fn y2(&self, u: f64) -> Result<f64, SpectralError> {
        Ok(airy::ai(SCALE * u)?)
    }

    pub fn eval(&self, u: f64, v: f64) -> Result<f64, SpectralError> {
        Ok(self.k * self.y1(u.min(v))? * self.y2(u.max(v))?)
    }

    /// `(Γ f)(u)` by adaptive quadrature, with `f` negligible past `upper`.
    pub fn apply_at<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        u: f64,
        upper: f64,
        quad: &QuadConfig,
    ) -> Result<f64, SpectralError> {
        let panelled = |f: &mut F, lo: f64, hi: f64, g: &dyn Fn(f64) -> f64| -> Result<f64, SpectralError> {
            if hi <= lo {
                return Ok(0.0);
            }
            let panels = ((hi - lo) / 2.0).ceil().max(1.0) as usize;
            let width = (hi - lo) / panels as f64;
            let mut total = 0.0;
            for p in 0..panels {
                let a = lo + p as f64 * width;
                total += integrate(|v| g(v) * f(v), a, a + width, quad)?.0;
            }
            Ok(total)
        };
        let y1 = |v: f64| self.y1(v).unwrap_or(f64::NAN);
        let y2 = |v: f64| self.y2(v).unwrap_or(0.0);
        let inner = panelled(&mut f, 0.0, u, &y1)?;
        let outer = panelled(&mut f, u, upper, &y2)?;
        Ok(self.k * (self.y2(u)? * inner + self.y1(u)? * outer))
    }

    /// `∫∫ G² du dv` over `[0, l]²` by the trapezoid rule on `n` cells.
    pub fn hilbert_schmidt(&self, l: f64, n: usize) -> Result<f64, SpectralError> {
        let grid = sturm::uniform_grid(l, n);
        let y1: Vec<f64> = grid.iter().map(|&u| self.y1(u)).collect::<Result<_, _>>()?;
        let y2: Vec<f64> = grid.iter().map(|&u| self.y2(u)).collect::<Result<_, _>>()?;
        let w = l / n as f64;
        let end = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
        let mut total = 0.0;
        for i in 0..=n {
            let mut row = 0.0;
            for j in 0..=n {
                let g = self.k * y1[i.min(j)] * y2[i.max(j)];
                row += end(j) * g * g;
            }
            total += end(i) * row;
        }
        Ok(total * w * w)
    }
}

/// `Γ f` on `grid` by cumulative trapezoid sums (O(n)).
pub fn green_apply(grid: &[f64], f: &[f64]) -> Result<Vec<f64>, SpectralError> {
    if grid.len() != f.len() || grid.len() < 2 {
        return Err(SpectralError::Domain(
            "grid and values must have equal length >= 2".into(),
        ));
    }
    let g = GreenKernel::default();
    let y1: Vec<f64> = grid.iter().map(|&u| g.y1(u)).collect::<Result<_, _>>()?;
    let y2: Vec<f64> = grid.iter().map(|&u| g.y2(u)).collect::<Result<_, _>>()?;
    let n = grid.len();
    let mut inner = vec![0.0; n];
    for i in 1..n {
        let dx = grid[i] - grid[i - 1];
        inner[i] = inner[i - 1] + 0.5 * dx * (y1[i - 1] * f[i - 1] + y1[i] * f[i]);
    }
    let mut outer = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let dx = grid[i + 1] - grid[i];
        outer[i] = outer[i + 1] + 0.5 * dx * (y2[i] * f[i] + y2[i + 1] * f[i + 1]);
    }
    Ok((0..n).map(|i| g.k * (y2[i] * inner[i] + y1[i] * outer[i])).collect())
}

/// `y_a(h) = y_0 - aΓy_0 - a² Σ γ_k e_k/(a^{(k)2}(a^{(k)} + a))`: the
/// termwise Laplace transform with its two slowest-converging pieces summed
/// in closed form.
pub fn reconstruct_y(a: f64, h: f64, exp: &WExpansion) -> Result<f64, SpectralError> {
    let green = GreenKernel::default();
    let y0 = |u: f64| green.y2(u).map(|v| v / airy::AI_0);
    let quad = QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_depth: 40,
    };
    let upper = h + 40.0;
    let gamma_y0 = green.apply_at(|u| y0(u).unwrap_or(0.0), h, upper, &quad)?;
    let rest: f64 = exp
        .basis
        .iter()
        .zip(&exp.gamma)
        .map(|(e, g)| {
            let ak = e.a_scaled;
            g * e.eval(h) / (ak * ak * (ak + a))
        })
        .sum();
    Ok(y0(h)? - a * gamma_y0 - a * a * rest)
}

/// Discretization of `∂_t u = 𝒦* u` on a grid starting at 0.
#[derive(Debug, Clone)]
pub struct HeatSolver {
    op: FvOperator,
}

impl HeatSolver {
    pub fn new(grid: Vec<f64>) -> Result<Self, SpectralError> {
        if grid.len() < 3 || grid[0] != 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectralError::Domain("heat grid must start at 0 and increase".into()));
        }
        Ok(Self {
            op: FvOperator::assemble(grid, |_| 2.0, |h| -h, LeftBoundary::Dirichlet),
        })
    }

    /// The sturm graded grid on `[0, h_max]` with `n` cells.
    pub fn graded(h_max: f64, n: usize) -> Result<Self, SpectralError> {
        Self::new(sturm::graded_grid(h_max, n))
    }

    pub fn grid(&self) -> &[f64] {
        &self.op.grid
    }

    /// Evolves `initial` (one value per grid node) for `duration` with
    /// `steps` Crank–Nicolson steps, holding `u(0) = boundary` and
    /// `u(h_max) = 0`. The first two steps are replaced by four backward
    /// Euler half steps to damp rough initial data.
    pub fn evolve(
        &self,
        initial: &[f64],
        duration: f64,
        steps: usize,
        boundary: f64,
    ) -> Result<Vec<f64>, SpectralError> {
        let grid = &self.op.grid;
        if initial.len() != grid.len() {
            return Err(SpectralError::Domain(format!(
                "initial profile has {} values for {} nodes",
                initial.len(),
                grid.len()
            )));
        }
        if !(duration >= 0.0 && duration.is_finite()) || steps == 0 {
            return Err(SpectralError::Domain(
                "need a finite duration and at least one step".into(),
            ));
        }
        let m = self.op.unknowns();
        let a = &self.op.matrix;
        // Coupling of the first unknown to the wall value, in symmetric form.
        let mut force = vec![0.0; m];
        force[0] = 2.0 / grid[1] * boundary / self.op.volumes[0].sqrt();
        let mut u = self.op.to_sym(&initial[1..grid.len() - 1]);
        let dt = duration / steps as f64;
        let startup = steps.min(2);
        let tau = 0.5 * dt;
        for _ in 0..2 * startup {
            let rhs: Vec<f64> = u.iter().zip(&force).map(|(x, b)| -(x / tau + b)).collect();
            u = a.shifted_solve(1.0 / tau, &rhs);
        }
        for _ in startup..steps {
            let au = a.matvec(&u);
            let rhs: Vec<f64> = u
                .iter()
                .zip(&au)
                .zip(&force)
                .map(|((x, ax), b)| -2.0 / dt * x - ax - 2.0 * b)
                .collect();
            u = a.shifted_solve(2.0 / dt, &rhs);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::Domain("heat solver produced non-finite values".into()));
        }
        let mut out = Vec::with_capacity(grid.len());
        out.push(boundary);
        out.extend(self.op.from_sym(&u));
        out.push(0.0);
        Ok(out)
    }
}

/// Evolves a profile vanishing at `h = 0` from `t_span.0` to `t_span.1`.
pub fn heat_evolve(grid: &[f64], initial: &[f64], t_span: (f64, f64), steps: usize) -> Result<Vec<f64>, SpectralError> {
    let scale = initial.iter().fold(0f64, |m, v| m.max(v.abs()));
    if initial.first().is_some_and(|v| v.abs() > 1e-12 * scale.max(1e-300)) {
        return Err(SpectralError::Domain("initial profile must vanish at h = 0".into()));
    }
    if !(t_span.1 >= t_span.0) {
        return Err(SpectralError::Domain(format!("empty time span {t_span:?}")));
    }
    HeatSolver::new(grid.to_vec())?.evolve(initial, t_span.1 - t_span.0, steps, 0.0)
}

/// `∫_0^∞ w(h, t) dt`: the part before `t0` solves the heat equation with
/// wall value 1 and zero initial data; the rest is the series integrated
/// termwise.
pub fn w_time_integral(
    h: f64,
    t0: f64,
    exp: &WExpansion,
    solver: &HeatSolver,
    steps: usize,
) -> Result<f64, SpectralError> {
    if t0 < exp.t_min {
        return Err(SpectralError::Accuracy {
            t: t0,
            t_min: exp.t_min,
            bound: exp.tail_bound(t0),
        });
    }
    let zero = vec![0.0; solver.grid().len()];
    let u = solver.evolve(&zero, t0, steps, 1.0)?;
    let early = interpolate(solver.grid(), &u, h);
    Ok(early + exp.integrated_tail(h, t0))
}

/// Piecewise-linear interpolation on a sorted grid; zero outside.
pub fn interpolate(grid: &[f64], values: &[f64], h: f64) -> f64 {
    if h < grid[0] || h > grid[grid.len() - 1] {
        return 0.0;
    }
    let i = grid.partition_point(|&g| g <= h).clamp(1, grid.len() - 1);
    let (x0, x1) = (grid[i - 1], grid[i]);
    let s = (h - x0) / (x1 - x0);
    values[i - 1] + s * (values[i] - values[i - 1])
}

/// `‖f‖₂` on the grid (trapezoid rule).
pub fn l2_norm(grid: &[f64], f: &[f64]) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    trapezoid(grid, &sq).sqrt()
}
