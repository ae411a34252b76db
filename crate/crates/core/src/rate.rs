//! The moment generating function `Λ⁺`, its symmetrization `Λ`, and the
//! two-branch rate function `I`, all driven by the principal eigenvalue
//! curve `ρ`.
//!
//! * `Λ⁺(μ) = -ρ^{-1}(-μ)` for `μ > -ρ(a**)`, and `-a**` below.
//! * `I(b) = -b ρ(a**) + a**` for `0 ≤ b ≤ b**`; above, `I(b) = -b ρ(a_b) + a_b`
//!   with `ρ'(a_b) = 1/b`.

use thiserror::Error;

use crate::constants::{self, ConstantsError, ModelConstants};
use crate::numerics::{brent, golden_max, newton_bisect, RootError};
use crate::sturm::{self, SolverConfig, SturmError};

#[derive(Debug, Error)]
pub enum RateError {
    #[error(transparent)]
    Constants(#[from] ConstantsError),
    #[error(transparent)]
    Sturm(#[from] SturmError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgfBranch {
    Flat,
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBranch {
    Linear,
    Convex,
}

impl MgfBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            MgfBranch::Flat => "flat",
            MgfBranch::Convex => "convex",
        }
    }
}

impl RateBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateBranch::Linear => "linear",
            RateBranch::Convex => "convex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfPoint {
    pub mu: f64,
    pub value: f64,
    /// `(Λ⁺)'(μ)`: zero on the flat branch, `1/ρ'(a)` on the convex one.
    pub slope: f64,
    pub branch: MgfBranch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub b: f64,
    pub value: f64,
    pub derivative: f64,
    pub branch: RateBranch,
    /// The parameter with `ρ'(a_b) = 1/b` (a** on the linear branch).
    pub a_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    pub constants: ModelConstants,
}

/// Inside this distance above b** the linear formula is used, since the
/// root of `ρ' = 1/b` degenerates there.
const BRANCH_GUARD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Rate {
    pub cfg: SolverConfig,
    pub constants: ModelConstants,
}

impl Rate {
    pub fn new(cfg: SolverConfig) -> Result<Self, RateError> {
        let constants = constants::constants(&cfg)?;
        Ok(Self { cfg, constants })
    }

    pub fn with_constants(cfg: SolverConfig, constants: ModelConstants) -> Self {
        Self { cfg, constants }
    }

    fn rho(&self, a: f64) -> Result<(f64, f64), RateError> {
        Ok(sturm::rho_and_slope(a, &self.cfg)?)
    }

    /// Solves `ρ(a) = target` for `a < a**`, given `target < ρ(a**)`.
    fn rho_inverse(&self, target: f64) -> Result<f64, RateError> {
        let hi = self.constants.a_dstar;
        let mut lo = (self.constants.a_star - 1.0).min(-0.5 * target * target - 1.0);
        while self.rho(lo)?.0 >= target {
            lo = 2.0 * lo - 1.0;
            if lo < -1e9 {
                return Err(RateError::Domain(format!("cannot bracket ρ(a) = {target}")));
            }
        }
        let f = |a: f64| self.rho(a).map(|(r, s)| (r - target, s));
        Ok(newton_bisect(f, lo, hi, 1e-13)?)
    }

    pub fn lambda_plus(&self, mu: f64) -> Result<MgfPoint, RateError> {
        if !mu.is_finite() {
            return Err(RateError::Domain(format!("mu must be finite, got {mu}")));
        }
        let k = &self.constants;
        if mu <= -k.rho_a_dstar {
            return Ok(MgfPoint {
                mu,
                value: -k.a_dstar,
                slope: 0.0,
                branch: MgfBranch::Flat,
            });
        }
        let a = self.rho_inverse(-mu)?;
        Ok(MgfPoint {
            mu,
            value: -a,
            slope: 1.0 / self.rho(a)?.1,
            branch: MgfBranch::Convex,
        })
    }

    /// `Λ(μ) = Λ⁺(|μ|)`.
    pub fn lambda_full(&self, mu: f64) -> Result<f64, RateError> {
        Ok(self.lambda_plus(mu.abs())?.value)
    }

    pub fn rate_i(&self, b: f64) -> Result<RatePoint, RateError> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(RateError::Domain(format!("b must be finite and non-negative, got {b}")));
        }
        let k = &self.constants;
        if b <= k.b_dstar + BRANCH_GUARD {
            return Ok(RatePoint {
                b,
                value: -b * k.rho_a_dstar + k.a_dstar,
                derivative: -k.rho_a_dstar,
                branch: RateBranch::Linear,
                a_b: k.a_dstar,
            });
        }
        let target = 1.0 / b;
        let hi = k.a_dstar;
        let mut lo = -(b * b + 20.0);
        while self.rho(lo)?.1 >= target {
            lo *= 2.0;
        }
        let a_b = brent(|a| self.rho(a).map(|(_, s)| s - target), lo, hi, 1e-13)?;
        let r = self.rho(a_b)?.0;
        Ok(RatePoint {
            b,
            value: -b * r + a_b,
            derivative: -r,
            branch: RateBranch::Convex,
            a_b,
        })
    }

    /// `I` extended to negative `b` by symmetry.
    pub fn rate_i_signed(&self, b: f64) -> Result<RatePoint, RateError> {
        let p = self.rate_i(b.abs())?;
        Ok(if b < 0.0 {
            RatePoint {
                b,
                derivative: -p.derivative,
                ..p
            }
        } else {
            p
        })
    }

    /// One-sided limit of `I'` at `b** +`, from the convex branch at
    /// `b** + δ` and `b** + δ/2` with linear extrapolation in δ. Returns
    /// `(slope at b** + δ, extrapolated limit)`.
    pub fn convex_slope_limit(&self, delta: f64) -> Result<(f64, f64), RateError> {
        let b = self.constants.b_dstar;
        let s1 = self.rate_i(b + delta)?.derivative;
        let s2 = self.rate_i(b + 0.5 * delta)?.derivative;
        Ok((s1, 2.0 * s2 - s1))
    }

    pub fn rate_curve(&self, bmin: f64, bmax: f64, step: f64) -> Result<RateCurve, RateError> {
        let points = grid(bmin, bmax, step)?
            .into_iter()
            .map(|b| self.rate_i_signed(b))
            .collect::<Result<_, _>>()?;
        Ok(RateCurve {
            points,
            constants: self.constants,
        })
    }

    pub fn mgf_curve(&self, mumin: f64, mumax: f64, step: f64) -> Result<Vec<MgfPoint>, RateError> {
        grid(mumin, mumax, step)?
            .into_iter()
            .map(|mu| self.lambda_plus(mu))
            .collect()
    }

    /// `I_β(b) = β^{2/3} I(β^{-1/3} b)` with its derivative and branch.
    pub fn beta_scaled(&self, beta: f64, b: f64) -> Result<RatePoint, RateError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(RateError::Domain(format!("beta must be positive, got {beta}")));
        }
        let s = beta.cbrt();
        let p = self.rate_i_signed(b / s)?;
        Ok(RatePoint {
            b,
            value: s * s * p.value,
            derivative: s * p.derivative,
            ..p
        })
    }

    /// Numerical Legendre transform of `Λ⁺` against the branch formulas.
    pub fn legendre_check(&self, b_grid: &[f64], mu_grid: &[f64]) -> Result<LegendreReport, RateError> {
        if b_grid.is_empty() || mu_grid.len() < 3 {
            return Err(RateError::Domain(
                "legendre grids need at least 1 b and 3 mu points".into(),
            ));
        }
        let mut mus = mu_grid.to_vec();
        mus.sort_by(f64::total_cmp);
        let lam: Vec<f64> = mus
            .iter()
            .map(|&m| self.lambda_plus(m).map(|p| p.value))
            .collect::<Result<_, _>>()?;
        let k = self.constants;
        let mut rows = Vec::with_capacity(b_grid.len());
        for &b in b_grid {
            let (j, discrete) = mus.iter().zip(&lam).map(|(m, l)| b * m - l).enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, v)| if v > best.1 { (i, v) } else { best },
            );
            let lo = mus[j.saturating_sub(1)];
            let hi = mus[(j + 1).min(mus.len() - 1)];
            let (arg, refined) = golden_max(|m| self.lambda_plus(m).map(|p| b * m - p.value), lo, hi, 1e-9)?;
            let (argmax, sup) = if refined >= discrete {
                (arg, refined)
            } else {
                (mus[j], discrete)
            };
            let rate = self.rate_i(b)?;
            let expected_argmax = if b == 0.0 {
                None
            } else if rate.branch == RateBranch::Linear {
                Some(-k.rho_a_dstar)
            } else {
                Some(-self.rho(rate.a_b)?.0)
            };
            rows.push(LegendreRow {
                b,
                sup,
                rate: rate.value,
                argmax,
                expected_argmax,
            });
        }
        Ok(LegendreReport { rows })
    }

    /// Legendre transform of the rate function evaluated back at `mu`:
    /// `sup_{b ≥ 0} (b μ - I(b))`. The convex branch is traversed through
    /// its parameter `a` (`b = 1/ρ'(a)`), the linear branch through its end
    /// points.
    pub fn conjugate_of_rate(&self, mu: f64) -> Result<f64, RateError> {
        let k = self.constants;
        let g = |a: f64| -> Result<f64, RateError> {
            let (r, s) = self.rho(a)?;
            let b = 1.0 / s;
            Ok(b * mu - (-b * r + a))
        };
        let linear = (-k.a_dstar).max(k.b_dstar * mu - (-k.b_dstar * k.rho_a_dstar + k.a_dstar));
        if mu <= -k.rho_a_dstar {
            // g is increasing on a ≤ a** here; its sup is the b** end point.
            return Ok(linear);
        }
        let mut lo = (k.a_star - 2.0).min(-0.5 * mu * mu - 2.0);
        while self.rho(lo)?.0 >= -mu {
            lo = 2.0 * lo - 1.0;
        }
        let (_, best) = golden_max(g, lo, k.a_dstar, 1e-8)?;
        Ok(best.max(linear))
    }

    /// Largest `|sup_b (b μ - I(b)) - Λ⁺(μ)|` over `mus`.
    pub fn involution_gap(&self, mus: &[f64]) -> Result<f64, RateError> {
        let mut worst: f64 = 0.0;
        for &mu in mus {
            let back = self.conjugate_of_rate(mu)?;
            worst = worst.max((back - self.lambda_plus(mu)?.value).abs());
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreRow {
    pub b: f64,
    /// `max_μ (b μ - Λ⁺(μ))`.
    pub sup: f64,
    /// Branch-formula value `I(b)`.
    pub rate: f64,
    pub argmax: f64,
    /// `-ρ(a_b)` (or `-ρ(a**)` on the linear branch); `None` at `b = 0`
    /// where the maximizer is not unique.
    pub expected_argmax: Option<f64>,
}

impl LegendreRow {
    pub fn gap(&self) -> f64 {
        (self.sup - self.rate).abs()
    }

    pub fn argmax_error(&self) -> Option<f64> {
        self.expected_argmax.map(|m| (m - self.argmax).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreReport {
    pub rows: Vec<LegendreRow>,
}

impl LegendreReport {
    pub fn max_gap(&self) -> f64 {
        self.rows.iter().map(LegendreRow::gap).fold(0.0, f64::max)
    }

    pub fn max_argmax_error(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(LegendreRow::argmax_error)
            .fold(0.0, f64::max)
    }
}

/// `lo, lo + step, ..., hi` with the count fixed by rounding so that
/// accumulated floating-point error cannot drop the end point.
pub fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, RateError> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(RateError::Domain(format!("invalid grid {lo}..{hi} step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(RateError::Domain(format!("grid {lo}..{hi} step {step} is too large")));
    }
    Ok((0..=count).map(|i| lo + i as f64 * step).collect())
}
