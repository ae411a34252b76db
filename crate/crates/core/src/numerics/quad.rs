//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature on [{lo}, {hi}] did not converge: achieved error {achieved:e}, requested {requested:e}")]
    NotConverged {
        lo: f64,
        hi: f64,
        achieved: f64,
        requested: f64,
    },
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of interval bisections.
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_depth: 40,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(center));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(x2));
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Integrates `f` over `[lo, hi]`, bisecting until each panel meets its
/// share of the tolerance. Returns `(value, estimated_error)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<(f64, f64), QuadError> {
    if lo == hi {
        return Ok((0.0, 0.0));
    }
    let (whole, err) = gk15(&mut f, lo, hi)?;
    let tol = cfg.abs_tol.max(cfg.rel_tol * whole.abs());
    let mut stack = vec![(lo, hi, whole, err, 0u32)];
    let mut total = 0.0;
    let mut total_err = 0.0;
    let width = hi - lo;
    while let Some((a, b, val, e, depth)) = stack.pop() {
        let share = tol * (b - a) / width;
        if e <= share.max(f64::EPSILON * val.abs()) {
            total += val;
            total_err += e;
            continue;
        }
        if depth >= cfg.max_depth {
            return Err(QuadError::NotConverged {
                lo,
                hi,
                achieved: e,
                requested: share,
            });
        }
        let mid = 0.5 * (a + b);
        let (v1, e1) = gk15(&mut f, a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, b)?;
        stack.push((a, mid, v1, e1, depth + 1));
        stack.push((mid, b, v2, e2, depth + 1));
    }
    Ok((total, total_err))
}

/// Composite trapezoid rule on an arbitrary increasing grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Trapezoid weights for an increasing grid, so that `Σ w_i y_i` is the
/// trapezoid integral.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let d = 0.5 * (x[i + 1] - x[i]);
        w[i] += d;
        w[i + 1] += d;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadConfig::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand_converges() {
        let (v, _) = integrate(|x| (30.0 * x).sin(), 0.0, std::f64::consts::PI, &QuadConfig::default()).unwrap();
        assert!(v.abs() < 1e-12);
        let (g, _) = integrate(|x| (-x * x).exp(), -8.0, 8.0, &QuadConfig::default()).unwrap();
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate(|x| 1.0 / (x - 0.5), 0.0, 1.0, &QuadConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn trapezoid_weights_match_rule() {
        let x = [0.0, 0.1, 0.4, 1.0];
        let y = [1.0, 2.0, 0.5, 3.0];
        let w = trapezoid_weights(&x);
        let s: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((s - trapezoid(&x, &y)).abs() < 1e-15);
    }
}
