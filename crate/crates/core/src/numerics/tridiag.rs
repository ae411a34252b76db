//! Symmetric tridiagonal matrices: Sturm-sequence bisection and inverse
//! iteration for the top of the spectrum, plus a plain Thomas solver.

/// Solves `A x = rhs` for tridiagonal `A` with sub-, main- and
/// super-diagonals. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = sup[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if i + 1 < n {
            c[i] = sup[i] / beta;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let mut count = 0;
        let mut d = self.diag[0] - sigma;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let prev = if d == 0.0 {
                f64::EPSILON * self.off[i - 1].abs().max(1e-300)
            } else {
                d
            };
            d = (self.diag[i] - sigma) - self.off[i - 1] * self.off[i - 1] / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Largest eigenvalue by bisection on the Sturm count, optionally
    /// started from a bracket known to contain it.
    pub fn largest_eigenvalue(&self, bracket: Option<(f64, f64)>, tol: f64) -> f64 {
        let n = self.len();
        let (glo, ghi) = self.gershgorin();
        let (mut lo, mut hi) = match bracket {
            Some((a, b)) if self.count_below(a) < n && self.count_below(b) == n => (a, b),
            _ => (glo, ghi + f64::EPSILON * ghi.abs().max(1.0)),
        };
        while hi - lo > tol * hi.abs().max(lo.abs()).max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) == n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `(A - sigma I) y = rhs`.
    pub fn shifted_solve(&self, sigma: f64, rhs: &[f64]) -> Vec<f64> {
        let mut work = vec![0.0; self.len()];
        let mut out = vec![0.0; self.len()];
        self.shifted_solve_into(sigma, rhs, &mut work, &mut out);
        out
    }

    fn shifted_solve_into(&self, sigma: f64, rhs: &[f64], c: &mut [f64], d: &mut [f64]) {
        let n = self.len();
        let mut beta = self.diag[0] - sigma;
        if n > 1 {
            c[0] = self.off[0] / beta;
        }
        d[0] = rhs[0] / beta;
        for i in 1..n {
            beta = self.diag[i] - sigma - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / beta;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
    }

    /// Eigenvector for the eigenvalue nearest `sigma`, normalized to unit
    /// Euclidean length; returns `(vector, rayleigh_quotient)`.
    pub fn inverse_iteration(&self, sigma: f64, iterations: usize) -> (Vec<f64>, f64) {
        let n = self.len();
        self.inverse_iteration_from(sigma, vec![1.0 / (n as f64).sqrt(); n], iterations)
    }

    /// As [`Self::inverse_iteration`], starting from `start`.
    pub fn inverse_iteration_from(&self, sigma: f64, start: Vec<f64>, iterations: usize) -> (Vec<f64>, f64) {
        let n = self.len();
        let mut v = start;
        let mut y = vec![0.0; n];
        let mut work = vec![0.0; n];
        // Nudge the shift off the eigenvalue so the solve stays regular.
        let shift = sigma + 1e-12 * sigma.abs().max(1.0);
        for _ in 0..iterations {
            self.shifted_solve_into(shift, &v, &mut work, &mut y);
            let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            for (a, b) in v.iter_mut().zip(&y) {
                *a = b / norm;
            }
        }
        let av = self.matvec(&v);
        let rq = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        (v, rq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![-2.0; n], vec![1.0; n - 1])
    }

    #[test]
    fn discrete_laplacian_top_eigenvalue() {
        let n = 50;
        let a = laplacian(n);
        let exact = -2.0 + 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let top = a.largest_eigenvalue(None, 1e-15);
        assert!((top - exact).abs() < 1e-13);
        let (v, rq) = a.inverse_iteration(top, 3);
        assert!((rq - exact).abs() < 1e-13);
        assert!(v.iter().all(|x| *x > 0.0) || v.iter().all(|x| *x < 0.0));
    }

    #[test]
    fn thomas_solves_system() {
        let a = laplacian(6);
        let x: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.shifted_solve(0.0, &b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
