//! End-to-end acceptance run: one PASS/FAIL line per criterion. Exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use edwards::airy::{airy_zeros, eigenbasis};
use edwards::besselsim::{oracle_suite, Scheme, SimConfig, Suite};
use edwards::constants::compute_constants;
use edwards::edwardsmc::{extrapolate_inverse_t, sample_polymer, scaling_collapse, PolymerConfig, WeightedPaths};
use edwards::numerics::QuadConfig;
use edwards::rate::{grid, Rate};
use edwards::spectral::{self, green_apply, heat_evolve, l2_norm, reconstruct_y, y_kernel, HeatSolver};
use edwards::sturm::{self, principal_eigen, rho, rho_derivative, SolverConfig};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn airy_zero() -> Check {
    let start = Instant::now();
    let a0 = airy_zeros(1)?.zeros[0];
    let secs = start.elapsed().as_secs_f64();
    Ok((
        within(a0, -2.3381, 5e-4) && secs < 1.0,
        format!("a_0 = {a0:.7}, {secs:.3} s"),
    ))
}

fn critical_constants() -> Check {
    let start = Instant::now();
    let k = compute_constants(&SolverConfig::default())?;
    let secs = start.elapsed().as_secs_f64();
    let targets = [2.19, 1.11, 0.63, 2.95, 0.85, 0.78];
    let ok = k.values().iter().zip(targets).all(|(v, t)| within(*v, t, 0.01)) && secs < 30.0;
    let shown: Vec<String> = k
        .values()
        .iter()
        .zip(edwards::constants::ModelConstants::names())
        .map(|(v, n)| format!("{n} = {v:.6}"))
        .collect();
    Ok((ok, format!("{}, {secs:.1} s", shown.join(", "))))
}

fn eigen_identities() -> Check {
    let cfg = SolverConfig::default();
    let mut worst_hf: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for a in [0.0, 2.0] {
        let (r1, _) = rho_derivative(a, &cfg)?;
        let step = 1e-3;
        let fd = (rho(a + step, &cfg)? - rho(a - step, &cfg)?) / (2.0 * step);
        worst_hf = worst_hf.max((r1 - fd).abs() / fd.abs());
        worst_res = worst_res.max(principal_eigen(a, &cfg)?.residual());
    }
    let deep = rho(-1e4, &cfg)?;
    let rel = (deep / -141.42 - 1.0).abs();
    Ok((
        worst_hf <= 1e-5 && worst_res <= 1e-6 && rel <= 1e-3,
        format!("derivative gap {worst_hf:.2e}, residual {worst_res:.2e}, rho(-1e4) = {deep:.4}"),
    ))
}

fn rate_shape() -> Check {
    let r = Rate::new(SolverConfig::default())?;
    let k = r.constants;
    let at_min = r.rate_i(k.b_star)?.value;
    let at_zero = r.rate_i(0.0)?;
    let exact_slope = at_zero.derivative == -k.rho_a_dstar;
    let (_, limit) = r.convex_slope_limit(1e-3)?;
    let h = 1e-2;
    let f = |b: f64| r.rate_i(b).map(|p| p.value);
    let second = (f(k.b_star + h)? - 2.0 * f(k.b_star)? + f(k.b_star - h)?) / (h * h);
    let curv = second * k.c_star * k.c_star - 1.0;
    let tail = f(10.0)? - 50.0;
    let ok = within(at_min, k.a_star, 2e-3)
        && within(at_zero.value, k.a_dstar, 2e-3)
        && exact_slope
        && within(limit, -k.rho_a_dstar, 1e-4)
        && curv.abs() <= 0.02
        && tail.abs() <= 0.2;
    Ok((
        ok,
        format!(
            "I(b*) - a* = {:.1e}, I(0) - a** = {:.1e}, slope gap {:.1e}, curvature {:+.2}%, I(10) - 50 = {tail:.3}",
            at_min - k.a_star,
            at_zero.value - k.a_dstar,
            limit + k.rho_a_dstar,
            100.0 * curv
        ),
    ))
}

fn legendre() -> Check {
    let r = Rate::new(SolverConfig::default())?;
    let k = r.constants;
    let bs = [0.0, 0.5, k.b_dstar, 1.0, k.b_star, 2.0, 3.0];
    let mus = grid(-k.rho_a_dstar - 1.0, 6.0, 0.05)?;
    let gap = r.legendre_check(&bs, &mus)?.max_gap();
    let inv = r.involution_gap(&grid(-k.rho_a_dstar + 0.1, 5.0, 0.25)?)?;
    Ok((
        gap <= 1e-5 && inv <= 1e-5,
        format!("max gap {gap:.2e}, involution {inv:.2e}"),
    ))
}

fn spectral_suite() -> Check {
    let q = QuadConfig::default();
    let basis = eigenbasis(50, &q)?;
    let mut gram: f64 = 0.0;
    for j in 0..basis.len() {
        for k in j..basis.len() {
            let target = if j == k { 1.0 } else { 0.0 };
            gram = gram.max((basis[j].inner(&basis[k], &q)? - target).abs());
        }
    }

    let g = sturm::uniform_grid(30.0, 6000);
    let mut green: f64 = 0.0;
    for e in &basis[..3] {
        let f: Vec<f64> = g.iter().map(|&h| e.eval(h)).collect();
        let gf = green_apply(&g, &f)?;
        let d: Vec<f64> = gf.iter().zip(&f).map(|(x, y)| x - y / e.a_scaled).collect();
        green = green.max(l2_norm(&g, &d));
    }

    let exp = spectral::w_coefficients(spectral::DEFAULT_TERMS)?;
    let mut laplace: f64 = 0.0;
    for a in [0.0, 1.0, 2.0] {
        for h in [0.5, 1.0, 2.0] {
            laplace = laplace.max((reconstruct_y(a, h, &exp)? - y_kernel(a, h)?).abs());
        }
    }

    let solver = HeatSolver::graded(16.0, 2000)?;
    let hg = solver.grid().to_vec();
    let profile = |t: f64| -> Result<Vec<f64>, spectral::SpectralError> {
        hg.iter()
            .map(|&h| spectral::w_eval(h, t, &exp).map(|v| v.value))
            .collect()
    };
    let evolved = heat_evolve(&hg, &profile(1.0)?, (1.0, 2.0), 1000)?;
    let d: Vec<f64> = evolved.iter().zip(profile(2.0)?).map(|(x, y)| x - y).collect();
    let semigroup = l2_norm(&hg, &d);

    Ok((
        gram <= 1e-6 && green <= 1e-4 && laplace <= 1e-3 && semigroup <= 1e-3,
        format!("Gram {gram:.1e}, Green {green:.1e}, Laplace {laplace:.1e}, semigroup {semigroup:.1e}"),
    ))
}

fn sim_config(seed: u64) -> SimConfig {
    SimConfig {
        dt: 1e-3,
        n_paths: 100_000,
        seed,
        scheme: Scheme::EulerAbs,
    }
}

fn stochastic_oracles() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for suite in Suite::ALL {
        for check in oracle_suite(suite, &sim_config(1))? {
            worst = worst.max(check.z.abs());
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 3.0 && secs <= 300.0,
        format!("{count} checks, max |z| = {worst:.2}, {secs:.1} s"),
    ))
}

fn polymer(t: f64) -> PolymerConfig {
    PolymerConfig {
        t,
        ..PolymerConfig::default()
    }
}

fn edwards_mc(a_star: f64, b_star: f64) -> Check {
    let start = Instant::now();
    let free = sample_polymer(&PolymerConfig {
        beta: 0.0,
        n_paths: 1000,
        ..polymer(4.0)
    })?;
    let free_ok = free.log_z == 0.0;

    let collapse = scaling_collapse(&[0.5, 1.0, 2.0], &polymer(6.0))?;
    let collapse_z = collapse.max_abs_z();

    let ts = [4.0, 6.0, 8.0];
    let mut rates = Vec::new();
    let mut last = None;
    for &t in &ts {
        let paths = WeightedPaths::new(&polymer(t))?;
        rates.push(paths.estimate()?.rate_at_t);
        last = Some(paths);
    }
    let (rate_limit, _) = extrapolate_inverse_t(&ts, &rates);
    let at8 = last.expect("three horizons");
    let est = at8.estimate()?;
    let endpoint_rel = est.endpoint_mean / b_star - 1.0;
    let signed = at8.expect(|x| x);
    let sym_z = signed.mean / signed.se;
    let secs = start.elapsed().as_secs_f64();

    let ok = free_ok
        && collapse_z <= 3.0
        && within(rate_limit, a_star, 0.3)
        && endpoint_rel.abs() <= 0.15
        && sym_z.abs() <= 3.0
        && secs <= 600.0;
    Ok((
        ok,
        format!(
            "free log Z = {}, collapse max |z| = {collapse_z:.2}, rate limit {rate_limit:.4} (a* {a_star:.4}), \
             endpoint mean/T at T = 8 {:.4} ({:+.1}% from b*), symmetry z = {sym_z:.2}, {secs:.1} s",
            free.log_z,
            est.endpoint_mean,
            100.0 * endpoint_rel
        ),
    ))
}

fn determinism() -> Check {
    let cfg = PolymerConfig {
        n_paths: 20_000,
        ..polymer(4.0)
    };
    let bits = |w: &WeightedPaths| w.log_weights.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let same_polymer = bits(&WeightedPaths::new(&cfg)?) == bits(&WeightedPaths::new(&cfg)?);
    let collapse_cfg = PolymerConfig {
        n_paths: 5000,
        ..polymer(2.0)
    };
    let same_collapse = scaling_collapse(&[0.5, 2.0], &collapse_cfg)? == scaling_collapse(&[0.5, 2.0], &collapse_cfg)?;
    let small = SimConfig {
        n_paths: 20_000,
        ..sim_config(7)
    };
    let mut same_oracles = true;
    for suite in Suite::ALL {
        let a = oracle_suite(suite, &small)?;
        let b = oracle_suite(suite, &small)?;
        same_oracles &= a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.estimate.to_bits() == y.estimate.to_bits());
    }
    Ok((
        same_polymer && same_collapse && same_oracles,
        format!(
            "polymer {same_polymer}, collapse {same_collapse}, oracles {same_oracles}, {} threads",
            rayon::current_num_threads()
        ),
    ))
}

fn main() -> ExitCode {
    let reference = compute_constants(&SolverConfig::default()).ok();
    let (a_star, b_star) = reference.map_or((f64::NAN, f64::NAN), |k| (k.a_star, k.b_star));
    let criteria: [(&str, Box<dyn Fn() -> Check>); 9] = [
        ("Airy zero", Box::new(airy_zero)),
        ("critical constants", Box::new(critical_constants)),
        ("eigen identities", Box::new(eigen_identities)),
        ("rate function shape", Box::new(rate_shape)),
        ("Legendre duality", Box::new(legendre)),
        ("spectral suite", Box::new(spectral_suite)),
        ("stochastic oracles", Box::new(stochastic_oracles)),
        ("Edwards Monte Carlo", Box::new(move || edwards_mc(a_star, b_star))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({detail})",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
