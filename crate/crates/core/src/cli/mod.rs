//! The `edwards` command line: one subcommand per computation, CSV (or
//! JSON) on standard output or written atomically to `--output`.
//!
//! Exit status is 0 on success, 1 when a validation suite reports
//! `|z| > 4` or a computation fails, and 2 for usage and config errors.

pub mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::besselsim::{oracle_suite, Scheme, SimConfig, Suite};
use crate::constants::{self, ModelConstants};
use crate::edwardsmc::{scaling_collapse, PolymerConfig, WeightedPaths};
use crate::rate::Rate;
use crate::spectral;
use crate::sturm::{self, HMax, SolverConfig};
use crate::{airy, Error};

pub use output::{Cell, Table};

/// z-scores beyond this mark a validation failure.
pub const Z_FAIL: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "edwards",
    about = "Critical constants, rate functions and Monte Carlo checks for the 1d Edwards model",
    disable_version_flag = true
)]
struct Cli {
    /// Flat `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write to PATH (via a temporary file and rename) instead of stdout.
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Print version and fingerprints.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Coarsest grid size of the eigenvalue solver.
    #[arg(long, default_value_t = 500)]
    grid: usize,
    /// Truncation point of the half-line (default: chosen from a).
    #[arg(long)]
    h_max: Option<f64>,
    /// Grid levels fed to the extrapolation.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, Error> {
        let cfg = SolverConfig {
            n: self.grid,
            h_max: self.h_max.map_or(HMax::Auto, HMax::Fixed),
            refine_levels: self.levels,
            tol: self.tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct PolymerArgs {
    #[arg(long = "T", default_value_t = 8.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0025)]
    dt: f64,
    #[arg(long, default_value_t = 0.05)]
    bin: f64,
    /// Number of paths.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Drift b of the ±b mixture proposal.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
}

impl PolymerArgs {
    fn config(&self) -> Result<PolymerConfig, Error> {
        let cfg = PolymerConfig {
            t: self.t,
            beta: self.beta,
            dt: self.dt,
            bin: self.bin,
            n_paths: self.n,
            seed: self.seed,
            drift: self.drift,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Zeros a_k of Ai and the slopes Ai'(a_k).
    AiryZeros {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Principal eigenvalue ρ(a) with its derivatives and residual.
    Eigen {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// The six critical constants.
    Constants {
        /// Shorthand for --format json.
        #[arg(long)]
        json: bool,
        /// CSV cache file for the constants, keyed by solver fingerprint.
        #[arg(long, value_name = "PATH")]
        cache: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Rate function I(b) on a grid, with its branch.
    RateCurve {
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        bmin: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 3.0)]
        bmax: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Add the column for strength beta.
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Moment generating function Λ⁺(μ) on a grid.
    MgfCurve {
        #[arg(long, allow_negative_numbers = true, default_value_t = -1.0)]
        mumin: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 3.0)]
        mumax: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// w(h, t) from the eigen-expansion, with its tail bound.
    WProfile {
        #[arg(long = "t", default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        hmin: f64,
        #[arg(long, default_value_t = 4.0)]
        hmax: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = spectral::DEFAULT_TERMS)]
        terms: usize,
    },
    /// Eigenvalues and expansion coefficients of w.
    WCoeffs {
        #[arg(long, default_value_t = 20)]
        terms: usize,
    },
    /// Monte Carlo oracle suite for the squared Bessel simulators.
    BesqValidate {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_parser = parse_scheme, default_value = "euler_abs")]
        scheme: Scheme,
    },
    /// Direct polymer Monte Carlo at one (T, β).
    Polymer {
        #[command(flatten)]
        polymer: PolymerArgs,
        /// Also report the finite-T moment generating function at μ.
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
    },
    /// Brownian scaling collapse across β at a common β^{2/3}T.
    Collapse {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        betas: Vec<f64>,
        #[command(flatten)]
        polymer: PolymerArgs,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: crate::besselsim::SimError| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: crate::besselsim::SimError| e.to_string())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn version_text() -> String {
    let cmd = Cli::command();
    let mut signature = format!("edwards {}", env!("CARGO_PKG_VERSION"));
    for sub in cmd.get_subcommands() {
        signature.push(' ');
        signature.push_str(sub.get_name());
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                signature.push_str(" --");
                signature.push_str(long);
            }
        }
    }
    format!(
        "edwards {}\nartifact fingerprint: {:016x}\nconstants cache fingerprint: {:016x}\n",
        env!("CARGO_PKG_VERSION"),
        fnv1a(signature.as_bytes()),
        constants::fingerprint(&SolverConfig::default()),
    )
}

struct Outcome {
    table: Table,
    failed: bool,
}

fn ok(table: Table) -> Result<Outcome, Error> {
    Ok(Outcome { table, failed: false })
}

fn constants_table(k: &ModelConstants) -> Table {
    let mut t = Table::new(&ModelConstants::names());
    t.push(k.values().iter().map(|&v| Cell::Num(v)).collect());
    t
}

fn execute(command: Command) -> Result<Outcome, Error> {
    match command {
        Command::AiryZeros { count } => {
            let zeros = airy::airy_zeros(count)?;
            let mut t = Table::new(&["k", "zero", "slope"]);
            for (k, (z, s)) in zeros.zeros.iter().zip(&zeros.slopes).enumerate() {
                t.push(vec![Cell::Int(k as i64), Cell::Num(*z), Cell::Num(*s)]);
            }
            ok(t)
        }
        Command::Eigen { a, solver } => {
            let cfg = solver.config()?;
            let eigen = sturm::principal_eigen(a, &cfg)?;
            let (d1, d2) = sturm::rho_derivative(a, &cfg)?;
            let mut t = Table::new(&["a", "rho", "rho_prime", "rho_second", "residual", "h_max"]);
            t.push(
                [a, eigen.rho, d1, d2, eigen.residual(), eigen.h_max]
                    .into_iter()
                    .map(Cell::Num)
                    .collect(),
            );
            ok(t)
        }
        Command::Constants { cache, solver, .. } => {
            let cfg = solver.config()?;
            let k = match cache {
                Some(path) => constants::cached_constants(&cfg, &path)?,
                None => constants::constants(&cfg)?,
            };
            ok(constants_table(&k))
        }
        Command::RateCurve {
            bmin,
            bmax,
            step,
            beta,
            solver,
        } => {
            if let Some(b) = beta {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::Usage(format!("--beta must be positive, got {b}")));
                }
            }
            let rate = Rate::new(solver.config()?)?;
            let curve = rate.rate_curve(bmin, bmax, step)?;
            let mut header = vec!["b", "rate", "derivative", "branch", "a_b"];
            if beta.is_some() {
                header.push("rate_beta");
            }
            let mut t = Table::new(&header);
            for p in &curve.points {
                let mut row = vec![
                    Cell::Num(p.b),
                    Cell::Num(p.value),
                    Cell::Num(p.derivative),
                    Cell::Text(p.branch.as_str().into()),
                    Cell::Num(p.a_b),
                ];
                if let Some(b) = beta {
                    row.push(Cell::Num(rate.beta_scaled(b, p.b)?.value));
                }
                t.push(row);
            }
            ok(t)
        }
        Command::MgfCurve {
            mumin,
            mumax,
            step,
            solver,
        } => {
            let rate = Rate::new(solver.config()?)?;
            let mut t = Table::new(&["mu", "value", "slope", "branch"]);
            for p in rate.mgf_curve(mumin, mumax, step)? {
                t.push(vec![
                    Cell::Num(p.mu),
                    Cell::Num(p.value),
                    Cell::Num(p.slope),
                    Cell::Text(p.branch.as_str().into()),
                ]);
            }
            ok(t)
        }
        Command::WProfile {
            t: time,
            hmin,
            hmax,
            step,
            terms,
        } => {
            let exp = spectral::w_coefficients(terms)?;
            if !(time >= exp.t_min) {
                return Err(Error::Usage(format!(
                    "--t {time} is below t_min = {:.4} for {terms} terms",
                    exp.t_min
                )));
            }
            let hs = crate::rate::grid(hmin, hmax, step).map_err(|e| Error::Usage(e.to_string()))?;
            let mut t = Table::new(&["h", "t", "w", "tail_bound"]);
            for h in hs {
                let v = spectral::w_eval(h, time, &exp)?;
                t.push(vec![
                    Cell::Num(h),
                    Cell::Num(time),
                    Cell::Num(v.value),
                    Cell::Num(v.tail_bound),
                ]);
            }
            ok(t)
        }
        Command::WCoeffs { terms } => {
            let exp = spectral::w_coefficients(terms)?;
            let mut t = Table::new(&["k", "eigenvalue", "gamma"]);
            for k in 0..exp.terms() {
                t.push(vec![
                    Cell::Int(k as i64),
                    Cell::Num(exp.eigenvalue(k)),
                    Cell::Num(exp.gamma[k]),
                ]);
            }
            ok(t)
        }
        Command::BesqValidate {
            suite,
            n,
            dt,
            seed,
            scheme,
        } => {
            let cfg = SimConfig {
                dt,
                n_paths: n,
                seed,
                scheme,
            };
            cfg.validate()?;
            let rows = oracle_suite(suite, &cfg)?;
            let mut t = Table::new(&["check", "estimate", "target", "se", "z"]);
            let failed = rows.iter().any(|r| !(r.z.abs() <= Z_FAIL));
            for r in rows {
                t.push(vec![
                    Cell::Text(r.check),
                    Cell::Num(r.estimate),
                    Cell::Num(r.target),
                    Cell::Num(r.se),
                    Cell::Num(r.z),
                ]);
            }
            Ok(Outcome { table: t, failed })
        }
        Command::Polymer { polymer, mu } => {
            let cfg = polymer.config()?;
            let paths = WeightedPaths::new(&cfg)?;
            let e = paths.estimate()?;
            let mut header = vec![
                "T",
                "beta",
                "dt",
                "bin",
                "n",
                "seed",
                "log_z",
                "log_z_se",
                "rate_at_t",
                "rate_se",
                "endpoint_mean",
                "endpoint_mean_se",
                "endpoint_sd",
                "endpoint_sd_se",
                "ess",
            ];
            let mut row = vec![
                Cell::Num(cfg.t),
                Cell::Num(cfg.beta),
                Cell::Num(cfg.dt),
                Cell::Num(cfg.bin),
                Cell::Int(cfg.n_paths as i64),
                Cell::Int(cfg.seed as i64),
            ];
            row.extend(
                [
                    e.log_z,
                    e.log_z_se,
                    e.rate_at_t,
                    e.rate_se,
                    e.endpoint_mean,
                    e.endpoint_mean_se,
                    e.endpoint_sd,
                    e.endpoint_sd_se,
                    e.ess,
                ]
                .map(Cell::Num),
            );
            if let Some(mu) = mu {
                let m = paths.mgf(mu)?;
                header.extend(["mu", "mgf", "mgf_se"]);
                row.extend([Cell::Num(mu), Cell::Num(m.mean), Cell::Num(m.se)]);
            }
            let mut t = Table::new(&header);
            t.push(row);
            ok(t)
        }
        Command::Collapse { betas, polymer } => {
            let cfg = polymer.config()?;
            let report = scaling_collapse(&betas, &cfg)?;
            let mut t = Table::new(&[
                "beta",
                "T",
                "log_z",
                "log_z_se",
                "endpoint_mean",
                "endpoint_mean_se",
                "z_log_z",
                "z_endpoint",
                "exponent",
            ]);
            for r in &report.rows {
                let e = &r.estimate;
                t.push(
                    [
                        r.beta,
                        r.t,
                        e.log_z,
                        e.log_z_se,
                        e.endpoint_mean,
                        e.endpoint_mean_se,
                        r.z_log_z,
                        r.z_endpoint,
                        report.exponent,
                    ]
                    .map(Cell::Num)
                    .to_vec(),
                );
            }
            Ok(Outcome {
                table: t,
                failed: !(report.max_abs_z() <= Z_FAIL),
            })
        }
    }
}

fn known_args(name: &str) -> config::KnownArgs {
    let mut known = config::KnownArgs::default();
    let cmd = Cli::command();
    for arg in cmd
        .get_arguments()
        .chain(cmd.find_subcommand(name).into_iter().flat_map(|s| s.get_arguments()))
    {
        let Some(long) = arg.get_long() else { continue };
        if matches!(long, "help" | "version" | "config") {
            continue;
        }
        if arg.get_action().takes_values() {
            known.options.insert(long.to_string());
        } else {
            known.switches.insert(long.to_string());
        }
    }
    known
}

fn parse(argv: &[OsString]) -> Result<Cli, clap::Error> {
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

/// Index of the subcommand token: the first bare word not consumed as the
/// value of a top-level option.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy();
        if matches!(tok.as_ref(), "--config" | "--output" | "-o" | "--format") {
            i += 2;
            continue;
        }
        if !tok.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn write_output(text: &str, path: Option<&Path>) -> Result<(), Error> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    match path {
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(io(Path::new("<stdout>")))
        }
        Some(path) => {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
            std::fs::write(&tmp, text).map_err(io(&tmp))?;
            std::fs::rename(&tmp, path).map_err(|e| {
                let _ = std::fs::remove_file(&tmp);
                io(path)(e)
            })
        }
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    if err.is_usage() {
        2
    } else {
        1
    }
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = match parse(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if first.version {
        print!("{}", version_text());
        return 0;
    }
    let Some(command) = first.command else {
        eprintln!("error: a subcommand is required\n\n{}", Cli::command().render_help());
        return 2;
    };

    let cli = if first.config.is_some() || std::env::var_os(config::SEED_ENV).is_some() {
        let idx = subcommand_index(&argv).expect("parsed a subcommand");
        let name = argv[idx].to_string_lossy().into_owned();
        let entries = match &first.config {
            Some(path) => match config::load(path) {
                Ok(e) => e,
                Err(e) => return fail(&e),
            },
            None => Vec::new(),
        };
        let env_seed = std::env::var(config::SEED_ENV).ok();
        let origin = first.config.clone().unwrap_or_default();
        let injected = match config::injected_flags(&entries, &known_args(&name), env_seed, &origin) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        let mut merged = vec![argv[0].clone(), argv[idx].clone()];
        merged.extend(injected);
        merged.extend(
            argv.iter()
                .enumerate()
                .skip(1)
                .filter(|(i, _)| *i != idx)
                .map(|(_, a)| a.clone()),
        );
        match parse(&merged) {
            Ok(cli) => cli,
            Err(e) => {
                eprintln!("error: invalid value from {} or the config file", config::SEED_ENV);
                let _ = e.print();
                return 2;
            }
        }
    } else {
        Cli {
            command: Some(command),
            ..first
        }
    };

    let format = match &cli.command {
        Some(Command::Constants { json: true, .. }) => Format::Json,
        _ => cli.format,
    };
    let outcome = match execute(cli.command.expect("subcommand present")) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let text = match format {
        Format::Csv => outcome.table.to_csv(),
        Format::Json => outcome.table.to_json(),
    };
    if let Err(e) = write_output(&text, cli.output.as_deref()) {
        return fail(&e);
    }
    if outcome.failed {
        eprintln!("validation failed: |z| > {Z_FAIL}");
        1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn finds_the_subcommand_after_global_options() {
        assert_eq!(
            subcommand_index(&os(&["e", "--output", "x", "polymer", "--T", "2"])),
            Some(3)
        );
        assert_eq!(subcommand_index(&os(&["e", "--format=json", "constants"])), Some(2));
        assert_eq!(subcommand_index(&os(&["e", "--version"])), None);
    }

    #[test]
    fn repeated_flags_keep_the_last_value() {
        let cli = parse(&os(&["e", "polymer", "--seed", "3", "--seed", "4"])).unwrap();
        match cli.command {
            Some(Command::Polymer { polymer, .. }) => assert_eq!(polymer.seed, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn known_args_cover_globals_and_switches() {
        let k = known_args("constants");
        assert!(k.switches.contains("json"));
        assert!(k.options.contains("grid") && k.options.contains("format"));
        assert!(!k.options.contains("config"));
        assert!(known_args("polymer").options.contains("T"));
    }

    #[test]
    fn version_lists_both_fingerprints() {
        let v = version_text();
        assert!(v.contains("artifact fingerprint: ") && v.contains("constants cache fingerprint: "));
        assert_eq!(v, version_text());
    }
}
