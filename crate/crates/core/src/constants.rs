//! The six critical numbers of the model, computed from the principal
//! eigenvalue curve and the largest Airy zero.
//!
//! Results are memoized in-process and optionally in a small CSV cache file
//! (`fingerprint,a_star,b_star,c_star,a_dstar,b_dstar,rho_a_dstar,tol`, one
//! row per solver configuration), rewritten atomically through a temporary
//! file and a rename.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::airy::{self, AiryError};
use crate::numerics::{brent, RootError};
use crate::sturm::{self, HMax, SolverConfig, SturmError};

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error(transparent)]
    Sturm(#[from] SturmError),
    #[error(transparent)]
    Airy(#[from] AiryError),
    #[error("root of the eigenvalue curve: {0}")]
    Root(#[from] RootError),
    #[error("eigenvalue curve has no sign change on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },
    #[error("constants cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub a_star: f64,
    pub b_star: f64,
    pub c_star: f64,
    pub a_dstar: f64,
    pub b_dstar: f64,
    pub rho_a_dstar: f64,
    /// Absolute tolerance of the root `a_star` and of the eigenvalues.
    pub tol: f64,
}

pub const CSV_HEADER: &str = "a_star,b_star,c_star,a_dstar,b_dstar,rho_a_dstar";
const CACHE_HEADER: &str = "fingerprint,a_star,b_star,c_star,a_dstar,b_dstar,rho_a_dstar,tol";

impl ModelConstants {
    pub fn values(&self) -> [f64; 6] {
        [
            self.a_star,
            self.b_star,
            self.c_star,
            self.a_dstar,
            self.b_dstar,
            self.rho_a_dstar,
        ]
    }

    pub fn names() -> [&'static str; 6] {
        ["a_star", "b_star", "c_star", "a_dstar", "b_dstar", "rho_a_dstar"]
    }
}

const ROOT_TOL: f64 = 1e-10;

pub fn compute_constants(cfg: &SolverConfig) -> Result<ModelConstants, ConstantsError> {
    cfg.validate()?;
    let f = |a: f64| sturm::rho(a, cfg);
    let (mut lo, mut hi) = (1.0, 3.0);
    let mut expansions = 0;
    while f(lo)? > 0.0 || f(hi)? < 0.0 {
        expansions += 1;
        if expansions > 6 {
            return Err(ConstantsError::NotBracketed { lo, hi });
        }
        lo -= 1.0;
        hi += 1.0;
    }
    let a_star = brent(f, lo, hi, ROOT_TOL)?;
    let (rho1, rho2) = sturm::rho_derivative(a_star, cfg)?;
    let a_dstar = -airy::first_zero() / airy::SCALE;
    let (rho_a_dstar, rho1_dstar) = sturm::rho_and_slope(a_dstar, cfg)?;
    Ok(ModelConstants {
        a_star,
        b_star: 1.0 / rho1,
        c_star: (rho2 / rho1.powi(3)).sqrt(),
        a_dstar,
        b_dstar: 1.0 / rho1_dstar,
        rho_a_dstar,
        tol: ROOT_TOL.max(cfg.tol),
    })
}

/// FNV-1a fingerprint of everything the constants depend on.
pub fn fingerprint(cfg: &SolverConfig) -> u64 {
    let h_max = match cfg.h_max {
        HMax::Auto => "auto".to_string(),
        HMax::Fixed(h) => format!("{h:e}"),
    };
    let text = format!(
        "edwards-{};n={};h_max={};levels={};tol={:e}",
        env!("CARGO_PKG_VERSION"),
        cfg.n,
        h_max,
        cfg.refine_levels,
        cfg.tol
    );
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Memoized [`compute_constants`] for the lifetime of the process.
pub fn constants(cfg: &SolverConfig) -> Result<ModelConstants, ConstantsError> {
    static MEMO: OnceLock<Mutex<HashMap<u64, ModelConstants>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    let key = fingerprint(cfg);
    if let Some(c) = memo.lock().unwrap().get(&key) {
        return Ok(*c);
    }
    let c = compute_constants(cfg)?;
    Ok(*memo.lock().unwrap().entry(key).or_insert(c))
}

fn cache_error(path: &Path, message: impl ToString) -> ConstantsError {
    ConstantsError::Cache {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read_cache(path: &Path) -> Result<Vec<(u64, ModelConstants)>, ConstantsError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(cache_error(path, e)),
    };
    let mut lines = text.lines();
    if lines.next() != Some(CACHE_HEADER) {
        return Err(cache_error(path, "unexpected header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(cache_error(path, format!("malformed row `{line}`")));
            }
            let fp = u64::from_str_radix(fields[0], 16).map_err(|e| cache_error(path, e))?;
            let v: Vec<f64> = fields[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| cache_error(path, e)))
                .collect::<Result<_, _>>()?;
            Ok((
                fp,
                ModelConstants {
                    a_star: v[0],
                    b_star: v[1],
                    c_star: v[2],
                    a_dstar: v[3],
                    b_dstar: v[4],
                    rho_a_dstar: v[5],
                    tol: v[6],
                },
            ))
        })
        .collect()
}

/// Writes `contents` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Constants for `cfg`, served from the cache file at `path` when present
/// and added to it otherwise.
pub fn cached_constants(cfg: &SolverConfig, path: &Path) -> Result<ModelConstants, ConstantsError> {
    let fp = fingerprint(cfg);
    let mut rows = read_cache(path)?;
    if let Some((_, c)) = rows.iter().find(|(f, _)| *f == fp) {
        return Ok(*c);
    }
    let c = constants(cfg)?;
    rows.push((fp, c));
    let mut text = String::from(CACHE_HEADER);
    text.push('\n');
    for (f, c) in &rows {
        text.push_str(&format!("{f:016x}"));
        for v in c.values().iter().chain([c.tol].iter()) {
            text.push_str(&format!(",{v:.16e}"));
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes()).map_err(|e| cache_error(path, e))?;
    Ok(c)
}

/// Fingerprint of the cache file contents (FNV-1a), or `None` if absent.
pub fn cache_file_fingerprint(path: &Path) -> Option<u64> {
    let bytes = fs::read(path).ok()?;
    Some(bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    }))
}

/// Default location of the cache file: `$EDWARDS_CACHE` or the system
/// temporary directory.
pub fn default_cache_path() -> PathBuf {
    std::env::var_os("EDWARDS_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("edwards-constants.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c() -> ModelConstants {
        constants(&SolverConfig::default()).unwrap()
    }

    #[test]
    fn published_two_decimal_values() {
        let k = c();
        let expected = [2.19, 1.11, 0.63, 2.95, 0.85, 0.78];
        for ((v, e), name) in k.values().iter().zip(expected).zip(ModelConstants::names()) {
            assert!((v - e).abs() <= 0.01, "{name} = {v}");
        }
    }

    #[test]
    fn ordering_chain() {
        let k = c();
        assert!(k.a_star < k.a_dstar);
        assert!(0.0 < k.b_dstar && k.b_dstar < k.b_star);
        assert!(k.rho_a_dstar > 0.0);
    }

    #[test]
    fn a_dstar_is_scaled_airy_zero() {
        let k = c();
        assert!((k.a_dstar - 2f64.cbrt() * 2.338_107_410_459_767).abs() < 1e-12);
    }

    #[test]
    fn root_survives_finer_grid() {
        let k = c();
        let fine = SolverConfig {
            n: 2000,
            ..SolverConfig::default()
        };
        assert!(sturm::rho(k.a_star, &fine).unwrap().abs() <= 10.0 * k.tol);
    }

    #[test]
    fn c_star_identity() {
        let k = c();
        let (r1, r2) = sturm::rho_derivative(k.a_star, &SolverConfig::default()).unwrap();
        assert!((k.c_star.powi(2) * r1.powi(3) - r2).abs() <= 1e-8);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("constants.csv");
        let cfg = SolverConfig::default();
        let first = cached_constants(&cfg, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CACHE_HEADER));
        let second = cached_constants(&cfg, &path).unwrap();
        assert_eq!(first.values(), second.values());
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
        let leftovers = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
