//! Line-oriented problem configuration.
//!
//! ```text
//! [problem]
//! d = 1
//! window = 64
//!
//! [coefficients.nu]
//! mode 0 1.0 0.0
//! mode 3 0.0 -0.25
//! mode -3 0.0 0.25
//!
//! [coefficients.sigma]
//! file = sigma_modes.txt
//! tail = 1e-10
//!
//! [data.f]
//! solution = u_modes.txt
//!
//! [algorithm]
//! name = adfour
//! theta = 0.9
//! tol = 1e-10
//! ```
//!
//! Modes are coefficients `c_k` of the plain expansion `c(x) = Σ c_k e^{ik·x}`,
//! written as `mode k_1 .. k_d re im`. A `file = path` entry reads further mode
//! lines from `path`, relative to the configuration file. `[data.f]` takes
//! either modes of `f` or `solution = path` with the modes of an exact
//! solution `u`, in which case `f = A u` and `u` becomes the error reference.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::algorithms::{AlgorithmConfig, Enrichment, Problem, Reference, Variant};
use crate::error::{Error, Result};
use crate::operator::{basis_scale, CoefficientSpectrum, EllipticOperator};
use crate::spectral_core::{MultiIndex, Normalization, SpectralVector};
use crate::Complex64;

const SECTIONS: [&str; 5] =
    ["problem", "coefficients.nu", "coefficients.sigma", "data.f", "algorithm"];

#[derive(Clone, Debug, Default)]
struct Section {
    values: BTreeMap<String, (usize, String)>,
    modes: Vec<(usize, MultiIndex, Complex64)>,
    line: usize,
}

impl Section {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Config {
                line,
                message: format!("field '{key}': cannot parse '{v}'"),
            }),
        }
    }
}

/// A parsed configuration file.
#[derive(Clone, Debug)]
pub struct ProblemConfig {
    pub dim: usize,
    pub window: f64,
    pub nu: CoefficientSpectrum,
    pub sigma: CoefficientSpectrum,
    /// `H^{-1}`-normalized data.
    pub f: SpectralVector,
    pub f_tail: f64,
    /// `H^1`-normalized exact solution, when the data were manufactured from one.
    pub solution: Option<SpectralVector>,
    pub algorithm: AlgorithmConfig,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        parse_config(&text, &base)
    }

    pub fn operator(&self) -> Result<EllipticOperator> {
        EllipticOperator::new(self.nu.clone(), self.sigma.clone())
    }

    /// Operator, data and reference for [`crate::algorithms::run`].
    pub fn problem(&self) -> Result<(Problem, AlgorithmConfig)> {
        let op = self.operator()?;
        let (f, reference) = match &self.solution {
            Some(u) => (op.apply(u), Reference::Exact(u.clone())),
            None => (self.f.clone(), Reference::Ball(self.window)),
        };
        let problem = Problem::new(op, f).with_f_tail(self.f_tail);
        Ok((problem, self.algorithm.clone().with_reference(reference)))
    }
}

fn parse_mode(line_no: usize, rest: &[&str], dim: Option<usize>) -> Result<(MultiIndex, Complex64)> {
    let err = |m: String| Error::Config { line: line_no, message: m };
    if rest.len() < 3 {
        return Err(err("mode lines need 'mode k_1 .. k_d re im'".into()));
    }
    let d = rest.len() - 2;
    if let Some(dim) = dim {
        if d != dim {
            return Err(err(format!("mode has {d} index components, expected d = {dim}")));
        }
    }
    let k: Vec<i64> = rest[..d]
        .iter()
        .map(|s| s.parse().map_err(|_| err(format!("bad mode index '{s}'"))))
        .collect::<Result<_>>()?;
    let re: f64 = rest[d].parse().map_err(|_| err(format!("bad real part '{}'", rest[d])))?;
    let im: f64 = rest[d + 1].parse().map_err(|_| err(format!("bad imaginary part '{}'", rest[d + 1])))?;
    Ok((MultiIndex::new(&k), Complex64::new(re, im)))
}

/// Mode lines of a referenced file; errors point at the referencing line.
fn read_mode_file(path: &Path, line_no: usize, dim: Option<usize>) -> Result<Vec<(usize, MultiIndex, Complex64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        line: line_no,
        message: format!("cannot read '{}': {e}", path.display()),
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let rest = if words[0] == "mode" { &words[1..] } else { &words[..] };
        let (k, c) = parse_mode(line_no, rest, dim).map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                line: line_no,
                message: format!("{}:{}: {message}", path.display(), i + 1),
            },
            other => other,
        })?;
        out.push((line_no, k, c));
    }
    Ok(out)
}

pub fn parse_config(text: &str, base: &Path) -> Result<ProblemConfig> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown section [{name}] (expected one of: {})", SECTIONS.join(", ")),
                });
            }
            if sections.contains_key(name) {
                return Err(Error::Config { line: line_no, message: format!("duplicate section [{name}]") });
            }
            sections.insert(name.to_string(), Section { line: line_no, ..Section::default() });
            current = Some(name.to_string());
            continue;
        }
        let Some(sec_name) = &current else {
            return Err(Error::Config { line: line_no, message: "content before the first section".into() });
        };
        let sec = sections.get_mut(sec_name).expect("section registered");
        if let Some(rest) = line.strip_prefix("mode ") {
            let words: Vec<&str> = rest.split_whitespace().collect();
            let (k, c) = parse_mode(line_no, &words, None)?;
            sec.modes.push((line_no, k, c));
        } else if let Some((key, value)) = line.split_once('=') {
            let key = key.trim().to_string();
            if sec.values.contains_key(&key) {
                return Err(Error::Config { line: line_no, message: format!("duplicate field '{key}'") });
            }
            sec.values.insert(key, (line_no, value.trim().to_string()));
        } else {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected 'key = value' or a mode line, found '{line}'"),
            });
        }
    }

    let missing = |name: &str| Error::Config { line: 0, message: format!("missing section [{name}]") };
    let problem = sections.get("problem").ok_or_else(|| missing("problem"))?;
    let dim: usize = problem
        .number("d")?
        .ok_or_else(|| Error::Config { line: problem.line, message: "missing mandatory field 'd'".into() })?;
    if dim == 0 {
        let (line, _) = problem.get("d").expect("present");
        return Err(Error::Config { line, message: "d must be at least 1".into() });
    }
    let window: f64 = problem.number("window")?.ok_or_else(|| Error::Config {
        line: problem.line,
        message: "missing mandatory field 'window'".into(),
    })?;
    if !(window > 0.0) {
        let (line, _) = problem.get("window").expect("present");
        return Err(Error::Config { line, message: "window must be positive".into() });
    }

    let gather = |sec: &Section, key: &str| -> Result<Vec<(usize, MultiIndex, Complex64)>> {
        let mut modes = Vec::new();
        for (line, k, c) in &sec.modes {
            if k.dim() != dim {
                return Err(Error::Config {
                    line: *line,
                    message: format!("mode has {} index components, expected d = {dim}", k.dim()),
                });
            }
            modes.push((*line, k.clone(), *c));
        }
        if let Some((line, path)) = sec.get(key) {
            modes.extend(read_mode_file(&base.join(path), line, Some(dim))?);
        }
        Ok(modes)
    };
    let scale = 1.0 / basis_scale(dim);

    let mut spectra = Vec::new();
    for name in ["coefficients.nu", "coefficients.sigma"] {
        let sec = sections.get(name).ok_or_else(|| missing(name))?;
        let modes = gather(sec, "file")?;
        if modes.is_empty() {
            return Err(Error::Config { line: sec.line, message: format!("[{name}] has no modes") });
        }
        let spec = CoefficientSpectrum::new(dim, modes.into_iter().map(|(_, k, c)| (k, c * scale)))?;
        if !spec.is_hermitian() {
            return Err(Error::Config {
                line: sec.line,
                message: format!("[{name}] modes do not describe a real function (c_-k != conj(c_k))"),
            });
        }
        let tail: f64 = sec.number("tail")?.unwrap_or(0.0);
        spectra.push(spec.with_tail_bound(tail));
    }
    let sigma = spectra.pop().expect("two spectra");
    let nu = spectra.pop().expect("two spectra");

    let data = sections.get("data.f").ok_or_else(|| missing("data.f"))?;
    let f_tail: f64 = data.number("tail")?.unwrap_or(0.0);
    let (f, solution) = if let Some((line, path)) = data.get("solution") {
        if !data.modes.is_empty() || data.get("file").is_some() {
            return Err(Error::Config { line, message: "'solution' excludes explicit data modes".into() });
        }
        let modes = read_mode_file(&base.join(path), line, Some(dim))?;
        let u = SpectralVector::from_fourier(dim, Normalization::H1, modes.into_iter().map(|(_, k, c)| (k, c * scale)));
        (SpectralVector::new(dim, Normalization::HMinus1), Some(u))
    } else {
        let modes = gather(data, "file")?;
        if modes.is_empty() {
            return Err(Error::Config { line: data.line, message: "[data.f] has no modes".into() });
        }
        let f = SpectralVector::from_fourier(dim, Normalization::HMinus1, modes.into_iter().map(|(_, k, c)| (k, c * scale)));
        (f, None)
    };

    let algorithm = match sections.get("algorithm") {
        Some(sec) => parse_algorithm(sec)?,
        None => AlgorithmConfig::new(Variant::Adfour, 0.9, 1e-8),
    };
    Ok(ProblemConfig { dim, window, nu, sigma, f, f_tail, solution, algorithm })
}

fn parse_algorithm(sec: &Section) -> Result<AlgorithmConfig> {
    let variant = match sec.get("name") {
        Some((line, v)) => v.parse::<Variant>().map_err(|e| Error::Config { line, message: e.to_string() })?,
        None => Variant::Adfour,
    };
    let theta = sec.number("theta")?.unwrap_or(0.9);
    let tol = sec.number("tol")?.unwrap_or(1e-8);
    let mut cfg = AlgorithmConfig::new(variant, theta, tol);
    cfg.gamma = sec.number("gamma")?;
    if let Some(m) = sec.number("max_iter")? {
        cfg.max_iter = m;
    }
    if let Some(m) = sec.number("max_inner")? {
        cfg.max_inner = m;
    }
    if let Some((line, v)) = sec.get("J") {
        cfg.enrichment = if v == "auto" {
            Enrichment::Auto
        } else {
            Enrichment::Fixed(v.parse().map_err(|_| Error::Config {
                line,
                message: format!("field 'J': expected 'auto' or a nonnegative integer, found '{v}'"),
            })?)
        };
    }
    for key in sec.values.keys() {
        if !["name", "theta", "tol", "gamma", "max_iter", "max_inner", "J"].contains(&key.as_str()) {
            let (line, _) = sec.get(key).expect("present");
            return Err(Error::Config { line, message: format!("unknown field '{key}' in [algorithm]") });
        }
    }
    Ok(cfg)
}
