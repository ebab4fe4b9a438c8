use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::ProblemConfig;
use super::facts::Params;
use super::fixtures::fixture;
use crate::algorithms::{inner_iteration_bound, run, RunTrace, Variant};
use crate::error::{Error, Result};
use crate::operator::{
    certify_decay, hermitian_norm, inverse_decay_rate, EllipticOperator, InverseDecay, TruncationModel,
};
use crate::sparsity::{fit_class, ClassKind};
use crate::spectral_core::{MultiIndex, SpectralVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FACT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "fgal", version, about = "Adaptive Fourier-Galerkin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an adaptive algorithm on a configured problem.
    Solve {
        config: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        algorithm: Option<Variant>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// CSV destination; the bound-check report goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a fixture and verify its facts. Parameters follow as `--key value`.
    Fixture {
        name: String,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        params: Vec<String>,
    },
    /// Fit an approximation class to a vector file.
    FitClass {
        vector: PathBuf,
        #[arg(long)]
        kind: ClassKind,
    },
    /// Decay certificate, truncation table and inverse decay rate of a configured operator.
    MatrixProbe {
        config: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long = "J-max", alias = "j-max", default_value_t = 20)]
        j_max: usize,
    },
    /// Run the configured problem for several θ, one CSV each.
    SweepTheta {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        thetas: Vec<f64>,
        #[arg(long)]
        algorithm: Option<Variant>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::Io(_) => EXIT_CONFIG,
        Error::Domain(_) | Error::UnknownFixture { .. } => EXIT_USAGE,
        Error::InsufficientData { .. }
        | Error::NonCoercive { .. }
        | Error::Indefinite { .. }
        | Error::NotConverged { .. }
        | Error::NoValidRadius(_) => EXIT_NUMERICAL,
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit status.
pub fn cli<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(parsed.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Solve { config, theta, tol, algorithm, gamma, max_iter, out: dest } => {
            let cfg = ProblemConfig::load(&config)?;
            let (problem, mut ac) = cfg.problem()?;
            if let Some(v) = algorithm {
                ac.variant = v;
            }
            if let Some(t) = theta {
                ac.theta = t;
            }
            if let Some(t) = tol {
                ac.tol = t;
            }
            if gamma.is_some() {
                ac.gamma = gamma;
            }
            if let Some(m) = max_iter {
                ac.max_iter = m;
            }
            let trace = run(&problem, &ac)?;
            let report = bound_report(&trace, problem.f.norm(), ac.tol);
            match dest {
                Some(path) => {
                    fs::write(&path, trace.to_csv())?;
                    let report_path = path.with_extension("report.txt");
                    fs::write(&report_path, &report)?;
                    writeln!(out, "wrote {} and {}", path.display(), report_path.display())?;
                }
                None => {
                    write!(out, "{}", trace.to_csv())?;
                    write!(err, "{report}")?;
                }
            }
            Ok(if trace.non_contraction { EXIT_FACT } else { EXIT_OK })
        }
        Command::Fixture { name, params } => {
            let (params, dest) = parse_fixture_params(&params)?;
            let fx = fixture(&name, &params)?;
            write!(out, "{}", fx.report())?;
            if let Some(dir) = dest {
                fs::create_dir_all(&dir)?;
                for (label, v) in &fx.vectors {
                    let file = dir.join(format!("{name}_{}.txt", sanitize(label)));
                    fs::write(&file, v.to_text())?;
                }
                if let Some(op) = &fx.operator {
                    fs::write(dir.join(format!("{name}_operator.txt")), operator_text(op))?;
                }
            }
            Ok(if fx.passed() { EXIT_OK } else { EXIT_FACT })
        }
        Command::FitClass { vector, kind } => {
            let text = fs::read_to_string(&vector)?;
            let v = SpectralVector::from_text(&text)?;
            let fit = fit_class(&v, kind)?;
            writeln!(out, "{fit}")?;
            Ok(EXIT_OK)
        }
        Command::MatrixProbe { config, window, j_max } => {
            let cfg = ProblemConfig::load(&config)?;
            let op = cfg.operator()?;
            let window = window.unwrap_or(cfg.window.round().max(8.0) as usize);
            probe(&op, window, j_max, out)?;
            Ok(EXIT_OK)
        }
        Command::SweepTheta { config, thetas, algorithm, out: dir } => {
            let cfg = ProblemConfig::load(&config)?;
            let (problem, base) = cfg.problem()?;
            let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep").to_string();
            fs::create_dir_all(&dir)?;
            let traces: Vec<Result<RunTrace>> = std::thread::scope(|s| {
                let handles: Vec<_> = thetas
                    .iter()
                    .map(|&theta| {
                        let mut ac = base.clone();
                        ac.theta = theta;
                        if let Some(v) = algorithm {
                            ac.variant = v;
                        }
                        let problem = &problem;
                        s.spawn(move || run(problem, &ac))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            });
            writeln!(out, "theta,iterations,final_card,final_residual,csv")?;
            let mut iterations = Vec::new();
            for (theta, trace) in thetas.iter().zip(traces) {
                let trace = trace?;
                let file = dir.join(format!("{stem}_theta_{theta}.csv"));
                fs::write(&file, trace.to_csv())?;
                let last = trace.last();
                writeln!(
                    out,
                    "{theta},{},{},{:.6e},{}",
                    trace.iterations(),
                    last.card_lambda,
                    last.residual_norm,
                    file.display()
                )?;
                iterations.push(trace.iterations());
            }
            if !iterations.windows(2).all(|w| w[1] < w[0]) {
                writeln!(err, "note: iteration counts are not strictly decreasing in the given θ order")?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

fn operator_text(op: &EllipticOperator) -> String {
    let mut s = format!("d={} alpha_star={:.12e} alpha_upper={:.12e}\n", op.dim(), op.alpha_star(), op.alpha_upper());
    for (name, spec) in [("nu", op.nu()), ("sigma", op.sigma())] {
        for (k, c) in spec.iter() {
            s.push_str(&format!("{name} {k} {:.17e} {:.17e}\n", c.re, c.im));
        }
    }
    s
}

/// Splits `--key value` pairs; `--out dir` is taken out as the output directory.
fn parse_fixture_params(args: &[String]) -> Result<(Params, Option<PathBuf>)> {
    let mut params = Params::new();
    let mut out = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| Error::Domain(format!("expected '--key value', found '{a}'")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Domain(format!("parameter --{key} needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        if key == "out" {
            out = Some(PathBuf::from(value));
        } else {
            params.insert(&key.replace('-', "_"), &value);
        }
    }
    Ok((params, out))
}

fn bound_report(trace: &RunTrace, f_norm: f64, tol: f64) -> String {
    let mut s = String::new();
    s.push_str(&format!("algorithm={} theta={} termination={}\n", trace.variant, trace.theta, trace.termination));
    if let Some(j) = trace.enrichment_radius {
        s.push_str(&format!("enrichment_radius={j}\n"));
    }
    s.push_str(&format!(
        "alpha_star={:.6e} alpha_upper={:.6e} predicted_factor={:.6}\n",
        trace.alpha_star, trace.alpha_upper, trace.predicted_factor
    ));
    let ratios = trace.energy_ratios();
    if let Some(max) = ratios.iter().map(|r| r.1).reduce(f64::max) {
        s.push_str(&format!("max_energy_ratio={max:.6} violations={:?}\n", trace.violations));
    }
    if trace.predicted_factor < 1.0 && tol > 0.0 && f_norm > tol {
        let bound = ((f_norm / tol).ln() / (1.0 / trace.predicted_factor).ln()).ceil() + 1.0;
        s.push_str(&format!("iterations={} termination_bound={bound}\n", trace.iterations()));
    }
    if trace.variant == Variant::CAdfour {
        let k = inner_iteration_bound(trace.theta, trace.alpha_star, trace.alpha_upper);
        let max_inner = trace.records.iter().map(|r| r.inner_iters).max().unwrap_or(0);
        s.push_str(&format!("max_inner_iters={max_inner} inner_bound={k:.3}\n"));
    }
    s.push_str(&format!("non_contraction={}\n", trace.non_contraction));
    for w in &trace.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

fn probe(op: &EllipticOperator, window: usize, j_max: usize, out: &mut dyn Write) -> Result<()> {
    let cert = certify_decay(op, window)?;
    writeln!(out, "certificate {cert}")?;
    let d = op.dim();
    let model = TruncationModel::from_certificate(&cert, d);
    let radius = if d == 1 { 100.0 } else { 8.0 };
    let idx = MultiIndex::ball(d, radius);
    let full = op.assemble(&idx);
    writeln!(out, "J,psi_bound,measured")?;
    for j in 0..=j_max {
        let measured = hermitian_norm(&(&full - op.truncate(j).assemble(&idx)));
        let bound = match &model {
            Ok(m) => format!("{:.6e}", m.psi(j)),
            Err(_) => "n/a".into(),
        };
        writeln!(out, "{j},{bound},{measured:.6e}")?;
    }
    if let Err(e) = &model {
        writeln!(out, "truncation model unavailable: {e}")?;
    }
    if cert.is_diagonal() {
        writeln!(out, "inverse: diagonal operator")?;
    } else {
        match inverse_decay_rate(cert.c_l, cert.eta_l, cert.diag_min)? {
            InverseDecay::Accepted { eta_bar, z_bar, c_scaled } => writeln!(
                out,
                "inverse: accepted eta_bar={eta_bar:.6} z_bar={z_bar:.6} c_scaled={c_scaled:.6}"
            )?,
            InverseDecay::Rejected { c_scaled, limit } => {
                writeln!(out, "inverse: rejected c_scaled={c_scaled:.6} limit={limit:.6}")?
            }
        }
    }
    Ok(())
}

/// Entry point used by the binary.
pub fn main_with_args() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    cli(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
