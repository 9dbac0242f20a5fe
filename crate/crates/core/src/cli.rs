//! Batch command-line front end. Every command writes one JSON document (or a
//! CSV table with a header row) to the given writer and returns the process
//! exit code: 0 on success, 2 on a precondition violation, 3 on a failed or
//! non-converged numerical check.

use std::io::{Read, Write};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::analysis::{
    classify_regime, classify_regime_exact, f_recursion_check, kernel_recursion, kernel_recursion_residual,
    khinchine_witness, s_conjugation, zeta_residual, Regime,
};
use crate::cfree::{
    cfree_clt, cfree_convolution, cfree_mixed_moment, cfree_power, free_convolution, free_mixed_moment,
    psi_state_of_word, t_gaussian_marginal, AlternatingWord, MarginalPair, SeriesPair,
};
use crate::error::{Error, Result};
use crate::fock::{DeformParams, FockSpace};
use crate::operators::{annihilation, c_operator, creation, gaussian, vacuum_moments, GaussianFamily};
use crate::polynomials::{ident_vector, relations_r_check, u_poly, v_gram, v_poly, v_poly_via_relations};
use crate::scalar::{parse_rational, Scalar, Surd};
use crate::series::CauchySeries;
use crate::spectra::{
    c_has_atom, c_measure, closed_form_g, closed_form_series, detect_atom, g_continued_fraction, gaussian_jacobi,
    gaussian_measure, measure_moment, moments_from_jacobi, stieltjes_invert, GKind, Measure,
};

#[derive(Parser, Debug, Clone)]
#[command(name = "tgauss", version, about = "t-deformed gaussians: moments, spectra, regimes, c-free convolution")]
pub struct Cli {
    /// Deformation parameter (decimal or p/q).
    #[arg(long, global = true, default_value = "1/2")]
    pub t: String,
    /// Number of generators.
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    /// Truncation level (maximal word length); defaults per command.
    #[arg(long = "L", global = true)]
    pub max_len: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Precision::Float)]
    pub precision: Precision,
    /// Series order.
    #[arg(long, global = true, default_value_t = 16)]
    pub order: usize,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Imaginary offset for Stieltjes inversion.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Number of grid points.
    #[arg(long, global = true, default_value_t = 101)]
    pub grid: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    Exact,
    Float,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// The single t-gaussian `s^t`.
    Gaussian,
    /// `c^t = Σ (s_i^t)²`.
    C,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Fock,
    Polys,
    Spectra,
    Cfree,
    Analysis,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConvolveMode {
    /// c-free convolution of the first two records.
    Pair,
    /// `count`-fold c-free convolution power of the first record.
    Power,
    /// c-free central limit of the first record with `N = count`.
    Clt,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Moments from the Fock model, the measure and the closed-form transform.
    Moments {
        #[arg(long, value_enum, default_value_t = Target::Gaussian)]
        target: Target,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
    /// Density samples from the closed form and from Stieltjes inversion, plus atoms.
    Density {
        #[arg(long, value_enum, default_value_t = Target::Gaussian)]
        target: Target,
    },
    /// Regime of `(t, n)`.
    Classify,
    /// Runs invariant checks.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Free and c-free convolution of moment pairs read from a JSON file (`-` for stdin).
    Convolve {
        #[arg(long)]
        input: String,
        #[arg(long, value_enum, default_value_t = ConvolveMode::Pair)]
        mode: ConvolveMode,
        #[arg(long, default_value_t = 2)]
        count: usize,
    },
}

/// Parses `args` and runs the command, writing to `out`; returns the exit code.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(out, "{e}");
            code
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> i32 {
    let result = match cli.precision {
        Precision::Float => dispatch::<f64>(cli),
        Precision::Exact => dispatch::<Surd>(cli),
    };
    match result {
        Ok(report) => {
            let code = if report.failed { 3 } else { 0 };
            match emit(cli.output, &report, out) {
                Ok(()) => code,
                Err(e) => emit_error(&e, out),
            }
        }
        Err(e) => emit_error(&e, out),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IdentityFailed(_) => 3,
        _ => 2,
    }
}

fn emit_error(e: &Error, out: &mut dyn Write) -> i32 {
    let kind = format!("{e:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
    let doc = json!({ "error": { "kind": kind, "message": e.to_string() } });
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("plain json"));
    exit_code(e)
}

/// A command's output: a table plus free-form metadata.
#[derive(Debug, Default)]
pub struct Report {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub meta: Map<String, Value>,
    pub failed: bool,
}

impl Report {
    fn new(command: &str, columns: &[&str]) -> Self {
        Report { command: command.into(), columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
            .collect();
        let mut doc = Map::new();
        doc.insert("command".into(), Value::String(self.command.clone()));
        doc.insert("rows".into(), Value::Array(rows));
        for (k, v) in &self.meta {
            doc.insert(k.clone(), v.clone());
        }
        Value::Object(doc)
    }
}

fn emit(format: OutputFormat, report: &Report, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidParameter(format!("write failed: {e}"));
    match format {
        OutputFormat::Json => {
            writeln!(out, "{}", serde_json::to_string_pretty(&report.to_json()).expect("plain json")).map_err(io)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
            w.write_record(&report.columns).map_err(csv_err)?;
            for row in &report.rows {
                w.write_record(row.iter().map(csv_cell)).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
            out.write_all(&bytes).map_err(io)
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Object(m) => match (m.get("num"), m.get("den")) {
            (Some(Value::String(p)), Some(Value::String(q))) => format!("{p}/{q}"),
            _ => m.get("exact").or(m.get("decimal")).map(csv_cell).unwrap_or_default(),
        },
        other => other.to_string(),
    }
}

/// Serialization of scalars: floats as numbers, exact rationals as
/// `{decimal, num, den}`, other field elements as `{decimal, exact}`.
pub trait Export: Scalar {
    fn export(&self) -> Value;
    fn parse_value(v: &Value) -> Result<Self>;
}

impl Export for f64 {
    fn export(&self) -> Value {
        json!(self)
    }

    fn parse_value(v: &Value) -> Result<Self> {
        match v {
            Value::Number(x) => x.as_f64().ok_or_else(|| Error::InvalidParameter(format!("bad number {x}"))),
            Value::String(s) => Ok(parse_rational(s)?.to_f64_lossy()),
            other => Err(Error::InvalidParameter(format!("expected a number, got {other}"))),
        }
    }
}

impl Export for Surd {
    fn export(&self) -> Value {
        match self.as_rational() {
            Some(r) => json!({
                "decimal": format!("{}", self.to_f64()),
                "num": r.numer().to_string(),
                "den": r.denom().to_string(),
            }),
            None => json!({ "decimal": format!("{}", self.to_f64()), "exact": self.to_string() }),
        }
    }

    fn parse_value(v: &Value) -> Result<Self> {
        match v {
            Value::String(s) => Ok(Surd::rational(parse_rational(s)?)),
            Value::Number(x) => Ok(Surd::rational(parse_rational(&x.to_string())?)),
            other => Err(Error::InvalidParameter(format!("expected a rational, got {other}"))),
        }
    }
}

trait LossyF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl LossyF64 for num_rational::BigRational {
    fn to_f64_lossy(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Builds deformation parameters for the requested precision.
pub trait FromConfig: Export {
    fn params(t: &str, n: usize, max_len: usize) -> Result<DeformParams<Self>>;
}

impl FromConfig for f64 {
    fn params(t: &str, n: usize, max_len: usize) -> Result<DeformParams<f64>> {
        let value = match t.trim().parse::<f64>() {
            Ok(v) => v,
            Err(_) => parse_rational(t)?.to_f64_lossy(),
        };
        DeformParams::float(value, n, max_len)
    }
}

impl FromConfig for Surd {
    fn params(t: &str, n: usize, max_len: usize) -> Result<DeformParams<Surd>> {
        let r = parse_rational(t)
            .map_err(|_| Error::InvalidParameter(format!("exact precision needs a rational t (p/q or decimal), got {t:?}")))?;
        DeformParams::exact(r, n, max_len)
    }
}

fn dispatch<S: FromConfig>(cli: &Cli) -> Result<Report> {
    let mut report = match &cli.command {
        Command::Moments { target, k_max } => cmd_moments::<S>(cli, *target, *k_max)?,
        Command::Density { target } => cmd_density(cli, *target)?,
        Command::Classify => cmd_classify::<S>(cli)?,
        Command::Verify { suite } => cmd_verify::<S>(cli, *suite)?,
        Command::Convolve { input, mode, count } => cmd_convolve::<S>(cli, input, *mode, *count)?,
    };
    report.meta.insert(
        "config".into(),
        json!({
            "t": cli.t,
            "n": cli.n,
            "L": cli.max_len,
            "precision": format!("{:?}", cli.precision).to_lowercase(),
            "order": cli.order,
            "seed": cli.seed,
            "epsilon": cli.epsilon,
            "grid": cli.grid,
        }),
    );
    Ok(report)
}

fn t_float(cli: &Cli) -> Result<f64> {
    Ok(f64::params(&cli.t, 1, 0)?.t_f64())
}

fn target_measure(target: Target, t: f64, n: usize) -> Result<(Measure, GKind)> {
    Ok(match target {
        Target::Gaussian => (gaussian_measure(t)?, GKind::St),
        Target::C => (c_measure(t, n)?, GKind::Ct),
    })
}

fn atoms_json(m: &Measure) -> Value {
    Value::Array(m.atoms.iter().map(|a| json!({ "location": a.location, "weight": a.weight })).collect())
}

/// Rows `(k, matrix, measure, series, max_abs_diff)`.
pub fn cmd_moments<S: FromConfig>(cli: &Cli, target: Target, k_max: usize) -> Result<Report> {
    let (n, shift) = match target {
        Target::Gaussian => (1, 1),
        Target::C => (cli.n, 2),
    };
    let max_len = cli.max_len.unwrap_or((shift * k_max).div_ceil(2).max(1));
    let params = S::params(&cli.t, n, max_len)?;
    let space = FockSpace::new(params.clone())?;
    let op = match target {
        Target::Gaussian => gaussian(1, &space)?,
        Target::C => c_operator(&space)?,
    };
    let matrix = vacuum_moments(&op, k_max)?;
    let (measure, kind) = target_measure(target, params.t_f64(), n)?;
    let series = closed_form_series(kind, &params, k_max)?;
    let mut report = Report::new("moments", &["k", "matrix_moment", "measure_moment", "series_moment", "max_abs_diff"]);
    let mut worst = 0.0f64;
    for k in 0..=k_max {
        let a = matrix[k].to_f64();
        let b = measure_moment(&measure, k);
        let c = series.moment(k).to_f64();
        let diff = (a - b).abs().max((a - c).abs()).max((b - c).abs());
        worst = worst.max(diff / b.abs().max(1.0));
        report.rows.push(vec![json!(k), matrix[k].export(), json!(b), series.moment(k).export(), json!(diff)]);
    }
    if S::EXACT && matrix.as_slice() != series.moments() {
        return Err(Error::IdentityFailed("exact matrix and series moments differ".into()));
    }
    report.meta.insert("target".into(), json!(format!("{target:?}").to_lowercase()));
    report.meta.insert("atom".into(), json!(!measure.atoms.is_empty()));
    report.meta.insert("atoms".into(), atoms_json(&measure));
    report.meta.insert("max_relative_diff".into(), json!(worst));
    report.failed = worst > 1e-7;
    Ok(report)
}

/// Rows `(x, closed_form_density, inverted_density, abs_diff)` plus atom records.
pub fn cmd_density(cli: &Cli, target: Target) -> Result<Report> {
    let t = t_float(cli)?;
    let n = if target == Target::Gaussian { 1 } else { cli.n };
    let (measure, kind) = target_measure(target, t, n)?;
    let density = measure.density.as_ref().ok_or_else(|| Error::NotADensity("measure has no density part".into()))?;
    let (lo, hi) = density.support();
    if cli.grid < 2 {
        return Err(Error::InvalidParameter("--grid needs at least 2 points".into()));
    }
    let grid: Vec<f64> = (0..cli.grid).map(|j| lo + (hi - lo) * j as f64 / (cli.grid - 1) as f64).collect();
    let g = |z: Complex64| closed_form_g(kind, t, n, z).expect("Im z > 0");
    let inverted = stieltjes_invert(g, &grid, cli.epsilon)?;
    let mut report = Report::new("density", &["x", "closed_form_density", "inverted_density", "abs_diff"]);
    for (x, inv) in grid.iter().zip(&inverted) {
        let f = density.eval(*x);
        report.rows.push(vec![json!(x), json!(f), json!(inv), json!((f - inv).abs())]);
    }
    let atoms: Vec<Value> = measure
        .atoms
        .iter()
        .map(|a| {
            let est = detect_atom(g, a.location, cli.epsilon.min(1e-4), 1e-3);
            json!({
                "location": a.location,
                "weight": a.weight,
                "detected_weight": est.weight_fine,
                "detected": est.is_atom,
            })
        })
        .collect();
    report.failed = atoms.iter().any(|a| a["detected"] != json!(true));
    report.meta.insert("target".into(), json!(format!("{target:?}").to_lowercase()));
    report.meta.insert("atoms".into(), Value::Array(atoms));
    Ok(report)
}

pub fn cmd_classify<S: FromConfig>(cli: &Cli) -> Result<Report> {
    let verdict = if S::EXACT {
        classify_regime_exact(&parse_rational(&cli.t)?, cli.n)?
    } else {
        classify_regime(t_float(cli)?, cli.n)?
    };
    let atom = c_has_atom(t_float(cli)?, cli.n);
    let mut report = Report::new("classify", &["t", "n", "regime", "boundary_distance", "lower", "upper", "c_atom"]);
    report.rows.push(vec![
        json!(cli.t),
        json!(cli.n),
        json!(verdict.regime.to_string()),
        json!(verdict.boundary_distance),
        json!(verdict.interval.0),
        json!(verdict.interval.1),
        json!(atom),
    ]);
    report.failed = atom != (verdict.regime == Regime::DirectSum);
    Ok(report)
}

struct Check {
    suite: &'static str,
    name: String,
    passed: bool,
    value: f64,
    tolerance: f64,
}

fn tolerance<S: Scalar>(float_tol: f64) -> f64 {
    if S::EXACT {
        0.0
    } else {
        float_tol
    }
}

fn check(suite: &'static str, name: impl Into<String>, value: f64, tol: f64) -> Check {
    Check { suite, name: name.into(), passed: value <= tol, value, tolerance: tol }
}

fn max_diff<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    if S::EXACT {
        if a == b {
            0.0
        } else {
            a.iter().zip(b).map(|(x, y)| (x.to_f64() - y.to_f64()).abs()).fold(f64::MIN_POSITIVE, f64::max)
        }
    } else {
        a.iter().zip(b).map(|(x, y)| (x.to_f64() - y.to_f64()).abs()).fold(0.0, f64::max)
    }
}

fn identity_defect<S: Scalar>(m: &[Vec<S>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let target = if i == j { S::one() } else { S::zero() };
            if S::EXACT && *x != target {
                worst = worst.max(f64::MIN_POSITIVE);
            }
            worst = worst.max((x.to_f64() - target.to_f64()).abs());
        }
    }
    worst
}

fn verify_fock<S: FromConfig>(cli: &Cli) -> Result<Vec<Check>> {
    let max_len = cli.max_len.unwrap_or(4);
    let params = S::params(&cli.t, cli.n, max_len)?;
    let space = FockSpace::new(params.clone())?;
    let expected: usize = (0..=max_len).map(|k| cli.n.pow(k as u32)).sum();
    let mut out = vec![check("fock", "dimension", (space.dim() as f64 - expected as f64).abs(), 0.0)];
    let roundtrip = (0..space.dim()).filter(|&i| space.index_of(&space.word_at(i)).ok() != Some(i)).count();
    out.push(check("fock", "index_roundtrip", roundtrip as f64, 0.0));
    let mut worst = 0.0f64;
    for i in 1..=cli.n {
        let l = creation(i, &space)?;
        let a = annihilation(i, &space)?;
        if !a.near(&l.transpose(), 0.0) {
            worst = 1.0;
        }
    }
    out.push(check("fock", "annihilation_is_transpose", worst, 0.0));
    let k_max = 2 * max_len;
    let matrix = vacuum_moments(&gaussian(1, &space)?, k_max)?;
    let jacobi = moments_from_jacobi(&gaussian_jacobi(&params, k_max / 2 + 1), k_max)?;
    out.push(check("fock", "gaussian_moments_vs_jacobi", max_diff(&matrix, &jacobi), tolerance::<S>(1e-10)));
    Ok(out)
}

fn verify_polys<S: FromConfig>(cli: &Cli) -> Result<Vec<Check>> {
    let max_len = cli.max_len.unwrap_or(8);
    let params = S::params(&cli.t, 1, max_len)?;
    let tol = tolerance::<S>(1e-9);
    let rel = relations_r_check(&params, max_len.max(2), tol)?;
    let mut out = vec![check("polys", "relations", rel.max_discrepancy, tol)];
    let family = GaussianFamily::new(params.clone())?;
    let gram = v_gram(&family, max_len.min(6))?;
    out.push(check("polys", "v_gram_identity", identity_defect(&gram), tol));
    let mut worst = 0.0f64;
    for k in 0..=max_len {
        worst = worst.max(v_poly(k, &params).max_abs_diff(&v_poly_via_relations(k, &params)));
    }
    out.push(check("polys", "v_two_constructions", worst, tol));
    let small = S::params(&cli.t, cli.n.min(2), max_len.min(4))?;
    let family = GaussianFamily::new(small)?;
    let failures = family.space().words().filter(|w| ident_vector(w, &family).is_err()).count();
    out.push(check("polys", "ident_all_words", failures as f64, 0.0));
    Ok(out)
}

fn verify_spectra<S: FromConfig>(cli: &Cli) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let k_max = 8;
    for target in [Target::Gaussian, Target::C] {
        let name = format!("{target:?}").to_lowercase();
        let (n, len) = if target == Target::Gaussian { (1, k_max / 2) } else { (cli.n.min(3), k_max) };
        let params = S::params(&cli.t, n, len)?;
        let space = FockSpace::new(params.clone())?;
        let op = if target == Target::Gaussian { gaussian(1, &space)? } else { c_operator(&space)? };
        let matrix = vacuum_moments(&op, k_max)?;
        let (measure, kind) = target_measure(target, params.t_f64(), n)?;
        let series = closed_form_series(kind, &params, k_max)?;
        out.push(check("spectra", format!("{name}_matrix_vs_series"), max_diff(&matrix, series.moments()), tolerance::<S>(1e-9)));
        let quad = (0..=k_max)
            .map(|k| (measure_moment(&measure, k) - matrix[k].to_f64()).abs() / matrix[k].to_f64().abs().max(1.0))
            .fold(0.0, f64::max);
        out.push(check("spectra", format!("{name}_matrix_vs_quadrature"), quad, 1e-7));
        out.push(check("spectra", format!("{name}_mass"), (measure.total_mass() - 1.0).abs(), 1e-8));
        let t = params.t_f64();
        let g = |z: Complex64| closed_form_g(kind, t, n, z).expect("Im z > 0");
        let missed = measure.atoms.iter().filter(|a| !detect_atom(g, a.location, 1e-5, 1e-3).is_atom).count();
        out.push(check("spectra", format!("{name}_atoms_detected"), missed as f64, 0.0));
    }
    let params = f64::params(&cli.t, 1, 0)?;
    let z = Complex64::new(0.3, 1.0);
    let cf = g_continued_fraction(&gaussian_jacobi(&params, 200), z, 200)?;
    let closed = closed_form_g(GKind::St, params.t_f64(), 1, z)?;
    out.push(check("spectra", "continued_fraction", (cf - closed).norm(), 1e-10));
    Ok(out)
}

fn verify_cfree<S: FromConfig>(cli: &Cli) -> Result<Vec<Check>> {
    let tol = tolerance::<S>(1e-9);
    let params = S::params(&cli.t, 2, 6)?;
    let m = t_gaussian_marginal(&params, 12)?;
    let marginals = vec![m.clone(), m];
    let family = GaussianFamily::new(params.clone())?;
    let u2 = u_poly(2, &params);
    let w = AlternatingWord::new(vec![(1, u2.clone()), (2, u2)]);
    let alpha = params.alpha().clone();
    let mut out = Vec::new();
    let engine = cfree_mixed_moment(&marginals, &w)?;
    let matrix = crate::cfree::vacuum_state_of_word(&family, &w)?;
    out.push(check(
        "cfree",
        "u2u2_alpha_squared",
        max_diff(&[engine.clone(), engine], &[alpha.clone() * alpha, matrix]),
        tol,
    ));
    let mut worst = 0.0f64;
    for (a, b, c) in [(1usize, 1usize, 0usize), (2, 2, 0), (1, 2, 1), (3, 1, 2), (2, 1, 3)] {
        let mut factors = vec![(1, u_poly(a, &params)), (2, u_poly(b, &params))];
        if c > 0 {
            factors.push((1, u_poly(c, &params)));
        }
        let w = AlternatingWord::new(factors);
        worst = worst.max(max_diff(&[psi_state_of_word(&family, &w)?], &[free_mixed_moment(&marginals, &w)?]));
    }
    out.push(check("cfree", "psi_two_routes", worst, tol));
    let order = 8;
    let p1 = params.with_n(1)?;
    let gamma = SeriesPair::new(closed_form_series(GKind::Ct, &p1, order)?, closed_form_series(GKind::TC1, &p1, order)?)?;
    let n = cli.n;
    let pn = params.with_n(n)?;
    let power = cfree_power(&gamma, n)?;
    out.push(check(
        "cfree",
        "gamma_power_is_c_law",
        max_diff(power.mu.moments(), closed_form_series(GKind::Ct, &pn, order)?.moments()),
        tol,
    ));
    let s = CauchySeries::new(marginals[0].psi_moments()[..=order].to_vec())?;
    let diag = SeriesPair::new(s.clone(), s.clone())?;
    let conv = cfree_convolution(&diag, &diag)?;
    let free = free_convolution(&s, &s)?;
    out.push(check("cfree", "diagonal_is_free", max_diff(conv.mu.moments(), free.moments()), tol));
    Ok(out)
}

fn verify_analysis<S: FromConfig>(cli: &Cli) -> Result<Vec<Check>> {
    let t = t_float(cli)?;
    let n = cli.n;
    let mut out = Vec::new();
    let tol = tolerance::<S>(1e-9);
    if n >= 2 {
        let verdict = classify_regime(t, n)?;
        out.push(check(
            "analysis",
            "regime_matches_atom",
            ((verdict.regime == Regime::DirectSum) != c_has_atom(t, n)) as u8 as f64,
            0.0,
        ));
        let params = S::params(&cli.t, n, 6)?;
        match verdict.regime {
            Regime::DirectSum => {
                let alpha = params.alpha_f64();
                let rho2 = 1.0 / (n as f64 * alpha * alpha);
                let r: Vec<f64> = (0..=14).map(|d| zeta_residual(t, n, d)).collect::<Result<_>>()?;
                let mut excess = 0.0f64;
                for l in [6, 8, 10, 12] {
                    excess = excess.max(r[l + 2] / r[l] - (rho2 + 0.1)).max(r[l] - r[l - 2]);
                }
                out.push(check("analysis", "zeta_residual_trend", excess.max(0.0), 0.0));
                let kernel = kernel_recursion(&params, 20)?;
                let residual = kernel_recursion_residual(&params, &kernel)?.to_f64().abs();
                out.push(check("analysis", "kernel_recursion_residual", residual, tol));
                out.push(check("analysis", "kernel_not_summable", kernel.summable as u8 as f64, 0.0));
            }
            Regime::FreeFactor if (n as f64).sqrt() * params.alpha_f64().abs() < 1.0 => {
                let conj = s_conjugation(&params)?;
                let rep = conj.report(&params, cli.seed)?;
                out.push(check("analysis", "s_squared_identity", rep.s_squared_defect, tol));
                out.push(check("analysis", "s_norm_below_bound", (rep.norm_s - rep.bound_s).max(0.0), 0.0));
            }
            Regime::FreeFactor => {}
        }
        for k in 1..=2 {
            let rep = khinchine_witness(&S::params(&cli.t, n, 2 * k)?, k)?;
            let target = (n as f64 * params.alpha_f64()).powi(k as i32);
            out.push(check("analysis", format!("khinchine_phi_k{k}"), (rep.phi_value - target).abs(), 1e-9 * target.abs().max(1.0)));
        }
    }
    let (_, worst) = f_recursion_check(&S::params(&cli.t, n, 5)?)?;
    out.push(check("analysis", "f_recursion", worst, tol));
    Ok(out)
}

pub fn cmd_verify<S: FromConfig>(cli: &Cli, suite: Suite) -> Result<Report> {
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Fock {
        checks.extend(verify_fock::<S>(cli)?);
    }
    if all || suite == Suite::Polys {
        checks.extend(verify_polys::<S>(cli)?);
    }
    if all || suite == Suite::Spectra {
        checks.extend(verify_spectra::<S>(cli)?);
    }
    if all || suite == Suite::Cfree {
        checks.extend(verify_cfree::<S>(cli)?);
    }
    if all || suite == Suite::Analysis {
        checks.extend(verify_analysis::<S>(cli)?);
    }
    let mut report = Report::new("verify", &["suite", "check", "passed", "value", "tolerance"]);
    for c in &checks {
        report.rows.push(vec![json!(c.suite), json!(c.name), json!(c.passed), json!(c.value), json!(c.tolerance)]);
    }
    let passed = checks.iter().all(|c| c.passed);
    report.meta.insert("passed".into(), json!(passed));
    report.failed = !passed;
    Ok(report)
}

#[derive(Deserialize)]
struct PairRecord {
    #[serde(default)]
    label: String,
    phi_moments: Vec<Value>,
    psi_moments: Vec<Value>,
}

fn read_pairs<S: Export>(input: &str) -> Result<Vec<MarginalPair<S>>> {
    let mut text = String::new();
    let io = |e: std::io::Error| Error::InvalidParameter(format!("cannot read {input}: {e}"));
    if input == "-" {
        std::io::stdin().read_to_string(&mut text).map_err(io)?;
    } else {
        text = std::fs::read_to_string(input).map_err(io)?;
    }
    let records: Vec<PairRecord> =
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("bad pair file: {e}")))?;
    records
        .into_iter()
        .map(|r| {
            let phi = r.phi_moments.iter().map(S::parse_value).collect::<Result<Vec<_>>>()?;
            let psi = r.psi_moments.iter().map(S::parse_value).collect::<Result<Vec<_>>>()?;
            MarginalPair::new(r.label, phi, psi)
        })
        .collect()
}

fn series_pair<S: Scalar>(m: &MarginalPair<S>, order: usize) -> Result<SeriesPair<S>> {
    if m.order() < order {
        return Err(Error::InsufficientOrder { needed: order, available: m.order() });
    }
    SeriesPair::new(
        CauchySeries::new(m.phi_moments()[..=order].to_vec())?,
        CauchySeries::new(m.psi_moments()[..=order].to_vec())?,
    )
}

pub fn cmd_convolve<S: FromConfig>(cli: &Cli, input: &str, mode: ConvolveMode, count: usize) -> Result<Report> {
    let pairs = read_pairs::<S>(input)?;
    let first = pairs.first().ok_or_else(|| Error::InvalidParameter("pair file is empty".into()))?;
    let order = pairs.iter().map(|p| p.order()).min().unwrap_or(0).min(cli.order);
    let a = series_pair(first, order)?;
    let mut report = Report::new("convolve", &["k", "mu_moment", "nu_moment"]);
    let (mu, nu) = match mode {
        ConvolveMode::Pair => {
            let second = pairs.get(1).ok_or_else(|| Error::InvalidParameter("pair mode needs two records".into()))?;
            let b = series_pair(second, order)?;
            let c = cfree_convolution(&a, &b)?;
            let free = free_convolution(&a.nu, &b.nu)?;
            report.meta.insert("free_matches_nu".into(), json!(free.near(&c.nu, 1e-12)));
            (c.mu, c.nu)
        }
        ConvolveMode::Power => {
            let c = cfree_power(&a, count)?;
            (c.mu, c.nu)
        }
        ConvolveMode::Clt => {
            let mu = cfree_clt(&a, count)?;
            let nu = cfree_power(&a, count)?.nu.dilate(
                &S::from_i64(count as i64)
                    .sqrt()
                    .and_then(|r| r.inv())
                    .ok_or_else(|| Error::NotRepresentable(format!("sqrt({count})")))?,
            );
            if order >= 4 {
                report.meta.insert("fourth_moment".into(), mu.moment(4).export());
            }
            (mu, nu)
        }
    };
    for k in 0..=order {
        report.rows.push(vec![json!(k), mu.moment(k).export(), nu.moment(k).export()]);
    }
    report.meta.insert("mode".into(), json!(format!("{mode:?}").to_lowercase()));
    report.meta.insert("order".into(), json!(order));
    Ok(report)
}
