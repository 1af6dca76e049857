//! Command-line front end: constructions, searches, verification, bounds and tables.
//!
//! Every run starts its standard output with a `#` header line naming the
//! version, seed and precision. Exit codes: 0 success, 1 validation or
//! computation failure (reasons as JSON on stderr), 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use equidissect::adpoly::{minimize_ssr, OptimizeConfig};
use equidissect::coloring::certify;
use equidissect::constructions::{
    add_two, build_trapezoid_cut, default_precision, predicted_bound, search_signs, slice_family,
    solve_epsilon, tarry_escott, thue_morse, thue_morse_range, SearchMode, SignSequence,
    TrapezoidCutSpec, DEFAULT_SEARCH_BUDGET, DEFAULT_TARRY_BUDGET,
};
use equidissect::dissection::{check_legality, lambda, unit_square, validate_abstract, Point};
use equidissect::gapbound::{dissection_lower_bound, dmm_exponent, DmmInput, LowerBoundOptions};
use equidissect::interchange::{AnyMap, DissectionFile};
use equidissect::numerics::{format_rational, parse_rational, BigFloat, Rational};
use equidissect::Error;

const DEFAULT_PRECISION: u32 = 128;

#[derive(Parser, Debug)]
#[command(name = "equidissect", version, about = "Near-equal-area triangle dissections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a dissection of the unit square and write it as JSON.
    Construct(ConstructArgs),
    /// Search sign sequences for the trapezoid-cut family.
    Search {
        #[command(subcommand)]
        what: SearchWhat,
    },
    /// Locally minimize the area spread over maps of a dissection type.
    Optimize(OptimizeArgs),
    /// Check a dissection file.
    Verify(VerifyArgs),
    /// Evaluate range bounds.
    Bound {
        #[command(subcommand)]
        what: BoundWhat,
    },
    /// Search equal power-sum splits of 1..2m.
    Tarry(TarryArgs),
    /// Reproduce the sign-search (3) or systematic-construction (4) table as CSV.
    Tables(TablesArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Slices,
    ThueMorse,
    Signs,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: Option<usize>,
    /// Sign sequence such as "+--+", for the signs family.
    #[arg(long)]
    signs: Option<String>,
    /// Area of the top triangle as p/q; defaults to 1/n.
    #[arg(long)]
    top_area: Option<String>,
    /// Working precision in bits; defaults to a value derived from n.
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SearchWhat {
    Signs(SearchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Exhaustive,
    Random,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of rows to print.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
    budget: u128,
    /// Print full-precision values instead of 6 significant digits.
    #[arg(long)]
    full: bool,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    precision: u32,
    #[arg(long, default_value_t = 4000)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    file: PathBuf,
    #[arg(long)]
    monsky: bool,
    #[arg(long)]
    legality: bool,
    #[arg(long)]
    metrics: bool,
}

#[derive(Subcommand, Debug)]
enum BoundWhat {
    /// Predicted range of the Thue-Morse construction.
    Predicted {
        #[arg(long)]
        n: usize,
    },
    /// Gap exponent for degree d, k variables and coefficients below 2^tau.
    Gap {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        tau: u64,
    },
    /// Lower bound exponent for dissections of a polygon into n triangles.
    Dissection {
        /// "square" or a dissection file whose polygon is used.
        #[arg(long, default_value = "square")]
        polygon: String,
        #[arg(long)]
        n: usize,
        /// Actual node count, replacing the worst case n+2.
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        allow_even: bool,
    },
}

#[derive(Args, Debug)]
struct TarryArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    max_len: usize,
    #[arg(long, default_value_t = DEFAULT_TARRY_BUDGET)]
    budget: u128,
}

#[derive(Args, Debug)]
struct TablesArgs {
    /// 3 or 4.
    which: u32,
    #[arg(long)]
    n_max: usize,
    #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
    budget: u128,
    #[arg(long)]
    full: bool,
}

/// Why a command stopped.
enum Failure {
    Usage(String),
    Invalid(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PreconditionFailed(m) => Failure::Usage(m),
            other => Failure::Invalid(error_json(&other)),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(json!({"error": "io", "reasons": [e.to_string()]}))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Invalid(json!({"error": "io", "reasons": [e.to_string()]}))
    }
}

fn error_json(e: &Error) -> Value {
    let (kind, reasons) = match e {
        Error::InvalidDissection(r) => ("invalid_dissection", r.clone()),
        Error::Illegal(r) => ("illegal", r.clone()),
        Error::Parse(m) => ("parse", vec![m.clone()]),
        Error::IrrationalCoordinates => ("irrational_coordinates", vec![e.to_string()]),
        Error::NotConstrained(m) => ("not_constrained", vec![m.clone()]),
        Error::BudgetExceeded { .. } => ("budget_exceeded", vec![e.to_string()]),
        Error::NoLegalPointFound { .. } => ("no_legal_point", vec![e.to_string()]),
        Error::NoBracket(m) => ("no_bracket", vec![m.clone()]),
        Error::SnapFailure { .. } => ("snap_failure", vec![e.to_string()]),
        _ => ("error", vec![e.to_string()]),
    };
    json!({"error": kind, "reasons": reasons})
}

type Outcome = Result<(), Failure>;

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "{}", json!({"error": "usage", "reasons": [m]}));
            2
        }
        Err(Failure::Invalid(v)) => {
            let _ = writeln!(err, "{v}");
            1
        }
    }
}

fn header(out: &mut dyn Write, seed: Option<u64>, precision: Option<u32>) -> std::io::Result<()> {
    let fmt_opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    writeln!(
        out,
        "# equidissect {} seed={} precision={}",
        env!("CARGO_PKG_VERSION"),
        fmt_opt(seed.map(|s| s.to_string())),
        fmt_opt(precision.map(|p| p.to_string()))
    )
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Construct(a) => construct(a, out),
        Command::Search {
            what: SearchWhat::Signs(a),
        } => search(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Bound { what } => bound(what, out),
        Command::Tarry(a) => tarry(a, out),
        Command::Tables(a) => tables(a, out),
    }
}

fn parse_arg_rational(s: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(|e| Failure::Usage(e.to_string()))
}

/// Thue-Morse dissection for odd `n`: built at `2^k + 1 <= n`, then widened two triangles at a time.
fn thue_morse_dissection(
    n: usize,
    precision: Option<u32>,
) -> Result<(DissectionFile, u32), Failure> {
    if n < 3 || n % 2 == 0 {
        return Err(Failure::Usage(format!("thue-morse needs odd n >= 3, got {n}")));
    }
    let k = usize::BITS - 1 - n.leading_zeros();
    let base = (1usize << k) + 1;
    let prec = precision.unwrap_or_else(|| default_precision(base));
    let spec = TrapezoidCutSpec::new(thue_morse(base - 1), prec)?;
    let solved = solve_epsilon(&spec)?;
    let (mut d, mut m) = build_trapezoid_cut(&spec, &solved)?;
    for _ in 0..(n - base) / 2 {
        let (d2, m2) = add_two(&d, &m)?;
        d = d2;
        m = m2;
    }
    let meta = json!({
        "family": "thue-morse",
        "base_n": base,
        "signs": spec.signs.to_string(),
        "epsilon": solved.epsilon.to_decimal_string(),
        "residual": solved.residual.to_decimal_string(),
    });
    Ok((DissectionFile::bigfloat(d, m, prec).with_metadata(meta), prec))
}

fn construct(a: ConstructArgs, out: &mut dyn Write) -> Outcome {
    let (file, prec) = match a.family {
        Family::Slices => {
            let n = a.n.ok_or_else(|| Failure::Usage("--n is required".into()))?;
            let prec = a.precision.unwrap_or(DEFAULT_PRECISION);
            let (d, m) = slice_family(n, prec)?;
            (
                DissectionFile::bigfloat(d, m, prec).with_metadata(json!({"family": "slices"})),
                prec,
            )
        }
        Family::ThueMorse if a.top_area.is_none() => {
            let n = a.n.ok_or_else(|| Failure::Usage("--n is required".into()))?;
            thue_morse_dissection(n, a.precision)?
        }
        Family::ThueMorse | Family::Signs => {
            let signs = match (a.family, &a.signs, a.n) {
                (Family::Signs, Some(s), _) => {
                    SignSequence::parse(s).map_err(|e| Failure::Usage(e.to_string()))?
                }
                (Family::Signs, None, _) => {
                    return Err(Failure::Usage("--signs is required for the signs family".into()))
                }
                (_, _, Some(n)) if n >= 3 => thue_morse(n - 1),
                _ => return Err(Failure::Usage("--n is required".into())),
            };
            let n = signs.len() + 1;
            if let Some(given) = a.n {
                if given != n {
                    return Err(Failure::Usage(format!(
                        "--n {given} does not match a sign sequence of length {}",
                        signs.len()
                    )));
                }
            }
            let prec = a.precision.unwrap_or_else(|| default_precision(n));
            let spec = match &a.top_area {
                Some(p) => TrapezoidCutSpec::with_top_area(signs, parse_arg_rational(p)?, prec)?,
                None => TrapezoidCutSpec::new(signs, prec)?,
            };
            let solved = solve_epsilon(&spec)?;
            let (d, m) = build_trapezoid_cut(&spec, &solved)?;
            let meta = json!({
                "family": "signs",
                "signs": spec.signs.to_string(),
                "top_area": format_rational(&spec.top_area),
                "epsilon": solved.epsilon.to_decimal_string(),
                "residual": solved.residual.to_decimal_string(),
            });
            (DissectionFile::bigfloat(d, m, prec).with_metadata(meta), prec)
        }
    };
    if let AnyMap::BigFloat { map, .. } = &file.map {
        check_legality(&file.dissection, map)?;
    }
    file.write(&a.out)?;
    header(out, None, Some(prec))?;
    writeln!(
        out,
        "{}",
        json!({"out": a.out.display().to_string(), "n": file.dissection.n(), "metrics": file.metrics_json()})
    )?;
    Ok(())
}

fn sci(x: &BigFloat, full: bool) -> String {
    if full {
        x.to_decimal_string()
    } else {
        format!("{:.5e}", x.to_f64())
    }
}

fn opt_sci(x: Option<&BigFloat>, full: bool) -> String {
    x.map(|v| if full { v.to_decimal_string() } else { format!("{:.4}", v.to_f64()) })
        .unwrap_or_default()
}

fn search(a: SearchArgs, out: &mut dyn Write) -> Outcome {
    let prec = a.precision.unwrap_or(DEFAULT_PRECISION);
    let mode = match a.mode {
        Mode::Exhaustive => SearchMode::Exhaustive { budget: a.budget },
        Mode::Random => SearchMode::Random {
            samples: a.samples,
            seed: a.seed,
        },
    };
    let outcome = search_signs(a.n, &mode, prec)?;
    header(out, Some(a.seed), Some(prec))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sequence", "epsilon", "range", "rms", "lambda"])?;
    for r in outcome.ranked.iter().take(a.top) {
        w.write_record([
            r.signs.to_string(),
            sci(&r.epsilon, a.full),
            sci(&r.range, a.full),
            sci(&r.rms, a.full),
            opt_sci(r.lambda.as_ref(), a.full),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn optimize(a: OptimizeArgs, out: &mut dyn Write) -> Outcome {
    let file = DissectionFile::read(&a.file)?;
    let cfg = OptimizeConfig {
        restarts: a.restarts,
        seed: a.seed,
        max_iters: a.max_iters,
        precision: a.precision,
        ..Default::default()
    };
    let r = minimize_ssr(&file.dissection, &cfg)?;
    let best = DissectionFile::bigfloat(file.dissection.clone(), r.map, a.precision).with_metadata(
        json!({"optimizer": {"restarts": a.restarts, "seed": a.seed, "best_restart": r.restart, "legal_restarts": r.legal_restarts}}),
    );
    best.write(&a.out)?;
    header(out, Some(a.seed), Some(a.precision))?;
    writeln!(out, "{}", json!({"out": a.out.display().to_string(), "metrics": best.metrics_json()}))?;
    Ok(())
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Outcome {
    let file = DissectionFile::read(&a.file)?;
    let all = !(a.monsky || a.legality || a.metrics);
    let d = &file.dissection;
    validate_abstract(d)?;
    let mut report = serde_json::Map::new();
    report.insert("valid".into(), json!(true));
    report.insert("n".into(), json!(d.n()));
    if a.legality || all {
        match &file.map {
            AnyMap::Rational(m) => check_legality(d, m)?,
            AnyMap::BigFloat { map, .. } => check_legality(d, map)?,
        }
        report.insert("legal".into(), json!(true));
    }
    if a.metrics || all {
        report.insert("metrics".into(), file.metrics_json());
    }
    if a.monsky {
        let cert = match &file.map {
            AnyMap::Rational(m) => certify(d, m)?,
            AnyMap::BigFloat { map, .. } => certify(d, map)?,
        };
        let mut j = cert.to_json();
        j["excludes_equal_areas"] = json!(cert.excludes_equal_areas(&d.area, d.n()));
        report.insert("monsky".into(), j);
    }
    header(out, None, Some(file.map.report_precision()))?;
    writeln!(out, "{}", Value::Object(report))?;
    Ok(())
}

fn bound(what: BoundWhat, out: &mut dyn Write) -> Outcome {
    match what {
        BoundWhat::Predicted { n } => {
            if n == 0 {
                return Err(Failure::Usage("n must be positive".into()));
            }
            let b = predicted_bound(n);
            header(out, None, Some(DEFAULT_PRECISION))?;
            writeln!(
                out,
                "{}",
                json!({
                    "n": n,
                    "n_prime": b.n_prime,
                    "value": format_rational(&b.value),
                    "value_float": format!("{:.5e}", b.value_f64()),
                    "valid": b.valid,
                    "lambda": b.lambda().map(|l| format!("{:.4}", l.to_f64())),
                })
            )?;
        }
        BoundWhat::Gap { d, k, tau } => {
            let r = dmm_exponent(DmmInput::new(d, k, tau)?);
            header(out, None, None)?;
            writeln!(out, "{}", r.trace_json())?;
        }
        BoundWhat::Dissection {
            polygon,
            n,
            nodes,
            allow_even,
        } => {
            let corners: Vec<Point<Rational>> = if polygon == "square" {
                unit_square()
            } else {
                DissectionFile::read(std::path::Path::new(&polygon))?
                    .dissection
                    .polygon
            };
            let r = dissection_lower_bound(&corners, n, &LowerBoundOptions { allow_even, nodes })?;
            header(out, None, None)?;
            writeln!(out, "{}", r.trace_json())?;
        }
    }
    Ok(())
}

fn tarry(a: TarryArgs, out: &mut dyn Write) -> Outcome {
    let sols = tarry_escott(a.k, a.max_len, a.budget)?;
    header(out, None, None)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["length", "first", "second"])?;
    let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    for s in &sols {
        w.write_record([s.length.to_string(), join(&s.first), join(&s.second)])?;
    }
    w.flush()?;
    Ok(())
}

fn tables(a: TablesArgs, out: &mut dyn Write) -> Outcome {
    match a.which {
        3 => table3(&a, out),
        4 => table4(&a, out),
        other => Err(Failure::Usage(format!("no table {other}; choose 3 or 4"))),
    }
}

fn table3(a: &TablesArgs, out: &mut dyn Write) -> Outcome {
    header(out, None, None)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "sequence",
        "abs_epsilon",
        "rms",
        "lambda_opt",
        "lambda_c",
        "lambda_star",
    ])?;
    for n in (3..=a.n_max).step_by(2) {
        let prec = default_precision(n).max(DEFAULT_PRECISION);
        let outcome = search_signs(n, &SearchMode::Exhaustive { budget: a.budget }, prec)?;
        let best = outcome
            .ranked
            .first()
            .ok_or_else(|| Failure::Invalid(json!({"error": "no_bracket", "reasons": [format!("no sequence solved for n = {n}")]})))?;
        let rc = thue_morse_range(n, None)?;
        let star = predicted_bound(n);
        w.write_record([
            n.to_string(),
            best.signs.to_string(),
            sci(&best.epsilon.abs(), a.full),
            sci(&best.rms, a.full),
            opt_sci(best.lambda.as_ref(), a.full),
            opt_sci(lambda(&rc, n).as_ref(), a.full),
            opt_sci(star.lambda().as_ref(), a.full),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn table4(a: &TablesArgs, out: &mut dyn Write) -> Outcome {
    header(out, None, None)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "range_c", "range_star", "lambda_c", "lambda_star"])?;
    let mut ns = vec![3usize, 5];
    let mut k = 3;
    while (1usize << k) + 1 <= a.n_max {
        ns.push((1 << k) + 1);
        k += 1;
    }
    for n in ns.into_iter().filter(|&n| n <= a.n_max) {
        let rc = thue_morse_range(n, None)?;
        let star = predicted_bound(n);
        let star_text = if a.full {
            BigFloat::from_rational(&star.value, DEFAULT_PRECISION).to_decimal_string()
        } else {
            format!("{:.5e}", star.value_f64())
        };
        w.write_record([
            n.to_string(),
            sci(&rc, a.full),
            star_text,
            opt_sci(lambda(&rc, n).as_ref(), a.full),
            opt_sci(star.lambda().as_ref(), a.full),
        ])?;
    }
    w.flush()?;
    Ok(())
}
