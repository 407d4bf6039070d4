//! Command-line front end: builds tables, runs the verification suites,
//! and emits machine-readable reports and plot-ready series.
//!
//! Exit codes are a stable contract:
//!   0  success
//!   1  unexpected numerical failure
//!   2  moment certification failure
//!   3  working precision exhausted
//!   4  a residual or trend check failed its budget
//!   5  configuration error (bad flags, domain violations)

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rug::Float;
use serde_json::{json, Value};

use spairy::asymptotics::{asymptotic_ratios, AsymptoticSeries};
use spairy::evolution::{evolution_residuals, hankel_h, EvolutionProbe};
use spairy::ladder::{identity_residuals, ladder_residuals, AuxTable, StarPath};
use spairy::numeric::{pow10, PrecisionSpec};
use spairy::recurrence::{build_recurrence, table_precision, RecurrenceTable};
use spairy::report::{dec, ResidualReport};
use spairy::systems::{difference_system_residuals, ode_residual};
use spairy::weight::{moment_table, parse_decimal, rat_to_string, MomentTable, WeightParams};
use spairy::{Error, Real};

const EXIT_NUMERIC: u8 = 1;
const EXIT_CERTIFICATION: u8 = 2;
const EXIT_PRECISION: u8 = 3;
const EXIT_RESIDUAL: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(
    name = "spairy",
    version,
    about = "Orthogonal polynomials for the singularly perturbed Airy weight x^l exp(-x^3 - t/x)"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the moment table (Pearson-certified) and the recurrence
    /// table, and write them out
    Table {
        /// Exponent of the algebraic factor; must exceed -1
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Strength of the essential zero at the origin; t >= 0
        #[arg(long)]
        t: String,
        /// Highest polynomial degree in the table
        #[arg(long)]
        nmax: usize,
        /// Moments to compute (default 2 nmax + 1, the minimum)
        #[arg(long)]
        jmax: Option<usize>,
        /// Target decimal digits
        #[arg(long, default_value_t = 60)]
        digits: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// csv, json or both
        #[arg(long, default_value = "both")]
        format: String,
    },
    /// Verify ladder relations, compatibility conditions, the seven
    /// scalar identities, the difference system and the ODE
    Verify {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        t: String,
        #[arg(long)]
        nmax: usize,
        #[arg(long, default_value_t = 60)]
        digits: u32,
        /// Restrict checks to a:b (inclusive)
        #[arg(long, value_name = "A:B")]
        n_range: Option<String>,
        /// Test hook: multiply every alpha_n by (1 + FUZZ) after the
        /// build so the suite must fail
        #[arg(long)]
        fuzz: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Verify the t-evolution equations and the Hankel log-derivative
    /// paths
    Evolve {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        t: String,
        /// Single index to probe
        #[arg(long)]
        n: Option<usize>,
        /// Or a range a:b of indices
        #[arg(long, value_name = "A:B")]
        n_range: Option<String>,
        #[arg(long, default_value_t = 40)]
        digits: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Ratio series against the Coulomb-fluid asymptotics
    Asympt {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// t >= 0 is admitted here
        #[arg(long)]
        t: String,
        #[arg(long)]
        nmax: usize,
        #[arg(long, default_value_t = 50)]
        digits: u32,
        /// Comma-separated n values for the fitted trend
        #[arg(long, value_name = "N1,N2,...", default_value = "25,50,100,200")]
        n_grid: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "both")]
        format: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn config_err(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::CertificationFailure { .. } => EXIT_CERTIFICATION,
            Error::PrecisionExhausted(_) | Error::NonPositive { .. } => EXIT_PRECISION,
            Error::Domain(_) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_NUMERIC,
            message: format!("io: {e}"),
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.cmd {
        Cmd::Table {
            lambda,
            t,
            nmax,
            jmax,
            digits,
            out,
            format,
        } => cmd_table(&lambda, &t, nmax, jmax, digits, &out, &format),
        Cmd::Verify {
            lambda,
            t,
            nmax,
            digits,
            n_range,
            fuzz,
            out,
            format,
        } => cmd_verify(&lambda, &t, nmax, digits, n_range, fuzz, &out, &format),
        Cmd::Evolve {
            lambda,
            t,
            n,
            n_range,
            digits,
            out,
        } => cmd_evolve(&lambda, &t, n, n_range, digits, &out),
        Cmd::Asympt {
            lambda,
            t,
            nmax,
            digits,
            n_grid,
            out,
            format,
        } => cmd_asympt(&lambda, &t, nmax, digits, &n_grid, &out, &format),
    }
}

fn parse_params(lambda: &str, t: &str) -> Result<WeightParams, Failure> {
    let lam = parse_decimal(lambda).map_err(|e| config_err(e.to_string()))?;
    let tq = parse_decimal(t).map_err(|e| config_err(e.to_string()))?;
    WeightParams::new(lam, tq).map_err(|e| config_err(e.to_string()))
}

fn check_digits(digits: u32) -> Result<(), Failure> {
    if digits < 30 {
        return Err(config_err(format!("digits must be >= 30, got {digits}")));
    }
    Ok(())
}

fn parse_range(spec: &str, lo: usize, hi: usize) -> Result<(usize, usize), Failure> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| config_err(format!("bad range {spec:?}, expected A:B")))?;
    let a: usize = a.parse().map_err(|_| config_err("bad range start"))?;
    let b: usize = b.parse().map_err(|_| config_err("bad range end"))?;
    if a > b {
        return Err(config_err("empty range"));
    }
    Ok((a.max(lo), b.min(hi)))
}

fn build_pipeline(
    params: &WeightParams,
    nmax: usize,
    jmax: usize,
    digits: u32,
) -> Result<(MomentTable, RecurrenceTable), Failure> {
    let prec = table_precision(digits, nmax)?;
    let moments = moment_table(params, jmax, &prec)?;
    let table = build_recurrence(&moments, nmax)?;
    Ok((moments, table))
}

fn config_json(params: &WeightParams, nmax: usize, jmax: usize, digits: u32) -> Value {
    json!({
        "lambda": rat_to_string(params.lambda()),
        "t": rat_to_string(params.t()),
        "nmax": nmax,
        "jmax": jmax,
        "digits": digits,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn log_spaced(bits: u32, lo: f64, hi: f64, count: usize) -> Vec<Real> {
    (0..count)
        .map(|i| {
            let frac = i as f64 / (count - 1) as f64;
            Float::with_val(bits, lo * (hi / lo).powf(frac))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_table(
    lambda: &str,
    t: &str,
    nmax: usize,
    jmax: Option<usize>,
    digits: u32,
    out: &Path,
    format: &str,
) -> Result<ExitCode, Failure> {
    check_digits(digits)?;
    let params = parse_params(lambda, t)?;
    let jmax = jmax.unwrap_or(2 * nmax + 1);
    if jmax < 2 * nmax + 1 {
        return Err(config_err(format!(
            "jmax must be >= 2 nmax + 1 = {}, got {jmax}",
            2 * nmax + 1
        )));
    }
    let (moments, table) = build_pipeline(&params, nmax, jmax, digits)?;

    write(
        &out.join("moments.json"),
        &serde_json::to_string_pretty(&moments.to_json()).unwrap(),
    )?;
    if format == "csv" || format == "both" {
        write(&out.join("recurrence.csv"), &table.to_csv())?;
    }
    if format == "json" || format == "both" {
        let v = json!({
            "config": config_json(&params, nmax, jmax, digits),
            "moment_table_hash": format!("{:016x}", moments.content_hash()),
            "table": table.to_json(),
        });
        write(
            &out.join("recurrence.json"),
            &serde_json::to_string_pretty(&v).unwrap(),
        )?;
    }
    let (worst_j, worst_res) = moments.worst_pearson();
    println!(
        "certified: worst Pearson residual {} at j = {worst_j}",
        dec(worst_res, 3)
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    lambda: &str,
    t: &str,
    nmax: usize,
    digits: u32,
    n_range: Option<String>,
    fuzz: Option<String>,
    out: &Path,
    format: &str,
) -> Result<ExitCode, Failure> {
    check_digits(digits)?;
    let params = parse_params(lambda, t)?;
    if params.t_is_zero() {
        return Err(config_err(
            "verify needs t > 0 (the starred quantities vanish identically at t = 0)",
        ));
    }
    if nmax < 4 {
        return Err(config_err("verify needs nmax >= 4"));
    }
    let (moments, mut table) = build_pipeline(&params, nmax, 2 * nmax + 1, digits)?;
    if let Some(f) = &fuzz {
        let eps = parse_decimal(f).map_err(|e| config_err(e.to_string()))?;
        let eps = Float::with_val(table.bits(), &eps);
        table.fuzz_alpha(&eps);
        println!("fuzz: alpha perturbed by relative {f}");
    }

    let prec = *table.prec();
    let bits = table.bits();
    let aux = AuxTable::build(&params, &table, StarPath::Integral, &prec)?;

    let (lo, hi) = match &n_range {
        Some(spec) => parse_range(spec, 1, nmax - 2)?,
        None => (1, nmax - 2),
    };
    let xs = log_spaced(bits, 0.05, 5.0, 10);
    let ode_xs = log_spaced(bits, 0.05, 4.0, 20);

    let mut report = ResidualReport::new();
    for n in lo..=hi {
        report.merge(ladder_residuals(&params, &table, &aux, n, &xs)?);
        report.merge(identity_residuals(&table, &aux, n)?);
        if n >= 2 {
            report.merge(difference_system_residuals(&table, n)?);
        }
        report.merge(ode_residual(&table, n, &ode_xs)?);
    }

    let budget = pow10(bits, -(digits as i64 - 20));
    let worst = report.worst().expect("nonempty report");
    let pass = worst.rel <= budget;
    let v = json!({
        "config": config_json(&params, nmax, 2 * nmax + 1, digits),
        "n_range": [lo, hi],
        "fuzz": fuzz,
        "moment_table_hash": format!("{:016x}", moments.content_hash()),
        "budget": dec(&budget, 3),
        "worst": {
            "identity": worst.identity.clone(),
            "n": worst.n,
            "rel": dec(&worst.rel, digits as usize),
        },
        "pass": pass,
        "residuals": report.to_json(digits as usize),
    });
    if format == "json" || format == "both" {
        write(
            &out.join("verify_report.json"),
            &serde_json::to_string_pretty(&v).unwrap(),
        )?;
    }
    if pass {
        println!(
            "ok: worst residual {} ({}, n = {:?}) within budget {}",
            dec(&worst.rel, 3),
            worst.identity,
            worst.n,
            dec(&budget, 3)
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "FAIL: {} at n = {:?} has residual {} above budget {}",
            worst.identity,
            worst.n,
            dec(&worst.rel, 3),
            dec(&budget, 3)
        );
        Ok(ExitCode::from(EXIT_RESIDUAL))
    }
}

fn cmd_evolve(
    lambda: &str,
    t: &str,
    n: Option<usize>,
    n_range: Option<String>,
    digits: u32,
    out: &Path,
) -> Result<ExitCode, Failure> {
    check_digits(digits)?;
    let params = parse_params(lambda, t)?;
    let prec = PrecisionSpec::new(digits).map_err(|e| config_err(e.to_string()))?;
    let ns: Vec<usize> = match (n, n_range) {
        (Some(n), None) => vec![n],
        (None, Some(spec)) => {
            let (lo, hi) = parse_range(&spec, 2, 1 << 20)?;
            (lo..=hi).collect()
        }
        (None, None) => return Err(config_err("pass --n or --n-range")),
        (Some(_), Some(_)) => return Err(config_err("--n and --n-range are exclusive")),
    };
    if ns.iter().any(|&n| n < 2) {
        return Err(config_err("evolution checks need n >= 2"));
    }

    let bits = prec.bits();
    // pass line for the differentiation error budget: truncation and
    // rebuilt-table noise both sit far below 10^-(D/2 - 2)
    let budget = pow10(bits, -(digits as i64 / 2 - 2));
    let mut entries = Vec::new();
    let mut pass = true;
    let mut worst_rel = Float::new(bits);
    for &n in &ns {
        let probe = EvolutionProbe::new(params.clone(), n, prec)?;
        let er = evolution_residuals(&probe)?;
        let hk = hankel_h(&probe)?;
        for r in er
            .residuals
            .records
            .iter()
            .chain(hk.residuals.records.iter())
        {
            if r.rel > worst_rel {
                worst_rel = r.rel.clone();
            }
            if r.rel > budget {
                pass = false;
                eprintln!(
                    "FAIL: {} at n = {n} has residual {} above budget {}",
                    r.identity,
                    dec(&r.rel, 3),
                    dec(&budget, 3)
                );
            }
        }
        entries.push(json!({
            "n": n,
            "residuals": er.residuals.to_json(digits as usize),
            "step_ratios": er.step_ratios.iter()
                .map(|(k, v)| json!({"relation": k, "ratio": dec(v, 6)}))
                .collect::<Vec<_>>(),
            "derivative_error_budget": dec(&er.derivative_error_budget, 3),
            "grid": er.grid.iter().map(rat_to_string).collect::<Vec<_>>(),
            "hankel": {
                "fd": dec(&hk.fd, digits as usize),
                "formula": dec(&hk.formula, digits as usize),
                "star_sum": dec(&hk.star_sum, digits as usize),
                "residuals": hk.residuals.to_json(digits as usize),
            },
        }));
    }

    let v = json!({
        "config": {
            "lambda": rat_to_string(params.lambda()),
            "t": rat_to_string(params.t()),
            "digits": digits,
        },
        "budget": dec(&budget, 3),
        "pass": pass,
        "entries": entries,
    });
    write(
        &out.join("evolve_report.json"),
        &serde_json::to_string_pretty(&v).unwrap(),
    )?;
    if pass {
        println!(
            "ok: worst evolution residual {} within budget {}",
            dec(&worst_rel, 3),
            dec(&budget, 3)
        );
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_RESIDUAL))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_asympt(
    lambda: &str,
    t: &str,
    nmax: usize,
    digits: u32,
    n_grid: &str,
    out: &Path,
    format: &str,
) -> Result<ExitCode, Failure> {
    check_digits(digits)?;
    let params = parse_params(lambda, t)?;
    let mut grid: Vec<usize> = Vec::new();
    for part in n_grid.split(',') {
        let n: usize = part
            .trim()
            .parse()
            .map_err(|_| config_err(format!("bad n-grid entry {part:?}")))?;
        if n >= 1 && n <= nmax {
            grid.push(n);
        }
    }
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 2 {
        return Err(config_err("n-grid needs at least two entries <= nmax"));
    }

    let (_, table) = build_pipeline(&params, nmax, 2 * nmax + 1, digits)?;
    let series = asymptotic_ratios(&table, &grid)?;

    if format == "csv" || format == "both" {
        write(
            &out.join("asympt_series.csv"),
            &series.to_csv(digits as usize),
        )?;
    }
    if format == "json" || format == "both" {
        let v = json!({
            "config": config_json(&params, nmax, 2 * nmax + 1, digits),
            "series": series.to_json(digits as usize),
        });
        write(
            &out.join("asympt_series.json"),
            &serde_json::to_string_pretty(&v).unwrap(),
        )?;
    }

    let trend_ok = ratio_trend_ok(&series);
    println!(
        "alpha exponent {}, beta exponent {}",
        dec(&series.alpha_exponent, 6),
        dec(&series.beta_exponent, 6)
    );
    if trend_ok {
        println!("ok: |ratio - 1| shrinks along the grid and both exponents are negative");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("FAIL: ratio series does not contract toward 1");
        Ok(ExitCode::from(EXIT_RESIDUAL))
    }
}

fn ratio_trend_ok(series: &AsymptoticSeries) -> bool {
    let first = series.rows.first().expect("nonempty");
    let last = series.rows.last().expect("nonempty");
    let bits = first.alpha_ratio.prec();
    let dev = |x: &Real| Float::with_val(bits, x - &Float::with_val(bits, 1)).abs();
    dev(&last.alpha_ratio) < dev(&first.alpha_ratio)
        && dev(&last.beta_ratio) < dev(&first.beta_ratio)
        && series.alpha_exponent < 0u32
        && series.beta_exponent < 0u32
}
