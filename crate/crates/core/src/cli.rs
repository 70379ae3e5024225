//! Command-line front end.
//!
//! Exit status: 0 on success or a valid result, 1 when a certificate is
//! invalid or a checked inequality fails, 2 on usage or input errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::certificates::{self, Certificate, GaussianScheduleParams};
use crate::decimal::format_dd;
use crate::discrete::{energy_of_set, ratio_report, DiscreteFunction, LatticeSet};
use crate::error::{Error, Result};
use crate::experiments::{self, render_csv, BoundsOptions, CsvRow};
use crate::optimizer::{self, OptimizerConfig};
use crate::selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "energy-lab", version, about = "Additive energies, L4-Fourier norm inequalities and lower bounds for t_n")]
pub struct Cli {
    /// Output format (default depends on the command)
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact additive energy of a set
    Energy(EnergyArgs),
    /// Compare ||f^||_4 with ||f||_q
    Norms {
        /// JSON file {"offset": int, "values": [...]}
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        q: f64,
    },
    /// Build and check a lower-bound certificate
    #[command(subcommand)]
    Certify(CertifyCommand),
    /// Estimate q_n and t_n by optimization and bisection
    Estimate {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        starts: usize,
    },
    /// Table of lower bounds and targets for a range of n
    BoundsTable {
        #[arg(long)]
        n_min: u64,
        #[arg(long)]
        n_max: u64,
        #[arg(long)]
        with_optimizer: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Energies of lattice points in a ball (origin and half-integer centre)
    Ball {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        radius: f64,
    },
    /// Run the acceptance checks and write their results
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for selftest_results.json and the manifest
        #[arg(long, default_value = "selftest-out")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct EnergyArgs {
    /// File with one point per line, coordinates separated by commas
    #[arg(long)]
    pub set: Option<PathBuf>,
    /// Points separated by ';', coordinates by ','. Without ';' the string
    /// is a list of one-dimensional points ("0,1,3").
    #[arg(long)]
    pub inline: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum CertifyCommand {
    /// f = 1_I + eps delta_0; without --eps the best eps = 2^-j is used
    Perturbation {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Sampled truncated Gaussian
    Gaussian {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        eps: f64,
    },
}

struct Outcome {
    text: String,
    success: bool,
}

fn parse_point(s: &str, line: usize, source: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|c| {
            c.trim().parse::<i64>().map_err(|_| Error::Parse {
                path: source.to_string(),
                line,
                msg: format!("{:?} is not an integer coordinate", c.trim()),
            })
        })
        .collect()
}

fn set_from_points(points: Vec<(usize, Vec<i64>)>, source: &str) -> Result<LatticeSet> {
    let Some(dim) = points.first().map(|p| p.1.len()) else {
        return Err(Error::Parse { path: source.to_string(), line: 0, msg: "no points".into() });
    };
    if let Some((line, p)) = points.iter().find(|p| p.1.len() != dim) {
        return Err(Error::Parse {
            path: source.to_string(),
            line: *line,
            msg: format!("point has {} coordinates, expected {dim}", p.len()),
        });
    }
    let mut seen = std::collections::HashMap::new();
    for (line, p) in &points {
        if let Some(first) = seen.insert(p.clone(), *line) {
            return Err(Error::Parse {
                path: source.to_string(),
                line: *line,
                msg: format!("duplicate point, first given on line {first}"),
            });
        }
    }
    LatticeSet::from_points(dim, points.into_iter().map(|p| p.1).collect())
}

/// Reads a set file: one point per line, blank lines and `#` comments
/// ignored.
pub fn parse_set_file(text: &str, source: &str) -> Result<LatticeSet> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        points.push((i + 1, parse_point(line, i + 1, source)?));
    }
    set_from_points(points, source)
}

pub fn parse_inline_set(text: &str) -> Result<LatticeSet> {
    let source = "--inline";
    let points = if text.contains(';') {
        text.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(i, s)| parse_point(s, i + 1, source).map(|p| (i + 1, p)))
            .collect::<Result<Vec<_>>>()?
    } else {
        parse_point(text, 1, source)?.into_iter().enumerate().map(|(i, x)| (i + 1, vec![x])).collect()
    };
    set_from_points(points, source)
}

pub fn read_function_file(path: &Path) -> Result<DiscreteFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn certificate_text(c: &Certificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind            {:?}", c.kind);
    let _ = writeln!(s, "n               {}", c.n);
    let _ = writeln!(s, "q               {}", format_dd(c.q));
    let _ = writeln!(s, "lhs             {}", format_dd(c.lhs));
    let _ = writeln!(s, "rhs             {}", format_dd(c.rhs));
    let _ = writeln!(s, "margin          {}", format_dd(c.margin));
    let _ = writeln!(s, "err             {:e}", c.err);
    let _ = writeln!(s, "implied_t_bound {}", format_dd(c.implied_t_bound));
    let _ = writeln!(s, "valid           {}", c.valid);
    s
}

fn certificate_csv(c: &Certificate) -> String {
    let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    format!(
        "kind,n,q,lhs,rhs,margin,err,implied_t_bound,valid\n{kind},{},{},{},{},{},{:e},{},{}\n",
        c.n,
        format_dd(c.q),
        format_dd(c.lhs),
        format_dd(c.rhs),
        format_dd(c.margin),
        c.err,
        format_dd(c.implied_t_bound),
        c.valid
    )
}

fn render_certificate(c: &Certificate, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(c),
        Format::Csv => Ok(certificate_csv(c)),
        Format::Text => Ok(certificate_text(c)),
    }
}

fn render_rows<T: CsvRow + Serialize>(rows: &[T], format: Format) -> Result<String> {
    match format {
        Format::Json => experiments::render_json(rows),
        Format::Csv | Format::Text => Ok(render_csv(rows)),
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let fmt = |default: Format| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Energy(args) => {
            let set = match (&args.set, &args.inline) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    parse_set_file(&text, &path.display().to_string())?
                }
                (None, Some(s)) => parse_inline_set(s)?,
                (None, None) => unreachable!("clap requires one input"),
            };
            let energy = energy_of_set(&set);
            let text = match fmt(Format::Text) {
                Format::Text => format!("{energy}\n"),
                Format::Csv => format!("dim,side,size,energy\n{},{},{},{energy}\n", set.dim(), set.side(), set.len()),
                Format::Json => to_json(&json!({
                    "dim": set.dim(),
                    "side": set.side(),
                    "size": set.len(),
                    "energy": energy.to_string(),
                }))?,
            };
            Ok(Outcome { text, success: true })
        }
        Command::Norms { f, q } => {
            let func = read_function_file(f)?;
            let report = ratio_report(&func, *q)?;
            let holds = report.inequality_holds();
            let text = match fmt(Format::Json) {
                Format::Json => to_json(&json!({
                    "q": report.q,
                    "l4hat": report.l4hat,
                    "lq": report.lq,
                    "ratio": report.ratio,
                    "err": report.err,
                    "inequality_holds": holds,
                }))?,
                Format::Csv => format!(
                    "q,l4hat,lq,ratio,err,inequality_holds\n{:?},{:?},{:?},{:?},{:e},{holds}\n",
                    report.q, report.l4hat, report.lq, report.ratio, report.err
                ),
                Format::Text => format!(
                    "q      {:?}\nl4hat  {:?}\nlq     {:?}\nratio  {:?}\nerr    {:e}\nholds  {holds}\n",
                    report.q, report.l4hat, report.lq, report.ratio, report.err
                ),
            };
            Ok(Outcome { text, success: holds })
        }
        Command::Certify(which) => {
            let cert = match which {
                CertifyCommand::Perturbation { n, eps: Some(eps) } => {
                    certificates::build_perturbation_certificate(*n, *eps)?
                }
                CertifyCommand::Perturbation { n, eps: None } => certificates::best_perturbation_certificate(*n)?.1,
                CertifyCommand::Gaussian { n, eps } => {
                    certificates::build_gaussian_certificate(&GaussianScheduleParams::new(*n, *eps)?)?
                }
            };
            Ok(Outcome { text: render_certificate(&cert, fmt(Format::Json))?, success: cert.valid })
        }
        Command::Estimate { n, tol, seed, starts } => {
            let mut config = OptimizerConfig::new(*n, 1.5).with_seed(*seed);
            config.starts = *starts;
            let est = optimizer::estimate_qn(*n, *tol, &config)?;
            let text = match fmt(Format::Json) {
                Format::Json => to_json(&est)?,
                Format::Csv => format!(
                    "n,q_hat,t_hat,c_emp,witness\n{},{:?},{:?},{:?},{}\n",
                    est.n,
                    est.q_hat,
                    est.t_hat,
                    est.c_emp,
                    est.witness.is_some()
                ),
                Format::Text => format!(
                    "n      {}\nq_hat  {:?}\nt_hat  {:?}\nc_emp  {:?}\nwitness {}\n",
                    est.n,
                    est.q_hat,
                    est.t_hat,
                    est.c_emp,
                    est.witness.is_some()
                ),
            };
            Ok(Outcome { text, success: true })
        }
        Command::BoundsTable { n_min, n_max, with_optimizer, seed } => {
            if n_min > n_max {
                return Err(Error::InvalidParameter(format!("--n-min {n_min} exceeds --n-max {n_max}")));
            }
            let options = BoundsOptions { with_optimizer: *with_optimizer, seed: *seed, ..BoundsOptions::default() };
            let ns: Vec<u64> = (*n_min..=*n_max).collect();
            let rows = experiments::bounds_table(&ns, &options)?;
            Ok(Outcome { text: render_rows(&rows, fmt(Format::Csv))?, success: true })
        }
        Command::Ball { d, radius } => {
            let rows = experiments::ball_energy_experiment(&[*d], &[*radius])?;
            let success = rows.iter().all(|r| r.within_trivial_bounds() && r.oracle_match != Some(false));
            Ok(Outcome { text: render_rows(&rows, fmt(Format::Json))?, success })
        }
        Command::Selftest { seed, out_dir } => {
            let results = selftest::run_all(*seed);
            selftest::write_outputs(&results, *seed, out_dir)?;
            let success = results.iter().all(|r| r.passed);
            let text = match fmt(Format::Text) {
                Format::Json => to_json(&results)?,
                Format::Csv => {
                    let mut s = String::from("id,passed,title\n");
                    for r in &results {
                        let _ = writeln!(s, "{},{},{}", r.id, r.passed, r.title);
                    }
                    s
                }
                Format::Text => {
                    let mut s: String = results.iter().map(|r| r.line() + "\n").collect();
                    let passed = results.iter().filter(|r| r.passed).count();
                    let _ = writeln!(s, "{passed}/{} criteria passed", results.len());
                    s
                }
            };
            Ok(Outcome { text, success })
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.output {
                Some(path) => std::fs::write(path, &outcome.text).map_err(|e| Error::io(path, e)),
                None => out.write_all(outcome.text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
            if outcome.success {
                EXIT_OK
            } else {
                EXIT_INVALID
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Applies `ENERGY_LAB_THREADS` to the global thread pool.
pub fn configure_threads() {
    if let Some(n) = std::env::var("ENERGY_LAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    configure_threads();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv: Vec<&str> = std::iter::once("energy-lab").chain(args.iter().copied()).collect();
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn inline_energy() {
        assert_eq!(run_capture(&["energy", "--inline", "0,1"]), (0, "6\n".into(), String::new()));
        assert_eq!(run_capture(&["energy", "--inline", "0,1,2"]).1, "19\n");
        // two-dimensional: {0,1}^2 has energy 36
        assert_eq!(run_capture(&["energy", "--inline", "0,0;0,1;1,0;1,1"]).1, "36\n");
        assert_eq!(run_capture(&["energy", "--inline", "0,1;"]).1, "1\n");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_capture(&["energy"]).0, 2);
        assert_eq!(run_capture(&["energy", "--inline", "0,x"]).0, 2);
        assert_eq!(run_capture(&["energy", "--inline", "0,1;2"]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["certify", "perturbation", "--n", "3", "--bogus", "1"]).0, 2);
        assert_eq!(run_capture(&["certify", "perturbation", "--n", "2"]).0, 2);
    }

    #[test]
    fn set_file_errors_carry_line_numbers() {
        let e = parse_set_file("0,0\n# c\n\n1,x\n", "s.txt").unwrap_err();
        assert!(e.to_string().contains("s.txt: line 4"), "{e}");
        let e = parse_set_file("0,0\n1\n", "s.txt").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse_set_file("3\n3\n", "s.txt").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let s = parse_set_file("5,5\n6,5\n", "s.txt").unwrap();
        assert_eq!(s.points(), &[vec![0, 0], vec![1, 0]]);
    }

    #[test]
    fn certify_perturbation_prints_valid_json() {
        let (code, out, _) = run_capture(&["certify", "perturbation", "--n", "3"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["valid"], true);
        assert_eq!(v["kind"], "perturbation");
        let (code, out, _) = run_capture(&["certify", "perturbation", "--n", "3", "--eps", "0"]);
        assert_eq!(code, 1);
        assert!(out.contains("\"valid\": false"));
        let (_, out, _) = run_capture(&["certify", "perturbation", "--n", "4", "--eps", "0.5", "--format", "csv"]);
        assert!(out.starts_with("kind,n,q"));
        assert!(out.contains("\nperturbation,4,"));
    }

    #[test]
    fn norms_of_delta() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("delta.json");
        std::fs::write(&p, r#"{"offset": 0, "values": [1]}"#).unwrap();
        let (code, out, _) = run_capture(&["norms", "--f", p.to_str().unwrap(), "--q", "1.5"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["ratio"], 1.0);

        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, "{\n  \"offset\": 0,\n  \"values\": [1, oops]\n}").unwrap();
        let (code, _, err) = run_capture(&["norms", "--f", bad.to_str().unwrap(), "--q", "1.5"]);
        assert_eq!(code, 2);
        assert!(err.contains("line 3"), "{err}");

        let pair = dir.path().join("pair.json");
        std::fs::write(&pair, r#"{"offset": 0, "values": ["1.0", "1.0"]}"#).unwrap();
        let (code, _, _) = run_capture(&["norms", "--f", pair.to_str().unwrap(), "--q", "1.6"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn output_flag_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("table.csv");
        let (code, out, _) = run_capture(&["bounds-table", "--n-min", "2", "--n-max", "3", "--output", p.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.is_empty());
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("n,trivial_lower,perturbation_lower,gaussian_lower,asymptotic_target,empirical_t,reference\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn ball_command() {
        let (code, out, _) = run_capture(&["ball", "--d", "2", "--radius", "2.5", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.contains("\n2,2.5,0 0,5,21,"));
    }
}
