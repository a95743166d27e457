use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use idepcag::floquet::{
    analyze_with, floquet_exponents, q_samples, verify_normal_form, AnalyzeOptions, NormalForm, Propagator,
    ResidualReport,
};
use idepcag::json::{format_float, to_string_pretty};
use idepcag::linalg::{CMatrix, C64};
use idepcag::model::{load_system_with, LoadOptions, SystemSpec};
use idepcag::simulate::{solve_cauchy, solve_direct, Trajectory};
use idepcag::sweep::{run_sweep, sweep_csv, sweep_values};
use idepcag::transition::hypothesis_check;
use idepcag::Error;

const EXIT_INPUT: u8 = 1;
const EXIT_HYPOTHESIS: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "idepcag", version, about = "Floquet analysis of periodic impulsive systems with piecewise constant arguments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Cauchy,
    Direct,
    Both,
}

#[derive(clap::Args, Debug)]
struct Output {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monodromy matrix, multipliers, exponents and stability verdict.
    Analyze {
        system: PathBuf,
        /// Exit with status 2 when the smallness hypothesis fails.
        #[arg(long)]
        strict_h: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Sample a trajectory.
    Simulate {
        system: PathBuf,
        /// Initial vector, comma separated, entries like `1.5`, `-2i`, `0.3-1e-2i`.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt_out: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Cauchy)]
        method: MethodArg,
        #[command(flatten)]
        output: Output,
    },
    /// Floquet normal form: P and samples of Q(t) over one period of Q.
    Factorize {
        system: PathBuf,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Use the real logarithm of X(omega)^2; Q is then 2 omega periodic.
        #[arg(long)]
        real: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Residuals of the structural identities; exit 4 on any breach.
    Verify {
        system: PathBuf,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Analyse a templated system over a range of one parameter.
    Sweep {
        template: PathBuf,
        #[arg(long)]
        param: String,
        /// `lo:hi`
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input() { EXIT_INPUT } else { EXIT_NUMERIC };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load(path: &Path, options: LoadOptions) -> Result<SystemSpec, Failure> {
    let text = read(path)?;
    load_system_with(&text, options).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn emit(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    to_string_pretty(value).map_err(|e| Failure {
        code: EXIT_NUMERIC,
        message: format!("serialisation failed: {e}"),
    })
}

fn matrix_value(m: &CMatrix) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|row| Value::Array(row.into_iter().map(|z| json!([z.re, z.im])).collect()))
            .collect(),
    )
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`).
fn parse_complex(text: &str) -> Option<C64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re_text, im_text) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("", body),
    };
    let re = if re_text.is_empty() { 0.0 } else { re_text.parse().ok()? };
    let im = match im_text {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse().ok()?,
    };
    Some(C64::new(re, im))
}

fn parse_vector(text: &str) -> Result<Vec<C64>, Failure> {
    text.split(',')
        .map(|part| parse_complex(part).ok_or_else(|| input_error(format!("--x0: cannot parse `{part}` as a complex number"))))
        .collect()
}

fn parse_range(text: &str) -> Result<(f64, f64), Failure> {
    let err = || input_error(format!("--range: expected lo:hi, got `{text}`"));
    let (lo, hi) = text.split_once(':').ok_or_else(err)?;
    let lo: f64 = lo.trim().parse().map_err(|_| err())?;
    let hi: f64 = hi.trim().parse().map_err(|_| err())?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(err());
    }
    Ok((lo, hi))
}

fn cmd_analyze(system: &Path, strict_h: bool, output: &Output) -> Result<(), Failure> {
    let spec = load(system, LoadOptions::default())?;
    let hypothesis = hypothesis_check(&spec)?;
    let passed = hypothesis.passed;
    let prop = Propagator::new(&spec)?;
    let report = analyze_with(&prop, hypothesis, AnalyzeOptions::default())?;
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("j,re_rho,im_rho,modulus,arg,re_lambda,im_lambda,verdict,oscillatory\n");
            for (j, (rho, lambda)) in report.multipliers.iter().zip(&report.exponents).enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    j + 1,
                    format_float(rho.re),
                    format_float(rho.im),
                    format_float(report.moduli[j]),
                    format_float(report.arguments[j]),
                    format_float(lambda.re),
                    format_float(lambda.im),
                    report.verdict,
                    report.oscillatory
                ));
            }
            out
        }
    };
    emit(output, &text)?;
    if strict_h && !passed {
        return Err(Failure {
            code: EXIT_HYPOTHESIS,
            message: format!(
                "smallness hypothesis fails (nu+ = {:.6}, nu- = {:.6})",
                report.hypothesis.nu_plus, report.hypothesis.nu_minus
            ),
        });
    }
    Ok(())
}

fn trajectory_value(tr: &Trajectory) -> Value {
    let points: Vec<Value> = tr
        .points
        .iter()
        .zip(&tr.states)
        .map(|(p, x)| {
            json!({
                "t": p.t,
                "kind": p.kind.name(),
                "x": x.iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "method": tr.method.name(),
        "tolerances": {
            "ode_abs": tr.tolerances.ode_abs,
            "ode_rel": tr.tolerances.ode_rel,
            "alg": tr.tolerances.alg,
        },
        "points": points,
    })
}

fn cmd_simulate(system: &Path, x0: &str, t_end: f64, dt_out: f64, method: MethodArg, output: &Output) -> Result<(), Failure> {
    let spec = load(system, LoadOptions::default())?;
    let x0 = parse_vector(x0)?;
    if x0.len() != spec.dim() {
        return Err(input_error(format!("--x0: expected {} components, found {}", spec.dim(), x0.len())));
    }
    if !(t_end > 0.0) {
        return Err(input_error("--t-end must be positive"));
    }
    if !(dt_out > 0.0) {
        return Err(input_error("--dt-out must be positive"));
    }
    let trajectories = match method {
        MethodArg::Cauchy => vec![solve_cauchy(&spec, &x0, t_end, dt_out)?],
        MethodArg::Direct => vec![solve_direct(&spec, &x0, t_end, dt_out)?],
        MethodArg::Both => {
            let a = solve_cauchy(&spec, &x0, t_end, dt_out)?;
            let b = solve_direct(&spec, &x0, t_end, dt_out)?;
            eprintln!(
                "max discrepancy: {} (max state norm {})",
                format_float(a.max_discrepancy(&b)),
                format_float(a.scale())
            );
            vec![a, b]
        }
    };
    let both = trajectories.len() > 1;
    let text = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::new();
            for (i, tr) in trajectories.iter().enumerate() {
                tr.write_csv(&mut out, both, i == 0);
            }
            out
        }
        Format::Json => {
            let values: Vec<Value> = trajectories.iter().map(trajectory_value).collect();
            if both {
                to_json(&values)?
            } else {
                to_json(&values[0])?
            }
        }
    };
    emit(output, &text)
}

fn residual_summary(report: &ResidualReport) -> String {
    let mut out = format!("{:<26} {:>20} {:>20}  status\n", "identity", "residual", "threshold");
    for r in &report.entries {
        out.push_str(&format!(
            "{:<26} {:>20} {:>20}  {}\n",
            r.name,
            format_float(r.value),
            format_float(r.threshold),
            if r.passed { "ok" } else { "FAIL" }
        ));
    }
    out
}

fn cmd_factorize(system: &Path, samples: usize, real: bool, output: &Output) -> Result<(), Failure> {
    if samples == 0 {
        return Err(input_error("--samples must be at least 1"));
    }
    let spec = load(system, LoadOptions::default())?;
    let prop = Propagator::new(&spec)?;
    let omega = spec.omega();
    let x = prop.monodromy();
    let form = if real {
        NormalForm::real(x, omega)?
    } else {
        NormalForm::complex(x, omega)?
    };
    let multipliers = floquet_exponents(x, omega)?;
    let residuals = verify_normal_form(&prop, &form, &multipliers, 16)?;
    let times: Vec<f64> = (0..samples).map(|i| form.period * i as f64 / samples as f64).collect();
    let q = q_samples(&prop, &form.p, &times)?;
    let n = spec.dim();
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let sample_values: Vec<Value> = times
                .iter()
                .zip(&q)
                .map(|(t, m)| json!({"t": t, "Q": matrix_value(m)}))
                .collect();
            to_json(&json!({
                "real": real,
                "period": form.period,
                "P": matrix_value(&form.p),
                "samples": sample_values,
                "residuals": residuals,
            }))?
        }
        Format::Csv => {
            for (i, row) in form.p.rows().iter().enumerate() {
                let cells: Vec<String> = row
                    .iter()
                    .map(|z| {
                        let sign = if z.im.is_sign_negative() { "" } else { "+" };
                        format!("{}{sign}{}i", format_float(z.re), format_float(z.im))
                    })
                    .collect();
                eprintln!("P[{i}] = {}", cells.join("  "));
            }
            eprint!("{}", residual_summary(&residuals));
            let mut out = String::from("t");
            for i in 1..=n {
                for j in 1..=n {
                    out.push_str(&format!(",re_q{i}{j},im_q{i}{j}"));
                }
            }
            out.push('\n');
            for (t, m) in times.iter().zip(&q) {
                out.push_str(&format_float(*t));
                for z in m.as_slice() {
                    out.push_str(&format!(",{},{}", format_float(z.re), format_float(z.im)));
                }
                out.push('\n');
            }
            out
        }
    };
    emit(output, &text)
}

fn cmd_verify(system: &Path, samples: usize, output: &Output) -> Result<(), Failure> {
    if samples == 0 {
        return Err(input_error("--samples must be at least 1"));
    }
    // periodicity is reported as a residual here instead of refusing the file
    let spec = load(system, LoadOptions { certify_periodicity: false })?;
    let prop = Propagator::new(&spec)?;
    let omega = spec.omega();
    let multipliers = floquet_exponents(prop.monodromy(), omega)?;
    let form = NormalForm::complex(prop.monodromy(), omega)?;
    let report = verify_normal_form(&prop, &form, &multipliers, samples)?;
    eprint!("{}", residual_summary(&report));
    emit(output, &to_json(&report)?)?;
    if !report.passed {
        let failed: Vec<&str> = report.entries.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        return Err(Failure {
            code: EXIT_VERIFY,
            message: format!("residuals above threshold: {}", failed.join(", ")),
        });
    }
    Ok(())
}

fn cmd_sweep(template: &Path, param: &str, range: &str, steps: usize, output: &Output) -> Result<(), Failure> {
    let (lo, hi) = parse_range(range)?;
    if steps == 0 {
        return Err(input_error("--steps must be at least 1"));
    }
    let text = read(template)?;
    let rows = run_sweep(&text, param, &sweep_values(lo, hi, steps))?;
    let out = match output.format.unwrap_or(Format::Csv) {
        Format::Csv => sweep_csv(param, &rows),
        Format::Json => {
            let values: Vec<Value> = rows
                .iter()
                .map(|row| match &row.outcome {
                    Ok(p) => json!({
                        "value": row.value,
                        "multipliers": p.multipliers.iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>(),
                        "lyapunov": p.lyapunov,
                        "verdict": p.verdict.to_string(),
                        "oscillatory": p.oscillatory,
                    }),
                    Err(e) => json!({"value": row.value, "error": e}),
                })
                .collect();
            to_json(&values)?
        }
    };
    emit(output, &out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { system, strict_h, output } => cmd_analyze(&system, strict_h, &output),
        Command::Simulate {
            system,
            x0,
            t_end,
            dt_out,
            method,
            output,
        } => cmd_simulate(&system, &x0, t_end, dt_out, method, &output),
        Command::Factorize {
            system,
            samples,
            real,
            output,
        } => cmd_factorize(&system, samples, real, &output),
        Command::Verify { system, samples, output } => cmd_verify(&system, samples, &output),
        Command::Sweep {
            template,
            param,
            range,
            steps,
            output,
        } => cmd_sweep(&template, &param, &range, steps, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLOQUET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("6"), Some(C64::new(6.0, 0.0)));
        assert_eq!(parse_complex("1+2i"), Some(C64::new(1.0, 2.0)));
        assert_eq!(parse_complex("-0.5-1e-3i"), Some(C64::new(-0.5, -1e-3)));
        assert_eq!(parse_complex("2.5e+1-i"), Some(C64::new(25.0, -1.0)));
        assert_eq!(parse_complex("-i"), Some(C64::new(0.0, -1.0)));
        assert_eq!(parse_complex(" 3i "), Some(C64::new(0.0, 3.0)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex(""), None);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-1.5:1.5").ok(), Some((-1.5, 1.5)));
        assert!(parse_range("1.5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
