//! `psifrac`: evaluate psi-Caputo derivatives, run the series decomposition,
//! solve FDEs and fit population models, writing CSV.
//!
//! Exit codes: 0 ok, 2 usage, 3 numeric failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use psifrac::decomposition::approx_derivative;
use psifrac::fde::{solve, CauchyProblem};
use psifrac::fitting::{
    fit, load_csv, projection_error, write_report, FitOptions, ModelSpec, N0Policy, Params, ReportRow,
};
use psifrac::function::{derivs, real_fn, SmoothFn};
use psifrac::kernels::{builtin_kernel, parse_kernel_spec, validate, Interval, Kernel};
use psifrac::operators::{caputo_derivative, power_rule, DerivativeSpec, Side};
use psifrac::quadrature::QuadConfig;
use psifrac::special::{rgamma, MLConfig};
use psifrac::Error;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "psifrac", version, about = "Caputo fractional derivatives with respect to another function")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derivative of a built-in function on a grid: `x,exact,quadrature`.
    Eval(EvalArgs),
    /// Series-decomposition approximations: `x,exact,approx_N...`.
    Approx(ApproxArgs),
    /// Solve `D^alpha f = g(x, f)` through the decomposition; trajectory CSV.
    Solve(SolveArgs),
    /// Least-squares fit of a population model; fit-report CSV.
    Fit(FitArgs),
    /// Projected value and percentage error at `--t`.
    Project(ProjectArgs),
}

#[derive(Args)]
struct Grid {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    b: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 101)]
    grid: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "linear")]
    kernel: String,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long = "fn", value_enum, default_value_t = TestFn::Pow2)]
    function: TestFn,
    #[command(flatten)]
    grid: Grid,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, default_value = "log1p")]
    kernel: String,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long = "fn", value_enum, default_value_t = TestFn::Ln2p1)]
    function: TestFn,
    #[command(flatten)]
    grid: Grid,
    /// Truncation orders, comma separated.
    #[arg(long = "N", value_name = "N", value_delimiter = ',', default_values_t = [1usize, 3, 5])]
    truncation: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "log1p")]
    kernel: String,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    b: f64,
    #[arg(long = "N", value_name = "N", default_value_t = 6)]
    truncation: usize,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    /// Initial value `f(a)`.
    #[arg(long, allow_negative_numbers = true)]
    f0: f64,
    #[arg(long, value_enum, default_value_t = Rhs::Nonlinear)]
    rhs: Rhs,
    /// Rate for `--rhs linear`.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = FamilyArg::Fractional)]
    family: FamilyArg,
    #[arg(long, default_value = "linear")]
    kernel: String,
    /// Extra free parameters, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    free: Vec<FreeArg>,
    /// Years per model time unit.
    #[arg(long = "time-unit", default_value_t = 10.0)]
    time_unit: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Projection time, in model units from the first year.
    #[arg(long, default_value_t = 10.5)]
    t: f64,
    #[arg(long, default_value_t = 7350.0)]
    observed: f64,
    /// Use these parameters instead of fitting.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, requires = "lambda")]
    alpha: Option<f64>,
    #[arg(long = "kernel-b", requires = "lambda")]
    kernel_b: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestFn {
    /// `(psi(x) - psi(a))^2`
    Pow2,
    /// `E_alpha((psi(x) - psi(a))^alpha)`
    Mlexp,
    /// `ln^2(x + 1)`
    Ln2p1,
    /// `2x - x^2`
    Parab,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Rhs {
    /// `2/Gamma(2.5) s^1.5 + s^2 - f`, `s = psi(x) - psi(a)`; solution `s^2`.
    Nonlinear,
    /// `lambda f`.
    Linear,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FamilyArg {
    Classical,
    Fractional,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FreeArg {
    B,
    N0,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::UnknownKernel(_)
            | Error::KernelParameter(_)
            | Error::KernelViolation { .. }
            | Error::IntegerOrder(_)
            | Error::Dataset(_)
            | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn kernel_on(spec: &str, a: f64, b: f64) -> Outcome<(Kernel, Interval)> {
    let kernel = parse_kernel_spec(spec)?;
    let iv = Interval::new(a, b)?;
    validate(&kernel, &iv, 64)?;
    Ok((kernel, iv))
}

fn grid_points(g: &Grid) -> Outcome<(f64, f64, Vec<f64>)> {
    if g.grid < 2 {
        return usage("--grid needs at least 2 points");
    }
    let iv = Interval::new(g.a, g.b)?;
    Ok((g.a, g.b, iv.uniform_grid(g.grid)))
}

fn test_function(which: TestFn, kernel: &Kernel, a: f64, alpha: f64) -> SmoothFn {
    match which {
        TestFn::Pow2 => SmoothFn::psi_power(kernel, Side::Left, a, 2.0),
        TestFn::Mlexp => SmoothFn::psi_mittag_leffler(kernel, Side::Left, a, alpha, 1.0, MLConfig::default()),
        TestFn::Ln2p1 => SmoothFn::with_derivatives(
            |x: f64| x.ln_1p().powi(2),
            derivs([
                real_fn(|x: f64| 2.0 * x.ln_1p() / (1.0 + x)),
                real_fn(|x: f64| (2.0 - 2.0 * x.ln_1p()) / (1.0 + x).powi(2)),
                real_fn(|x: f64| (4.0 * x.ln_1p() - 6.0) / (1.0 + x).powi(3)),
            ]),
        ),
        TestFn::Parab => SmoothFn::with_derivatives(
            |x: f64| 2.0 * x - x * x,
            derivs([real_fn(|x: f64| 2.0 - 2.0 * x), real_fn(|_| -2.0), real_fn(|_| 0.0)]),
        ),
    }
}

/// Closed-form left derivative where one is known.
fn exact_derivative(which: TestFn, kernel: &Kernel, iv: &Interval, alpha: f64, f: &SmoothFn, x: f64) -> Outcome<Option<f64>> {
    let square = || power_rule(kernel, alpha, Side::Left, iv, 3.0, x);
    Ok(match which {
        TestFn::Pow2 => Some(square()?),
        TestFn::Mlexp => Some(f.value(x)),
        TestFn::Ln2p1 if kernel.name() == "log1p" && iv.a == 0.0 => Some(square()?),
        TestFn::Parab if kernel.name() == "linear" => {
            // 2x - x^2 = const + (2 - 2a) s - s^2 with s = x - a
            let linear = power_rule(kernel, alpha, Side::Left, iv, 2.0, x)?;
            Some((2.0 - 2.0 * iv.a) * linear - square()?)
        }
        _ => None,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Outcome<()> {
    let result = match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
}

fn check_alpha(alpha: f64) -> Outcome<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return usage(format!("--alpha must be positive, got {alpha}"));
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Outcome<()> {
    check_alpha(args.alpha)?;
    let (a, b, grid) = grid_points(&args.grid)?;
    let (kernel, iv) = kernel_on(&args.kernel, a, b)?;
    let spec = DerivativeSpec::left(args.alpha, iv)?;
    let f = test_function(args.function, &kernel, a, args.alpha);
    let q = QuadConfig::default();
    let mut text = String::from("x,exact,quadrature\n");
    for x in grid {
        let exact = exact_derivative(args.function, &kernel, &iv, args.alpha, &f, x)?;
        let quad = caputo_derivative(&kernel, &spec, &f, x, &q)?;
        writeln!(text, "{x},{},{quad}", fmt_opt(exact)).unwrap();
    }
    emit(&args.out, &text)
}

fn cmd_approx(args: &ApproxArgs) -> Outcome<()> {
    check_alpha(args.alpha)?;
    if args.truncation.is_empty() || args.truncation.contains(&0) {
        return usage("--N values must be at least 1");
    }
    let (a, b, grid) = grid_points(&args.grid)?;
    let (kernel, iv) = kernel_on(&args.kernel, a, b)?;
    let spec = DerivativeSpec::left(args.alpha, iv)?;
    let f = test_function(args.function, &kernel, a, args.alpha);
    let columns = args
        .truncation
        .iter()
        .map(|&n| approx_derivative(&kernel, &f, &spec, &grid, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = String::from("x,exact");
    for n in &args.truncation {
        write!(text, ",approx_{n}").unwrap();
    }
    text.push('\n');
    for (i, &x) in grid.iter().enumerate() {
        let exact = exact_derivative(args.function, &kernel, &iv, args.alpha, &f, x)?;
        write!(text, "{x},{}", fmt_opt(exact)).unwrap();
        for col in &columns {
            write!(text, ",{}", col[i]).unwrap();
        }
        text.push('\n');
    }
    emit(&args.out, &text)
}

fn cmd_solve(args: &SolveArgs) -> Outcome<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return usage(format!("--alpha must lie in (0, 1), got {}", args.alpha));
    }
    if args.truncation == 0 {
        return usage("--N must be at least 1");
    }
    if args.steps < 10 {
        return usage("--steps must be at least 10");
    }
    let (kernel, iv) = kernel_on(&args.kernel, args.a, args.b)?;
    let psi_a = kernel.psi(args.a);
    let problem = match args.rhs {
        Rhs::Nonlinear => {
            let c = 2.0 * rgamma(2.5);
            let k = kernel.clone();
            CauchyProblem::new(
                kernel,
                args.alpha,
                iv,
                move |x: f64, f: f64| {
                    let s = k.psi(x) - psi_a;
                    c * s.powf(1.5) + s * s - f
                },
                args.f0,
            )?
        }
        Rhs::Linear => {
            let lambda = args.lambda;
            CauchyProblem::new(kernel, args.alpha, iv, move |_, f| lambda * f, args.f0)?
        }
    };
    let trajectory = solve(&problem, args.truncation, args.steps)?;
    let mut buf = Vec::new();
    trajectory.write_csv(&mut buf)?;
    emit(&args.out, &String::from_utf8_lossy(&buf))
}

fn model_spec(m: &ModelArgs) -> Outcome<ModelSpec> {
    if !(m.time_unit > 0.0 && m.time_unit.is_finite()) {
        return usage("--time-unit must be positive");
    }
    let free_b = m.free.contains(&FreeArg::B);
    let mut spec = match m.family {
        FamilyArg::Classical => {
            if free_b {
                return usage("--free b needs the fractional family");
            }
            ModelSpec::classical()
        }
        FamilyArg::Fractional => {
            let kernel = if free_b && m.kernel.trim() == "pow1p" {
                builtin_kernel("pow1p", &[("b", 1.0)])?
            } else {
                parse_kernel_spec(&m.kernel)?
            };
            let spec = ModelSpec::fractional(kernel);
            if free_b {
                spec.with_free_b().map_err(|e| Failure::Usage(e.to_string()))?
            } else {
                spec
            }
        }
    };
    if m.free.contains(&FreeArg::N0) {
        spec = spec.with_n0_policy(N0Policy::Free);
    }
    Ok(spec)
}

fn kernel_label(spec: &ModelSpec) -> String {
    if spec.free.contains(&psifrac::fitting::Param::B) {
        spec.kernel.name().to_string()
    } else {
        spec.kernel.to_string()
    }
}

fn cmd_fit(args: &FitArgs) -> Outcome<()> {
    let spec = model_spec(&args.model)?;
    let data = load_csv(&args.model.data, args.model.time_unit)?;
    let result = fit(&spec, &data, None, &FitOptions::default())?;
    let row = ReportRow {
        family: spec.family,
        kernel: kernel_label(&spec),
        result,
    };
    let mut buf = Vec::new();
    write_report(&[row], &mut buf)?;
    emit(&args.out, &String::from_utf8_lossy(&buf))
}

fn cmd_project(args: &ProjectArgs) -> Outcome<()> {
    let spec = model_spec(&args.model)?;
    let data = load_csv(&args.model.data, args.model.time_unit)?;
    let params = match args.lambda {
        Some(lambda) => {
            let mut p = Params::new(lambda, args.alpha.unwrap_or(1.0));
            p.b = args.kernel_b;
            spec.resolve(&p, &data)
        }
        None => fit(&spec, &data, None, &FitOptions::default())?.params,
    };
    let (projected, percent) = projection_error(&spec, &params, args.t, args.observed)?;
    let text = format!(
        "t,projected,observed,error_percent\n{},{projected},{},{percent}\n",
        args.t, args.observed
    );
    emit(&args.out, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Approx(a) => cmd_approx(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Project(a) => cmd_project(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("psifrac: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("psifrac: numeric failure: {msg}");
            ExitCode::from(3)
        }
    }
}
