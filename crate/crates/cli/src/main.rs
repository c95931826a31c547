use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use switchbound::analysis::analyze_trace;
use switchbound::dwell_time::{design_sweep, dwell_report};
use switchbound::io::{self, AnalysisReport};
use switchbound::reproduce::{self, sub_seed, DISTURBANCE_STREAM, SIGNAL_STREAM};
use switchbound::set_constructions::{oracle_estimates, OracleConfig};
use switchbound::simulate::{lyapunov_trace, simulate_continuous, simulate_discrete, SimulationTrace, DEFAULT_STEP};
use switchbound::switching::{generate_signal, validate_signal, Strategy};
use switchbound::{
    closed_form_bounds, AnalysisConfig, CertificateSet, DisturbanceSpec, Epsilon, Error, Matrix, RobustnessReport,
    SetConstants, SwitchingBudget, SwitchingSignal, SystemFamily, TimeDomain,
};

const EXIT_INVALID: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "switchbound",
    version,
    about = "Dwell-time bounds and trapping sets for switched affine systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the quadratic certificate of every subsystem
    Certify(CertifyArgs),
    /// Set constants, dwell-time floor and ultimate bound
    Bounds(BoundsArgs),
    /// Simulate a trajectory and write its trace
    Simulate(RunArgs),
    /// Simulate, then replay the guarantees along the trace
    Analyze(RunArgs),
    /// Tabulate the bounds over a (kappa, delta) grid
    Sweep(SweepArgs),
    /// Rerun one of the bundled examples
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// Family JSON file
    #[arg(long)]
    family: PathBuf,

    /// Lyapunov weight Q, row-major and comma separated (default: identity)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,

    /// Young-split parameter, or "auto"
    #[arg(long, default_value = "auto")]
    epsilon: String,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    family: FamilyArgs,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    kappa: Option<f64>,

    #[arg(long)]
    delta: Option<f64>,

    #[arg(long)]
    n0: Option<f64>,

    /// Disturbance sup-norm
    #[arg(long)]
    dnorm: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    ClosedForm,
    Oracle,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    family: FamilyArgs,

    #[command(flatten)]
    design: DesignArgs,

    #[arg(long, value_enum, default_value = "closed-form")]
    method: Method,

    /// Oracle sample budget
    #[arg(long, default_value_t = 10_000)]
    samples: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    family: FamilyArgs,

    #[command(flatten)]
    design: DesignArgs,

    /// Signal JSON file
    #[arg(long, conflicts_with = "gen_signal")]
    signal: Option<PathBuf>,

    /// Generate a signal with budget N0,Na
    #[arg(long, value_delimiter = ',', num_args = 1..=2, value_name = "N0,NA")]
    gen_signal: Option<Vec<f64>>,

    /// Start index (one-based) when no signal is given
    #[arg(long)]
    initial: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Discrete step count
    #[arg(long, default_value_t = 200)]
    steps: u64,

    /// Continuous end time
    #[arg(long = "T", default_value_t = 20.0)]
    t_end: f64,

    /// Continuous RK4 step
    #[arg(long, default_value_t = DEFAULT_STEP)]
    h: f64,

    /// Initial state, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,

    /// Trace CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    family: FamilyArgs,

    /// Comma-separated kappa grid
    #[arg(long, value_delimiter = ',', required = true)]
    kappas: Vec<f64>,

    /// Comma-separated delta grid
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,

    #[arg(long)]
    n0: Option<f64>,

    #[arg(long)]
    dnorm: Option<f64>,

    /// Sweep CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// 1 or 2
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: u8,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Directory for CSV outputs
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Violation(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type CmdResult = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify(a) => certify(a),
        Command::Bounds(a) => bounds(a),
        Command::Simulate(a) => run(a, false),
        Command::Analyze(a) => run(a, true),
        Command::Sweep(a) => sweep(a),
        Command::Reproduce(a) => reproduce_cmd(a),
    };
    match result {
        Ok(v) => {
            emit(&v);
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Violation(v)) => {
            emit(&v);
            eprintln!("error: guarantee violated along the trace");
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}

/// Prints a report; a closed stdout is not an error.
fn emit(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("report serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn load(args: &FamilyArgs) -> Result<(SystemFamily, CertificateSet), Failure> {
    let family = io::load_family_file(&args.family)?;
    let n = family.n;
    let q = match &args.q {
        None => Matrix::identity(n),
        Some(v) => Matrix::new(n, n, v.clone()).map_err(|e| invalid(format!("--q must hold {n}x{n} entries: {e}")))?,
    };
    let epsilon = match args.epsilon.as_str() {
        "auto" => Epsilon::Auto,
        s => Epsilon::Fixed(
            s.parse()
                .map_err(|_| invalid(format!("--epsilon must be a number or \"auto\", got {s}")))?,
        ),
    };
    let certs = CertificateSet::build(&family, &q, epsilon)?;
    Ok((family, certs))
}

fn config_for(domain: TimeDomain, d: &DesignArgs) -> (AnalysisConfig, f64) {
    let base = AnalysisConfig::default_for(domain);
    let config = AnalysisConfig::new(
        d.kappa.unwrap_or(base.kappa),
        d.delta.unwrap_or(base.delta),
        d.n0.unwrap_or(base.n0),
    );
    let dnorm = d.dnorm.unwrap_or(default_dnorm(domain));
    (config, dnorm)
}

fn default_dnorm(domain: TimeDomain) -> f64 {
    match domain {
        TimeDomain::Discrete => reproduce::EXAMPLE1_D_BOUND,
        TimeDomain::Continuous => 0.0,
    }
}

fn certify(a: CertifyArgs) -> CmdResult {
    let (family, certs) = load(&a.family)?;
    let list: Vec<Value> = certs
        .certs
        .iter()
        .map(|c| {
            json!({
                "index": c.index + 1,
                "equilibrium": c.equilibrium,
                "S": c.s,
                "lambda_tight": c.lambda_tight,
                "lambda_iss": c.lambda_iss,
                "lambda_conservative": c.lambda_conservative,
                "epsilon": c.epsilon,
                "gain": c.gain,
                "lambda_min_S": c.lambda_min_s,
                "lambda_max_S": c.lambda_max_s,
            })
        })
        .collect();
    let aggregates: serde_json::Map<String, Value> = switchbound::RateConvention::ALL
        .iter()
        .map(|&c| (c.name().to_string(), json!(certs.aggregate(c))))
        .collect();
    Ok(json!({
        "domain": family.domain,
        "subsystems": family.len(),
        "certificates": list,
        "aggregate_rate": aggregates,
        "aggregate_gain": certs.aggregate_gain(),
    }))
}

fn constants_for(
    certs: &CertificateSet,
    kappa: f64,
    method: Method,
    samples: usize,
    seed: u64,
) -> Result<SetConstants, Failure> {
    Ok(match method {
        Method::ClosedForm => closed_form_bounds(certs, kappa)?,
        Method::Oracle => oracle_estimates(
            certs,
            kappa,
            &OracleConfig {
                samples,
                seed,
                ..OracleConfig::default()
            },
        )?,
    })
}

fn bounds(a: BoundsArgs) -> CmdResult {
    let (family, certs) = load(&a.family)?;
    let (config, dnorm) = config_for(family.domain, &a.design);
    let constants = constants_for(&certs, config.kappa, a.method, a.samples, a.seed)?;
    let report = dwell_report(&certs, constants, config, dnorm)?;
    Ok(json!({ "report": report }))
}

fn default_x0(family: &SystemFamily) -> Option<Vec<f64>> {
    match (family.domain, family.n) {
        (TimeDomain::Discrete, 4) => Some(reproduce::EXAMPLE1_X0.to_vec()),
        (TimeDomain::Continuous, 2) => Some(reproduce::EXAMPLE2_X0.to_vec()),
        _ => None,
    }
}

fn horizon(domain: TimeDomain, a: &RunArgs) -> f64 {
    match domain {
        TimeDomain::Discrete => a.steps as f64,
        TimeDomain::Continuous => a.t_end,
    }
}

fn build_signal(family: &SystemFamily, a: &RunArgs) -> Result<(SwitchingSignal, Option<SwitchingBudget>), Failure> {
    let domain = family.domain;
    if let Some(path) = &a.signal {
        return Ok((io::load_signal_file(path, domain)?, None));
    }
    let initial = match a.initial {
        Some(0) => return Err(invalid("--initial is one-based")),
        Some(p) => p - 1,
        // Example 2 runs its second subsystem alone.
        None if domain == TimeDomain::Continuous && family.len() > 1 => reproduce::EXAMPLE2_ACTIVE,
        None => 0,
    };
    if initial >= family.len() {
        return Err(invalid(format!(
            "--initial {} exceeds the family size {}",
            initial + 1,
            family.len()
        )));
    }
    let budget = match (&a.gen_signal, domain) {
        (Some(v), _) => match v[..] {
            [n0, na] => Some(SwitchingBudget::new(n0, na)?),
            _ => return Err(invalid("--gen-signal takes two values, N0,Na")),
        },
        (None, TimeDomain::Discrete) => Some(SwitchingBudget::new(
            AnalysisConfig::discrete_default().n0,
            reproduce::EXAMPLE1_NA,
        )?),
        (None, TimeDomain::Continuous) => None,
    };
    let Some(budget) = budget else {
        return Ok((SwitchingSignal::constant(domain, initial), None));
    };
    let mut indices: Vec<usize> = vec![initial];
    indices.extend((0..family.len()).filter(|&p| p != initial));
    let sig = generate_signal(
        domain,
        budget,
        horizon(domain, a),
        &indices,
        sub_seed(a.seed, SIGNAL_STREAM),
        Strategy::RandomAdmissible,
    );
    Ok((sig, Some(budget)))
}

struct RunOutput {
    family: SystemFamily,
    certs: CertificateSet,
    signal: SwitchingSignal,
    budget: Option<SwitchingBudget>,
    trace: SimulationTrace,
    report: RobustnessReport,
}

fn simulate_run(a: &RunArgs) -> Result<RunOutput, Failure> {
    let (family, certs) = load(&a.family)?;
    let (config, dnorm) = config_for(family.domain, &a.design);
    let constants = closed_form_bounds(&certs, config.kappa)?;
    let report = dwell_report(&certs, constants, config, dnorm)?;
    let x0 = match &a.x0 {
        Some(v) => v.clone(),
        None => default_x0(&family)
            .ok_or_else(|| invalid(format!("--x0 is required for this family (n = {})", family.n)))?,
    };
    let (signal, budget) = build_signal(&family, a)?;
    // Uniform on the cube with half-width dnorm/√m, so the Euclidean sup-norm is dnorm.
    let bound = dnorm / (family.m as f64).sqrt();
    let dist = if dnorm == 0.0 {
        DisturbanceSpec::zero(family.m)
    } else {
        DisturbanceSpec::uniform(family.m, bound, sub_seed(a.seed, DISTURBANCE_STREAM))?
    };
    let trace = match family.domain {
        TimeDomain::Discrete => simulate_discrete(&family, &signal, &dist, &x0, a.steps)?,
        TimeDomain::Continuous => simulate_continuous(&family, &signal, &dist, &x0, a.t_end, a.h)?,
    };
    let trace = lyapunov_trace(&trace, &certs)?;
    if let Some(path) = &a.out {
        io::write_trace_csv(&trace, family.n, family.m, path)?;
    }
    Ok(RunOutput {
        family,
        certs,
        signal,
        budget,
        trace,
        report,
    })
}

fn run(a: RunArgs, analyze: bool) -> CmdResult {
    let out = simulate_run(&a)?;
    let h = horizon(out.family.domain, &a).max(out.signal.switches.last().map_or(0.0, |s| s.t));
    let validation = match out.budget {
        Some(b) => Some(validate_signal(&out.signal, b, h)?),
        None => None,
    };
    let mut summary = json!({
        "domain": out.family.domain,
        "samples": out.trace.len(),
        "switches": out.signal.len(),
        "signal": serde_json::from_str::<Value>(&io::signal_to_json(&out.signal)).expect("signal JSON"),
        "budget": out.budget,
        "signal_validation": validation,
        "final_state": out.trace.states.last(),
        "omega_bar": out.report.omega_bar,
        "Na_bar": out.report.n_a_bar,
        "trace": a.out.as_ref().map(|p| p.display().to_string()),
    });
    if !analyze {
        return Ok(summary);
    }
    let analysis = analyze_trace(&out.trace, &out.certs, &out.signal, &out.report)?;
    let report = AnalysisReport::from(&analysis);
    summary["analysis"] = serde_json::to_value(report).expect("analysis serializes");
    if !report.decay_ok {
        return Err(Failure::Violation(summary));
    }
    Ok(summary)
}

fn sweep(a: SweepArgs) -> CmdResult {
    let (family, certs) = load(&a.family)?;
    let base = AnalysisConfig::default_for(family.domain);
    let n0 = a.n0.unwrap_or(base.n0);
    let dnorm = a.dnorm.unwrap_or(default_dnorm(family.domain));
    let rows = design_sweep(&certs, &a.kappas, &a.deltas, n0, dnorm)?;
    io::write_sweep_csv(&rows, &a.out)?;
    let skipped = rows.iter().filter(|r| r.report().is_none()).count();
    Ok(json!({
        "rows": rows.len(),
        "skipped": skipped,
        "out": a.out.display().to_string(),
    }))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))
}

fn reproduce_cmd(a: ReproduceArgs) -> CmdResult {
    match a.example {
        1 => {
            let run = reproduce::example1(a.seed)?;
            if let Some(dir) = &a.out {
                ensure_dir(dir)?;
                run.write_outputs(dir)?;
            }
            Ok(serde_json::to_value(&run.report).expect("report serializes"))
        }
        _ => {
            let run = reproduce::example2()?;
            if let Some(dir) = &a.out {
                ensure_dir(dir)?;
                run.write_outputs(dir)?;
            }
            Ok(serde_json::to_value(&run.report).expect("report serializes"))
        }
    }
}
