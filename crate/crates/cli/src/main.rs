//! `qhide`: distinguishability bounds, decay curves and hiding simulations
//! from the command line.

mod sources;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qhide::constructions::{self, WernerParams};
use qhide::discrimination::{
    self, certify_optimal, solve_optimal_value, Algorithm, Objective, SolverOptions, StepSchedule, CERTIFICATE_TOL,
};
use qhide::multifold::{self, DecayCurve, DecayKind, Verdict};
use qhide::operator::DEFAULT_DIM_CAP;
use qhide::sim::{self, Scheme, Strategy, DEFAULT_TRIALS};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed files, failed validation.
    Input(String),
    /// A computation ran but could not certify its answer.
    Inconclusive(String),
}

impl From<qhide::Error> for CliError {
    fn from(e: qhide::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Inconclusive(_) => 3,
        }
    }
}

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "qhide",
    version,
    about = "Partial-transpose bounds and data-hiding analysis for bipartite ensembles"
)]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest total Hilbert-space dimension to build explicitly.
    #[arg(long, global = true, default_value_t = DEFAULT_DIM_CAP)]
    cap: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Optimal guessing value with partially transposed (default) or plain states.
    Qg(QgArgs),
    /// Optimality certificate of a given measurement.
    Certify(CertifyArgs),
    /// Decay curve of an ensemble's multi-copy bound as CSV.
    Bounds(BoundsArgs),
    /// Decay curve of the Werner-product example from closed forms, as CSV.
    #[command(name = "fig3")]
    #[serde(rename = "fig3")]
    WernerCurve(WernerCurveArgs),
    /// Two-state ensemble built from an NPT state.
    Example1(Example1Args),
    /// Werner-product ensemble and its reference values.
    Example2(Example2Args),
    /// Monte Carlo run of the broadcast or direct-encoding protocol.
    HideSim(HideSimArgs),
    /// Check the ensemble invariants.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 20000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Admm)]
    method: MethodArg,
    /// Step schedule of the projected-gradient method.
    #[arg(long, value_enum, default_value_t = StepArg::Growing)]
    step: StepArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Admm,
    ProjectedGradient,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StepArg {
    Fixed,
    Growing,
}

impl SolverArgs {
    fn options(&self, cap: usize) -> SolverOptions {
        let defaults = SolverOptions::default();
        SolverOptions {
            gap_tol: self.gap_tol,
            max_iters: self.max_iters,
            algorithm: match self.method {
                MethodArg::Admm => Algorithm::Admm,
                MethodArg::ProjectedGradient => Algorithm::ProjectedGradient,
            },
            step: match self.step {
                StepArg::Fixed => StepSchedule::Fixed,
                StepArg::Growing => defaults.step,
            },
            cap,
            ..defaults
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct QgArgs {
    /// Ensemble JSON file, `bell-example1` or `example2:m,n,d`.
    #[arg(long)]
    ensemble: String,
    /// Use the states themselves instead of their partial transposes.
    #[arg(long)]
    no_pt: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    #[arg(long)]
    ensemble: String,
    /// Measurement JSON file.
    #[arg(long)]
    povm: PathBuf,
    #[arg(long)]
    no_pt: bool,
    #[arg(long, default_value_t = CERTIFICATE_TOL)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    #[arg(long)]
    ensemble: String,
    #[arg(long, default_value_t = 10)]
    lmax: usize,
    #[arg(long, value_enum, default_value_t = WhichArg::Coarse)]
    which: WhichArg,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum WhichArg {
    Coarse,
    Uniform,
}

impl From<WhichArg> for DecayKind {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Coarse => DecayKind::Coarse,
            WhichArg::Uniform => DecayKind::Uniform,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct WernerCurveArgs {
    /// `m,n,d`.
    #[arg(long)]
    params: String,
    #[arg(long, default_value_t = 10)]
    lmax: usize,
    #[arg(long, value_enum, default_value_t = WhichArg::Coarse)]
    which: WhichArg,
}

#[derive(Args, Debug, Serialize)]
struct Example1Args {
    /// `bell`, `random-npt:DxD:SEED`, or a state JSON file.
    #[arg(long, default_value = "bell")]
    sigma: String,
}

#[derive(Args, Debug, Serialize)]
struct Example2Args {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Include the explicit ensemble; fails if it exceeds the cap.
    #[arg(long)]
    explicit: bool,
}

#[derive(Args, Debug, Serialize)]
struct HideSimArgs {
    #[arg(long)]
    ensemble: String,
    /// Number of copies (the largest one with --csv).
    #[arg(long = "L", alias = "l", default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::ParityProduct)]
    strategy: StrategyArg,
    /// Measurement JSON for `--strategy povm-file`: single-copy dims apply it
    /// per copy, L-copy dims apply it globally.
    #[arg(long)]
    povm: Option<PathBuf>,
    /// Encode x directly into ρ_x^(L) instead of broadcasting z.
    #[arg(long)]
    direct_encoding: bool,
    /// Never deliver z to the receiver.
    #[arg(long, conflicts_with = "direct_encoding")]
    withhold_z: bool,
    /// Sweep L = 1..=L and emit `L,empirical,stderr,reference` rows.
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StrategyArg {
    ParityProduct,
    GlobalOrthogonal,
    PovmFile,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    ensemble: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'static str,
    config: &'a Cli,
    tool_version: &'static str,
    seed: Option<u64>,
    timestamp: String,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Qg(_) => "qg",
            Command::Certify(_) => "certify",
            Command::Bounds(_) => "bounds",
            Command::WernerCurve(_) => "fig3",
            Command::Example1(_) => "example1",
            Command::Example2(_) => "example2",
            Command::HideSim(_) => "hide-sim",
            Command::Validate(_) => "validate",
        }
    }

    fn stochastic(&self) -> bool {
        matches!(self, Command::HideSim(_) | Command::Example1(_))
    }
}

fn manifest(cli: &Cli) -> Value {
    let m = RunManifest {
        subcommand: cli.command.name(),
        config: cli,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cli.command.stochastic().then_some(cli.seed),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    serde_json::to_value(m).expect("manifest serializes")
}

/// What a subcommand produced.
enum Output {
    Json(Value),
    Csv(String),
}

fn write_output(cli: &Cli, output: Output) -> Result<(), CliError> {
    let write = |path: Option<&Path>, text: &str| -> Result<(), CliError> {
        match path {
            Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
            }
        }
    };
    match output {
        Output::Json(mut value) => {
            if let Value::Object(map) = &mut value {
                map.insert("manifest".into(), manifest(cli));
            }
            let text = serde_json::to_string_pretty(&value).expect("JSON values serialize") + "\n";
            write(cli.out.as_deref(), &text)
        }
        Output::Csv(text) => {
            write(cli.out.as_deref(), &text)?;
            // The manifest carries a timestamp, so it stays out of the CSV to
            // keep identical runs byte-identical.
            let m = serde_json::to_string_pretty(&manifest(cli)).expect("JSON values serialize") + "\n";
            match &cli.out {
                Some(p) => {
                    let mut sidecar = p.clone().into_os_string();
                    sidecar.push(".manifest.json");
                    write(Some(Path::new(&sidecar)), &m)
                }
                None => {
                    eprint!("{m}");
                    Ok(())
                }
            }
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Input(format!("cannot format CSV: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("cannot format CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII numbers"))
}

fn finite(x: f64, what: &str) -> Result<String, CliError> {
    if x.is_finite() {
        Ok(format!("{x:.17e}"))
    } else {
        Err(CliError::Inconclusive(format!("{what} is not finite")))
    }
}

fn curve_csv(curve: &DecayCurve) -> Result<String, CliError> {
    let rows = curve
        .points
        .iter()
        .map(|p| {
            Ok(vec![
                p.l.to_string(),
                finite(p.lower, "lower bound")?,
                finite(p.upper, "upper bound")?,
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    csv_text(&["L", "lower", "upper"], rows)
}

fn run(cli: &Cli) -> Result<(Output, Option<CliError>), CliError> {
    let cap = cli.cap;
    match &cli.command {
        Command::Qg(a) => {
            let e = sources::valid_ensemble(&a.ensemble, cap)?;
            let report = solve_optimal_value(&e, Objective::from_use_pt(!a.no_pt), &a.solver.options(cap))?;
            let pending = (!report.converged).then(|| {
                CliError::Inconclusive(format!(
                    "solver stopped after {} iterations with gap {:e} > {:e}",
                    report.iterations, report.gap, a.solver.gap_tol
                ))
            });
            Ok((Output::Json(json!({ "report": to_value(&report) })), pending))
        }
        Command::Certify(a) => {
            let e = sources::valid_ensemble(&a.ensemble, cap)?;
            let povm = sources::povm(&a.povm)?;
            let objective = Objective::from_use_pt(!a.no_pt);
            let value = discrimination::success_probability(&e, &povm, objective)?;
            let cert = certify_optimal(&e, &povm, objective, a.tol)?;
            Ok((
                Output::Json(json!({ "objective": objective, "value": value, "certificate": cert })),
                None,
            ))
        }
        Command::Bounds(a) => {
            let e = sources::valid_ensemble(&a.ensemble, cap)?;
            let opts = a.solver.options(cap);
            let qg = multifold::estimate_qg(&e, &opts)?;
            if !qg.converged {
                return Err(CliError::Inconclusive(format!(
                    "q_G did not converge (gap {:e}); no bound emitted",
                    qg.gap
                )));
            }
            let curve = DecayCurve::from_qg(qg.upper().min(1.0), e.len(), a.lmax, a.which.into())?;
            Ok((Output::Csv(curve_csv(&curve)?), None))
        }
        Command::WernerCurve(a) => {
            let params = WernerParams::parse(&a.params)?;
            let ex = constructions::example2(params, 0)?;
            let curve = DecayCurve::from_qg(ex.eta0, params.n, a.lmax, a.which.into())?;
            Ok((Output::Csv(curve_csv(&curve)?), None))
        }
        Command::Example1(a) => {
            let sigma = sources::sigma(&a.sigma)?;
            let ex = constructions::example1(&sigma)?;
            let qg = discrimination::qg_two_state(&ex.ensemble)?;
            Ok((
                Output::Json(json!({
                    "ensemble": ex.ensemble,
                    "reference": {
                        "trace_norm": ex.trace_norm,
                        "eta0": ex.eta0,
                        "qg": qg,
                        "orthogonal": ex.ensemble.is_mutually_orthogonal(qhide::ensemble::ORTHOGONALITY_TOL),
                    },
                })),
                None,
            ))
        }
        Command::Example2(a) => {
            let params = WernerParams::new(a.m, a.n, a.d)?;
            let ex = constructions::example2(params, if a.explicit { cap } else { 0 })?;
            if a.explicit && ex.formulas_only() {
                return Err(CliError::Input(format!(
                    "explicit matrices need dimension ({}^2)^{} beyond the cap {cap}",
                    a.d, a.m
                )));
            }
            let certificate = match (&ex.ensemble, ex.guess_zero_povm()) {
                (Some(e), Some(m)) => Some(certify_optimal(e, &m, Objective::PartialTranspose, CERTIFICATE_TOL)?),
                _ => None,
            };
            Ok((
                Output::Json(json!({
                    "ensemble": ex.ensemble,
                    "reference": {
                        "params": ex.params,
                        "normalization": ex.normalization.to_string(),
                        "weight_numerators": ex.weight_numerators.iter().map(u128::to_string).collect::<Vec<_>>(),
                        "etas": ex.etas,
                        "eta0": ex.eta0,
                        "qg_bound": ex.qg_bound,
                        "d_threshold": ex.d_threshold,
                        "meets_threshold": ex.meets_threshold,
                        "rho0_separable": ex.rho0_separable,
                        "formulas_only": ex.formulas_only(),
                    },
                    "guess_zero_certificate": certificate,
                })),
                None,
            ))
        }
        Command::HideSim(a) => hide_sim(cli, a),
        Command::Validate(a) => {
            let e = sources::ensemble(&a.ensemble, cap)?;
            let report = e.validate();
            let pending = (!report.passed()).then(|| CliError::Input(format!("ensemble is invalid: {}", report.failures.join("; "))));
            Ok((Output::Json(json!({ "validation": report })), pending))
        }
    }
}

fn strategy(a: &HideSimArgs, e: &qhide::StateEnsemble) -> Result<Strategy, CliError> {
    match a.strategy {
        StrategyArg::ParityProduct => {
            if e.len() != 2 {
                return Err(CliError::Input(
                    "the default parity measurement needs a two-state ensemble; pass --strategy povm-file for n > 2".into(),
                ));
            }
            Ok(Strategy::default_parity(e)?)
        }
        StrategyArg::GlobalOrthogonal => Ok(Strategy::global_orthogonal(e)?),
        StrategyArg::PovmFile => {
            let path = a
                .povm
                .as_ref()
                .ok_or_else(|| CliError::Input("--strategy povm-file requires --povm <file>".into()))?;
            let povm = sources::povm(path)?;
            if povm.dims() == e.dims() {
                Ok(Strategy::PerCopy { povm })
            } else {
                Ok(Strategy::Global { povm })
            }
        }
    }
}

fn hide_sim(cli: &Cli, a: &HideSimArgs) -> Result<(Output, Option<CliError>), CliError> {
    let e = sources::valid_ensemble(&a.ensemble, cli.cap)?;
    let strategy = strategy(a, &e)?;
    let scheme = if a.direct_encoding {
        Scheme::DirectEncoding { fixed_x: None }
    } else {
        Scheme::Broadcast { withhold_z: a.withhold_z }
    };
    let one = |l: usize| -> Result<sim::SimResult, CliError> {
        let cfg = sim::ProtocolConfig {
            l,
            trials: a.trials,
            seed: cli.seed,
            scheme,
            cap: cli.cap,
        };
        let result = sim::simulate(&e, &strategy, &cfg)?;
        Ok(match sim::exact_strategy_success(&e, &strategy, l, scheme, cli.cap) {
            Ok(exact) => result.with_reference(exact),
            Err(qhide::Error::EnumerationTooLarge { .. }) => result,
            Err(other) => return Err(other.into()),
        })
    };
    if a.csv {
        let rows = (1..=a.l)
            .map(|l| {
                let r = one(l)?;
                let reference = r
                    .analytic_reference
                    .map(|x| finite(x, "reference"))
                    .transpose()?
                    .unwrap_or_default();
                Ok(vec![
                    l.to_string(),
                    finite(r.empirical_success, "empirical")?,
                    finite(r.stderr, "stderr")?,
                    reference,
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        return Ok((Output::Csv(csv_text(&["L", "empirical", "stderr", "reference"], rows)?), None));
    }
    let result = one(a.l)?;
    let bound = match scheme {
        Scheme::DirectEncoding { .. } => "uniform-encoding",
        Scheme::Broadcast { .. } => "coarse",
    };
    let qg = multifold::estimate_qg(
        &e,
        &SolverOptions {
            cap: cli.cap,
            ..SolverOptions::default()
        },
    )?;
    let bound_value = if qg.converged && qg.upper() <= 1.0 {
        let q = qg.upper().max(1.0 / e.len() as f64);
        match scheme {
            Scheme::DirectEncoding { .. } => multifold::uniform_encoding_bound(q, e.len(), a.l).ok(),
            Scheme::Broadcast { .. } => multifold::qg_level_upper_bound(q, e.len(), a.l).ok(),
        }
    } else {
        None
    };
    let hiding = multifold::hiding_condition(
        &e,
        &SolverOptions {
            cap: cli.cap,
            ..SolverOptions::default()
        },
    )?;
    Ok((
        Output::Json(json!({
            "result": result,
            "locc_bound": { "kind": bound, "value": bound_value },
            "hiding_condition": hiding,
        })),
        (hiding.verdict == Verdict::Indeterminate).then(|| CliError::Inconclusive("hiding condition is indeterminate".into())),
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli).and_then(|(output, pending)| {
        write_output(&cli, output)?;
        pending.map_or(Ok(()), Err)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Input(msg) | CliError::Inconclusive(msg)) = &e;
            eprintln!("qhide: {msg}");
            ExitCode::from(e.exit_code())
        }
    }
}
