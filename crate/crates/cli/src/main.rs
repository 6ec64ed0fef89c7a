use clap::{Args, Parser, Subcommand, ValueEnum};
use qmem_cli::config::{Family, Grid, Physics, ScanConfig};
use qmem_cli::reproduce::reproduce_fixtures;
use qmem_cli::scan::{channel_pair, dephasing_alpha, run_scan, tolerances};
use qmem_cli::CliError;
use quantum_memory::channel::ChoiOperator;
use quantum_memory::criteria::{classify_dephasing, classify_three_level, classify_two_level};
use quantum_memory::dynamics::{
    amplitude_c, channel_two_level, dephasing_channel, heisenberg_channel, three_level_state,
};
use quantum_memory::linalg::C64;
use quantum_memory::sdp::{
    robustness_markovianity, robustness_quantum_memory_with, seesaw_lower_bound, PptOptions, SeesawOptions,
};
use quantum_memory::witness::{
    evaluate_witness, restricted_witness_search, verify_witness, Normalization, RestrictedBasis, SearchOptions,
    VerifyMode, WitnessCoefficients, WitnessPair,
};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qmem", version, about = "Classical and quantum memory in two-time open dynamics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// JSON file with a scan configuration or physical parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Duality-gap tolerance of the SDP solver.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Args, Clone, Debug)]
struct GridArgs {
    /// First time grid as `min:max:steps`.
    #[arg(long)]
    t1: Option<Grid>,
    /// Delay grid as `min:max:steps`.
    #[arg(long)]
    dt: Option<Grid>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-level giant atom heatmap.
    #[command(name = "scan-2l")]
    Scan2l(GridArgs),
    /// Three-level giant atom heatmap.
    #[command(name = "scan-3l")]
    Scan3l(GridArgs),
    #[command(name = "scan-dephasing")]
    ScanDephasing(GridArgs),
    #[command(name = "scan-heisenberg")]
    ScanHeisenberg(GridArgs),
    /// Closed-form verdict for two amplitudes `re,im` or two amplitude-rate times.
    #[command(name = "classify-2l")]
    Classify2l {
        #[arg(long, value_parser = parse_complex, requires = "c2")]
        c1: Option<C64>,
        #[arg(long, value_parser = parse_complex)]
        c2: Option<C64>,
        #[arg(long, requires = "t2")]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
    },
    /// Closed-form verdict for the three-level atom at two amplitude-rate times.
    #[command(name = "classify-3l")]
    Classify3l {
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
    },
    #[command(name = "classify-dephasing")]
    ClassifyDephasing {
        #[arg(long, value_parser = parse_complex)]
        a1: C64,
        #[arg(long, value_parser = parse_complex)]
        a2: C64,
    },
    /// Robustness of a pair of Choi JSON files.
    Robustness {
        #[arg(long)]
        e1: PathBuf,
        #[arg(long)]
        e2: PathBuf,
        #[arg(long, value_enum, default_value = "quantum")]
        kind: RobustnessKind,
        /// Where to write the dual witness when quantum memory is detected.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Choi JSON of a family at one time (`t/tau` for giant atoms, natural units otherwise).
    #[command(name = "export-channel")]
    ExportChannel {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        t: f64,
    },
    /// Checks the shipped coefficient tables against the published values.
    Reproduce {
        /// Also verify the three-level tables (several minutes).
        #[arg(long)]
        full: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RobustnessKind {
    Quantum,
    Markov,
    Seesaw,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisKind {
    Pauli,
    Qutrit,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormKind {
    TraceSum,
    CoeffSum,
}

#[derive(Subcommand)]
enum WitnessCommand {
    Verify {
        #[arg(long)]
        witness: PathBuf,
        /// Use the product form `W1 ⊗ 1/d` instead of the extended certificate.
        #[arg(long)]
        strict: bool,
    },
    Eval {
        #[arg(long)]
        witness: PathBuf,
        #[arg(long)]
        e1: PathBuf,
        #[arg(long)]
        e2: PathBuf,
    },
    /// Optimizes coefficients over a measurement basis; writes `<out>.w1.csv`, `<out>.w2.csv`
    /// and `<out>.json` when `--out` is given.
    Search {
        #[arg(long)]
        e1: PathBuf,
        #[arg(long)]
        e2: PathBuf,
        #[arg(long, value_enum, default_value = "pauli")]
        basis: BasisKind,
        /// Restrict to the support of the shipped tables for this basis.
        #[arg(long)]
        table_mask: bool,
        #[arg(long, value_enum, default_value = "trace-sum")]
        normalization: NormKind,
        /// Normalization value; defaults to the value of the shipped tables.
        #[arg(long)]
        value: Option<f64>,
    },
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(f(re)?, 0.0)),
        [re, im] => Ok(C64::new(f(re)?, f(im)?)),
        _ => Err(format!("expected re or re,im, got {s:?}")),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_choi(path: &Path) -> Result<ChoiOperator, CliError> {
    Ok(ChoiOperator::from_json(&read(path)?)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|e| CliError::Io(format!("stdout: {e}"))),
            }
        }
    }
}

fn json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("serializable output")
}

/// Physical parameters from `--config` (a full scan config or just the tagged physics), or the
/// standard ones for the family.
fn physics(common: &Common, family: Family) -> Result<Physics, CliError> {
    let Some(path) = &common.config else {
        return Ok(Physics::standard(family));
    };
    let text = read(path)?;
    let p = match ScanConfig::from_json(&text) {
        Ok(c) => c.physics,
        Err(_) => serde_json::from_str::<Physics>(&text).map_err(|e| CliError::Validation(format!("config: {e}")))?,
    };
    if p.family() != family {
        return Err(CliError::Validation(format!("config is for {:?}, command needs {family:?}", p.family())));
    }
    Ok(p)
}

fn scan(common: &Common, family: Family, grids: &GridArgs) -> Result<(), CliError> {
    let mut config = match &common.config {
        Some(p) => ScanConfig::from_json(&read(p)?)?,
        None => ScanConfig::standard(family),
    };
    if config.physics.family() != family {
        return Err(CliError::Validation(format!("config is for {:?}", config.physics.family())));
    }
    if let Some(g) = grids.t1 {
        config.t1_grid = g;
    }
    if let Some(g) = grids.dt {
        config.dt_grid = g;
    }
    if common.out.is_some() {
        config.out = common.out.clone();
    }
    if let Some(w) = common.workers {
        config.workers = w;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if common.tol.is_some() {
        config.tol = common.tol;
    }
    let rows = run_scan(&config)?;
    if config.out.is_none() {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for r in &rows {
            w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    } else {
        let failed = rows.iter().filter(|r| r.solver_status.contains("error")).count();
        eprintln!("{} rows written, {failed} with solver errors", rows.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let tol = tolerances(common.tol);
    match &cli.command {
        Command::Scan2l(g) => scan(common, Family::Ga2, g),
        Command::Scan3l(g) => scan(common, Family::Ga3, g),
        Command::ScanDephasing(g) => scan(common, Family::Dephasing, g),
        Command::ScanHeisenberg(g) => scan(common, Family::Heisenberg, g),
        Command::Classify2l { c1, c2, t1, t2 } => {
            let verdict = match (c1, c2, t1, t2) {
                (Some(a), Some(b), None, None) => classify_two_level(*a, *b),
                (None, None, Some(a), Some(b)) => {
                    channel_pair(&physics(common, Family::Ga2)?, *a, *b)?.2.expect("closed form")
                }
                _ => return Err(CliError::Validation("give either --c1/--c2 or --t1/--t2".into())),
            };
            emit(&common.out, &json(&verdict))
        }
        Command::Classify3l { t1, t2 } => {
            let p = physics(common, Family::Ga3)?.ga3().expect("three-level parameters");
            let tau = p.amplitude_rate();
            let s1 = three_level_state(t1 / tau, &p)?;
            let s2 = three_level_state(t2 / tau, &p)?;
            emit(&common.out, &json(&classify_three_level(&s1, &s2)))
        }
        Command::ClassifyDephasing { a1, a2 } => {
            if a1.norm() > 1.0 || a2.norm() > 1.0 {
                return Err(CliError::Validation("dephasing parameters must lie in the unit disk".into()));
            }
            emit(&common.out, &json(&classify_dephasing(*a1, *a2)))
        }
        Command::Robustness { e1, e2, kind, witness_out } => {
            let (e1, e2) = (read_choi(e1)?, read_choi(e2)?);
            match kind {
                RobustnessKind::Quantum => {
                    let opts = PptOptions { tolerances: tol, ..Default::default() };
                    let r = robustness_quantum_memory_with(&e1, &e2, &opts, witness_out.is_some())?;
                    if let (Some(p), Some(w)) = (witness_out, &r.dual_witness) {
                        emit(&Some(p.clone()), &w.to_json())?;
                    }
                    let mut v = serde_json::to_value(&r).expect("serializable");
                    v.as_object_mut().unwrap().remove("dual_witness");
                    emit(&common.out, &serde_json::to_string_pretty(&v).unwrap())
                }
                RobustnessKind::Markov => emit(&common.out, &json(&robustness_markovianity(&e1, &e2)?)),
                RobustnessKind::Seesaw => {
                    let opts = SeesawOptions { seed: common.seed.unwrap_or(0), tolerances: tol, ..Default::default() };
                    let r = seesaw_lower_bound(&e1, &e2, &opts)?;
                    let summary = serde_json::json!({
                        "s_lower": r.s_lower, "r_upper": r.r_upper, "check": r.check,
                        "certificate_passes": r.check.passes(1e-7), "iterations": r.history.len(), "stalled": r.stalled,
                    });
                    emit(&common.out, &serde_json::to_string_pretty(&summary).unwrap())
                }
            }
        }
        Command::Witness(w) => witness(common, w, &tol),
        Command::ExportChannel { family, t } => {
            let p = physics(common, *family)?;
            let choi = match &p {
                Physics::Ga2 { .. } => channel_two_level(amplitude_c(*t, &p.ga2().unwrap())?)?,
                Physics::Ga3 { .. } => three_level_state(*t, &p.ga3().unwrap())?.channel()?,
                Physics::Dephasing { decay, frequency } => dephasing_channel(dephasing_alpha(*t, *decay, *frequency))?,
                Physics::Heisenberg { .. } => heisenberg_channel(*t, &p.heisenberg().unwrap())?,
            };
            emit(&common.out, &choi.to_json())
        }
        Command::Reproduce { full } => {
            let report = reproduce_fixtures(*full)?;
            for c in &report.checks {
                eprintln!(
                    "{} {:<55} {:>12.6}  target {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.target
                );
            }
            emit(&common.out, &json(&report))?;
            if report.passed() {
                Ok(())
            } else {
                let n = report.checks.iter().filter(|c| !c.passed).count();
                Err(CliError::Reproduction(format!("{n} check(s) failed")))
            }
        }
    }
}

fn witness(common: &Common, cmd: &WitnessCommand, tol: &quantum_memory::sdp::Tolerances) -> Result<(), CliError> {
    match cmd {
        WitnessCommand::Verify { witness, strict } => {
            let w = WitnessPair::from_json(&read(witness)?)?;
            let mode = if *strict { VerifyMode::Strict } else { VerifyMode::Extended };
            let c = verify_witness(&w, mode, tol)?;
            let out = serde_json::json!({ "valid": c.valid, "shift": c.shift, "status": format!("{:?}", c.status) });
            emit(&common.out, &serde_json::to_string_pretty(&out).unwrap())
        }
        WitnessCommand::Eval { witness, e1, e2 } => {
            let w = WitnessPair::from_json(&read(witness)?)?;
            let v = evaluate_witness(&w, &read_choi(e1)?, &read_choi(e2)?)?;
            let out = serde_json::json!({ "value": v, "normalized": v / w.trace_sum() });
            emit(&common.out, &serde_json::to_string_pretty(&out).unwrap())
        }
        WitnessCommand::Search { e1, e2, basis, table_mask, normalization, value } => {
            let (e1, e2) = (read_choi(e1)?, read_choi(e2)?);
            let (b, tables) = match basis {
                BasisKind::Pauli => (RestrictedBasis::pauli(), WitnessCoefficients::qubit_tables()),
                BasisKind::Qutrit => (RestrictedBasis::qutrit_states(), WitnessCoefficients::qutrit_tables()),
            };
            let b = if *table_mask { b.with_mask(tables.support())? } else { b };
            let norm = match normalization {
                NormKind::TraceSum => {
                    let w = quantum_memory::witness::assemble_from_coefficients(&tables, &b)?;
                    Normalization::TraceSum(value.unwrap_or(w.trace_sum()))
                }
                NormKind::CoeffSum => Normalization::CoeffSum(value.unwrap_or(tables.sum())),
            };
            let opts = SearchOptions { tolerances: *tol, ..Default::default() };
            let r = restricted_witness_search(&e1, &e2, &b, norm, &opts)?;
            let summary = serde_json::json!({
                "value": r.value, "normalized_value": r.normalized_value,
                "status": format!("{:?}", r.status), "orbits": r.orbits,
            });
            if let Some(out) = &common.out {
                let base = out.to_string_lossy().to_string();
                for a in 0..2 {
                    emit(&Some(PathBuf::from(format!("{base}.w{}.csv", a + 1))), &r.coefficients.to_csv(a))?;
                }
                emit(&Some(PathBuf::from(format!("{base}.json"))), &r.witness.to_json())?;
            }
            emit(&None, &json(&summary))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
