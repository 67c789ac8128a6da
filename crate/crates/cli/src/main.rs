//! Command-line front door: file-driven computation of torsion invariants,
//! the anomaly checkers, and the seeded self-verification suite.
//!
//! All reports go to stdout as JSON (pretty with --pretty); diagnostics go
//! to stderr. Exit codes: 0 all checks pass, 1 a check failed, 2 input
//! error, 3 numerical divergence.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use torsionlab::circle::{
    relative_torsion_circle_unitary, theorem01_rhs_circle, witten_spectrum_circle,
    zeta_det_circle, AdmissibleStructure, CircleBundleSpec,
};
use torsionlab::cone::{
    check_composition, check_cone_volume_formula, check_extension_additivity,
    check_long_sequence, quotient_of_inclusion,
};
use torsionlab::error::TorsionError;
use torsionlab::morse::{hermitian_anomaly_check, subdivision_check, HermitianStructure, MorseDatum};
use torsionlab::operator::{
    default_epsilon_sequence, determinant_class_check, fk_log_det, DetClass, Operator,
};
use torsionlab::verify::{run_all, SizeProfile};
use torsionlab::{io, HilbertComplex};

#[derive(Parser)]
#[command(
    name = "torsionlab",
    about = "Torsion invariants of finite cochain complexes of Hilbert modules"
)]
struct Cli {
    /// Pretty-print the JSON report
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConeCheck {
    /// Cone torsion of a degreewise isomorphism vs alternating log-volumes
    #[value(name = "prop1_12")]
    Prop1_12,
    /// Additivity of relative torsion under composition (self-composition)
    Composition,
    /// Extension additivity: file holds a coupling from outer to inner
    Cmm,
    /// Long-exact-sequence formula: file holds an inclusion of complexes
    Milnor,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnomalyKind {
    /// Change of Hermitian structure vs the flat structure
    Hermitian,
    /// Change of circle triangulation vs the standard one
    Subdivision,
}

#[derive(Clone, Copy, ValueEnum)]
enum CircleMode {
    /// Zeta-regularized determinant of the twisted Laplacian
    Det,
    /// Analytic-minus-combinatorial relative torsion (unitary holonomy)
    Relative,
    /// Spectrum of the Witten-deformed 0-form Laplacian
    Witten,
    /// Right-hand side of the circle invariant for a holonomy file
    Theorem01,
    /// Product-bundle invariant: chi times the circle invariant
    Prop51,
}

#[derive(Subcommand)]
enum Command {
    /// Log-torsion of a finite cochain complex from a complex file
    Torsion { complex_file: PathBuf },
    /// Fuglede-Kadison log-determinant and determinant-class verdict
    Fkdet { operator_file: PathBuf },
    /// Mapping-cone identity checks on a morphism file
    Cone {
        morphism_file: PathBuf,
        #[arg(long, value_enum)]
        check: ConeCheck,
    },
    /// Anomaly checks for a Morse datum, representation and Hermitian structure
    Morse {
        morse_file: PathBuf,
        rep_file: PathBuf,
        mu_file: PathBuf,
        #[arg(long, value_enum)]
        anomaly: AnomalyKind,
    },
    /// Circle-specific quantities
    Circle {
        /// Holonomy angle of a unitary twist (modes det / relative)
        #[arg(long)]
        theta: Option<f64>,
        /// Operator file with the holonomy (modes theorem01 / prop51)
        #[arg(long)]
        holonomy: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: CircleMode,
        /// Euler characteristic of the other factor (mode prop51)
        #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
        chi_n: i64,
        /// Deformation parameter (mode witten)
        #[arg(long, default_value_t = 40.0)]
        witten_t: f64,
        /// Collocation grid size (mode witten)
        #[arg(long, default_value_t = 1024)]
        grid: usize,
    },
    /// Run the full seeded property suite
    VerifyAll {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "desk")]
        size: String,
    },
}

/// One numerical result with the tolerance it is held to and the oracle it
/// was compared against ("none" for plain computations).
fn numeric(value: f64, tolerance: Option<f64>, oracle: &str) -> Value {
    json!({
        "value": value,
        "tolerance": tolerance,
        "oracle": oracle,
    })
}

fn check_entry(name: &str, residual: f64, tolerance: f64, oracle: &str) -> (Value, bool) {
    let pass = residual.is_finite() && residual < tolerance;
    (
        json!({
            "name": name,
            "residual": residual,
            "tolerance": tolerance,
            "oracle": oracle,
            "pass": pass,
        }),
        pass,
    )
}

struct Ctx {
    inputs: Vec<Value>,
}

impl Ctx {
    fn new() -> Ctx {
        Ctx { inputs: Vec::new() }
    }

    fn read(&mut self, path: &PathBuf) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| {
            CliError::Input(format!("cannot read {}: {e}", path.display()))
        })?;
        let digest = hex_digest(&bytes);
        self.inputs.push(json!({
            "path": path.display().to_string(),
            "sha256": digest,
        }));
        String::from_utf8(bytes)
            .map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

enum CliError {
    Input(String),
    Divergence(String),
}

impl From<TorsionError> for CliError {
    fn from(e: TorsionError) -> CliError {
        match &e {
            TorsionError::InvalidInput(_)
            | TorsionError::DimensionMismatch(_)
            | TorsionError::AlgebraMismatch(_)
            | TorsionError::NotSquare { .. }
            | TorsionError::NotAComplex { .. }
            | TorsionError::NotAMorphism { .. } => CliError::Input(e.to_string()),
            _ => CliError::Divergence(e.to_string()),
        }
    }
}

struct Outcome {
    command: &'static str,
    results: Value,
    checks: Vec<Value>,
    pass: bool,
    /// forces exit code 3 even when no check failed
    diverged: bool,
}

fn cmd_torsion(ctx: &mut Ctx, complex_file: &PathBuf) -> Result<Outcome, CliError> {
    let complex: HilbertComplex = io::parse_complex(&ctx.read(complex_file)?)?;
    let value = complex.log_torsion()?;
    let acyclic = complex.is_acyclic(1e-8)?;
    Ok(Outcome {
        command: "torsion",
        results: json!({
            "log_torsion": numeric(value, None, "none"),
            "euler_characteristic": complex.euler_characteristic(),
            "acyclic": acyclic,
            "modules": complex.dims(),
        }),
        checks: vec![],
        pass: true,
        diverged: false,
    })
}

fn cmd_fkdet(ctx: &mut Ctx, operator_file: &PathBuf) -> Result<Outcome, CliError> {
    let op: Operator = io::parse_operator(&ctx.read(operator_file)?)?;
    if !op.is_square() {
        return Err(CliError::Input(format!(
            "operator is {}x{}, log-determinant needs a square operator",
            op.rows(),
            op.cols()
        )));
    }
    let verdict = determinant_class_check(&op, &default_epsilon_sequence());
    let (log_det, diverged) = match verdict.verdict {
        DetClass::DeterminantClass => (Some(fk_log_det(&op)?), false),
        _ => (None, true),
    };
    Ok(Outcome {
        command: "fkdet",
        results: json!({
            "fk_log_det": log_det.map(|v| numeric(v, None, "none")),
            "det_class": verdict,
        }),
        checks: vec![],
        pass: !diverged,
        diverged,
    })
}

fn cmd_cone(ctx: &mut Ctx, morphism_file: &PathBuf, check: ConeCheck) -> Result<Outcome, CliError> {
    let text = ctx.read(morphism_file)?;
    let (results, checks, pass) = match check {
        ConeCheck::Prop1_12 => {
            let f = io::parse_morphism(&text)?;
            let report = check_cone_volume_formula(&f)?;
            let (c, ok) = check_entry(
                "cone_volume_formula",
                report.residual,
                1e-8,
                "alternating sum of component log-volumes",
            );
            (serde_json::to_value(&report).unwrap(), vec![c], ok)
        }
        ConeCheck::Composition => {
            let f = io::parse_morphism(&text)?;
            let report = check_composition(&f, &f)?;
            let (c, ok) = check_entry(
                "composition_additivity",
                report.residual,
                1e-8,
                "sum of relative torsions",
            );
            (serde_json::to_value(&report).unwrap(), vec![c], ok)
        }
        ConeCheck::Cmm => {
            // the file holds a coupling: source = outer, target = inner
            let raw = io::parse_morphism_raw(&text)?;
            let inner = raw.target.to_complex()?;
            let outer = raw.source.to_complex()?;
            let coupling: Result<Vec<Operator>, _> =
                raw.components.iter().map(|c| c.to_operator()).collect();
            let report = check_extension_additivity(&inner, &outer, &coupling?)?;
            let worst = report
                .deformation_residuals
                .iter()
                .fold(report.residual, |a, &b| a.max(b));
            let (c, ok) = check_entry(
                "extension_additivity",
                worst,
                1e-8,
                "sum of factor torsions, invariant along coupling deformation",
            );
            (serde_json::to_value(&report).unwrap(), vec![c], ok)
        }
        ConeCheck::Milnor => {
            let j = io::parse_morphism(&text)?;
            let p = quotient_of_inclusion(&j)?;
            let report = check_long_sequence(&j, &p)?;
            let (c, ok) = check_entry(
                "long_exact_sequence",
                report.residual,
                1e-7,
                "sub + quotient torsion corrected by the cohomology sequence",
            );
            (serde_json::to_value(&report).unwrap(), vec![c], ok)
        }
    };
    Ok(Outcome {
        command: "cone",
        results,
        checks,
        pass,
        diverged: false,
    })
}

fn cmd_morse(
    ctx: &mut Ctx,
    morse_file: &PathBuf,
    rep_file: &PathBuf,
    mu_file: &PathBuf,
    anomaly: AnomalyKind,
) -> Result<Outcome, CliError> {
    let datum = io::parse_morse(&ctx.read(morse_file)?)?;
    let rho = io::parse_representation(&ctx.read(rep_file)?)?;
    let mu = io::parse_hermitian(&ctx.read(mu_file)?)?;
    let (results, checks, pass) = match anomaly {
        AnomalyKind::Hermitian => {
            let flat = HermitianStructure::constant_identity(mu.dim());
            let report = hermitian_anomaly_check(&datum, &rho, &mu, &flat)?;
            let (c, ok) = check_entry(
                "hermitian_anomaly",
                report.residual,
                1e-8,
                "alternating sum of V volumes at critical points",
            );
            (
                json!({
                    "torsion_difference": report.torsion_difference,
                    "alternating_v_sum": report.alternating_v_sum,
                    "residual": report.residual,
                    "compared_against": "flat Hermitian structure",
                }),
                vec![c],
                ok,
            )
        }
        AnomalyKind::Subdivision => {
            let standard = MorseDatum::circle_standard(0.25, 0.75);
            let report = subdivision_check(&datum, &standard, &rho, &mu)?;
            let (c1, ok1) = check_entry(
                "subdivision_anomaly",
                report.residual,
                1e-8,
                "expansion-volume cocycle",
            );
            let (c2, ok2) = check_entry(
                "subdivision_cone_route",
                report.cone_residual,
                1e-8,
                "difference of refinement relative torsions",
            );
            (
                json!({
                    "torsion_tau1": report.torsion_tau1,
                    "torsion_tau2": report.torsion_tau2,
                    "omega": report.omega,
                    "compared_against": "standard circle datum (min 0.25, max 0.75)",
                }),
                vec![c1, c2],
                ok1 && ok2,
            )
        }
    };
    Ok(Outcome {
        command: "morse",
        results,
        checks,
        pass,
        diverged: false,
    })
}

fn cmd_circle(
    ctx: &mut Ctx,
    theta: Option<f64>,
    holonomy: Option<&PathBuf>,
    mode: CircleMode,
    chi_n: i64,
    witten_t: f64,
    grid: usize,
) -> Result<Outcome, CliError> {
    let need_theta = || {
        theta.ok_or_else(|| CliError::Input("this mode needs --theta".into()))
    };
    let load_holonomy = |ctx: &mut Ctx| -> Result<Operator, CliError> {
        let path = holonomy
            .ok_or_else(|| CliError::Input("this mode needs --holonomy FILE".into()))?;
        Ok(io::parse_operator(&ctx.read(path)?)?)
    };
    let (results, checks, pass) = match mode {
        CircleMode::Det => {
            let theta = need_theta()?;
            let value = zeta_det_circle(theta)?;
            let expected = 4.0 * (std::f64::consts::PI * theta).sin().powi(2);
            let (c, ok) = check_entry(
                "zeta_determinant",
                (value - expected).abs(),
                1e-6,
                "4 sin^2(pi theta)",
            );
            (
                json!({ "zeta_det": numeric(value, Some(1e-6), "4 sin^2(pi theta)") }),
                vec![c],
                ok,
            )
        }
        CircleMode::Relative => {
            let theta = need_theta()?;
            let value = relative_torsion_circle_unitary(theta)?;
            let (c, ok) = check_entry("relative_torsion", value.abs(), 1e-6, "zero");
            (
                json!({ "relative_torsion": numeric(value, Some(1e-6), "zero") }),
                vec![c],
                ok,
            )
        }
        CircleMode::Witten => {
            let report = witten_spectrum_circle(witten_t, grid)?;
            let low: Vec<f64> = report
                .eigenvalues
                .iter()
                .copied()
                .take(report.count_small + 3)
                .collect();
            let (c, ok) = check_entry(
                "witten_low_spectrum",
                (report.count_small as f64 - 1.0).abs(),
                0.5,
                "one low eigenvalue per critical point of index 0",
            );
            (
                json!({
                    "t": witten_t,
                    "grid": grid,
                    "count_small": report.count_small,
                    "gap_ratio": numeric(report.gap_ratio, None, "none"),
                    "lowest_eigenvalues": low,
                }),
                vec![c],
                ok,
            )
        }
        CircleMode::Theorem01 => {
            let a = load_holonomy(ctx)?;
            let expected = -0.5 * fk_log_det(&a)?;
            let spec = CircleBundleSpec::new(a)?;
            let rhs = theorem01_rhs_circle(&spec, &AdmissibleStructure::default())?;
            let (c, ok) = check_entry(
                "euler_invariant_closed_form",
                (rhs.value - expected).abs(),
                1e-4,
                "-(1/2) log-determinant of the holonomy",
            );
            (serde_json::to_value(&rhs).unwrap(), vec![c], ok)
        }
        CircleMode::Prop51 => {
            let a = load_holonomy(ctx)?;
            let expected = chi_n as f64 * (-0.5) * fk_log_det(&a)?;
            let value = torsionlab::circle::euler_invariant_product(&a, chi_n)?;
            let (c, ok) = check_entry(
                "product_bundle_invariant",
                (value - expected).abs(),
                1e-4,
                "-(chi/2) log-determinant of the holonomy",
            );
            (
                json!({
                    "chi_n": chi_n,
                    "invariant": numeric(value, Some(1e-4), "-(chi/2) log-determinant of the holonomy"),
                }),
                vec![c],
                ok,
            )
        }
    };
    Ok(Outcome {
        command: "circle",
        results,
        checks,
        pass,
        diverged: false,
    })
}

fn cmd_verify_all(seed: u64, size: &str) -> Result<Outcome, CliError> {
    let profile = SizeProfile::from_name(size).ok_or_else(|| {
        CliError::Input(format!(
            "unknown size profile {size:?} (expected smoke, desk or deep)"
        ))
    })?;
    let results = run_all(seed, profile);
    let pass = results.iter().all(|r| r.pass);
    let checks: Vec<Value> = results
        .iter()
        .map(|r| serde_json::to_value(r).unwrap())
        .collect();
    Ok(Outcome {
        command: "verify_all",
        results: json!({
            "seed": seed,
            "size": size,
            "total": results.len(),
            "passed": results.iter().filter(|r| r.pass).count(),
        }),
        checks,
        pass,
        diverged: false,
    })
}

fn run(cli: &Cli, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Torsion { complex_file } => cmd_torsion(ctx, complex_file),
        Command::Fkdet { operator_file } => cmd_fkdet(ctx, operator_file),
        Command::Cone {
            morphism_file,
            check,
        } => cmd_cone(ctx, morphism_file, *check),
        Command::Morse {
            morse_file,
            rep_file,
            mu_file,
            anomaly,
        } => cmd_morse(ctx, morse_file, rep_file, mu_file, *anomaly),
        Command::Circle {
            theta,
            holonomy,
            mode,
            chi_n,
            witten_t,
            grid,
        } => cmd_circle(ctx, *theta, holonomy.as_ref(), *mode, *chi_n, *witten_t, *grid),
        Command::VerifyAll { seed, size } => cmd_verify_all(*seed, size),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("TORSIONLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("ignoring non-numeric TORSIONLAB_THREADS={threads}");
        }
    }
    let start = Instant::now();
    let mut ctx = Ctx::new();
    match run(&cli, &mut ctx) {
        Ok(outcome) => {
            let report = json!({
                "kind": "run_report",
                "command": outcome.command,
                "inputs": ctx.inputs,
                "results": outcome.results,
                "checks": outcome.checks,
                "pass": outcome.pass,
                "wall_time_ms": start.elapsed().as_millis() as u64,
            });
            let text = if cli.pretty {
                serde_json::to_string_pretty(&report).unwrap()
            } else {
                serde_json::to_string(&report).unwrap()
            };
            println!("{text}");
            if outcome.diverged {
                ExitCode::from(3)
            } else if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Divergence(msg)) => {
            eprintln!("numerical divergence: {msg}");
            ExitCode::from(3)
        }
    }
}
