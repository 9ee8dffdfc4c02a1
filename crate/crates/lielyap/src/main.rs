//! Command-line front end: configuration ingestion, subcommand dispatch, and
//! file emission. Exit codes: 0 on success, 1 when a mathematical check
//! fails (nonpositive margins, failed descent, envelope violation), 2 on
//! usage, configuration, or I/O errors.

use clap::{Args, Parser, Subcommand};
use lielyap::certify::{build_kl, check_envelope, kl_shape};
use lielyap::clf::{estimate_gamma, verify};
use lielyap::config::{parse_config, CompiledSystem};
use lielyap::hamiltonian::Smoothness;
use lielyap::lie::enumerate_brackets;
use lielyap::report::{
    to_sorted_json, AsymptoticEntry, AsymptoticsReport, BracketEntry, BracketsReport,
    CertificateReport, HamReport, SynthesisReport, VerifyReport,
};
use lielyap::steering::{
    asymptotic_order, synthesize, DriftBracketKind, StepKnobs, SteerDirection,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lielyap",
    about = "Degree-k control Lyapunov functions: bracket Hamiltonians, sampled verification, steering synthesis, KL certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// System configuration (JSON).
    config: PathBuf,
    /// Output directory for emitted files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the configured degree k.
    #[arg(long)]
    k: Option<usize>,
    /// Override the configured sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the start point (comma-separated coordinates).
    #[arg(long, value_name = "CSV")]
    x0: Option<String>,
    /// Override the stopping distance to the target.
    #[arg(long = "eps-d", value_name = "V")]
    eps_d: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the enumerated bracket basis with degrees and segment counts.
    Brackets(Common),
    /// Evaluate the Hamiltonian chain H^(1..k) at a point and covector.
    Ham {
        #[command(flatten)]
        common: Common,
        /// Point (comma-separated coordinates).
        #[arg(long, value_name = "CSV")]
        x: String,
        /// Covector (comma-separated coordinates).
        #[arg(long, value_name = "CSV")]
        p: String,
    },
    /// Sampled verification of the degree-k inequality, with margin table.
    Verify(Common),
    /// Steer from a start point to the target; emits CSV and checkpoints.
    Synthesize(Common),
    /// Empirical word asymptotics for the bracket directions.
    Asymptotic(Common),
    /// Synthesize, build the KL envelope, and check the run against it.
    Certify(Common),
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(lielyap::config::ConfigError),
    Io(std::io::Error),
    Math(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "invalid configuration:\n{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Math(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Math(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn math<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Math(e.to_string())
}

fn parse_point(text: &str, dim: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let v = v.map_err(|_| CliError::Usage(format!("{what}: expected comma-separated floats")))?;
    if v.len() != dim {
        return Err(CliError::Usage(format!(
            "{what}: expected {dim} coordinates, got {}",
            v.len()
        )));
    }
    Ok(v)
}

fn load(common: &Common) -> Result<(CompiledSystem, lielyap::config::SystemConfig), CliError> {
    let text = fs::read_to_string(&common.config)?;
    let mut cfg = parse_config(&text).map_err(CliError::Config)?;
    if let Some(k) = common.k {
        cfg.degree = k;
    }
    if let Some(s) = common.samples {
        if s == 0 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        cfg.knobs.samples = s;
    }
    if let Some(s) = common.seed {
        cfg.knobs.seed = s;
    }
    if let Some(e) = common.eps_d {
        cfg.knobs.eps_d = e;
    }
    let compiled = cfg.compile().map_err(CliError::Config)?;
    Ok((compiled, cfg))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn start_point(common: &Common, built: &CompiledSystem) -> Result<Vec<f64>, CliError> {
    if let Some(text) = &common.x0 {
        return parse_point(text, built.sys.dim(), "--x0");
    }
    built
        .knobs
        .x0
        .clone()
        .ok_or_else(|| CliError::Usage("no start point: pass --x0 or set knobs.x0".into()))
}

fn step_knobs(built: &CompiledSystem) -> StepKnobs {
    StepKnobs {
        m_hat: built.knobs.m_hat,
        substeps: built.knobs.substeps,
        max_halvings: built.knobs.max_halvings,
        record_stride: built.knobs.record_stride,
    }
}

/// Runs verification and, when it passes, margin estimation.
fn verified_gamma(built: &CompiledSystem) -> Result<(VerifyReport, lielyap::clf::GammaFn), CliError> {
    let report = verify(
        &built.sys,
        &built.clf,
        &built.region,
        built.knobs.samples,
        built.knobs.seed,
    )
    .map_err(math)?;
    if !report.failures.is_empty() {
        let mut out = VerifyReport::from_verification(&report);
        out.gamma = None;
        return Err(CliError::Math(format!(
            "verification failed: {} of {} samples have nonpositive margin (min {} at {:?})",
            report.failures.len(),
            report.samples,
            report.min_margin,
            report.argmin
        )));
    }
    let sigma = built.region.u_max / 2.0;
    let gamma = estimate_gamma(
        &built.sys,
        &built.clf,
        &built.region,
        sigma,
        built.knobs.levels,
        built.knobs.samples_per_level,
        built.knobs.seed,
    )
    .map_err(math)?;
    let mut out = VerifyReport::from_verification(&report);
    out.gamma = Some(gamma.breakpoints().to_vec());
    Ok((out, gamma))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Brackets(common) => {
            let (built, cfg) = load(&common)?;
            let basis = enumerate_brackets(built.sys.generator_count(), cfg.degree)
                .map_err(math)?;
            let report = BracketsReport {
                generator_count: built.sys.generator_count(),
                max_degree: cfg.degree,
                basis: basis
                    .iter()
                    .map(|b| BracketEntry {
                        descriptor: b.to_string(),
                        degree: b.degree(),
                        r: b.r(),
                    })
                    .collect(),
            };
            print!("{}", to_sorted_json(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Ham { common, x, p } => {
            let (built, _) = load(&common)?;
            let x = parse_point(&x, built.sys.dim(), "--x")?;
            let p = parse_point(&p, built.sys.dim(), "--p")?;
            let chain = built.sys.hamiltonian_chain(&x, &p).map_err(math)?;
            print!("{}", to_sorted_json(&HamReport { x, p, chain }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(common) => {
            let (built, _) = load(&common)?;
            match verified_gamma(&built) {
                Ok((report, _)) => {
                    let json = to_sorted_json(&report);
                    write_out(&common.out, "verify.json", &json)?;
                    print!("{json}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(CliError::Math(m)) => {
                    // still emit the failing report for inspection
                    let report = verify(
                        &built.sys,
                        &built.clf,
                        &built.region,
                        built.knobs.samples,
                        built.knobs.seed,
                    )
                    .map_err(math)?;
                    let json = to_sorted_json(&VerifyReport::from_verification(&report));
                    write_out(&common.out, "verify.json", &json)?;
                    print!("{json}");
                    eprintln!("error: {m}");
                    Ok(ExitCode::from(1))
                }
                Err(other) => Err(other),
            }
        }
        Command::Synthesize(common) => {
            let (built, _) = load(&common)?;
            let x0 = start_point(&common, &built)?;
            let (_, gamma) = verified_gamma(&built)?;
            let traj = synthesize(
                &built.sys,
                &built.clf,
                &built.target,
                &gamma,
                &x0,
                built.knobs.eps_d,
                built.knobs.max_steps,
                &step_knobs(&built),
            )
            .map_err(math)?;
            let final_d = built
                .target
                .distance(traj.checkpoints.last().map(|c| &c.x).unwrap_or(&x0))
                .map_err(math)?;
            let mut csv = Vec::new();
            lielyap::report::write_trajectory_csv(&traj, built.sys.dim(), &mut csv)?;
            write_out(&common.out, "trajectory.csv", &String::from_utf8(csv).unwrap())?;
            let report = SynthesisReport::from_trajectory(&traj, final_d);
            let json = to_sorted_json(&report);
            write_out(&common.out, "checkpoints.json", &json)?;
            println!(
                "reached distance {:.6} in {} steps over duration {:.3}",
                final_d,
                traj.steps(),
                traj.duration()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Asymptotic(common) => {
            let (built, _) = load(&common)?;
            let x = match &common.x0 {
                Some(text) => parse_point(text, built.sys.dim(), "--x0")?,
                None => built
                    .knobs
                    .asym_point
                    .clone()
                    .or_else(|| built.knobs.x0.clone())
                    .ok_or_else(|| {
                        CliError::Usage("no base point: pass --x0 or set knobs.asym_point".into())
                    })?,
            };
            let t_list = built.knobs.t_list.clone();
            let mut entries = Vec::new();
            let mut directions: Vec<SteerDirection> = Vec::new();
            if built.sys.drift().is_some() {
                for i in 1..=built.sys.generator_count() {
                    directions.push(SteerDirection::DriftBracket(
                        DriftBracketKind::DriftThenGen(i),
                    ));
                    directions.push(SteerDirection::DriftBracket(
                        DriftBracketKind::GenThenDrift(i),
                    ));
                }
            } else if built.sys.smoothness() == Smoothness::Lipschitz {
                for (i, j, _) in built.sys.setvalued_pairs() {
                    directions.push(SteerDirection::SetValuedPair(*i, *j));
                }
            } else {
                let basis = enumerate_brackets(built.sys.generator_count(), built.sys.max_degree())
                    .map_err(math)?;
                for b in basis {
                    directions.push(SteerDirection::Formal(b));
                }
            }
            let mut skipped = Vec::new();
            for dir in directions {
                match asymptotic_order(&built.sys, &dir, &x, &t_list, built.knobs.substeps) {
                    Ok(rep) => entries.push(AsymptoticEntry::from_report(&rep)),
                    Err(e) => skipped.push(format!("{}: {e}", dir.descriptor())),
                }
            }
            for s in &skipped {
                eprintln!("skipped {s}");
            }
            let report = AsymptoticsReport {
                x,
                t_list,
                entries,
            };
            let json = to_sorted_json(&report);
            write_out(&common.out, "asymptotic.json", &json)?;
            print!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify(common) => {
            let (built, _) = load(&common)?;
            let x0 = start_point(&common, &built)?;
            let (_, gamma) = verified_gamma(&built)?;
            let traj = synthesize(
                &built.sys,
                &built.clf,
                &built.target,
                &gamma,
                &x0,
                built.knobs.eps_d,
                built.knobs.max_steps,
                &step_knobs(&built),
            )
            .map_err(math)?;
            if traj.steps() == 0 {
                println!("start point is already within eps_d of the target; nothing to certify");
                return Ok(ExitCode::SUCCESS);
            }
            let kl = build_kl(
                &gamma,
                &traj,
                &built.clf,
                &built.target,
                &built.region,
                built.knobs.m_hat,
                built.sys.max_degree(),
                built.knobs.kl_levels,
                built.knobs.kl_samples,
                built.knobs.seed,
            )
            .map_err(math)?;
            let envelope = check_envelope(&traj, &kl, &built.target).map_err(math)?;
            let d0 = built.target.distance(&x0).map_err(math)?;
            let deltas: Vec<f64> = (0..=12).map(|i| d0 * 1.2 * f64::from(i) / 12.0).collect();
            let horizon = (4.0 * traj.duration()).max(10.0);
            let times: Vec<f64> = (0..=24).map(|i| horizon * f64::from(i) / 24.0).collect();
            // probe the decay far beyond the run: beta must vanish in the tail
            let shape = kl_shape(&kl, &deltas, &times, 1e12);

            let mut csv = Vec::new();
            lielyap::report::write_trajectory_csv(&traj, built.sys.dim(), &mut csv)?;
            write_out(&common.out, "trajectory.csv", &String::from_utf8(csv).unwrap())?;
            let final_d = built
                .target
                .distance(&traj.checkpoints.last().unwrap().x)
                .map_err(math)?;
            write_out(
                &common.out,
                "checkpoints.json",
                &to_sorted_json(&SynthesisReport::from_trajectory(&traj, final_d)),
            )?;
            let mut beta_csv = Vec::new();
            lielyap::report::write_beta_csv(&kl, &deltas, &times, &mut beta_csv)?;
            write_out(&common.out, "beta.csv", &String::from_utf8(beta_csv).unwrap())?;
            let report = CertificateReport::new(&kl, &envelope, &shape);
            let json = to_sorted_json(&report);
            write_out(&common.out, "certificate.json", &json)?;
            print!("{json}");
            if envelope.max_violation > 1e-9 {
                return Err(CliError::Math(format!(
                    "envelope violated by {} at s = {}",
                    envelope.max_violation, envelope.argmax_s
                )));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
