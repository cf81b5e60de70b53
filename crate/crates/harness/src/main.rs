use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use wpmec_core::benchmarks::{SchemeId, SchemeStatus};
use wpmec_harness::checks;
use wpmec_harness::config::{parse_schemes, ExperimentConfig};
use wpmec_harness::experiment::{aggregate_path, instance, run_point, run_sweep, run_tables};
use wpmec_harness::output::fmt_num;
use wpmec_harness::HarnessError;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_WARNING: u8 = 4;

#[derive(Parser)]
#[command(name = "wpmec", version, about = "Energy-minimal wireless powered mobile-edge computing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations per sweep value; overrides the config.
    #[arg(long)]
    realizations: Option<usize>,
    /// Output CSV path; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme ids; overrides the config.
    #[arg(long, value_parser = |s: &str| parse_schemes(s).map(SchemeList))]
    schemes: Option<SchemeList>,
    /// Ellipsoid tolerance; overrides the config.
    #[arg(long)]
    tol: Option<f64>,
}

/// One `--schemes` value holding the whole comma-separated list.
#[derive(Clone)]
struct SchemeList(Vec<SchemeId>);

#[derive(Subcommand)]
enum Command {
    /// Solve one instance (first sweep value, realization 0) and print it.
    Solve(Common),
    /// Monte Carlo sweep; writes per-realization rows and per-scheme means.
    Sweep(Common),
    /// Two-user means of offloaded bits and residual energy over d2 or R2.
    Tables(Common),
    /// Compare the joint solver with the grid oracle on single-user instances.
    OracleCheck(Common),
    /// Quick run of the numerical property checks.
    Selftest(Common),
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(s) = &self.schemes {
            cfg.schemes = s.0.clone();
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Solve(c) | Command::Sweep(c) | Command::Tables(c) | Command::OracleCheck(c) | Command::Selftest(c) => c,
    };
    let cfg = match common.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match cli.command {
        Command::Solve(_) => solve(&cfg),
        Command::Sweep(_) => sweep(&cfg),
        Command::Tables(_) => tables(&cfg),
        Command::OracleCheck(c) => oracle_check(&cfg, c.realizations.unwrap_or(20)),
        Command::Selftest(_) => selftest(&cfg),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Config { .. } | HarnessError::Invalid(_) => EXIT_CONFIG,
                HarnessError::Solver(wpmec_core::Error::InvalidParameter { .. }) => EXIT_CONFIG,
                HarnessError::Solver(wpmec_core::Error::Infeasible(_)) => EXIT_INFEASIBLE,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<u8, HarnessError> {
    let (params, channels, seed) = instance(cfg, cfg.sweep_values[0], 0)?;
    let rec = run_point(&params, &channels, &cfg.schemes, &cfg.solve_options(), seed)?;
    println!("seed {seed}, {} users, {} antennas", params.num_users(), params.antennas);
    for r in &rec.results {
        println!("{:<13} {:>20} J  {:<10} {}", r.scheme.as_str(), fmt_num(r.objective), r.status.as_str(), r.diagnostics);
    }
    if let Some(a) = &rec.joint.allocation {
        println!("joint allocation: tr(Q) = {} W", fmt_num(a.covariance.trace()));
        println!("{:>5} {:>20} {:>20} {:>20} {:>20}", "user", "l_bits", "t_s", "f_Hz", "residual_J");
        for (i, e) in a.residual_energy().iter().enumerate() {
            println!(
                "{:>5} {:>20} {:>20} {:>20} {:>20}",
                i + 1,
                fmt_num(a.bits[i]),
                fmt_num(a.time[i]),
                fmt_num(a.frequency[i]),
                fmt_num(*e)
            );
        }
    }
    Ok(match rec.joint.status {
        SchemeStatus::Infeasible => EXIT_INFEASIBLE,
        _ if rec.worst_status() == SchemeStatus::ToleranceWarning || rec.joint.status == SchemeStatus::ToleranceWarning => {
            EXIT_WARNING
        }
        _ => 0,
    })
}

fn sweep(cfg: &ExperimentConfig) -> Result<u8, HarnessError> {
    let summary = run_sweep(cfg)?;
    eprintln!(
        "{} rows to {}, means to {}",
        summary.rows,
        cfg.output.display(),
        aggregate_path(&cfg.output).display()
    );
    for m in &summary.means {
        println!(
            "{}={:<12} {:<13} {:>20} J  ({} feasible / {})",
            cfg.sweep_var,
            m.sweep_value,
            m.scheme.as_str(),
            fmt_num(m.objective),
            m.feasible,
            m.realizations
        );
    }
    Ok(if summary.joint_infeasible > 0 {
        EXIT_INFEASIBLE
    } else if summary.warnings > 0 {
        EXIT_WARNING
    } else {
        0
    })
}

fn tables(cfg: &ExperimentConfig) -> Result<u8, HarnessError> {
    let rows = run_tables(cfg)?;
    println!("{:>10} {:>20} {:>20} {:>20} {:>20}", cfg.sweep_var.as_str(), "l1_bits", "l2_bits", "residual1_J", "residual2_J");
    for r in &rows {
        println!(
            "{:>10} {:>20} {:>20} {:>20} {:>20}",
            r.sweep_value,
            fmt_num(r.bits[0]),
            fmt_num(r.bits[1]),
            fmt_num(r.residual[0]),
            fmt_num(r.residual[1])
        );
    }
    let warnings: usize = rows.iter().map(|r| r.warnings).sum();
    let infeasible = rows.iter().any(|r| r.feasible < r.realizations);
    Ok(if infeasible {
        EXIT_INFEASIBLE
    } else if warnings > 0 {
        EXIT_WARNING
    } else {
        0
    })
}

fn oracle_check(cfg: &ExperimentConfig, count: usize) -> Result<u8, HarnessError> {
    let cases = checks::oracle_cases(count, cfg.seed, &cfg.solve_options())?;
    let mut ok = true;
    for c in &cases {
        let pass = c.relative_error <= 1e-3;
        ok &= pass;
        println!(
            "seed {:>20} N={} joint {} oracle {} rel {:.3e} {}",
            c.seed,
            c.antennas,
            fmt_num(c.joint),
            fmt_num(c.oracle),
            c.relative_error,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if ok { 0 } else { EXIT_FAILURE })
}

fn selftest(cfg: &ExperimentConfig) -> Result<u8, HarnessError> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let p = &cfg.base;
    let mut results = Vec::new();
    let inv = checks::inverse_identity_error(1000, p.noise_power, p.bandwidth, &mut rng)?;
    results.push(("inverse identity", inv <= 1e-9, format!("worst {inv:.3e}")));
    let sub = checks::eigen_subgradient_error(20, p.antennas.max(2), 3, cfg.seed, &mut rng)?;
    results.push(("eigenvalue subgradient", sub <= 1e-4, format!("worst {sub:.3e}")));
    let jensen = checks::jensen_min_ratio(&[2, 10, 100], 10_000, &mut rng);
    let jmin = jensen.iter().copied().fold(f64::INFINITY, f64::min);
    results.push(("jensen", jmin >= 1.0 - 1e-9, format!("min ratio {jmin:.12}")));
    let oracle = checks::oracle_cases(4, cfg.seed, &cfg.solve_options())?;
    let omax = oracle.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    results.push(("grid oracle", omax <= 1e-3, format!("worst {omax:.3e}")));
    let mut ok = true;
    for (name, pass, detail) in results {
        ok &= pass;
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(if ok { 0 } else { EXIT_FAILURE })
}
