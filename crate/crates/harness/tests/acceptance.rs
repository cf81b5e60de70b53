//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use wpmec_core::benchmarks::SchemeId;
use wpmec_core::{solve_joint, SolveOptions, SolveStatus};
use wpmec_harness::checks;
use wpmec_harness::config::ExperimentConfig;
use wpmec_harness::experiment::{instance, run_point, run_sweep_to, run_tables_to, SweepSummary};
use wpmec_harness::HarnessError;

const SEED: u64 = 20_180_601;
const REALIZATIONS: usize = 100;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn config_file(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    let mut c = ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    c.realizations = REALIZATIONS;
    c.seed = SEED;
    c
}

fn sweep(cfg: &ExperimentConfig) -> Result<(SweepSummary, Vec<u8>, Vec<u8>), HarnessError> {
    let (mut rows, mut agg) = (Vec::new(), Vec::new());
    let s = run_sweep_to(cfg, &mut rows, &mut agg)?;
    Ok((s, rows, agg))
}

/// Per-realization statistics of the homogeneous runs behind criteria 1, 2,
/// 4 and 5.
#[derive(Default)]
struct Homogeneous {
    instances: usize,
    dominance_failures: Vec<String>,
    gaps: Vec<f64>,
    unflagged_gaps: usize,
    worst_kkt: f64,
    converged: usize,
    structure_failures: Vec<String>,
    seconds: f64,
}

/// `N = 4` users 5 m away with 10 kbit tasks and `T = 0.1 s`.
fn homogeneous() -> Homogeneous {
    let mut h = Homogeneous::default();
    let options = SolveOptions::default();
    let start = Instant::now();
    for k in [2usize, 6, 10] {
        let cfg: ExperimentConfig = format!("users = {k}\nblock_length = 0.1\nuser.*.task_bits = 10e3\nuser.*.distance = 5\nseed = {SEED}\n")
            .parse()
            .unwrap();
        for r in 0..REALIZATIONS as u64 {
            h.instances += 1;
            let (params, channels, seed) = instance(&cfg, cfg.sweep_values[0], r).unwrap();
            match run_point(&params, &channels, &SchemeId::ALL, &options, seed) {
                Ok(_) => {}
                Err(e) => h.dominance_failures.push(format!("K={k} r={r}: {e}")),
            }
            let report = match solve_joint(&params, &channels, &options) {
                Ok(rep) => rep,
                Err(e) => {
                    h.structure_failures.push(format!("K={k} r={r}: {e}"));
                    continue;
                }
            };
            let p = report.primal_value;
            let gap = (p - report.dual_value).abs() / p.abs();
            h.gaps.push(gap);
            let converged = report.status == SolveStatus::Converged;
            if gap > 1e-4 && converged {
                h.unflagged_gaps += 1;
            }
            if !converged {
                continue;
            }
            h.converged += 1;
            h.worst_kkt = h.worst_kkt.max(report.kkt.max_product());
            let alloc = &report.allocation;
            let residual = alloc.residual_energy();
            for (i, u) in params.users.iter().enumerate() {
                let lambda = report.dual.lambda[i];
                if u.task_bits > 0.0 && lambda > 1e-7 && alloc.bits[i] >= u.task_bits {
                    h.structure_failures.push(format!("K={k} r={r} user {i}: λ = {lambda:.3e} but ℓ = R"));
                }
                if residual[i] > 1e-8 && alloc.bits[i] > 1e-8 * u.task_bits {
                    h.structure_failures.push(format!(
                        "K={k} r={r} user {i}: slack {:.3e} J with ℓ = {:.3e}",
                        residual[i], alloc.bits[i]
                    ));
                }
            }
        }
    }
    h.seconds = start.elapsed().as_secs_f64();
    h
}

fn first(list: &[String]) -> String {
    list.first().cloned().unwrap_or_default()
}

fn criterion_1(h: &Homogeneous) -> Outcome {
    let ok = h.dominance_failures.is_empty() && h.seconds <= 600.0;
    outcome(
        ok,
        format!(
            "{} instances x 6 schemes, {} violations, {:.1} s {}",
            h.instances,
            h.dominance_failures.len(),
            h.seconds,
            first(&h.dominance_failures)
        ),
    )
}

fn criterion_2(h: &Homogeneous) -> Outcome {
    let within = h.gaps.iter().filter(|g| **g <= 1e-4).count();
    let worst = h.gaps.iter().copied().fold(0.0, f64::max);
    let share = within as f64 / h.instances as f64;
    outcome(
        share >= 0.99 && h.unflagged_gaps == 0,
        format!(
            "{within}/{} within 1e-4, worst {worst:.3e}, {} above without a warning",
            h.instances, h.unflagged_gaps
        ),
    )
}

fn criterion_3() -> Outcome {
    match checks::oracle_cases(20, SEED, &SolveOptions::default()) {
        Ok(cases) => {
            let worst = cases.iter().map(|c| c.relative_error).fold(0.0, f64::max);
            let n1 = cases.iter().filter(|c| c.antennas == 1).count();
            outcome(
                worst <= 1e-3,
                format!("{} instances ({n1} with N=1), worst relative error {worst:.3e}", cases.len()),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_4(h: &Homogeneous) -> Outcome {
    outcome(
        h.worst_kkt <= 1e-5 && h.converged > 0,
        format!("{} converged instances, worst product {:.3e} J", h.converged, h.worst_kkt),
    )
}

fn criterion_5(h: &Homogeneous) -> Outcome {
    outcome(
        h.structure_failures.is_empty() && h.converged > 0,
        format!(
            "{} converged instances, {} violations {}",
            h.converged,
            h.structure_failures.len(),
            first(&h.structure_failures)
        ),
    )
}

fn criterion_6(rng: &mut ChaCha20Rng) -> Outcome {
    match checks::inverse_identity_error(10_000, 1e-9, 2e6, rng) {
        Ok(worst) => outcome(worst <= 1e-9, format!("10000 samples, worst relative error {worst:.3e}")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_7(rng: &mut ChaCha20Rng) -> Outcome {
    match checks::eigen_subgradient_error(100, 4, 3, SEED, rng) {
        Ok(worst) => outcome(worst <= 1e-4, format!("100 points, worst mismatch {worst:.3e}")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_8(rng: &mut ChaCha20Rng) -> Outcome {
    let ratios = checks::jensen_min_ratio(&[2, 10, 100], 100_000, rng);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        min >= 1.0 - 1e-9,
        format!("min ratios {:.12} {:.12} {:.12}", ratios[0], ratios[1], ratios[2]),
    )
}

fn means(s: &SweepSummary, values: &[f64], scheme: SchemeId) -> Vec<f64> {
    values.iter().map(|v| s.mean(*v, scheme).map_or(f64::NAN, |m| m.objective)).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_9() -> Outcome {
    let mut by_block = config_file("block_length.conf");
    by_block.schemes = vec![SchemeId::Joint, SchemeId::LocalOnly, SchemeId::OffloadOnly];
    by_block.sweep_values = vec![0.05, 0.1, 0.2, 0.35, 0.5];
    let by_bandwidth = {
        let mut c = config_file("bandwidth.conf");
        c.sweep_values = vec![1e6, 2e6, 4e6, 8e6];
        c
    };
    let (s3, s6) = match (sweep(&by_block), sweep(&by_bandwidth)) {
        (Ok(a), Ok(b)) => (a.0, b.0),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
    };
    let local_t = means(&s3, &by_block.sweep_values, SchemeId::LocalOnly);
    let offload_t = means(&s3, &by_block.sweep_values, SchemeId::OffloadOnly);
    let offload_change = (offload_t[4] - offload_t[1]).abs() / offload_t[1];
    let a = strictly_decreasing(&local_t) && offload_change < 0.05;

    let mut b = true;
    let mut b_detail = Vec::new();
    for id in [
        SchemeId::Joint,
        SchemeId::OffloadOnly,
        SchemeId::Isotropic,
        SchemeId::Separate,
        SchemeId::EqualTime,
    ] {
        let m = means(&s6, &by_bandwidth.sweep_values, id);
        if !strictly_decreasing(&m) {
            b = false;
            b_detail.push(format!("{id} not decreasing {m:?}"));
        }
    }
    let local_b = means(&s6, &by_bandwidth.sweep_values, SchemeId::LocalOnly);
    let invariant = local_b.iter().all(|m| m.to_bits() == local_b[0].to_bits());
    b &= invariant;
    outcome(
        a && b,
        format!(
            "(a) local_only over T {:?}, offload_only change {:.3}% ; (b) offloading means decreasing in B: {}, local_only bitwise invariant: {invariant} {}",
            local_t.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            100.0 * offload_change,
            b_detail.is_empty(),
            b_detail.join("; ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut cfg = config_file("table_distance.conf");
    cfg.sweep_values = vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let rows = match run_tables_to(&cfg, Vec::new()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let far = rows
        .iter()
        .filter(|r| r.sweep_value >= 3.0)
        .map(|r| r.residual[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let near: Vec<f64> = rows.iter().map(|r| r.residual[0]).collect();
    let near_ok = near.windows(2).all(|w| w[1] >= w[0]);
    let bits_ok = rows.iter().filter(|r| r.sweep_value >= 3.0).all(|r| r.bits[1] > r.bits[0]);
    let far_ok = far <= 1e-8;
    outcome(
        far_ok && near_ok && bits_ok,
        format!(
            "far residual max {far:.3e} J, near residual non-decreasing {near_ok} {:?}, l2 > l1 {bits_ok} {:?}",
            near.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            rows.iter().map(|r| format!("{:.0}/{:.0}", r.bits[0], r.bits[1])).collect::<Vec<_>>()
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut cfg = config_file("task_bits.conf");
    cfg.realizations = 10;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(&cfg))
    };
    match (run(1), run(1), run(3)) {
        (Ok(a), Ok(b), Ok(c)) => {
            let same = a.1 == b.1 && a.2 == b.2;
            let schedule_free = a.1 == c.1 && a.2 == c.2;
            outcome(
                same && schedule_free && !a.1.is_empty(),
                format!(
                    "{} bytes of rows; repeat identical {same}; 1 vs 3 threads identical {schedule_free}",
                    a.1.len()
                ),
            )
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => outcome(false, e.to_string()),
    }
}

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let h = homogeneous();
    let results = [
        ("dominance", criterion_1(&h)),
        ("duality gap", criterion_2(&h)),
        ("oracle equivalence", criterion_3()),
        ("complementary slackness", criterion_4(&h)),
        ("optimal structure", criterion_5(&h)),
        ("inverse identity", criterion_6(&mut rng)),
        ("eigenvalue subgradient", criterion_7(&mut rng)),
        ("jensen", criterion_8(&mut rng)),
        ("sweep trends", criterion_9()),
        ("two-user tables", criterion_10()),
        ("determinism", criterion_11()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {:>2} {:<24} {}  {}",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
