//! Monte Carlo driver: one solve per (sweep value, realization, scheme).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use wpmec_core::benchmarks::{run_scheme, SchemeId, SchemeResult, SchemeStatus};
use wpmec_core::model::{ChannelSet, SystemParams};
use wpmec_core::SolveOptions;

use crate::channels::{gen_channels, realization_seed};
use crate::config::{ExperimentConfig, SweepVar};
use crate::error::{HarnessError, Result};
use crate::output::{self, MeanRow, RowWriter, TableRow};

/// Relative slack of the dominance check: `joint ≤ s + DOMINANCE_TOL·(1 + joint)`.
pub const DOMINANCE_TOL: f64 = 1e-6;

/// Every requested scheme on one channel realization.
#[derive(Debug, Clone)]
pub struct RealizationRecord {
    pub seed: u64,
    /// Joint design; always solved since it anchors the dominance check.
    pub joint: SchemeResult,
    /// Requested schemes in request order.
    pub results: Vec<SchemeResult>,
}

impl RealizationRecord {
    pub fn result(&self, scheme: SchemeId) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }

    /// Worst status over the requested schemes.
    pub fn worst_status(&self) -> SchemeStatus {
        worst(self.results.iter().map(|r| r.status))
    }
}

fn rank(s: SchemeStatus) -> u8 {
    match s {
        SchemeStatus::Converged => 0,
        SchemeStatus::ToleranceWarning => 1,
        SchemeStatus::Infeasible => 2,
    }
}

fn worst(statuses: impl Iterator<Item = SchemeStatus>) -> SchemeStatus {
    statuses.max_by_key(|s| rank(*s)).unwrap_or(SchemeStatus::Converged)
}

/// Whether `other` respects the joint design's optimality on one instance.
pub fn dominates(joint: &SchemeResult, other: &SchemeResult) -> bool {
    match (joint.feasible, other.feasible) {
        (_, false) => true,
        (false, true) => false,
        (true, true) => joint.objective <= other.objective + DOMINANCE_TOL * (1.0 + joint.objective),
    }
}

/// Solves the joint design plus `schemes` on one instance and checks that no
/// scheme beats the joint design.
pub fn run_point(
    params: &SystemParams,
    channels: &ChannelSet,
    schemes: &[SchemeId],
    options: &SolveOptions,
    seed: u64,
) -> Result<RealizationRecord> {
    let joint = run_scheme(SchemeId::Joint, params, channels, options)?;
    let mut results = Vec::with_capacity(schemes.len());
    for &id in schemes {
        let r = if id == SchemeId::Joint {
            joint.clone()
        } else {
            run_scheme(id, params, channels, options)?
        };
        if !dominates(&joint, &r) {
            return Err(HarnessError::Dominance {
                seed,
                scheme: id,
                objective: r.objective,
                joint: joint.objective,
            });
        }
        results.push(r);
    }
    Ok(RealizationRecord { seed, joint, results })
}

/// Instance of realization `r` at one sweep value.
pub fn instance(cfg: &ExperimentConfig, value: f64, realization: u64) -> Result<(SystemParams, ChannelSet, u64)> {
    let params = cfg.params_at(value)?;
    let seed = realization_seed(cfg.seed, realization);
    let distances: Vec<f64> = params.users.iter().map(|u| u.distance).collect();
    let channels = gen_channels(seed, params.antennas, &distances, cfg.reference_gain, cfg.path_loss_exponent)?;
    Ok((params, channels, seed))
}

/// Solves every (sweep value, realization) job and hands the records to
/// `sink` in job order. Jobs run on the rayon pool in chunks so that the
/// sink sees rows while the sweep is still running.
pub fn for_each_record(
    cfg: &ExperimentConfig,
    schemes: &[SchemeId],
    mut sink: impl FnMut(usize, u64, &RealizationRecord) -> Result<()>,
) -> Result<()> {
    cfg.validate()?;
    let options = cfg.solve_options();
    let jobs: Vec<(usize, u64)> = (0..cfg.sweep_values.len())
        .flat_map(|v| (0..cfg.realizations as u64).map(move |r| (v, r)))
        .collect();
    let chunk = (rayon::current_num_threads() * 8).max(32);
    for batch in jobs.chunks(chunk) {
        let records: Vec<Result<RealizationRecord>> = batch
            .par_iter()
            .map(|&(v, r)| {
                let (params, channels, seed) = instance(cfg, cfg.sweep_values[v], r)?;
                run_point(&params, &channels, schemes, &options, seed)
            })
            .collect();
        for (&(v, r), rec) in batch.iter().zip(records) {
            sink(v, r, &rec?)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SweepSummary {
    pub rows: usize,
    pub means: Vec<MeanRow>,
    /// Realizations whose joint design is infeasible.
    pub joint_infeasible: usize,
    /// Scheme results flagged with a tolerance warning.
    pub warnings: usize,
}

impl SweepSummary {
    pub fn mean(&self, sweep_value: f64, scheme: SchemeId) -> Option<&MeanRow> {
        self.means.iter().find(|m| m.sweep_value == sweep_value && m.scheme == scheme)
    }
}

/// Largest user count across the sweep; fixes the CSV column set.
pub fn max_users(cfg: &ExperimentConfig) -> usize {
    match cfg.sweep_var {
        SweepVar::K => cfg.sweep_values.iter().fold(0, |m, v| m.max(*v as usize)),
        _ => cfg.users(),
    }
}

/// Runs the sweep, writing one row per (sweep value, realization, scheme)
/// to `rows` and the per-scheme means to `aggregate`.
pub fn run_sweep_to(cfg: &ExperimentConfig, rows: impl Write, aggregate: impl Write) -> Result<SweepSummary> {
    let users = max_users(cfg);
    let mut writer = RowWriter::new(rows, users)?;
    let mut acc: Vec<Vec<output::MeanAccumulator>> = cfg
        .sweep_values
        .iter()
        .map(|_| cfg.schemes.iter().map(|_| output::MeanAccumulator::new(users)).collect())
        .collect();
    let mut summary = SweepSummary::default();
    for_each_record(cfg, &cfg.schemes, |v, realization, rec| {
        let value = cfg.sweep_values[v];
        for (s, r) in rec.results.iter().enumerate() {
            writer.write(cfg.sweep_var, value, realization, rec, r)?;
            acc[v][s].add(r);
            summary.rows += 1;
            summary.warnings += usize::from(r.status == SchemeStatus::ToleranceWarning);
        }
        summary.joint_infeasible += usize::from(!rec.joint.feasible);
        writer.flush()
    })?;
    for (v, per_scheme) in acc.into_iter().enumerate() {
        for (s, a) in per_scheme.into_iter().enumerate() {
            summary.means.push(a.finish(cfg.sweep_values[v], cfg.schemes[s], cfg.realizations));
        }
    }
    output::write_means(aggregate, cfg.sweep_var, users, &summary.means)?;
    Ok(summary)
}

/// Path of the aggregate CSV next to the row CSV: `x.csv` → `x_mean.csv`.
pub fn aggregate_path(output: &std::path::Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}_mean.csv"))
}

fn create(path: &std::path::Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// [`run_sweep_to`] into `cfg.output` and its aggregate companion.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let rows = create(&cfg.output)?;
    let agg = create(&aggregate_path(&cfg.output))?;
    run_sweep_to(cfg, rows, agg)
}

/// Per-sweep-value means of the joint design's offloaded bits and residual
/// energies for a two-user system swept over `d2` or `R2`.
pub fn run_tables_to(cfg: &ExperimentConfig, out: impl Write) -> Result<Vec<TableRow>> {
    if cfg.users() != 2 {
        return Err(HarnessError::Invalid(format!("tables need exactly two users, got {}", cfg.users())));
    }
    if !matches!(cfg.sweep_var, SweepVar::D2 | SweepVar::R2) {
        return Err(HarnessError::Invalid(format!("tables sweep d2 or R2, not {}", cfg.sweep_var)));
    }
    let mut acc: Vec<output::MeanAccumulator> = cfg.sweep_values.iter().map(|_| output::MeanAccumulator::new(2)).collect();
    for_each_record(cfg, &[SchemeId::Joint], |v, _, rec| {
        acc[v].add(&rec.joint);
        Ok(())
    })?;
    let rows: Vec<TableRow> = acc
        .into_iter()
        .zip(&cfg.sweep_values)
        .map(|(a, &value)| TableRow::from_mean(a.finish(value, SchemeId::Joint, cfg.realizations)))
        .collect();
    output::write_table(out, cfg.sweep_var, &rows)?;
    Ok(rows)
}

pub fn run_tables(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    run_tables_to(cfg, create(&cfg.output)?)
}
