//! CSV layouts. Floats carry 12 significant digits; non-finite values are
//! written as `inf`/`nan` and absent per-user entries as empty fields.

use std::io::Write;

use wpmec_core::benchmarks::{SchemeId, SchemeResult, SchemeStatus};

use crate::config::SweepVar;
use crate::error::Result;
use crate::experiment::RealizationRecord;

pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn per_user_header(users: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(3 * users);
    for prefix in ["l_opt_bits_user", "t_opt_s_user", "residual_J_user"] {
        h.extend((1..=users).map(|i| format!("{prefix}{i}")));
    }
    h
}

/// `[ℓ…, t…, residual…]`, padded to `users` entries each.
fn per_user_fields(users: usize, bits: &[f64], time: &[f64], residual: &[f64]) -> Vec<String> {
    let mut out = Vec::with_capacity(3 * users);
    for v in [bits, time, residual] {
        out.extend((0..users).map(|i| fmt_opt(v.get(i).copied())));
    }
    out
}

/// Streams per-realization rows.
pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
    users: usize,
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W, users: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["sweep_var", "sweep_value", "realization", "seed", "scheme", "objective_J", "status"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(per_user_header(users));
        inner.write_record(&header)?;
        Ok(Self { inner, users })
    }

    pub fn write(&mut self, var: SweepVar, value: f64, realization: u64, rec: &RealizationRecord, r: &SchemeResult) -> Result<()> {
        let mut row = vec![
            var.as_str().to_string(),
            fmt_num(value),
            realization.to_string(),
            rec.seed.to_string(),
            r.scheme.as_str().to_string(),
            fmt_num(r.objective),
            r.status.as_str().to_string(),
        ];
        match &r.allocation {
            Some(a) => row.extend(per_user_fields(self.users, &a.bits, &a.time, &a.residual_energy())),
            None => row.extend(std::iter::repeat_n(String::new(), 3 * self.users)),
        }
        self.inner.write_record(&row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Means over the feasible realizations of one (sweep value, scheme).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub sweep_value: f64,
    pub scheme: SchemeId,
    /// `+∞` when no realization is feasible.
    pub objective: f64,
    pub bits: Vec<f64>,
    pub time: Vec<f64>,
    pub residual: Vec<f64>,
    pub feasible: usize,
    pub warnings: usize,
    pub realizations: usize,
}

/// Running sums in realization order, so means are reproducible bit for bit.
#[derive(Debug, Clone)]
pub struct MeanAccumulator {
    objective: f64,
    bits: Vec<f64>,
    time: Vec<f64>,
    residual: Vec<f64>,
    feasible: usize,
    warnings: usize,
    /// Per-user number of contributions; varies only in a `K` sweep.
    counts: Vec<usize>,
}

impl MeanAccumulator {
    pub fn new(users: usize) -> Self {
        Self {
            objective: 0.0,
            bits: vec![0.0; users],
            time: vec![0.0; users],
            residual: vec![0.0; users],
            feasible: 0,
            warnings: 0,
            counts: vec![0; users],
        }
    }

    pub fn add(&mut self, r: &SchemeResult) {
        self.warnings += usize::from(r.status == SchemeStatus::ToleranceWarning);
        let Some(a) = r.allocation.as_ref().filter(|_| r.feasible) else {
            return;
        };
        self.feasible += 1;
        self.objective += r.objective;
        for (i, e) in a.residual_energy().into_iter().enumerate().take(self.counts.len()) {
            self.bits[i] += a.bits[i];
            self.time[i] += a.time[i];
            self.residual[i] += e;
            self.counts[i] += 1;
        }
    }

    pub fn finish(self, sweep_value: f64, scheme: SchemeId, realizations: usize) -> MeanRow {
        let div = |sums: Vec<f64>| -> Vec<f64> {
            sums.into_iter()
                .zip(&self.counts)
                .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
                .collect()
        };
        MeanRow {
            sweep_value,
            scheme,
            objective: if self.feasible == 0 {
                f64::INFINITY
            } else {
                self.objective / self.feasible as f64
            },
            bits: div(self.bits),
            time: div(self.time),
            residual: div(self.residual),
            feasible: self.feasible,
            warnings: self.warnings,
            realizations,
        }
    }
}

pub fn write_means(out: impl Write, var: SweepVar, users: usize, means: &[MeanRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "sweep_var",
        "sweep_value",
        "scheme",
        "mean_objective_J",
        "feasible",
        "warnings",
        "realizations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(per_user_header(users).into_iter().map(|h| format!("mean_{h}")));
    w.write_record(&header)?;
    for m in means {
        let mut row = vec![
            var.as_str().to_string(),
            fmt_num(m.sweep_value),
            m.scheme.as_str().to_string(),
            fmt_num(m.objective),
            m.feasible.to_string(),
            m.warnings.to_string(),
            m.realizations.to_string(),
        ];
        let fields = per_user_fields(users, &m.bits, &m.time, &m.residual);
        row.extend(fields.into_iter().map(|f| if f == "nan" { String::new() } else { f }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One column of the two-user tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub sweep_value: f64,
    /// Mean offloaded bits of users 1 and 2.
    pub bits: [f64; 2],
    /// Mean residual energy of users 1 and 2 in J.
    pub residual: [f64; 2],
    pub feasible: usize,
    pub warnings: usize,
    pub realizations: usize,
}

impl TableRow {
    pub fn from_mean(m: MeanRow) -> Self {
        Self {
            sweep_value: m.sweep_value,
            bits: [m.bits[0], m.bits[1]],
            residual: [m.residual[0], m.residual[1]],
            feasible: m.feasible,
            warnings: m.warnings,
            realizations: m.realizations,
        }
    }
}

pub fn write_table(out: impl Write, var: SweepVar, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_var",
        "sweep_value",
        "l_opt_bits_user1",
        "l_opt_bits_user2",
        "residual_J_user1",
        "residual_J_user2",
        "feasible",
        "warnings",
        "realizations",
    ])?;
    for r in rows {
        w.write_record([
            var.as_str().to_string(),
            fmt_num(r.sweep_value),
            fmt_num(r.bits[0]),
            fmt_num(r.bits[1]),
            fmt_num(r.residual[0]),
            fmt_num(r.residual[1]),
            r.feasible.to_string(),
            r.warnings.to_string(),
            r.realizations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
