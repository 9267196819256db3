//! CSV and plain-text renderings of test batteries and simulation reports.
//!
//! CSV output carries full precision (shortest round-trip formatting);
//! tables round to two decimals. Undefined values render as `NA`.

use std::fmt::Write as _;
use std::io::Write;

use crate::cdtest::{Battery, TestOutcome};
use crate::mc::RejectionReport;

pub const NA: &str = "NA";

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn full(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn two(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.2}"))
}

fn csv_err(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

/// One row per requested test:
/// `test,statistic,null_dist,sidedness,p_value,reject,status`.
pub fn write_battery_csv<W: Write>(battery: &Battery, w: W) -> std::io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["test", "statistic", "null_dist", "sidedness", "p_value", "reject", "status"]).map_err(csv_err)?;
    for (kind, outcome) in &battery.entries {
        let rec = match outcome {
            TestOutcome::Computed(r) => [
                kind.name().to_string(),
                r.statistic.to_string(),
                r.null_dist.to_string(),
                r.sidedness.to_string(),
                r.p_value.to_string(),
                r.reject.to_string(),
                "ok".to_string(),
            ],
            TestOutcome::Unsupported(_) | TestOutcome::Failed(_) => {
                let status = if matches!(outcome, TestOutcome::Unsupported(_)) { "unsupported" } else { "failed" };
                [kind.name().into(), NA.into(), NA.into(), NA.into(), NA.into(), NA.into(), status.into()]
            }
        };
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()
}

/// Aligned table of a battery, preceded by `title` when non-empty.
pub fn format_battery_table(battery: &Battery, title: &str) -> String {
    let mut rows = vec![["test", "statistic", "p-value", "reject", "null"].map(String::from).to_vec()];
    let mut notes = Vec::new();
    for (kind, outcome) in &battery.entries {
        match outcome {
            TestOutcome::Computed(r) => rows.push(vec![
                kind.name().into(),
                format!("{:.2}", r.statistic),
                format!("{:.2}", r.p_value),
                if r.reject { "yes" } else { "no" }.into(),
                format!("{} {}", r.null_dist, r.sidedness),
            ]),
            TestOutcome::Unsupported(msg) | TestOutcome::Failed(msg) => {
                rows.push(vec![kind.name().into(), NA.into(), NA.into(), NA.into(), String::new()]);
                notes.push(format!("{}: {msg}", kind.name()));
            }
        }
    }
    let mut s = String::new();
    if !title.is_empty() {
        writeln!(s, "{title}").unwrap();
    }
    s.push_str(&align(&rows));
    for n in notes {
        writeln!(s, "note: {n}").unwrap();
    }
    s
}

/// One row per (cell, test):
/// `dgp,k,cell_T,cell_n,dist,alternative,test,frequency,mc_se,failed`.
pub fn write_report_csv<W: Write>(report: &RejectionReport, w: W) -> std::io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["dgp", "k", "cell_T", "cell_n", "dist", "alternative", "test", "frequency", "mc_se", "failed"])
        .map_err(csv_err)?;
    for row in &report.rows {
        let c = &report.plan.cells[row.cell];
        out.write_record([
            c.dgp.to_string(),
            c.panel_k().to_string(),
            c.t.to_string(),
            c.n.to_string(),
            c.error_dist.to_string(),
            c.alternative.to_string(),
            row.test.name().to_string(),
            full(row.frequency),
            full(row.mc_se),
            row.failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

/// Publication-style table: one block per (design, k, errors, alternative), tests
/// down the rows and the block's (T, n) cells across the columns, values
/// in percent to two decimals.
pub fn format_report_table(report: &RejectionReport) -> String {
    let plan = &report.plan;
    let mut blocks: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, c) in plan.cells.iter().enumerate() {
        let key = format!("{}  k={}  errors={}  alternative={}", c.dgp, c.panel_k(), c.error_dist, c.alternative);
        match blocks.iter_mut().find(|(k, _)| *k == key) {
            Some((_, cells)) => cells.push(i),
            None => blocks.push((key, vec![i])),
        }
    }
    let mut s = String::new();
    for (b, (key, cells)) in blocks.iter().enumerate() {
        if b > 0 {
            s.push('\n');
        }
        writeln!(s, "{key}  reps={}  alpha={}", plan.reps, plan.alpha).unwrap();
        let mut rows = vec![std::iter::once("(T,n)".to_string())
            .chain(cells.iter().map(|&i| format!("({},{})", plan.cells[i].t, plan.cells[i].n)))
            .collect::<Vec<_>>()];
        for &test in &plan.tests {
            rows.push(
                std::iter::once(test.name().to_string())
                    .chain(cells.iter().map(|&i| two(report.frequency(i, test))))
                    .collect(),
            );
        }
        s.push_str(&align(&rows));
        for &i in cells {
            let failed = report.rows.iter().filter(|r| r.cell == i).map(|r| r.failed).max().unwrap_or(0);
            if let Some(msg) = &report.failure_notes[i] {
                let c = &plan.cells[i];
                writeln!(s, "note: ({},{}) {failed} failed replications, e.g. {msg}", c.t, c.n).unwrap();
            }
        }
    }
    s
}

/// First column left-aligned, the rest right-aligned, two spaces apart.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c == 0 {
                write!(line, "{cell:<w$}", w = widths[0]).unwrap();
            } else {
                write!(line, "  {cell:>w$}", w = widths[c]).unwrap();
            }
        }
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s
}
