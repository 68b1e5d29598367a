//! CSV artifacts. Every file has a header row and floats are written with
//! 17 significant digits so they parse back to the same double.

use std::io::Write;

use csv::Writer;
use nalgebra::DMatrix;

use crate::estimator::Observation;
use crate::model::Player;
use crate::riccati::RiccatiSolution;
use crate::simulator::{Comparison, SimSummary, TrajectoryRecord};
use crate::switching_dp::ValueTables;

pub type Result<T> = std::result::Result<T, csv::Error>;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn matrix_header(prefix: &str, rows: usize, cols: usize) -> impl Iterator<Item = String> + '_ {
    (0..rows).flat_map(move |i| (0..cols).map(move |j| format!("{prefix}_{i}{j}")))
}

fn vector_header(prefix: &str, len: usize) -> impl Iterator<Item = String> + '_ {
    (0..len).map(move |i| format!("{prefix}_{i}"))
}

fn push_matrix(row: &mut Vec<String>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            row.push(fmt_f64(m[(i, j)]));
        }
    }
}

/// `t`, then `P1`, `P2` row-major, then `L1`, `L2` (empty at `t = T`).
pub fn write_riccati<W: Write>(out: W, ric: &RiccatiSolution) -> Result<()> {
    let mut w = Writer::from_writer(out);
    let n = ric.p1[0].nrows();
    let (m, _) = ric.l1.first().map(|l| l.shape()).unwrap_or((0, n));
    let mut header = vec!["t".to_string()];
    header.extend(matrix_header("P1", n, n));
    header.extend(matrix_header("P2", n, n));
    header.extend(matrix_header("L1", m, n));
    header.extend(matrix_header("L2", m, n));
    w.write_record(&header)?;
    for t in 0..=ric.horizon() {
        let mut row = vec![t.to_string()];
        push_matrix(&mut row, &ric.p1[t]);
        push_matrix(&mut row, &ric.p2[t]);
        if t < ric.horizon() {
            push_matrix(&mut row, &ric.l1[t]);
            push_matrix(&mut row, &ric.l2[t]);
        } else {
            row.extend(std::iter::repeat_n(String::new(), 2 * m * n));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_values<W: Write>(out: W, tables: &ValueTables) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record([
        "k",
        "age",
        "V1",
        "V2",
        "Vw",
        "delta_star",
        "delta_central",
        "poa",
    ])?;
    for node in tables.iter() {
        w.write_record([
            node.k.to_string(),
            node.age.to_string(),
            fmt_f64(node.v1),
            fmt_f64(node.v2),
            fmt_f64(node.vw),
            bit(node.delta_star),
            bit(node.delta_central),
            fmt_f64(node.poa),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_poa<W: Write>(out: W, tables: &ValueTables) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["k", "age", "poa"])?;
    for node in tables.iter() {
        w.write_record([node.k.to_string(), node.age.to_string(), fmt_f64(node.poa)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_schedule<W: Write>(out: W, schedule: &[bool]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["k", "delta"])?;
    for (k, &d) in schedule.iter().enumerate() {
        w.write_record([k.to_string(), bit(d)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per stage. `y_*` holds `e` on erasure; `w_*` is empty at `T`.
pub fn write_trajectory<W: Write>(out: W, rec: &TrajectoryRecord) -> Result<()> {
    let mut w = Writer::from_writer(out);
    let first = &rec.stages[0];
    let (n, m) = (first.x.len(), first.u1.len());
    let mut header = vec!["t".to_string()];
    header.extend(vector_header("x", n));
    header.extend(vector_header("xhat", n));
    header.extend(vector_header("xhat_pred", n));
    header.extend(vector_header("u1", m));
    header.extend(vector_header("u2", m));
    header.push("delta".into());
    header.extend(vector_header("y", n));
    header.push("c1".into());
    header.push("c2".into());
    header.extend(vector_header("w", n));
    w.write_record(&header)?;
    for s in &rec.stages {
        let mut row = vec![s.t.to_string()];
        for v in [&s.x, &s.xhat, &s.xhat_pred, &s.u1, &s.u2] {
            row.extend(v.iter().map(|x| fmt_f64(*x)));
        }
        row.push(bit(s.delta));
        match &s.y {
            Observation::State(y) => row.extend(y.iter().map(|x| fmt_f64(*x))),
            Observation::Erasure => row.extend(std::iter::repeat_n("e".to_string(), n)),
        }
        row.push(fmt_f64(s.c1));
        row.push(fmt_f64(s.c2));
        match &s.w {
            Some(wv) => row.extend(wv.iter().map(|x| fmt_f64(*x))),
            None => row.extend(std::iter::repeat_n(String::new(), n)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, s: &SimSummary) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record([
        "n_runs",
        "mean_cost1",
        "se1",
        "mean_cost2",
        "se2",
        "closure_count",
        "analytic1",
        "analytic2",
    ])?;
    w.write_record([
        s.n_runs.to_string(),
        fmt_f64(s.mean_cost1),
        fmt_f64(s.se1),
        fmt_f64(s.mean_cost2),
        fmt_f64(s.se2),
        s.closure_count.to_string(),
        fmt_f64(s.analytic1),
        fmt_f64(s.analytic2),
    ])?;
    w.flush()?;
    Ok(())
}

/// One row per player: both arms side by side plus the cost ratios.
pub fn write_compare<W: Write>(out: W, c: &Comparison) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record([
        "player",
        "analytic_finite",
        "analytic_open",
        "ratio_analytic",
        "mean_finite",
        "se_finite",
        "mean_open",
        "se_open",
        "ratio_empirical",
        "closures_finite",
        "closures_open",
    ])?;
    for p in Player::BOTH {
        w.write_record([
            (p.index() + 1).to_string(),
            fmt_f64(c.finite.analytic(p)),
            fmt_f64(c.open.analytic(p)),
            fmt_f64(c.analytic_ratio(p)),
            fmt_f64(c.finite.mean(p)),
            fmt_f64(c.finite.se(p)),
            fmt_f64(c.open.mean(p)),
            fmt_f64(c.open.se(p)),
            fmt_f64(c.empirical_ratio(p)),
            c.finite.closure_count.to_string(),
            c.open.closure_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
