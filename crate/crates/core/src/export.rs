//! CSV tables. Column order is part of the interface.

use std::io::Write;

use crate::error::{Error, Result};
use crate::monte_carlo::Benchmark;
use crate::mttf::MttfRow;
use crate::solver::TraceRow;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// `t,min,max,avg,stdev,ex`
pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "min", "max", "avg", "stdev", "ex"])
        .map_err(csv_err)?;
    for r in rows {
        w.serialize((r.t, r.min, r.max, r.avg, r.stdev, r.ex))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,p_min,increment,running_sum`
pub fn write_mttf_trace<W: Write>(out: W, rows: &[MttfRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "p_min", "increment", "running_sum"])
        .map_err(csv_err)?;
    for r in rows {
        w.serialize((r.t, r.p_min, r.increment, r.running_sum))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `n,rule,r,mc_time,solver_time,speedup`
pub fn write_benchmarks<W: Write>(out: W, rows: &[Benchmark]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "rule", "r", "mc_time", "solver_time", "speedup"])
        .map_err(csv_err)?;
    for b in rows {
        w.serialize((b.n, b.rule.name(), b.r, b.mc_time, b.solver_time, b.speedup))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
