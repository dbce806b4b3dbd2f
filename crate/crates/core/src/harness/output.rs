//! Deterministic CSV writers. Floats are printed with `{:.16e}` so output is
//! byte-identical whenever the numbers are.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::to_toml;
use crate::harness::ode::ConvergenceRow;
use crate::harness::run::StepRecord;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_steps_csv(w: &mut impl Write, records: &[StepRecord]) -> Result<()> {
    writeln!(w, "n,t,tau,modified_energy,original_energy,roughness,aux,accepted,error")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            num(r.t),
            num(r.tau),
            num(r.modified_energy),
            num(r.original_energy),
            num(r.roughness),
            num(r.aux),
            r.accepted as u8,
            num(r.error)
        )?;
    }
    Ok(())
}

pub fn write_table_csv(w: &mut impl Write, rows: &[ConvergenceRow]) -> Result<()> {
    writeln!(w, "N,tau,error,order")?;
    for r in rows {
        let order = r.order.map(num).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.n, num(r.tau), num(r.error), order)?;
    }
    Ok(())
}

/// Two-column `t,value` series, e.g. the SOE error profile.
pub fn write_series_csv(w: &mut impl Write, header: (&str, &str), points: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "{},{}", header.0, header.1)?;
    for (x, y) in points {
        writeln!(w, "{},{}", num(*x), num(*y))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a, C, R> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    results: &'a R,
}

/// Run-metadata file echoing the resolved configuration (seeds included) and results.
pub fn write_metadata<C: Serialize, R: Serialize>(path: &Path, command: &str, config: &C, results: &R) -> Result<()> {
    let meta = Metadata {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        results,
    };
    std::fs::write(path, to_toml(&meta)?)?;
    Ok(())
}
