//! CSV form of observable series and scan tables.
//!
//! Reals are written with 17 significant digits so that reading a file back
//! reproduces every value bit for bit. An absent fidelity is an empty cell.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::experiments::{FreezeReport, ScanReport, TStarReport};
use crate::observables::{ObservableSeries, Sample};

pub const SERIES_HEADER: [&str; 8] = [
    "kick", "time", "n2", "entropy", "pr", "lmax", "norm_err", "fidelity",
];

/// Full-precision decimal form of a real.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_series<W: Write>(series: &ObservableSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for s in &series.samples {
        w.write_record([
            s.kick.to_string(),
            fmt_real(s.time),
            fmt_real(s.n2),
            fmt_real(s.entropy),
            fmt_real(s.pr),
            s.lmax.to_string(),
            fmt_real(s.norm_err),
            s.fidelity.map(fmt_real).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(input: R) -> Result<ObservableSeries> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(SERIES_HEADER) {
        return Err(Error::InvalidParam(format!(
            "unexpected series header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut series = ObservableSeries::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| Error::InvalidParam(format!("row {}: bad `{col}` value", row + 1));
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(SERIES_HEADER[i]));
        series.push(Sample {
            kick: rec[0].parse().map_err(|_| bad("kick"))?,
            time: real(1)?,
            n2: real(2)?,
            entropy: real(3)?,
            pr: real(4)?,
            lmax: rec[5].parse().map_err(|_| bad("lmax"))?,
            norm_err: real(6)?,
            fidelity: if rec[7].is_empty() { None } else { Some(real(7)?) },
        });
    }
    Ok(series)
}

pub fn write_scan<W: Write>(report: &ScanReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "resume_kick", "final_fidelity", "irreversible"])?;
    for p in &report.points {
        w.write_record([
            fmt_real(p.epsilon),
            fmt_opt(p.resume_kick),
            fmt_real(p.final_fidelity),
            p.irreversible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tstar<W: Write>(report: &TStarReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t_star",
        "resume_kick",
        "delay",
        "final_fidelity",
        "eps_th_at_break",
        "lmax_at_break",
    ])?;
    for e in &report.entries {
        let r = &e.result;
        w.write_record([
            e.t_star.to_string(),
            fmt_opt(r.resume_kick),
            fmt_opt(r.resume_delay()),
            fmt_real(r.final_fidelity),
            fmt_real(r.eps_th_at_break),
            r.lmax_at_break.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_freeze<W: Write>(report: &FreezeReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_star", "lmax", "eps_th"])?;
    for e in &report.entries {
        w.write_record([e.t_star.to_string(), e.lmax.to_string(), fmt_real(e.eps_th)])?;
    }
    w.flush()?;
    Ok(())
}
