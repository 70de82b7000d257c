//! CSV export of run reports: one file for the slider trace, one for events.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::Result;
use crate::pipeline::{DetectionEvent, RunReport, TraceRecord};

pub fn write_csv<T: serde::Serialize, W: Write>(rows: &[T], header: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub const TRACE_HEADER: [&str; 6] = ["iteration", "time", "level", "enabled", "present", "tap"];
pub const EVENTS_HEADER: [&str; 6] = ["window_start", "time", "tap", "pos_count", "neg_count", "vote_run"];

pub fn write_trace<W: Write>(trace: &[TraceRecord], out: W) -> Result<()> {
    write_csv(trace, &TRACE_HEADER, out)
}

pub fn write_events<W: Write>(events: &[DetectionEvent], out: W) -> Result<()> {
    write_csv(events, &EVENTS_HEADER, out)
}

/// Writes `trace.csv` and `events.csv` into `dir`.
pub fn export_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_trace(&report.trace, std::fs::File::create(dir.join("trace.csv"))?)?;
    write_events(&report.events, std::fs::File::create(dir.join("events.csv"))?)
}
