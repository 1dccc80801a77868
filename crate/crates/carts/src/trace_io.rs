//! NG-Scope style PUSCH traces: `frame,slot,rnti,start_rb,num_rb`, one
//! allocation per line, header optional.

use std::io::Write;
use std::path::Path;

use carts_core::trace::{rescale_all, select_top_n, PuschRecord, TraceError, TrafficSchedule};
use carts_core::TddPattern;
use log::warn;
use serde::Serialize;

use crate::Error;

/// Resource blocks of the 20 MHz LTE grid the traces were sniffed on.
pub const SOURCE_RBS: usize = 100;
/// Bandwidth ratio from the 100-RB source grid to 272 RBs.
pub const DEFAULT_SCALE: f64 = 2.72;

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedTrace {
    pub records: Vec<PuschRecord>,
    pub rejected: Vec<RejectedRow>,
}

fn parse_int(field: &str) -> Option<i64> {
    let f = field.trim();
    match f.strip_prefix("0x").or_else(|| f.strip_prefix("0X")) {
        Some(hex) => i64::from_str_radix(hex, 16).ok(),
        None => f.parse().ok(),
    }
}

fn parse_row(fields: &[&str], line: usize, source_rbs: usize) -> Result<PuschRecord, String> {
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let mut v = [0i64; 5];
    for (i, f) in fields.iter().enumerate() {
        v[i] = parse_int(f).ok_or_else(|| format!("field {} ({f:?}) is not an integer", i + 1))?;
    }
    if v[4] <= 0 {
        return Err(TraceError::NonPositiveLength { line }.to_string());
    }
    if v[..4].iter().any(|&x| x < 0) {
        return Err("negative frame, slot, rnti or start_rb".into());
    }
    let rnti = u32::try_from(v[2]).map_err(|_| format!("rnti {} out of range", v[2]))?;
    let record = PuschRecord { frame: v[0] as u64, slot: v[1] as u64, rnti, start_rb: v[3] as usize, num_rb: v[4] as usize };
    record.validate(source_rbs, line).map_err(|e| e.to_string())?;
    Ok(record)
}

/// Parses a trace. Rows that fail to parse or fall outside the
/// `source_rbs` grid are collected in `rejected` with their 1-based line
/// numbers; an input without a single non-blank line is an error.
pub fn parse_trace(input: &str, source_rbs: usize) -> Result<ParsedTrace, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input.as_bytes());
    let mut out = ParsedTrace::default();
    let mut seen_any = false;
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Csv(e.to_string()))?;
        let line = row.position().map_or(i + 1, |p| p.line() as usize);
        let fields: Vec<&str> = row.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        let header = !seen_any && fields.first().is_some_and(|f| parse_int(f).is_none());
        seen_any = true;
        if header {
            continue;
        }
        match parse_row(&fields, line, source_rbs) {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejected.push(RejectedRow { line, reason }),
        }
    }
    if !seen_any {
        return Err(Error::EmptyTrace);
    }
    if out.records.is_empty() && out.rejected.is_empty() {
        warn!("trace has a header but no records");
    }
    for r in &out.rejected {
        warn!("trace line {}: {}", r.line, r.reason);
    }
    Ok(out)
}

/// Reads, rescales and selects the busiest `n_ues` RNTIs of a trace file.
pub fn load_schedule(
    path: &Path,
    n_ues: usize,
    source_rbs: usize,
    scale: f64,
    n_rbs: usize,
    tdd: &TddPattern,
) -> Result<TrafficSchedule, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_trace(&text, source_rbs)?;
    let (scaled, stats) = rescale_all(&parsed.records, scale, n_rbs);
    if stats.clamped > 0 {
        log::info!("{} of {} allocations clamped at the grid edge", stats.clamped, stats.records);
    }
    let (schedule, sel) = select_top_n(&scaled, n_ues, n_rbs, tdd)?;
    if sel.short_of_ues(n_ues) {
        warn!("trace {} has only {} UEs", path.display(), sel.distinct_ues);
    }
    if sel.dropped > 0 || sel.shifted > 0 {
        log::info!("{} colliding allocations shifted, {} dropped", sel.shifted, sel.dropped);
    }
    Ok(schedule)
}

#[derive(Serialize)]
struct ScheduleRow {
    slot: u64,
    ue: usize,
    start_rb: usize,
    num_rb: usize,
}

/// `slot,ue,start_rb,num_rb` audit dump of a schedule.
pub fn write_schedule<W: Write>(schedule: &TrafficSchedule, w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    for (slot, g) in schedule.iter() {
        out.serialize(ScheduleRow { slot, ue: g.ue, start_rb: g.rbs.start, num_rb: g.rbs.len })?;
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
